use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Venue {
    Acl,
    Emnlp,
    Naacl,
    Other,
}

impl Venue {
    pub fn is_target(self) -> bool {
        self != Venue::Other
    }

    /// ACL, EMNLP, NAACL if the booktitle or URL path contains the venue as a
    /// whole token (case-insensitive), checked in that order; otherwise OTHER.
    pub fn derive(booktitle: Option<&str>, url: &str) -> Venue {
        let path = url
            .split_once("://")
            .map_or(url, |(_, rest)| rest.split_once('/').map_or("", |(_, p)| p));
        let tokens: Vec<String> = booktitle
            .into_iter()
            .chain(std::iter::once(path))
            .flat_map(|s| s.split(|c: char| !c.is_alphanumeric()))
            .filter(|t| !t.is_empty())
            .map(str::to_ascii_lowercase)
            .collect();
        for (name, venue) in [("acl", Venue::Acl), ("emnlp", Venue::Emnlp), ("naacl", Venue::Naacl)] {
            if tokens.iter().any(|t| t == name) {
                return venue;
            }
        }
        Venue::Other
    }
}

impl fmt::Display for Venue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Venue::Acl => "ACL",
            Venue::Emnlp => "EMNLP",
            Venue::Naacl => "NAACL",
            Venue::Other => "OTHER",
        })
    }
}

/// Lowercase hex SHA-256 of the URL's UTF-8 bytes.
pub fn hash_url(url: &str) -> Result<String> {
    if url.is_empty() {
        return Err(Error::argument("cannot hash an empty url"));
    }
    let digest = Sha256::digest(url.as_bytes());
    Ok(format!("{digest:x}"))
}

/// One bibliography entry. `venue` and `paper_id` are derived from the other
/// fields; build records with [`PaperRecord::from_fields`] or
/// [`PaperRecord::new`] so they stay consistent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub title: String,
    pub editor: Option<String>,
    pub month: Option<String>,
    /// Raw year text; see [`PaperRecord::year_value`].
    pub year: Option<String>,
    pub address: Option<String>,
    pub publisher: Option<String>,
    pub url: String,
    pub author: Option<String>,
    pub booktitle: Option<String>,
    pub pages: Option<String>,
    pub venue: Venue,
    pub paper_id: String,
}

impl PaperRecord {
    pub fn new(title: impl Into<String>, url: impl Into<String>) -> Result<Self> {
        let url = url.into();
        let paper_id = hash_url(&url)?;
        let venue = Venue::derive(None, &url);
        Ok(PaperRecord {
            title: title.into(),
            editor: None,
            month: None,
            year: None,
            address: None,
            publisher: None,
            url,
            author: None,
            booktitle: None,
            pages: None,
            venue,
            paper_id,
        })
    }

    /// Build from lowercase `(name, value)` pairs. Unknown fields are ignored;
    /// empty values count as absent.
    pub fn from_fields<I, K, V>(fields: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        let mut title = None;
        let mut url = None;
        let mut rec = PaperRecord::new("", "x")?;
        for (name, value) in fields {
            let value: String = value.into();
            let value = if value.is_empty() { None } else { Some(value) };
            match name.as_ref() {
                "title" => title = value,
                "url" => url = value,
                "editor" => rec.editor = value,
                "month" => rec.month = value,
                "year" => rec.year = value,
                "address" => rec.address = value,
                "publisher" => rec.publisher = value,
                "author" => rec.author = value,
                "booktitle" => rec.booktitle = value,
                "pages" => rec.pages = value,
                _ => {}
            }
        }
        rec.title = title.ok_or_else(|| Error::argument("entry has no title"))?;
        rec.url = url.ok_or_else(|| Error::argument("entry has no url"))?;
        rec.refresh_derived()?;
        Ok(rec)
    }

    /// Recompute `venue` and `paper_id` after editing fields.
    pub fn refresh_derived(&mut self) -> Result<()> {
        self.paper_id = hash_url(&self.url)?;
        self.venue = Venue::derive(self.booktitle.as_deref(), &self.url);
        Ok(())
    }

    /// The year as a positive integer, `None` when absent or unparseable.
    pub fn year_value(&self) -> Option<u32> {
        self.year.as_deref()?.trim().parse().ok().filter(|&y| y > 0)
    }
}
