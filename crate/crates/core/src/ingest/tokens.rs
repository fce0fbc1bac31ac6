use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use crate::error::{Error, Result};

/// Tokenized paragraphs of one paper. Serialized one paragraph per line,
/// tokens separated by a single space.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedDocument {
    pub paper_id: String,
    pub paragraphs: Vec<Vec<String>>,
}

/// Pre-extracted paper text, stored as `<paper_id>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedDocument {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub paragraphs: Vec<String>,
}

impl ExtractedDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(format!("line {}", e.line()), e.to_string()))
    }

    /// Title first, then each paragraph; paragraphs with no tokens are dropped.
    pub fn tokenize(&self) -> TokenizedDocument {
        let paragraphs = std::iter::once(self.title.as_str())
            .chain(self.paragraphs.iter().map(String::as_str))
            .map(tokenize)
            .filter(|p| !p.is_empty())
            .collect();
        TokenizedDocument {
            paper_id: self.paper_id.clone(),
            paragraphs,
        }
    }
}

pub fn write_token_file<W: Write>(doc: &TokenizedDocument, mut sink: W) -> Result<()> {
    for (p, paragraph) in doc.paragraphs.iter().enumerate() {
        if paragraph.is_empty() {
            return Err(Error::argument(format!("paragraph {p} is empty")));
        }
        if let Some(bad) = paragraph
            .iter()
            .find(|t| t.is_empty() || t.contains(char::is_whitespace))
        {
            return Err(Error::argument(format!(
                "token {bad:?} in paragraph {p} is empty or contains whitespace"
            )));
        }
        writeln!(sink, "{}", paragraph.join(" "))?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_token_file<R: Read>(paper_id: &str, source: R) -> Result<TokenizedDocument> {
    let mut paragraphs = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            return Err(Error::format(format!("{paper_id}:{}", i + 1), "empty paragraph line"));
        }
        paragraphs.push(line.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect());
    }
    Ok(TokenizedDocument {
        paper_id: paper_id.to_string(),
        paragraphs,
    })
}

/// Every `*.txt` token file in `dir`, keyed by file stem, sorted by name.
pub fn read_token_dir(dir: &Path) -> Result<Vec<TokenizedDocument>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io_at(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|path| {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let file = fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
            read_token_file(stem, file)
        })
        .collect()
}
