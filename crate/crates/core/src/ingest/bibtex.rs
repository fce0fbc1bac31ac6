//! A forgiving BibTeX reader for anthology exports.
//!
//! The source is cut into chunks at lines that begin with `@`; each chunk is
//! parsed on its own so that one malformed entry cannot swallow the next.

use std::collections::HashMap;
use std::fmt;

use super::record::PaperRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryError {
    /// 1-based line of the entry's `@`.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for EntryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Default, Clone)]
pub struct BibParse {
    pub records: Vec<PaperRecord>,
    pub errors: Vec<EntryError>,
}

impl BibParse {
    pub fn skipped(&self) -> usize {
        self.errors.len()
    }
}

const MONTHS: [(&str, &str); 12] = [
    ("jan", "Jan"),
    ("feb", "Feb"),
    ("mar", "Mar"),
    ("apr", "Apr"),
    ("may", "May"),
    ("jun", "Jun"),
    ("jul", "Jul"),
    ("aug", "Aug"),
    ("sep", "Sep"),
    ("oct", "Oct"),
    ("nov", "Nov"),
    ("dec", "Dec"),
];

pub fn parse_bibtex(source: &str) -> BibParse {
    let mut out = BibParse::default();
    let mut macros: HashMap<String, String> = MONTHS
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();

    for (line, chunk) in chunks(source) {
        match parse_chunk(chunk, &mut macros) {
            Ok(Some(fields)) => match PaperRecord::from_fields(fields) {
                Ok(record) => out.records.push(record),
                Err(e) => out.errors.push(EntryError { line, message: e.to_string() }),
            },
            Ok(None) => {}
            Err(message) => out.errors.push(EntryError { line, message }),
        }
    }
    out
}

/// Split at lines whose first non-blank character is `@`. Text before the
/// first such line is a comment and is dropped.
fn chunks(source: &str) -> Vec<(usize, &str)> {
    let mut starts = Vec::new();
    let mut offset = 0;
    for (i, line) in source.split_inclusive('\n').enumerate() {
        if line.trim_start().starts_with('@') {
            let lead = line.len() - line.trim_start().len();
            starts.push((i + 1, offset + lead));
        }
        offset += line.len();
    }
    let mut out = Vec::with_capacity(starts.len());
    for (k, &(line, start)) in starts.iter().enumerate() {
        let end = starts.get(k + 1).map_or(source.len(), |&(_, s)| s);
        out.push((line, &source[start..end]));
    }
    out
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, _src: src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || "_-:.+/'".contains(c) {
                s.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        s
    }
}

type Fields = Vec<(String, String)>;

/// `Ok(None)` for `@comment`, `@preamble` and `@string` chunks.
fn parse_chunk(chunk: &str, macros: &mut HashMap<String, String>) -> Result<Option<Fields>, String> {
    let mut cur = Cursor::new(chunk);
    cur.bump(); // '@'
    let kind = cur.ident().to_ascii_lowercase();
    if kind.is_empty() {
        return Err("missing entry type after `@`".into());
    }
    cur.skip_ws();
    let close = match cur.bump() {
        Some('{') => '}',
        Some('(') => ')',
        _ => return Err(format!("expected `{{` after @{kind}")),
    };

    match kind.as_str() {
        "comment" | "preamble" => {
            let mut depth = 1usize;
            while let Some(c) = cur.bump() {
                match c {
                    '{' | '(' => depth += 1,
                    '}' | ')' => {
                        depth -= 1;
                        if depth == 0 {
                            return Ok(None);
                        }
                    }
                    _ => {}
                }
            }
            Err("unbalanced braces".into())
        }
        "string" => {
            cur.skip_ws();
            let name = cur.ident().to_ascii_lowercase();
            cur.skip_ws();
            if name.is_empty() || cur.bump() != Some('=') {
                return Err("malformed @string definition".into());
            }
            let value = parse_value(&mut cur, macros, close)?;
            macros.insert(name, value);
            Ok(None)
        }
        _ => {
            cur.skip_ws();
            let mut key = String::new();
            loop {
                match cur.peek() {
                    Some(',') => {
                        cur.bump();
                        break;
                    }
                    Some(c) if c == close || c == '=' || c == '{' || c == '"' => {
                        return Err("missing citation key".into())
                    }
                    Some(c) => {
                        key.push(c);
                        cur.bump();
                    }
                    None => return Err("unbalanced braces".into()),
                }
            }
            if key.trim().is_empty() {
                return Err("missing citation key".into());
            }

            let mut fields: Fields = Vec::new();
            loop {
                cur.skip_ws();
                match cur.peek() {
                    Some(c) if c == close => {
                        cur.bump();
                        return Ok(Some(fields));
                    }
                    Some(',') => {
                        cur.bump();
                        continue;
                    }
                    None => return Err("unbalanced braces".into()),
                    _ => {}
                }
                let name = cur.ident().to_ascii_lowercase();
                if name.is_empty() {
                    return Err(format!(
                        "unexpected character `{}` in entry `{}`",
                        cur.peek().unwrap_or(' '),
                        key.trim()
                    ));
                }
                cur.skip_ws();
                if cur.bump() != Some('=') {
                    return Err(format!("expected `=` after field `{name}`"));
                }
                let value = parse_value(&mut cur, macros, close)?;
                if !fields.iter().any(|(n, _)| *n == name) {
                    fields.push((name, value));
                }
            }
        }
    }
}

/// A field value: pieces joined by `#`, each a quoted string, a braced
/// group, a number or a macro name. Whitespace runs collapse to one space.
fn parse_value(cur: &mut Cursor<'_>, macros: &HashMap<String, String>, close: char) -> Result<String, String> {
    let mut raw = String::new();
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some('{') => {
                cur.bump();
                raw.push_str(&balanced(cur, '}')?);
            }
            Some('"') => {
                cur.bump();
                raw.push_str(&balanced(cur, '"')?);
            }
            Some(c) if c.is_alphanumeric() => {
                let word = cur.ident();
                if word.chars().all(|c| c.is_ascii_digit()) {
                    raw.push_str(&word);
                } else {
                    match macros.get(&word.to_ascii_lowercase()) {
                        Some(v) => raw.push_str(v),
                        None => raw.push_str(&word),
                    }
                }
            }
            None => return Err("unbalanced braces".into()),
            Some(c) => return Err(format!("unexpected `{c}` in field value")),
        }
        cur.skip_ws();
        match cur.peek() {
            Some('#') => {
                cur.bump();
            }
            Some(',') => break,
            Some(c) if c == close => break,
            None => return Err("unbalanced braces".into()),
            Some(c) => return Err(format!("unexpected `{c}` after field value")),
        }
    }
    Ok(raw.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// Read up to the `end` delimiter at brace depth zero. Inner braces are kept.
fn balanced(cur: &mut Cursor<'_>, end: char) -> Result<String, String> {
    let mut depth = 0usize;
    let mut s = String::new();
    while let Some(c) = cur.bump() {
        match c {
            '\\' => {
                s.push(c);
                if let Some(n) = cur.bump() {
                    s.push(n);
                }
                continue;
            }
            '{' => depth += 1,
            '}' if depth > 0 => depth -= 1,
            c if c == end && depth == 0 => return Ok(s),
            '}' => return Err("unbalanced braces".into()),
            _ => {}
        }
        s.push(c);
    }
    Err("unbalanced braces".into())
}
