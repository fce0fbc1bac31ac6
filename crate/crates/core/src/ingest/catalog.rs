//! The paper catalog as CSV, laid out like a pandas `to_csv` dump of the
//! bibliography (leading unnamed index column).

use std::io::{Read, Write};

use super::record::PaperRecord;
use crate::error::{Error, Result};

pub const CATALOG_COLUMNS: [&str; 11] = [
    "Unnamed: 0",
    "title",
    "editor",
    "month",
    "year",
    "address",
    "publisher",
    "url",
    "author",
    "booktitle",
    "pages",
];

pub fn write_catalog_csv<W: Write>(records: &[PaperRecord], sink: W) -> Result<usize> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    writer.write_record(CATALOG_COLUMNS)?;
    for (i, r) in records.iter().enumerate() {
        let opt = |v: &Option<String>| v.clone().unwrap_or_default();
        writer.write_record([
            i.to_string(),
            r.title.clone(),
            opt(&r.editor),
            opt(&r.month),
            opt(&r.year),
            opt(&r.address),
            opt(&r.publisher),
            r.url.clone(),
            opt(&r.author),
            opt(&r.booktitle),
            opt(&r.pages),
        ])?;
    }
    writer.flush()?;
    Ok(records.len())
}

pub fn read_catalog_csv<R: Read>(source: R) -> Result<Vec<PaperRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let header = reader.headers()?.clone();
    for (i, expected) in CATALOG_COLUMNS.iter().enumerate() {
        match header.get(i) {
            Some(col) if col == *expected => {}
            Some(col) => {
                return Err(Error::format(
                    "header",
                    format!("unexpected column `{col}` at position {i}, expected `{expected}`"),
                ))
            }
            None => return Err(Error::format("header", format!("missing column `{expected}`"))),
        }
    }
    if let Some(extra) = header.get(CATALOG_COLUMNS.len()) {
        return Err(Error::format("header", format!("unexpected column `{extra}`")));
    }

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let fields = CATALOG_COLUMNS[1..]
            .iter()
            .zip(row.iter().skip(1))
            .map(|(name, value)| (*name, value.to_string()));
        let record = PaperRecord::from_fields(fields)
            .map_err(|e| Error::format(format!("line {line}"), e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}
