//! Crash-safe file writes: write to a temp file beside the target, then rename.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Run `fill` against a buffered temp file in the target's directory and
/// atomically move it into place on success. Parent directories are created.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent).map_err(|e| Error::io_at(parent, e))?;
    let tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io_at(parent, e))?;
    let mut out = BufWriter::new(tmp);
    fill(&mut out)?;
    out.flush().map_err(|e| Error::io_at(path, e))?;
    let tmp = out.into_inner().map_err(|e| Error::io_at(path, e.into_error()))?;
    tmp.persist(path).map_err(|e| Error::io_at(path, e.error))?;
    Ok(())
}

pub fn write_string_atomic(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn open_read(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io_at(path, e))
}
