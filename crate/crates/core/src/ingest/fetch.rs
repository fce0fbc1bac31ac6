//! PDF acquisition keyed by URL hash, with a resumable manifest.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;

use super::record::PaperRecord;
use crate::error::{Error, Result};

/// Maps a URL to the document bytes.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> std::result::Result<Vec<u8>, String>;
}

pub trait Clock: Send + Sync {
    fn sleep(&self, duration: Duration);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// `http(s)://` via ureq; `file://` and bare paths from the local disk.
pub struct HttpFetcher {
    agent: ureq::Agent,
}

impl Default for HttpFetcher {
    fn default() -> Self {
        HttpFetcher {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
        }
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> std::result::Result<Vec<u8>, String> {
        if url.starts_with("http://") || url.starts_with("https://") {
            let response = self.agent.get(url).call().map_err(|e| e.to_string())?;
            let mut bytes = Vec::new();
            response
                .into_reader()
                .read_to_end(&mut bytes)
                .map_err(|e| e.to_string())?;
            Ok(bytes)
        } else {
            let path = url.strip_prefix("file://").unwrap_or(url);
            fs::read(path).map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchStatus {
    Pending,
    Ok,
    Failed,
}

impl fmt::Display for FetchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FetchStatus::Pending => "pending",
            FetchStatus::Ok => "ok",
            FetchStatus::Failed => "failed",
        })
    }
}

impl FromStr for FetchStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pending" => Ok(FetchStatus::Pending),
            "ok" => Ok(FetchStatus::Ok),
            "failed" => Ok(FetchStatus::Failed),
            _ => Err(Error::argument(format!("unknown fetch status `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub paper_id: String,
    /// Not part of the persisted form; `None` after reading a manifest file.
    pub url: Option<String>,
    pub status: FetchStatus,
    pub attempts: u32,
    pub error_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DownloadManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DownloadManifest {
    pub fn ok_count(&self) -> usize {
        self.entries.iter().filter(|e| e.status == FetchStatus::Ok).count()
    }

    pub fn failed_count(&self) -> usize {
        self.entries.iter().filter(|e| e.status == FetchStatus::Failed).count()
    }

    /// Success share with one decimal, e.g. `98.8%`.
    pub fn success_percent(&self) -> String {
        if self.entries.is_empty() {
            return "0.0%".to_string();
        }
        format!("{:.1}%", 100.0 * self.ok_count() as f64 / self.entries.len() as f64)
    }

    /// e.g. `87,587 of 88,586 (98.8%)`.
    pub fn summary(&self) -> String {
        format!(
            "{} of {} ({})",
            thousands(self.ok_count()),
            thousands(self.entries.len()),
            self.success_percent()
        )
    }

    /// One line per entry: `paper_id<TAB>status<TAB>attempts<TAB>error_note`.
    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        for e in &self.entries {
            let note = e
                .error_note
                .as_deref()
                .unwrap_or("")
                .replace(['\t', '\n', '\r'], " ");
            writeln!(sink, "{}\t{}\t{}\t{}", e.paper_id, e.status, e.attempts, note)?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let at = || format!("manifest line {}", i + 1);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::format(at(), format!("expected 4 columns, found {}", cols.len())));
            }
            let status: FetchStatus = cols[1].parse().map_err(|e: Error| Error::format(at(), e.to_string()))?;
            let attempts: u32 = cols[2]
                .parse()
                .map_err(|_| Error::format(at(), format!("bad attempt count `{}`", cols[2])))?;
            if status == FetchStatus::Ok && attempts == 0 {
                return Err(Error::format(at(), "ok entry with zero attempts"));
            }
            if !seen.insert(cols[0].to_string()) {
                return Err(Error::format(at(), format!("duplicate paper id {}", cols[0])));
            }
            entries.push(ManifestEntry {
                paper_id: cols[0].to_string(),
                url: None,
                status,
                attempts,
                error_note: (!cols[3].is_empty()).then(|| cols[3].to_string()),
            });
        }
        Ok(DownloadManifest { entries })
    }
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Downloads `<paper_id>.pdf` files into a directory. Files already on disk
/// are not fetched again.
pub struct Downloader {
    fetcher: Arc<dyn Fetcher>,
    clock: Arc<dyn Clock>,
    max_attempts: u32,
    parallelism: usize,
    retry_delay: Duration,
}

impl Downloader {
    pub fn new(fetcher: Arc<dyn Fetcher>) -> Self {
        Downloader {
            fetcher,
            clock: Arc::new(SystemClock),
            max_attempts: 3,
            parallelism: 4,
            retry_delay: Duration::from_secs(1),
        }
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn max_attempts(mut self, n: u32) -> Self {
        self.max_attempts = n;
        self
    }

    pub fn parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }

    /// Fetch every record not yet on disk. `prior` carries attempt counts
    /// over from an earlier run. Entries come back in record order, one per
    /// distinct paper id.
    pub fn run(&self, records: &[PaperRecord], out_dir: &Path, prior: Option<&DownloadManifest>) -> Result<DownloadManifest> {
        if self.max_attempts == 0 {
            return Err(Error::argument("max_attempts must be at least 1"));
        }
        fs::create_dir_all(out_dir).map_err(|e| Error::io_at(out_dir, e))?;
        tempfile::NamedTempFile::new_in(out_dir).map_err(|e| Error::io_at(out_dir, e))?;

        let previous: HashMap<&str, &ManifestEntry> = prior
            .map(|m| m.entries.iter().map(|e| (e.paper_id.as_str(), e)).collect())
            .unwrap_or_default();
        let mut seen = HashSet::new();
        let unique: Vec<&PaperRecord> = records.iter().filter(|r| seen.insert(r.paper_id.as_str())).collect();

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism)
            .build()
            .map_err(|e| Error::argument(e.to_string()))?;
        let entries = pool.install(|| {
            unique
                .par_iter()
                .map(|r| self.fetch_one(r, out_dir, previous.get(r.paper_id.as_str()).copied()))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(DownloadManifest { entries })
    }

    fn fetch_one(&self, record: &PaperRecord, out_dir: &Path, previous: Option<&ManifestEntry>) -> Result<ManifestEntry> {
        let target = pdf_path(out_dir, &record.paper_id);
        let prior_attempts = previous.map_or(0, |e| e.attempts);
        if target.exists() {
            return Ok(ManifestEntry {
                paper_id: record.paper_id.clone(),
                url: Some(record.url.clone()),
                status: FetchStatus::Ok,
                attempts: prior_attempts.max(1),
                error_note: None,
            });
        }

        let mut last_error = String::new();
        for attempt in 1..=self.max_attempts {
            if attempt > 1 {
                self.clock.sleep(self.retry_delay);
            }
            match self.fetcher.fetch(&record.url) {
                Ok(bytes) => {
                    let mut tmp = tempfile::NamedTempFile::new_in(out_dir).map_err(|e| Error::io_at(out_dir, e))?;
                    tmp.write_all(&bytes)?;
                    tmp.persist(&target).map_err(|e| Error::io_at(&target, e.error))?;
                    return Ok(ManifestEntry {
                        paper_id: record.paper_id.clone(),
                        url: Some(record.url.clone()),
                        status: FetchStatus::Ok,
                        attempts: prior_attempts + attempt,
                        error_note: None,
                    });
                }
                Err(e) => last_error = e,
            }
        }
        Ok(ManifestEntry {
            paper_id: record.paper_id.clone(),
            url: Some(record.url.clone()),
            status: FetchStatus::Failed,
            attempts: prior_attempts + self.max_attempts,
            error_note: Some(last_error),
        })
    }
}

pub fn pdf_path(out_dir: &Path, paper_id: &str) -> PathBuf {
    out_dir.join(format!("{paper_id}.pdf"))
}
