//! Bibliography parsing, the paper catalog, PDF acquisition and paragraph
//! tokenization.

mod bibtex;
mod catalog;
mod fetch;
mod record;
mod tokenize;
mod tokens;

pub use bibtex::{parse_bibtex, BibParse, EntryError};
pub use catalog::{read_catalog_csv, write_catalog_csv, CATALOG_COLUMNS};
pub use fetch::{
    pdf_path, Clock, DownloadManifest, Downloader, FetchStatus, Fetcher, HttpFetcher, ManifestEntry, SystemClock,
};
pub use record::{hash_url, PaperRecord, Venue};
pub use tokenize::tokenize;
pub use tokens::{read_token_dir, read_token_file, write_token_file, ExtractedDocument, TokenizedDocument};
