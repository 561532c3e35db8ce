//! Listing, fetching, caching and parsing of GDELT 2.0 update files.

pub mod fetch;
pub mod master;
pub mod parse;
pub mod schema;

use std::fs::{self, File};
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

pub use fetch::{fetch_file, FetchError, FetchOutcome, Fetcher};
pub use master::{classify_file_name, list_update_files, Feed, ListError, UpdateFileRef, UpdateListing};
pub use parse::{
    parse_event_line, parse_gkg_line, parse_mention_line, parse_stream, parse_v2themes, GdeltRow, LineError,
    ParseReport, SkippedLine,
};
pub use schema::{FileKind, SchemaDescriptor, SchemaError};

/// A decompressed update file found on disk.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LocalUpdateFile {
    pub timestamp: NaiveDateTime,
    pub kind: FileKind,
    pub feed: Feed,
    pub path: PathBuf,
}

/// Finds update files named by the GDELT scheme directly under `dir`
/// (cache layout), restricted to `[start, end]` and `feeds`. Sorted by
/// timestamp, kind, feed.
pub fn discover_update_files(
    dir: &Path,
    start: NaiveDateTime,
    end: NaiveDateTime,
    feeds: &[Feed],
) -> io::Result<Vec<LocalUpdateFile>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if name.to_ascii_lowercase().ends_with(".zip") {
            continue;
        }
        let Some((timestamp, kind, feed)) = classify_file_name(name) else {
            continue;
        };
        if timestamp < start || timestamp > end || !feeds.contains(&feed) {
            continue;
        }
        found.push(LocalUpdateFile {
            timestamp,
            kind,
            feed,
            path: entry.path(),
        });
    }
    found.sort();
    Ok(found)
}

/// Opens `path` and streams it through [`parse_stream`].
pub fn parse_file<T, F>(path: &Path, schema: &SchemaDescriptor, sink: F) -> io::Result<ParseReport>
where
    T: GdeltRow,
    F: FnMut(T),
{
    let file = File::open(path)?;
    let label = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_stream(BufReader::with_capacity(1 << 16, file), &label, schema, sink)
}
