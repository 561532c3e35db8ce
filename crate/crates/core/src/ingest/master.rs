//! GDELT 2.0 master file lists.
//!
//! Each line is `size md5 url`, one per 15-minute update file, e.g.
//! `150383 297a16b493de7cf6ca809a7cc31d0b93 http://data.gdeltproject.org/gdeltv2/20150218230000.export.CSV.zip`.
//! Translingual files carry an extra `.translation` component.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schema::FileKind;

pub const ENGLISH_MASTER_LIST_URL: &str = "http://data.gdeltproject.org/gdeltv2/masterfilelist.txt";
pub const TRANSLINGUAL_MASTER_LIST_URL: &str = "http://data.gdeltproject.org/gdeltv2/masterfilelist-translation.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feed {
    English,
    Translingual,
}

impl Feed {
    pub const ALL: [Feed; 2] = [Feed::English, Feed::Translingual];
}

impl fmt::Display for Feed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feed::English => "english",
            Feed::Translingual => "translingual",
        })
    }
}

impl FromStr for Feed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "english" | "en" => Ok(Feed::English),
            "translingual" | "translation" => Ok(Feed::Translingual),
            other => Err(format!("unknown feed `{other}`")),
        }
    }
}

/// One update file announced by a master list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UpdateFileRef {
    pub url: String,
    pub file_kind: FileKind,
    pub feed: Feed,
    /// UTC, minute in {0, 15, 30, 45}.
    pub timestamp: NaiveDateTime,
    pub size_bytes: u64,
    /// Hex MD5 of the zip archive; may be empty for hand-built refs.
    pub checksum: String,
}

impl UpdateFileRef {
    /// Builds a ref from a URL whose file name follows the GDELT naming
    /// scheme.
    pub fn from_url(url: &str, size_bytes: u64, checksum: &str) -> Option<Self> {
        let name = url.rsplit('/').next()?;
        let (timestamp, file_kind, feed) = classify_file_name(name)?;
        Some(Self {
            url: url.to_string(),
            file_kind,
            feed,
            timestamp,
            size_bytes,
            checksum: checksum.to_ascii_lowercase(),
        })
    }

    /// Last path segment of the URL, e.g. `20220101000000.export.CSV.zip`.
    pub fn file_name(&self) -> &str {
        self.url.rsplit('/').next().unwrap_or(&self.url)
    }

    /// Name of the decompressed file in the cache.
    pub fn cache_file_name(&self) -> &str {
        let name = self.file_name();
        name.strip_suffix(".zip")
            .or_else(|| name.strip_suffix(".ZIP"))
            .unwrap_or(name)
    }

    pub fn sort_key(&self) -> (NaiveDateTime, FileKind, Feed) {
        (self.timestamp, self.file_kind, self.feed)
    }
}

/// Recognises `YYYYMMDDHHMMSS[.translation].{export,mentions,gkg}.csv[.zip]`
/// (case-insensitive) and checks the 15-minute grid.
pub fn classify_file_name(name: &str) -> Option<(NaiveDateTime, FileKind, Feed)> {
    let (stamp, rest) = name.split_once('.')?;
    if stamp.len() != 14 || !stamp.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let timestamp = NaiveDateTime::parse_from_str(stamp, "%Y%m%d%H%M%S").ok()?;
    if timestamp.second() != 0 || timestamp.minute() % 15 != 0 {
        return None;
    }
    let rest = rest.to_ascii_lowercase();
    let rest = rest.strip_suffix(".zip").unwrap_or(&rest);
    let (feed, rest) = match rest.strip_prefix("translation.") {
        Some(r) => (Feed::Translingual, r),
        None => (Feed::English, rest),
    };
    let kind = match rest {
        "export.csv" => FileKind::Event,
        "mentions.csv" => FileKind::Mentions,
        "gkg.csv" => FileKind::Gkg,
        _ => return None,
    };
    Some((timestamp, kind, feed))
}

#[derive(Debug, Error)]
pub enum ListError {
    #[error("start {start} is after end {end}")]
    InvalidRange { start: NaiveDateTime, end: NaiveDateTime },
    #[error("reading master list: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdateListing {
    /// Sorted by timestamp, then file kind, then feed; no duplicates.
    pub refs: Vec<UpdateFileRef>,
    pub malformed_lines: u64,
    pub duplicate_lines: u64,
}

fn parse_master_line(line: &str) -> Option<UpdateFileRef> {
    let mut parts = line.split_whitespace();
    let (size, checksum, url) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() {
        return None;
    }
    let size: u64 = size.parse().ok()?;
    if checksum.is_empty() || !checksum.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    UpdateFileRef::from_url(url, size, checksum)
}

/// Selects the update files with `start <= timestamp <= end` and a feed in
/// `feeds` from one or more concatenated master lists.
pub fn list_update_files<R: BufRead>(
    start: NaiveDateTime,
    end: NaiveDateTime,
    feeds: &[Feed],
    master_list: R,
) -> Result<UpdateListing, ListError> {
    if start > end {
        return Err(ListError::InvalidRange { start, end });
    }
    let mut listing = UpdateListing::default();
    let mut selected = BTreeMap::new();
    for line in master_list.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(update) = parse_master_line(&line) else {
            listing.malformed_lines += 1;
            continue;
        };
        if update.timestamp < start || update.timestamp > end || !feeds.contains(&update.feed) {
            continue;
        }
        match selected.entry(update.sort_key()) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(update);
            }
            std::collections::btree_map::Entry::Occupied(_) => listing.duplicate_lines += 1,
        }
    }
    listing.refs = selected.into_values().collect();
    Ok(listing)
}
