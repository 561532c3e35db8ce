//! Tab-delimited line parsers for the event, mentions and GKG tables.
//!
//! Parsing is lenient at the file level: a bad line is skipped and counted,
//! never fatal. Input bytes are decoded as UTF-8 with invalid sequences
//! replaced.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use chrono::{NaiveDate, NaiveDateTime};
use thiserror::Error;

use super::schema::{field, FileKind, SchemaDescriptor};
use crate::model::{parse_root_code, EventRecord, GkgRecord, MentionRecord, ThemeMention};

const EVENT_DATE_FORMAT: &str = "%Y%m%d";
const DATE_ADDED_FORMAT: &str = "%Y%m%d%H%M%S";

/// Why a line was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("ColumnCountMismatch: expected {expected} columns, found {found}")]
    ColumnCountMismatch { expected: usize, found: usize },
    #[error("BadEventId: `{0}`")]
    BadEventId(String),
    #[error("BadTimestamp: {field} `{raw}`")]
    BadTimestamp { field: &'static str, raw: String },
    #[error("EmptyMentionIdentifier")]
    EmptyMentionIdentifier,
    #[error("BadTone: `{0}`")]
    BadTone(String),
    #[error("EmptyDocumentIdentifier")]
    EmptyDocumentIdentifier,
}

fn split_columns<'a>(line: &'a str, schema: &SchemaDescriptor) -> Result<Vec<&'a str>, LineError> {
    let columns: Vec<&str> = line.split('\t').collect();
    if columns.len() != schema.column_count() {
        return Err(LineError::ColumnCountMismatch {
            expected: schema.column_count(),
            found: columns.len(),
        });
    }
    Ok(columns)
}

fn optional(text: &str) -> Option<String> {
    let t = text.trim();
    (!t.is_empty()).then(|| t.to_string())
}

fn event_id(text: &str) -> Result<u64, LineError> {
    text.trim().parse().map_err(|_| LineError::BadEventId(text.to_string()))
}

/// Parses one row of an `*.export.CSV` file.
///
/// A root code that fails [`parse_root_code`] leaves `event_root_code`
/// empty and keeps the raw text in `unparsed_root_code`.
pub fn parse_event_line(line: &str, schema: &SchemaDescriptor) -> Result<EventRecord, LineError> {
    debug_assert_eq!(schema.kind(), FileKind::Event);
    let cols = split_columns(line, schema)?;
    let col = |name: &str| cols[schema.position(name)];

    let global_event_id = event_id(col(field::GLOBAL_EVENT_ID))?;
    let raw_date = col(field::EVENT_DATE).trim();
    let event_date = NaiveDate::parse_from_str(raw_date, EVENT_DATE_FORMAT).map_err(|_| LineError::BadTimestamp {
        field: field::EVENT_DATE,
        raw: raw_date.to_string(),
    })?;
    let raw_added = col(field::DATE_ADDED).trim();
    let date_added =
        NaiveDateTime::parse_from_str(raw_added, DATE_ADDED_FORMAT).map_err(|_| LineError::BadTimestamp {
            field: field::DATE_ADDED,
            raw: raw_added.to_string(),
        })?;

    let (event_root_code, unparsed_root_code) = match optional(col(field::EVENT_ROOT_CODE)) {
        None => (None, None),
        Some(raw) => match parse_root_code(&raw) {
            Ok(code) => (Some(code), None),
            Err(_) => (None, Some(raw)),
        },
    };

    Ok(EventRecord {
        global_event_id,
        event_date,
        actor1_code: optional(col(field::ACTOR1_CODE)),
        actor2_code: optional(col(field::ACTOR2_CODE)),
        actor1_country: optional(col(field::ACTOR1_COUNTRY)),
        actor2_country: optional(col(field::ACTOR2_COUNTRY)),
        event_root_code,
        unparsed_root_code,
        action_geo_country: optional(col(field::ACTION_GEO_COUNTRY)),
        date_added,
        source_url: col(field::SOURCE_URL).trim().to_string(),
    })
}

/// Parses one row of a `*.mentions.CSV` file.
pub fn parse_mention_line(line: &str, schema: &SchemaDescriptor) -> Result<MentionRecord, LineError> {
    debug_assert_eq!(schema.kind(), FileKind::Mentions);
    let cols = split_columns(line, schema)?;
    let col = |name: &str| cols[schema.position(name)];

    let global_event_id = event_id(col(field::GLOBAL_EVENT_ID))?;
    let mention_identifier = optional(col(field::MENTION_IDENTIFIER)).ok_or(LineError::EmptyMentionIdentifier)?;
    let raw_tone = col(field::MENTION_TONE).trim();
    let mention_tone: f64 = raw_tone
        .parse()
        .ok()
        .filter(|t: &f64| t.is_finite())
        .ok_or_else(|| LineError::BadTone(raw_tone.to_string()))?;
    Ok(MentionRecord {
        global_event_id,
        mention_identifier,
        mention_tone,
    })
}

/// Parses one row of a `*.gkg.csv` file.
pub fn parse_gkg_line(line: &str, schema: &SchemaDescriptor) -> Result<GkgRecord, LineError> {
    debug_assert_eq!(schema.kind(), FileKind::Gkg);
    let cols = split_columns(line, schema)?;
    let col = |name: &str| cols[schema.position(name)];

    let document_identifier = optional(col(field::DOCUMENT_IDENTIFIER)).ok_or(LineError::EmptyDocumentIdentifier)?;
    Ok(GkgRecord {
        gkg_record_id: col(field::GKG_RECORD_ID).trim().to_string(),
        document_identifier,
        themes: parse_v2themes(col(field::V2_THEMES)).themes,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedThemes {
    pub themes: Vec<ThemeMention>,
    /// Entries dropped because the theme name itself was unusable.
    pub dropped: usize,
}

/// Splits a `V2Themes` value such as `"A,10;B,20;"`.
///
/// Each `;`-separated entry is split on its last comma. An entry without a
/// numeric offset keeps its name with offset 0 and `offset_missing` set.
pub fn parse_v2themes(field: &str) -> ParsedThemes {
    let mut out = ParsedThemes::default();
    for entry in field.split(';') {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let (name, offset) = match entry.rsplit_once(',') {
            Some((name, offset)) => match offset.trim().parse::<u64>() {
                Ok(n) => (name.trim(), Some(n)),
                Err(_) => (name.trim(), None),
            },
            None => (entry, None),
        };
        if name.is_empty() || name.contains(',') {
            out.dropped += 1;
            continue;
        }
        out.themes.push(ThemeMention {
            name: name.to_string(),
            char_offset: offset.unwrap_or(0),
            offset_missing: offset.is_none(),
        });
    }
    out
}

/// Inverse of [`parse_v2themes`] for well-formed entries.
pub fn format_v2themes(themes: &[ThemeMention]) -> String {
    let mut out = String::new();
    for t in themes {
        if t.offset_missing {
            let _ = write!(out, "{};", t.name);
        } else {
            let _ = write!(out, "{},{};", t.name, t.char_offset);
        }
    }
    out
}

fn join_columns(schema: &SchemaDescriptor, values: &[(&str, String)]) -> String {
    let mut cols = vec![String::new(); schema.column_count()];
    for (name, value) in values {
        cols[schema.position(name)] = value.clone();
    }
    cols.join("\t")
}

/// Writes the mapped columns of an event back into a full-width row.
/// Unmapped columns are left empty.
pub fn format_event_line(record: &EventRecord, schema: &SchemaDescriptor) -> String {
    let root = match (&record.event_root_code, &record.unparsed_root_code) {
        (Some(code), _) => code.to_string(),
        (None, Some(raw)) => raw.clone(),
        (None, None) => String::new(),
    };
    let opt = |v: &Option<String>| v.clone().unwrap_or_default();
    join_columns(
        schema,
        &[
            (field::GLOBAL_EVENT_ID, record.global_event_id.to_string()),
            (
                field::EVENT_DATE,
                record.event_date.format(EVENT_DATE_FORMAT).to_string(),
            ),
            (field::ACTOR1_CODE, opt(&record.actor1_code)),
            (field::ACTOR2_CODE, opt(&record.actor2_code)),
            (field::ACTOR1_COUNTRY, opt(&record.actor1_country)),
            (field::ACTOR2_COUNTRY, opt(&record.actor2_country)),
            (field::EVENT_ROOT_CODE, root),
            (field::ACTION_GEO_COUNTRY, opt(&record.action_geo_country)),
            (
                field::DATE_ADDED,
                record.date_added.format(DATE_ADDED_FORMAT).to_string(),
            ),
            (field::SOURCE_URL, record.source_url.clone()),
        ],
    )
}

pub fn format_mention_line(record: &MentionRecord, schema: &SchemaDescriptor) -> String {
    join_columns(
        schema,
        &[
            (field::GLOBAL_EVENT_ID, record.global_event_id.to_string()),
            (field::MENTION_IDENTIFIER, record.mention_identifier.clone()),
            (field::MENTION_TONE, record.mention_tone.to_string()),
        ],
    )
}

pub fn format_gkg_line(record: &GkgRecord, schema: &SchemaDescriptor) -> String {
    join_columns(
        schema,
        &[
            (field::GKG_RECORD_ID, record.gkg_record_id.clone()),
            (field::DOCUMENT_IDENTIFIER, record.document_identifier.clone()),
            (field::V2_THEMES, format_v2themes(&record.themes)),
        ],
    )
}

/// A record type that can be read from one kind of GDELT file.
pub trait GdeltRow: Sized {
    const KIND: FileKind;

    fn parse(line: &str, schema: &SchemaDescriptor) -> Result<Self, LineError>;

    /// Number of non-fatal warnings attached to a parsed row.
    fn warnings(&self) -> u64 {
        0
    }
}

impl GdeltRow for EventRecord {
    const KIND: FileKind = FileKind::Event;

    fn parse(line: &str, schema: &SchemaDescriptor) -> Result<Self, LineError> {
        parse_event_line(line, schema)
    }

    fn warnings(&self) -> u64 {
        u64::from(self.has_malformed_actor_code()) + u64::from(self.unparsed_root_code.is_some())
    }
}

impl GdeltRow for MentionRecord {
    const KIND: FileKind = FileKind::Mentions;

    fn parse(line: &str, schema: &SchemaDescriptor) -> Result<Self, LineError> {
        parse_mention_line(line, schema)
    }
}

impl GdeltRow for GkgRecord {
    const KIND: FileKind = FileKind::Gkg;

    fn parse(line: &str, schema: &SchemaDescriptor) -> Result<Self, LineError> {
        parse_gkg_line(line, schema)
    }

    fn warnings(&self) -> u64 {
        self.themes.iter().filter(|t| t.offset_missing).count() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line_number: u64,
    pub reason: LineError,
}

/// Outcome of reading one file. `parsed + skipped.len() == total_lines`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseReport {
    pub source: String,
    pub kind: FileKind,
    pub total_lines: u64,
    pub parsed: u64,
    pub warnings: u64,
    pub skipped: Vec<SkippedLine>,
}

impl ParseReport {
    pub fn skipped_count(&self) -> u64 {
        self.skipped.len() as u64
    }
}

/// Streams every line of `reader` through the parser for `T`, handing
/// parsed rows to `sink`. Only I/O errors abort.
pub fn parse_stream<T, R, F>(reader: R, source: &str, schema: &SchemaDescriptor, mut sink: F) -> io::Result<ParseReport>
where
    T: GdeltRow,
    R: BufRead,
    F: FnMut(T),
{
    let mut reader = reader;
    let mut report = ParseReport {
        source: source.to_string(),
        kind: T::KIND,
        total_lines: 0,
        parsed: 0,
        warnings: 0,
        skipped: Vec::new(),
    };
    let mut buf = Vec::with_capacity(4096);
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        report.total_lines += 1;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        let line = String::from_utf8_lossy(&buf);
        match T::parse(&line, schema) {
            Ok(row) => {
                report.parsed += 1;
                report.warnings += row.warnings();
                sink(row);
            }
            Err(reason) => report.skipped.push(SkippedLine {
                line_number: report.total_lines,
                reason,
            }),
        }
    }
    Ok(report)
}

/// Writes the skipped-line diagnostics as `file<TAB>line<TAB>reason` rows.
pub fn write_skip_report<'a, W: Write>(
    mut out: W,
    reports: impl IntoIterator<Item = &'a ParseReport>,
) -> io::Result<()> {
    writeln!(out, "file\tline\treason")?;
    for report in reports {
        for skip in &report.skipped {
            writeln!(out, "{}\t{}\t{}", report.source, skip.line_number, skip.reason)?;
        }
    }
    Ok(())
}
