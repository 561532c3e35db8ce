//! Files exchanged between pipeline stages.
//!
//! Every stage reads only these files, so any one of them can be replaced
//! by a user-supplied equivalent. All text output uses `\n` line endings;
//! readers accept `\r\n` as well.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::classify::CountryBreakdown;
use crate::filter::{FilterDiagnostics, FilteredEvent};
use crate::model::{parse_root_code, CountryCode, CountryMetrics, PipelineCounters, PopulationRecord, RootCode};

pub const FILTERED_EVENTS: &str = "filtered_events.csv";
pub const COUNTERS: &str = "counters.txt";
pub const THEME_AUDIT: &str = "theme_audit.csv";
pub const SKIPPED_LINES: &str = "skipped_lines.tsv";
pub const INPUTS: &str = "inputs.tsv";
pub const FETCH_MANIFEST: &str = "fetch_manifest.tsv";
pub const METRICS: &str = "metrics.csv";
pub const POPULATIONS: &str = "populations.csv";
pub const METRICS_DIAGNOSTICS: &str = "metrics_diagnostics.txt";
pub const BREAKDOWN: &str = "breakdown.csv";
pub const GLOBAL_SPLIT: &str = "global_split.txt";
pub const RANKED_TABLE: &str = "top_countries.csv";
pub const RANKED_TABLE_MD: &str = "top_countries.md";
pub const RANKED_BREAKDOWN: &str = "top_countries_breakdown.csv";
pub const RANKED_BREAKDOWN_MD: &str = "top_countries_breakdown.md";
pub const REPORT_DIAGNOSTICS: &str = "report_diagnostics.txt";
pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

const FILTERED_HEADER: [&str; 8] = [
    "global_event_id",
    "country",
    "event_root_code",
    "event_date",
    "date_added",
    "matched_themes",
    "n_source_documents",
    "source_url",
];

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path} line {line}: {message}")]
    BadRow { path: PathBuf, line: u64, message: String },
    #[error("{path}: missing column {column}")]
    MissingColumn { path: PathBuf, column: String },
}

impl ArtifactError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, ArtifactError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound)
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| ArtifactError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn csv(path: &Path) -> impl FnOnce(csv::Error) -> Self + '_ {
        move |source| ArtifactError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(ArtifactError::io(parent))?;
    }
    fs::write(path, text).map_err(ArtifactError::io(path))
}

pub fn read_text(path: &Path) -> Result<String, ArtifactError> {
    fs::read_to_string(path).map_err(ArtifactError::io(path))
}

fn open(path: &Path) -> Result<File, ArtifactError> {
    File::open(path).map_err(ArtifactError::io(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ArtifactError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(ArtifactError::io(parent))?;
    }
    let file = File::create(path).map_err(ArtifactError::io(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, ArtifactError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| ArtifactError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
}

/// The fields later stages need from a filtered event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FilteredEventRow {
    pub global_event_id: u64,
    pub country: CountryCode,
    pub event_root_code: Option<RootCode>,
}

impl From<&FilteredEvent> for FilteredEventRow {
    fn from(e: &FilteredEvent) -> Self {
        Self {
            global_event_id: e.event.global_event_id,
            country: e.country,
            event_root_code: e.event.event_root_code,
        }
    }
}

/// Events in the given order; theme names joined by `|`.
pub fn write_filtered_events(path: &Path, events: &[FilteredEvent]) -> Result<(), ArtifactError> {
    let mut w = csv_writer(path)?;
    w.write_record(FILTERED_HEADER).map_err(ArtifactError::csv(path))?;
    for e in events {
        let themes: Vec<&str> = e.matched_themes.iter().map(String::as_str).collect();
        w.write_record([
            e.event.global_event_id.to_string(),
            e.country.to_string(),
            e.event.event_root_code.map(|r| r.to_string()).unwrap_or_default(),
            e.event.event_date.format("%Y-%m-%d").to_string(),
            e.event.date_added.format("%Y%m%d%H%M%S").to_string(),
            themes.join("|"),
            e.source_documents.len().to_string(),
            e.event.source_url.clone(),
        ])
        .map_err(ArtifactError::csv(path))?;
    }
    w.flush().map_err(ArtifactError::io(path))
}

/// Reads `global_event_id`, `country` and `event_root_code`; other columns
/// are optional. A blank or non-CAMEO root code reads as unclassified.
pub fn read_filtered_events(path: &Path) -> Result<Vec<FilteredEventRow>, ArtifactError> {
    read_filtered_events_from(open(path)?, path)
}

pub fn read_filtered_events_from<R: Read>(reader: R, path: &Path) -> Result<Vec<FilteredEventRow>, ArtifactError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers().map_err(ArtifactError::csv(path))?.clone();
    let id_col = column(&headers, "global_event_id", path)?;
    let cc_col = column(&headers, "country", path)?;
    let root_col = column(&headers, "event_root_code", path)?;
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(ArtifactError::csv(path))?;
        let line = i as u64 + 2;
        let bad = |message: String| ArtifactError::BadRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        let id = record
            .get(id_col)
            .unwrap_or("")
            .parse::<u64>()
            .map_err(|e| bad(format!("global_event_id: {e}")))?;
        let country = CountryCode::new(record.get(cc_col).unwrap_or("")).map_err(|e| bad(e.to_string()))?;
        let root = record.get(root_col).and_then(|s| parse_root_code(s).ok());
        rows.push(FilteredEventRow {
            global_event_id: id,
            country,
            event_root_code: root,
        });
    }
    Ok(rows)
}

pub fn counters_report(counters: &PipelineCounters, diagnostics: &FilterDiagnostics) -> String {
    let mut s = counters.to_key_value();
    s.push_str(&diagnostics.to_key_value());
    s.push_str("# ");
    s.push_str(&counters.summary_line());
    s.push('\n');
    s
}

/// Reads the four stage counts back from a counters report.
pub fn parse_counters(text: &str) -> Option<PipelineCounters> {
    let kv: BTreeMap<&str, u64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .filter_map(|(k, v)| Some((k.trim(), v.trim().parse().ok()?)))
        .collect();
    Some(PipelineCounters {
        initial_records: *kv.get("initial_records")?,
        after_ref_actor: *kv.get("after_ref_actor")?,
        after_country_code: *kv.get("after_country_code")?,
        unique_events: *kv.get("unique_events")?,
    })
}

pub fn theme_audit_csv(audit: &BTreeMap<String, u64>) -> String {
    let mut s = String::from("theme,matched_gkg_records\n");
    for (theme, n) in audit {
        s.push_str(&format!("{theme},{n}\n"));
    }
    s
}

/// `CC,RP,TP,as_of`, sorted by code.
pub fn write_populations(path: &Path, records: &BTreeMap<CountryCode, PopulationRecord>) -> Result<(), ArtifactError> {
    let mut w = csv_writer(path)?;
    w.write_record(["CC", "RP", "TP", "as_of"])
        .map_err(ArtifactError::csv(path))?;
    for r in records.values() {
        w.write_record([
            r.country.to_string(),
            r.refugee_population.to_string(),
            r.total_population.to_string(),
            r.as_of.clone(),
        ])
        .map_err(ArtifactError::csv(path))?;
    }
    w.flush().map_err(ArtifactError::io(path))
}

pub fn read_populations(path: &Path) -> Result<BTreeMap<CountryCode, PopulationRecord>, ArtifactError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = r.headers().map_err(ArtifactError::csv(path))?.clone();
    let cc = column(&headers, "CC", path)?;
    let rp = column(&headers, "RP", path)?;
    let tp = column(&headers, "TP", path)?;
    let as_of = headers.iter().position(|h| h == "as_of");
    let mut out = BTreeMap::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(ArtifactError::csv(path))?;
        let bad = |message: String| ArtifactError::BadRow {
            path: path.to_path_buf(),
            line: i as u64 + 2,
            message,
        };
        let country = CountryCode::new(&record[cc]).map_err(|e| bad(e.to_string()))?;
        let refugees = record[rp].parse::<u64>().map_err(|e| bad(format!("RP: {e}")))?;
        let total = record[tp].parse::<u64>().map_err(|e| bad(format!("TP: {e}")))?;
        let stamp = as_of.and_then(|c| record.get(c)).unwrap_or("");
        let rec = PopulationRecord::new(country, refugees, total, stamp).map_err(|e| bad(e.to_string()))?;
        out.insert(country, rec);
    }
    Ok(out)
}

/// Reads a metrics CSV (`CC,F,RP,TP[,...]`). RT and scaled frequency are
/// recomputed from the integer columns, so the printed rounding never
/// feeds back into ranking.
pub fn read_metrics(path: &Path) -> Result<Vec<CountryMetrics>, ArtifactError> {
    read_metrics_from(open(path)?, path)
}

pub fn read_metrics_from<R: Read>(reader: R, path: &Path) -> Result<Vec<CountryMetrics>, ArtifactError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers().map_err(ArtifactError::csv(path))?.clone();
    let cc = column(&headers, "CC", path)?;
    let f = column(&headers, "F", path)?;
    let rp = column(&headers, "RP", path)?;
    let tp = column(&headers, "TP", path)?;
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(ArtifactError::csv(path))?;
        let bad = |message: String| ArtifactError::BadRow {
            path: path.to_path_buf(),
            line: i as u64 + 2,
            message,
        };
        let num = |col: usize, name: &str| {
            record[col]
                .replace(',', "")
                .parse::<u64>()
                .map_err(|e| bad(format!("{name}: {e}")))
        };
        let country = CountryCode::new(&record[cc]).map_err(|e| bad(e.to_string()))?;
        let pop = PopulationRecord::new(country, num(rp, "RP")?, num(tp, "TP")?, "").map_err(|e| bad(e.to_string()))?;
        let metrics = CountryMetrics::compute(country, num(f, "F")?, &pop)
            .ok_or_else(|| bad("RP is zero; scaled frequency undefined".into()))?;
        out.push(metrics);
    }
    Ok(out)
}

/// Reads a breakdown CSV (`CC,Indirect,Direct[,Total]`).
pub fn read_breakdown(path: &Path) -> Result<Vec<CountryBreakdown>, ArtifactError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = r.headers().map_err(ArtifactError::csv(path))?.clone();
    let cc = column(&headers, "CC", path)?;
    let ind = column(&headers, "Indirect", path)?;
    let dir = column(&headers, "Direct", path)?;
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(ArtifactError::csv(path))?;
        let bad = |message: String| ArtifactError::BadRow {
            path: path.to_path_buf(),
            line: i as u64 + 2,
            message,
        };
        let country = CountryCode::new(&record[cc]).map_err(|e| bad(e.to_string()))?;
        let indirect = record[ind].parse::<u64>().map_err(|e| bad(format!("Indirect: {e}")))?;
        let direct = record[dir].parse::<u64>().map_err(|e| bad(format!("Direct: {e}")))?;
        out.push(CountryBreakdown::new(country, direct, indirect));
    }
    out.sort_by_key(|b| b.country);
    Ok(out)
}

/// Tab-separated manifest rows, header first.
pub fn write_tsv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), ArtifactError> {
    let mut s = header.join("\t");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join("\t"));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_with<F>(path: &Path, f: F) -> Result<(), ArtifactError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(ArtifactError::io(parent))?;
    }
    let file = File::create(path).map_err(ArtifactError::io(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(ArtifactError::io(path))
}
