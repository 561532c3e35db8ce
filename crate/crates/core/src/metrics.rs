//! Refugee and total population ingestion, scaled frequencies and ranking.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use thiserror::Error;

use crate::country::CountryRegistry;
use crate::filter::FilteredEvent;
use crate::model::{CountryCode, CountryMetrics, PopulationError, PopulationRecord};

/// Default reporting threshold on hosted refugees and other displaced people.
pub const DEFAULT_MIN_REFUGEES: u64 = 50_000;
pub const DEFAULT_TOP_N: usize = 10;

/// Per-country counts of filtered events (F).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: BTreeMap<CountryCode, u64>,
}

impl FrequencyTable {
    pub fn from_events(events: &[FilteredEvent]) -> Self {
        Self::from_countries(events.iter().map(|e| e.country))
    }

    pub fn from_countries(countries: impl IntoIterator<Item = CountryCode>) -> Self {
        let mut counts = BTreeMap::new();
        for c in countries {
            *counts.entry(c).or_default() += 1;
        }
        Self { counts }
    }

    pub fn get(&self, country: CountryCode) -> u64 {
        self.counts.get(&country).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CountryCode, u64)> + '_ {
        self.counts.iter().map(|(&c, &n)| (c, n))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Header names to look for in a population CSV. Matching is
/// case-insensitive; the first country header present is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationColumns {
    pub country: Vec<String>,
    /// Value headers. For refugee files every present header is summed,
    /// for total-population files the first present one is used.
    pub values: Vec<String>,
}

impl PopulationColumns {
    /// Headers of the UNHCR refugee data finder export. Refugees,
    /// asylum-seekers and others in need of international protection
    /// are summed.
    pub fn unhcr() -> Self {
        Self {
            country: vec![
                "Country of asylum (ISO)".into(),
                "Country of Asylum Code".into(),
                "Country of asylum".into(),
                "Country".into(),
            ],
            values: vec![
                "Refugees under UNHCR's mandate".into(),
                "Asylum-seekers".into(),
                "Other people in need of international protection".into(),
                "Refugees".into(),
            ],
        }
    }

    /// Headers of the US Census Bureau international database export.
    pub fn census() -> Self {
        Self {
            country: vec![
                "Country/Area Name".into(),
                "NAME".into(),
                "Country".into(),
                "GENC".into(),
            ],
            values: vec!["Total Population".into(), "POP".into(), "Population".into()],
        }
    }

    pub fn new(country: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            country: vec![country.into()],
            values: vec![value.into()],
        }
    }
}

#[derive(Debug, Error)]
pub enum PopulationLoadError {
    #[error("population file has none of the columns {0:?}")]
    MissingColumn(Vec<String>),
    #[error("population csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Row-level problems. None of them abort a load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PopulationDiagnostic {
    Unresolved { row: u64, label: String },
    NegativeCount { row: u64, label: String, value: String },
    BadNumber { row: u64, label: String, value: String },
    ZeroPopulation { row: u64, country: CountryCode },
    DuplicateCountry { row: u64, country: CountryCode },
    BadRow { row: u64, message: String },
}

impl fmt::Display for PopulationDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unresolved { row, label } => write!(f, "row {row}: Unresolved country `{label}`"),
            Self::NegativeCount { row, label, value } => write!(f, "row {row}: NegativeCount {label} = {value}"),
            Self::BadNumber { row, label, value } => write!(f, "row {row}: BadNumber {label} = `{value}`"),
            Self::ZeroPopulation { row, country } => write!(f, "row {row}: ZeroPopulation {country}"),
            Self::DuplicateCountry { row, country } => write!(f, "row {row}: DuplicateCountry {country}"),
            Self::BadRow { row, message } => write!(f, "row {row}: BadRow {message}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationPartial {
    pub country: CountryCode,
    pub value: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadedPopulation {
    /// One partial per country, sorted by code.
    pub partials: Vec<PopulationPartial>,
    pub diagnostics: Vec<PopulationDiagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Duplicates {
    /// Rows broken down by origin are summed per country of asylum.
    Sum,
    LastWins,
}

enum Count {
    Value(u64),
    Negative,
    Bad,
}

fn parse_count(raw: &str, blank_is_zero: bool) -> Count {
    let cleaned: String = raw
        .chars()
        .filter(|c| !matches!(c, ',' | '_' | ' ' | '\u{a0}'))
        .collect();
    if cleaned.is_empty() || cleaned == "-" {
        return if blank_is_zero { Count::Value(0) } else { Count::Bad };
    }
    if let Ok(v) = cleaned.parse::<u64>() {
        return Count::Value(v);
    }
    match cleaned.parse::<f64>() {
        Ok(v) if v < 0.0 => Count::Negative,
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v <= u64::MAX as f64 => Count::Value(v as u64),
        _ => Count::Bad,
    }
}

fn find_columns(headers: &csv::StringRecord, wanted: &[String]) -> Vec<usize> {
    wanted
        .iter()
        .filter_map(|w| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(w.trim())))
        .collect()
}

fn load_population<R: Read>(
    reader: R,
    registry: &CountryRegistry,
    columns: &PopulationColumns,
    duplicates: Duplicates,
) -> Result<LoadedPopulation, PopulationLoadError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let country_col = *find_columns(&headers, &columns.country)
        .first()
        .ok_or_else(|| PopulationLoadError::MissingColumn(columns.country.clone()))?;
    let mut value_cols = find_columns(&headers, &columns.values);
    if value_cols.is_empty() {
        return Err(PopulationLoadError::MissingColumn(columns.values.clone()));
    }
    if duplicates == Duplicates::LastWins {
        value_cols.truncate(1);
    }

    let mut values: BTreeMap<CountryCode, u64> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(PopulationDiagnostic::BadRow {
                    row: row_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let label = row.get(country_col).unwrap_or("").trim().to_string();
        let Ok(country) = registry.normalize(&label) else {
            diagnostics.push(PopulationDiagnostic::Unresolved { row: row_no, label });
            continue;
        };
        let mut total = 0u64;
        let mut rejected = false;
        for &col in &value_cols {
            let raw = row.get(col).unwrap_or("").trim();
            match parse_count(raw, duplicates == Duplicates::Sum) {
                Count::Value(v) => total = total.saturating_add(v),
                Count::Negative => {
                    diagnostics.push(PopulationDiagnostic::NegativeCount {
                        row: row_no,
                        label: label.clone(),
                        value: raw.to_string(),
                    });
                    rejected = true;
                }
                Count::Bad => {
                    diagnostics.push(PopulationDiagnostic::BadNumber {
                        row: row_no,
                        label: label.clone(),
                        value: raw.to_string(),
                    });
                    rejected = true;
                }
            }
            if rejected {
                break;
            }
        }
        if rejected {
            continue;
        }
        match duplicates {
            Duplicates::Sum => *values.entry(country).or_default() += total,
            Duplicates::LastWins => {
                if total == 0 {
                    diagnostics.push(PopulationDiagnostic::ZeroPopulation { row: row_no, country });
                    continue;
                }
                if values.insert(country, total).is_some() {
                    diagnostics.push(PopulationDiagnostic::DuplicateCountry { row: row_no, country });
                }
            }
        }
    }
    Ok(LoadedPopulation {
        partials: values
            .into_iter()
            .map(|(country, value)| PopulationPartial { country, value })
            .collect(),
        diagnostics,
    })
}

/// Reads refugee counts (RP) per country of asylum. Rows for the same
/// country are summed, so exports broken down by origin work unchanged.
pub fn load_refugee_population<R: Read>(
    reader: R,
    registry: &CountryRegistry,
    columns: &PopulationColumns,
) -> Result<LoadedPopulation, PopulationLoadError> {
    load_population(reader, registry, columns, Duplicates::Sum)
}

/// Reads total population (TP). Zero rows are rejected; repeated countries
/// keep the last row and emit a `DuplicateCountry` diagnostic.
pub fn load_total_population<R: Read>(
    reader: R,
    registry: &CountryRegistry,
    columns: &PopulationColumns,
) -> Result<LoadedPopulation, PopulationLoadError> {
    load_population(reader, registry, columns, Duplicates::LastWins)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergeDiagnostic {
    MissingTotal(CountryCode),
    MissingRefugees(CountryCode),
    Invalid(PopulationError),
}

impl fmt::Display for MergeDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingTotal(c) => write!(f, "{c}: MissingTotal"),
            Self::MissingRefugees(c) => write!(f, "{c}: MissingRefugees"),
            Self::Invalid(e) => write!(f, "Invalid: {e}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergedPopulations {
    pub records: BTreeMap<CountryCode, PopulationRecord>,
    pub diagnostics: Vec<MergeDiagnostic>,
}

/// Joins refugee and total partials; only countries with both survive.
pub fn merge_populations(
    refugees: &[PopulationPartial],
    totals: &[PopulationPartial],
    as_of: &str,
) -> MergedPopulations {
    let rp: BTreeMap<_, _> = refugees.iter().map(|p| (p.country, p.value)).collect();
    let tp: BTreeMap<_, _> = totals.iter().map(|p| (p.country, p.value)).collect();
    let mut merged = MergedPopulations::default();
    for (&country, &refugees) in &rp {
        let Some(&total) = tp.get(&country) else {
            merged.diagnostics.push(MergeDiagnostic::MissingTotal(country));
            continue;
        };
        match PopulationRecord::new(country, refugees, total, as_of) {
            Ok(record) => {
                merged.records.insert(country, record);
            }
            Err(e) => merged.diagnostics.push(MergeDiagnostic::Invalid(e)),
        }
    }
    for &country in tp.keys() {
        if !rp.contains_key(&country) {
            merged.diagnostics.push(MergeDiagnostic::MissingRefugees(country));
        }
    }
    merged
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    /// Sorted by country code.
    pub metrics: Vec<CountryMetrics>,
    /// Countries with events but no complete population data.
    pub missing_population: Vec<CountryCode>,
    /// Countries with events whose refugee population is zero.
    pub zero_refugees: Vec<CountryCode>,
}

/// RT = RP / TP and scaled frequency F × TP / RP for every country with
/// events and usable population data.
pub fn compute_country_metrics(
    freq: &FrequencyTable,
    populations: &BTreeMap<CountryCode, PopulationRecord>,
) -> MetricsReport {
    let mut report = MetricsReport::default();
    for (country, f) in freq.iter().filter(|&(_, f)| f > 0) {
        let Some(pop) = populations.get(&country) else {
            report.missing_population.push(country);
            continue;
        };
        match CountryMetrics::compute(country, f, pop) {
            Some(m) => report.metrics.push(m),
            None => report.zero_refugees.push(country),
        }
    }
    report
}

/// Metrics rows (all zero frequency) for countries that have population
/// data but no events. Used to shade such countries on the map on request.
pub fn zero_event_metrics(
    freq: &FrequencyTable,
    populations: &BTreeMap<CountryCode, PopulationRecord>,
) -> Vec<CountryMetrics> {
    populations
        .iter()
        .filter(|(&c, _)| freq.get(c) == 0)
        .filter_map(|(&c, pop)| CountryMetrics::compute(c, 0, pop))
        .collect()
}

/// Countries hosting at least `min_refugees`, by scaled frequency
/// descending (ties: higher F, then code), truncated to `n`.
pub fn top_n(metrics: &[CountryMetrics], n: usize, min_refugees: u64) -> Vec<CountryMetrics> {
    let mut ranked: Vec<CountryMetrics> = metrics
        .iter()
        .filter(|m| m.refugee_population >= min_refugees)
        .cloned()
        .collect();
    ranked.sort_by(|a, b| {
        b.scaled_frequency
            .total_cmp(&a.scaled_frequency)
            .then_with(|| b.event_frequency.cmp(&a.event_frequency))
            .then_with(|| a.country.cmp(&b.country))
    });
    ranked.truncate(n);
    ranked
}
