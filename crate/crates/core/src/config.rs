//! Run configuration: built-in defaults, a TOML file, then command-line
//! flags, each layer overriding the previous one.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{CountryStrategy, MatchMode};
use crate::ingest::master::{ENGLISH_MASTER_LIST_URL, TRANSLINGUAL_MASTER_LIST_URL};
use crate::ingest::{Feed, FileKind, SchemaDescriptor};
use crate::metrics::{PopulationColumns, DEFAULT_MIN_REFUGEES, DEFAULT_TOP_N};
use crate::render::ColorTransform;

pub const CACHE_DIR_ENV: &str = "XENOSCOPE_CACHE_DIR";
pub const DEFAULT_START: &str = "2022-01-01T00:00:00";
pub const DEFAULT_END: &str = "2022-12-31T23:59:59";
pub const DEFAULT_CACHE_DIR: &str = "gdelt-cache";
pub const DEFAULT_OUT_DIR: &str = "out";
pub const DEFAULT_JOBS: usize = 4;
pub const DEFAULT_FETCH_ATTEMPTS: u32 = 3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Column positions to override per file kind, as `field = index` tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mentions: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gkg: Option<toml::Table>,
}

/// One configuration layer. Every field is optional; unset fields fall
/// through to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feeds: Option<Vec<Feed>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Read decompressed update files from here instead of the cache.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub themes_mode: Option<MatchMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country_strategy: Option<CountryStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refugees_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refugees_country_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refugees_value_columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_country_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_value_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_refugees: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_n: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch_attempts: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_list_english: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_list_translingual: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_transform: Option<ColorTransform>,
    /// Shade countries with population data but no events at the bottom
    /// of the ramp instead of gray.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_zero_event_countries: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<SchemaOverrides>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident, $($f:ident),* $(,)?) => {
        ConfigLayer { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ConfigLayer {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        let base = self;
        overlay_fields!(
            base,
            top,
            start,
            end,
            feeds,
            cache_dir,
            input_dir,
            themes_mode,
            country_strategy,
            refugees_csv,
            population_csv,
            refugees_country_column,
            refugees_value_columns,
            population_country_column,
            population_value_column,
            as_of,
            min_refugees,
            top_n,
            out,
            jobs,
            fetch_attempts,
            master_list_english,
            master_list_translingual,
            color_transform,
            map_zero_event_countries,
            schema,
        )
    }
}

/// Parses a range bound. Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS]`
/// (space also allowed) and GDELT's `YYYYMMDDHHMMSS`. A date-only end
/// bound covers the whole day.
pub fn parse_bound(text: &str, is_end: bool) -> Result<NaiveDateTime, ConfigError> {
    let t = text.trim();
    if let Ok(d) = NaiveDate::parse_from_str(t, "%Y-%m-%d") {
        let time = if is_end {
            NaiveTime::from_hms_opt(23, 59, 59).unwrap()
        } else {
            NaiveTime::MIN
        };
        return Ok(d.and_time(time));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y%m%d%H%M%S",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            return Ok(dt);
        }
    }
    Err(ConfigError::Invalid(format!(
        "cannot parse {} bound {text:?} (expected YYYY-MM-DD or YYYY-MM-DDTHH:MM[:SS])",
        if is_end { "end" } else { "start" }
    )))
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub feeds: Vec<Feed>,
    pub cache_dir: PathBuf,
    pub input_dir: Option<PathBuf>,
    pub themes_mode: MatchMode,
    pub country_strategy: CountryStrategy,
    pub refugees_csv: Option<PathBuf>,
    pub population_csv: Option<PathBuf>,
    pub refugee_columns: PopulationColumns,
    pub population_columns: PopulationColumns,
    pub as_of: String,
    pub min_refugees: u64,
    pub top_n: usize,
    pub out: PathBuf,
    pub jobs: usize,
    pub fetch_attempts: u32,
    pub master_list_english: String,
    pub master_list_translingual: String,
    pub color_transform: ColorTransform,
    pub map_zero_event_countries: bool,
    pub event_schema: SchemaDescriptor,
    pub mentions_schema: SchemaDescriptor,
    pub gkg_schema: SchemaDescriptor,
    layer: ConfigLayer,
}

impl RunConfig {
    pub fn resolve(layer: ConfigLayer) -> Result<Self, ConfigError> {
        let start = parse_bound(layer.start.as_deref().unwrap_or(DEFAULT_START), false)?;
        let end = parse_bound(layer.end.as_deref().unwrap_or(DEFAULT_END), true)?;
        if end < start {
            return Err(ConfigError::Invalid(format!("end {end} precedes start {start}")));
        }
        let mut feeds = layer.feeds.clone().unwrap_or_else(|| Feed::ALL.to_vec());
        feeds.sort();
        feeds.dedup();
        if feeds.is_empty() {
            return Err(ConfigError::Invalid("feeds must name at least one feed".into()));
        }
        let non_negative = |name: &str, v: Option<i64>, default: u64| -> Result<u64, ConfigError> {
            match v {
                None => Ok(default),
                Some(n) if n >= 0 => Ok(n as u64),
                Some(n) => Err(ConfigError::Invalid(format!("{name} must be >= 0, got {n}"))),
            }
        };
        let min_refugees = non_negative("min_refugees", layer.min_refugees, DEFAULT_MIN_REFUGEES)?;
        let top_n = non_negative("top_n", layer.top_n, DEFAULT_TOP_N as u64)? as usize;
        let jobs = non_negative("jobs", layer.jobs, DEFAULT_JOBS as u64)? as usize;
        if jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be at least 1".into()));
        }
        let fetch_attempts = layer.fetch_attempts.unwrap_or(DEFAULT_FETCH_ATTEMPTS);
        if fetch_attempts == 0 {
            return Err(ConfigError::Invalid("fetch_attempts must be at least 1".into()));
        }

        let mut refugee_columns = PopulationColumns::unhcr();
        if let Some(c) = &layer.refugees_country_column {
            refugee_columns.country = vec![c.clone()];
        }
        if let Some(v) = &layer.refugees_value_columns {
            if v.is_empty() {
                return Err(ConfigError::Invalid("refugees_value_columns must not be empty".into()));
            }
            refugee_columns.values = v.clone();
        }
        let mut population_columns = PopulationColumns::census();
        if let Some(c) = &layer.population_country_column {
            population_columns.country = vec![c.clone()];
        }
        if let Some(v) = &layer.population_value_column {
            population_columns.values = vec![v.clone()];
        }

        let schema = layer.schema.clone().unwrap_or_default();
        let descriptor = |kind: FileKind, table: &Option<toml::Table>| -> Result<SchemaDescriptor, ConfigError> {
            let base = SchemaDescriptor::default_for(kind);
            match table {
                None => Ok(base),
                Some(t) => {
                    let text = toml::to_string(t).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    base.with_overrides(&text)
                        .map_err(|e| ConfigError::Invalid(format!("schema.{kind}: {e}")))
                }
            }
        };

        Ok(Self {
            start,
            end,
            feeds,
            cache_dir: layer
                .cache_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
            input_dir: layer.input_dir.clone(),
            themes_mode: layer.themes_mode.unwrap_or_default(),
            country_strategy: layer.country_strategy.unwrap_or_default(),
            refugees_csv: layer.refugees_csv.clone(),
            population_csv: layer.population_csv.clone(),
            refugee_columns,
            population_columns,
            as_of: layer.as_of.clone().unwrap_or_else(|| start.format("%Y").to_string()),
            min_refugees,
            top_n,
            out: layer.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            jobs,
            fetch_attempts,
            master_list_english: layer
                .master_list_english
                .clone()
                .unwrap_or_else(|| ENGLISH_MASTER_LIST_URL.to_string()),
            master_list_translingual: layer
                .master_list_translingual
                .clone()
                .unwrap_or_else(|| TRANSLINGUAL_MASTER_LIST_URL.to_string()),
            color_transform: layer.color_transform.unwrap_or_default(),
            map_zero_event_countries: layer.map_zero_event_countries.unwrap_or(false),
            event_schema: descriptor(FileKind::Event, &schema.event)?,
            mentions_schema: descriptor(FileKind::Mentions, &schema.mentions)?,
            gkg_schema: descriptor(FileKind::Gkg, &schema.gkg)?,
            layer,
        })
    }

    /// Defaults, then the optional file, then `flags`.
    pub fn load(config_file: Option<&Path>, flags: ConfigLayer) -> Result<Self, ConfigError> {
        let file = match config_file {
            Some(p) => ConfigLayer::from_file(p)?,
            None => ConfigLayer::default(),
        };
        Self::resolve(file.overlay(flags))
    }

    pub fn master_list_url(&self, feed: Feed) -> &str {
        match feed {
            Feed::English => &self.master_list_english,
            Feed::Translingual => &self.master_list_translingual,
        }
    }

    pub fn schema(&self, kind: FileKind) -> &SchemaDescriptor {
        match kind {
            FileKind::Event => &self.event_schema,
            FileKind::Mentions => &self.mentions_schema,
            FileKind::Gkg => &self.gkg_schema,
        }
    }

    /// Every setting written out explicitly; loading the result as a
    /// config file reproduces this configuration.
    pub fn effective_toml(&self) -> String {
        let layer = ConfigLayer {
            start: Some(self.start.format("%Y-%m-%dT%H:%M:%S").to_string()),
            end: Some(self.end.format("%Y-%m-%dT%H:%M:%S").to_string()),
            feeds: Some(self.feeds.clone()),
            cache_dir: Some(self.cache_dir.clone()),
            input_dir: self.input_dir.clone(),
            themes_mode: Some(self.themes_mode),
            country_strategy: Some(self.country_strategy),
            refugees_csv: self.refugees_csv.clone(),
            population_csv: self.population_csv.clone(),
            refugees_country_column: self.layer.refugees_country_column.clone(),
            refugees_value_columns: self.layer.refugees_value_columns.clone(),
            population_country_column: self.layer.population_country_column.clone(),
            population_value_column: self.layer.population_value_column.clone(),
            as_of: Some(self.as_of.clone()),
            min_refugees: Some(self.min_refugees as i64),
            top_n: Some(self.top_n as i64),
            out: Some(self.out.clone()),
            jobs: Some(self.jobs as i64),
            fetch_attempts: Some(self.fetch_attempts),
            master_list_english: Some(self.master_list_english.clone()),
            master_list_translingual: Some(self.master_list_translingual.clone()),
            color_transform: Some(self.color_transform),
            map_zero_event_countries: Some(self.map_zero_event_countries),
            schema: self.layer.schema.clone(),
        };
        toml::to_string(&layer).expect("config serializes")
    }
}
