//! Domain types shared by every stage of the pipeline.
//!
//! Everything here is a plain value object. Once constructed nothing is
//! mutated, so records can be shared freely across worker threads.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// ISO 3166-1 alpha-3 country code, stored as three uppercase ASCII letters.
///
/// [`CountryCode::new`] only checks the syntax. Codes that must exist in the
/// bundled registry should be obtained through
/// [`CountryRegistry::normalize`](crate::country::CountryRegistry::normalize).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 3]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a three-letter uppercase country code")]
pub struct InvalidCountryCode(pub String);

impl CountryCode {
    pub fn new(code: &str) -> Result<Self, InvalidCountryCode> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_uppercase) {
            return Err(InvalidCountryCode(code.to_string()));
        }
        Ok(Self([bytes[0], bytes[1], bytes[2]]))
    }

    pub fn as_str(&self) -> &str {
        // Constructed only from ASCII uppercase bytes.
        std::str::from_utf8(&self.0).expect("country code is ASCII")
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CountryCode {
    type Err = InvalidCountryCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for CountryCode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CountryCode::new(&s).map_err(serde::de::Error::custom)
    }
}

/// One of the twenty CAMEO root event codes, `01` through `20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RootCode(u8);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RootCodeError {
    #[error("root code {0} is outside 01..20")]
    OutOfRange(u64),
    #[error("root code `{0}` is not numeric")]
    NotNumeric(String),
}

impl RootCode {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 20;

    pub fn new(value: u8) -> Result<Self, RootCodeError> {
        if (Self::MIN..=Self::MAX).contains(&value) {
            Ok(Self(value))
        } else {
            Err(RootCodeError::OutOfRange(value.into()))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// All twenty root codes in ascending order.
    pub fn all() -> impl Iterator<Item = RootCode> {
        (Self::MIN..=Self::MAX).map(RootCode)
    }

    /// CAMEO short description of the root code.
    pub fn description(self) -> &'static str {
        ROOT_DESCRIPTIONS[usize::from(self.0 - 1)]
    }
}

const ROOT_DESCRIPTIONS: [&str; 20] = [
    "Make Public Statement",
    "Appeal",
    "Express Intent to Cooperate",
    "Consult",
    "Engage in Diplomatic Cooperation",
    "Engage in Material Cooperation",
    "Provide Aid",
    "Yield",
    "Investigate",
    "Demand",
    "Disapprove",
    "Reject",
    "Threaten",
    "Protest",
    "Exhibit Force Posture",
    "Reduce Relations",
    "Coerce",
    "Assault",
    "Fight",
    "Use Unconventional Mass Violence",
];

/// Parses a GDELT `EventRootCode` field such as `"14"`.
///
/// GDELT writes `"--"` when no code could be assigned; that and any other
/// non-digit text is [`RootCodeError::NotNumeric`].
pub fn parse_root_code(text: &str) -> Result<RootCode, RootCodeError> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(RootCodeError::NotNumeric(text.to_string()));
    }
    let value: u64 = text.parse().map_err(|_| RootCodeError::OutOfRange(u64::MAX))?;
    match u8::try_from(value) {
        Ok(v) if (RootCode::MIN..=RootCode::MAX).contains(&v) => Ok(RootCode(v)),
        _ => Err(RootCodeError::OutOfRange(value)),
    }
}

impl fmt::Display for RootCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}", self.0)
    }
}

impl FromStr for RootCode {
    type Err = RootCodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_root_code(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionCategory {
    Direct,
    Indirect,
}

impl fmt::Display for ActionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionCategory::Direct => "Direct",
            ActionCategory::Indirect => "Indirect",
        })
    }
}

/// A single row of the GDELT 2.0 event table, reduced to the columns the
/// pipeline uses.
///
/// Field order matters: the derived `Ord` is the final tie-breaker during
/// deduplication.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventRecord {
    pub global_event_id: u64,
    pub event_date: NaiveDate,
    pub actor1_code: Option<String>,
    pub actor2_code: Option<String>,
    pub actor1_country: Option<String>,
    pub actor2_country: Option<String>,
    pub event_root_code: Option<RootCode>,
    /// Raw root-code text when it failed to parse, e.g. `"--"`.
    pub unparsed_root_code: Option<String>,
    pub action_geo_country: Option<String>,
    pub date_added: NaiveDateTime,
    pub source_url: String,
}

impl EventRecord {
    /// A record with only the mandatory fields set.
    pub fn new(
        global_event_id: u64,
        event_date: NaiveDate,
        date_added: NaiveDateTime,
        source_url: impl Into<String>,
    ) -> Self {
        Self {
            global_event_id,
            event_date,
            actor1_code: None,
            actor2_code: None,
            actor1_country: None,
            actor2_country: None,
            event_root_code: None,
            unparsed_root_code: None,
            action_geo_country: None,
            date_added,
            source_url: source_url.into(),
        }
    }

    /// True when either actor code is present but not a whole number of
    /// three-character CAMEO segments. Such records are kept, only flagged.
    pub fn has_malformed_actor_code(&self) -> bool {
        [&self.actor1_code, &self.actor2_code]
            .into_iter()
            .flatten()
            .any(|code| !actor_code_is_wellformed(code))
    }
}

/// Composite CAMEO actor codes are concatenations of 3-character segments.
pub fn actor_code_is_wellformed(code: &str) -> bool {
    let len = code.trim().len();
    len > 0 && len.is_multiple_of(3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MentionRecord {
    pub global_event_id: u64,
    pub mention_identifier: String,
    pub mention_tone: f64,
}

/// A `(theme, character offset)` pair from the GKG `V2Themes` field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThemeMention {
    pub name: String,
    pub char_offset: u64,
    /// Set when the entry carried no usable numeric offset.
    pub offset_missing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GkgRecord {
    pub gkg_record_id: String,
    pub document_identifier: String,
    pub themes: Vec<ThemeMention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PopulationError {
    #[error("{country}: refugee population {refugees} exceeds total population {total}")]
    RefugeesExceedTotal {
        country: CountryCode,
        refugees: u64,
        total: u64,
    },
    #[error("{0}: total population must be positive")]
    ZeroTotal(CountryCode),
}

/// Refugee (RP) and total (TP) population for one country.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationRecord {
    pub country: CountryCode,
    pub refugee_population: u64,
    pub total_population: u64,
    pub as_of: String,
}

impl PopulationRecord {
    pub fn new(
        country: CountryCode,
        refugee_population: u64,
        total_population: u64,
        as_of: impl Into<String>,
    ) -> Result<Self, PopulationError> {
        if total_population == 0 {
            return Err(PopulationError::ZeroTotal(country));
        }
        if refugee_population > total_population {
            return Err(PopulationError::RefugeesExceedTotal {
                country,
                refugees: refugee_population,
                total: total_population,
            });
        }
        Ok(Self {
            country,
            refugee_population,
            total_population,
            as_of: as_of.into(),
        })
    }
}

/// Per-country event frequency (F) scaled by the refugee ratio RT = RP / TP.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryMetrics {
    pub country: CountryCode,
    pub event_frequency: u64,
    pub refugee_population: u64,
    pub total_population: u64,
    pub refugee_ratio: f64,
    pub scaled_frequency: f64,
}

impl CountryMetrics {
    /// Returns `None` when the refugee population is zero, where the scaled
    /// frequency is undefined.
    ///
    /// The scaled frequency is F × TP / RP with a single division, which is
    /// not the same number as F / RT once RT has been rounded for display.
    pub fn compute(country: CountryCode, event_frequency: u64, population: &PopulationRecord) -> Option<Self> {
        let rp = population.refugee_population;
        let tp = population.total_population;
        if rp == 0 {
            return None;
        }
        Some(Self {
            country,
            event_frequency,
            refugee_population: rp,
            total_population: tp,
            refugee_ratio: rp as f64 / tp as f64,
            scaled_frequency: (event_frequency as f64 * tp as f64) / rp as f64,
        })
    }
}

/// Record counts after each stage of the filter cascade.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineCounters {
    /// Theme-matched (document, event row) pairs.
    pub initial_records: u64,
    pub after_ref_actor: u64,
    pub after_country_code: u64,
    pub unique_events: u64,
}

impl PipelineCounters {
    pub fn is_monotone(&self) -> bool {
        self.initial_records >= self.after_ref_actor
            && self.after_ref_actor >= self.after_country_code
            && self.after_country_code >= self.unique_events
    }

    /// `key=value` lines, one per counter, in stage order.
    pub fn to_key_value(&self) -> String {
        format!(
            "initial_records={}\nafter_ref_actor={}\nafter_country_code={}\nunique_events={}\n",
            self.initial_records, self.after_ref_actor, self.after_country_code, self.unique_events
        )
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} theme-matched records -> {} with REF actor -> {} with country code -> {} unique events",
            self.initial_records, self.after_ref_actor, self.after_country_code, self.unique_events
        )
    }
}
