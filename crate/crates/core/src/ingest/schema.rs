//! Column layouts of the three GDELT 2.0 tables.
//!
//! Defaults follow the GDELT 2.0 event, mentions and GKG 2.1 codebooks.
//! An override file of `field = index` lines (plus an optional
//! `column_count = N`) replaces individual positions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Event,
    Mentions,
    Gkg,
}

impl FileKind {
    pub const ALL: [FileKind; 3] = [FileKind::Event, FileKind::Mentions, FileKind::Gkg];

    /// Fields every descriptor of this kind must map.
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            FileKind::Event => &EVENT_FIELDS,
            FileKind::Mentions => &MENTION_FIELDS,
            FileKind::Gkg => &GKG_FIELDS,
        }
    }
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FileKind::Event => "event",
            FileKind::Mentions => "mentions",
            FileKind::Gkg => "gkg",
        })
    }
}

pub mod field {
    pub const GLOBAL_EVENT_ID: &str = "global_event_id";
    pub const EVENT_DATE: &str = "event_date";
    pub const ACTOR1_CODE: &str = "actor1_code";
    pub const ACTOR2_CODE: &str = "actor2_code";
    pub const ACTOR1_COUNTRY: &str = "actor1_country";
    pub const ACTOR2_COUNTRY: &str = "actor2_country";
    pub const EVENT_ROOT_CODE: &str = "event_root_code";
    pub const ACTION_GEO_COUNTRY: &str = "action_geo_country";
    pub const DATE_ADDED: &str = "date_added";
    pub const SOURCE_URL: &str = "source_url";

    pub const MENTION_IDENTIFIER: &str = "mention_identifier";
    pub const MENTION_TONE: &str = "mention_tone";

    pub const GKG_RECORD_ID: &str = "gkg_record_id";
    pub const DOCUMENT_IDENTIFIER: &str = "document_identifier";
    pub const V2_THEMES: &str = "v2_themes";
}

const EVENT_FIELDS: [&str; 10] = [
    field::GLOBAL_EVENT_ID,
    field::EVENT_DATE,
    field::ACTOR1_CODE,
    field::ACTOR2_CODE,
    field::ACTOR1_COUNTRY,
    field::ACTOR2_COUNTRY,
    field::EVENT_ROOT_CODE,
    field::ACTION_GEO_COUNTRY,
    field::DATE_ADDED,
    field::SOURCE_URL,
];
const MENTION_FIELDS: [&str; 3] = [field::GLOBAL_EVENT_ID, field::MENTION_IDENTIFIER, field::MENTION_TONE];
const GKG_FIELDS: [&str; 3] = [field::GKG_RECORD_ID, field::DOCUMENT_IDENTIFIER, field::V2_THEMES];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("{kind} schema: field `{field}` at column {index} is outside {column_count} columns")]
    IndexOutOfRange {
        kind: FileKind,
        field: String,
        index: usize,
        column_count: usize,
    },
    #[error("{kind} schema: fields `{first}` and `{second}` share column {index}")]
    DuplicateIndex {
        kind: FileKind,
        first: String,
        second: String,
        index: usize,
    },
    #[error("{kind} schema: required field `{0}` is not mapped", kind = .1)]
    MissingField(String, FileKind),
    #[error("{kind} schema: unknown field `{0}`", kind = .1)]
    UnknownField(String, FileKind),
    #[error("column_count must be positive")]
    ZeroColumns,
    #[error("schema override: {0}")]
    Override(String),
}

/// Where each semantic field lives in a tab-delimited row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDescriptor {
    kind: FileKind,
    column_count: usize,
    positions: BTreeMap<String, usize>,
}

impl SchemaDescriptor {
    pub fn new(kind: FileKind, column_count: usize, positions: BTreeMap<String, usize>) -> Result<Self, SchemaError> {
        let schema = Self {
            kind,
            column_count,
            positions,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// GDELT 2.0 codebook layout for `kind`.
    pub fn default_for(kind: FileKind) -> Self {
        let (count, pairs): (usize, &[(&str, usize)]) = match kind {
            // 61 columns; positions from the event codebook.
            FileKind::Event => (
                61,
                &[
                    (field::GLOBAL_EVENT_ID, 0),
                    (field::EVENT_DATE, 1),
                    (field::ACTOR1_CODE, 5),
                    (field::ACTOR1_COUNTRY, 7),
                    (field::ACTOR2_CODE, 15),
                    (field::ACTOR2_COUNTRY, 17),
                    (field::EVENT_ROOT_CODE, 28),
                    (field::ACTION_GEO_COUNTRY, 53),
                    (field::DATE_ADDED, 59),
                    (field::SOURCE_URL, 60),
                ],
            ),
            FileKind::Mentions => (
                16,
                &[
                    (field::GLOBAL_EVENT_ID, 0),
                    (field::MENTION_IDENTIFIER, 5),
                    (field::MENTION_TONE, 13),
                ],
            ),
            FileKind::Gkg => (
                27,
                &[
                    (field::GKG_RECORD_ID, 0),
                    (field::DOCUMENT_IDENTIFIER, 4),
                    (field::V2_THEMES, 8),
                ],
            ),
        };
        let positions = pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        Self::new(kind, count, positions).expect("codebook defaults are consistent")
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if self.column_count == 0 {
            return Err(SchemaError::ZeroColumns);
        }
        let required = self.kind.required_fields();
        for name in self.positions.keys() {
            if !required.contains(&name.as_str()) {
                return Err(SchemaError::UnknownField(name.clone(), self.kind));
            }
        }
        for name in required {
            if !self.positions.contains_key(*name) {
                return Err(SchemaError::MissingField(name.to_string(), self.kind));
            }
        }
        let mut seen: BTreeMap<usize, &str> = BTreeMap::new();
        for (name, &index) in &self.positions {
            if index >= self.column_count {
                return Err(SchemaError::IndexOutOfRange {
                    kind: self.kind,
                    field: name.clone(),
                    index,
                    column_count: self.column_count,
                });
            }
            if let Some(first) = seen.insert(index, name) {
                return Err(SchemaError::DuplicateIndex {
                    kind: self.kind,
                    first: first.to_string(),
                    second: name.clone(),
                    index,
                });
            }
        }
        Ok(())
    }

    /// Applies an override file on top of this descriptor.
    pub fn with_overrides(&self, text: &str) -> Result<Self, SchemaError> {
        let table: BTreeMap<String, i64> = toml::from_str(text).map_err(|e| SchemaError::Override(e.to_string()))?;
        let mut next = self.clone();
        for (key, value) in table {
            let value =
                usize::try_from(value).map_err(|_| SchemaError::Override(format!("`{key}` must be non-negative")))?;
            if key == "column_count" {
                next.column_count = value;
            } else {
                next.positions.insert(key, value);
            }
        }
        next.validate()?;
        Ok(next)
    }

    pub fn kind(&self) -> FileKind {
        self.kind
    }

    pub fn column_count(&self) -> usize {
        self.column_count
    }

    /// Column index of a required field.
    ///
    /// # Panics
    /// If `field` is not one of the kind's required fields; construction
    /// guarantees all of those are mapped.
    pub fn position(&self, field: &str) -> usize {
        *self
            .positions
            .get(field)
            .unwrap_or_else(|| panic!("{} schema has no field `{field}`", self.kind))
    }

    pub fn positions(&self) -> &BTreeMap<String, usize> {
        &self.positions
    }
}

impl FromStr for FileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "event" | "events" | "export" => Ok(FileKind::Event),
            "mentions" | "mention" => Ok(FileKind::Mentions),
            "gkg" => Ok(FileKind::Gkg),
            other => Err(format!("unknown file kind `{other}`")),
        }
    }
}
