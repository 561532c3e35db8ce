//! Country registry and code normalization.
//!
//! GDELT actor countries use CAMEO 3-letter codes, GDELT geography uses
//! FIPS 10-4, UNHCR keys rows by ISO codes or English names and the census
//! files by names. All of them are reconciled here onto ISO 3166 alpha-3.

use std::collections::HashMap;
use std::io::Read;
use std::sync::OnceLock;

use thiserror::Error;

use crate::model::CountryCode;

const BUNDLED_REGISTRY: &str = include_str!("../assets/country_registry.csv");
const BUNDLED_FIPS: &str = include_str!("../assets/fips10_4.csv");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CountryCodeError {
    #[error("country code is missing")]
    Missing,
    #[error("unknown country `{0}`")]
    Unknown(String),
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("registry csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("registry is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("registry row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("alias `{alias}` maps to both {first} and {second}")]
    AliasCollision {
        alias: String,
        first: CountryCode,
        second: CountryCode,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub code: CountryCode,
    pub name: String,
    pub aliases: Vec<String>,
}

/// Lookup table from codes, names and aliases to alpha-3 codes.
#[derive(Debug, Clone)]
pub struct CountryRegistry {
    entries: Vec<RegistryEntry>,
    by_code: HashMap<CountryCode, usize>,
    by_key: HashMap<String, CountryCode>,
    fips: HashMap<String, CountryCode>,
}

/// Case-folded, whitespace-collapsed lookup key.
fn lookup_key(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl CountryRegistry {
    /// The registry compiled into the binary, parsed once.
    pub fn bundled() -> &'static CountryRegistry {
        static REGISTRY: OnceLock<CountryRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            let mut registry =
                CountryRegistry::from_csv(BUNDLED_REGISTRY.as_bytes()).expect("bundled country registry is valid");
            registry
                .load_fips_csv(BUNDLED_FIPS.as_bytes())
                .expect("bundled FIPS table is valid");
            registry
        })
    }

    /// Reads a registry with columns `alpha3,name,aliases` (aliases
    /// separated by `|`).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, RegistryError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &'static str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or(RegistryError::MissingColumn(name))
        };
        let (code_col, name_col, alias_col) = (col("alpha3")?, col("name")?, col("aliases")?);

        let mut registry = CountryRegistry {
            entries: Vec::new(),
            by_code: HashMap::new(),
            by_key: HashMap::new(),
            fips: HashMap::new(),
        };
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let code = CountryCode::new(row.get(code_col).unwrap_or("").trim()).map_err(|e| RegistryError::BadRow {
                row: line,
                reason: e.to_string(),
            })?;
            let name = row.get(name_col).unwrap_or("").trim().to_string();
            if name.is_empty() {
                return Err(RegistryError::BadRow {
                    row: line,
                    reason: "empty name".into(),
                });
            }
            let aliases: Vec<String> = row
                .get(alias_col)
                .unwrap_or("")
                .split('|')
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(String::from)
                .collect();
            registry.insert(RegistryEntry { code, name, aliases }, line)?;
        }
        Ok(registry)
    }

    fn insert(&mut self, entry: RegistryEntry, row: usize) -> Result<(), RegistryError> {
        if self.by_code.contains_key(&entry.code) {
            return Err(RegistryError::BadRow {
                row,
                reason: format!("duplicate code {}", entry.code),
            });
        }
        let keys = std::iter::once(entry.code.as_str())
            .chain(std::iter::once(entry.name.as_str()))
            .chain(entry.aliases.iter().map(String::as_str));
        for key in keys {
            let key = lookup_key(key);
            if let Some(&existing) = self.by_key.get(&key) {
                if existing != entry.code {
                    return Err(RegistryError::AliasCollision {
                        alias: key,
                        first: existing,
                        second: entry.code,
                    });
                }
            }
            self.by_key.insert(key, entry.code);
        }
        self.by_code.insert(entry.code, self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    /// Adds a FIPS 10-4 to alpha-3 table with columns `fips,alpha3`.
    pub fn load_fips_csv<R: Read>(&mut self, reader: R) -> Result<(), RegistryError> {
        let mut rdr = csv::Reader::from_reader(reader);
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let bad = |reason: String| RegistryError::BadRow { row: i + 2, reason };
            let fips = row.get(0).unwrap_or("").trim().to_ascii_uppercase();
            let code = CountryCode::new(row.get(1).unwrap_or("").trim()).map_err(|e| bad(e.to_string()))?;
            if !self.by_code.contains_key(&code) {
                return Err(bad(format!("{code} is not in the registry")));
            }
            self.fips.insert(fips, code);
        }
        Ok(())
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn get(&self, code: CountryCode) -> Option<&RegistryEntry> {
        self.by_code.get(&code).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, code: CountryCode) -> bool {
        self.by_code.contains_key(&code)
    }

    /// Resolves an alpha-3 code, an alias (including CAMEO codes that differ
    /// from ISO, such as `ROM`) or a country name. Names match
    /// case-insensitively with whitespace collapsed.
    pub fn normalize(&self, raw: &str) -> Result<CountryCode, CountryCodeError> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(CountryCodeError::Missing);
        }
        if let Ok(code) = CountryCode::new(trimmed) {
            if self.by_code.contains_key(&code) {
                return Ok(code);
            }
        }
        self.by_key
            .get(&lookup_key(trimmed))
            .copied()
            .ok_or_else(|| CountryCodeError::Unknown(trimmed.to_string()))
    }

    /// Resolves a FIPS 10-4 code as used by GDELT `ActionGeo_CountryCode`.
    pub fn normalize_fips(&self, raw: &str) -> Result<CountryCode, CountryCodeError> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(CountryCodeError::Missing);
        }
        self.fips
            .get(&trimmed.to_ascii_uppercase())
            .copied()
            .ok_or_else(|| CountryCodeError::Unknown(trimmed.to_string()))
    }
}

/// Free-function form of [`CountryRegistry::normalize`].
pub fn normalize_country_code(raw: &str, registry: &CountryRegistry) -> Result<CountryCode, CountryCodeError> {
    registry.normalize(raw)
}
