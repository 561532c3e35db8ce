//! Direct / Indirect split of the CAMEO root codes and per-country tallies.

use std::collections::BTreeMap;

use crate::filter::FilteredEvent;
use crate::model::{ActionCategory, CountryCode, RootCode};

/// Root codes treated as indirect action: statements, appeals, cooperation,
/// consultation, aid, yielding, disapproval and rejection.
pub const INDIRECT_ROOT_CODES: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 11, 12];
/// Root codes treated as direct action.
pub const DIRECT_ROOT_CODES: [u8; 10] = [9, 10, 13, 14, 15, 16, 17, 18, 19, 20];

/// Total map from root code to action category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionTaxonomy {
    mapping: [ActionCategory; 20],
}

impl ActionTaxonomy {
    pub fn standard() -> Self {
        let mut mapping = [ActionCategory::Indirect; 20];
        for code in DIRECT_ROOT_CODES {
            mapping[usize::from(code - 1)] = ActionCategory::Direct;
        }
        Self { mapping }
    }

    pub fn category(&self, root: RootCode) -> ActionCategory {
        self.mapping[usize::from(root.value() - 1)]
    }

    pub fn codes_in(&self, category: ActionCategory) -> Vec<RootCode> {
        RootCode::all().filter(|&r| self.category(r) == category).collect()
    }
}

impl Default for ActionTaxonomy {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn categorize(root: RootCode) -> ActionCategory {
    ActionTaxonomy::standard().category(root)
}

/// Percentage of `part` in `total`, rounded half up. `total` must be > 0.
pub fn rounded_percent(part: u64, total: u64) -> u64 {
    debug_assert!(total > 0 && part <= total);
    (200 * part + total) / (2 * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountryBreakdown {
    pub country: CountryCode,
    pub direct_count: u64,
    pub indirect_count: u64,
    pub total: u64,
    pub direct_pct: u64,
    /// `100 - direct_pct`, so the pair always sums to 100.
    pub indirect_pct: u64,
}

impl CountryBreakdown {
    pub fn new(country: CountryCode, direct_count: u64, indirect_count: u64) -> Self {
        let total = direct_count + indirect_count;
        let direct_pct = if total > 0 {
            rounded_percent(direct_count, total)
        } else {
            0
        };
        let indirect_pct = if total > 0 { 100 - direct_pct } else { 0 };
        Self {
            country,
            direct_count,
            indirect_count,
            total,
            direct_pct,
            indirect_pct,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GlobalSplit {
    pub direct: u64,
    pub indirect: u64,
    /// Events without a usable root code; excluded from percentages.
    pub unclassified: u64,
}

impl GlobalSplit {
    pub fn classified(&self) -> u64 {
        self.direct + self.indirect
    }

    /// `(direct_pct, indirect_pct)`, or `None` when nothing was classified.
    pub fn percentages(&self) -> Option<(u64, u64)> {
        let total = self.classified();
        (total > 0).then(|| {
            let d = rounded_percent(self.direct, total);
            (d, 100 - d)
        })
    }

    pub fn to_key_value(&self) -> String {
        let (d, i) = self
            .percentages()
            .map(|(d, i)| (d.to_string(), i.to_string()))
            .unwrap_or_default();
        format!(
            "direct={}\nindirect={}\nunclassified={}\ndirect_pct={d}\nindirect_pct={i}\n",
            self.direct, self.indirect, self.unclassified
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Breakdown {
    /// Sorted by country code.
    pub countries: Vec<CountryBreakdown>,
    pub global: GlobalSplit,
}

impl Breakdown {
    pub fn get(&self, country: CountryCode) -> Option<&CountryBreakdown> {
        self.countries
            .binary_search_by(|b| b.country.cmp(&country))
            .ok()
            .map(|i| &self.countries[i])
    }
}

/// Tallies `(country, root code)` pairs.
pub fn breakdown_from_pairs(pairs: impl IntoIterator<Item = (CountryCode, Option<RootCode>)>) -> Breakdown {
    let taxonomy = ActionTaxonomy::standard();
    let mut counts: BTreeMap<CountryCode, (u64, u64)> = BTreeMap::new();
    let mut global = GlobalSplit::default();
    for (country, root) in pairs {
        let Some(root) = root else {
            global.unclassified += 1;
            continue;
        };
        let entry = counts.entry(country).or_default();
        match taxonomy.category(root) {
            ActionCategory::Direct => {
                entry.0 += 1;
                global.direct += 1;
            }
            ActionCategory::Indirect => {
                entry.1 += 1;
                global.indirect += 1;
            }
        }
    }
    Breakdown {
        countries: counts
            .into_iter()
            .map(|(c, (d, i))| CountryBreakdown::new(c, d, i))
            .collect(),
        global,
    }
}

pub fn breakdown_by_country(events: &[FilteredEvent]) -> Breakdown {
    breakdown_from_pairs(events.iter().map(|e| (e.country, e.event.event_root_code)))
}
