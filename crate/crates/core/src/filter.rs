//! The xenophobic-event filter cascade.
//!
//! Stages, in order:
//!
//! 1. keep GKG documents carrying a GKG_REF theme;
//! 2. link those documents to events through the mentions table
//!    (`DocumentIdentifier == MentionIdentifier`);
//! 3. keep events with a `REF` segment in either actor code;
//! 4. assign a country and drop events without one;
//! 5. collapse the surviving (document, event) rows to unique events.
//!
//! The staged types ([`DocumentStage`] → [`LinkStage`] → [`EventStage`])
//! let callers stream files of each table in turn and keep only the rows
//! that can still matter. [`run_filter_pipeline`] drives them over
//! in-memory collections.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::country::CountryRegistry;
use crate::model::{CountryCode, EventRecord, GkgRecord, MentionRecord, PipelineCounters};

/// The eight DISCRIMINATION_IMMIGRATION themes collectively called GKG_REF.
pub const GKG_REF_THEMES: [&str; 8] = [
    "DISCRIMINATION_IMMIGRATION_XENOPHOBIA",
    "DISCRIMINATION_IMMIGRATION_ANTIIMMIGRANTS",
    "DISCRIMINATION_IMMIGRATION_OPPOSED_TO_IMMIGRANTS",
    "DISCRIMINATION_IMMIGRATION_AGAINST_IMMIGRANTS",
    "DISCRIMINATION_IMMIGRATION_ATTACKS_ON_IMMIGRANTS",
    "DISCRIMINATION_IMMIGRATION_ATTACKS_AGAINST_IMMIGRANTS",
    "DISCRIMINATION_IMMIGRATION_XENOPHOBE",
    "DISCRIMINATION_IMMIGRATION_XENOPHOBES",
];

/// Prefix used by the `V2Themes like DISCRIMINATION_IMMIGRATION` query.
pub const GKG_REF_PREFIX: &str = "DISCRIMINATION_IMMIGRATION";

/// CAMEO actor-code segment for refugees.
pub const REF_SEGMENT: &[u8; 3] = b"REF";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// Any theme starting with the configured prefix.
    #[default]
    Prefix,
    /// Only the listed theme names.
    ExactSet,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "prefix" => Ok(MatchMode::Prefix),
            "exact" | "exactset" => Ok(MatchMode::ExactSet),
            other => Err(format!("unknown theme match mode `{other}`")),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Prefix => "prefix",
            MatchMode::ExactSet => "exact-set",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThemeSetError {
    #[error("theme set is empty")]
    Empty,
    #[error("theme `{0}` must be uppercase letters, digits and underscores")]
    BadName(String),
}

fn valid_theme_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThemeSet {
    themes: BTreeSet<String>,
    prefix: String,
    match_mode: MatchMode,
}

impl ThemeSet {
    pub fn new(
        themes: impl IntoIterator<Item = impl Into<String>>,
        prefix: impl Into<String>,
        match_mode: MatchMode,
    ) -> Result<Self, ThemeSetError> {
        let themes: BTreeSet<String> = themes.into_iter().map(Into::into).collect();
        if themes.is_empty() {
            return Err(ThemeSetError::Empty);
        }
        let prefix = prefix.into();
        for name in themes.iter().chain(std::iter::once(&prefix)) {
            if !valid_theme_name(name) {
                return Err(ThemeSetError::BadName(name.clone()));
            }
        }
        Ok(Self {
            themes,
            prefix,
            match_mode,
        })
    }

    /// The GKG_REF themes with the DISCRIMINATION_IMMIGRATION prefix.
    pub fn gkg_ref(match_mode: MatchMode) -> Self {
        Self::new(GKG_REF_THEMES, GKG_REF_PREFIX, match_mode).expect("GKG_REF names are valid")
    }

    pub fn match_mode(&self) -> MatchMode {
        self.match_mode
    }

    pub fn themes(&self) -> &BTreeSet<String> {
        &self.themes
    }

    pub fn matches(&self, theme: &str) -> bool {
        match self.match_mode {
            MatchMode::Prefix => theme.starts_with(&self.prefix),
            MatchMode::ExactSet => self.themes.contains(theme),
        }
    }

    /// Distinct theme names of `record` that match.
    pub fn matched_themes(&self, record: &GkgRecord) -> BTreeSet<String> {
        record
            .themes
            .iter()
            .filter(|t| self.matches(&t.name))
            .map(|t| t.name.clone())
            .collect()
    }
}

pub fn match_gkg_ref(record: &GkgRecord, theme_set: &ThemeSet) -> bool {
    record.themes.iter().any(|t| theme_set.matches(&t.name))
}

/// True if `code`, read as consecutive 3-character segments from position
/// 0, contains `REF`. A trailing partial segment is ignored.
pub fn code_has_ref_segment(code: &str) -> bool {
    code.trim().as_bytes().chunks_exact(3).any(|seg| seg == REF_SEGMENT)
}

pub fn has_ref_actor(event: &EventRecord) -> bool {
    [&event.actor1_code, &event.actor2_code]
        .into_iter()
        .flatten()
        .any(|code| code_has_ref_segment(code))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountryStrategy {
    /// Actor 1 country, else actor 2 country.
    #[default]
    Actor1First,
    /// Country of an actor without a REF segment, else any actor country.
    NonRefActor,
    /// `ActionGeo_CountryCode` (FIPS 10-4) mapped to alpha-3.
    ActionGeo,
}

impl FromStr for CountryStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "actor1first" | "actor1" => Ok(CountryStrategy::Actor1First),
            "nonrefactor" | "nonref" => Ok(CountryStrategy::NonRefActor),
            "actiongeo" | "geo" => Ok(CountryStrategy::ActionGeo),
            other => Err(format!("unknown country strategy `{other}`")),
        }
    }
}

impl fmt::Display for CountryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountryStrategy::Actor1First => "actor1-first",
            CountryStrategy::NonRefActor => "non-ref-actor",
            CountryStrategy::ActionGeo => "action-geo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountryAssignment {
    pub country: Option<CountryCode>,
    /// Raw codes that were consulted but failed normalization.
    pub unmappable: u32,
}

/// Picks the country an event is attributed to. Codes that fail
/// normalization count as absent.
pub fn assign_event_country(
    event: &EventRecord,
    strategy: CountryStrategy,
    registry: &CountryRegistry,
) -> CountryAssignment {
    let mut unmappable = 0;
    let mut actor = |raw: &Option<String>| {
        let raw = raw.as_deref()?;
        match registry.normalize(raw) {
            Ok(code) => Some(code),
            Err(_) => {
                unmappable += 1;
                None
            }
        }
    };
    let country = match strategy {
        CountryStrategy::Actor1First => actor(&event.actor1_country).or_else(|| actor(&event.actor2_country)),
        CountryStrategy::NonRefActor => {
            let first = actor(&event.actor1_country);
            let second = actor(&event.actor2_country);
            let is_ref = |code: &Option<String>| code.as_deref().is_some_and(code_has_ref_segment);
            let non_ref = [
                (!is_ref(&event.actor1_code)).then_some(first).flatten(),
                (!is_ref(&event.actor2_code)).then_some(second).flatten(),
            ];
            non_ref.into_iter().flatten().next().or(first).or(second)
        }
        CountryStrategy::ActionGeo => event.action_geo_country.as_deref().and_then(|raw| {
            match registry.normalize_fips(raw).or_else(|_| registry.normalize(raw)) {
                Ok(code) => Some(code),
                Err(_) => {
                    unmappable += 1;
                    None
                }
            }
        }),
    };
    CountryAssignment { country, unmappable }
}

/// An event that passed the whole cascade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredEvent {
    pub event: EventRecord,
    pub country: CountryCode,
    pub matched_themes: BTreeSet<String>,
    pub source_documents: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupeOutcome {
    /// One event per GLOBALEVENTID, ascending.
    pub events: Vec<FilteredEvent>,
    /// Ids whose candidates disagreed on the assigned country.
    pub conflicts: u64,
}

fn retention_order(a: &FilteredEvent, b: &FilteredEvent) -> std::cmp::Ordering {
    a.event
        .date_added
        .cmp(&b.event.date_added)
        .then_with(|| a.event.source_url.cmp(&b.event.source_url))
        .then_with(|| a.event.cmp(&b.event))
        .then_with(|| a.country.cmp(&b.country))
}

/// Collapses candidates sharing a GLOBALEVENTID.
///
/// The earliest-added record is retained (ties: lowest source URL). Themes
/// and documents are unioned. When candidates disagree on the country the
/// majority wins; a tied vote goes to the retained record's country, or the
/// lowest tied code if the retained country is not among them.
pub fn dedupe_events(candidates: Vec<FilteredEvent>) -> DedupeOutcome {
    let mut groups: BTreeMap<u64, Vec<FilteredEvent>> = BTreeMap::new();
    for c in candidates {
        groups.entry(c.event.global_event_id).or_default().push(c);
    }
    let mut outcome = DedupeOutcome::default();
    for (_, mut group) in groups {
        group.sort_by(retention_order);
        let mut votes: BTreeMap<CountryCode, usize> = BTreeMap::new();
        for c in &group {
            *votes.entry(c.country).or_default() += 1;
        }
        let mut group = group.into_iter();
        let mut kept = group.next().expect("groups are non-empty");
        if votes.len() > 1 {
            outcome.conflicts += 1;
            let best = votes.values().copied().max().unwrap_or(0);
            let tied: Vec<CountryCode> = votes.iter().filter(|(_, &n)| n == best).map(|(&c, _)| c).collect();
            if !tied.contains(&kept.country) {
                kept.country = tied[0];
            }
        }
        for other in group {
            kept.matched_themes.extend(other.matched_themes);
            kept.source_documents.extend(other.source_documents);
        }
        outcome.events.push(kept);
    }
    outcome
}

/// document identifier → GLOBALEVENTIDs mentioned by it. Every supplied
/// document appears, with an empty set when nothing mentions it.
pub fn link_documents_to_events<'a>(
    gkgs: impl IntoIterator<Item = &'a GkgRecord>,
    mentions: impl IntoIterator<Item = &'a MentionRecord>,
) -> BTreeMap<String, BTreeSet<u64>> {
    let mut links: BTreeMap<String, BTreeSet<u64>> = gkgs
        .into_iter()
        .map(|g| (g.document_identifier.clone(), BTreeSet::new()))
        .collect();
    for m in mentions {
        if let Some(ids) = links.get_mut(&m.mention_identifier) {
            ids.insert(m.global_event_id);
        }
    }
    links
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    pub theme_set: ThemeSet,
    pub country_strategy: CountryStrategy,
}

impl FilterConfig {
    pub fn new(match_mode: MatchMode, country_strategy: CountryStrategy) -> Self {
        Self {
            theme_set: ThemeSet::gkg_ref(match_mode),
            country_strategy,
        }
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self::new(MatchMode::Prefix, CountryStrategy::Actor1First)
    }
}

/// Record-level counts that are not part of [`PipelineCounters`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterDiagnostics {
    pub gkg_records: u64,
    pub theme_matched_gkg_records: u64,
    pub theme_matched_documents: u64,
    pub linked_mentions: u64,
    pub unmatched_documents: u64,
    pub linked_event_rows: u64,
    pub flagged_actor_codes: u64,
    pub unmappable_country_codes: u64,
    pub country_conflicts: u64,
    /// Matched theme name → number of matched GKG rows carrying it.
    pub theme_audit: BTreeMap<String, u64>,
}

impl FilterDiagnostics {
    pub fn to_key_value(&self) -> String {
        format!(
            "gkg_records={}\ntheme_matched_gkg_records={}\ntheme_matched_documents={}\nlinked_mentions={}\n\
             unmatched_documents={}\nlinked_event_rows={}\nflagged_actor_codes={}\nunmappable_country_codes={}\n\
             country_conflicts={}\n",
            self.gkg_records,
            self.theme_matched_gkg_records,
            self.theme_matched_documents,
            self.linked_mentions,
            self.unmatched_documents,
            self.linked_event_rows,
            self.flagged_actor_codes,
            self.unmappable_country_codes,
            self.country_conflicts,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    pub events: Vec<FilteredEvent>,
    pub counters: PipelineCounters,
    pub diagnostics: FilterDiagnostics,
}

#[derive(Debug, Default, Clone)]
struct DocumentEntry {
    themes: BTreeSet<String>,
    events: BTreeSet<u64>,
}

/// Stage 1: theme matching over GKG rows.
#[derive(Debug, Clone)]
pub struct DocumentStage {
    theme_set: ThemeSet,
    documents: HashMap<String, DocumentEntry>,
    diagnostics: FilterDiagnostics,
}

impl DocumentStage {
    pub fn new(theme_set: ThemeSet) -> Self {
        Self {
            theme_set,
            documents: HashMap::new(),
            diagnostics: FilterDiagnostics::default(),
        }
    }

    /// Returns whether the row matched the theme set.
    pub fn add_gkg(&mut self, record: &GkgRecord) -> bool {
        self.diagnostics.gkg_records += 1;
        let matched = self.theme_set.matched_themes(record);
        if matched.is_empty() {
            return false;
        }
        self.diagnostics.theme_matched_gkg_records += 1;
        for name in &matched {
            *self.diagnostics.theme_audit.entry(name.clone()).or_default() += 1;
        }
        self.documents
            .entry(record.document_identifier.clone())
            .or_default()
            .themes
            .extend(matched);
        true
    }

    /// Folds in a stage that processed a disjoint set of rows.
    pub fn merge(&mut self, other: DocumentStage) {
        let d = &mut self.diagnostics;
        d.gkg_records += other.diagnostics.gkg_records;
        d.theme_matched_gkg_records += other.diagnostics.theme_matched_gkg_records;
        for (name, n) in other.diagnostics.theme_audit {
            *d.theme_audit.entry(name).or_default() += n;
        }
        for (doc, entry) in other.documents {
            self.documents.entry(doc).or_default().themes.extend(entry.themes);
        }
    }

    pub fn matched_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn into_link_stage(mut self) -> LinkStage {
        self.diagnostics.theme_matched_documents = self.documents.len() as u64;
        LinkStage {
            documents: self.documents,
            diagnostics: self.diagnostics,
        }
    }
}

/// Stage 2: document → event linkage through mentions.
#[derive(Debug, Clone)]
pub struct LinkStage {
    documents: HashMap<String, DocumentEntry>,
    diagnostics: FilterDiagnostics,
}

impl LinkStage {
    pub fn tracks(&self, document: &str) -> bool {
        self.documents.contains_key(document)
    }

    /// Links the mention if its identifier is a theme-matched document.
    pub fn add_mention(&mut self, mention: &MentionRecord) -> bool {
        self.link(&mention.mention_identifier, mention.global_event_id)
    }

    pub fn link(&mut self, document: &str, global_event_id: u64) -> bool {
        match self.documents.get_mut(document) {
            Some(entry) => {
                self.diagnostics.linked_mentions += 1;
                entry.events.insert(global_event_id);
                true
            }
            None => false,
        }
    }

    pub fn links(&self) -> BTreeMap<String, BTreeSet<u64>> {
        self.documents
            .iter()
            .map(|(doc, e)| (doc.clone(), e.events.clone()))
            .collect()
    }

    pub fn into_event_stage(mut self) -> EventStage {
        self.diagnostics.unmatched_documents = self.documents.values().filter(|e| e.events.is_empty()).count() as u64;
        let wanted = self.documents.values().flat_map(|e| e.events.iter().copied()).collect();
        EventStage {
            documents: self.documents,
            diagnostics: self.diagnostics,
            wanted,
            events: HashMap::new(),
        }
    }
}

/// Stage 3 onwards: collects linked event rows, then applies the actor,
/// country and dedupe stages in [`EventStage::finish`].
#[derive(Debug, Clone)]
pub struct EventStage {
    documents: HashMap<String, DocumentEntry>,
    diagnostics: FilterDiagnostics,
    wanted: HashSet<u64>,
    events: HashMap<u64, Vec<EventRecord>>,
}

impl EventStage {
    pub fn wants(&self, global_event_id: u64) -> bool {
        self.wanted.contains(&global_event_id)
    }

    /// Keeps the row if some theme-matched document mentions its event.
    pub fn add_event(&mut self, event: EventRecord) -> bool {
        if !self.wants(event.global_event_id) {
            return false;
        }
        self.events.entry(event.global_event_id).or_default().push(event);
        true
    }

    pub fn finish(mut self, strategy: CountryStrategy, registry: &CountryRegistry) -> FilterOutcome {
        let mut counters = PipelineCounters::default();
        let diagnostics = &mut self.diagnostics;

        // Per-row verdicts do not depend on the document, compute them once.
        let mut verdicts: HashMap<u64, Vec<(bool, Option<CountryCode>)>> = HashMap::new();
        for (&id, rows) in &mut self.events {
            rows.sort();
            let v = rows
                .iter()
                .map(|row| {
                    diagnostics.linked_event_rows += 1;
                    diagnostics.flagged_actor_codes += u64::from(row.has_malformed_actor_code());
                    if !has_ref_actor(row) {
                        return (false, None);
                    }
                    let assignment = assign_event_country(row, strategy, registry);
                    diagnostics.unmappable_country_codes += u64::from(assignment.unmappable);
                    (true, assignment.country)
                })
                .collect();
            verdicts.insert(id, v);
        }

        let mut documents: Vec<(&String, &DocumentEntry)> = self.documents.iter().collect();
        documents.sort_by(|a, b| a.0.cmp(b.0));
        let mut candidates = Vec::new();
        for (doc, entry) in documents {
            for id in &entry.events {
                let (Some(rows), Some(verdict)) = (self.events.get(id), verdicts.get(id)) else {
                    continue;
                };
                for (row, &(has_ref, country)) in rows.iter().zip(verdict) {
                    counters.initial_records += 1;
                    if !has_ref {
                        continue;
                    }
                    counters.after_ref_actor += 1;
                    let Some(country) = country else { continue };
                    counters.after_country_code += 1;
                    candidates.push(FilteredEvent {
                        event: row.clone(),
                        country,
                        matched_themes: entry.themes.clone(),
                        source_documents: BTreeSet::from([doc.clone()]),
                    });
                }
            }
        }

        let deduped = dedupe_events(candidates);
        counters.unique_events = deduped.events.len() as u64;
        self.diagnostics.country_conflicts = deduped.conflicts;
        FilterOutcome {
            events: deduped.events,
            counters,
            diagnostics: self.diagnostics,
        }
    }
}

/// Runs the full cascade over in-memory tables.
pub fn run_filter_pipeline(
    gkgs: &[GkgRecord],
    mentions: &[MentionRecord],
    events: &[EventRecord],
    config: &FilterConfig,
    registry: &CountryRegistry,
) -> FilterOutcome {
    let mut documents = DocumentStage::new(config.theme_set.clone());
    for g in gkgs {
        documents.add_gkg(g);
    }
    let mut links = documents.into_link_stage();
    for m in mentions {
        links.add_mention(m);
    }
    let mut stage = links.into_event_stage();
    for e in events {
        if stage.wants(e.global_event_id) {
            stage.add_event(e.clone());
        }
    }
    stage.finish(config.country_strategy, registry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ThemeMention;
    use chrono::NaiveDate;

    fn gkg(doc: &str, themes: &[&str]) -> GkgRecord {
        GkgRecord {
            gkg_record_id: format!("id-{doc}"),
            document_identifier: doc.to_string(),
            themes: themes
                .iter()
                .enumerate()
                .map(|(i, t)| ThemeMention {
                    name: t.to_string(),
                    char_offset: i as u64 * 10,
                    offset_missing: false,
                })
                .collect(),
        }
    }

    fn mention(id: u64, doc: &str) -> MentionRecord {
        MentionRecord {
            global_event_id: id,
            mention_identifier: doc.to_string(),
            mention_tone: 0.0,
        }
    }

    fn event(id: u64, a1: Option<&str>, c1: Option<&str>, a2: Option<&str>, c2: Option<&str>) -> EventRecord {
        let date = NaiveDate::from_ymd_opt(2022, 5, 1).unwrap();
        let mut e = EventRecord::new(id, date, date.and_hms_opt(0, 15, 0).unwrap(), format!("https://n/{id}"));
        e.actor1_code = a1.map(String::from);
        e.actor1_country = c1.map(String::from);
        e.actor2_code = a2.map(String::from);
        e.actor2_country = c2.map(String::from);
        e
    }

    fn cc(s: &str) -> CountryCode {
        CountryCode::new(s).unwrap()
    }

    #[test]
    fn theme_matching_examples() {
        let set = ThemeSet::gkg_ref(MatchMode::Prefix);
        assert!(match_gkg_ref(
            &gkg("d", &["DISCRIMINATION_IMMIGRATION_XENOPHOBIA"]),
            &set
        ));
        assert!(!match_gkg_ref(&gkg("d", &["DISCRIMINATION_RELIGION"]), &set));
        assert!(!match_gkg_ref(&gkg("d", &[]), &set));

        let exact = ThemeSet::gkg_ref(MatchMode::ExactSet);
        let extra = gkg("d", &["DISCRIMINATION_IMMIGRATION_OTHER"]);
        assert!(match_gkg_ref(&extra, &set));
        assert!(!match_gkg_ref(&extra, &exact));
        for name in GKG_REF_THEMES {
            assert!(match_gkg_ref(&gkg("d", &[name]), &exact));
        }
    }

    #[test]
    fn theme_set_validation() {
        assert_eq!(
            ThemeSet::new(Vec::<String>::new(), "P", MatchMode::Prefix),
            Err(ThemeSetError::Empty)
        );
        assert!(matches!(
            ThemeSet::new(["lower"], "P", MatchMode::Prefix),
            Err(ThemeSetError::BadName(_))
        ));
    }

    #[test]
    fn ref_actor_examples() {
        assert!(has_ref_actor(&event(1, Some("REF"), None, None, None)));
        assert!(!has_ref_actor(&event(1, Some("USAGOV"), None, None, None)));
        assert!(has_ref_actor(&event(1, None, None, Some("USAREF"), None)));
        // Misaligned occurrences do not count.
        assert!(!has_ref_actor(&event(1, Some("UREFSA"), None, None, None)));
        // Trailing partial segment is ignored, aligned REF still found.
        assert!(has_ref_actor(&event(1, Some("SYRREFX"), None, None, None)));
    }

    /// Every code over a small alphabet, decomposed by hand into aligned
    /// segments, agrees with the scanner.
    #[test]
    fn ref_segment_exhaustive_small_alphabet() {
        let alphabet = *b"REFX";
        for len in 0..=7usize {
            let total = alphabet.len().pow(len as u32);
            for n in 0..total {
                let mut k = n;
                let code: Vec<u8> = (0..len)
                    .map(|_| {
                        let c = alphabet[k % alphabet.len()];
                        k /= alphabet.len();
                        c
                    })
                    .collect();
                let text = String::from_utf8(code.clone()).unwrap();
                let mut expected = false;
                let mut i = 0;
                while i + 3 <= code.len() {
                    if &code[i..i + 3] == b"REF" {
                        expected = true;
                    }
                    i += 3;
                }
                assert_eq!(code_has_ref_segment(&text), expected, "{text}");
            }
        }
    }

    #[test]
    fn country_assignment_examples() {
        let reg = CountryRegistry::bundled();
        let e = event(1, None, Some("USA"), None, Some("MEX"));
        assert_eq!(
            assign_event_country(&e, CountryStrategy::Actor1First, reg).country,
            Some(cc("USA"))
        );
        let none = event(1, Some("REF"), None, None, None);
        assert_eq!(
            assign_event_country(&none, CountryStrategy::Actor1First, reg).country,
            None
        );
        let refugee = event(1, Some("REF"), Some("SYR"), None, Some("DEU"));
        assert_eq!(
            assign_event_country(&refugee, CountryStrategy::NonRefActor, reg).country,
            Some(cc("DEU"))
        );
        let mut geo = event(1, Some("REF"), None, None, None);
        geo.action_geo_country = Some("GM".into());
        assert_eq!(
            assign_event_country(&geo, CountryStrategy::ActionGeo, reg).country,
            Some(cc("DEU"))
        );
    }

    #[test]
    fn unmappable_codes_fall_through_and_are_counted() {
        let reg = CountryRegistry::bundled();
        let e = event(1, Some("REF"), Some("AFR"), None, Some("KEN"));
        let a = assign_event_country(&e, CountryStrategy::Actor1First, reg);
        assert_eq!(a.country, Some(cc("KEN")));
        assert_eq!(a.unmappable, 1);
        let cameo = event(1, Some("ROMREF"), Some("ROM"), None, None);
        assert_eq!(
            assign_event_country(&cameo, CountryStrategy::Actor1First, reg).country,
            Some(cc("ROU"))
        );
    }

    /// All eight (actor-1 country present, actor-2 country present, actor 1
    /// is REF) combinations against a hand-written rule table.
    #[test]
    fn non_ref_actor_rule_table() {
        let reg = CountryRegistry::bundled();
        type Rule = ((bool, bool, bool), Option<&'static str>);
        let rules: [Rule; 8] = [
            ((false, false, false), None),
            ((false, false, true), None),
            ((false, true, false), Some("DEU")),
            ((false, true, true), Some("DEU")),
            ((true, false, false), Some("SYR")),
            ((true, false, true), Some("SYR")),
            ((true, true, false), Some("SYR")),
            ((true, true, true), Some("DEU")),
        ];
        for ((c1, c2, a1_ref), expected) in rules {
            let e = event(
                1,
                Some(if a1_ref { "SYRREF" } else { "SYRGOV" }),
                c1.then_some("SYR"),
                Some("DEUGOV"),
                c2.then_some("DEU"),
            );
            assert_eq!(
                assign_event_country(&e, CountryStrategy::NonRefActor, reg).country,
                expected.map(cc),
                "{c1} {c2} {a1_ref}"
            );
        }
        // Both actors REF: any present country, actor 1 first.
        let both = event(1, Some("REF"), None, Some("SYRREF"), Some("SYR"));
        assert_eq!(
            assign_event_country(&both, CountryStrategy::NonRefActor, reg).country,
            Some(cc("SYR"))
        );
    }

    fn candidate(id: u64, added_min: u32, url: &str, country: &str, doc: &str) -> FilteredEvent {
        let mut e = event(id, Some("REF"), Some(country), None, None);
        e.date_added = e.event_date.and_hms_opt(0, added_min, 0).unwrap();
        e.source_url = url.to_string();
        FilteredEvent {
            event: e,
            country: cc(country),
            matched_themes: BTreeSet::from([format!("T_{doc}").to_uppercase()]),
            source_documents: BTreeSet::from([doc.to_string()]),
        }
    }

    #[test]
    fn dedupe_unions_and_keeps_earliest() {
        let out = dedupe_events(vec![
            candidate(42, 30, "b", "USA", "d1"),
            candidate(42, 15, "z", "USA", "d2"),
            candidate(42, 15, "a", "USA", "d3"),
        ]);
        assert_eq!(out.events.len(), 1);
        let e = &out.events[0];
        assert_eq!(e.event.source_url, "a");
        assert_eq!(e.source_documents.len(), 3);
        assert_eq!(e.matched_themes.len(), 3);
        assert_eq!(out.conflicts, 0);
        assert!(dedupe_events(Vec::new()).events.is_empty());
    }

    #[test]
    fn dedupe_country_majority_and_ties() {
        let majority = dedupe_events(vec![
            candidate(1, 0, "a", "USA", "d1"),
            candidate(1, 5, "b", "MEX", "d2"),
            candidate(1, 6, "c", "MEX", "d3"),
        ]);
        assert_eq!(majority.events[0].country, cc("MEX"));
        assert_eq!(majority.events[0].event.source_url, "a");
        assert_eq!(majority.conflicts, 1);

        let tie = dedupe_events(vec![
            candidate(1, 9, "b", "MEX", "d2"),
            candidate(1, 0, "a", "USA", "d1"),
        ]);
        assert_eq!(tie.events[0].country, cc("USA"));

        let outside = dedupe_events(vec![
            candidate(1, 0, "a", "USA", "d1"),
            candidate(1, 1, "b", "MEX", "d2"),
            candidate(1, 2, "c", "MEX", "d3"),
            candidate(1, 3, "d", "CAN", "d4"),
            candidate(1, 4, "e", "CAN", "d5"),
        ]);
        assert_eq!(outside.events[0].country, cc("CAN"));
    }

    #[test]
    fn dedupe_is_idempotent() {
        let once = dedupe_events(vec![
            candidate(2, 1, "x", "ITA", "a"),
            candidate(1, 0, "a", "USA", "d1"),
            candidate(2, 0, "y", "ITA", "b"),
        ]);
        let twice = dedupe_events(once.events.clone());
        assert_eq!(once.events, twice.events);
        assert_eq!(twice.conflicts, 0);
    }

    #[test]
    fn linkage_examples() {
        let g = vec![gkg("doc", &["X"])];
        let links = link_documents_to_events(&g, &[mention(7, "doc"), mention(9, "doc"), mention(3, "other")]);
        assert_eq!(links, BTreeMap::from([("doc".to_string(), BTreeSet::from([7, 9]))]));

        let lonely = link_documents_to_events(&g, &[]);
        assert_eq!(lonely["doc"], BTreeSet::new());

        let twice = vec![gkg("doc", &["X"]), gkg("doc", &["Y"])];
        assert_eq!(link_documents_to_events(&twice, &[mention(1, "doc")]).len(), 1);
    }

    #[test]
    fn pipeline_examples() {
        let reg = CountryRegistry::bundled();
        let config = FilterConfig::default();
        let theme = "DISCRIMINATION_IMMIGRATION_XENOPHOBIA";

        let out = run_filter_pipeline(
            &[gkg("d1", &["ECON"]), gkg("d2", &["DISCRIMINATION_RELIGION"])],
            &[mention(1, "d1")],
            &[event(1, Some("REF"), Some("USA"), None, None)],
            &config,
            reg,
        );
        assert!(out.events.is_empty());
        assert_eq!(out.counters, PipelineCounters::default());

        let out = run_filter_pipeline(
            &[gkg("d1", &[theme]), gkg("d2", &[theme])],
            &[mention(5, "d1"), mention(5, "d2"), mention(5, "d2")],
            &[event(5, Some("REF"), Some("USA"), None, None)],
            &config,
            reg,
        );
        assert_eq!(out.events.len(), 1);
        assert_eq!(out.events[0].source_documents.len(), 2);
        assert_eq!(
            out.counters,
            PipelineCounters {
                initial_records: 2,
                after_ref_actor: 2,
                after_country_code: 2,
                unique_events: 1
            }
        );
        assert_eq!(out.diagnostics.theme_audit[theme], 2);
    }
}
