//! Shared pieces for the integration tests: a seeded random corpus generator
//! and a brute-force reference implementation of the filter cascade.
#![allow(dead_code)]

pub mod golden;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::{NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use xenoscope::country::CountryRegistry;
use xenoscope::filter::{CountryStrategy, FilteredEvent};
use xenoscope::model::{EventRecord, GkgRecord, MentionRecord, PipelineCounters, RootCode, ThemeMention};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub gkgs: Vec<GkgRecord>,
    pub mentions: Vec<MentionRecord>,
    pub events: Vec<EventRecord>,
}

impl Corpus {
    pub fn rows(&self) -> usize {
        self.gkgs.len() + self.mentions.len() + self.events.len()
    }
}

const THEMES: &[&str] = &[
    "DISCRIMINATION_IMMIGRATION_XENOPHOBIA",
    "DISCRIMINATION_IMMIGRATION_ATTACKS_ON_IMMIGRANTS",
    "DISCRIMINATION_IMMIGRATION_SMUGGLING",
    "DISCRIMINATION_IMMIGRATION",
    "DISCRIMINATION_RACE",
    "REFUGEES",
    "TAX_FNCACT_REFUGEES",
    "IMMIGRATION",
];

const ACTOR_CODES: &[&str] = &[
    "REF",
    "USAREF",
    "REFUSA",
    "NGAREFMIL",
    "GOV",
    "USA",
    "CVL",
    "UREFS",
    "REFX",
    "XREF",
    "REFREF",
    "",
];

const COUNTRIES: &[&str] = &[
    "USA", "GBR", "NGA", "MEX", "ITA", "ROM", "Nigeria", "usa", "XYZ", "ZZZ", "", "",
];

const FIPS: &[&str] = &["US", "UK", "NI", "MX", "IT", "RO", "GM", "QQ", ""];

fn pick(rng: &mut ChaCha8Rng, from: &[&str]) -> Option<String> {
    let s = *from.choose(rng).unwrap();
    (!s.is_empty()).then(|| s.to_string())
}

/// A corpus of at most `max_rows` rows spread over the three record kinds,
/// with small id and document pools so that joins actually happen.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_rows: usize) -> Corpus {
    let budget = rng.gen_range(3..=max_rows);
    let n_gkg = rng.gen_range(1..=budget / 3).max(1);
    let n_mentions = rng.gen_range(1..=budget / 3).max(1);
    let n_events = budget.saturating_sub(n_gkg + n_mentions).max(1);
    let n_docs = rng.gen_range(1..=n_gkg.max(2));
    let n_ids = rng.gen_range(1..=(n_events / 2).max(2)) as u64;
    let doc = |rng: &mut ChaCha8Rng| format!("https://news.test/{}", rng.gen_range(0..n_docs));
    let base = NaiveDate::from_ymd_opt(2022, 3, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();

    let mut corpus = Corpus::default();
    for i in 0..n_gkg {
        let mut themes = Vec::new();
        for _ in 0..rng.gen_range(0..4) {
            themes.push(ThemeMention {
                name: THEMES.choose(rng).unwrap().to_string(),
                char_offset: rng.gen_range(0..5000),
                offset_missing: false,
            });
        }
        corpus.gkgs.push(GkgRecord {
            gkg_record_id: format!("g{i}"),
            document_identifier: doc(rng),
            themes,
        });
    }
    for _ in 0..n_mentions {
        corpus.mentions.push(MentionRecord {
            global_event_id: rng.gen_range(0..n_ids),
            mention_identifier: doc(rng),
            mention_tone: rng.gen_range(-10.0..10.0),
        });
    }
    for _ in 0..n_events {
        let id = rng.gen_range(0..n_ids);
        let added: NaiveDateTime = base + chrono::Duration::minutes(15 * rng.gen_range(0..4));
        let url = format!("https://src.test/{}", rng.gen_range(0..3));
        let mut e = EventRecord::new(id, added.date(), added, url);
        e.actor1_code = pick(rng, ACTOR_CODES);
        e.actor2_code = pick(rng, ACTOR_CODES);
        e.actor1_country = pick(rng, COUNTRIES);
        e.actor2_country = pick(rng, COUNTRIES);
        e.action_geo_country = pick(rng, FIPS);
        e.event_root_code = rng.gen_bool(0.9).then(|| RootCode::new(rng.gen_range(1..=20)).unwrap());
        corpus.events.push(e);
    }
    corpus
}

fn ref_segment(code: &Option<String>) -> bool {
    let Some(code) = code else { return false };
    let b = code.trim().as_bytes();
    let mut i = 0;
    while i + 3 <= b.len() {
        if &b[i..i + 3] == b"REF" {
            return true;
        }
        i += 3;
    }
    false
}

fn country_of(
    e: &EventRecord,
    strategy: CountryStrategy,
    registry: &CountryRegistry,
) -> Option<xenoscope::CountryCode> {
    let norm = |raw: &Option<String>| raw.as_deref().and_then(|r| registry.normalize(r).ok());
    let (c1, c2) = (norm(&e.actor1_country), norm(&e.actor2_country));
    match strategy {
        CountryStrategy::Actor1First => c1.or(c2),
        CountryStrategy::NonRefActor => {
            if c1.is_some() && !ref_segment(&e.actor1_code) {
                c1
            } else if c2.is_some() && !ref_segment(&e.actor2_code) {
                c2
            } else {
                c1.or(c2)
            }
        }
        CountryStrategy::ActionGeo => e
            .action_geo_country
            .as_deref()
            .and_then(|r| registry.normalize_fips(r).or_else(|_| registry.normalize(r)).ok()),
    }
}

/// Nested loops over every (document, event row) pair, no indexes.
pub fn oracle(
    corpus: &Corpus,
    theme_matches: &dyn Fn(&str) -> bool,
    strategy: CountryStrategy,
    registry: &CountryRegistry,
) -> (Vec<FilteredEvent>, PipelineCounters) {
    let mut doc_themes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for g in &corpus.gkgs {
        for t in &g.themes {
            if theme_matches(&t.name) {
                doc_themes
                    .entry(g.document_identifier.clone())
                    .or_default()
                    .insert(t.name.clone());
            }
        }
    }

    let mut counters = PipelineCounters::default();
    let mut candidates: Vec<FilteredEvent> = Vec::new();
    for (doc, themes) in &doc_themes {
        for e in &corpus.events {
            let linked = corpus
                .mentions
                .iter()
                .any(|m| &m.mention_identifier == doc && m.global_event_id == e.global_event_id);
            if !linked {
                continue;
            }
            counters.initial_records += 1;
            if !(ref_segment(&e.actor1_code) || ref_segment(&e.actor2_code)) {
                continue;
            }
            counters.after_ref_actor += 1;
            let Some(country) = country_of(e, strategy, registry) else {
                continue;
            };
            counters.after_country_code += 1;
            candidates.push(FilteredEvent {
                event: e.clone(),
                country,
                matched_themes: themes.clone(),
                source_documents: BTreeSet::from([doc.clone()]),
            });
        }
    }

    let ids: BTreeSet<u64> = candidates.iter().map(|c| c.event.global_event_id).collect();
    let mut out = Vec::new();
    for id in ids {
        let group: Vec<&FilteredEvent> = candidates.iter().filter(|c| c.event.global_event_id == id).collect();
        let retained = group
            .iter()
            .min_by(|a, b| {
                (a.event.date_added, &a.event.source_url, &a.event, a.country).cmp(&(
                    b.event.date_added,
                    &b.event.source_url,
                    &b.event,
                    b.country,
                ))
            })
            .unwrap();
        let mut votes: BTreeMap<xenoscope::CountryCode, usize> = BTreeMap::new();
        for c in &group {
            *votes.entry(c.country).or_default() += 1;
        }
        let top = *votes.values().max().unwrap();
        let country = if votes[&retained.country] == top {
            retained.country
        } else {
            *votes.iter().find(|(_, &n)| n == top).unwrap().0
        };
        out.push(FilteredEvent {
            event: retained.event.clone(),
            country,
            matched_themes: group.iter().flat_map(|c| c.matched_themes.iter().cloned()).collect(),
            source_documents: group.iter().flat_map(|c| c.source_documents.iter().cloned()).collect(),
        });
    }
    counters.unique_events = out.len() as u64;
    (out, counters)
}
