//! Media-reported xenophobic events against refugees, from GDELT 2.0.
//!
//! The pipeline reads the Event, Mentions and GKG tables, keeps events
//! linked to refugee-themed documents that involve a refugee actor,
//! assigns each to a host country, and reports event counts scaled by the
//! refugee share of the population alongside a Direct/Indirect split of
//! CAMEO root codes.

pub mod artifacts;
pub mod classify;
pub mod config;
pub mod country;
pub mod filter;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod render;
pub mod run;

pub use model::{
    ActionCategory, CountryCode, CountryMetrics, EventRecord, GkgRecord, MentionRecord, PipelineCounters,
    PopulationRecord, RootCode,
};
