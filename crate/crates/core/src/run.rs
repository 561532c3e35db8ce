//! Stage drivers shared by the CLI subcommands.
//!
//! Each stage reads the previous stage's files from the output directory
//! and writes its own, so stages can be re-run one at a time.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use thiserror::Error;

use crate::artifacts::{self as art, ArtifactError};
use crate::classify::{breakdown_from_pairs, Breakdown, CountryBreakdown};
use crate::config::{ConfigError, RunConfig};
use crate::country::CountryRegistry;
use crate::filter::{DocumentStage, FilterConfig, FilterOutcome, ThemeSet};
use crate::ingest::parse::write_skip_report;
use crate::ingest::{
    discover_update_files, list_update_files, parse_file, FetchError, Fetcher, FileKind, ListError, LocalUpdateFile,
    ParseReport,
};
use crate::metrics::{
    compute_country_metrics, load_refugee_population, load_total_population, merge_populations, top_n, FrequencyTable,
    PopulationLoadError,
};
use crate::model::{CountryMetrics, EventRecord, GkgRecord, MentionRecord, PipelineCounters};
use crate::render::{
    self, emit_choropleth, emit_table, ChoroplethDocument, RenderError, TableFormat, TableRows, WorldGeometry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fetch,
    Filter,
    Metrics,
    Classify,
    Report,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Fetch => 3,
            Stage::Filter => 4,
            Stage::Metrics => 5,
            Stage::Classify => 6,
            Stage::Report => 7,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Fetch => "fetch",
            Stage::Filter => "filter",
            Stage::Metrics => "metrics",
            Stage::Classify => "classify",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{} not found", .0.display())]
    NotFound(PathBuf),
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    List(#[from] ListError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{path}: {source}")]
    Population {
        path: PathBuf,
        #[source]
        source: PopulationLoadError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{failed} of {total} update files could not be fetched; first error: {first}")]
    FetchIncomplete { failed: usize, total: usize, first: String },
}

impl StageError {
    pub fn is_not_found(&self) -> bool {
        match self {
            StageError::NotFound(_) => true,
            StageError::Artifact(a) => a.is_not_found(),
            StageError::Io { source, .. } => source.kind() == io::ErrorKind::NotFound,
            _ => false,
        }
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| {
            if source.kind() == io::ErrorKind::NotFound {
                StageError::NotFound(path.to_path_buf())
            } else {
                StageError::Io {
                    path: path.to_path_buf(),
                    source,
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Stage { stage, .. } => stage.exit_code(),
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            RunError::Config(_) => None,
            RunError::Stage { stage, .. } => Some(*stage),
        }
    }
}

fn in_stage<T>(stage: Stage, r: Result<T, impl Into<StageError>>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Stage {
        stage,
        source: e.into(),
    })
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.out.join(name)
}

/// Writes the effective configuration next to the stage outputs.
pub fn echo_config(config: &RunConfig, stage: Stage) -> Result<(), RunError> {
    in_stage(
        stage,
        art::write_text(&out_path(config, art::EFFECTIVE_CONFIG), &config.effective_toml()),
    )
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchSummary {
    pub listed: usize,
    pub fetched: usize,
    pub from_cache: usize,
    pub missing_upstream: usize,
    pub bytes_transferred: u64,
    pub malformed_list_lines: u64,
}

fn read_master_list(fetcher: &Fetcher, location: &str) -> Result<String, StageError> {
    if let Some(path) = location.strip_prefix("file://") {
        return fs::read_to_string(path).map_err(StageError::io(Path::new(path)));
    }
    if location.starts_with("http://") || location.starts_with("https://") {
        return Ok(fetcher.fetch_text(location)?);
    }
    fs::read_to_string(location).map_err(StageError::io(Path::new(location)))
}

/// Lists the configured window in each feed's master list and downloads
/// every file into the cache. Files the server reports as missing are
/// recorded and skipped; any other failure fails the stage after all
/// transfers were attempted.
pub fn run_fetch(config: &RunConfig) -> Result<FetchSummary, RunError> {
    let stage = Stage::Fetch;
    echo_config(config, stage)?;
    let fetcher = Fetcher::new(&config.cache_dir).with_retries(config.fetch_attempts, Duration::from_millis(500));
    let mut refs = Vec::new();
    let mut summary = FetchSummary::default();
    for &feed in &config.feeds {
        let text = in_stage(stage, read_master_list(&fetcher, config.master_list_url(feed)))?;
        let listing = in_stage(
            stage,
            list_update_files(config.start, config.end, &[feed], text.as_bytes()),
        )?;
        summary.malformed_list_lines += listing.malformed_lines;
        refs.extend(listing.refs);
    }
    refs.sort_by_key(|r| r.sort_key());
    summary.listed = refs.len();
    log::info!("fetching {} update files with {} jobs", refs.len(), config.jobs);

    let results = fetcher.fetch_all(&refs, config.jobs);
    let mut rows = Vec::with_capacity(refs.len());
    let mut failures = Vec::new();
    for (r, result) in refs.iter().zip(results) {
        let (status, bytes) = match result {
            Ok(o) => {
                summary.fetched += 1;
                summary.from_cache += usize::from(o.from_cache);
                summary.bytes_transferred += o.bytes_transferred;
                (
                    if o.from_cache { "cached" } else { "downloaded" }.to_string(),
                    o.bytes_transferred,
                )
            }
            Err(FetchError::NotFound { .. }) => {
                summary.missing_upstream += 1;
                log::warn!("{} is listed but not served", r.url);
                ("missing".to_string(), 0)
            }
            Err(e) => {
                log::error!("{e}");
                failures.push(e.to_string());
                ("failed".to_string(), 0)
            }
        };
        rows.push(vec![
            r.timestamp.format("%Y%m%d%H%M%S").to_string(),
            r.feed.to_string(),
            r.file_kind.to_string(),
            r.url.clone(),
            r.checksum.clone(),
            status,
            bytes.to_string(),
        ]);
    }
    in_stage(
        stage,
        art::write_tsv(
            &out_path(config, art::FETCH_MANIFEST),
            &["timestamp", "feed", "kind", "url", "md5", "status", "bytes_transferred"],
            &rows,
        ),
    )?;
    if let Some(first) = failures.first() {
        return Err(RunError::Stage {
            stage,
            source: StageError::FetchIncomplete {
                failed: failures.len(),
                total: refs.len(),
                first: first.clone(),
            },
        });
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSummary {
    pub files: usize,
    pub counters: PipelineCounters,
    pub lines_read: u64,
    pub lines_skipped: u64,
}

fn build_pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

fn parse_io(path: &Path) -> impl FnOnce(io::Error) -> StageError + '_ {
    StageError::io(path)
}

/// (document, event id) pairs found in one mentions file.
type MentionPart = (Vec<(String, u64)>, ParseReport);

/// Runs the filter cascade over update files in `[start, end]`. GKG,
/// Mentions and Event files are each parsed in parallel; per-file results
/// are folded in file order so output does not depend on scheduling.
pub fn filter_files(
    files: &[LocalUpdateFile],
    config: &RunConfig,
    registry: &CountryRegistry,
) -> Result<(FilterOutcome, Vec<ParseReport>), StageError> {
    let pool = build_pool(config.jobs);
    let of_kind = |kind: FileKind| files.iter().filter(move |f| f.kind == kind).collect::<Vec<_>>();
    let filter_config = FilterConfig {
        theme_set: ThemeSet::gkg_ref(config.themes_mode),
        country_strategy: config.country_strategy,
    };

    let gkg_files = of_kind(FileKind::Gkg);
    let gkg_parts: Vec<Result<(DocumentStage, ParseReport), StageError>> = pool.install(|| {
        gkg_files
            .par_iter()
            .map(|f| {
                let mut stage = DocumentStage::new(filter_config.theme_set.clone());
                let report = parse_file(&f.path, &config.gkg_schema, |g: GkgRecord| {
                    stage.add_gkg(&g);
                })
                .map_err(parse_io(&f.path))?;
                Ok((stage, report))
            })
            .collect()
    });
    let mut reports = Vec::new();
    let mut documents = DocumentStage::new(filter_config.theme_set.clone());
    for part in gkg_parts {
        let (stage, report) = part?;
        documents.merge(stage);
        reports.push(report);
    }

    let mut links = documents.into_link_stage();
    let mention_files = of_kind(FileKind::Mentions);
    let mention_parts: Vec<Result<MentionPart, StageError>> = pool.install(|| {
        mention_files
            .par_iter()
            .map(|f| {
                let mut found = Vec::new();
                let report = parse_file(&f.path, &config.mentions_schema, |m: MentionRecord| {
                    if links.tracks(&m.mention_identifier) {
                        found.push((m.mention_identifier, m.global_event_id));
                    }
                })
                .map_err(parse_io(&f.path))?;
                Ok((found, report))
            })
            .collect()
    });
    for part in mention_parts {
        let (found, report) = part?;
        for (doc, id) in found {
            links.link(&doc, id);
        }
        reports.push(report);
    }

    let mut events = links.into_event_stage();
    let event_files = of_kind(FileKind::Event);
    let event_parts: Vec<Result<(Vec<EventRecord>, ParseReport), StageError>> = pool.install(|| {
        event_files
            .par_iter()
            .map(|f| {
                let mut kept = Vec::new();
                let report = parse_file(&f.path, &config.event_schema, |e: EventRecord| {
                    if events.wants(e.global_event_id) {
                        kept.push(e);
                    }
                })
                .map_err(parse_io(&f.path))?;
                Ok((kept, report))
            })
            .collect()
    });
    for part in event_parts {
        let (kept, report) = part?;
        for e in kept {
            events.add_event(e);
        }
        reports.push(report);
    }

    Ok((events.finish(filter_config.country_strategy, registry), reports))
}

pub fn input_dir(config: &RunConfig) -> &Path {
    config.input_dir.as_deref().unwrap_or(&config.cache_dir)
}

/// Filter stage: update files → filtered events, counters, theme audit,
/// skipped-line report and input manifest.
pub fn run_filter(config: &RunConfig) -> Result<FilterSummary, RunError> {
    let stage = Stage::Filter;
    echo_config(config, stage)?;
    let dir = input_dir(config);
    let files = in_stage(
        stage,
        discover_update_files(dir, config.start, config.end, &config.feeds).map_err(StageError::io(dir)),
    )?;
    if files.is_empty() {
        return Err(RunError::Stage {
            stage,
            source: StageError::Missing(format!(
                "no update files for {} .. {} under {}",
                config.start,
                config.end,
                dir.display()
            )),
        });
    }
    log::info!("filtering {} update files from {}", files.len(), dir.display());
    let (outcome, reports) = in_stage(stage, filter_files(&files, config, CountryRegistry::bundled()))?;

    in_stage(
        stage,
        art::write_filtered_events(&out_path(config, art::FILTERED_EVENTS), &outcome.events),
    )?;
    in_stage(
        stage,
        art::write_text(
            &out_path(config, art::COUNTERS),
            &art::counters_report(&outcome.counters, &outcome.diagnostics),
        ),
    )?;
    in_stage(
        stage,
        art::write_text(
            &out_path(config, art::THEME_AUDIT),
            &art::theme_audit_csv(&outcome.diagnostics.theme_audit),
        ),
    )?;
    in_stage(
        stage,
        art::write_with(&out_path(config, art::SKIPPED_LINES), |w| {
            write_skip_report(w, &reports)
        }),
    )?;
    let by_name: BTreeMap<&str, &ParseReport> = reports.iter().map(|r| (r.source.as_str(), r)).collect();
    let rows: Vec<Vec<String>> = files
        .iter()
        .map(|f| {
            let name = f
                .path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let r = by_name.get(name.as_str());
            vec![
                name.clone(),
                f.timestamp.format("%Y%m%d%H%M%S").to_string(),
                f.feed.to_string(),
                f.kind.to_string(),
                r.map(|r| r.total_lines).unwrap_or(0).to_string(),
                r.map(|r| r.parsed).unwrap_or(0).to_string(),
                r.map(|r| r.skipped_count()).unwrap_or(0).to_string(),
            ]
        })
        .collect();
    in_stage(
        stage,
        art::write_tsv(
            &out_path(config, art::INPUTS),
            &["file", "timestamp", "feed", "kind", "lines", "parsed", "skipped"],
            &rows,
        ),
    )?;

    log::info!("{}", outcome.counters.summary_line());
    Ok(FilterSummary {
        files: files.len(),
        counters: outcome.counters,
        lines_read: reports.iter().map(|r| r.total_lines).sum(),
        lines_skipped: reports.iter().map(|r| r.skipped_count()).sum(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub metrics: Vec<CountryMetrics>,
    pub missing_population: usize,
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, StageError> {
    match path {
        Some(p) if p.exists() => Ok(p),
        Some(p) => Err(StageError::NotFound(p.clone())),
        None => Err(StageError::Missing(format!("{what} is not configured"))),
    }
}

/// Metrics stage: filtered events + population files → per-country
/// metrics, the merged population table and load diagnostics.
pub fn run_metrics(config: &RunConfig) -> Result<MetricsSummary, RunError> {
    let stage = Stage::Metrics;
    echo_config(config, stage)?;
    let registry = CountryRegistry::bundled();
    let events = in_stage(
        stage,
        art::read_filtered_events(&out_path(config, art::FILTERED_EVENTS)),
    )?;
    let refugees_path = in_stage(stage, required(&config.refugees_csv, "refugees_csv"))?;
    let population_path = in_stage(stage, required(&config.population_csv, "population_csv"))?;

    let open = |p: &Path| File::open(p).map_err(StageError::io(p));
    let refugees = in_stage(
        stage,
        open(refugees_path).and_then(|f| {
            load_refugee_population(f, registry, &config.refugee_columns).map_err(|source| StageError::Population {
                path: refugees_path.to_path_buf(),
                source,
            })
        }),
    )?;
    let totals = in_stage(
        stage,
        open(population_path).and_then(|f| {
            load_total_population(f, registry, &config.population_columns).map_err(|source| StageError::Population {
                path: population_path.to_path_buf(),
                source,
            })
        }),
    )?;
    let merged = merge_populations(&refugees.partials, &totals.partials, &config.as_of);
    let freq = FrequencyTable::from_countries(events.iter().map(|e| e.country));
    let report = compute_country_metrics(&freq, &merged.records);

    let rows = TableRows::Metrics(&report.metrics);
    in_stage(
        stage,
        emit_table(&rows, TableFormat::Csv, &out_path(config, art::METRICS)),
    )?;
    in_stage(
        stage,
        art::write_populations(&out_path(config, art::POPULATIONS), &merged.records),
    )?;

    let mut diag = String::new();
    for d in &refugees.diagnostics {
        diag.push_str(&format!("refugees {d}\n"));
    }
    for d in &totals.diagnostics {
        diag.push_str(&format!("population {d}\n"));
    }
    for d in &merged.diagnostics {
        diag.push_str(&format!("merge {d}\n"));
    }
    for c in &report.missing_population {
        diag.push_str(&format!("events {c}: no population record, excluded\n"));
    }
    for c in &report.zero_refugees {
        diag.push_str(&format!("events {c}: zero refugee population, excluded\n"));
    }
    in_stage(
        stage,
        art::write_text(&out_path(config, art::METRICS_DIAGNOSTICS), &diag),
    )?;
    for c in &report.missing_population {
        log::warn!("{c} has events but no population data");
    }

    Ok(MetricsSummary {
        missing_population: report.missing_population.len() + report.zero_refugees.len(),
        metrics: report.metrics,
    })
}

/// Classify stage: filtered events → per-country Direct/Indirect counts
/// and the global split.
pub fn run_classify(config: &RunConfig) -> Result<Breakdown, RunError> {
    let stage = Stage::Classify;
    echo_config(config, stage)?;
    let events = in_stage(
        stage,
        art::read_filtered_events(&out_path(config, art::FILTERED_EVENTS)),
    )?;
    let breakdown = breakdown_from_pairs(events.iter().map(|e| (e.country, e.event_root_code)));
    in_stage(
        stage,
        emit_table(
            &TableRows::Breakdown(&breakdown.countries),
            TableFormat::Csv,
            &out_path(config, art::BREAKDOWN),
        ),
    )?;
    in_stage(
        stage,
        art::write_text(&out_path(config, art::GLOBAL_SPLIT), &breakdown.global.to_key_value()),
    )?;
    Ok(breakdown)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub ranked: Vec<CountryMetrics>,
    pub rendered: usize,
    pub gray: usize,
    pub mismatches: usize,
}

/// Report stage: metrics + breakdown → ranked tables and the choropleth.
pub fn run_report(config: &RunConfig) -> Result<ReportSummary, RunError> {
    let stage = Stage::Report;
    echo_config(config, stage)?;
    let metrics = in_stage(stage, art::read_metrics(&out_path(config, art::METRICS)))?;
    let breakdown_rows = in_stage(stage, art::read_breakdown(&out_path(config, art::BREAKDOWN)))?;
    let breakdown = Breakdown {
        countries: breakdown_rows,
        global: Default::default(),
    };

    let ranked = top_n(&metrics, config.top_n, config.min_refugees);
    for format in [TableFormat::Csv, TableFormat::Markdown] {
        let name = match format {
            TableFormat::Csv => art::RANKED_TABLE,
            TableFormat::Markdown => art::RANKED_TABLE_MD,
        };
        in_stage(
            stage,
            emit_table(&TableRows::Metrics(&ranked), format, &out_path(config, name)),
        )?;
    }
    let ranked_breakdown: Vec<CountryBreakdown> = ranked
        .iter()
        .map(|m| {
            breakdown
                .get(m.country)
                .copied()
                .unwrap_or_else(|| CountryBreakdown::new(m.country, 0, 0))
        })
        .collect();
    for format in [TableFormat::Csv, TableFormat::Markdown] {
        let name = match format {
            TableFormat::Csv => art::RANKED_BREAKDOWN,
            TableFormat::Markdown => art::RANKED_BREAKDOWN_MD,
        };
        in_stage(
            stage,
            emit_table(
                &TableRows::Breakdown(&ranked_breakdown),
                format,
                &out_path(config, name),
            ),
        )?;
    }

    let mut shaded = metrics.clone();
    if config.map_zero_event_countries {
        let populations = in_stage(stage, art::read_populations(&out_path(config, art::POPULATIONS)))?;
        let have: std::collections::BTreeSet<_> = metrics.iter().map(|m| m.country).collect();
        shaded.extend(
            populations
                .iter()
                .filter(|(c, _)| !have.contains(c))
                .filter_map(|(&c, pop)| CountryMetrics::compute(c, 0, pop)),
        );
    }
    let doc = ChoroplethDocument::new(&shaded, &breakdown, config.color_transform);
    let rendered = in_stage(stage, emit_choropleth(&doc, WorldGeometry::bundled(), &config.out))?;
    let mut diag = String::new();
    for m in &rendered.mismatches {
        diag.push_str(&format!("GeometryKeyMismatch {m}\n"));
    }
    diag.push_str(&format!(
        "rendered={}\ngray={}\nmismatches={}\n",
        rendered.rendered.len(),
        rendered.gray.len(),
        rendered.mismatches.len()
    ));
    in_stage(
        stage,
        art::write_text(&out_path(config, art::REPORT_DIAGNOSTICS), &diag),
    )?;

    Ok(ReportSummary {
        ranked,
        rendered: rendered.rendered.len(),
        gray: rendered.gray.len(),
        mismatches: rendered.mismatches.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub fetch: Option<FetchSummary>,
    pub filter: FilterSummary,
    pub metrics: MetricsSummary,
    pub breakdown: Breakdown,
    pub report: ReportSummary,
}

/// All stages in order. Fetch is skipped when `input_dir` is set. A failing
/// stage leaves the files of earlier stages in place.
pub fn run_end_to_end(config: &RunConfig) -> Result<RunSummary, RunError> {
    let fetch = match config.input_dir {
        Some(_) => None,
        None => Some(run_fetch(config)?),
    };
    let filter = run_filter(config)?;
    let metrics = run_metrics(config)?;
    let breakdown = run_classify(config)?;
    let report = run_report(config)?;
    Ok(RunSummary {
        fetch,
        filter,
        metrics,
        breakdown,
        report,
    })
}

/// Every artifact `run_end_to_end` is documented to produce.
pub const PRIMARY_ARTIFACTS: [&str; 7] = [
    art::FILTERED_EVENTS,
    art::COUNTERS,
    art::METRICS,
    art::BREAKDOWN,
    render::GEOJSON_FILE,
    render::SVG_FILE,
    art::RANKED_TABLE,
];
