use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use xenoscope::config::{ConfigLayer, RunConfig, CACHE_DIR_ENV};
use xenoscope::filter::{CountryStrategy, MatchMode};
use xenoscope::ingest::Feed;
use xenoscope::render::ColorTransform;
use xenoscope::run::{self, RunError};

#[derive(Parser, Debug)]
#[command(
    name = "xenoscope",
    version,
    about = "Refugee-related xenophobic events in GDELT 2.0"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: SharedArgs,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Download update files listed in the master lists into the cache.
    Fetch,
    /// Run the filter cascade over cached update files.
    Filter,
    /// Compute scaled frequency per country.
    Metrics,
    /// Split events into Direct and Indirect actions.
    Classify,
    /// Write ranked tables and the choropleth.
    Report,
    /// All stages in order.
    Run,
}

#[derive(Args, Debug, Default)]
struct SharedArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// First update to include (YYYY-MM-DD or YYYY-MM-DDTHH:MM[:SS]).
    #[arg(long, global = true)]
    start: Option<String>,
    /// Last update to include; a bare date covers the whole day.
    #[arg(long, global = true)]
    end: Option<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    feeds: Option<Vec<Feed>>,
    #[arg(long, global = true, env = CACHE_DIR_ENV)]
    cache_dir: Option<PathBuf>,
    /// Read decompressed update files from here and skip fetching.
    #[arg(long, global = true)]
    input_dir: Option<PathBuf>,
    /// `prefix` or `exact-set`.
    #[arg(long, global = true)]
    themes_mode: Option<MatchMode>,
    /// `actor1-first`, `non-ref-actor` or `action-geo`.
    #[arg(long, global = true)]
    country_strategy: Option<CountryStrategy>,
    #[arg(long, global = true)]
    refugees_csv: Option<PathBuf>,
    #[arg(long, global = true)]
    population_csv: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    min_refugees: Option<i64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    top_n: Option<i64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    jobs: Option<i64>,
    /// `log10` (default) or `linear`.
    #[arg(long, global = true)]
    color_transform: Option<ColorTransform>,
    /// Shade countries with population data but no events.
    #[arg(long, global = true)]
    map_zero_event_countries: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

impl SharedArgs {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            start: self.start.clone(),
            end: self.end.clone(),
            feeds: self.feeds.clone(),
            cache_dir: self.cache_dir.clone(),
            input_dir: self.input_dir.clone(),
            themes_mode: self.themes_mode,
            country_strategy: self.country_strategy,
            refugees_csv: self.refugees_csv.clone(),
            population_csv: self.population_csv.clone(),
            min_refugees: self.min_refugees,
            top_n: self.top_n,
            out: self.out.clone(),
            jobs: self.jobs,
            color_transform: self.color_transform,
            map_zero_event_countries: self.map_zero_event_countries.then_some(true),
            ..Default::default()
        }
    }
}

fn execute(command: Command, config: &RunConfig) -> Result<(), RunError> {
    match command {
        Command::Fetch => {
            let s = run::run_fetch(config)?;
            println!(
                "listed {} files: {} fetched ({} from cache, {} bytes transferred), {} missing upstream",
                s.listed, s.fetched, s.from_cache, s.bytes_transferred, s.missing_upstream
            );
        }
        Command::Filter => {
            let s = run::run_filter(config)?;
            println!(
                "{} files, {} lines ({} skipped)",
                s.files, s.lines_read, s.lines_skipped
            );
            println!("{}", s.counters.summary_line());
        }
        Command::Metrics => {
            let s = run::run_metrics(config)?;
            println!(
                "{} countries with metrics, {} excluded for missing population",
                s.metrics.len(),
                s.missing_population
            );
        }
        Command::Classify => {
            let b = run::run_classify(config)?;
            print!("{}", b.global.to_key_value());
        }
        Command::Report => {
            let s = run::run_report(config)?;
            println!(
                "{} ranked countries, {} rendered, {} gray",
                s.ranked.len(),
                s.rendered,
                s.gray
            );
        }
        Command::Run => {
            let s = run::run_end_to_end(config)?;
            println!("{}", s.filter.counters.summary_line());
            println!(
                "{} ranked countries written to {}",
                s.report.ranked.len(),
                config.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = RunConfig::load(cli.opts.config.as_deref(), cli.opts.layer())
        .map_err(RunError::from)
        .and_then(|config| execute(cli.command, &config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
