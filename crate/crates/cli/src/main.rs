//! `daypop`: estimate tract-level daytime population density from census
//! and LODES payroll data.

mod config;
mod error;
mod fetch;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "daypop",
    version,
    about = "Tract-level daytime population density from census and LODES data",
    after_help = "Exit codes: 0 success, 1 validation error, 2 ingest error, 3 I/O error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML config file; command-line flags win over file settings.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Tract shapefile bundle: local path (dir, zip, or .shp) or URL.
    #[arg(long, value_name = "PATH|URL")]
    tracts: Option<String>,
    /// States shapefile bundle: local path or URL.
    #[arg(long, value_name = "PATH|URL")]
    states: Option<String>,
    /// LODES OD main file (.csv or .csv.gz): local path or URL.
    #[arg(long, value_name = "PATH|URL")]
    lodes: Option<String>,
    /// 2-digit state FIPS code.
    #[arg(long, value_name = "FIPS")]
    state_fips: Option<String>,
    /// 5-digit county FIPS codes forming the analysis region.
    #[arg(long = "county", value_name = "FIPS", value_delimiter = ',')]
    county_fips: Option<Vec<String>>,
    /// Number of choropleth quantile classes.
    #[arg(long, value_name = "K")]
    quantile_k: Option<usize>,
    /// Rows in the top-density table.
    #[arg(long, value_name = "N")]
    top_n: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Download cache directory (also via DAYPOP_CACHE_DIR).
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Count and skip malformed OD rows instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Worker threads (default: machine parallelism).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Also write tract-level OD marginals (od_marginals.csv).
    #[arg(long)]
    dump_marginals: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Download any URL inputs into the cache and print their checksums.
    Fetch(ConfigArgs),
    /// Parse and validate all inputs without running the pipeline.
    Validate(ConfigArgs),
    /// Run the full pipeline and write CSV, GeoJSON, style, and reports.
    Run(ConfigArgs),
    /// Recompute the report files from a previously written density CSV.
    Stats {
        #[command(flatten)]
        args: ConfigArgs,
        /// density.csv from a prior run.
        #[arg(long, value_name = "FILE")]
        csv: PathBuf,
    },
}

fn build_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        config.apply_file(config::load_file(path)?);
    }
    macro_rules! flag {
        ($($field:ident),*) => {
            $(if let Some(value) = &args.$field { config.$field = value.clone(); })*
        };
    }
    flag!(state_fips, county_fips, tracts, states, lodes, cache_dir);
    if let Some(k) = args.quantile_k {
        config.quantile_k = k;
    }
    if let Some(n) = args.top_n {
        config.top_n = n;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if args.lenient {
        config.lenient = true;
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    if args.dump_marginals {
        config.dump_marginals = true;
    }
    Ok(config)
}

fn init_threads(config: &RunConfig) {
    if let Some(threads) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fetch(args) => {
            let config = build_config(&args)?;
            config.validate()?;
            pipeline::fetch_inputs(&config)
        }
        Command::Validate(args) => {
            let config = build_config(&args)?;
            config.validate()?;
            init_threads(&config);
            pipeline::validate_inputs(&config)
        }
        Command::Run(args) => {
            let config = build_config(&args)?;
            config.validate()?;
            init_threads(&config);
            let outcome = pipeline::run(&config)?;
            println!(
                "{} tracts ({} zero-area, {} negative daytime); median daytime density {:.1} persons/km²",
                outcome.report.tract_count,
                outcome.report.excluded_count,
                outcome.report.negative_daytime_count,
                outcome.report.median_daytime_density,
            );
            println!(
                "od rows parsed: {} (skipped: {})",
                outcome.counters.rows_parsed, outcome.counters.rows_skipped
            );
            for path in outcome.outputs {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Stats { args, csv } => {
            let config = build_config(&args)?;
            let outcome = pipeline::stats_from_csv(&config, &csv)?;
            for path in outcome.outputs {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
