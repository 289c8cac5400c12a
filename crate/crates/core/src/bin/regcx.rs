use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use regional_complexity::complexity::IndexKind;
use regional_complexity::config::{parse_years, GeographyLevel, IndustryLevelConfig, RunConfig, SynthKind};
use regional_complexity::matrix::Strategy;
use regional_complexity::pipeline::{self, CommandError};
use regional_complexity::regress::SeKind;
use regional_complexity::Error;

/// Regional economic complexity pipeline.
#[derive(Debug, Parser)]
#[command(name = "regcx", version)]
struct Cli {
    /// TOML run config.
    #[arg(long, global = true, env = "REGCX_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for per-combination jobs; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, impute and aggregate raw employment tables into a panel.
    Ingest(IngestArgs),
    /// Score every year × strategy × index combination.
    Compute(ComputeArgs),
    /// Heatmaps, correlations, group summaries and ranked tables.
    Diagnose(DiagnoseArgs),
    /// Fit the configured regression tables.
    Regress(RegressArgs),
    /// Generate a synthetic matrix.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Raw employment file; repeat for several.
    #[arg(long = "employment")]
    employment: Vec<PathBuf>,
    #[arg(long)]
    size_classes: Option<PathBuf>,
    #[arg(long)]
    geography_crosswalk: Option<PathBuf>,
    #[arg(long)]
    industry_crosswalk: Option<PathBuf>,
    /// cbsa_plus_counties or county.
    #[arg(long)]
    geography: Option<GeographyLevel>,
    /// naics2..naics6 or bcd_subcluster.
    #[arg(long)]
    industry: Option<IndustryLevelConfig>,
    /// e.g. 2007-2015 or 2007,2015.
    #[arg(long)]
    years: Option<String>,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    /// Comma-separated: BM,RLQ,WM,Presence,CM.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<Strategy>,
    /// Comma-separated: eci,fi.
    #[arg(long, value_delimiter = ',')]
    indices: Vec<IndexKind>,
    #[arg(long)]
    years: Option<String>,
    /// CM employment cutoff.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Fitness convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Fitness iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    year: Option<i32>,
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<Strategy>,
    #[arg(long, value_delimiter = ',')]
    indices: Vec<IndexKind>,
    /// Comma-separated heatmap formats: svg,csv.
    #[arg(long, value_delimiter = ',')]
    formats: Vec<String>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Heatmap a matrix triplet file instead of the panel.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RegressArgs {
    /// Merged analysis CSV.
    #[arg(long)]
    analysis: Option<PathBuf>,
    /// Override the standard-error flavor of every model: classical or hc1.
    #[arg(long)]
    se: Option<String>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// nested or capability.
    #[arg(long)]
    kind: Option<SynthKind>,
    #[arg(long)]
    regions: Option<usize>,
    #[arg(long)]
    industries: Option<usize>,
    #[arg(long)]
    capabilities: Option<usize>,
    #[arg(long)]
    p_region: Option<f64>,
    #[arg(long)]
    p_industry: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_list<T>(slot: &mut Vec<T>, v: Vec<T>) {
    if !v.is_empty() {
        *slot = v;
    }
}

fn build_config(cli: &mut Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out.take() {
        cfg.paths.output = Some(out);
    }
    match &mut cli.command {
        Command::Ingest(a) => {
            set_list(&mut cfg.paths.employment, std::mem::take(&mut a.employment));
            let p = &mut cfg.paths;
            p.size_classes = a.size_classes.take().or(p.size_classes.take());
            p.geography_crosswalk = a.geography_crosswalk.take().or(p.geography_crosswalk.take());
            p.industry_crosswalk = a.industry_crosswalk.take().or(p.industry_crosswalk.take());
            set(&mut cfg.geography, a.geography);
            set(&mut cfg.industry, a.industry);
            if let Some(y) = &a.years {
                cfg.years = parse_years(y)?;
            }
        }
        Command::Compute(a) => {
            set_list(&mut cfg.strategies, std::mem::take(&mut a.strategies));
            set_list(&mut cfg.indices, std::mem::take(&mut a.indices));
            if let Some(y) = &a.years {
                cfg.years = parse_years(y)?;
            }
            set(&mut cfg.solver.cutoff, a.cutoff);
            set(&mut cfg.solver.tol, a.tol);
            set(&mut cfg.solver.max_iter, a.max_iter);
        }
        Command::Diagnose(a) => {
            set(&mut cfg.diagnose.year, a.year.map(Some));
            set_list(&mut cfg.strategies, std::mem::take(&mut a.strategies));
            set_list(&mut cfg.indices, std::mem::take(&mut a.indices));
            set_list(&mut cfg.diagnose.heatmap_formats, std::mem::take(&mut a.formats));
            set(&mut cfg.diagnose.top_n, a.top_n);
            cfg.paths.attributes = a.attributes.take().or(cfg.paths.attributes.take());
            cfg.diagnose.matrix = a.matrix.take().or(cfg.diagnose.matrix.take());
        }
        Command::Regress(a) => {
            cfg.paths.analysis = a.analysis.take().or(cfg.paths.analysis.take());
            if let Some(se) = &a.se {
                let kind = match se.to_ascii_lowercase().as_str() {
                    "classical" => SeKind::Classical,
                    "hc1" => SeKind::Hc1,
                    _ => return Err(Error::Config(format!("unknown standard-error kind {se:?}"))),
                };
                for m in &mut cfg.regress.models {
                    m.se = kind;
                }
            }
        }
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            set(&mut s.kind, a.kind);
            set(&mut s.params.n_regions, a.regions);
            set(&mut s.params.n_industries, a.industries);
            set(&mut s.params.n_capabilities, a.capabilities);
            set(&mut s.params.p_region, a.p_region);
            set(&mut s.params.p_industry, a.p_industry);
            set(&mut s.params.seed, a.seed);
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match build_config(&mut cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Ingest(_) => pipeline::run_ingest(&cfg),
        Command::Compute(_) => pipeline::run_compute(&cfg, cli.jobs),
        Command::Diagnose(_) => pipeline::run_diagnose(&cfg),
        Command::Regress(_) => pipeline::run_regress(&cfg),
        Command::Synth(_) => pipeline::run_synth(&cfg),
    };
    match result {
        Ok(outcome) => {
            for f in &outcome.manifest.failures {
                eprintln!("failed: {f}");
            }
            println!("{}", outcome.manifest_path.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CommandError::Validation(Error::MissingFile(p)) = &e {
                eprintln!("expected file: {}", p.display());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
