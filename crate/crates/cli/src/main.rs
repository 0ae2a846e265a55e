use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use commdet_core::ingest::MissingPolicy;
use commdet_core::Normalization;

mod commands;
mod config;

use config::{ConfigFile, OmegaChoice, SourceSpec};

#[derive(Parser)]
#[command(name = "commdet", version, about = "Community detection in multiplex correlation networks")]
struct Cli {
    /// TOML file with flat keys named like the long flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory shared by all stages
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build aligned correlation layers from time-series CSV files
    Ingest(IngestArgs),
    /// Find the inter-layer intensity minimizing the total distance
    Optimize(OptimizeArgs),
    /// Detect communities on every layer at a given intensity
    Detect(DetectArgs),
    /// Pairwise NMI between partition files
    Compare(CompareArgs),
    /// Dump communicability and distance matrices, redraw partition graphs
    Export(ExportArgs),
    /// Write a seeded synthetic dataset
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Long-form series `entity,date,value` as NAME=PATH (repeatable)
    #[arg(long, value_name = "NAME=PATH")]
    source: Vec<String>,
    /// Bilateral flows `reporter,partner,period,value` as NAME=PATH (repeatable)
    #[arg(long, value_name = "NAME=PATH")]
    flow: Vec<String>,
    /// Significance level for keeping a correlation
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    min_overlap: Option<usize>,
    /// pairwise-complete or drop-entity
    #[arg(long)]
    missing: Option<String>,
    /// First date kept (inclusive)
    #[arg(long)]
    from: Option<String>,
    /// Last date kept (inclusive)
    #[arg(long)]
    to: Option<String>,
    /// Include the per-pair rho/p table in the reports
    #[arg(long)]
    pairs: bool,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Multiplex JSON (default: OUT/layers/multiplex.json)
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    refine_tol: Option<f64>,
    /// layer-strength, supra-strength or none
    #[arg(long)]
    normalization: Option<String>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// A value in [0, 1] or `from-optimize`
    #[arg(long)]
    omega: Option<OmegaChoice>,
    #[arg(long)]
    normalization: Option<String>,
    /// Output formats (repeatable or comma separated)
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
}

#[derive(Args)]
struct CompareArgs {
    /// Partition JSON files (default: every file in OUT/partitions)
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    omega: Option<OmegaChoice>,
    #[arg(long)]
    normalization: Option<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "correlated")]
    kind: SynthKind,
    #[arg(long)]
    seed: Option<u64>,
    /// Nodes per layer
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    groups: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    /// Observations per series (correlated kind)
    #[arg(long, default_value_t = 91)]
    observations: usize,
    /// Factor loading of each series (correlated kind)
    #[arg(long, default_value_t = 0.8)]
    loading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
    Graphml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Disjoint cliques repeated on every layer
    Planted,
    /// Time series driven by shared group factors
    Correlated,
}

fn parse_normalization(s: Option<String>) -> Result<Option<Normalization>> {
    s.map(|s| s.parse::<Normalization>().map_err(anyhow::Error::from)).transpose()
}

fn parse_formats(flags: Vec<Format>, cfg: Option<Vec<String>>, default: &[Format]) -> Result<Vec<Format>> {
    let mut formats = if !flags.is_empty() {
        flags
    } else if let Some(names) = cfg {
        names
            .iter()
            .flat_map(|s| s.split(','))
            .map(|s| Format::from_str(s.trim(), true).map_err(|e| anyhow!("format `{s}`: {e}")))
            .collect::<Result<Vec<_>>>()?
    } else {
        default.to_vec()
    };
    formats.sort();
    formats.dedup();
    Ok(formats)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let out = cli.out.or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let default_input = || out.join("layers").join("multiplex.json");
    let cfg_omega = cfg.omega.clone().map(OmegaChoice::try_from).transpose()?;

    match cli.command {
        Command::Ingest(a) => {
            let sources = if a.source.is_empty() && a.flow.is_empty() {
                (cfg.source.clone(), cfg.flow.clone())
            } else {
                (a.source, a.flow)
            };
            let parse = |v: Vec<String>| v.iter().map(|s| s.parse::<SourceSpec>()).collect::<Result<Vec<_>>>();
            let missing = a
                .missing
                .or(cfg.missing)
                .map(|s| s.parse::<MissingPolicy>())
                .transpose()?
                .unwrap_or_default();
            commands::ingest(&commands::IngestRun {
                out,
                sources: parse(sources.0)?,
                flows: parse(sources.1)?,
                alpha: a.alpha.or(cfg.alpha).unwrap_or(0.05),
                min_overlap: a.min_overlap.or(cfg.min_overlap).unwrap_or(10),
                missing,
                from: a.from.or(cfg.from),
                to: a.to.or(cfg.to),
                pairs: a.pairs || cfg.pairs.unwrap_or(false),
            })
        }
        Command::Optimize(a) => commands::optimize(&commands::OptimizeRun {
            input: a.input.or(cfg.input).unwrap_or_else(default_input),
            grid_points: a.grid_points.or(cfg.grid_points).unwrap_or(101),
            refine_tol: a.refine_tol.or(cfg.refine_tol).unwrap_or(1e-4),
            normalization: parse_normalization(a.normalization.or(cfg.normalization))?.unwrap_or_default(),
            out,
        }),
        Command::Detect(a) => commands::detect(&commands::DetectRun {
            input: a.input.or(cfg.input).unwrap_or_else(default_input),
            omega: a.omega.or(cfg_omega).unwrap_or(OmegaChoice::FromOptimize),
            normalization: parse_normalization(a.normalization.or(cfg.normalization))?,
            formats: parse_formats(a.format, cfg.format, &[Format::Json, Format::Csv, Format::Dot, Format::Graphml])?,
            out,
        }),
        Command::Compare(a) => commands::compare(&out, &a.files),
        Command::Export(a) => commands::export(&commands::ExportRun {
            input: a.input.or(cfg.input).unwrap_or_else(default_input),
            omega: a.omega.or(cfg_omega).unwrap_or(OmegaChoice::FromOptimize),
            normalization: parse_normalization(a.normalization.or(cfg.normalization))?,
            formats: parse_formats(a.format, cfg.format, &[Format::Csv, Format::Dot, Format::Graphml])?,
            out,
        }),
        Command::Synth(a) => commands::synth(&commands::SynthRun {
            out,
            kind: a.kind,
            seed: a.seed.or(cfg.seed).unwrap_or(0),
            n: a.n,
            groups: a.groups,
            layers: a.layers,
            observations: a.observations,
            loading: a.loading,
        }),
    }
}

/// One line: `error: kind=<kind> message="<json string>"`.
fn diagnostic(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| {
            if let Some(core) = e.downcast_ref::<commdet_core::Error>() {
                Some(core.kind())
            } else if e.is::<std::io::Error>() {
                Some("io")
            } else if e.is::<toml::de::Error>() {
                Some("config")
            } else if e.is::<serde_json::Error>() {
                Some("json")
            } else {
                None
            }
        })
        .unwrap_or("invalid_argument");
    let message = format!("{err:#}").replace('\n', " ");
    format!(
        "error: kind={kind} message={}",
        serde_json::to_string(&message).unwrap_or_else(|_| "\"\"".into())
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("error: kind=usage message={}", serde_json::to_string(&first).unwrap_or_default());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            ExitCode::FAILURE
        }
    }
}
