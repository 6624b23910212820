use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aet_cli::config::{preset, RunConfig};
use aet_cli::export::{plane, to_csv_profile, to_pgm, Profile};
use aet_cli::pipeline::{self, CONFIG_FILE};
use aet_cli::CliError;
use aet_core::io::read_field;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aet", version, about = "Acousto-electric tomography experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct Shared {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in preset, e.g. paper2d-accurate-small.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the true ln σ on the reconstruction grid.
    Phantom,
    /// Simulate sinograms (2D) or power densities (3D).
    Simulate,
    /// Focus 2D sinograms into power densities.
    Focus,
    /// Reconstruct σ from the simulated data.
    Reconstruct,
    /// Export a field as a PGM image or a CSV profile.
    Export(ExportArgs),
    /// Print metrics as name=value lines.
    Metrics(MetricsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pgm,
    CsvProfile,
}

#[derive(Args)]
struct ExportArgs {
    /// AETF field file.
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Output file.
    #[arg(long)]
    output: PathBuf,
    /// Lower end of the gray window.
    #[arg(long, requires = "hi")]
    lo: Option<f64>,
    /// Upper end of the gray window.
    #[arg(long, requires = "lo")]
    hi: Option<f64>,
    /// 3D: normal axis of the exported plane; profiles: 0-based axis.
    #[arg(long)]
    axis: Option<usize>,
    /// 3D: plane index along `axis`.
    #[arg(long)]
    index: Option<usize>,
    /// Profile along the diagonal instead of an axis.
    #[arg(long)]
    diagonal: bool,
    /// Export ln of the field.
    #[arg(long)]
    log: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// Field to evaluate; without it, the reconstruction history in --out.
    field: Option<PathBuf>,
    /// Reference field.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Compare ln of the field against the reference.
    #[arg(long)]
    log: bool,
}

fn resolve_config(shared: &Shared) -> Result<RunConfig, CliError> {
    let mut cfg = match (&shared.preset, &shared.config) {
        (Some(_), Some(_)) => return Err(CliError::Config("pass at most one of --preset and --config".into())),
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => {
            let saved = shared.out.join(CONFIG_FILE);
            if saved.is_file() {
                RunConfig::load(&saved)?
            } else {
                return Err(CliError::Config(format!(
                    "no --preset or --config given and no {} found",
                    saved.display()
                )));
            }
        }
    };
    if let Some(seed) = shared.seed {
        cfg.noise.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn export(args: &ExportArgs) -> Result<(), CliError> {
    let f = read_field(&args.input)?;
    let f = if args.log { f.map(f64::ln) } else { f };
    let bytes = match args.kind {
        Kind::Pgm => {
            let p = plane(&f, args.axis, args.index)?;
            to_pgm(&p, args.lo.zip(args.hi))?
        }
        Kind::CsvProfile => {
            let profile = if args.diagonal { Profile::Diagonal } else { Profile::Axis(args.axis.unwrap_or(0)) };
            to_csv_profile(&f, profile)?.into_bytes()
        }
    };
    std::fs::write(&args.output, bytes).map_err(|e| CliError::Input(format!("{}: {e}", args.output.display())))
}

fn metrics(args: &MetricsArgs, out: &Path) -> Result<(), CliError> {
    let lines = match &args.field {
        None => pipeline::reconstruction_metrics(out)?,
        Some(path) => {
            let f = read_field(path)?;
            let f = if args.log { f.map(f64::ln) } else { f };
            match &args.reference {
                Some(r) => pipeline::compare_fields(&f, &read_field(r)?)?,
                None => vec![
                    ("min".into(), f.min().to_string()),
                    ("max".into(), f.max().to_string()),
                    ("l2_norm".into(), f.norm_l2().to_string()),
                ],
            }
        }
    };
    for (k, v) in lines {
        println!("{k}={v}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.shared.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("jobs: {e}")))?;
    }
    let out = &cli.shared.out;
    match &cli.command {
        Command::Phantom => pipeline::cmd_phantom(&resolve_config(&cli.shared)?, out).map(drop),
        Command::Simulate => pipeline::cmd_simulate(&resolve_config(&cli.shared)?, out).map(drop),
        Command::Focus => pipeline::cmd_focus(&resolve_config(&cli.shared)?, out).map(drop),
        Command::Reconstruct => pipeline::cmd_reconstruct(&resolve_config(&cli.shared)?, out).map(drop),
        Command::Export(args) => export(args),
        Command::Metrics(args) => metrics(args, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
