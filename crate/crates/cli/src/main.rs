mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::OutputFormat;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Domain(#[from] mvpuf::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(e) if !e.is_parse_error() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mvpuf",
    version,
    about = "Multi-voltage ring-oscillator PUF simulator"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override (replaces run.seeds)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the generated_at_unix field from reports
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    ros: Option<usize>,
    #[arg(long, global = true)]
    inverters: Option<usize>,
    #[arg(long, global = true)]
    columns: Option<usize>,
    /// Number of supply levels, spaced 120 mV around the nominal supply
    #[arg(long, global = true)]
    levels: Option<usize>,
}

/// Where the chip comes from: a saved chip file or a fresh sample.
#[derive(Debug, Args)]
struct ChipArgs {
    /// Chip file written by gen-chip (otherwise a chip is sampled from the seed)
    #[arg(long)]
    chip: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TempArgs {
    #[arg(long, allow_hyphen_values = true)]
    temp_min_c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    temp_max_c: Option<f64>,
    #[arg(long)]
    temp_step_c: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a virtual chip and write it as JSON
    GenChip,
    /// Evaluate one challenge
    Respond {
        #[command(flatten)]
        chip: ChipArgs,
        /// Challenge in the form a-b:levels, e.g. 0-1:010
        #[arg(long)]
        challenge: String,
        #[arg(long, allow_hyphen_values = true)]
        temperature: Option<f64>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Inter-chip uniqueness over a cohort
    Uniqueness {
        /// Cohort size (chips seeded seed, seed+1, ...)
        #[arg(long)]
        k: Option<usize>,
        /// Explicit chip seeds, comma separated
        #[arg(long, value_delimiter = ',')]
        chip_seeds: Option<Vec<u64>>,
        /// Use only the first N challenges in canonical order
        #[arg(long)]
        challenges: Option<usize>,
    },
    /// Response stability across a temperature sweep
    Reliability {
        #[command(flatten)]
        chip: ChipArgs,
        #[command(flatten)]
        temps: TempArgs,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        challenges: Option<usize>,
    },
    /// Delay difference of one RO pair for every configuration
    DeltaSweep {
        #[command(flatten)]
        chip: ChipArgs,
        #[arg(long, default_value = "0-1")]
        pair: String,
        #[arg(long, allow_hyphen_values = true)]
        temperature: Option<f64>,
    },
    /// Size of the challenge space
    ChallengeSpace,
    /// Build and pack the temperature-aware configuration table
    TempTable {
        #[command(flatten)]
        chip: ChipArgs,
        #[command(flatten)]
        temps: TempArgs,
    },
    /// Gate-equivalent area sweep
    Area {
        /// original-by-r, multi-by-r, original-by-i, multi-by-i, overhead or bits-per-area
        #[arg(long)]
        grid: Option<String>,
        /// Report only the configured topology
        #[arg(long)]
        topology_only: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let file = config::ConfigFile::load(g.config.as_deref())?;
    let overrides = config::Overrides {
        seed: g.seed,
        format: g.format,
        ros: g.ros,
        inverters: g.inverters,
        columns: g.columns,
        levels: g.levels,
    };
    let cfg = config::RunConfig::build(file, &overrides)?;
    let ctx = commands::Context {
        cfg: &cfg,
        timestamp: (!g.no_timestamp).then(commands::unix_now),
        out: g.out.as_deref(),
    };
    match &cli.command {
        Command::GenChip => commands::gen_chip(&ctx),
        Command::Respond {
            chip,
            challenge,
            temperature,
            repeats,
        } => commands::respond(
            &ctx,
            chip.chip.as_deref(),
            challenge,
            *temperature,
            *repeats,
        ),
        Command::Uniqueness {
            k,
            chip_seeds,
            challenges,
        } => commands::uniqueness(&ctx, *k, chip_seeds.as_deref(), *challenges),
        Command::Reliability {
            chip,
            temps,
            repeats,
            challenges,
        } => commands::reliability(&ctx, chip.chip.as_deref(), temps, *repeats, *challenges),
        Command::DeltaSweep {
            chip,
            pair,
            temperature,
        } => commands::delta_sweep(&ctx, chip.chip.as_deref(), pair, *temperature),
        Command::ChallengeSpace => commands::challenge_space(&ctx),
        Command::TempTable { chip, temps } => {
            commands::temp_table(&ctx, chip.chip.as_deref(), temps)
        }
        Command::Area {
            grid,
            topology_only,
        } => commands::area(&ctx, grid.as_deref(), *topology_only),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
