use std::path::PathBuf;
use std::process::ExitCode;

use attn_synergy::cli::{self, config::DEFAULTS_HELP, CliError, MapSource};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "synergy",
    version,
    about = "Adaptive attention sharing for non-rigid edits on a toy diffusion transformer",
    after_help = DEFAULTS_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Probe {
    /// Configured backbone, first timestep
    Backbone,
    /// Synthetic stream where the positional term dominates retrieval
    Position,
}

#[derive(Subcommand)]
enum Command {
    /// Run source/target editing and write trace.tsv, final_states.tsv and manifest.json
    ///
    /// With several --config files each case goes to OUT/case_NNN.
    Run {
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Fixed rotary weight for every step instead of the adaptive schedule
        #[arg(long)]
        w: Option<f64>,
        /// Worker threads for multi-config runs (outputs do not depend on it)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Per-timestep mean, population std and nearest-rank 20th/80th
    /// percentiles (rank = ceil(p*N)) of m_mean across traces
    Stats {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the attention map of one target query over the source image
    Map {
        #[arg(long)]
        config: PathBuf,
        /// Query cell as ROW,COL
        #[arg(long, value_parser = cli::parse_cell)]
        cell: (usize, usize),
        /// Rotary weight in [0, 1]
        #[arg(long, default_value_t = 1.0)]
        w: f64,
        #[arg(long)]
        out: PathBuf,
        /// Block to probe (default: first shared block)
        #[arg(long)]
        block: Option<usize>,
        #[arg(long, value_enum, default_value_t = Probe::Backbone)]
        probe: Probe,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, w, jobs } => cli::cmd_run(&config, &out, w, jobs),
        Command::Stats { traces, out } => cli::cmd_stats(&traces, &out),
        Command::Map {
            config,
            cell,
            w,
            out,
            block,
            probe,
        } => {
            let source = match probe {
                Probe::Backbone => MapSource::Backbone { block },
                Probe::Position => MapSource::PositionProbe,
            };
            cli::cmd_map(&config, cell, w, &out, source)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_USAGE } else { cli::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
