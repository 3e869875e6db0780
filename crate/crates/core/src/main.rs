use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use packetscore::cli::{cmd_generate, cmd_profile, cmd_replay, cmd_simulate, RunOutputs};
use packetscore::config::RunConfig;
use packetscore::Result;

/// Score-based DDoS packet filter and trace-driven simulator.
#[derive(Parser)]
#[command(name = "packetscore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a nominal profile from a legitimate-traffic trace.
    Profile {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the configured scenario's synthetic traffic as a trace.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate the configured scenario and run the filter over it.
    Simulate {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report; the per-period CSV series goes next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the filter over a recorded trace.
    Replay {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match seed {
        Some(s) => config.with_seed(s),
        None => Ok(config),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Profile { trace, config, out } => {
            let config = load_config(config, None)?;
            cmd_profile(&trace, &config, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Generate { config, out, seed } => {
            let config = load_config(config, seed)?;
            let n = cmd_generate(&config, &out)?;
            println!("wrote {n} packets to {}", out.display());
        }
        Command::Simulate { profile, config, out, verdicts, seed } => {
            let config = load_config(config, seed)?;
            let outputs = RunOutputs { report: out, verdicts };
            let report = cmd_simulate(&profile, &config, &outputs)?;
            println!(
                "{} packets, discarded {:.4}, wrote {}",
                report.totals.packets,
                report.totals.realized_discard,
                outputs.report.display()
            );
        }
        Command::Replay { profile, trace, config, out, verdicts, seed } => {
            let config = load_config(config, seed)?;
            let outputs = RunOutputs { report: out, verdicts };
            let report = cmd_replay(&profile, &trace, &config, &outputs)?;
            println!(
                "{} packets, discarded {:.4}, wrote {}",
                report.totals.packets,
                report.totals.realized_discard,
                outputs.report.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
