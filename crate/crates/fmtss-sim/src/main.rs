use anyhow::Context;
use clap::{Parser, Subcommand};
use fmtss_sim::config::{CsiMode, ExperimentConfig};
use fmtss_sim::experiments;
use fmtss_sim::report::{write_outputs, ResultRow};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "fmtss-sim",
    version,
    about = "Monte-Carlo experiments for the noncontiguous FMT-SS modem"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// PAPR statistics per placement method and expansion factor.
    Papr(RunArgs),
    /// BER versus SNR sweep in the configured fading channel.
    Ber {
        #[command(flatten)]
        run: RunArgs,
        /// Run both perfect and estimated CSI for a loss comparison.
        #[arg(long)]
        both_csi: bool,
    },
    /// Congested-band study with interference avoidance.
    Interference(RunArgs),
    /// Channel-estimator diagnostics on known synthetic channels.
    Chanest(RunArgs),
    /// Identity-channel loopback; exits nonzero on any bit error.
    Loopback {
        #[command(flatten)]
        run: RunArgs,
        /// Total bits to push through per expansion factor.
        #[arg(long, default_value_t = 100_000)]
        bits: usize,
    },
    /// Write the default configuration file and exit.
    WriteConfig {
        #[arg(long, default_value = "fmtss-sim.json")]
        out: PathBuf,
    },
}

#[derive(Parser, Debug)]
struct RunArgs {
    /// Experiment configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV results and the run manifest.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn load(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&text).context("parsing configuration")?;
    config.validate()?;
    Ok(config)
}

fn emit(
    args: &RunArgs,
    config: &ExperimentConfig,
    name: &str,
    rows: &[ResultRow],
) -> anyhow::Result<()> {
    let path =
        write_outputs(&args.out_dir, name, rows, config.content_hash(), config.master_seed)?;
    println!("{name}: {} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    match args.command {
        Command::Papr(run) => {
            let config = load(&run)?;
            let rows = experiments::run_papr_study(&config)?;
            emit(&run, &config, "papr", &rows)?;
        }
        Command::Ber { run, both_csi } => {
            let config = load(&run)?;
            let modes: Vec<CsiMode> = if both_csi {
                vec![CsiMode::Perfect, CsiMode::Estimated]
            } else {
                vec![config.csi]
            };
            let rows = experiments::run_ber_sweep(&config, &modes)?;
            emit(&run, &config, "ber", &rows)?;
        }
        Command::Interference(run) => {
            let config = load(&run)?;
            let rows = experiments::run_interference_study(&config)?;
            emit(&run, &config, "interference", &rows)?;
        }
        Command::Chanest(run) => {
            let config = load(&run)?;
            let rows = experiments::run_estimator_diag(&config)?;
            emit(&run, &config, "chanest", &rows)?;
        }
        Command::Loopback { run, bits } => {
            let config = load(&run)?;
            let rows = experiments::run_loopback(&config, bits)?;
            emit(&run, &config, "loopback", &rows)?;
            let errors: u64 = rows.iter().map(|r| r.errors).sum();
            anyhow::ensure!(errors == 0, "loopback produced {errors} bit errors");
        }
        Command::WriteConfig { out } => {
            let config = ExperimentConfig::default();
            std::fs::write(&out, serde_json::to_string_pretty(&config)?)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
