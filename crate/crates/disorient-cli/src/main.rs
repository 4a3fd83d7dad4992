use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use disorient_cli::config::RunConfig;
use disorient_cli::{commands, exit_code_for, sweep, trajectory, voids};
use disorient_core::attack::AttackPlan;
use disorient_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "disorient",
    version,
    about = "Occlusion attacks and defenses for LiDAR registration"
)]
struct Cli {
    /// JSON configuration (run config; synth params for gen-synth).
    /// Flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 0 means all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic KITTI-layout dataset.
    GenSynth {
        /// Sequence id to write.
        #[arg(long, default_value = "00")]
        sequence: String,
    },
    /// Register one frame pair and report its errors.
    Register {
        #[arg(long)]
        frame_i: usize,
        #[arg(long)]
        frame_j: usize,
    },
    /// Plan and apply an occlusion attack on one frame pair.
    Attack {
        #[arg(long)]
        frame_i: usize,
        #[arg(long)]
        frame_j: usize,
        /// Patch count override.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the full (strategy, k, side, yaw) grid.
    Sweep,
    /// Chain relative estimates into drift trajectories.
    Trajectory,
    /// Replay a stored attack plan.
    Replay {
        /// Plan JSON produced by `attack`.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, requires = "frame_j")]
        frame_i: Option<usize>,
        #[arg(long, requires = "frame_i")]
        frame_j: Option<usize>,
    },
    /// Walk a sequence and report persistent void alerts.
    DetectVoids {
        /// Plan whose source frame is occluded before detection.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Rebuild metric charts from a sweep summary.
    Plot {
        /// summary.csv produced by `sweep`.
        #[arg(long)]
        summary: PathBuf,
    },
}

fn load_plan(path: &PathBuf) -> Result<AttackPlan> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    AttackPlan::from_json(&text)
}

fn run(cli: &Cli) -> Result<()> {
    let out = &cli.out;
    let cfg = || RunConfig::resolve(cli.config.as_deref(), cli.seed, cli.workers);
    match &cli.command {
        Command::GenSynth { sequence } => {
            commands::gen_synth(cli.config.as_deref(), cli.seed, sequence, out)?;
            println!("wrote sequence {sequence} under {}", out.display());
        }
        Command::Register { frame_i, frame_j } => {
            let err = commands::register_pair(&cfg()?, (*frame_i, *frame_j), out)?;
            println!(
                "pair ({frame_i}, {frame_j}): rre {:.6} deg, rte {:.6} m, converged {}",
                err.rre_deg, err.rte_m, err.converged
            );
        }
        Command::Attack {
            frame_i,
            frame_j,
            k,
        } => {
            let report = commands::attack_pair(&cfg()?, (*frame_i, *frame_j), *k, out)?;
            println!(
                "{} k={} removed {} points: rre {:.6} -> {:.6} deg, rte {:.6} -> {:.6} m",
                report.strategy,
                report.k,
                report.removed_points,
                report.baseline.rre_deg,
                report.attacked.rre_deg,
                report.baseline.rte_m,
                report.attacked.rte_m
            );
        }
        Command::Sweep => {
            let rows = sweep::run_sweep(&cfg()?, out)?;
            println!("{} rows under {}", rows.len(), out.display());
        }
        Command::Trajectory => {
            let run = trajectory::run_trajectory(&cfg()?, out)?;
            println!(
                "end drift: pre {:.4} m, post {:.4} m over {} poses",
                run.drift_pre_m,
                run.drift_post_m,
                run.gt.len()
            );
        }
        Command::Replay {
            plan,
            frame_i,
            frame_j,
        } => {
            let pair = (*frame_i).zip(*frame_j);
            let report = commands::replay_plan(&cfg()?, plan, pair, out)?;
            println!(
                "replayed pair ({}, {}): rre {:.6} deg, rte {:.6} m",
                report.pair.0, report.pair.1, report.attacked.rre_deg, report.attacked.rte_m
            );
        }
        Command::DetectVoids { plan } => {
            let plan = plan.as_ref().map(load_plan).transpose()?;
            let alerts = voids::run_detect_voids(&cfg()?, plan.as_ref(), out)?;
            println!("{} alerts, written to {}", alerts.len(), out.display());
        }
        Command::Plot { summary } => {
            commands::plot_summary(summary, out)?;
            println!("charts under {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DISORIENT_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
