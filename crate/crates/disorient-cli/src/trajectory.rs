//! Drift visualization: chains pre-attack and post-attack relative
//! estimates over consecutive sampled frames into absolute tracks and
//! overlays them with ground truth.

use std::path::Path;

use disorient_core::metrics::chain_trajectory;
use disorient_core::parallel;
use disorient_core::{Error, Result, RigidTransform, Trajectory};

use crate::config::RunConfig;
use crate::dataset::Sequence;
use crate::pipeline::{prepare_pair, run_cell, task_seed, CellSpec};
use crate::plot::{line_chart, Series};
use crate::report::write_trajectory_csv;

pub struct TrajectoryRun {
    pub gt: Trajectory,
    pub pre: Trajectory,
    pub post: Trajectory,
    /// Final-pose translation error of the pre-attack chain (m).
    pub drift_pre_m: f64,
    /// Final-pose translation error of the post-attack chain (m).
    pub drift_post_m: f64,
}

fn xy(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.poses
        .iter()
        .map(|p| (p.translation.x, p.translation.y))
        .collect()
}

fn end_drift(track: &Trajectory, gt: &Trajectory) -> f64 {
    let a = track.poses.last().unwrap().translation;
    let b = gt.poses.last().unwrap().translation;
    (a - b).norm()
}

/// Chains frames `0, s, 2s, ...` of the first configured sequence.
/// The attacked chain runs the configured single cell on every link.
pub fn run_trajectory(cfg: &RunConfig, out: &Path) -> Result<TrajectoryRun> {
    cfg.validate()?;
    parallel::configure_workers(cfg.workers);
    let seq = Sequence::new(&cfg.dataset, &cfg.sequences[0]);
    let n = seq.scan_count()?;
    let gt_traj = seq.load_gt()?;
    if gt_traj.len() < n {
        return Err(Error::InvalidParam(format!(
            "sequence {}: {} poses for {n} scans",
            seq.id,
            gt_traj.len()
        )));
    }

    let stride = cfg.eval.frame_stride.max(1);
    let frames: Vec<usize> = (0..n).step_by(stride).collect();
    if frames.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 sampled frames, got {} (n = {n}, stride = {stride})",
            frames.len()
        )));
    }
    let links: Vec<(usize, usize)> = frames.windows(2).map(|w| (w[0], w[1])).collect();

    let (strategy, k, side, yaw) = cfg.single_cell();
    let cell = CellSpec {
        strategy,
        k,
        side,
        yaw,
    };
    log::info!(
        "trajectory: {} links at stride {stride}, attack {strategy} k={k} L={side} yaw={yaw}",
        links.len()
    );

    let rels: Vec<(RigidTransform, RigidTransform, RigidTransform)> =
        parallel::try_map_indexed(&links, |idx, &pair| {
            let ctx = prepare_pair(&seq, &gt_traj, pair, cfg)?;
            let attacked = run_cell(&ctx, &cell, cfg, task_seed(cfg.seed, idx, 0))?;
            Ok::<_, Error>((ctx.gt, ctx.baseline_estimate, attacked.estimate))
        })?;

    let gt = chain_trajectory(&rels.iter().map(|r| r.0).collect::<Vec<_>>());
    let pre = chain_trajectory(&rels.iter().map(|r| r.1).collect::<Vec<_>>());
    let post = chain_trajectory(&rels.iter().map(|r| r.2).collect::<Vec<_>>());

    write_trajectory_csv(&out.join("gt.csv"), &gt)?;
    write_trajectory_csv(&out.join("pre_attack.csv"), &pre)?;
    write_trajectory_csv(&out.join("post_attack.csv"), &post)?;
    line_chart(
        &out.join("trajectory.svg"),
        &format!("trajectory, {strategy} k={k} L={side} (top-down)"),
        "x (m)",
        "y (m)",
        &[
            Series {
                label: "ground truth".into(),
                points: xy(&gt),
            },
            Series {
                label: "pre-attack".into(),
                points: xy(&pre),
            },
            Series {
                label: "post-attack".into(),
                points: xy(&post),
            },
        ],
    )?;

    let run = TrajectoryRun {
        drift_pre_m: end_drift(&pre, &gt),
        drift_post_m: end_drift(&post, &gt),
        gt,
        pre,
        post,
    };
    log::info!(
        "trajectory: end drift pre {:.4} m, post {:.4} m",
        run.drift_pre_m,
        run.drift_post_m
    );
    Ok(run)
}
