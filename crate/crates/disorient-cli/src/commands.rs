//! One-shot subcommands: synthetic dataset generation, single-pair
//! registration and attack, plan replay, and chart regeneration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use disorient_core::attack::{AttackPlan, Strategy};
use disorient_core::kitti::export_ply;
use disorient_core::metrics::PairError;
use disorient_core::occlusion::apply_plan_to_pair;
use disorient_core::synth::{synthesize, write_kitti, SynthParams};
use disorient_core::{Error, Result};

use crate::config::RunConfig;
use crate::dataset::Sequence;
use crate::pipeline::{prepare_pair, replay_cell, run_cell, task_seed, CellOutcome, CellSpec};
use crate::report::{read_summary, write_file, write_occlusion, OcclusionRow};
use crate::sweep::write_metric_charts;

/// What a single-pair attack or replay produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackReport {
    pub pair: (usize, usize),
    pub strategy: Strategy,
    pub k: usize,
    pub baseline: PairError,
    pub attacked: PairError,
    pub removed_points: usize,
}

/// Generates a synthetic KITTI-layout sequence under `out`.
pub fn gen_synth(
    config: Option<&Path>,
    seed: Option<u64>,
    sequence: &str,
    out: &Path,
) -> Result<SynthParams> {
    let mut params = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| {
                Error::InvalidParam(format!("{}: {e}", path.display()))
            })?
        }
        None => SynthParams::default(),
    };
    if let Some(seed) = seed {
        params.seed = seed;
    }
    let ds = synthesize(&params)?;
    write_kitti(&ds, out, sequence)?;
    let text = serde_json::to_string_pretty(&params)
        .map_err(|e| Error::InvalidParam(e.to_string()))?;
    write_file(&out.join("synth_params.json"), &(text + "\n"))?;
    log::info!(
        "gen-synth: {} frames, seed {}, sequence {sequence} under {}",
        params.frames,
        params.seed,
        out.display()
    );
    Ok(params)
}

fn prepare_one(cfg: &RunConfig, pair: (usize, usize)) -> Result<crate::pipeline::PairContext> {
    let seq = Sequence::new(&cfg.dataset, &cfg.sequences[0]);
    let gt = seq.load_gt()?;
    prepare_pair(&seq, &gt, pair, cfg)
}

/// Registers one frame pair and writes its errors to `report.json`.
pub fn register_pair(cfg: &RunConfig, pair: (usize, usize), out: &Path) -> Result<PairError> {
    cfg.validate()?;
    let ctx = prepare_one(cfg, pair)?;
    let text = serde_json::to_string_pretty(&ctx.baseline)
        .map_err(|e| Error::InvalidParam(e.to_string()))?;
    write_file(&out.join("report.json"), &(text + "\n"))?;
    Ok(ctx.baseline)
}

fn occlusion_rows(pair: (usize, usize), outcome: &CellOutcome) -> Vec<OcclusionRow> {
    outcome
        .per_patch
        .iter()
        .enumerate()
        .map(|(patch_id, &removed_count)| OcclusionRow {
            pair_id: format!("{}-{}", pair.0, pair.1),
            patch_id,
            removed_count,
        })
        .collect()
}

fn write_attack_outputs(
    cfg: &RunConfig,
    ctx: &crate::pipeline::PairContext,
    outcome: &CellOutcome,
    out: &Path,
) -> Result<AttackReport> {
    let report = AttackReport {
        pair: ctx.pair,
        strategy: outcome.plan.strategy,
        k: outcome.plan.k,
        baseline: ctx.baseline,
        attacked: outcome.error,
        removed_points: outcome.removed_points,
    };
    write_file(&out.join("plan.json"), &(outcome.plan.to_json()? + "\n"))?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidParam(e.to_string()))?;
    write_file(&out.join("report.json"), &(text + "\n"))?;
    write_occlusion(&out.join("occlusion.csv"), &occlusion_rows(ctx.pair, outcome))?;
    let attacked_src = if outcome.plan.patches.is_empty() {
        ctx.src.clone()
    } else {
        apply_plan_to_pair(
            &ctx.src,
            &ctx.tgt,
            &outcome.plan,
            cfg.mode,
            cfg.attack_target,
            &ctx.gt,
        )?
        .src
    };
    export_ply(&out.join("attacked_src.ply"), &attacked_src)?;
    Ok(report)
}

/// Plans and applies an attack on one frame pair, writing the plan,
/// report, per-patch counts, and attacked source cloud.
pub fn attack_pair(
    cfg: &RunConfig,
    pair: (usize, usize),
    k_override: Option<usize>,
    out: &Path,
) -> Result<AttackReport> {
    cfg.validate()?;
    let (strategy, mut k, side, yaw) = cfg.single_cell();
    if let Some(kk) = k_override {
        k = kk;
    }
    let cell = CellSpec {
        strategy,
        k,
        side,
        yaw,
    };
    let ctx = prepare_one(cfg, pair)?;
    let outcome = run_cell(&ctx, &cell, cfg, task_seed(cfg.seed, 0, 0))?;
    write_attack_outputs(cfg, &ctx, &outcome, out)
}

/// Replays a stored plan, optionally against an overridden pair. The
/// plan's recorded pair is the default; a conflicting override is an
/// error rather than a silent re-target.
pub fn replay_plan(
    cfg: &RunConfig,
    plan_path: &Path,
    pair_override: Option<(usize, usize)>,
    out: &Path,
) -> Result<AttackReport> {
    cfg.validate()?;
    let text = std::fs::read_to_string(plan_path).map_err(|e| Error::Io {
        path: plan_path.to_path_buf(),
        source: e,
    })?;
    let plan = AttackPlan::from_json(&text)?;
    let pair = match (plan.pair, pair_override) {
        (Some(recorded), Some(wanted)) if recorded != wanted => {
            return Err(Error::MalformedPlan(format!(
                "plan was made for pair ({}, {}), not ({}, {})",
                recorded.0, recorded.1, wanted.0, wanted.1
            )));
        }
        (Some(recorded), _) => recorded,
        (None, Some(wanted)) => wanted,
        (None, None) => {
            return Err(Error::MalformedPlan(
                "plan records no frame pair; pass --frame-i/--frame-j".into(),
            ));
        }
    };
    let ctx = prepare_one(cfg, pair)?;
    let outcome = replay_cell(&ctx, &plan, cfg)?;
    write_attack_outputs(cfg, &ctx, &outcome, out)
}

/// Rebuilds the metric charts from an existing `summary.csv`, showing
/// the slice at the file's first side and yaw.
pub fn plot_summary(summary_path: &Path, out: &Path) -> Result<()> {
    let rows = read_summary(summary_path)?;
    let first = rows.first().ok_or(Error::EmptyInput)?;
    write_metric_charts(&rows, first.cell.side, first.cell.yaw, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn synth_dataset() -> (TempDir, RunConfig) {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let params = SynthParams {
            frames: 3,
            seed: 14,
            range: 12.0,
            n_buildings: 4,
            n_trees: 4,
            ..SynthParams::default()
        };
        let ds = synthesize(&params).unwrap();
        write_kitti(&ds, &data, "00").unwrap();
        let cfg = RunConfig {
            dataset: data,
            k_values: vec![4],
            ..RunConfig::default()
        };
        (dir, cfg)
    }

    #[test]
    fn attack_then_replay_is_identical() {
        let (dir, cfg) = synth_dataset();
        let out_a = dir.path().join("attack");
        let out_r = dir.path().join("replay");
        let attacked = attack_pair(&cfg, (0, 1), None, &out_a).unwrap();
        assert!(attacked.removed_points > 0);
        let replayed = replay_plan(&cfg, &out_a.join("plan.json"), None, &out_r).unwrap();
        assert_eq!(replayed.attacked, attacked.attacked);
        assert_eq!(replayed.removed_points, attacked.removed_points);
        assert!(out_a.join("attacked_src.ply").exists());
        assert!(out_r.join("occlusion.csv").exists());
    }

    #[test]
    fn replay_rejects_a_conflicting_pair() {
        let (dir, cfg) = synth_dataset();
        let out = dir.path().join("attack");
        attack_pair(&cfg, (0, 1), None, &out).unwrap();
        let err = replay_plan(&cfg, &out.join("plan.json"), Some((1, 2)), &dir.path().join("r"));
        assert!(matches!(err, Err(Error::MalformedPlan(_))));
    }

    #[test]
    fn gen_synth_writes_params_and_scans() {
        let dir = tempfile::tempdir().unwrap();
        let params = gen_synth(None, Some(3), "07", dir.path()).unwrap();
        assert_eq!(params.seed, 3);
        assert!(dir.path().join("sequences/07/velodyne/000000.bin").exists());
        assert!(dir.path().join("poses/07.txt").exists());
        assert!(dir.path().join("synth_params.json").exists());
    }
}
