//! Sequence-level void detection: walks consecutive scans, predicts
//! each from its predecessor, and tracks persistent unexplained voids.

use std::path::Path;

use disorient_core::attack::AttackPlan;
use disorient_core::cloud::PointCloud;
use disorient_core::defense::{detect_voids, predict_scan, VoidAlert, VoidTracker};
use disorient_core::occlusion::occlude;
use disorient_core::{Error, Result};

use crate::config::{OdometrySource, RunConfig};
use crate::dataset::Sequence;
use crate::pipeline::register_or_identity;
use crate::report::write_alerts;

/// Walks the first configured sequence at stride 1 and writes
/// `alerts.csv`. A plan occludes its recorded source frame before
/// detection (the plan's geometry lives in that scan's frame), so the
/// walk sees the same scans an attacked pipeline would.
pub fn run_detect_voids(
    cfg: &RunConfig,
    plan: Option<&AttackPlan>,
    out: &Path,
) -> Result<Vec<(usize, usize, VoidAlert)>> {
    cfg.validate()?;
    let seq = Sequence::new(&cfg.dataset, &cfg.sequences[0]);
    let n = seq.scan_count()?;
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "void detection needs at least 2 scans, got {n}"
        )));
    }
    let gt_traj = seq.load_gt()?;
    if gt_traj.len() < n {
        return Err(Error::InvalidParam(format!(
            "sequence {}: {} poses for {n} scans",
            seq.id,
            gt_traj.len()
        )));
    }
    let attacked_frame = match plan {
        Some(p) => Some(p.pair.ok_or_else(|| {
            Error::MalformedPlan("plan records no frame pair".into())
        })?.1),
        None => None,
    };

    let load = |frame: usize| -> Result<PointCloud> {
        let scan = seq.load_scan(frame)?;
        match plan {
            Some(p) if attacked_frame == Some(frame) => Ok(occlude(&scan, p, cfg.mode)?.0),
            _ => Ok(scan),
        }
    };

    let mut tracker = VoidTracker::new();
    let mut rows: Vec<(usize, usize, VoidAlert)> = Vec::new();
    let mut prev = load(0)?;
    for t in 1..n {
        let current = load(t)?;
        let odom = match cfg.odometry {
            OdometrySource::Gt => gt_traj.relative(t - 1, t),
            OdometrySource::Estimated => {
                register_or_identity(cfg.backend, &current, &prev, cfg).0
            }
        };
        let alerts = detect_voids(&predict_scan(&prev, &odom), &current, &cfg.defense)?;
        let tracked = tracker.observe(&alerts, &odom, cfg.defense.match_radius);
        for (cluster_id, alert) in tracked.into_iter().enumerate() {
            rows.push((t, cluster_id, alert));
        }
        prev = current;
    }
    write_alerts(&out.join("alerts.csv"), &rows)?;
    log::info!(
        "detect-voids: {} alerts over {} frames of sequence {}",
        rows.len(),
        n,
        seq.id
    );
    Ok(rows)
}
