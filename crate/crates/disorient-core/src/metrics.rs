//! Localization error metrics: RRE, RTE, registration recall, trajectory
//! chaining, and vulnerable-pair mining.

use crate::error::{Error, Result};
use crate::se3::{Mat3, RigidTransform, Trajectory, Vec3};

/// Per-pair registration error. Non-converged registrations carry the
/// errors of the identity estimate: dropping them would flatter an attack
/// on the recall metric while hiding its failures.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PairError {
    pub pair_id: (usize, usize),
    pub rre_deg: f64,
    pub rte_m: f64,
    pub converged: bool,
}

/// Evaluation thresholds and pair striding.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub rre_threshold_deg: f64,
    pub rte_threshold_m: f64,
    pub frame_stride: usize,
    pub vulnerable_rre_deg: f64,
    pub vulnerable_rte_m: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            rre_threshold_deg: 0.5,
            rte_threshold_m: 0.3,
            frame_stride: 1,
            vulnerable_rre_deg: 15.0,
            vulnerable_rte_m: 2.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rre_threshold_deg,
            self.rte_threshold_m,
            self.frame_stride as f64,
            self.vulnerable_rre_deg,
            self.vulnerable_rte_m,
        ];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParam(
                "evaluation thresholds and stride must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Relative rotation error in degrees: the geodesic angle
/// `arccos((trace(R_gtᵀ·R_est) − 1) / 2)`.
///
/// Evaluated as `atan2(sin θ, cos θ)` with `sin θ` taken from the
/// skew part of `R_gtᵀ·R_est`. The direct arccos form loses half the
/// significant digits near θ = 0 (it cannot resolve below ~1e-6°),
/// which would drown the recovery error of an exact solver.
pub fn rre(r_est: &Mat3, r_gt: &Mat3) -> f64 {
    let q = r_gt.transpose() * r_est;
    let cos_theta = (q.trace() - 1.0) / 2.0;
    let sin_theta = Vec3::new(
        q[(2, 1)] - q[(1, 2)],
        q[(0, 2)] - q[(2, 0)],
        q[(1, 0)] - q[(0, 1)],
    )
    .norm()
        / 2.0;
    sin_theta.atan2(cos_theta).to_degrees()
}

/// Relative translation error in meters.
pub fn rte(t_est: &Vec3, t_gt: &Vec3) -> f64 {
    (t_est - t_gt).norm()
}

/// Scores one pair against ground truth. A non-converged estimate is
/// replaced by the identity transform before scoring.
pub fn score_pair(
    pair_id: (usize, usize),
    estimate: &RigidTransform,
    converged: bool,
    gt: &RigidTransform,
) -> PairError {
    let used = if converged {
        *estimate
    } else {
        RigidTransform::identity()
    };
    PairError {
        pair_id,
        rre_deg: rre(&used.rotation, &gt.rotation),
        rte_m: rte(&used.translation, &gt.translation),
        converged,
    }
}

/// Fraction of pairs with RRE and RTE strictly below the thresholds.
/// Non-converged pairs count as failures outright.
pub fn registration_recall(errors: &[PairError], cfg: &EvalConfig) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = errors
        .iter()
        .filter(|e| {
            e.converged && e.rre_deg < cfg.rre_threshold_deg && e.rte_m < cfg.rte_threshold_m
        })
        .count();
    Ok(hits as f64 / errors.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean_rre_deg: f64,
    pub mean_rte_m: f64,
    pub recall: f64,
    pub n_pairs: usize,
}

/// Unweighted means over every pair (converged or not) plus recall.
pub fn summarize(errors: &[PairError], cfg: &EvalConfig) -> Result<Summary> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = errors.len() as f64;
    Ok(Summary {
        mean_rre_deg: errors.iter().map(|e| e.rre_deg).sum::<f64>() / n,
        mean_rte_m: errors.iter().map(|e| e.rte_m).sum::<f64>() / n,
        recall: registration_recall(errors, cfg)?,
        n_pairs: errors.len(),
    })
}

/// Chains relative transforms into absolute poses: pose₀ = identity,
/// poseₖ = poseₖ₋₁ ∘ relₖ. Output length is `rel.len() + 1`.
pub fn chain_trajectory(rel: &[RigidTransform]) -> Trajectory {
    let mut poses = Vec::with_capacity(rel.len() + 1);
    poses.push(RigidTransform::identity());
    for r in rel {
        let last = *poses.last().expect("seeded with identity");
        poses.push(last.compose(r));
    }
    let frame_ids = (0..poses.len()).collect();
    Trajectory { poses, frame_ids }
}

/// Pairs whose error exceeds either vulnerability threshold, sorted by
/// descending RTE (ties by pair id for determinism).
pub fn find_vulnerable_pairs(errors: &[PairError], cfg: &EvalConfig) -> Vec<(usize, usize)> {
    let mut hits: Vec<&PairError> = errors
        .iter()
        .filter(|e| e.rre_deg > cfg.vulnerable_rre_deg || e.rte_m > cfg.vulnerable_rte_m)
        .collect();
    hits.sort_by(|a, b| {
        b.rte_m
            .partial_cmp(&a.rte_m)
            .expect("errors are finite")
            .then(a.pair_id.cmp(&b.pair_id))
    });
    hits.into_iter().map(|e| e.pair_id).collect()
}
