//! Attack planning: candidate scoring, selection strategies, physical
//! feasibility screening, and patch placement.
//!
//! The pipeline for one frame pair (reference scan i, source scan j):
//!
//! 1. register the pair and pull scored correspondences
//!    ([`extract_candidates`]),
//! 2. pick the K highest / lowest / random candidates ([`select`]),
//! 3. drop physically unreachable positions ([`screen`]): too high above
//!    ground, on the vehicle's path, or angularly shadowed by a nearer
//!    candidate,
//! 4. drop a square absorbing patch one meter sensor-ward of each
//!    survivor ([`place_patches`]).
//!
//! Candidate geometry lives in two frames: `position_ref` is the
//! canonical reference-frame location (what the plan targets), while
//! `position_src` is the same point in the source scan's sensor frame,
//! where screening geometry and patch placement are defined.

mod ground;
mod place;
mod saliency;
mod screen;

pub use ground::{estimate_ground, GroundModel};
pub use place::place_patches;
pub use saliency::{extract_candidates, extract_candidates_including, normalize_scores, select};
pub use screen::{screen, ScreenParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::Vec3;

/// Where a candidate's raw score came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    CorrespondenceWeight,
    KeypointSaliency,
    NdtCellScore,
}

/// A keypoint region the attack may hide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    /// Position in the reference scan's frame.
    pub position_ref: Vec3,
    /// The same position in the source scan's sensor frame.
    pub position_src: Vec3,
    pub raw_score: f64,
    /// `(S − S_min) / (S_max − S_min)` over the candidate's batch.
    pub norm_score: f64,
    pub source_of_score: ScoreSource,
}

/// Selection strategy over scored candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    TopK,
    RandK,
    MinK,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::TopK => "topk",
            Strategy::RandK => "randk",
            Strategy::MinK => "mink",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topk" => Ok(Strategy::TopK),
            "randk" => Ok(Strategy::RandK),
            "mink" => Ok(Strategy::MinK),
            other => Err(Error::InvalidParam(format!(
                "unknown strategy {other:?} (expected topk, randk, or mink)"
            ))),
        }
    }
}

/// A square absorbing patch standing upright in the source scan's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    /// Patch center (meters, source-scan sensor frame).
    pub center: Vec3,
    /// Edge length L in meters.
    pub side: f64,
    /// Deviation of the normal from sensor-facing, in degrees.
    pub yaw_offset_deg: f64,
    /// Horizontal unit normal.
    pub normal: Vec3,
}

impl Patch {
    pub fn validate(&self) -> Result<()> {
        if !(self.side > 0.0) || !self.side.is_finite() {
            return Err(Error::InvalidParam(format!(
                "patch side must be positive, got {}",
                self.side
            )));
        }
        if !(self.yaw_offset_deg.abs() <= 90.0) {
            return Err(Error::InvalidParam(format!(
                "patch yaw offset must lie in [-90, 90], got {}",
                self.yaw_offset_deg
            )));
        }
        if self.normal.z.abs() > 1e-9 || (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(
                "patch normal must be horizontal and unit length".into(),
            ));
        }
        if !self.center.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("patch center must be finite".into()));
        }
        Ok(())
    }
}

/// A complete, replayable occlusion plan for one frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub strategy: Strategy,
    pub k: usize,
    pub patches: Vec<Patch>,
    /// Sampling seed; only meaningful for Rand-K.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// (reference frame, source frame) the plan was made for, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(usize, usize)>,
}

impl AttackPlan {
    pub fn validate(&self) -> Result<()> {
        if self.patches.len() > self.k {
            return Err(Error::MalformedPlan(format!(
                "{} patches exceed k = {}",
                self.patches.len(),
                self.k
            )));
        }
        for p in &self.patches {
            p.validate()
                .map_err(|e| Error::MalformedPlan(e.to_string()))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::MalformedPlan(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: AttackPlan =
            serde_json::from_str(text).map_err(|e| Error::MalformedPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_patch() -> Patch {
        Patch {
            center: Vec3::new(9.0, 0.0, 1.5),
            side: 2.0,
            yaw_offset_deg: 0.0,
            normal: Vec3::new(-1.0, 0.0, 0.0),
        }
    }

    #[test]
    fn plan_round_trips_through_json() {
        let plan = AttackPlan {
            strategy: Strategy::RandK,
            k: 5,
            patches: vec![sample_patch()],
            seed: Some(7),
            pair: Some((0, 1)),
        };
        let text = plan.to_json().unwrap();
        let back = AttackPlan::from_json(&text).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn plan_with_too_many_patches_is_malformed() {
        let plan = AttackPlan {
            strategy: Strategy::TopK,
            k: 0,
            patches: vec![sample_patch()],
            seed: None,
            pair: None,
        };
        assert!(matches!(plan.validate(), Err(Error::MalformedPlan(_))));
    }

    #[test]
    fn tilted_normal_is_rejected() {
        let mut p = sample_patch();
        p.normal = Vec3::new(-0.9, 0.0, 0.43589).normalize();
        assert!(p.validate().is_err());
    }

    #[test]
    fn garbage_json_is_malformed() {
        assert!(matches!(
            AttackPlan::from_json("{not json"),
            Err(Error::MalformedPlan(_))
        ));
    }

    #[test]
    fn strategy_strings_round_trip() {
        for s in [Strategy::TopK, Strategy::RandK, Strategy::MinK] {
            let text = s.to_string();
            assert_eq!(text.parse::<Strategy>().unwrap(), s);
        }
        assert!("best-k".parse::<Strategy>().is_err());
    }
}
