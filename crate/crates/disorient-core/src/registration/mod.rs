//! Registration backends used as attack victims.
//!
//! Three classical pipelines stand in for the learned registration models
//! the attack literature targets: a weighted-SVD ICP loop, NDT scan
//! matching against per-voxel Gaussians, and a keypoint pipeline
//! (surface-variation detector, FPFH-style descriptors, mutual matching,
//! seeded RANSAC). All three expose scored correspondences through the
//! same [`RegistrationResult`], which is the surface the attack planner
//! consumes; none of them is claimed equivalent to the networks they
//! replace.

mod features;
mod icp;
mod kabsch;
mod ndt;
mod ransac;

pub use features::{
    compute_descriptors, detect_keypoints, match_descriptors, DetectorParams, FeatureParams,
    ScoredKeypoint, DESCRIPTOR_BINS,
};
pub use icp::{icp_register, IcpParams};
pub use kabsch::weighted_kabsch;
pub use ndt::{
    assign_keys, gradient_at, ndt_build, ndt_register, pose6_to_transform, score_at,
    score_frozen, transform_to_pose6, NdtGrid, NdtParams, Pose6,
};
pub use ransac::{ransac_register, RansacParams};

use crate::cloud::PointCloud;
use crate::error::Result;
use crate::se3::RigidTransform;

/// A matched pair between two scans.
///
/// For ICP and the feature pipeline both indices point into the scans'
/// point arrays. For NDT, `tgt_index` is the ordinal of the grid cell
/// (in cell-key order) the source point fell into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src_index: usize,
    pub tgt_index: usize,
    /// Confidence in [0, 1].
    pub weight: f64,
}

/// Outcome of one registration attempt. `transform` maps source
/// coordinates into the target frame.
#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub transform: RigidTransform,
    pub correspondences: Vec<Correspondence>,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted RMS point residual in meters; infinite when the backend
    /// never found a usable correspondence set.
    pub residual: f64,
}

impl RegistrationResult {
    pub fn failed(transform: RigidTransform, iterations: usize) -> Self {
        Self {
            transform,
            correspondences: Vec::new(),
            converged: false,
            iterations,
            residual: f64::INFINITY,
        }
    }
}

/// Which registration pipeline plays the victim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Icp,
    Ndt,
    Feature,
}

impl std::str::FromStr for Backend {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "icp" => Ok(Backend::Icp),
            "ndt" => Ok(Backend::Ndt),
            "feature" => Ok(Backend::Feature),
            other => Err(crate::error::Error::InvalidParam(format!(
                "unknown backend {other:?} (expected icp, ndt, or feature)"
            ))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Icp => "icp",
            Backend::Ndt => "ndt",
            Backend::Feature => "feature",
        })
    }
}

/// Parameters for all backends, so a run can switch victims without
/// reshaping its config.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RegistrationParams {
    pub icp: IcpParams,
    pub ndt: NdtParams,
    /// NDT grid cell edge in meters.
    pub ndt_cell: f64,
    pub feature: FeatureParams,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            icp: IcpParams::default(),
            ndt: NdtParams::default(),
            ndt_cell: 2.0,
            feature: FeatureParams::default(),
        }
    }
}

/// Runs the selected backend. `init` seeds ICP and NDT; the feature
/// pipeline registers globally and ignores it.
pub fn register(
    backend: Backend,
    src: &PointCloud,
    tgt: &PointCloud,
    init: &RigidTransform,
    params: &RegistrationParams,
) -> Result<RegistrationResult> {
    match backend {
        Backend::Icp => icp_register(src, tgt, init, &params.icp),
        Backend::Ndt => {
            let grid = ndt_build(tgt, params.ndt_cell)?;
            ndt_register(src, &grid, init, &params.ndt)
        }
        Backend::Feature => features::feature_register(src, tgt, &params.feature),
    }
}

pub use features::feature_register;
