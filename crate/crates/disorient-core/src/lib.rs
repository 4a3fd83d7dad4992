//! Key-region-hiding attacks on LiDAR point-cloud registration.
//!
//! The crate covers the full loop of the attack study:
//!
//! 1. score keypoints on a reference scan and pick the regions a
//!    registration pipeline leans on ([`attack`]),
//! 2. plan physically feasible occlusion patches over those regions and
//!    simulate their shadows in later scans ([`occlusion`]),
//! 3. re-register the occluded scans with ICP, NDT, or a feature pipeline
//!    ([`registration`]) and measure the localization damage ([`metrics`]),
//! 4. flag suspicious occlusions from scan data alone ([`defense`]).
//!
//! Everything is deterministic for a fixed seed: random choices run on
//! seeded ChaCha streams and float reductions use fixed-shape chunking
//! ([`parallel`]), so results are reproducible across thread counts.

pub mod attack;
pub mod cloud;
pub mod defense;
pub mod error;
pub mod kitti;
pub mod metrics;
pub mod occlusion;
pub mod parallel;
pub mod registration;
pub mod se3;
pub mod spatial;
pub mod synth;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use se3::{Mat3, RigidTransform, Trajectory, Vec3};
