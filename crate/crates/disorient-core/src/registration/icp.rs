//! Point-to-point ICP with a nearest-neighbour distance gate.

use super::{weighted_kabsch, Correspondence, RegistrationResult};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::se3::RigidTransform;
use crate::spatial::KdTree;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iter: usize,
    /// Nearest-neighbour matches farther than this are dropped (meters).
    pub gate: f64,
    /// Stop when the relative residual change falls below this.
    pub tol: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iter: 50,
            gate: 2.0,
            tol: 1e-6,
        }
    }
}

/// Iterates gated nearest-neighbour matching and uniform-weight
/// closed-form alignment from `init` until the residual settles.
///
/// An iteration with no matches inside the gate ends the loop with
/// `converged = false` rather than an error, so sweeps can record the
/// failure and move on.
pub fn icp_register(
    src: &PointCloud,
    tgt: &PointCloud,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<RegistrationResult> {
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if params.gate <= 0.0 || params.max_iter == 0 {
        return Err(Error::InvalidParam(
            "icp needs a positive gate and at least one iteration".into(),
        ));
    }
    let tree = KdTree::build(&tgt.points)?;

    let mut transform = *init;
    let mut prev_residual = f64::INFINITY;
    let mut correspondences: Vec<Correspondence> = Vec::new();

    for iter in 1..=params.max_iter {
        correspondences.clear();
        for (i, p) in src.points.iter().enumerate() {
            let moved = transform.apply(p);
            let (d, j) = tree.nearest_one(&moved);
            if d <= params.gate {
                correspondences.push(Correspondence {
                    src_index: i,
                    tgt_index: j,
                    weight: 1.0,
                });
            }
        }
        if correspondences.is_empty() {
            return Ok(RegistrationResult::failed(transform, iter));
        }

        let src_pts: Vec<_> = correspondences
            .iter()
            .map(|c| src.points[c.src_index])
            .collect();
        let tgt_pts: Vec<_> = correspondences
            .iter()
            .map(|c| tgt.points[c.tgt_index])
            .collect();
        let weights = vec![1.0; correspondences.len()];
        transform = match weighted_kabsch(&src_pts, &tgt_pts, &weights) {
            Ok(t) => t,
            // Matches collapsed onto a line; report the stall instead of
            // aborting the whole run.
            Err(Error::DegenerateGeometry(_)) | Err(Error::TooFewCorrespondences { .. }) => {
                return Ok(RegistrationResult::failed(transform, iter));
            }
            Err(e) => return Err(e),
        };

        let sq_sum: f64 = correspondences
            .iter()
            .map(|c| (transform.apply(&src.points[c.src_index]) - tgt.points[c.tgt_index]).norm_squared())
            .sum();
        let residual = (sq_sum / correspondences.len() as f64).sqrt();

        let settled = residual < 1e-12
            || (prev_residual.is_finite()
                && (prev_residual - residual).abs() <= params.tol * prev_residual.max(1e-12));
        if settled {
            return Ok(RegistrationResult {
                transform,
                correspondences,
                converged: true,
                iterations: iter,
                residual,
            });
        }
        prev_residual = residual;
    }

    Ok(RegistrationResult {
        transform,
        correspondences,
        converged: false,
        iterations: params.max_iter,
        residual: prev_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{rot_z, Vec3};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense unstructured volume: no surface for point-to-point matches
    /// to slide along, so exact-copy registration can lock in tightly.
    fn structured_scene(seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..2500)
            .map(|_| {
                Vec3::new(
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..3.0),
                )
            })
            .collect();
        PointCloud::new(pts)
    }

    #[test]
    fn self_registration_is_identity_in_one_iteration() {
        let scene = structured_scene(1);
        let r = icp_register(
            &scene,
            &scene,
            &RigidTransform::identity(),
            &IcpParams::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_abs_diff_eq!(r.transform.rotation, nalgebra::Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.transform.translation, Vec3::zeros(), epsilon = 1e-12);
        assert_eq!(r.correspondences.len(), scene.len());
    }

    #[test]
    fn small_offset_is_recovered() {
        // Oracle: apply a known transform and recover it.
        let scene = structured_scene(2);
        let gt = RigidTransform {
            rotation: rot_z(2.0_f64.to_radians()),
            translation: Vec3::new(0.1, 0.05, 0.0),
        };
        // Source = scene moved by gt⁻¹ so that registering source→target
        // should estimate gt.
        let src = crate::cloud::transform_cloud(&scene, &gt.invert());
        let r = icp_register(&src, &scene, &RigidTransform::identity(), &IcpParams::default())
            .unwrap();
        assert!(r.converged);
        let rre = crate::metrics::rre(&r.transform.rotation, &gt.rotation);
        assert!(rre < 0.1, "RRE {rre}° too large");
        assert!((r.transform.translation - gt.translation).norm() < 0.01);
    }

    #[test]
    fn far_clouds_fail_to_converge() {
        let scene = structured_scene(3);
        let far = crate::cloud::transform_cloud(
            &scene,
            &RigidTransform::from_translation(Vec3::new(100.0, 0.0, 0.0)),
        );
        let r = icp_register(&scene, &far, &RigidTransform::identity(), &IcpParams::default())
            .unwrap();
        assert!(!r.converged);
        assert!(r.correspondences.is_empty());
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let scene = structured_scene(4);
        let empty = PointCloud::default();
        assert!(icp_register(&empty, &scene, &RigidTransform::identity(), &IcpParams::default())
            .is_err());
    }
}
