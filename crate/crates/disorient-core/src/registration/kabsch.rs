//! Weighted closed-form alignment.
//!
//! Solves argmin over {R, t} of the weighted sum of squared residuals
//! `Σ wᵢ ‖R pᵢ + t − qᵢ‖²` by weighted centroiding followed by an SVD of
//! the weighted cross-covariance, with the usual sign correction that
//! keeps the solution a proper rotation.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::se3::{RigidTransform, Vec3};

/// Relative rank threshold below which the cross-covariance is treated
/// as collinear (minimizing rotation not unique).
const RANK_TOL: f64 = 1e-12;

pub fn weighted_kabsch(src: &[Vec3], tgt: &[Vec3], weights: &[f64]) -> Result<RigidTransform> {
    if src.len() != tgt.len() || src.len() != weights.len() {
        return Err(Error::InvalidParam(format!(
            "kabsch inputs differ in length: {} src, {} tgt, {} weights",
            src.len(),
            tgt.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParam(
            "kabsch weights must be finite and non-negative".into(),
        ));
    }
    let effective = weights.iter().filter(|w| **w > 0.0).count();
    if effective < 3 {
        return Err(Error::TooFewCorrespondences {
            needed: 3,
            have: effective,
        });
    }

    let total: f64 = weights.iter().sum();
    let mut centroid_src = Vec3::zeros();
    let mut centroid_tgt = Vec3::zeros();
    for i in 0..src.len() {
        centroid_src += weights[i] * src[i];
        centroid_tgt += weights[i] * tgt[i];
    }
    centroid_src /= total;
    centroid_tgt /= total;

    let mut cross = Matrix3::zeros();
    for i in 0..src.len() {
        let p = src[i] - centroid_src;
        let q = tgt[i] - centroid_tgt;
        cross += weights[i] * p * q.transpose();
    }

    let svd = cross.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::DegenerateGeometry("cross-covariance SVD failed".into()))?;
    let v = svd
        .v_t
        .ok_or_else(|| Error::DegenerateGeometry("cross-covariance SVD failed".into()))?
        .transpose();
    let s = svd.singular_values;
    if s[1] <= RANK_TOL * s[0].max(1e-300) {
        return Err(Error::DegenerateGeometry(
            "correspondences are collinear; rotation is not unique".into(),
        ));
    }

    // Proper-rotation correction: flip the direction of the smallest
    // singular value when V·Uᵀ would be a reflection.
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let translation = centroid_tgt - rotation * centroid_src;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}
