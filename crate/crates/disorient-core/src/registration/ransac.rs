//! Seeded RANSAC over keypoint correspondences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{weighted_kabsch, Correspondence, RegistrationResult, ScoredKeypoint};
use crate::error::{Error, Result};
use crate::se3::RigidTransform;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub iterations: usize,
    /// Residual below which a correspondence counts as an inlier (meters).
    pub inlier_threshold: f64,
    /// Hypotheses with fewer inliers than this are rejected.
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 1024,
            inlier_threshold: 0.3,
            min_inliers: 5,
            seed: 0,
        }
    }
}

/// Robust alignment of matched keypoints: 3-point hypotheses from a
/// seeded ChaCha stream, inlier counting, then a weighted refit on the
/// best hypothesis' inliers using the correspondence confidences.
///
/// Identical inputs and seed give bit-identical output.
pub fn ransac_register(
    corrs: &[Correspondence],
    kp_a: &[ScoredKeypoint],
    kp_b: &[ScoredKeypoint],
    params: &RansacParams,
) -> Result<RegistrationResult> {
    if corrs.len() < 3 {
        return Err(Error::TooFewCorrespondences {
            needed: 3,
            have: corrs.len(),
        });
    }
    if params.min_inliers < 3 || params.iterations == 0 {
        return Err(Error::InvalidParam(
            "ransac needs min_inliers ≥ 3 and at least one iteration".into(),
        ));
    }
    let src: Vec<_> = corrs.iter().map(|c| kp_a[c.src_index].position).collect();
    let tgt: Vec<_> = corrs.iter().map(|c| kp_b[c.tgt_index].position).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best_inliers: Vec<usize> = Vec::new();

    for _ in 0..params.iterations {
        let mut sample = [0usize; 3];
        sample[0] = rng.random_range(0..corrs.len());
        loop {
            sample[1] = rng.random_range(0..corrs.len());
            if sample[1] != sample[0] {
                break;
            }
        }
        loop {
            sample[2] = rng.random_range(0..corrs.len());
            if sample[2] != sample[0] && sample[2] != sample[1] {
                break;
            }
        }
        let s: Vec<_> = sample.iter().map(|&i| src[i]).collect();
        let t: Vec<_> = sample.iter().map(|&i| tgt[i]).collect();
        let hyp = match weighted_kabsch(&s, &t, &[1.0; 3]) {
            Ok(h) => h,
            Err(_) => continue,
        };
        let inliers: Vec<usize> = (0..corrs.len())
            .filter(|&i| (hyp.apply(&src[i]) - tgt[i]).norm() < params.inlier_threshold)
            .collect();
        if inliers.len() > best_inliers.len() {
            best_inliers = inliers;
        }
    }

    if best_inliers.len() < params.min_inliers {
        return Ok(RegistrationResult::failed(
            RigidTransform::identity(),
            params.iterations,
        ));
    }

    let refit = |inliers: &[usize]| -> Result<(RigidTransform, Vec<f64>)> {
        let in_src: Vec<_> = inliers.iter().map(|&i| src[i]).collect();
        let in_tgt: Vec<_> = inliers.iter().map(|&i| tgt[i]).collect();
        let mut weights: Vec<f64> = inliers.iter().map(|&i| corrs[i].weight).collect();
        if weights.iter().filter(|w| **w > 0.0).count() < 3 {
            weights = vec![1.0; inliers.len()];
        }
        let transform = match weighted_kabsch(&in_src, &in_tgt, &weights) {
            Ok(t) => t,
            Err(Error::DegenerateGeometry(_)) => {
                weighted_kabsch(&in_src, &in_tgt, &vec![1.0; inliers.len()])?
            }
            Err(e) => return Err(e),
        };
        Ok((transform, weights))
    };

    // Refit to a fixpoint: the reported model's own residuals define the
    // reported inlier set, not the winning 3-point hypothesis' residuals.
    let (mut transform, mut weights) = refit(&best_inliers)?;
    for _ in 0..8 {
        let again: Vec<usize> = (0..corrs.len())
            .filter(|&i| (transform.apply(&src[i]) - tgt[i]).norm() < params.inlier_threshold)
            .collect();
        if again.len() < params.min_inliers || again == best_inliers {
            break;
        }
        best_inliers = again;
        (transform, weights) = refit(&best_inliers)?;
    }

    let correspondences: Vec<Correspondence> =
        best_inliers.iter().map(|&i| corrs[i]).collect();
    let mut sq = 0.0;
    let mut wsum = 0.0;
    for (k, &i) in best_inliers.iter().enumerate() {
        let w = weights[k];
        sq += w * (transform.apply(&src[i]) - tgt[i]).norm_squared();
        wsum += w;
    }
    let residual = (sq / wsum).sqrt();

    Ok(RegistrationResult {
        transform,
        correspondences,
        converged: true,
        iterations: params.iterations,
        residual,
    })
}
