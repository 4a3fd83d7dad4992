//! Candidate extraction from registration output, score normalization,
//! and the three selection strategies.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::registration::{RegistrationResult, ScoredKeypoint};
use crate::se3::RigidTransform;

use super::{ScoreSource, ScoredCandidate, Strategy};

/// Min-max normalizes raw scores into [0, 1].
///
/// A constant batch (including a single score) maps to 0.5 everywhere.
pub fn normalize_scores(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    if raw.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParam("scores must be finite".into()));
    }
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if span <= 0.0 {
        return Ok(vec![0.5; raw.len()]);
    }
    Ok(raw.iter().map(|s| (s - min) / span).collect())
}

/// Turns a registration's correspondences into scored attack candidates.
///
/// Each correspondence contributes one candidate at its source point,
/// scored by the correspondence weight. `gt` maps source-frame points
/// into the reference frame and fixes `position_ref`.
pub fn extract_candidates(
    result: &RegistrationResult,
    src: &PointCloud,
    gt: &RigidTransform,
) -> Result<Vec<ScoredCandidate>> {
    extract_candidates_including(result, src, gt, &[])
}

/// Like [`extract_candidates`], but also admits detected keypoints that
/// the matcher left unmatched, scored by their detector saliency.
///
/// Scores from both sources are normalized as one batch.
pub fn extract_candidates_including(
    result: &RegistrationResult,
    src: &PointCloud,
    gt: &RigidTransform,
    unmatched: &[ScoredKeypoint],
) -> Result<Vec<ScoredCandidate>> {
    if result.correspondences.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut positions = Vec::new();
    let mut raw = Vec::new();
    let mut sources = Vec::new();
    for corr in &result.correspondences {
        if corr.src_index >= src.len() {
            return Err(Error::InvalidParam(format!(
                "correspondence source index {} out of range for {} points",
                corr.src_index,
                src.len()
            )));
        }
        positions.push(src.points[corr.src_index]);
        raw.push(corr.weight);
        sources.push(ScoreSource::CorrespondenceWeight);
    }
    let matched: std::collections::BTreeSet<usize> = result
        .correspondences
        .iter()
        .map(|c| c.src_index)
        .collect();
    for kp in unmatched {
        if matched.contains(&kp.index) {
            continue;
        }
        positions.push(kp.position);
        raw.push(kp.score);
        sources.push(ScoreSource::KeypointSaliency);
    }
    let norm = normalize_scores(&raw)?;
    Ok(positions
        .iter()
        .zip(raw.iter().zip(norm.iter().zip(sources.iter())))
        .map(|(p, (r, (n, s)))| ScoredCandidate {
            position_ref: gt.apply(p),
            position_src: *p,
            raw_score: *r,
            norm_score: *n,
            source_of_score: *s,
        })
        .collect())
}

/// Selects k candidates by strategy.
///
/// Top-K takes the highest normalized scores, Min-K the lowest, and
/// Rand-K a uniform sample without replacement driven by `seed`. Score
/// ties resolve toward the lower original index. `k = 0` yields an
/// empty plan and `k > len` yields everything.
pub fn select(
    candidates: &[ScoredCandidate],
    strategy: Strategy,
    k: usize,
    seed: u64,
) -> Vec<ScoredCandidate> {
    let n = candidates.len();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    match strategy {
        Strategy::TopK => {
            order.sort_by(|&a, &b| {
                candidates[b].norm_score.total_cmp(&candidates[a].norm_score).then(a.cmp(&b))
            });
            order.truncate(k);
        }
        Strategy::MinK => {
            order.sort_by(|&a, &b| {
                candidates[a].norm_score.total_cmp(&candidates[b].norm_score).then(a.cmp(&b))
            });
            order.truncate(k);
        }
        Strategy::RandK => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..k {
                let j = rng.random_range(i..n);
                order.swap(i, j);
            }
            order.truncate(k);
            order.sort_unstable();
        }
    }
    order.into_iter().map(|i| candidates[i]).collect()
}
