//! Keypoint pipeline: surface-variation detector, FPFH-style descriptors,
//! and mutual-nearest-neighbour matching.
//!
//! This is the classical stand-in for learned keypoint registration. The
//! detector scores each candidate by surface variation λ₃/(λ₁+λ₂+λ₃) of
//! its neighbourhood covariance (λ₃ smallest), keeps local maxima, and
//! describes survivors with a 33-bin histogram of the standard (α, φ, θ)
//! point-pair features. Matching enforces bidirectional reciprocity and
//! weights each pair by one minus the Lowe ratio.

use std::collections::BTreeMap;

use super::{ransac_register, Correspondence, RansacParams, RegistrationResult};
use crate::cloud::PointCloud;
use crate::error::Result;
use crate::se3::Vec3;
use crate::spatial::KdTree;

pub const DESCRIPTOR_BINS: usize = 33;
const BINS_PER_FEATURE: usize = 11;

/// A detected keypoint. `index` points back into the cloud it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredKeypoint {
    pub index: usize,
    pub position: Vec3,
    /// Raw surface-variation saliency.
    pub score: f64,
    /// L1-normalized 33-bin descriptor.
    pub descriptor: Vec<f64>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    /// Candidate thinning voxel (meters); one candidate per occupied cell.
    pub thin_voxel: f64,
    /// Neighbourhood radius for the covariance score (meters).
    pub radius: f64,
    /// Non-maximum-suppression radius (meters).
    pub nms_radius: f64,
    /// Neighbourhoods smaller than this are skipped as degenerate.
    pub min_neighbors: usize,
    /// Candidates scoring below this never become keypoints.
    pub min_score: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            thin_voxel: 0.5,
            radius: 1.0,
            nms_radius: 1.0,
            min_neighbors: 5,
            min_score: 0.01,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub detector: DetectorParams,
    /// Descriptor support radius (meters).
    pub descriptor_radius: f64,
    pub ransac: RansacParams,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            descriptor_radius: 1.5,
            ransac: RansacParams::default(),
        }
    }
}

/// One representative (lowest index) point per occupied thinning voxel.
fn thin_candidates(cloud: &PointCloud, voxel: f64) -> Vec<usize> {
    let mut cells: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        cells.entry(key).or_insert(i);
    }
    cells.into_values().collect()
}

/// Surface variation of the neighbourhood at `center`: smallest covariance
/// eigenvalue over the trace. Planes score 0, corners score high.
fn surface_variation(points: &[Vec3], neighbors: &[usize]) -> Option<f64> {
    let n = neighbors.len() as f64;
    let mean = neighbors.iter().map(|&i| points[i]).sum::<Vec3>() / n;
    let mut cov = crate::se3::Mat3::zeros();
    for &i in neighbors {
        let d = points[i] - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let trace: f64 = eig.eigenvalues.iter().sum();
    if trace <= 0.0 {
        return None;
    }
    Some(eig.eigenvalues.min() / trace)
}

/// Detects surface-variation keypoints with non-maximum suppression and
/// attaches descriptors. Clouds smaller than the neighbourhood minimum
/// yield an empty list, not an error.
pub fn detect_keypoints(cloud: &PointCloud, params: &DetectorParams) -> Result<Vec<ScoredKeypoint>> {
    detect_keypoints_with(cloud, params, params.radius * 1.5)
}

fn detect_keypoints_with(
    cloud: &PointCloud,
    params: &DetectorParams,
    descriptor_radius: f64,
) -> Result<Vec<ScoredKeypoint>> {
    if cloud.len() < params.min_neighbors {
        return Ok(Vec::new());
    }
    let tree = KdTree::build(&cloud.points)?;

    let candidates = thin_candidates(cloud, params.thin_voxel);
    let scored: Vec<(usize, f64)> = crate::parallel::map_indexed(&candidates, |_, &i| {
        let neighbors = tree.within_radius(&cloud.points[i], params.radius);
        if neighbors.len() < params.min_neighbors {
            return None;
        }
        surface_variation(&cloud.points, &neighbors).map(|s| (i, s))
    })
    .into_iter()
    .flatten()
    .filter(|(_, s)| *s >= params.min_score)
    .collect();

    // Greedy NMS: best score first, ties to the lower point index.
    let mut order = scored;
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("scores are finite")
            .then(a.0.cmp(&b.0))
    });
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for (i, s) in order {
        let p = cloud.points[i];
        let suppressed = kept
            .iter()
            .any(|&(j, _)| (cloud.points[j] - p).norm() < params.nms_radius);
        if !suppressed {
            kept.push((i, s));
        }
    }
    kept.sort_by_key(|&(i, _)| i);

    let centers: Vec<usize> = kept.iter().map(|&(i, _)| i).collect();
    let descriptors = compute_descriptors(cloud, &centers, descriptor_radius)?;

    Ok(kept
        .into_iter()
        .zip(descriptors)
        .filter(|(_, d)| d.iter().any(|v| *v != 0.0))
        .map(|((index, score), descriptor)| ScoredKeypoint {
            index,
            position: cloud.points[index],
            score,
            descriptor,
        })
        .collect())
}

/// Normal at a point: smallest eigenvector of the neighbourhood
/// covariance, oriented toward the sensor origin.
fn estimate_normal(points: &[Vec3], neighbors: &[usize], at: &Vec3) -> Option<Vec3> {
    if neighbors.len() < 3 {
        return None;
    }
    let n = neighbors.len() as f64;
    let mean = neighbors.iter().map(|&i| points[i]).sum::<Vec3>() / n;
    let mut cov = crate::se3::Mat3::zeros();
    for &i in neighbors {
        let d = points[i] - mean;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut min_i = 0;
    for k in 1..3 {
        if eig.eigenvalues[k] < eig.eigenvalues[min_i] {
            min_i = k;
        }
    }
    let mut normal = eig.eigenvectors.column(min_i).into_owned();
    if normal.norm() == 0.0 {
        return None;
    }
    normal.normalize_mut();
    // Sign toward the origin (the sensor sees the facing side).
    if normal.dot(at) > 0.0 {
        normal = -normal;
    }
    Some(normal)
}

/// Accumulates the (α, φ, θ) histogram contribution of one ordered pair.
fn add_pair_features(hist: &mut [f64; DESCRIPTOR_BINS], ps: &Vec3, ns: &Vec3, pt: &Vec3, nt: &Vec3) {
    let mut d = pt - ps;
    let dist = d.norm();
    if dist < 1e-9 {
        return;
    }
    d /= dist;
    // Darboux convention: the point whose normal makes the smaller angle
    // with the connecting line acts as source.
    let (u, p_other_normal, dir) = if ns.dot(&d) >= nt.dot(&-d) {
        (*ns, *nt, d)
    } else {
        (*nt, *ns, -d)
    };
    let v_axis = dir.cross(&u);
    let v_norm = v_axis.norm();
    if v_norm < 1e-12 {
        return;
    }
    let v_axis = v_axis / v_norm;
    let w_axis = u.cross(&v_axis);

    let alpha = v_axis.dot(&p_other_normal);
    let phi = u.dot(&dir);
    let theta = w_axis.dot(&p_other_normal).atan2(u.dot(&p_other_normal));

    let bin = |value: f64, lo: f64, hi: f64| -> usize {
        let t = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
        ((t * BINS_PER_FEATURE as f64) as usize).min(BINS_PER_FEATURE - 1)
    };
    hist[bin(alpha, -1.0, 1.0)] += 1.0;
    hist[BINS_PER_FEATURE + bin(phi, -1.0, 1.0)] += 1.0;
    hist[2 * BINS_PER_FEATURE + bin(theta, -std::f64::consts::PI, std::f64::consts::PI)] += 1.0;
}

/// Simple point feature histogram of one center against its neighbours.
fn spfh(
    points: &[Vec3],
    normals: &mut [Option<Option<Vec3>>],
    tree: &KdTree,
    center: usize,
    radius: f64,
) -> [f64; DESCRIPTOR_BINS] {
    let mut hist = [0.0; DESCRIPTOR_BINS];
    let Some(nc) = normal_cached(points, normals, tree, center, radius) else {
        return hist;
    };
    let pc = points[center];
    for j in tree.within_radius(&pc, radius) {
        if j == center {
            continue;
        }
        if let Some(nj) = normal_cached(points, normals, tree, j, radius) {
            add_pair_features(&mut hist, &pc, &nc, &points[j], &nj);
        }
    }
    hist
}

fn normal_cached(
    points: &[Vec3],
    normals: &mut [Option<Option<Vec3>>],
    tree: &KdTree,
    i: usize,
    radius: f64,
) -> Option<Vec3> {
    if normals[i].is_none() {
        let neighbors = tree.within_radius(&points[i], radius);
        normals[i] = Some(estimate_normal(points, &neighbors, &points[i]));
    }
    normals[i].expect("just filled")
}

/// FPFH-style descriptors at the given cloud indices: each center's SPFH
/// plus the distance-weighted mean of its neighbours' SPFHs, then
/// L1-normalized. Isolated centers get the all-zero descriptor.
pub fn compute_descriptors(
    cloud: &PointCloud,
    centers: &[usize],
    radius: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(radius > 0.0) {
        return Err(crate::error::Error::InvalidParam(format!(
            "descriptor radius must be positive, got {radius}"
        )));
    }
    if centers.is_empty() {
        return Ok(Vec::new());
    }
    let tree = KdTree::build(&cloud.points)?;
    let points = &cloud.points;
    let mut normals: Vec<Option<Option<Vec3>>> = vec![None; points.len()];
    // SPFHs are memoized across centers; neighbours shared by two centers
    // are only computed once.
    let mut spfh_cache: BTreeMap<usize, [f64; DESCRIPTOR_BINS]> = BTreeMap::new();

    let mut out = Vec::with_capacity(centers.len());
    for &c in centers {
        let neighbors = tree.within_radius(&points[c], radius);
        if neighbors.iter().all(|&j| j == c) {
            out.push(vec![0.0; DESCRIPTOR_BINS]);
            continue;
        }
        if !spfh_cache.contains_key(&c) {
            let h = spfh(points, &mut normals, &tree, c, radius);
            spfh_cache.insert(c, h);
        }
        let mut fpfh: [f64; DESCRIPTOR_BINS] = spfh_cache[&c];
        let others: Vec<usize> = neighbors.into_iter().filter(|&j| j != c).collect();
        let k = others.len() as f64;
        for j in others {
            let dist = (points[j] - points[c]).norm();
            if dist < 1e-9 {
                continue;
            }
            if !spfh_cache.contains_key(&j) {
                let h = spfh(points, &mut normals, &tree, j, radius);
                spfh_cache.insert(j, h);
            }
            let hj = &spfh_cache[&j];
            let w = 1.0 / (k * dist);
            for b in 0..DESCRIPTOR_BINS {
                fpfh[b] += w * hj[b];
            }
        }
        let mass: f64 = fpfh.iter().sum();
        let desc = if mass > 0.0 {
            fpfh.iter().map(|v| v / mass).collect()
        } else {
            vec![0.0; DESCRIPTOR_BINS]
        };
        out.push(desc);
    }
    Ok(out)
}

fn descriptor_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Best and second-best neighbours of `desc` in `pool` by L2 distance,
/// ties to the lower index.
fn two_nearest(desc: &[f64], pool: &[ScoredKeypoint]) -> (usize, f64, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (j, kp) in pool.iter().enumerate() {
        let d = descriptor_distance(desc, &kp.descriptor);
        if d < best.1 {
            second = best.1;
            best = (j, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0, best.1, second)
}

/// Mutual-nearest-neighbour matching in descriptor space.
///
/// Returned indices are positions in the keypoint lists, not cloud
/// indices. The weight is the Lowe ratio complement `1 − d₁/d₂` from the
/// source side, with `d₂ = ∞` treated as weight 1 and an ambiguous
/// `d₂ = 0` as weight 0.
pub fn match_descriptors(kp_a: &[ScoredKeypoint], kp_b: &[ScoredKeypoint]) -> Vec<Correspondence> {
    if kp_a.is_empty() || kp_b.is_empty() {
        return Vec::new();
    }
    let best_ab: Vec<(usize, f64, f64)> =
        kp_a.iter().map(|a| two_nearest(&a.descriptor, kp_b)).collect();
    let best_ba: Vec<(usize, f64, f64)> =
        kp_b.iter().map(|b| two_nearest(&b.descriptor, kp_a)).collect();

    let mut out = Vec::new();
    for (i, &(j, d1, d2)) in best_ab.iter().enumerate() {
        if best_ba[j].0 != i {
            continue;
        }
        let weight = if d2 == 0.0 {
            0.0
        } else if d2.is_infinite() {
            1.0
        } else {
            (1.0 - d1 / d2).clamp(0.0, 1.0)
        };
        out.push(Correspondence {
            src_index: i,
            tgt_index: j,
            weight,
        });
    }
    out
}

/// Full keypoint pipeline: detect, describe, match, then seeded RANSAC.
/// Too few keypoints or matches yields a non-converged result rather than
/// an error, so featureless scenes are recorded, not fatal.
pub fn feature_register(
    src: &PointCloud,
    tgt: &PointCloud,
    params: &FeatureParams,
) -> Result<RegistrationResult> {
    if src.is_empty() || tgt.is_empty() {
        return Err(crate::error::Error::EmptyCloud);
    }
    let kp_src = detect_keypoints_with(src, &params.detector, params.descriptor_radius)?;
    let kp_tgt = detect_keypoints_with(tgt, &params.detector, params.descriptor_radius)?;
    let matches = match_descriptors(&kp_src, &kp_tgt);
    if matches.len() < 3 {
        return Ok(RegistrationResult::failed(
            crate::se3::RigidTransform::identity(),
            0,
        ));
    }
    let mut result = ransac_register(&matches, &kp_src, &kp_tgt, &params.ransac)?;
    // Remap keypoint-list indices to cloud point indices for downstream
    // consumers.
    for c in &mut result.correspondences {
        c.src_index = kp_src[c.src_index].index;
        c.tgt_index = kp_tgt[c.tgt_index].index;
    }
    Ok(result)
}
