//! Normal distributions transform scan matching.
//!
//! The reference scan is voxelized into per-cell Gaussians. Registration
//! maximizes the summed Gaussian score of the source points under a
//! 6-vector pose `[tx, ty, tz, rx, ry, rz]` (rotation composed as
//! `Rz(rz)·Ry(ry)·Rx(rx)`) by Newton steps with analytic gradient and
//! Hessian, Levenberg diagonal loading when the Hessian is not usable,
//! and a step-halving line search.
//!
//! The per-point score with cell mean μ and inverse covariance B is
//! `s = exp(−(x′−μ)ᵀB(x′−μ)/2)` where `x′ = R·p + t`. Writing q = x′−μ
//! and J = ∂x′/∂θ (3×6), the pieces used below are
//!
//!   ∂s/∂θ      = −s · Jᵀ B q
//!   ∂²s/∂θ∂θᵀ  =  s · (u uᵀ − Jᵀ B J − W),   u = Jᵀ B q,
//!
//! where W is nonzero only in the rotation block: W_kl = (Bq)·(∂²x′/∂θ_k∂θ_l).

use std::collections::BTreeMap;

use nalgebra::{Matrix6, Vector6};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::parallel;
use crate::se3::{rot_x, rot_y, rot_z, Mat3, RigidTransform, Vec3};

use super::{Correspondence, RegistrationResult};

/// Pose vector layout: `[tx, ty, tz, rx, ry, rz]`.
pub type Pose6 = Vector6<f64>;

pub type CellKey = (i64, i64, i64);

/// Eigenvalue floor relative to the largest eigenvalue.
const COV_EIGEN_FLOOR: f64 = 1e-3;
/// Absolute floor guarding cells whose points coincide exactly.
const COV_ABS_FLOOR: f64 = 1e-9;
/// Minimum points per retained cell.
const MIN_CELL_POINTS: usize = 5;

#[derive(Debug, Clone)]
pub struct NdtCell {
    pub mean: Vec3,
    pub cov: Mat3,
    pub inv_cov: Mat3,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct NdtGrid {
    pub cell_size: f64,
    cells: BTreeMap<CellKey, NdtCell>,
}

impl NdtGrid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn key_for(&self, p: &Vec3) -> CellKey {
        (
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
            (p.z / self.cell_size).floor() as i64,
        )
    }

    pub fn cell(&self, key: &CellKey) -> Option<&NdtCell> {
        self.cells.get(key)
    }

    pub fn cell_for(&self, p: &Vec3) -> Option<&NdtCell> {
        self.cells.get(&self.key_for(p))
    }

    /// Position of `key` in cell-key order; used as the target index of
    /// NDT correspondences.
    pub fn ordinal(&self, key: &CellKey) -> Option<usize> {
        self.cells.keys().position(|k| k == key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &NdtCell)> {
        self.cells.iter()
    }
}

fn regularize(cov: &Mat3) -> (Mat3, Mat3) {
    let eig = cov.symmetric_eigen();
    let max_ev = eig.eigenvalues.max();
    let floor = (COV_EIGEN_FLOOR * max_ev).max(COV_ABS_FLOOR);
    let fixed = eig.eigenvalues.map(|v| v.max(floor));
    let q = eig.eigenvectors;
    let cov_fixed = q * Mat3::from_diagonal(&fixed) * q.transpose();
    let inv = q * Mat3::from_diagonal(&fixed.map(|v| 1.0 / v)) * q.transpose();
    (cov_fixed, inv)
}

/// Builds the per-voxel Gaussian model of the reference scan. Cells with
/// fewer than 5 points are dropped; covariances are floored so that no
/// eigenvalue falls below 1e-3 of the largest.
pub fn ndt_build(tgt: &PointCloud, cell_size: f64) -> Result<NdtGrid> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::InvalidParam(format!(
            "ndt cell size must be positive, got {cell_size}"
        )));
    }
    let mut buckets: BTreeMap<CellKey, Vec<Vec3>> = BTreeMap::new();
    for p in &tgt.points {
        let key = (
            (p.x / cell_size).floor() as i64,
            (p.y / cell_size).floor() as i64,
            (p.z / cell_size).floor() as i64,
        );
        buckets.entry(key).or_default().push(*p);
    }
    let mut cells = BTreeMap::new();
    for (key, pts) in buckets {
        if pts.len() < MIN_CELL_POINTS {
            continue;
        }
        let n = pts.len() as f64;
        let mean = pts.iter().sum::<Vec3>() / n;
        let mut cov = Mat3::zeros();
        for p in &pts {
            let d = p - mean;
            cov += d * d.transpose();
        }
        cov /= n - 1.0;
        let (cov, inv_cov) = regularize(&cov);
        cells.insert(
            key,
            NdtCell {
                mean,
                cov,
                inv_cov,
                count: pts.len(),
            },
        );
    }
    if cells.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(NdtGrid { cell_size, cells })
}

pub fn pose6_to_transform(pose: &Pose6) -> RigidTransform {
    RigidTransform {
        rotation: rot_z(pose[5]) * rot_y(pose[4]) * rot_x(pose[3]),
        translation: Vec3::new(pose[0], pose[1], pose[2]),
    }
}

/// ZYX Euler extraction, valid away from pitch = ±90°.
pub fn transform_to_pose6(t: &RigidTransform) -> Pose6 {
    let r = &t.rotation;
    let ry = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let rx = r[(2, 1)].atan2(r[(2, 2)]);
    let rz = r[(1, 0)].atan2(r[(0, 0)]);
    Vector6::new(
        t.translation.x,
        t.translation.y,
        t.translation.z,
        rx,
        ry,
        rz,
    )
}

fn rot_x_d(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn rot_y_d(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn rot_z_d(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Rotation matrix and its six distinct pose derivatives at one pose.
struct RotationBundle {
    r: Mat3,
    d: [Mat3; 3],
    /// Upper-triangle order: xx, xy, xz, yy, yz, zz.
    dd: [Mat3; 6],
}

fn rotation_bundle(pose: &Pose6) -> RotationBundle {
    let (rx, ry, rz) = (pose[3], pose[4], pose[5]);
    let (mx, my, mz) = (rot_x(rx), rot_y(ry), rot_z(rz));
    let (dx, dy, dz) = (rot_x_d(rx), rot_y_d(ry), rot_z_d(rz));
    // Second derivatives of the elementary rotations equal the negated
    // rotation in the rotating 2x2 block; writing them via the chain of
    // first derivatives keeps the expressions short.
    let ddx = rot_x_dd(rx);
    let ddy = rot_y_dd(ry);
    let ddz = rot_z_dd(rz);
    RotationBundle {
        r: mz * my * mx,
        d: [mz * my * dx, mz * dy * mx, dz * my * mx],
        dd: [
            mz * my * ddx,
            mz * dy * dx,
            dz * my * dx,
            mz * ddy * mx,
            dz * dy * mx,
            ddz * my * mx,
        ],
    }
}

fn rot_x_dd(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(0.0, 0.0, 0.0, 0.0, -c, s, 0.0, -s, -c)
}

fn rot_y_dd(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-c, 0.0, -s, 0.0, 0.0, 0.0, s, 0.0, -c)
}

fn rot_z_dd(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-c, s, 0.0, -s, -c, 0.0, 0.0, 0.0, 0.0)
}

/// Maps the upper-triangle rotation pair (k,l), k ≤ l, into the `dd` array.
fn dd_slot(k: usize, l: usize) -> usize {
    match (k, l) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        (2, 2) => 5,
        _ => unreachable!("upper triangle only"),
    }
}

/// Cell assignment of each source point at `pose`; `None` for points that
/// land outside every populated cell.
pub fn assign_keys(grid: &NdtGrid, pts: &[Vec3], pose: &Pose6) -> Vec<Option<CellKey>> {
    let t = pose6_to_transform(pose);
    pts.iter()
        .map(|p| {
            let key = grid.key_for(&t.apply(p));
            grid.cell(&key).map(|_| key)
        })
        .collect()
}

/// Total NDT score at `pose` with cells re-assigned at this pose.
pub fn score_at(grid: &NdtGrid, pts: &[Vec3], pose: &Pose6) -> f64 {
    let t = pose6_to_transform(pose);
    parallel::sum_by(pts, |p| {
        let x = t.apply(p);
        match grid.cell_for(&x) {
            Some(cell) => {
                let q = x - cell.mean;
                (-(q.dot(&(cell.inv_cov * q))) / 2.0).exp()
            }
            None => 0.0,
        }
    })
}

/// Total score at `pose` holding the point→cell assignment fixed.
///
/// The assignment map makes the score a smooth function of the pose, so
/// central finite differences converge to the analytic gradient; at the
/// assignment's own pose it agrees exactly with [`score_at`].
pub fn score_frozen(grid: &NdtGrid, pts: &[Vec3], keys: &[Option<CellKey>], pose: &Pose6) -> f64 {
    let t = pose6_to_transform(pose);
    let indexed: Vec<usize> = (0..pts.len()).collect();
    parallel::sum_by(&indexed, |&i| match keys[i] {
        Some(key) => {
            let cell = grid.cell(&key).expect("frozen key came from this grid");
            let q = t.apply(&pts[i]) - cell.mean;
            (-(q.dot(&(cell.inv_cov * q))) / 2.0).exp()
        }
        None => 0.0,
    })
}

type Evaluation = (f64, Vector6<f64>, Matrix6<f64>, usize);

/// Score, gradient, Hessian, and hit count at `pose`.
fn evaluate(grid: &NdtGrid, pts: &[Vec3], pose: &Pose6) -> Evaluation {
    let bundle = rotation_bundle(pose);
    let t = Vec3::new(pose[0], pose[1], pose[2]);
    let zero: Evaluation = (0.0, Vector6::zeros(), Matrix6::zeros(), 0);
    parallel::fold_chunks(
        pts,
        zero,
        |acc, _, p| {
            let x = bundle.r * p + t;
            let cell = match grid.cell_for(&x) {
                Some(c) => c,
                None => return acc,
            };
            let q = x - cell.mean;
            let bq = cell.inv_cov * q;
            let s = (-q.dot(&bq) / 2.0).exp();

            // Columns of J = ∂x′/∂θ.
            let cols = [
                Vec3::x(),
                Vec3::y(),
                Vec3::z(),
                bundle.d[0] * p,
                bundle.d[1] * p,
                bundle.d[2] * p,
            ];
            let mut u = Vector6::zeros();
            for k in 0..6 {
                u[k] = cols[k].dot(&bq);
            }

            let (mut score, mut grad, mut hess, hits) = acc;
            score += s;
            grad -= s * u;
            for k in 0..6 {
                let b_jk = cell.inv_cov * cols[k];
                for l in 0..6 {
                    let mut h = u[k] * u[l] - cols[l].dot(&b_jk);
                    if k >= 3 && l >= 3 {
                        let (a, b) = if k <= l { (k - 3, l - 3) } else { (l - 3, k - 3) };
                        h -= bq.dot(&(bundle.dd[dd_slot(a, b)] * p));
                    }
                    hess[(k, l)] += s * h;
                }
            }
            (score, grad, hess, hits + 1)
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3),
    )
}

/// Analytic gradient of the total score at `pose`.
pub fn gradient_at(grid: &NdtGrid, pts: &[Vec3], pose: &Pose6) -> Vector6<f64> {
    evaluate(grid, pts, pose).1
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NdtParams {
    pub max_iter: usize,
    /// Convergence on gradient norm, scaled by the source point count.
    pub grad_tol: f64,
    /// Convergence on Newton step length (after line search).
    pub step_tol: f64,
    /// Line-search halvings before declaring divergence.
    pub max_halvings: usize,
}

impl Default for NdtParams {
    fn default() -> Self {
        Self {
            max_iter: 50,
            grad_tol: 1e-6,
            step_tol: 1e-10,
            max_halvings: 10,
        }
    }
}

/// Newton ascent on the NDT score from `init`.
pub fn ndt_register(
    src: &PointCloud,
    grid: &NdtGrid,
    init: &RigidTransform,
    params: &NdtParams,
) -> Result<RegistrationResult> {
    if src.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }

    let pts = &src.points;
    let mut pose = transform_to_pose6(init);
    let grad_threshold = params.grad_tol * (pts.len() as f64).max(1.0);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=params.max_iter {
        iterations = iter;
        let (score, grad, hess, hits) = evaluate(grid, pts, &pose);
        if hits == 0 {
            return Ok(RegistrationResult::failed(pose6_to_transform(&pose), iter));
        }
        if grad.norm() < grad_threshold {
            converged = true;
            break;
        }

        // Minimize f = −score; load the diagonal until Hf is positive
        // definite.
        let hf = -hess;
        let mut lambda = 0.0;
        let scale = 1.0 + (0..6).map(|i| hf[(i, i)].abs()).fold(0.0, f64::max);
        let delta = loop {
            let m = hf + Matrix6::identity() * lambda;
            if let Some(chol) = m.cholesky() {
                break chol.solve(&grad);
            }
            lambda = if lambda == 0.0 {
                1e-6 * scale
            } else {
                lambda * 10.0
            };
            if lambda > 1e12 * scale {
                return Ok(RegistrationResult::failed(pose6_to_transform(&pose), iter));
            }
        };

        let mut alpha = 1.0;
        let mut halvings = 0;
        let stepped = loop {
            let candidate = pose + alpha * delta;
            if score_at(grid, pts, &candidate) > score {
                pose = candidate;
                break true;
            }
            halvings += 1;
            if halvings > params.max_halvings {
                break false;
            }
            alpha /= 2.0;
        };
        if !stepped {
            // Score refuses to increase along the Newton direction.
            break;
        }
        if (alpha * delta.norm()) < params.step_tol {
            converged = true;
            break;
        }
    }

    let transform = pose6_to_transform(&pose);
    let keys = assign_keys(grid, pts, &pose);
    let mut correspondences = Vec::new();
    let mut weighted_sq = 0.0;
    let mut weight_sum = 0.0;
    for (i, key) in keys.iter().enumerate() {
        if let Some(key) = key {
            let cell = grid.cell(key).expect("assigned key exists");
            let q = transform.apply(&pts[i]) - cell.mean;
            let s = (-q.dot(&(cell.inv_cov * q)) / 2.0).exp();
            correspondences.push(Correspondence {
                src_index: i,
                tgt_index: grid.ordinal(key).expect("assigned key exists"),
                weight: s,
            });
            weighted_sq += s * q.norm_squared();
            weight_sum += s;
        }
    }
    let residual = if weight_sum > 0.0 {
        (weighted_sq / weight_sum).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(RegistrationResult {
        transform,
        correspondences,
        converged,
        iterations,
        residual,
    })
}
