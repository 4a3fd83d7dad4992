//! SE(3) rigid transforms and pose sequences.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Rigid transform {R, t}: maps a point p to `R * p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Validating constructor: rotation must be orthonormal with det +1
    /// within 1e-9 elementwise.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let t = Self {
            rotation,
            translation,
        };
        if !t.is_valid(1e-9) {
            return Err(Error::DegenerateGeometry(
                "rotation is not a proper rotation matrix".into(),
            ));
        }
        Ok(t)
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    /// Rotation by `angle_rad` about the vertical (z) axis plus a translation.
    pub fn from_yaw_translation(angle_rad: f64, translation: Vec3) -> Self {
        Self {
            rotation: rot_z(angle_rad),
            translation,
        }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let gram = self.rotation.transpose() * self.rotation;
        let drift = (gram - Mat3::identity()).abs().max();
        drift <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `compose(a, b)` applies `b` first, then `a`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn invert(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Orthonormality drift: max elementwise deviation of RᵀR from identity.
    pub fn rotation_drift(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity())
            .abs()
            .max()
    }
}

/// Rotation about x by `a` radians.
pub fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about y by `a` radians.
pub fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation about z by `a` radians.
pub fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// ZYX Euler composition: `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rot_zyx(roll: f64, pitch: f64, yaw: f64) -> Mat3 {
    rot_z(yaw) * rot_y(pitch) * rot_x(roll)
}

/// Nearest proper rotation to `m` by polar decomposition (SVD).
///
/// Fails when `m` is closer to a reflection than to a rotation.
pub fn nearest_rotation(m: &Mat3) -> Result<Mat3> {
    let svd = m.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::DegenerateGeometry("SVD failed".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateGeometry("SVD failed".into()))?;
    let r = u * v_t;
    if r.determinant() <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "nearest orthogonal matrix is a reflection".into(),
        ));
    }
    Ok(r)
}

/// A sequence of world←sensor poses, one per scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<RigidTransform>,
    pub frame_ids: Vec<usize>,
}

impl Trajectory {
    pub fn new(poses: Vec<RigidTransform>, frame_ids: Vec<usize>) -> Result<Self> {
        if poses.len() != frame_ids.len() {
            return Err(Error::InvalidParam(
                "trajectory poses and frame ids differ in length".into(),
            ));
        }
        Ok(Self { poses, frame_ids })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Relative transform mapping frame `j`'s points into frame `i`'s frame:
    /// `pose_iᵀ ∘ pose_j`.
    pub fn relative(&self, i: usize, j: usize) -> RigidTransform {
        self.poses[i].invert().compose(&self.poses[j])
    }

    /// Sensor positions in a common frame given by `world_to_local`.
    pub fn sensor_positions_in(&self, world_to_local: &RigidTransform) -> Vec<Vec3> {
        self.poses
            .iter()
            .map(|p| world_to_local.apply(&p.translation))
            .collect()
    }

    /// The whole trajectory re-expressed in frame `k`'s coordinates, so
    /// pose `k` becomes the identity.
    pub fn expressed_in(&self, k: usize) -> Result<Trajectory> {
        if k >= self.poses.len() {
            return Err(Error::InvalidParam(format!(
                "frame index {k} out of range for {} poses",
                self.poses.len()
            )));
        }
        let to_local = self.poses[k].invert();
        Ok(Trajectory {
            poses: self.poses.iter().map(|p| to_local.compose(p)).collect(),
            frame_ids: self.frame_ids.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample_transform() -> RigidTransform {
        RigidTransform {
            rotation: rot_zyx(0.1, -0.2, 0.7),
            translation: Vec3::new(1.5, -2.0, 0.3),
        }
    }

    #[test]
    fn compose_identity_is_noop() {
        let t = sample_transform();
        let c = RigidTransform::identity().compose(&t);
        assert_abs_diff_eq!(c.rotation, t.rotation, epsilon = 1e-15);
        assert_abs_diff_eq!(c.translation, t.translation, epsilon = 1e-15);
    }

    #[test]
    fn double_invert_round_trips() {
        let t = sample_transform();
        let back = t.invert().invert();
        assert_abs_diff_eq!(back.rotation, t.rotation, epsilon = 1e-12);
        assert_abs_diff_eq!(back.translation, t.translation, epsilon = 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = sample_transform();
        let e = t.compose(&t.invert());
        assert_abs_diff_eq!(e.rotation, Mat3::identity(), epsilon = 1e-9);
        assert_abs_diff_eq!(e.translation, Vec3::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn z_translations_add() {
        let a = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.0));
        let b = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 2.0));
        let c = a.compose(&b);
        assert_abs_diff_eq!(c.translation, Vec3::new(0.0, 0.0, 3.0), epsilon = 1e-15);
    }

    #[test]
    fn nearest_rotation_fixes_drift() {
        let mut m = rot_zyx(0.3, 0.2, -0.4);
        m[(0, 0)] += 1e-4;
        let r = nearest_rotation(&m).unwrap();
        assert!((r.transpose() * r - Mat3::identity()).abs().max() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_rotation_leaves_clean_rotation_alone() {
        let m = rot_zyx(-0.9, 0.4, 1.2);
        let r = nearest_rotation(&m).unwrap();
        assert_abs_diff_eq!(r, m, epsilon = 1e-12);
    }

    #[test]
    fn nearest_rotation_rejects_reflection() {
        let refl = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(nearest_rotation(&refl).is_err());
    }

    #[test]
    fn validating_constructor_rejects_sheared_matrix() {
        let mut m = Mat3::identity();
        m[(0, 1)] = 0.01;
        assert!(RigidTransform::new(m, Vec3::zeros()).is_err());
    }
}
