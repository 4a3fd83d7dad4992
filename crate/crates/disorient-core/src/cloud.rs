//! Point cloud container and whole-cloud operations.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::se3::{RigidTransform, Vec3};

/// A scan: positions plus optional per-point intensity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Parallel to `points` when present.
    pub intensity: Option<Vec<f32>>,
    /// Index of the scan within its sequence, when known.
    pub frame_id: Option<usize>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            intensity: None,
            frame_id: None,
        }
    }

    pub fn with_intensity(points: Vec<Vec3>, intensity: Vec<f32>) -> Result<Self> {
        if points.len() != intensity.len() {
            return Err(Error::InvalidParam(
                "intensity length does not match point count".into(),
            ));
        }
        Ok(Self {
            points,
            intensity: Some(intensity),
            frame_id: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keep exactly the points at the given sorted, deduplicated indices.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            intensity: self
                .intensity
                .as_ref()
                .map(|ints| indices.iter().map(|&i| ints[i]).collect()),
            frame_id: self.frame_id,
        }
    }

    /// Keep points passing `keep`; preserves order.
    pub fn filter_indexed(&self, mut keep: impl FnMut(usize, &Vec3) -> bool) -> PointCloud {
        let indices: Vec<usize> = (0..self.len())
            .filter(|&i| keep(i, &self.points[i]))
            .collect();
        self.select(&indices)
    }
}

/// Apply `t` to every point; intensity and frame id carry over.
pub fn transform_cloud(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply(p)).collect(),
        intensity: cloud.intensity.clone(),
        frame_id: cloud.frame_id,
    }
}

fn voxel_key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

/// Voxel-grid downsample: one centroid per occupied cell of side `cell`.
///
/// Output cells are ordered by (ix, iy, iz) key so the result is independent
/// of input point order up to summation; intensity is dropped because a
/// centroid has no single return strength.
pub fn voxel_downsample(cloud: &PointCloud, cell: f64) -> Result<PointCloud> {
    if cell <= 0.0 || !cell.is_finite() {
        return Err(Error::InvalidParam(format!(
            "voxel cell must be positive and finite, got {cell}"
        )));
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Vec3, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let e = cells.entry(voxel_key(p, cell)).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    let points = cells
        .into_values()
        .map(|(sum, n)| sum / n as f64)
        .collect();
    Ok(PointCloud {
        points,
        intensity: None,
        frame_id: cloud.frame_id,
    })
}

/// Axis-aligned bounding box as (min, max) corners.
pub fn bounding_box(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::rot_z;
    use approx::assert_abs_diff_eq;

    #[test]
    fn transform_moves_points() {
        let cloud = PointCloud::new(vec![Vec3::new(1.0, 0.0, 0.0)]);
        let t = RigidTransform {
            rotation: rot_z(std::f64::consts::FRAC_PI_2),
            translation: Vec3::new(0.0, 0.0, 1.0),
        };
        let out = transform_cloud(&cloud, &t);
        assert_abs_diff_eq!(out.points[0], Vec3::new(0.0, 1.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn downsample_merges_cell_mates() {
        // Two points in one 1 m cell, one point alone in another.
        let cloud = PointCloud::new(vec![
            Vec3::new(0.2, 0.2, 0.0),
            Vec3::new(0.4, 0.4, 0.0),
            Vec3::new(5.5, 0.0, 0.0),
        ]);
        let out = voxel_downsample(&cloud, 1.0).unwrap();
        assert_eq!(out.len(), 2);
        assert_abs_diff_eq!(out.points[0], Vec3::new(0.3, 0.3, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(out.points[1], Vec3::new(5.5, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn downsample_is_input_order_independent() {
        let pts = vec![
            Vec3::new(0.1, 0.9, 0.0),
            Vec3::new(2.7, -1.2, 0.4),
            Vec3::new(0.15, 0.85, 0.05),
            Vec3::new(-3.0, 0.0, 1.0),
        ];
        let mut rev = pts.clone();
        rev.reverse();
        let a = voxel_downsample(&PointCloud::new(pts), 0.5).unwrap();
        let b = voxel_downsample(&PointCloud::new(rev), 0.5).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_abs_diff_eq!(pa, pb, epsilon = 1e-12);
        }
    }

    #[test]
    fn downsample_rejects_bad_cell() {
        let cloud = PointCloud::new(vec![Vec3::zeros()]);
        assert!(voxel_downsample(&cloud, 0.0).is_err());
        assert!(voxel_downsample(&cloud, -1.0).is_err());
    }

    #[test]
    fn select_carries_intensity() {
        let cloud =
            PointCloud::with_intensity(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)], vec![0.5, 0.9])
                .unwrap();
        let out = cloud.select(&[1]);
        assert_eq!(out.len(), 1);
        assert_eq!(out.intensity.as_ref().unwrap()[0], 0.9);
    }

    #[test]
    fn bounding_box_spans_points() {
        let pts = vec![Vec3::new(-1.0, 2.0, 0.0), Vec3::new(3.0, -4.0, 5.0)];
        let (lo, hi) = bounding_box(&pts).unwrap();
        assert_abs_diff_eq!(lo, Vec3::new(-1.0, -4.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(hi, Vec3::new(3.0, 2.0, 5.0), epsilon = 1e-15);
    }
}
