//! Coarse ground elevation model used by feasibility screening.

use std::collections::BTreeMap;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::se3::Vec3;

/// Grid of ground heights keyed by xy cell.
#[derive(Debug, Clone)]
pub struct GroundModel {
    /// Cell edge length in meters.
    pub cell: f64,
    /// Smoothed ground elevation per populated cell.
    pub heights: BTreeMap<(i64, i64), f64>,
}

impl GroundModel {
    fn key(&self, x: f64, y: f64) -> (i64, i64) {
        (
            (x / self.cell).floor() as i64,
            (y / self.cell).floor() as i64,
        )
    }

    fn center(&self, key: (i64, i64)) -> (f64, f64) {
        (
            (key.0 as f64 + 0.5) * self.cell,
            (key.1 as f64 + 0.5) * self.cell,
        )
    }

    /// Ground elevation under (x, y).
    ///
    /// Unpopulated cells borrow the height of the nearest populated
    /// cell, so the model is total over the plane.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let key = self.key(x, y);
        if let Some(&h) = self.heights.get(&key) {
            return h;
        }
        let mut best = f64::INFINITY;
        let mut best_h = 0.0;
        for (&k, &h) in &self.heights {
            let (cx, cy) = self.center(k);
            let d2 = (cx - x).powi(2) + (cy - y).powi(2);
            if d2 < best {
                best = d2;
                best_h = h;
            }
        }
        best_h
    }

    /// Height of `p` above the local ground.
    pub fn clearance_of(&self, p: &Vec3) -> f64 {
        p.z - self.height_at(p.x, p.y)
    }
}

/// Estimates ground elevation on an xy grid.
///
/// Each populated cell starts at the minimum z of its points, then is
/// smoothed by the median over itself and its populated 8-neighbors.
/// Objects standing on the ground do not lift the estimate as long as
/// ground returns share their cell.
pub fn estimate_ground(cloud: &PointCloud, cell: f64) -> Result<GroundModel> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(cell > 0.0) || !cell.is_finite() {
        return Err(Error::InvalidParam(format!(
            "ground cell must be positive, got {cell}"
        )));
    }
    let mut raw: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for p in &cloud.points {
        let key = (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
        );
        raw.entry(key)
            .and_modify(|z| *z = z.min(p.z))
            .or_insert(p.z);
    }
    let mut heights = BTreeMap::new();
    for &key in raw.keys() {
        let mut block = Vec::with_capacity(9);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&z) = raw.get(&(key.0 + dx, key.1 + dy)) {
                    block.push(z);
                }
            }
        }
        block.sort_by(f64::total_cmp);
        let mid = block.len() / 2;
        let median = if block.len() % 2 == 1 {
            block[mid]
        } else {
            0.5 * (block[mid - 1] + block[mid])
        };
        heights.insert(key, median);
    }
    Ok(GroundModel { cell, heights })
}
