//! LiDAR-only occlusion defense: flags regions where the previous scan
//! predicts returns but the current scan has none.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::attack::estimate_ground;
use crate::cloud::{transform_cloud, PointCloud};
use crate::error::{Error, Result};
use crate::se3::{RigidTransform, Vec3};

/// A suspicious empty region in the current scan's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VoidAlert {
    /// Mean of the void voxel centers.
    pub centroid: Vec3,
    /// Number of void voxels in the cluster.
    pub voxel_count: usize,
    /// Consecutive frames this region has alerted (tracked by the
    /// caller through [`VoidTracker`]; fresh detections report 1).
    pub persistence: usize,
    /// The cluster's voxel keys, sorted.
    pub voxels: Vec<(i64, i64, i64)>,
}

/// Detection thresholds. Distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DefenseParams {
    pub voxel: f64,
    /// Returns nearer than this are ego clutter and are ignored.
    pub range_min: f64,
    /// Returns farther than this are too sparse to judge.
    pub range_max: f64,
    /// Points at or below this height over local ground are ignored.
    pub ground_clearance: f64,
    /// A voxel counts as expected when the predicted scan puts at
    /// least this many points in it.
    pub min_expected: usize,
    /// Minimum void voxels for a cluster to alert.
    pub min_cluster: usize,
    /// Centroid matching radius for persistence tracking.
    pub match_radius: f64,
}

impl Default for DefenseParams {
    fn default() -> Self {
        DefenseParams {
            voxel: 0.5,
            range_min: 3.0,
            range_max: 40.0,
            ground_clearance: 0.2,
            min_expected: 5,
            min_cluster: 4,
            match_radius: 1.0,
        }
    }
}

impl DefenseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel > 0.0) || !self.voxel.is_finite() {
            return Err(Error::InvalidParam("defense voxel must be positive".into()));
        }
        if !(self.range_min >= 0.0 && self.range_max > self.range_min) {
            return Err(Error::InvalidParam(
                "defense range gate must satisfy 0 <= min < max".into(),
            ));
        }
        if self.min_expected == 0 || self.min_cluster == 0 {
            return Err(Error::InvalidParam(
                "min_expected and min_cluster must be at least 1".into(),
            ));
        }
        if !(self.match_radius > 0.0) {
            return Err(Error::InvalidParam("match radius must be positive".into()));
        }
        Ok(())
    }
}

/// Voxel key of a point at the given resolution.
pub fn voxel_key(p: &Vec3, voxel: f64) -> (i64, i64, i64) {
    (
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    )
}

/// Maps the previous scan into the current frame.
///
/// `odom` carries current-frame coordinates into the previous frame
/// (the usual current-against-previous registration estimate), so the
/// prediction applies its inverse.
pub fn predict_scan(prev: &PointCloud, odom: &RigidTransform) -> PointCloud {
    transform_cloud(prev, &odom.invert())
}

fn gated_counts(
    cloud: &PointCloud,
    ground: &crate::attack::GroundModel,
    params: &DefenseParams,
) -> BTreeMap<(i64, i64, i64), usize> {
    let mut counts = BTreeMap::new();
    for p in &cloud.points {
        let range = p.norm();
        if range < params.range_min || range > params.range_max {
            continue;
        }
        if ground.clearance_of(p) <= params.ground_clearance {
            continue;
        }
        *counts.entry(voxel_key(p, params.voxel)).or_insert(0) += 1;
    }
    counts
}

/// Compares a predicted scan against the current one and reports
/// clustered void regions.
///
/// A voxel is void when the prediction puts `min_expected` or more
/// points in it and the current scan puts none. Void voxels are
/// clustered 26-connected; clusters of at least `min_cluster` voxels
/// become alerts with persistence 1, in deterministic order.
///
/// The range gate is capped one voxel inside the current scan's
/// farthest return: the previous scan saw past where the sensor can
/// now reach (mostly behind it), and voxels outside the sensor's
/// actual coverage are not expected to contain returns.
pub fn detect_voids(
    predicted: &PointCloud,
    current: &PointCloud,
    params: &DefenseParams,
) -> Result<Vec<VoidAlert>> {
    params.validate()?;
    if current.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let reach = current
        .points
        .iter()
        .map(|p| p.norm())
        .fold(0.0_f64, f64::max);
    let mut params = *params;
    params.range_max = params.range_max.min(reach - params.voxel);
    let params = &params;
    let ground = estimate_ground(current, 2.0 * params.voxel)?;
    let predicted_counts = gated_counts(predicted, &ground, params);
    let current_counts = gated_counts(current, &ground, params);

    let mut void: BTreeSet<(i64, i64, i64)> = BTreeSet::new();
    for (&key, &count) in &predicted_counts {
        if count >= params.min_expected && !current_counts.contains_key(&key) {
            void.insert(key);
        }
    }

    let mut alerts = Vec::new();
    let mut remaining = void.clone();
    while let Some(&start) = remaining.iter().next() {
        remaining.remove(&start);
        let mut cluster = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some((x, y, z)) = queue.pop_front() {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        let nb = (x + dx, y + dy, z + dz);
                        if remaining.remove(&nb) {
                            cluster.push(nb);
                            queue.push_back(nb);
                        }
                    }
                }
            }
        }
        if cluster.len() >= params.min_cluster {
            cluster.sort_unstable();
            let mut centroid = Vec3::zeros();
            for &(x, y, z) in &cluster {
                centroid += Vec3::new(
                    (x as f64 + 0.5) * params.voxel,
                    (y as f64 + 0.5) * params.voxel,
                    (z as f64 + 0.5) * params.voxel,
                );
            }
            centroid /= cluster.len() as f64;
            alerts.push(VoidAlert {
                centroid,
                voxel_count: cluster.len(),
                persistence: 1,
                voxels: cluster,
            });
        }
    }
    Ok(alerts)
}

/// Tracks alert persistence across frames by centroid matching.
#[derive(Debug, Clone, Default)]
pub struct VoidTracker {
    /// Centroids seen last frame, in that frame's coordinates, with
    /// their accumulated persistence.
    prev: Vec<(Vec3, usize)>,
}

impl VoidTracker {
    pub fn new() -> Self {
        VoidTracker::default()
    }

    /// Folds one frame's detections into the track state.
    ///
    /// `odom` maps current-frame coordinates into the previous frame,
    /// consistent with [`predict_scan`]. Each alert inherits the
    /// persistence of the nearest tracked centroid within
    /// `match_radius`, plus one.
    pub fn observe(
        &mut self,
        alerts: &[VoidAlert],
        odom: &RigidTransform,
        match_radius: f64,
    ) -> Vec<VoidAlert> {
        let into_current = odom.invert();
        let carried: Vec<(Vec3, usize)> = self
            .prev
            .iter()
            .map(|(c, p)| (into_current.apply(c), *p))
            .collect();
        let mut out = Vec::with_capacity(alerts.len());
        for alert in alerts {
            let mut best: Option<(f64, usize)> = None;
            for (c, p) in &carried {
                let d = (c - alert.centroid).norm();
                if d <= match_radius && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, *p));
                }
            }
            let persistence = best.map_or(1, |(_, p)| p + 1);
            out.push(VoidAlert {
                persistence,
                ..alert.clone()
            });
        }
        self.prev = out.iter().map(|a| (a.centroid, a.persistence)).collect();
        out
    }
}
