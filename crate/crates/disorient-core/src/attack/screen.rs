//! Physical feasibility screening of selected candidates.

use std::f64::consts::TAU;

use crate::se3::Trajectory;

use super::{GroundModel, ScoredCandidate};

/// Thresholds for [`screen`]. Distances in meters, sector in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenParams {
    /// Candidates more than this far above ground are unreachable.
    pub max_height: f64,
    /// Candidates at or below this clearance sit on the ground.
    pub ground_clearance: f64,
    /// Keep-out half width around the vehicle's path.
    pub corridor_halfwidth: f64,
    /// Angular sector within which only the nearest candidate survives.
    pub bearing_sector_deg: f64,
}

impl Default for ScreenParams {
    fn default() -> Self {
        ScreenParams {
            max_height: 3.0,
            ground_clearance: 0.2,
            corridor_halfwidth: 2.0,
            bearing_sector_deg: 5.0,
        }
    }
}

fn point_segment_dist_xy(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

fn angular_separation(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Drops candidates an attacker could not physically occlude.
///
/// Three stages, all on source-frame positions: height filtering
/// (above `max_height` over ground, or at/below `ground_clearance`),
/// path-corridor exclusion (closer than `corridor_halfwidth` to any
/// trajectory segment in xy), and bearing-overlap suppression (among
/// candidates closer than `bearing_sector_deg` apart as seen from the
/// sensor origin, only the nearest survives). The trajectory must be
/// expressed in the source scan's frame.
///
/// Survivors keep their input order, and the operation is idempotent.
pub fn screen(
    selected: &[ScoredCandidate],
    ground: &GroundModel,
    trajectory: &Trajectory,
    params: &ScreenParams,
) -> Vec<ScoredCandidate> {
    let sensors: Vec<(f64, f64)> = trajectory
        .poses
        .iter()
        .map(|p| (p.translation.x, p.translation.y))
        .collect();

    let mut kept: Vec<(usize, &ScoredCandidate)> = Vec::new();
    'cand: for (idx, c) in selected.iter().enumerate() {
        let p = &c.position_src;
        let clearance = ground.clearance_of(p);
        if clearance > params.max_height || clearance <= params.ground_clearance {
            continue;
        }
        if sensors.len() == 1 {
            if point_segment_dist_xy((p.x, p.y), sensors[0], sensors[0])
                < params.corridor_halfwidth
            {
                continue;
            }
        }
        for seg in sensors.windows(2) {
            if point_segment_dist_xy((p.x, p.y), seg[0], seg[1]) < params.corridor_halfwidth {
                continue 'cand;
            }
        }
        kept.push((idx, c));
    }

    // Nearest-first greedy pass; a candidate survives only if no nearer
    // survivor shares its bearing sector.
    let sector = params.bearing_sector_deg.to_radians();
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = kept[a].1.position_src.xy().norm();
        let rb = kept[b].1.position_src.xy().norm();
        ra.total_cmp(&rb).then(a.cmp(&b))
    });
    let mut survives = vec![false; kept.len()];
    let mut taken_bearings: Vec<f64> = Vec::new();
    for i in order {
        let p = &kept[i].1.position_src;
        let bearing = p.y.atan2(p.x);
        if taken_bearings
            .iter()
            .all(|&b| angular_separation(bearing, b) >= sector)
        {
            survives[i] = true;
            taken_bearings.push(bearing);
        }
    }
    kept.iter()
        .zip(survives.iter())
        .filter(|(_, &s)| s)
        .map(|((_, c), _)| **c)
        .collect()
}
