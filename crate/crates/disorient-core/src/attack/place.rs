//! Patch placement one meter sensor-ward of each screened survivor.

use crate::error::{Error, Result};
use crate::se3::{rot_z, Vec3};

use super::{AttackPlan, GroundModel, Patch, ScoredCandidate, Strategy};

/// Places one upright square patch per survivor.
///
/// For a survivor p the patch center sits at p + u, where u is the
/// horizontal unit vector from p toward the sensor origin, so the
/// patch hangs exactly one meter sensor-ward at the survivor's height.
/// The normal is u rotated about z by `yaw_offset_deg`. Survivors on
/// the sensor's vertical axis have no bearing and are skipped with a
/// warning. With a ground model, patches whose bottom edge would sink
/// below ground are lifted until the bottom edge touches it.
pub fn place_patches(
    survivors: &[ScoredCandidate],
    side: f64,
    yaw_offset_deg: f64,
    strategy: Strategy,
    k: usize,
    seed: Option<u64>,
    ground: Option<&GroundModel>,
) -> Result<AttackPlan> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(Error::InvalidParam(format!(
            "patch side must be positive, got {side}"
        )));
    }
    if !(yaw_offset_deg.abs() <= 90.0) {
        return Err(Error::InvalidParam(format!(
            "yaw offset must lie in [-90, 90], got {yaw_offset_deg}"
        )));
    }
    let rot = rot_z(yaw_offset_deg.to_radians());
    let mut patches = Vec::with_capacity(survivors.len());
    for c in survivors {
        let p = &c.position_src;
        if p.x == 0.0 && p.y == 0.0 {
            log::warn!("skipping survivor on the sensor axis: no bearing to place along");
            continue;
        }
        let u = Vec3::new(-p.x, -p.y, 0.0).normalize();
        let mut center = p + u;
        if let Some(g) = ground {
            let floor = g.height_at(center.x, center.y);
            if center.z - 0.5 * side < floor {
                center.z = floor + 0.5 * side;
            }
        }
        patches.push(Patch {
            center,
            side,
            yaw_offset_deg,
            normal: rot * u,
        });
    }
    let plan = AttackPlan { strategy, k, patches, seed, pair: None };
    plan.validate()?;
    Ok(plan)
}
