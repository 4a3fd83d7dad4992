//! Simulated occlusion of planned patches against point clouds.
//!
//! Shadow mode models an absorbing patch: every return whose ray from
//! the sensor origin passes through a patch quad is erased, carving the
//! full shadow volume behind the patch. Crop mode is the idealized
//! variant that deletes an axis-aligned cube around the patch's target
//! keypoint instead.

use serde::{Deserialize, Serialize};

use crate::attack::{AttackPlan, Patch};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::parallel;
use crate::se3::{RigidTransform, Vec3};

/// How a plan's patches remove points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Shadow,
    Crop,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Shadow => "shadow",
            Mode::Crop => "crop",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shadow" => Ok(Mode::Shadow),
            "crop" => Ok(Mode::Crop),
            other => Err(Error::InvalidParam(format!(
                "unknown occlusion mode {other:?} (expected shadow or crop)"
            ))),
        }
    }
}

/// Which scan of a pair the plan occludes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackTarget {
    Source,
    Target,
    Both,
}

impl std::fmt::Display for AttackTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackTarget::Source => "source",
            AttackTarget::Target => "target",
            AttackTarget::Both => "both",
        })
    }
}

impl std::str::FromStr for AttackTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(AttackTarget::Source),
            "target" => Ok(AttackTarget::Target),
            "both" => Ok(AttackTarget::Both),
            other => Err(Error::InvalidParam(format!(
                "unknown attack target {other:?} (expected source, target, or both)"
            ))),
        }
    }
}

/// What one occlusion pass removed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OcclusionReport {
    /// Indices into the original cloud, strictly increasing.
    pub removed_indices: Vec<usize>,
    /// Points hit per patch, aligned with the plan's patch list.
    /// Overlapping shadows count in every patch they fall in, so the
    /// sum can exceed `removed_indices.len()`.
    pub per_patch_counts: Vec<usize>,
}

impl OcclusionReport {
    pub fn empty(n_patches: usize) -> Self {
        OcclusionReport {
            removed_indices: Vec::new(),
            per_patch_counts: vec![0; n_patches],
        }
    }
}

/// Corners of a patch quad, counterclockwise as seen from the side the
/// normal points to (the sensor side).
pub fn patch_corners(patch: &Patch) -> [Vec3; 4] {
    let e_z = Vec3::z();
    let e_h = patch.normal.cross(&e_z);
    let h = 0.5 * patch.side;
    let c = patch.center;
    [
        c - h * e_h - h * e_z,
        c - h * e_h + h * e_z,
        c + h * e_h + h * e_z,
        c + h * e_h - h * e_z,
    ]
}

/// Per-patch geometry in the frame of the cloud being occluded.
struct PatchGeom {
    /// Corner A plus the quad's two edge directions and plane normal.
    origin: Vec3,
    e1: Vec3,
    e2: Vec3,
    plane_n: Vec3,
    side: f64,
    /// Center of the crop cube (the patch's target keypoint).
    crop_center: Vec3,
}

impl PatchGeom {
    fn new(patch: &Patch, map: Option<&RigidTransform>) -> Self {
        let mut corners = patch_corners(patch);
        let mut crop_center = patch.center - patch.normal;
        if let Some(t) = map {
            for c in &mut corners {
                *c = t.apply(c);
            }
            crop_center = t.apply(&crop_center);
        }
        let [a, b, _, d] = corners;
        let e1 = d - a;
        let e2 = b - a;
        PatchGeom {
            origin: a,
            e1,
            e2,
            plane_n: e1.cross(&e2).normalize(),
            side: patch.side,
            crop_center,
        }
    }

    /// True when the segment from the sensor origin to `p` crosses the
    /// quad at parameter s in (0, 1].
    fn shadows(&self, p: &Vec3) -> bool {
        let denom = self.plane_n.dot(p);
        if denom.abs() < 1e-300 {
            return false;
        }
        let s = self.plane_n.dot(&self.origin) / denom;
        if !(s > 0.0 && s <= 1.0) {
            return false;
        }
        let w = s * p - self.origin;
        let side2 = self.side * self.side;
        let a = w.dot(&self.e1) / side2;
        let b = w.dot(&self.e2) / side2;
        (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)
    }

    fn crops(&self, p: &Vec3) -> bool {
        let d = p - self.crop_center;
        let h = 0.5 * self.side;
        d.x.abs() <= h && d.y.abs() <= h && d.z.abs() <= h
    }

    fn hits(&self, p: &Vec3, mode: Mode) -> bool {
        match mode {
            Mode::Shadow => self.shadows(p),
            Mode::Crop => self.crops(p),
        }
    }
}

fn occlude_geoms(
    cloud: &PointCloud,
    geoms: &[PatchGeom],
    mode: Mode,
) -> (PointCloud, OcclusionReport) {
    let masks = parallel::map_indexed(&cloud.points, |_, p| {
        let mut mask = 0u64;
        for (k, g) in geoms.iter().enumerate() {
            if g.hits(p, mode) {
                mask |= 1 << k;
            }
        }
        mask
    });
    let mut report = OcclusionReport::empty(geoms.len());
    for (i, &mask) in masks.iter().enumerate() {
        if mask != 0 {
            report.removed_indices.push(i);
            for (k, count) in report.per_patch_counts.iter_mut().enumerate() {
                if mask & (1 << k) != 0 {
                    *count += 1;
                }
            }
        }
    }
    let kept = cloud.filter_indexed(|i, _| masks[i] == 0);
    (kept, report)
}

fn plan_geoms(plan: &AttackPlan, map: Option<&RigidTransform>) -> Result<Vec<PatchGeom>> {
    plan.validate()?;
    if plan.patches.len() > 64 {
        return Err(Error::InvalidParam(format!(
            "at most 64 patches per plan, got {}",
            plan.patches.len()
        )));
    }
    Ok(plan
        .patches
        .iter()
        .map(|p| PatchGeom::new(p, map))
        .collect())
}

/// Applies a plan to a cloud expressed in the same frame as the plan.
///
/// Returns the surviving cloud and a report of removed indices.
pub fn occlude(
    cloud: &PointCloud,
    plan: &AttackPlan,
    mode: Mode,
) -> Result<(PointCloud, OcclusionReport)> {
    let geoms = plan_geoms(plan, None)?;
    Ok(occlude_geoms(cloud, &geoms, mode))
}

/// A frame pair after occlusion.
#[derive(Debug, Clone)]
pub struct OccludedPair {
    pub src: PointCloud,
    pub tgt: PointCloud,
    pub src_report: OcclusionReport,
    pub tgt_report: OcclusionReport,
}

/// Occludes one or both scans of a pair with a source-frame plan.
///
/// The plan's geometry lives in the source scan's frame; `gt` (mapping
/// source coordinates into the reference frame) carries it into the
/// reference scan when that side is attacked, so each scan is shadowed
/// from its own sensor origin.
pub fn apply_plan_to_pair(
    src: &PointCloud,
    tgt: &PointCloud,
    plan: &AttackPlan,
    mode: Mode,
    attack_target: AttackTarget,
    gt: &RigidTransform,
) -> Result<OccludedPair> {
    let n = plan.patches.len();
    let (src_out, src_report) = match attack_target {
        AttackTarget::Source | AttackTarget::Both => {
            let geoms = plan_geoms(plan, None)?;
            occlude_geoms(src, &geoms, mode)
        }
        AttackTarget::Target => (src.clone(), OcclusionReport::empty(n)),
    };
    let (tgt_out, tgt_report) = match attack_target {
        AttackTarget::Target | AttackTarget::Both => {
            let geoms = plan_geoms(plan, Some(gt))?;
            occlude_geoms(tgt, &geoms, mode)
        }
        AttackTarget::Source => (tgt.clone(), OcclusionReport::empty(n)),
    };
    Ok(OccludedPair {
        src: src_out,
        tgt: tgt_out,
        src_report,
        tgt_report,
    })
}
