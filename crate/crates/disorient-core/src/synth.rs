//! Seeded synthetic LiDAR sequences: a static world of ground, box
//! buildings, lamp posts, and tree trunks, scanned from a moving sensor
//! with range gating and Gaussian noise.
//!
//! The world mixes a few distinctive structures (building corners at
//! varied yaws) with repetitive ones (identical lamp posts at a fixed
//! interval and a flat ground plane), so keypoint-targeted occlusion and
//! random occlusion behave measurably differently on it.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kitti;
use crate::se3::{rot_z, RigidTransform, Trajectory, Vec3};

/// Generation knobs. Distances in meters, angles in degrees.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub frames: usize,
    pub seed: u64,
    /// Standard deviation of the per-axis Gaussian noise on returns.
    pub sigma: f64,
    /// Maximum sensor range; points beyond it produce no return.
    pub range: f64,
    /// Returns nearer than this are discarded as ego hits.
    pub min_range: f64,
    /// Forward distance traveled per frame.
    pub step: f64,
    /// Heading change per frame; 0 drives a straight line.
    pub yaw_rate_deg: f64,
    /// Sensor height over the ground plane.
    pub sensor_height: f64,
    /// Grid spacing of ground returns.
    pub ground_spacing: f64,
    pub n_buildings: usize,
    pub n_trees: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            frames: 24,
            seed: 0,
            sigma: 0.02,
            range: 25.0,
            min_range: 2.5,
            step: 1.0,
            yaw_rate_deg: 0.0,
            sensor_height: 1.6,
            ground_spacing: 0.5,
            n_buildings: 10,
            n_trees: 12,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::InvalidParam(
                "synthetic sequences need at least 2 frames".into(),
            ));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParam("noise sigma must be non-negative".into()));
        }
        if !(self.range > self.min_range && self.min_range >= 0.0) {
            return Err(Error::InvalidParam(
                "range gate must satisfy 0 <= min_range < range".into(),
            ));
        }
        if !(self.step > 0.0) || !(self.ground_spacing > 0.0) {
            return Err(Error::InvalidParam(
                "step and ground spacing must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A generated sequence: sensor-frame scans plus ground-truth poses.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub frames: Vec<PointCloud>,
    pub trajectory: Trajectory,
}

const GROUND_INTENSITY: f32 = 0.2;
const BUILDING_INTENSITY: f32 = 0.55;
const POST_INTENSITY: f32 = 0.45;
const TREE_INTENSITY: f32 = 0.35;

fn emit_pole(
    world: &mut Vec<(Vec3, f32)>,
    base: Vec3,
    radius: f64,
    height: f64,
    intensity: f32,
) {
    let azimuths = 6;
    let mut z = 0.1;
    while z <= height {
        for a in 0..azimuths {
            let th = a as f64 / azimuths as f64 * std::f64::consts::TAU;
            world.push((
                base + Vec3::new(radius * th.cos(), radius * th.sin(), z),
                intensity,
            ));
        }
        z += 0.25;
    }
}

fn emit_wall(world: &mut Vec<(Vec3, f32)>, a: Vec3, b: Vec3, height: f64, spacing: f64) {
    let along = b - a;
    let len = along.norm();
    let dir = along / len;
    let n_s = (len / spacing).ceil() as usize;
    let n_z = (height / spacing).ceil() as usize;
    for i in 0..=n_s {
        let s = len * i as f64 / n_s as f64;
        for j in 0..=n_z {
            let z = height * j as f64 / n_z as f64;
            world.push((a + s * dir + Vec3::new(0.0, 0.0, z), BUILDING_INTENSITY));
        }
    }
}

/// The driving path densified into uniform arc-length samples and
/// extended past both ends, so roadside structure can follow the road
/// whatever its curvature.
struct RoadPath {
    samples: Vec<(Vec3, f64)>,
    s0: f64,
    ds: f64,
}

impl RoadPath {
    fn new(params: &SynthParams) -> RoadPath {
        let ds = 0.25;
        let margin = params.range + 2.0;
        let kappa = params.yaw_rate_deg.to_radians() / params.step;
        let len = params.frames as f64 * params.step;

        let back_steps = (margin / ds).ceil() as usize;
        let mut samples = Vec::new();
        let mut pos = Vec3::zeros();
        let mut yaw = 0.0;
        for _ in 0..back_steps {
            yaw -= kappa * ds;
            pos -= ds * Vec3::new(yaw.cos(), yaw.sin(), 0.0);
            samples.push((pos, yaw));
        }
        samples.reverse();
        let s0 = -(back_steps as f64) * ds;

        let mut pos = Vec3::zeros();
        let mut yaw = 0.0;
        samples.push((pos, yaw));
        let fwd_steps = ((len + margin) / ds).ceil() as usize;
        for _ in 0..fwd_steps {
            pos += ds * Vec3::new(yaw.cos(), yaw.sin(), 0.0);
            yaw += kappa * ds;
            samples.push((pos, yaw));
        }
        RoadPath { samples, s0, ds }
    }

    fn s_min(&self) -> f64 {
        self.s0
    }

    fn s_max(&self) -> f64 {
        self.s0 + (self.samples.len() - 1) as f64 * self.ds
    }

    /// Position and heading at arc length `s`, clamped to the sampled
    /// extent. Headings never wrap (they are cumulative), so linear
    /// interpolation is exact enough for structure placement.
    fn at(&self, s: f64) -> (Vec3, f64) {
        let u = ((s - self.s0) / self.ds).clamp(0.0, (self.samples.len() - 1) as f64);
        let i = (u.floor() as usize).min(self.samples.len() - 2);
        let f = u - i as f64;
        let (pa, ya) = self.samples[i];
        let (pb, yb) = self.samples[i + 1];
        (pa + f * (pb - pa), ya + f * (yb - ya))
    }

    /// A point offset laterally from the road at arc length `s`:
    /// positive `lateral` is the left shoulder.
    fn offset(&self, s: f64, lateral: f64) -> (Vec3, f64) {
        let (pos, heading) = self.at(s);
        let normal = Vec3::new(-heading.sin(), heading.cos(), 0.0);
        (pos + lateral * normal, heading)
    }
}

/// Builds the static world, in world coordinates with ground at z = 0.
/// Roadside structure is laid out along the (possibly curved) path.
fn build_world(params: &SynthParams) -> Vec<(Vec3, f32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut world = Vec::new();
    let path = RoadPath::new(params);
    let road_len = params.frames as f64 * params.step;

    // Ground grid anchored to absolute multiples of the spacing,
    // covering everything the sensor can see from any pose.
    let margin = params.range + 2.0;
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, 0.0);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0);
    let mut s = 0.0;
    while s <= road_len {
        let (p, _) = path.at(s);
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
        s += path.ds;
    }
    let spacing = params.ground_spacing;
    let x_start = ((lo.x - margin) / spacing).floor() * spacing;
    let y_start = ((lo.y - margin) / spacing).floor() * spacing;
    let mut x = x_start;
    while x <= hi.x + margin {
        let mut y = y_start;
        while y <= hi.y + margin {
            world.push((Vec3::new(x, y, 0.0), GROUND_INTENSITY));
            y += spacing;
        }
        x += spacing;
    }

    // Identical lamp posts at a fixed interval on both road sides: a
    // deliberately repetitive, low-distinctiveness structure.
    let mut ps = path.s_min() + 4.0;
    while ps <= path.s_max() {
        for lateral in [-4.5, 4.5] {
            let (base, _) = path.offset(ps, lateral);
            emit_pole(&mut world, base, 0.12, 3.0, POST_INTENSITY);
        }
        ps += 8.0;
    }

    for _ in 0..params.n_buildings {
        let cs = rng.random_range(path.s_min() + 4.0..path.s_max() - 4.0);
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let lateral = side * rng.random_range(7.0..12.0);
        let half_w = 0.5 * rng.random_range(4.0..8.0);
        let half_d = 0.5 * rng.random_range(4.0..8.0);
        let height = rng.random_range(3.0..6.0);
        let (center, heading) = path.offset(cs, lateral);
        let yaw = rot_z(heading + rng.random_range(-0.4..0.4));
        let corners: Vec<Vec3> = [
            Vec3::new(-half_w, -half_d, 0.0),
            Vec3::new(half_w, -half_d, 0.0),
            Vec3::new(half_w, half_d, 0.0),
            Vec3::new(-half_w, half_d, 0.0),
        ]
        .iter()
        .map(|c| center + yaw * c)
        .collect();
        for i in 0..4 {
            emit_wall(&mut world, corners[i], corners[(i + 1) % 4], height, 0.2);
        }
    }

    for _ in 0..params.n_trees {
        let ts = rng.random_range(path.s_min()..path.s_max());
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let lateral = side * rng.random_range(4.0..8.5);
        let h = rng.random_range(2.0..4.0);
        let (base, _) = path.offset(ts, lateral);
        emit_pole(&mut world, base, 0.14, h, TREE_INTENSITY);
    }
    world
}

fn sensor_poses(params: &SynthParams) -> Vec<RigidTransform> {
    let mut poses = Vec::with_capacity(params.frames);
    let mut pos = Vec3::new(0.0, 0.0, params.sensor_height);
    let mut yaw = 0.0;
    let yaw_step = params.yaw_rate_deg.to_radians();
    for _ in 0..params.frames {
        poses.push(RigidTransform {
            rotation: rot_z(yaw),
            translation: pos,
        });
        pos += params.step * Vec3::new(yaw.cos(), yaw.sin(), 0.0);
        yaw += yaw_step;
    }
    poses
}

/// Generates a full sequence.
///
/// Identical parameters (seed included) always produce identical
/// scans and poses.
pub fn synthesize(params: &SynthParams) -> Result<SynthDataset> {
    params.validate()?;
    let world = build_world(params);
    let poses = sensor_poses(params);
    let noise = Normal::new(0.0, params.sigma)
        .map_err(|e| Error::InvalidParam(format!("bad noise sigma: {e}")))?;
    let mut frames = Vec::with_capacity(params.frames);
    for (k, pose) in poses.iter().enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(params.seed ^ (k as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15));
        let to_local = pose.invert();
        let mut pts = Vec::new();
        let mut intens = Vec::new();
        for (p, inten) in &world {
            let d = (p - pose.translation).norm();
            if d < params.min_range || d > params.range {
                continue;
            }
            let mut local = to_local.apply(p);
            if params.sigma > 0.0 {
                local += Vec3::new(
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                );
            }
            pts.push(local);
            intens.push(*inten);
        }
        let mut cloud = PointCloud::with_intensity(pts, intens)?;
        cloud.frame_id = Some(k);
        frames.push(cloud);
    }
    let trajectory = Trajectory::new(poses, (0..params.frames).collect())?;
    Ok(SynthDataset { frames, trajectory })
}

/// Writes a dataset in KITTI odometry layout under `root`:
/// `sequences/<seq>/velodyne/%06d.bin` and `poses/<seq>.txt`.
pub fn write_kitti(ds: &SynthDataset, root: &Path, sequence: &str) -> Result<()> {
    let velo_dir = root.join("sequences").join(sequence).join("velodyne");
    let pose_dir = root.join("poses");
    for dir in [&velo_dir, &pose_dir] {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
    }
    for (k, frame) in ds.frames.iter().enumerate() {
        kitti::save_bin(&velo_dir.join(format!("{k:06}.bin")), frame)?;
    }
    kitti::save_poses(&pose_dir.join(format!("{sequence}.txt")), &ds.trajectory.poses)
}
