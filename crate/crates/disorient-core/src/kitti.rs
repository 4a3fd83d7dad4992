//! KITTI odometry I/O: velodyne `.bin` scans, `poses.txt` files, and
//! simple PLY/CSV export for inspection.
//!
//! A velodyne scan is a flat little-endian array of f32 records
//! `(x, y, z, reflectance)`. A pose file holds one row-major 3x4 `[R|t]`
//! matrix per line mapping sensor coordinates into the world frame.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::se3::{nearest_rotation, Mat3, RigidTransform, Trajectory, Vec3};

const RECORD_BYTES: usize = 16;

/// Largest rotation-part drift accepted verbatim; beyond this the rotation
/// is re-projected onto SO(3).
const ROTATION_DRIFT_TOL: f64 = 1e-6;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a velodyne `.bin` scan. Reflectance lands in `intensity`.
pub fn load_bin(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::TruncatedScan {
            path: path.to_path_buf(),
            len: bytes.len() as u64,
        });
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let f = |o: usize| f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]);
        let (x, y, z, r) = (f(0), f(4), f(8), f(12));
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::NonFinitePoint { index: i });
        }
        points.push(Vec3::new(x as f64, y as f64, z as f64));
        intensity.push(r);
    }
    let mut cloud = PointCloud::new(points);
    cloud.intensity = Some(intensity);
    Ok(cloud)
}

/// Writes a velodyne `.bin` scan; missing intensity is written as zero.
pub fn save_bin(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut bytes = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    for (i, p) in cloud.points.iter().enumerate() {
        let r = cloud
            .intensity
            .as_ref()
            .map(|v| v[i])
            .unwrap_or(0.0);
        for v in [p.x as f32, p.y as f32, p.z as f32, r] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn parse_pose_line(line: &str, line_no: usize) -> Result<RigidTransform> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::MalformedPoseLine {
            line: line_no,
            found: line.split_whitespace().count(),
        })?;
    if vals.len() != 12 {
        return Err(Error::MalformedPoseLine {
            line: line_no,
            found: vals.len(),
        });
    }
    let rotation = Mat3::new(
        vals[0], vals[1], vals[2], vals[4], vals[5], vals[6], vals[8], vals[9], vals[10],
    );
    let translation = Vec3::new(vals[3], vals[7], vals[11]);
    if rotation.determinant() <= 0.0 {
        return Err(Error::ImproperRotation { line: line_no });
    }
    let t = RigidTransform {
        rotation,
        translation,
    };
    if t.rotation_drift() > ROTATION_DRIFT_TOL {
        let fixed =
            nearest_rotation(&rotation).map_err(|_| Error::ImproperRotation { line: line_no })?;
        return Ok(RigidTransform {
            rotation: fixed,
            translation,
        });
    }
    Ok(t)
}

/// Reads a KITTI pose file: one 3x4 `[R|t]` per non-empty line.
///
/// Rotations with orthonormality drift beyond 1e-6 are projected back
/// onto SO(3); a rotation part with non-positive determinant is rejected.
pub fn load_poses(path: &Path) -> Result<Vec<RigidTransform>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_pose_line(l, i + 1))
        .collect()
}

/// Writes poses in the same 12-value row-major layout `load_poses` reads.
pub fn save_poses(path: &Path, poses: &[RigidTransform]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    for p in poses {
        let r = &p.rotation;
        let t = &p.translation;
        writeln!(
            w,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads the `Tr:` sensor-to-reference extrinsic from a KITTI `calib.txt`.
/// A bare line of 12 values (no label) is accepted too.
pub fn load_calib(path: &Path) -> Result<RigidTransform> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    for (i, line) in text.lines().enumerate() {
        let body = match line.split_once(':') {
            Some((label, rest)) if label.trim() == "Tr" => rest,
            Some(_) => continue,
            None => line,
        };
        if body.trim().is_empty() {
            continue;
        }
        return parse_pose_line(body, i + 1);
    }
    Err(Error::InvalidParam(format!(
        "no Tr line in {}",
        path.display()
    )))
}

/// Conjugates reference-frame poses into the sensor frame:
/// `T_sensor = Tr⁻¹ ∘ T_ref ∘ Tr`.
pub fn calibrate_poses(poses: &[RigidTransform], calib: &RigidTransform) -> Vec<RigidTransform> {
    let inv = calib.invert();
    poses
        .iter()
        .map(|p| inv.compose(p).compose(calib))
        .collect()
}

/// Loads a pose file as a [`Trajectory`], optionally conjugating each pose
/// by `calib` to move camera-frame poses into the sensor frame.
pub fn load_trajectory(path: &Path, calib: Option<&RigidTransform>) -> Result<Trajectory> {
    let mut poses = load_poses(path)?;
    if let Some(tr) = calib {
        poses = calibrate_poses(&poses, tr);
    }
    let frame_ids = (0..poses.len()).collect();
    Trajectory::new(poses, frame_ids)
}

/// Writes an ASCII PLY file; intensity becomes a per-vertex property
/// when present.
pub fn export_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let write = |w: &mut BufWriter<fs::File>, s: String| -> Result<()> {
        w.write_all(s.as_bytes()).map_err(|e| io_err(path, e))
    };
    let mut header = String::from("ply\nformat ascii 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.intensity.is_some() {
        header.push_str("property float intensity\n");
    }
    header.push_str("end_header\n");
    write(&mut w, header)?;
    for (i, p) in cloud.points.iter().enumerate() {
        let row = match &cloud.intensity {
            Some(ints) => format!("{} {} {} {}\n", p.x, p.y, p.z, ints[i]),
            None => format!("{} {} {}\n", p.x, p.y, p.z),
        };
        write(&mut w, row)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes points as CSV with an `x,y,z[,intensity]` header.
pub fn export_csv(path: &Path, cloud: &PointCloud) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let header = if cloud.intensity.is_some() {
        "x,y,z,intensity\n"
    } else {
        "x,y,z\n"
    };
    w.write_all(header.as_bytes()).map_err(|e| io_err(path, e))?;
    for (i, p) in cloud.points.iter().enumerate() {
        let row = match &cloud.intensity {
            Some(ints) => format!("{},{},{},{}\n", p.x, p.y, p.z, ints[i]),
            None => format!("{},{},{}\n", p.x, p.y, p.z),
        };
        w.write_all(row.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
