//! CSV emission and parsing. All floats go through `Display`, which is
//! shortest-roundtrip and deterministic, so identical runs produce
//! identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use disorient_core::attack::Strategy;
use disorient_core::defense::VoidAlert;
use disorient_core::metrics::{summarize, EvalConfig, PairError, Summary};
use disorient_core::occlusion::Mode;
use disorient_core::{Error, Result, Trajectory};

use crate::pipeline::CellSpec;

pub const PER_PAIR_HEADER: &str =
    "seq,frame_i,frame_j,strategy,k,side_m,yaw_deg,mode,converged,rre_deg,rte_m,removed_points";
pub const SUMMARY_HEADER: &str =
    "strategy,k,side_m,yaw_deg,mean_rre_deg,mean_rte_m,rr,n_pairs";
pub const OCCLUSION_HEADER: &str = "pair_id,patch_id,removed_count";
pub const ALERTS_HEADER: &str = "frame,cluster_id,cx,cy,cz,voxels,persistence";

#[derive(Debug, Clone)]
pub struct PerPairRow {
    pub seq: String,
    pub cell: CellSpec,
    pub mode: Mode,
    pub error: PairError,
    pub removed_points: usize,
}

impl PerPairRow {
    fn to_csv(&self) -> String {
        let e = &self.error;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seq,
            e.pair_id.0,
            e.pair_id.1,
            self.cell.strategy,
            self.cell.k,
            self.cell.side,
            self.cell.yaw,
            self.mode,
            e.converged,
            e.rre_deg,
            e.rte_m,
            self.removed_points
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub cell: CellSpec,
    pub summary: Summary,
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_per_pair(path: &Path, rows: &[PerPairRow]) -> Result<()> {
    let mut out = String::from(PER_PAIR_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    write_file(path, &out)
}

/// Aggregates per-pair rows into one summary row per cell, preserving
/// first-seen cell order.
pub fn summarize_rows(rows: &[PerPairRow], eval: &EvalConfig) -> Result<Vec<SummaryRow>> {
    let mut order: Vec<CellSpec> = Vec::new();
    let mut buckets: Vec<Vec<PairError>> = Vec::new();
    for row in rows {
        match order.iter().position(|c| *c == row.cell) {
            Some(i) => buckets[i].push(row.error),
            None => {
                order.push(row.cell);
                buckets.push(vec![row.error]);
            }
        }
    }
    order
        .into_iter()
        .zip(buckets)
        .map(|(cell, errors)| {
            Ok(SummaryRow {
                cell,
                summary: summarize(&errors, eval)?,
            })
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        let s = &row.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.cell.strategy,
            row.cell.k,
            row.cell.side,
            row.cell.yaw,
            s.mean_rre_deg,
            s.mean_rte_m,
            s.recall,
            s.n_pairs
        );
    }
    write_file(path, &out)
}

/// Reads a summary CSV back, for replotting.
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SUMMARY_HEADER => {}
        other => {
            return Err(Error::InvalidParam(format!(
                "{}: expected summary header {SUMMARY_HEADER:?}, found {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::InvalidParam(format!(
                "{} line {}: expected 8 fields, found {}",
                path.display(),
                n + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| {
            Error::InvalidParam(format!("{} line {}: bad {what}", path.display(), n + 2))
        };
        let strategy: Strategy = fields[0].parse().map_err(|_| bad("strategy"))?;
        let k: usize = fields[1].parse().map_err(|_| bad("k"))?;
        let side: f64 = fields[2].parse().map_err(|_| bad("side_m"))?;
        let yaw: f64 = fields[3].parse().map_err(|_| bad("yaw_deg"))?;
        let mean_rre_deg: f64 = fields[4].parse().map_err(|_| bad("mean_rre_deg"))?;
        let mean_rte_m: f64 = fields[5].parse().map_err(|_| bad("mean_rte_m"))?;
        let recall: f64 = fields[6].parse().map_err(|_| bad("rr"))?;
        let n_pairs: usize = fields[7].parse().map_err(|_| bad("n_pairs"))?;
        rows.push(SummaryRow {
            cell: CellSpec {
                strategy,
                k,
                side,
                yaw,
            },
            summary: Summary {
                mean_rre_deg,
                mean_rte_m,
                recall,
                n_pairs,
            },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct OcclusionRow {
    pub pair_id: String,
    pub patch_id: usize,
    pub removed_count: usize,
}

pub fn write_occlusion(path: &Path, rows: &[OcclusionRow]) -> Result<()> {
    let mut out = String::from(OCCLUSION_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{},{},{}", row.pair_id, row.patch_id, row.removed_count);
    }
    write_file(path, &out)
}

pub fn write_alerts(path: &Path, rows: &[(usize, usize, VoidAlert)]) -> Result<()> {
    let mut out = String::from(ALERTS_HEADER);
    out.push('\n');
    for (frame, cluster_id, alert) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            frame,
            cluster_id,
            alert.centroid.x,
            alert.centroid.y,
            alert.centroid.z,
            alert.voxel_count,
            alert.persistence
        );
    }
    write_file(path, &out)
}

/// Writes pose translations as a 3-column CSV.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::from("x,y,z\n");
    for pose in &traj.poses {
        let t = &pose.translation;
        let _ = writeln!(out, "{},{},{}", t.x, t.y, t.z);
    }
    write_file(path, &out)
}
