//! KITTI-layout dataset access: `sequences/<id>/velodyne/%06d.bin`
//! scans and `poses/<id>.txt` ground truth.

use std::path::{Path, PathBuf};

use disorient_core::cloud::PointCloud;
use disorient_core::kitti;
use disorient_core::{Error, Result, Trajectory};

#[derive(Debug, Clone)]
pub struct Sequence {
    pub root: PathBuf,
    pub id: String,
}

impl Sequence {
    pub fn new(root: &Path, id: &str) -> Self {
        Self {
            root: root.to_path_buf(),
            id: id.to_string(),
        }
    }

    pub fn velodyne_dir(&self) -> PathBuf {
        self.root.join("sequences").join(&self.id).join("velodyne")
    }

    pub fn scan_path(&self, frame: usize) -> PathBuf {
        self.velodyne_dir().join(format!("{frame:06}.bin"))
    }

    pub fn poses_path(&self) -> PathBuf {
        self.root.join("poses").join(format!("{}.txt", self.id))
    }

    /// Number of scans, requiring contiguous frame ids from zero.
    pub fn scan_count(&self) -> Result<usize> {
        let dir = self.velodyne_dir();
        let entries = std::fs::read_dir(&dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        let mut ids: Vec<usize> = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("bin") {
                continue;
            }
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<usize>().ok());
            match stem {
                Some(i) => ids.push(i),
                None => {
                    return Err(Error::InvalidParam(format!(
                        "unexpected scan file name {}",
                        path.display()
                    )))
                }
            }
        }
        ids.sort_unstable();
        for (want, &got) in ids.iter().enumerate() {
            if want != got {
                return Err(Error::InvalidParam(format!(
                    "scan files in {} are not contiguous: missing frame {want}",
                    dir.display()
                )));
            }
        }
        Ok(ids.len())
    }

    pub fn load_scan(&self, frame: usize) -> Result<PointCloud> {
        let mut cloud = kitti::load_bin(&self.scan_path(frame))?;
        cloud.frame_id = Some(frame);
        Ok(cloud)
    }

    pub fn load_gt(&self) -> Result<Trajectory> {
        kitti::load_trajectory(&self.poses_path(), None)
    }
}

/// All (i, i + stride) pairs available from `n_frames` scans.
pub fn pairs(n_frames: usize, stride: usize) -> Vec<(usize, usize)> {
    if stride == 0 || n_frames <= stride {
        return Vec::new();
    }
    (0..n_frames - stride).map(|i| (i, i + stride)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use disorient_core::synth::{synthesize, write_kitti, SynthParams};

    #[test]
    fn pair_enumeration_matches_stride() {
        assert_eq!(pairs(5, 1), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(pairs(5, 2), vec![(0, 2), (1, 3), (2, 4)]);
        assert_eq!(pairs(3, 5), Vec::<(usize, usize)>::new());
        assert_eq!(pairs(3, 0), Vec::<(usize, usize)>::new());
    }

    #[test]
    fn synthetic_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let params = SynthParams {
            frames: 3,
            seed: 5,
            range: 8.0,
            n_buildings: 2,
            n_trees: 2,
            ..SynthParams::default()
        };
        let ds = synthesize(&params).unwrap();
        write_kitti(&ds, dir.path(), "00").unwrap();

        let seq = Sequence::new(dir.path(), "00");
        assert_eq!(seq.scan_count().unwrap(), 3);
        let scan = seq.load_scan(1).unwrap();
        assert_eq!(scan.len(), ds.frames[1].len());
        assert_eq!(scan.frame_id, Some(1));
        let gt = seq.load_gt().unwrap();
        assert_eq!(gt.len(), 3);
    }

    #[test]
    fn missing_frame_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let params = SynthParams {
            frames: 3,
            seed: 5,
            range: 8.0,
            n_buildings: 1,
            n_trees: 1,
            ..SynthParams::default()
        };
        let ds = synthesize(&params).unwrap();
        write_kitti(&ds, dir.path(), "00").unwrap();
        let seq = Sequence::new(dir.path(), "00");
        std::fs::remove_file(seq.scan_path(1)).unwrap();
        assert!(seq.scan_count().is_err());
    }
}
