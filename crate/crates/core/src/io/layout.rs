//! On-disk layout of one video directory.
//!
//! ```text
//! <root>/
//!   gt_tracks.txt      lineage ground truth
//!   trajectory.json    simulated states (generated videos only)
//!   manifest.json      reverse-time consumption order
//!   det/t0000.png      16-bit detection labels
//!   pos/t0000.png      position maps
//!   mov/t0000.png      movement maps
//!   raw/t0000.png      raw frames (attached externally)
//!   seg/t0000.png      segmentation labels
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const TRACK_FILE: &str = "gt_tracks.txt";
/// Accepted when a directory holds tracking results instead of ground truth.
pub const RESULT_TRACK_FILE: &str = "res_track.txt";
pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAME_PREFIX: &str = "t";

/// `{prefix}{frame:04}.png`
pub fn frame_file_name(prefix: &str, frame: usize) -> String {
    format!("{prefix}{frame:04}.png")
}

/// Parses a frame index out of `{prefix}{digits}.png`.
pub fn parse_frame_file_name(prefix: &str, name: &str) -> Option<usize> {
    let digits = name.strip_prefix(prefix)?.strip_suffix(".png")?;
    if digits.len() < 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn raw_dir(&self) -> PathBuf {
        self.root.join("raw")
    }

    pub fn pos_dir(&self) -> PathBuf {
        self.root.join("pos")
    }

    pub fn mov_dir(&self) -> PathBuf {
        self.root.join("mov")
    }

    pub fn seg_dir(&self) -> PathBuf {
        self.root.join("seg")
    }

    pub fn det_dir(&self) -> PathBuf {
        self.root.join("det")
    }

    pub fn track_file(&self) -> PathBuf {
        self.root.join(TRACK_FILE)
    }

    /// The ground-truth track file, or the result track file when only that
    /// one exists.
    pub fn existing_track_file(&self) -> Result<PathBuf> {
        [TRACK_FILE, RESULT_TRACK_FILE]
            .iter()
            .map(|n| self.root.join(n))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                Error::io(
                    self.track_file(),
                    std::io::Error::new(std::io::ErrorKind::NotFound, "no track file"),
                )
            })
    }

    pub fn trajectory_file(&self) -> PathBuf {
        self.root.join(TRAJECTORY_FILE)
    }

    pub fn manifest_file(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn frame_path(dir: &Path, frame: usize) -> PathBuf {
        dir.join(frame_file_name(FRAME_PREFIX, frame))
    }

    pub fn create_dirs(&self, dirs: &[PathBuf]) -> Result<()> {
        for d in dirs {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(())
    }
}

/// Lists `t0000.png, t0001.png, …` in `dir`, requiring indices to be
/// contiguous from 0.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(idx) = name
            .to_str()
            .and_then(|n| parse_frame_file_name(FRAME_PREFIX, n))
        {
            frames.push((idx, entry.path()));
        }
    }
    frames.sort();
    for (expected, (idx, path)) in frames.iter().enumerate() {
        if *idx != expected {
            return Err(Error::invalid(
                "frame sequence",
                format!("{}: expected frame {expected}, found {idx}", path.display()),
            ));
        }
    }
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}
