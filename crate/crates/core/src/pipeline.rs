//! End-to-end dataset export and segmentation attachment.
//!
//! Each video goes to `video_NNN/` (see [`crate::io::layout`]). The
//! simulation runs forward in time; `manifest.json` lists the generation
//! order backwards: the last frame from its position map, then every earlier
//! frame from the movement map named after it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io::layout::{frame_file_name, FRAME_PREFIX};
use crate::io::{
    list_frames, read_label_image, write_label_image, write_rgb_image, write_text,
    write_track_file, DatasetLayout,
};
use crate::model::{ImageSize, SimulationConfig, TimeLapseTrajectory};
use crate::motion::simulate;
use crate::pseudo_gt::{
    check_bijection, correct_segmentation_detailed, detections_from_frame, CorrectionReport,
};
use crate::render::{render_conditioning, render_detection_labels, RenderParams};
use crate::rng::{derive_child_seed, RandomSource};

pub const SUMMARY_FILE: &str = "summary.json";

pub fn video_dir_name(index: usize) -> String {
    format!("video_{index:03}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Position,
    Movement,
}

/// One generation step. Paths are relative to the video directory; `raw`
/// and `seg` name files that are attached later.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStep {
    pub frame: u32,
    pub kind: StepKind,
    pub conditioning: String,
    /// Previously generated frame that goes into the red channel.
    pub source_raw: Option<String>,
    pub raw: String,
    pub seg: String,
    pub detections: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video: usize,
    pub seed: u64,
    pub frames: usize,
    pub image_size: ImageSize,
    pub mean_area: f64,
    pub mitosis_cycle_length: u32,
    pub steps: Vec<ManifestStep>,
}

impl VideoManifest {
    pub fn load(video_dir: &Path) -> Result<Self> {
        read_json(&DatasetLayout::new(video_dir).manifest_file())
    }

    pub fn render_params(&self) -> RenderParams {
        RenderParams {
            image_size: self.image_size,
            mean_area: self.mean_area,
            mitosis_cycle_length: self.mitosis_cycle_length,
        }
    }
}

fn rel(dir: &str, frame: u32) -> String {
    format!("{dir}/{}", frame_file_name(FRAME_PREFIX, frame as usize))
}

fn build_manifest(video: usize, seed: u64, frames: usize, params: &RenderParams) -> VideoManifest {
    let steps = (0..frames as u32)
        .rev()
        .map(|t| {
            let last = t as usize + 1 == frames;
            ManifestStep {
                frame: t,
                kind: if last {
                    StepKind::Position
                } else {
                    StepKind::Movement
                },
                conditioning: rel(if last { "pos" } else { "mov" }, t),
                source_raw: (!last).then(|| rel("raw", t + 1)),
                raw: rel("raw", t),
                seg: rel("seg", t),
                detections: rel("det", t),
            }
        })
        .collect();
    VideoManifest {
        video,
        seed,
        frames,
        image_size: params.image_size,
        mean_area: params.mean_area,
        mitosis_cycle_length: params.mitosis_cycle_length,
        steps,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub index: usize,
    pub directory: String,
    pub seed: u64,
    pub cell_counts: Vec<usize>,
    pub track_count: usize,
    pub division_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub master_seed: u64,
    pub frames_per_video: usize,
    pub image_size: ImageSize,
    pub videos: Vec<VideoSummary>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::invalid("json", e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::invalid("json", format!("{}: {e}", path.display())))
}

pub fn render_params(config: &SimulationConfig) -> RenderParams {
    RenderParams {
        image_size: config.image_size,
        mean_area: config.stats.mean_area,
        mitosis_cycle_length: config.mitosis_cycle_length,
    }
}

/// Writes detection labels (`det/`), the last position map (`pos/`) and the
/// movement maps (`mov/`, named by their target frame) of a trajectory.
pub fn write_conditioning(
    dir: &Path,
    trajectory: &TimeLapseTrajectory,
    params: &RenderParams,
) -> Result<()> {
    let layout = DatasetLayout::new(dir);
    layout.create_dirs(&[layout.det_dir(), layout.pos_dir(), layout.mov_dir()])?;
    for frame in &trajectory.frames {
        let labels = render_detection_labels(frame, params)?;
        write_label_image(
            &labels,
            DatasetLayout::frame_path(&layout.det_dir(), frame.frame as usize),
        )?;
    }
    let maps = render_conditioning(trajectory, params, Execution::Sequential)?;
    let last = trajectory.frames.len() - 1;
    write_rgb_image(
        &maps.last_position,
        DatasetLayout::frame_path(&layout.pos_dir(), last),
    )?;
    for (target, map) in &maps.movement {
        write_rgb_image(
            map,
            DatasetLayout::frame_path(&layout.mov_dir(), *target as usize),
        )?;
    }
    Ok(())
}

/// Writes the track file and trajectory JSON of a simulated video.
pub fn write_ground_truth(dir: &Path, trajectory: &TimeLapseTrajectory) -> Result<()> {
    let layout = DatasetLayout::new(dir);
    layout.create_dirs(&[dir.to_path_buf()])?;
    write_text(layout.track_file(), &write_track_file(&trajectory.lineage))?;
    let json =
        serde_json::to_string(trajectory).map_err(|e| Error::invalid("json", e.to_string()))?;
    write_text(layout.trajectory_file(), &(json + "\n"))
}

/// Writes every generated artifact of one trajectory into `dir`.
pub fn write_video(
    dir: &Path,
    trajectory: &TimeLapseTrajectory,
    params: &RenderParams,
    video: usize,
    seed: u64,
) -> Result<()> {
    write_ground_truth(dir, trajectory)?;
    write_conditioning(dir, trajectory, params)?;
    let manifest = build_manifest(video, seed, trajectory.frames.len(), params);
    write_json(&DatasetLayout::new(dir).manifest_file(), &manifest)
}

fn replace_dir(from: &Path, to: &Path) -> Result<()> {
    if to.exists() {
        fs::remove_dir_all(to).map_err(|e| Error::io(to, e))?;
    }
    fs::rename(from, to).map_err(|e| Error::io(to, e))
}

/// Simulates and exports `n_videos` videos under `out_dir`. Each video is
/// built in a hidden staging directory and moved into place only when
/// complete; a failed video leaves nothing behind.
pub fn generate_dataset(
    config: &SimulationConfig,
    n_videos: usize,
    out_dir: &Path,
    exec: Execution,
) -> Result<DatasetSummary> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let params = render_params(config);
    let videos = exec.try_map_range(n_videos, |v| {
        let seed = derive_child_seed(config.master_seed, v as u64);
        let name = video_dir_name(v);
        let staging = out_dir.join(format!(".{name}.partial"));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        let result = simulate(config, &mut RandomSource::from_seed(seed)).and_then(|trajectory| {
            write_video(&staging, &trajectory, &params, v, seed)?;
            replace_dir(&staging, &out_dir.join(&name))?;
            Ok(VideoSummary {
                index: v,
                directory: name.clone(),
                seed,
                cell_counts: trajectory.frames.iter().map(|f| f.len()).collect(),
                track_count: trajectory.lineage.len(),
                division_count: trajectory.division_count(),
            })
        });
        if result.is_err() {
            let _ = fs::remove_dir_all(&staging);
        }
        result
    })?;
    let summary = DatasetSummary {
        master_seed: config.master_seed,
        frames_per_video: config.frames_per_video,
        image_size: config.image_size,
        videos,
    };
    write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCorrection {
    pub frame: u32,
    pub report: CorrectionReport,
    pub bijection: bool,
    pub orphan_labels: Vec<u16>,
    pub missing_detections: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachReport {
    pub frames: Vec<FrameCorrection>,
}

impl AttachReport {
    pub fn bijection_holds(&self) -> bool {
        self.frames.iter().all(|f| f.bijection)
    }
}

/// Corrects the masks in `masks_dir` against the video's detections and
/// writes the result to the video's `seg/`.
pub fn attach_and_correct(
    video_dir: &Path,
    masks_dir: &Path,
    exec: Execution,
) -> Result<AttachReport> {
    let layout = DatasetLayout::new(video_dir);
    let manifest = VideoManifest::load(video_dir)?;
    let trajectory: TimeLapseTrajectory = read_json(&layout.trajectory_file())?;
    let masks = list_frames(masks_dir)?;
    if masks.len() != trajectory.frames.len() {
        return Err(Error::invalid(
            "masks",
            format!(
                "{} mask frames for a {}-frame video",
                masks.len(),
                trajectory.frames.len()
            ),
        ));
    }
    let size = manifest.image_size;
    let staging = video_dir.join(".seg.partial");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    let result = exec.try_map_range(masks.len(), |t| {
        let seg = read_label_image(&masks[t])?;
        if seg.dimensions() != (size.width, size.height) {
            return Err(Error::Image(crate::error::ImageError::DimensionMismatch {
                expected: (size.width, size.height),
                found: seg.dimensions(),
            }));
        }
        let detections = detections_from_frame(&trajectory.frames[t], size)?;
        let c = correct_segmentation_detailed(&seg, &detections, manifest.mean_area);
        write_label_image(&c.labels, DatasetLayout::frame_path(&staging, t))?;
        let check = check_bijection(&c.labels, &detections);
        Ok(FrameCorrection {
            frame: t as u32,
            report: c.report,
            bijection: check.holds(),
            orphan_labels: check.orphan_labels,
            missing_detections: check.missing_detections,
        })
    });
    match result {
        Ok(frames) => {
            replace_dir(&staging, &layout.seg_dir())?;
            Ok(AttachReport { frames })
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

/// Every file under `root` with its contents, sorted by relative path.
pub fn snapshot_tree(root: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                out.push((
                    path.strip_prefix(root).unwrap_or(&path).to_path_buf(),
                    bytes,
                ));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}
