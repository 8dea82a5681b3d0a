//! Training pairs from annotated real videos.

use serde::{Deserialize, Serialize};

use super::maps::{correspondences, render_movement_map, render_position_map, RenderParams};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{children_of, Cell, PopulationState, TrackRecord};
use crate::motion::{lineage_mitosis_clock, radius_for_area};
use crate::raster::{GrayImage, RgbImage};
use crate::rng::RandomSource;
use crate::stats::CentroidTable;

/// 8-bit raw frames plus their tracking annotation.
#[derive(Debug, Clone)]
pub struct AnnotatedVideo {
    pub raw: Vec<GrayImage>,
    pub tracks: Vec<TrackRecord>,
    /// Normalized centroid per `(label, frame)`.
    pub centroids: CentroidTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Position,
    Movement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Frame of the target image.
    pub target_frame: u32,
    /// Frame whose raw image sits in the red channel (movement pairs only).
    pub raw_frame: Option<u32>,
    /// `[x, y, width, height]` of the crop window, if any.
    pub crop: Option<[usize; 4]>,
    /// Clockwise quarter turns applied after cropping.
    pub rotation: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub conditioning: RgbImage,
    pub target: GrayImage,
    pub kind: PairKind,
    pub provenance: Provenance,
}

/// Population state at `frame` rebuilt from the annotation. Every cell gets
/// the mean area; clocks come from the lineage.
pub fn population_from_annotation(
    tracks: &[TrackRecord],
    centroids: &CentroidTable,
    frame: u32,
    params: &RenderParams,
) -> Result<PopulationState> {
    let parents = children_of(tracks);
    let mut cells = Vec::new();
    for r in tracks.iter().filter(|r| r.is_alive(frame)) {
        let Some(&position) = centroids.get(&(r.label, frame)) else {
            return Err(Error::invalid(
                "annotation",
                format!("track {} has no mask in frame {frame}", r.label),
            ));
        };
        cells.push(Cell {
            track_id: r.label,
            position,
            radius: radius_for_area(params.mean_area, params.image_size),
            area: params.mean_area,
            mitosis_clock: lineage_mitosis_clock(
                r,
                parents.contains_key(&r.label),
                frame,
                params.mitosis_cycle_length,
            ),
            parent_id: (r.parent != 0 && r.begin == frame).then_some(r.parent),
        });
    }
    cells.sort_by_key(|c| c.track_id);
    Ok(PopulationState::new(frame, cells))
}

/// One position pair per frame followed by one movement pair per
/// consecutive pair of frames. The movement conditioning for target frame
/// `t` holds raw frame `t+1` in red and the annotated positions of `t` with
/// lines back from `t+1`.
pub fn build_training_pairs(
    video: &AnnotatedVideo,
    params: &RenderParams,
    exec: Execution,
) -> Result<Vec<TrainingPair>> {
    let n = video.raw.len();
    let size = params.image_size;
    for raw in &video.raw {
        if raw.dimensions() != (size.width, size.height) {
            return Err(Error::Image(crate::error::ImageError::DimensionMismatch {
                expected: (size.width, size.height),
                found: raw.dimensions(),
            }));
        }
    }
    let states = exec.try_map_range(n, |t| {
        population_from_annotation(&video.tracks, &video.centroids, t as u32, params)
    })?;
    let position = exec.map_range(n, |t| TrainingPair {
        conditioning: render_position_map(&states[t], params),
        target: video.raw[t].clone(),
        kind: PairKind::Position,
        provenance: Provenance {
            target_frame: t as u32,
            raw_frame: None,
            crop: None,
            rotation: 0,
        },
    });
    let movement = exec.try_map_range(n.saturating_sub(1), |t| {
        let links = correspondences(&states[t], &states[t + 1]);
        let conditioning = render_movement_map(&video.raw[t + 1], &states[t], &links, params)?;
        Ok::<_, Error>(TrainingPair {
            conditioning,
            target: video.raw[t].clone(),
            kind: PairKind::Movement,
            provenance: Provenance {
                target_frame: t as u32,
                raw_frame: Some(t as u32 + 1),
                crop: None,
                rotation: 0,
            },
        })
    })?;
    let mut pairs = position;
    pairs.extend(movement);
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    /// Aligned random `h/2 × w/2` crop, then a random rotation.
    Patch,
    /// Random rotation only.
    Full,
}

pub fn augment_pair(
    pair: &TrainingPair,
    rng: &mut RandomSource,
    mode: AugmentMode,
) -> Result<TrainingPair> {
    let (w, h) = pair.conditioning.dimensions();
    if pair.target.dimensions() != (w, h) {
        return Err(Error::Image(crate::error::ImageError::DimensionMismatch {
            expected: (w, h),
            found: pair.target.dimensions(),
        }));
    }
    let (mut conditioning, mut target, mut crop) =
        (pair.conditioning.clone(), pair.target.clone(), None);
    if mode == AugmentMode::Patch {
        let (cw, ch) = (w / 2, h / 2);
        if cw == 0 || ch == 0 {
            return Err(Error::invalid(
                "augment",
                format!("{w}x{h} image is too small to crop"),
            ));
        }
        let x0 = rng.index(w - cw + 1);
        let y0 = rng.index(h - ch + 1);
        conditioning = conditioning.crop(x0, y0, cw, ch);
        target = target.crop(x0, y0, cw, ch);
        crop = Some([x0, y0, cw, ch]);
    }
    let k = rng.index(4) as u8;
    Ok(TrainingPair {
        conditioning: conditioning.rotate_quarters(k),
        target: target.rotate_quarters(k),
        kind: pair.kind,
        provenance: Provenance {
            crop,
            rotation: k,
            ..pair.provenance
        },
    })
}
