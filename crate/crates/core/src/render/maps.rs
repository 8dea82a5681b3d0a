//! Position maps, movement maps and detection label images.

use serde::{Deserialize, Serialize};

use super::color::{mitosis_color, MitosisPhase};
use super::draw::{containing_pixel, disk_pixels, line_pixels};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Cell, ImageSize, Point, PopulationState, TimeLapseTrajectory};
use crate::raster::{GrayImage, LabelImage, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub image_size: ImageSize,
    /// Mean cell area A_c in pixels².
    pub mean_area: f64,
    pub mitosis_cycle_length: u32,
}

impl RenderParams {
    /// Radius of a position-map disk, `sqrt(A_c/π)/4` pixels.
    pub fn disk_radius(&self) -> f64 {
        (self.mean_area / std::f64::consts::PI).sqrt() / 4.0
    }

    fn pixel_position(&self, p: Point) -> Point {
        self.image_size.to_pixels(p)
    }

    fn color(&self, cell: &Cell) -> [u8; 3] {
        mitosis_color(MitosisPhase::from_clock(
            cell.mitosis_clock,
            self.mitosis_cycle_length,
        ))
    }

    fn cells_in_draw_order<'a>(&self, frame: &'a PopulationState) -> Vec<&'a Cell> {
        let mut cells: Vec<&Cell> = frame.cells.iter().collect();
        cells.sort_by_key(|c| c.track_id);
        cells
    }
}

/// Black image with one disk per cell in its mitosis colour; cells with
/// higher track ids are drawn on top.
pub fn render_position_map(frame: &PopulationState, params: &RenderParams) -> RgbImage {
    let ImageSize { height, width } = params.image_size;
    let mut img = RgbImage::new(width, height);
    let r = params.disk_radius();
    for cell in params.cells_in_draw_order(frame) {
        let color = params.color(cell);
        for (x, y) in disk_pixels(params.pixel_position(cell.position), r, width, height) {
            img.set(x, y, color);
        }
    }
    img
}

pub fn render_position_maps(
    frames: &[PopulationState],
    params: &RenderParams,
    exec: Execution,
) -> Vec<RgbImage> {
    exec.map(frames, |f| render_position_map(f, params))
}

/// A cell of the earlier frame and where its track (or, across a division,
/// one of its daughters) sits in the later frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub previous_track: u32,
    pub position: Point,
}

/// Correspondences from `later` back to `earlier`: same track, or the parent
/// for a daughter born in `later`.
pub fn correspondences(earlier: &PopulationState, later: &PopulationState) -> Vec<Correspondence> {
    later
        .cells
        .iter()
        .filter_map(|c| {
            let previous = if earlier.cell(c.track_id).is_some() {
                c.track_id
            } else {
                c.parent_id.filter(|p| earlier.cell(*p).is_some())?
            };
            Some(Correspondence {
                previous_track: previous,
                position: c.position,
            })
        })
        .collect()
}

/// Red: the later raw frame. Green/blue: the earlier position map plus a
/// line from each later position back to the matching earlier centre, in
/// the earlier cell's colour. Lines overwrite disks.
pub fn render_movement_map(
    raw_later: &GrayImage,
    earlier: &PopulationState,
    links: &[Correspondence],
    params: &RenderParams,
) -> Result<RgbImage> {
    let ImageSize { height, width } = params.image_size;
    if raw_later.dimensions() != (width, height) {
        return Err(Error::Image(crate::error::ImageError::DimensionMismatch {
            expected: (width, height),
            found: raw_later.dimensions(),
        }));
    }
    let mut img = render_position_map(earlier, params);
    for link in links {
        let Some(cell) = earlier.cell(link.previous_track) else {
            return Err(Error::invalid(
                "correspondence",
                format!("track {} is not in the earlier frame", link.previous_track),
            ));
        };
        let [_, g, b] = params.color(cell);
        let from = containing_pixel(params.pixel_position(link.position), width, height);
        let to = containing_pixel(params.pixel_position(cell.position), width, height);
        for (x, y) in line_pixels(from, to) {
            let px = img.get_mut(x, y);
            px[1] = g;
            px[2] = b;
        }
    }
    for (px, &red) in img.pixels_mut().iter_mut().zip(raw_later.pixels()) {
        px[0] = red;
    }
    Ok(img)
}

/// Detection ground truth: position-map disks painted with the track id.
/// A cell always owns at least the pixel containing its centre.
pub fn render_detection_labels(
    frame: &PopulationState,
    params: &RenderParams,
) -> Result<LabelImage> {
    let ImageSize { height, width } = params.image_size;
    let mut img = LabelImage::new(width, height);
    let r = params.disk_radius();
    for cell in params.cells_in_draw_order(frame) {
        let label = u16::try_from(cell.track_id).map_err(|_| {
            Error::invalid(
                "track_id",
                format!("{} does not fit a 16-bit label", cell.track_id),
            )
        })?;
        let center = params.pixel_position(cell.position);
        for (x, y) in disk_pixels(center, r, width, height) {
            img.set(x, y, label);
        }
        let (cx, cy) = containing_pixel(center, width, height);
        img.set(cx, cy, label);
    }
    Ok(img)
}

/// Conditioning maps of a simulated trajectory in generation order: the
/// position map of the last frame, then one movement map per transition
/// `t → t−1` for `t = T−1, …, 1`. Movement maps carry a black red channel;
/// the generated frame is filled in by the image model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSet {
    pub last_position: RgbImage,
    /// `(t − 1, map)` with `t` descending.
    pub movement: Vec<(u32, RgbImage)>,
}

pub fn render_conditioning(
    trajectory: &TimeLapseTrajectory,
    params: &RenderParams,
    exec: Execution,
) -> Result<ConditioningSet> {
    let frames = &trajectory.frames;
    let Some(last) = frames.last() else {
        return Err(Error::invalid("trajectory", "no frames"));
    };
    let ImageSize { height, width } = params.image_size;
    let blank = GrayImage::new(width, height);
    let mut movement = exec.try_map_range(frames.len() - 1, |i| {
        let t = frames.len() - 1 - i;
        let links = correspondences(&frames[t - 1], &frames[t]);
        render_movement_map(&blank, &frames[t - 1], &links, params)
            .map(|m| (frames[t - 1].frame, m))
    })?;
    movement.shrink_to_fit();
    Ok(ConditioningSet {
        last_position: render_position_map(last, params),
        movement,
    })
}
