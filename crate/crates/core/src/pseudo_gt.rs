//! Reconciles external segmentation masks with simulated detections.
//!
//! A detection touches a mask when the detection's position-map disk
//! (radius `sqrt(A_c/π)/4`) intersects at least one pixel square of the
//! mask. Masks touched by no detection are erased, touched masks take the
//! track id of their detection, and detections left without a mask get a
//! filled circle of radius `sqrt(A_c/π)` painted over background only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{ImageSize, Point, PopulationState};
use crate::raster::LabelImage;
use crate::render::draw::{containing_pixel, disk_pixels};

/// A simulated cell centre in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub track_id: u16,
    pub position: Point,
}

/// Pixel-space detections of one simulated frame.
pub fn detections_from_frame(frame: &PopulationState, size: ImageSize) -> Result<Vec<Detection>> {
    frame
        .cells
        .iter()
        .map(|c| {
            let track_id = u16::try_from(c.track_id).map_err(|_| {
                Error::invalid(
                    "track_id",
                    format!("{} does not fit a 16-bit label", c.track_id),
                )
            })?;
            Ok(Detection {
                track_id,
                position: size.to_pixels(c.position),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionReport {
    /// Masks kept and relabeled.
    pub kept: usize,
    /// Masks erased because no detection touched them.
    pub erased: usize,
    /// Detections that received a drawn circle.
    pub drawn: usize,
    /// Detections that had to claim a pixel to stay represented.
    pub anchored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub labels: LabelImage,
    pub report: CorrectionReport,
}

/// Pixels whose square intersects the closed disk, plus the pixel holding
/// the centre.
fn touched_pixels(center: Point, radius: f64, width: usize, height: usize) -> Vec<(usize, usize)> {
    let clip = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
    let (x0, x1) = (
        clip(center.x - radius, width),
        clip(center.x + radius, width),
    );
    let (y0, y1) = (
        clip(center.y - radius, height),
        clip(center.y + radius, height),
    );
    let mut out = Vec::new();
    for y in y0..=y1 {
        let dy = (y as f64 - center.y)
            .max(center.y - (y as f64 + 1.0))
            .max(0.0);
        for x in x0..=x1 {
            let dx = (x as f64 - center.x)
                .max(center.x - (x as f64 + 1.0))
                .max(0.0);
            if dx * dx + dy * dy <= radius * radius {
                out.push((x, y));
            }
        }
    }
    let c = containing_pixel(center, width, height);
    if !out.contains(&c) {
        out.push(c);
    }
    out
}

fn mask_centroids(seg: &LabelImage) -> BTreeMap<u16, Point> {
    let mut acc: BTreeMap<u16, (f64, f64, f64)> = BTreeMap::new();
    for y in 0..seg.height() {
        for x in 0..seg.width() {
            let l = seg.get(x, y);
            if l != 0 {
                let e = acc.entry(l).or_default();
                e.0 += x as f64 + 0.5;
                e.1 += y as f64 + 0.5;
                e.2 += 1.0;
            }
        }
    }
    acc.into_iter()
        .map(|(l, (sx, sy, n))| (l, Point::new(sx / n, sy / n)))
        .collect()
}

pub fn correct_segmentation(
    seg: &LabelImage,
    detections: &[Detection],
    mean_area: f64,
) -> LabelImage {
    correct_segmentation_detailed(seg, detections, mean_area).labels
}

/// Mask/detection matching is greedy over touching pairs. A mask already
/// carrying the detection's track id is preferred, then the pair with the
/// smallest centroid-to-detection distance; ties break on track id and then
/// mask label. Every detection ends up owning at least one pixel its disk
/// touches: one whose circle landed entirely on other masks claims such a
/// pixel, taking it only from a label that keeps another.
pub fn correct_segmentation_detailed(
    seg: &LabelImage,
    detections: &[Detection],
    mean_area: f64,
) -> Correction {
    let (width, height) = seg.dimensions();
    let mut report = CorrectionReport::default();
    let mut out = LabelImage::new(width, height);
    if width == 0 || height == 0 {
        return Correction {
            labels: out,
            report,
        };
    }
    let core_radius = (mean_area / std::f64::consts::PI).sqrt() / 4.0;
    let circle_radius = 4.0 * core_radius;

    let mut dets: Vec<Detection> = detections
        .iter()
        .map(|d| Detection {
            track_id: d.track_id,
            position: Point::new(
                d.position.x.clamp(0.0, width as f64),
                d.position.y.clamp(0.0, height as f64),
            ),
        })
        .collect();
    dets.sort_by_key(|d| d.track_id);
    let cores: Vec<Vec<(usize, usize)>> = dets
        .iter()
        .map(|d| touched_pixels(d.position, core_radius, width, height))
        .collect();

    let centroids = mask_centroids(seg);
    let mut candidates = Vec::new();
    for (i, (det, core)) in dets.iter().zip(&cores).enumerate() {
        let masks: BTreeSet<u16> = core
            .iter()
            .map(|&(x, y)| seg.get(x, y))
            .filter(|&l| l != 0)
            .collect();
        for m in masks {
            let dist = centroids[&m].distance(det.position);
            candidates.push((m != det.track_id, dist, det.track_id, m, i));
        }
    }
    candidates.sort_by(|a, b| {
        (a.0, a.1, a.2, a.3)
            .partial_cmp(&(b.0, b.1, b.2, b.3))
            .expect("distances are finite")
    });
    let mut mask_owner: BTreeMap<u16, u16> = BTreeMap::new();
    let mut matched = vec![false; dets.len()];
    for &(_, _, track, mask, i) in &candidates {
        if matched[i] || mask_owner.contains_key(&mask) {
            continue;
        }
        matched[i] = true;
        mask_owner.insert(mask, track);
    }
    report.kept = mask_owner.len();
    report.erased = centroids.len() - mask_owner.len();

    for (o, &s) in out.pixels_mut().iter_mut().zip(seg.pixels()) {
        *o = mask_owner.get(&s).copied().unwrap_or(0);
    }
    for (det, _) in dets.iter().zip(&matched).filter(|(_, m)| !**m) {
        report.drawn += 1;
        for (x, y) in disk_pixels(det.position, circle_radius, width, height) {
            let px = out.get_mut(x, y);
            if *px == 0 {
                *px = det.track_id;
            }
        }
    }

    // Anchor pass.
    let core_of: BTreeMap<u16, &Vec<(usize, usize)>> =
        dets.iter().map(|d| d.track_id).zip(&cores).collect();
    for (det, core) in dets.iter().zip(&cores) {
        let own = det.track_id;
        if core.iter().any(|&(x, y)| out.get(x, y) == own) {
            continue;
        }
        let keeps_another = |out: &LabelImage, owner: u16, px: (usize, usize)| {
            core_of
                .get(&owner)
                .is_none_or(|c| c.iter().any(|&q| q != px && out.get(q.0, q.1) == owner))
        };
        let in_circle = |(x, y): (usize, usize)| {
            (x as f64 + 0.5 - det.position.x).hypot(y as f64 + 0.5 - det.position.y)
                <= circle_radius
        };
        let pick = core
            .iter()
            .copied()
            .filter(|&px| {
                let owner = out.get(px.0, px.1);
                owner == 0 || keeps_another(&out, owner, px)
            })
            .min_by_key(|&px| (out.get(px.0, px.1) != 0, !in_circle(px), px.1, px.0));
        if let Some((x, y)) = pick {
            out.set(x, y, own);
            report.anchored += 1;
        }
    }
    Correction {
        labels: out,
        report,
    }
}

/// Labels without a detection and detections without a label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BijectionCheck {
    pub orphan_labels: Vec<u16>,
    pub missing_detections: Vec<u16>,
}

impl BijectionCheck {
    pub fn holds(&self) -> bool {
        self.orphan_labels.is_empty() && self.missing_detections.is_empty()
    }
}

pub fn check_bijection(labels: &LabelImage, detections: &[Detection]) -> BijectionCheck {
    let present: BTreeSet<u16> = labels
        .pixels()
        .iter()
        .copied()
        .filter(|&l| l != 0)
        .collect();
    let expected: BTreeSet<u16> = detections.iter().map(|d| d.track_id).collect();
    BijectionCheck {
        orphan_labels: present.difference(&expected).copied().collect(),
        missing_detections: expected.difference(&present).copied().collect(),
    }
}

/// Corrects every frame independently.
pub fn correct_frames(
    segs: &[LabelImage],
    detections: &[Vec<Detection>],
    mean_area: f64,
    exec: Execution,
) -> Result<Vec<Correction>> {
    if segs.len() != detections.len() {
        return Err(Error::invalid(
            "masks",
            format!(
                "{} mask frames for {} detection frames",
                segs.len(),
                detections.len()
            ),
        ));
    }
    Ok(exec.map_range(segs.len(), |t| {
        correct_segmentation_detailed(&segs[t], &detections[t], mean_area)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(id: u16, x: f64, y: f64) -> Detection {
        Detection {
            track_id: id,
            position: Point::new(x, y),
        }
    }

    fn square(img: &mut LabelImage, x0: usize, y0: usize, side: usize, label: u16) {
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                img.set(x, y, label);
            }
        }
    }

    #[test]
    fn mask_under_detection_is_relabeled() {
        let mut seg = LabelImage::new(64, 64);
        square(&mut seg, 20, 20, 10, 9);
        let out = correct_segmentation(&seg, &[det(4, 25.0, 25.0)], 400.0);
        assert_eq!(out, seg.map(|l| if l == 9 { 4 } else { 0 }));
    }

    #[test]
    fn stray_mask_is_erased() {
        let mut seg = LabelImage::new(64, 64);
        square(&mut seg, 5, 5, 6, 3);
        let out = correct_segmentation(&seg, &[], 400.0);
        assert!(out.pixels().iter().all(|&l| l == 0));
    }

    #[test]
    fn missing_mask_gets_circle() {
        let seg = LabelImage::new(128, 128);
        let out = correct_segmentation(&seg, &[det(1, 64.0, 64.0)], 400.0);
        let r = (400.0 / std::f64::consts::PI).sqrt();
        assert!((r - 11.2838).abs() < 1e-4);
        let mut brute = 0;
        for y in 0..128 {
            for x in 0..128 {
                if (x as f64 + 0.5 - 64.0).hypot(y as f64 + 0.5 - 64.0) <= r {
                    brute += 1;
                }
            }
        }
        assert_eq!(out.pixels().iter().filter(|&&l| l == 1).count(), brute);
        assert_eq!(out.pixels().iter().filter(|&&l| l != 0).count(), brute);
    }

    #[test]
    fn shared_mask_goes_to_nearest_detection() {
        let mut seg = LabelImage::new(64, 64);
        square(&mut seg, 20, 20, 20, 5);
        let dets = [det(1, 22.0, 22.0), det(2, 30.0, 30.0)];
        let c = correct_segmentation_detailed(&seg, &dets, 100.0);
        assert_eq!(c.labels.get(30, 30), 2);
        assert_eq!(c.report.drawn, 1);
        // Detection 1 sits on mask 5, so its circle has nowhere to go and it
        // claims a pixel under its own disk.
        assert_eq!(c.report.anchored, 1);
        assert!(check_bijection(&c.labels, &dets).holds());
    }

    #[test]
    fn circles_do_not_cover_masks() {
        let mut seg = LabelImage::new(64, 64);
        square(&mut seg, 30, 20, 6, 8);
        let dets = [det(1, 33.0, 23.0), det(2, 25.0, 23.0)];
        let out = correct_segmentation(&seg, &dets, 400.0);
        for y in 20..26 {
            for x in 30..36 {
                assert_eq!(out.get(x, y), 1);
            }
        }
        assert!(out.pixels().contains(&2));
    }

    #[test]
    fn frame_count_mismatch() {
        assert!(
            correct_frames(&[LabelImage::new(4, 4)], &[], 400.0, Execution::Sequential).is_err()
        );
    }
}
