//! Estimation of motion-model statistics from annotated videos.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, FitError, Result};
use crate::exec::Execution;
use crate::model::{children_of, DatasetStatistics, Point, TrackRecord};
use crate::raster::LabelImage;
use crate::special::{digamma, ln_gamma, trigamma};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std_dev: f64,
    pub mask_count: usize,
}

/// Pixel count of every nonzero label in one image, keyed by label.
pub fn mask_areas(image: &LabelImage) -> BTreeMap<u16, u64> {
    let mut areas = BTreeMap::new();
    for &label in image.pixels().iter().filter(|&&l| l != 0) {
        *areas.entry(label).or_insert(0) += 1;
    }
    areas
}

/// Mean and sample standard deviation of per-mask pixel counts over all
/// images. Sums are accumulated exactly in integers, so the result does not
/// depend on image or mask order.
pub fn estimate_area_stats(images: &[LabelImage], exec: Execution) -> Result<AreaStats> {
    let per_image = exec.map(images, |img| {
        mask_areas(img)
            .values()
            .fold((0u64, 0u128, 0u128), |(n, s, s2), &a| {
                (n + 1, s + u128::from(a), s2 + u128::from(a) * u128::from(a))
            })
    });
    let (n, sum, sum_sq) = per_image.into_iter().fold((0u64, 0u128, 0u128), |acc, x| {
        (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2)
    });
    if n < 2 {
        return Err(Error::invalid(
            "segmentation masks",
            format!("need at least 2 masks, found {n}"),
        ));
    }
    let nf = n as f64;
    let mean = sum as f64 / nf;
    // n·Σa² − (Σa)² is exact in u128 for any realistic image set.
    let scaled_var = (u128::from(n) * sum_sq - sum * sum) as f64;
    let variance = scaled_var / (nf * (nf - 1.0));
    Ok(AreaStats {
        mean,
        std_dev: variance.sqrt(),
        mask_count: n as usize,
    })
}

/// Centroids in normalized coordinates keyed by (track label, frame).
pub type CentroidTable = HashMap<(u32, u32), Point>;

/// Mask centroids (pixel centres, normalized by width and height) of every
/// label in every frame.
pub fn centroids_from_labels(frames: &[LabelImage], exec: Execution) -> CentroidTable {
    let per_frame = exec.map_range(frames.len(), |t| {
        let img = &frames[t];
        let mut acc: BTreeMap<u16, (f64, f64, u64)> = BTreeMap::new();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let l = img.get(x, y);
                if l != 0 {
                    let e = acc.entry(l).or_insert((0.0, 0.0, 0));
                    e.0 += x as f64 + 0.5;
                    e.1 += y as f64 + 0.5;
                    e.2 += 1;
                }
            }
        }
        let (w, h) = (img.width() as f64, img.height() as f64);
        acc.into_iter()
            .map(|(l, (sx, sy, n))| {
                let n = n as f64;
                ((u32::from(l), t as u32), Point::new(sx / n / w, sy / n / h))
            })
            .collect::<Vec<_>>()
    });
    per_frame.into_iter().flatten().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementSample {
    /// Euclidean step length in normalized units.
    pub magnitude: f64,
    pub track_id: u32,
    /// Frame the step ends in.
    pub frame: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Displacements {
    pub samples: Vec<DisplacementSample>,
    /// `(track, frame)` pairs where an alive track had no centroid.
    pub missing: Vec<(u32, u32)>,
}

/// One sample per consecutive frame pair of every track. Pairs with a
/// missing centroid are reported and skipped.
pub fn compute_displacements(tracks: &[TrackRecord], centroids: &CentroidTable) -> Displacements {
    let mut out = Displacements::default();
    for r in tracks {
        let mut prev: Option<Point> = None;
        for t in r.begin..=r.end {
            match centroids.get(&(r.label, t)) {
                Some(&p) => {
                    if let Some(q) = prev {
                        out.samples.push(DisplacementSample {
                            magnitude: p.distance(q),
                            track_id: r.label,
                            frame: t,
                        });
                    }
                    prev = Some(p);
                }
                None => {
                    out.missing.push((r.label, t));
                    prev = None;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub shape: f64,
    pub scale: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Zero-valued samples dropped before fitting.
    pub dropped_zeros: usize,
    /// `true` when Newton's result was worse than the moments start and the
    /// moments estimate was returned instead.
    pub fell_back_to_moments: bool,
}

pub const MIN_GAMMA_SAMPLES: usize = 30;
const NEWTON_TOLERANCE: f64 = 1e-8;
const NEWTON_MAX_ITERATIONS: usize = 100;

/// Gamma log-likelihood from sufficient statistics.
fn gamma_log_likelihood(n: f64, mean: f64, mean_log: f64, shape: f64, scale: f64) -> f64 {
    n * ((shape - 1.0) * mean_log - mean / scale - shape * scale.ln() - ln_gamma(shape))
}

/// Maximum-likelihood gamma fit.
///
/// Starts from the method-of-moments estimate and runs Newton's method on
/// the profile-likelihood score `ln α − ψ(α) − (ln x̄ − mean ln x)`, with
/// the scale tied to `x̄ / α`. Zero samples are dropped because the density
/// is supported on `x > 0`.
pub fn fit_gamma(samples: &[f64]) -> Result<GammaFit, FitError> {
    if let Some(index) = samples.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(FitError::InvalidSample { index });
    }
    let positive: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    let dropped_zeros = samples.len() - positive.len();
    if positive.len() < MIN_GAMMA_SAMPLES {
        return Err(FitError::TooFewSamples {
            required: MIN_GAMMA_SAMPLES,
            found: positive.len(),
        });
    }
    let n = positive.len() as f64;
    let mean = positive.iter().sum::<f64>() / n;
    let variance = positive.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if variance <= 0.0 || variance <= f64::EPSILON * mean * mean {
        return Err(FitError::ZeroVariance);
    }
    let mean_log = positive.iter().map(|x| x.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;

    let moments_shape = mean * mean / variance;
    let moments_scale = variance / mean;
    let moments_ll = gamma_log_likelihood(n, mean, mean_log, moments_shape, moments_scale);

    let mut shape = moments_shape;
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITERATIONS {
        iterations += 1;
        let score = shape.ln() - digamma(shape) - s;
        let curvature = 1.0 / shape - trigamma(shape);
        let mut next = shape - score / curvature;
        // Keep the iterate positive by halving towards zero.
        if next <= 0.0 || !next.is_finite() {
            next = shape / 2.0;
        }
        let delta = (next - shape).abs();
        shape = next;
        if delta < NEWTON_TOLERANCE {
            break;
        }
    }
    let scale = mean / shape;
    let ll = gamma_log_likelihood(n, mean, mean_log, shape, scale);

    if ll.is_finite() && ll >= moments_ll {
        Ok(GammaFit {
            shape,
            scale,
            log_likelihood: ll,
            iterations,
            dropped_zeros,
            fell_back_to_moments: false,
        })
    } else {
        Ok(GammaFit {
            shape: moments_shape,
            scale: moments_scale,
            log_likelihood: moments_ll,
            iterations,
            dropped_zeros,
            fell_back_to_moments: true,
        })
    }
}

/// Divisions per cell-frame: parents with at least two daughters over the
/// total number of (track, frame) pairs.
pub fn estimate_split_probability(tracks: &[TrackRecord]) -> Result<f64> {
    if tracks.is_empty() {
        return Err(Error::invalid(
            "tracks",
            "cannot estimate from an empty track set",
        ));
    }
    let divisions = children_of(tracks)
        .values()
        .filter(|d| d.len() >= 2)
        .count();
    let cell_frames: u64 = tracks.iter().map(TrackRecord::frame_count).sum();
    Ok((divisions as f64 / cell_frames as f64).clamp(0.0, 1.0))
}

/// Mean number of alive tracks per frame over `0..frame_count`, rounded,
/// at least 1.
pub fn estimate_initial_count(tracks: &[TrackRecord], frame_count: u32) -> usize {
    if frame_count == 0 {
        return 1;
    }
    let last = frame_count - 1;
    let alive: u64 = tracks
        .iter()
        .filter(|r| r.begin <= last)
        .map(|r| u64::from(r.end.min(last) - r.begin) + 1)
        .sum();
    ((alive as f64 / f64::from(frame_count)).round() as usize).max(1)
}

/// Everything `estimate-stats` reports, including diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub stats: DatasetStatistics,
    pub mask_count: usize,
    pub displacement_samples: usize,
    pub dropped_zero_displacements: usize,
    pub missing_centroids: usize,
    pub fit_iterations: usize,
}

/// Full estimation from a track file, tracking-marker frames (for
/// centroids) and segmentation frames (for areas).
pub fn estimate_statistics(
    tracks: &[TrackRecord],
    marker_frames: &[LabelImage],
    segmentation_frames: &[LabelImage],
    exec: Execution,
) -> Result<EstimationReport> {
    let area = estimate_area_stats(segmentation_frames, exec)?;
    let centroids = centroids_from_labels(marker_frames, exec);
    let displacements = compute_displacements(tracks, &centroids);
    let magnitudes: Vec<f64> = displacements.samples.iter().map(|s| s.magnitude).collect();
    let fit = fit_gamma(&magnitudes)?;
    let stats = DatasetStatistics {
        mean_area: area.mean,
        std_area: area.std_dev,
        gamma_shape: fit.shape,
        gamma_scale: fit.scale,
        split_probability: estimate_split_probability(tracks)?,
        initial_cell_count: estimate_initial_count(tracks, marker_frames.len() as u32),
    };
    Ok(EstimationReport {
        stats,
        mask_count: area.mask_count,
        displacement_samples: magnitudes.len(),
        dropped_zero_displacements: fit.dropped_zeros,
        missing_centroids: displacements.missing.len(),
        fit_iterations: fit.iterations,
    })
}
