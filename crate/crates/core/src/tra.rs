//! Tracking accuracy: AOGM operation counts and the normalized TRA score.
//!
//! A tracking graph has one node per `(frame, label)` marker present in the
//! label images. Consecutive present markers of one track are joined by a
//! track link; a daughter's first present marker is joined to its parent's
//! last present marker by a parent link. Frames where a track has no marker
//! are skipped over, so a gap does not break the track.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ImageError, Result};
use crate::exec::Execution;
use crate::io::{list_frames, read_label_image, read_track_file, DatasetLayout};
use crate::model::TrackRecord;
use crate::raster::LabelImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AogmWeights {
    pub ns: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub fp: f64,
    pub ed: f64,
    pub ea: f64,
    pub ec: f64,
}

impl Default for AogmWeights {
    fn default() -> Self {
        Self {
            ns: 5.0,
            fn_: 10.0,
            fp: 1.0,
            ed: 1.0,
            ea: 1.5,
            ec: 1.0,
        }
    }
}

impl FromStr for AogmWeights {
    type Err = Error;

    /// `"ns,fn,fp,ed,ea,ec"`
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::invalid("weights", format!("{s:?}: {e}")))?;
        let [ns, fn_, fp, ed, ea, ec] = values[..] else {
            return Err(Error::invalid(
                "weights",
                format!("expected six values, got {}", values.len()),
            ));
        };
        let w = Self {
            ns,
            fn_,
            fp,
            ed,
            ea,
            ec,
        };
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "weights",
                "all weights must be finite and >= 0",
            ));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    TrackLink,
    ParentLink,
}

/// `(frame, label)`
pub type Node = (u32, u16);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackingGraph {
    pub nodes: BTreeSet<Node>,
    pub edges: BTreeMap<(Node, Node), EdgeKind>,
}

impl TrackingGraph {
    pub fn build(tracks: &[TrackRecord], frames: &[LabelImage]) -> Self {
        let mut nodes = BTreeSet::new();
        for (t, img) in frames.iter().enumerate() {
            nodes.extend(
                img.pixels()
                    .iter()
                    .filter(|&&l| l != 0)
                    .map(|&l| (t as u32, l)),
            );
        }
        let mut present: BTreeMap<u32, Vec<Node>> = BTreeMap::new();
        for r in tracks {
            let Ok(label) = u16::try_from(r.label) else {
                continue;
            };
            let last = r.end.min(frames.len().saturating_sub(1) as u32);
            let seen: Vec<Node> = (r.begin..=last)
                .map(|t| (t, label))
                .filter(|n| nodes.contains(n))
                .collect();
            present.insert(r.label, seen);
        }
        let mut edges = BTreeMap::new();
        for seen in present.values() {
            for w in seen.windows(2) {
                edges.insert((w[0], w[1]), EdgeKind::TrackLink);
            }
        }
        for r in tracks.iter().filter(|r| r.parent != 0) {
            let from = present.get(&r.parent).and_then(|s| s.last());
            let to = present.get(&r.label).and_then(|s| s.first());
            if let (Some(&from), Some(&to)) = (from, to) {
                if from.0 < to.0 {
                    edges.insert((from, to), EdgeKind::ParentLink);
                }
            }
        }
        Self { nodes, edges }
    }
}

/// Tracks plus per-frame label images.
#[derive(Debug, Clone, Default)]
pub struct TrackingData {
    pub tracks: Vec<TrackRecord>,
    pub frames: Vec<LabelImage>,
}

impl TrackingData {
    /// Reads a track file and the label frames of a video directory. Frames
    /// come from `det/` when present, otherwise from the directory itself.
    pub fn load(dir: &Path, exec: Execution) -> Result<Self> {
        let layout = DatasetLayout::new(dir);
        let tracks = read_track_file(layout.existing_track_file()?)?;
        let det = layout.det_dir();
        let frame_dir = if det.is_dir() { det } else { dir.to_path_buf() };
        let paths = list_frames(&frame_dir)?;
        let frames = exec.try_map_range(paths.len(), |i| read_label_image(&paths[i]))?;
        Ok(Self { tracks, frames })
    }
}

/// Ground-truth marker → matched prediction, per frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameMatch {
    pub matches: BTreeMap<u16, u16>,
}

/// A ground-truth marker matches the prediction covering strictly more than
/// half of its pixels.
pub fn match_markers(gt: &LabelImage, pred: &LabelImage) -> Result<FrameMatch> {
    gt.same_dimensions(pred).map_err(Error::Image)?;
    let mut sizes: BTreeMap<u16, u64> = BTreeMap::new();
    let mut overlap: BTreeMap<(u16, u16), u64> = BTreeMap::new();
    for (&g, &p) in gt.pixels().iter().zip(pred.pixels()) {
        if g == 0 {
            continue;
        }
        *sizes.entry(g).or_default() += 1;
        if p != 0 {
            *overlap.entry((g, p)).or_default() += 1;
        }
    }
    let matches = overlap
        .into_iter()
        .filter(|&((g, _), n)| 2 * n > sizes[&g])
        .map(|((g, p), _)| (g, p))
        .collect();
    Ok(FrameMatch { matches })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AogmCounts {
    pub ns: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub ed: u64,
    pub ea: u64,
    pub ec: u64,
}

impl AogmCounts {
    pub fn weighted(&self, w: &AogmWeights) -> f64 {
        w.ns * self.ns as f64
            + w.fn_ * self.fn_ as f64
            + w.fp * self.fp as f64
            + w.ed * self.ed as f64
            + w.ea * self.ea as f64
            + w.ec * self.ec as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AogmReport {
    pub counts: AogmCounts,
    pub aogm: f64,
    pub aogm0: f64,
    pub tra: f64,
}

impl fmt::Display for AogmReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        writeln!(f, "NS {}", c.ns)?;
        writeln!(f, "FN {}", c.fn_)?;
        writeln!(f, "FP {}", c.fp)?;
        writeln!(f, "ED {}", c.ed)?;
        writeln!(f, "EA {}", c.ea)?;
        writeln!(f, "EC {}", c.ec)?;
        writeln!(f, "AOGM {}", self.aogm)?;
        writeln!(f, "AOGM_0 {}", self.aogm0)?;
        write!(f, "TRA {:.6}", self.tra)
    }
}

/// Cost of building the ground-truth graph from nothing.
pub fn aogm_empty(gt: &TrackingGraph, weights: &AogmWeights) -> f64 {
    weights.fn_ * gt.nodes.len() as f64 + weights.ea * gt.edges.len() as f64
}

pub fn tra_score(aogm: f64, aogm0: f64) -> Result<f64> {
    if aogm0.is_nan() || aogm0 <= 0.0 {
        return Err(Error::invalid(
            "ground truth",
            "empty ground truth has no TRA score",
        ));
    }
    Ok(1.0 - aogm.min(aogm0) / aogm0)
}

/// Operation counts between two graphs given per-frame matches.
pub fn count_operations(
    gt: &TrackingGraph,
    pred: &TrackingGraph,
    matches: &[FrameMatch],
) -> AogmCounts {
    let mut counts = AogmCounts::default();
    // prediction node → ground-truth nodes it matched
    let mut image: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    for (t, m) in matches.iter().enumerate() {
        for (&g, &p) in &m.matches {
            let (gn, pn) = ((t as u32, g), (t as u32, p));
            if gt.nodes.contains(&gn) && pred.nodes.contains(&pn) {
                image.entry(pn).or_default().push(gn);
            }
        }
    }
    let matched_gt: usize = image.values().map(Vec::len).sum();
    counts.fn_ = (gt.nodes.len() - matched_gt) as u64;
    counts.fp = pred.nodes.iter().filter(|n| !image.contains_key(n)).count() as u64;
    counts.ns = image.values().map(|g| g.len() as u64 - 1).sum();

    let mut covered: BTreeSet<(Node, Node)> = BTreeSet::new();
    for (&(a, b), &kind) in &pred.edges {
        let (Some(ga), Some(gb)) = (image.get(&a), image.get(&b)) else {
            continue;
        };
        let mut hit = false;
        for &x in ga {
            for &y in gb {
                if let Some(&gt_kind) = gt.edges.get(&(x, y)) {
                    hit = true;
                    if covered.insert((x, y)) && gt_kind != kind {
                        counts.ec += 1;
                    }
                }
            }
        }
        if !hit {
            counts.ed += 1;
        }
    }
    counts.ea = (gt.edges.len() - covered.len()) as u64;
    counts
}

pub fn count_aogm(
    gt: &TrackingData,
    pred: &TrackingData,
    weights: &AogmWeights,
    exec: Execution,
) -> Result<AogmReport> {
    if gt.frames.len() != pred.frames.len() {
        return Err(Error::invalid(
            "prediction",
            format!(
                "{} predicted frames for {} ground-truth frames",
                pred.frames.len(),
                gt.frames.len()
            ),
        ));
    }
    let matches = exec.try_map_range(gt.frames.len(), |t| {
        match_markers(&gt.frames[t], &pred.frames[t])
    })?;
    let gt_graph = TrackingGraph::build(&gt.tracks, &gt.frames);
    let pred_graph = TrackingGraph::build(&pred.tracks, &pred.frames);
    let counts = count_operations(&gt_graph, &pred_graph, &matches);
    let aogm = counts.weighted(weights);
    let aogm0 = aogm_empty(&gt_graph, weights);
    Ok(AogmReport {
        counts,
        aogm,
        aogm0,
        tra: tra_score(aogm, aogm0)?,
    })
}

pub fn evaluate_dirs(
    gt: &Path,
    pred: &Path,
    weights: &AogmWeights,
    exec: Execution,
) -> Result<AogmReport> {
    let gt = TrackingData::load(gt, exec)?;
    let pred = TrackingData::load(pred, exec)?;
    for (g, p) in gt.frames.iter().zip(&pred.frames) {
        if g.dimensions() != p.dimensions() {
            return Err(Error::Image(ImageError::DimensionMismatch {
                expected: g.dimensions(),
                found: p.dimensions(),
            }));
        }
    }
    count_aogm(&gt, &pred, weights, exec)
}

/// Category-wise change from report `a` to report `b`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub splits: i64,
    pub fp_edges: i64,
    pub fn_edges: i64,
}

pub fn error_breakdown(a: &AogmReport, b: &AogmReport) -> ErrorBreakdown {
    let d = |x: u64, y: u64| y as i64 - x as i64;
    ErrorBreakdown {
        splits: d(a.counts.ns, b.counts.ns),
        fp_edges: d(a.counts.ed, b.counts.ed),
        fn_edges: d(a.counts.ea, b.counts.ea),
    }
}
