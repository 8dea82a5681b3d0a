//! Domain types shared by every stage.
//!
//! Simulation happens in normalized coordinates: positions live in the unit
//! square and lengths are measured in units of the image's geometric-mean
//! side `sqrt(h * w)`. Conversion to pixels happens only when rendering.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::RepulsionParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Image dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub height: usize,
    pub width: usize,
}

impl ImageSize {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    /// Pixels per normalized length unit.
    pub fn length_scale(self) -> f64 {
        ((self.height * self.width) as f64).sqrt()
    }

    /// Converts an area in pixels² to normalized units².
    pub fn area_to_normalized(self, area_px: f64) -> f64 {
        area_px / (self.height * self.width) as f64
    }

    pub fn to_pixels(self, p: Point) -> Point {
        Point::new(p.x * self.width as f64, p.y * self.height as f64)
    }

    pub fn to_normalized(self, p: Point) -> Point {
        Point::new(p.x / self.width as f64, p.y / self.height as f64)
    }
}

/// Everything the motion model samples from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    /// Mean cell area in pixels².
    pub mean_area: f64,
    /// Standard deviation of the cell area in pixels².
    pub std_area: f64,
    /// Shape of the displacement-magnitude gamma distribution.
    pub gamma_shape: f64,
    /// Scale of the displacement-magnitude gamma distribution (normalized length).
    pub gamma_scale: f64,
    /// Division probability per cell and frame.
    pub split_probability: f64,
    pub initial_cell_count: usize,
}

impl DatasetStatistics {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &'static str, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(what, reason))
            }
        };
        check(
            self.mean_area.is_finite() && self.mean_area > 0.0,
            "mean_area",
            format!("must be > 0, got {}", self.mean_area),
        )?;
        check(
            self.std_area.is_finite() && self.std_area >= 0.0,
            "std_area",
            format!("must be >= 0, got {}", self.std_area),
        )?;
        check(
            self.gamma_shape.is_finite() && self.gamma_shape > 0.0,
            "gamma_shape",
            format!("must be > 0, got {}", self.gamma_shape),
        )?;
        check(
            self.gamma_scale.is_finite() && self.gamma_scale > 0.0,
            "gamma_scale",
            format!("must be > 0, got {}", self.gamma_scale),
        )?;
        check(
            (0.0..=1.0).contains(&self.split_probability),
            "split_probability",
            format!("must lie in [0, 1], got {}", self.split_probability),
        )?;
        check(
            self.initial_cell_count >= 1,
            "initial_cell_count",
            "must be >= 1".to_string(),
        )
    }
}

/// A simulated cell: a disk in the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub track_id: u32,
    pub position: Point,
    /// Radius in normalized length units.
    pub radius: f64,
    /// Sampled area in pixels².
    pub area: f64,
    /// Frames relative to the division frame; `None` in interphase.
    pub mitosis_clock: Option<i32>,
    pub parent_id: Option<u32>,
}

impl Cell {
    pub fn overlaps(&self, other: &Cell) -> bool {
        self.position.distance(other.position) < self.radius + other.radius
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PopulationState {
    pub frame: u32,
    pub cells: Vec<Cell>,
}

impl PopulationState {
    pub fn new(frame: u32, cells: Vec<Cell>) -> Self {
        Self { frame, cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, track_id: u32) -> Option<&Cell> {
        self.cells.iter().find(|c| c.track_id == track_id)
    }

    /// Number of overlapping pairs, checked exhaustively.
    pub fn overlapping_pairs(&self) -> usize {
        let n = self.cells.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.cells[i].overlaps(&self.cells[j]))
            .count()
    }

    pub fn has_unique_ids(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.cells.len());
        self.cells.iter().all(|c| seen.insert(c.track_id))
    }
}

/// One line of a track file: `L B E P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrackRecord {
    pub label: u32,
    pub begin: u32,
    pub end: u32,
    /// Parent label, 0 when the track has no parent.
    pub parent: u32,
}

impl TrackRecord {
    pub const fn new(label: u32, begin: u32, end: u32, parent: u32) -> Self {
        Self {
            label,
            begin,
            end,
            parent,
        }
    }

    pub fn is_alive(&self, frame: u32) -> bool {
        self.begin <= frame && frame <= self.end
    }

    pub fn frame_count(&self) -> u64 {
        u64::from(self.end - self.begin) + 1
    }
}

/// Daughter labels keyed by parent label.
pub fn children_of(records: &[TrackRecord]) -> BTreeMap<u32, Vec<u32>> {
    let mut children: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.parent != 0) {
        children.entry(r.parent).or_default().push(r.label);
    }
    children
}

/// Simulated ground truth: frames plus lineage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeLapseTrajectory {
    pub frames: Vec<PopulationState>,
    pub lineage: Vec<TrackRecord>,
}

impl TimeLapseTrajectory {
    pub fn division_count(&self) -> usize {
        children_of(&self.lineage).len()
    }

    /// Checks frame, lineage and contiguity invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("trajectory", reason));
        let by_label: HashMap<u32, &TrackRecord> =
            self.lineage.iter().map(|r| (r.label, r)).collect();
        if by_label.len() != self.lineage.len() {
            return bad("duplicate track labels in lineage".into());
        }
        for r in &self.lineage {
            if r.begin > r.end {
                return bad(format!("track {} begins after it ends", r.label));
            }
            if r.parent != 0 {
                let Some(p) = by_label.get(&r.parent) else {
                    return bad(format!("track {} has unknown parent {}", r.label, r.parent));
                };
                if p.end + 1 != r.begin {
                    return bad(format!(
                        "track {} begins at {} but parent {} ends at {}",
                        r.label, r.begin, p.label, p.end
                    ));
                }
            }
        }
        for (parent, daughters) in children_of(&self.lineage) {
            if daughters.len() != 2 {
                return bad(format!("track {parent} has {} daughters", daughters.len()));
            }
        }
        // Parents end strictly before daughters begin, so the graph is acyclic.
        let mut seen: HashMap<u32, (u32, u32)> = HashMap::new();
        for (t, frame) in self.frames.iter().enumerate() {
            let t = t as u32;
            if frame.frame != t {
                return bad(format!("frame {t} carries index {}", frame.frame));
            }
            if !frame.has_unique_ids() {
                return bad(format!("frame {t} has duplicate track ids"));
            }
            for c in &frame.cells {
                let Some(r) = by_label.get(&c.track_id) else {
                    return bad(format!(
                        "cell {} in frame {t} has no track record",
                        c.track_id
                    ));
                };
                if !r.is_alive(t) {
                    return bad(format!(
                        "cell {} present outside its span at frame {t}",
                        r.label
                    ));
                }
                let span = seen.entry(c.track_id).or_insert((t, t));
                if span.1 + 1 < t {
                    return bad(format!("track {} has a gap before frame {t}", r.label));
                }
                span.1 = t;
            }
        }
        for r in &self.lineage {
            match seen.get(&r.label) {
                Some(&(b, e)) if b == r.begin && e == r.end => {}
                _ => return bad(format!("track {} frames do not match its record", r.label)),
            }
        }
        Ok(())
    }
}

/// Optional difficulty multipliers applied on top of the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Difficulty {
    pub cell_count: f64,
    pub displacement: f64,
    pub split: f64,
}

impl Default for Difficulty {
    fn default() -> Self {
        Self {
            cell_count: 1.0,
            displacement: 1.0,
            split: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub stats: DatasetStatistics,
    pub frames_per_video: usize,
    pub image_size: ImageSize,
    pub mitosis_cycle_length: u32,
    pub master_seed: u64,
    pub difficulty: Difficulty,
    pub repulsion: RepulsionParams,
}

impl SimulationConfig {
    pub const DEFAULT_FRAMES_PER_VIDEO: usize = 12;

    pub fn new(stats: DatasetStatistics, image_size: ImageSize) -> Self {
        Self {
            stats,
            frames_per_video: Self::DEFAULT_FRAMES_PER_VIDEO,
            image_size,
            mitosis_cycle_length: 6,
            master_seed: 0,
            difficulty: Difficulty::default(),
            repulsion: RepulsionParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stats.validate()?;
        if self.frames_per_video < 1 {
            return Err(Error::invalid("frames_per_video", "must be >= 1"));
        }
        if self.mitosis_cycle_length < 2 {
            return Err(Error::invalid("mitosis_cycle_length", "must be >= 2"));
        }
        if self.image_size.height < 64 || self.image_size.width < 64 {
            return Err(Error::invalid(
                "image_size",
                format!(
                    "both sides must be >= 64 px, got {}x{}",
                    self.image_size.height, self.image_size.width
                ),
            ));
        }
        let d = self.difficulty;
        for (name, v) in [
            ("cell_count multiplier", d.cell_count),
            ("displacement multiplier", d.displacement),
            ("split multiplier", d.split),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("difficulty", format!("{name} must be >= 0")));
            }
        }
        if d.displacement == 0.0 {
            return Err(Error::invalid(
                "difficulty",
                "displacement multiplier must be > 0",
            ));
        }
        self.repulsion.validate()?;
        self.effective_stats().validate()
    }

    /// Statistics after applying the difficulty multipliers.
    pub fn effective_stats(&self) -> DatasetStatistics {
        let d = self.difficulty;
        DatasetStatistics {
            gamma_scale: self.stats.gamma_scale * d.displacement,
            split_probability: (self.stats.split_probability * d.split).clamp(0.0, 1.0),
            initial_cell_count: ((self.stats.initial_cell_count as f64 * d.cell_count).round()
                as usize)
                .max(1),
            ..self.stats
        }
    }
}
