//! 2D disk population: gamma random walk, stochastic division and iterative
//! overlap resolution.
//!
//! One simulated frame is `step_positions → maybe_split → resolve_overlaps`.
//! Positions are reflected at the walls of the unit square after every
//! movement and after every repulsion sweep.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{
    Cell, DatasetStatistics, ImageSize, Point, PopulationState, SimulationConfig,
    TimeLapseTrajectory, TrackRecord,
};
use crate::rng::{derive_child_seed, RandomSource};

/// Smallest displacement applied to an overlapping pair in one repulsion
/// step, in normalized units. Without it the geometric decay of the overlap
/// stalls once the step drops below the spacing of representable positions.
pub const MIN_REPULSION_STEP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepulsionParams {
    /// θ_ε is drawn from `[-angle_jitter, angle_jitter]` (radians).
    pub angle_jitter: f64,
    /// ε is drawn from `[magnitude_jitter.0, magnitude_jitter.1]`.
    pub magnitude_jitter: (f64, f64),
    /// Maximum number of sweeps that still find overlaps.
    pub max_iterations: usize,
    /// Forces θ_ε = 0 and ε = 0.
    pub deterministic: bool,
}

impl Default for RepulsionParams {
    fn default() -> Self {
        Self {
            angle_jitter: 0.1,
            magnitude_jitter: (0.0, 0.2),
            max_iterations: 10_000,
            deterministic: false,
        }
    }
}

impl RepulsionParams {
    pub fn deterministic() -> Self {
        Self {
            deterministic: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::invalid("repulsion", "max_iterations must be >= 1"));
        }
        let (lo, hi) = self.magnitude_jitter;
        if !(self.angle_jitter >= 0.0 && lo >= 0.0 && lo <= hi) {
            return Err(Error::invalid(
                "repulsion",
                "jitter ranges must be ordered and >= 0",
            ));
        }
        Ok(())
    }
}

/// Folds a coordinate back into `[0, 1]` by mirroring at the walls.
pub fn reflect_unit(v: f64) -> f64 {
    if (0.0..=1.0).contains(&v) {
        return v;
    }
    let m = v.rem_euclid(2.0);
    if m > 1.0 {
        2.0 - m
    } else {
        m
    }
}

pub fn reflect_point(p: Point) -> Point {
    Point::new(reflect_unit(p.x), reflect_unit(p.y))
}

/// Draws a cell area from N(A_c, σ_A / 10), redrawing until positive.
pub fn sample_area(stats: &DatasetStatistics, rng: &mut RandomSource) -> f64 {
    loop {
        let a = rng.normal(stats.mean_area, stats.std_area / 10.0);
        if a > 0.0 {
            return a;
        }
    }
}

/// Normalized radius `sqrt(A_norm / π)` of an area given in pixels².
pub fn radius_for_area(area_px: f64, image_size: ImageSize) -> f64 {
    (image_size.area_to_normalized(area_px) / std::f64::consts::PI).sqrt()
}

/// Hands out fresh track labels.
#[derive(Debug, Clone)]
pub struct TrackIds {
    next: u32,
}

impl TrackIds {
    pub fn starting_at(first: u32) -> Self {
        Self { next: first }
    }

    pub fn next_id(&mut self) -> u32 {
        let id = self.next;
        self.next += 1;
        id
    }
}

impl Default for TrackIds {
    fn default() -> Self {
        Self::starting_at(1)
    }
}

pub fn init_population(
    config: &SimulationConfig,
    ids: &mut TrackIds,
    rng: &mut RandomSource,
) -> Result<PopulationState> {
    let stats = config.effective_stats();
    let cells = (0..stats.initial_cell_count)
        .map(|_| {
            let position = Point::new(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
            let area = sample_area(&stats, rng);
            Cell {
                track_id: ids.next_id(),
                position,
                radius: radius_for_area(area, config.image_size),
                area,
                mitosis_clock: None,
                parent_id: None,
            }
        })
        .collect();
    resolve_overlaps(PopulationState::new(0, cells), &config.repulsion, rng)
}

/// One random-walk draw: direction φ and magnitude m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub angle: f64,
    pub magnitude: f64,
}

pub fn draw_displacement(stats: &DatasetStatistics, rng: &mut RandomSource) -> Displacement {
    let angle = rng.uniform(0.0, TAU);
    let magnitude = rng.gamma(stats.gamma_shape, stats.gamma_scale);
    Displacement { angle, magnitude }
}

/// `p + m (cos φ, sin φ)`, reflected into the unit square.
pub fn displace(p: Point, d: Displacement) -> Point {
    reflect_point(Point::new(
        p.x + d.magnitude * d.angle.cos(),
        p.y + d.magnitude * d.angle.sin(),
    ))
}

/// Moves every cell independently; also returns the sampled (pre-reflection)
/// magnitudes in cell order.
pub fn step_positions_recorded(
    state: &PopulationState,
    stats: &DatasetStatistics,
    rng: &mut RandomSource,
) -> (PopulationState, Vec<f64>) {
    let mut magnitudes = Vec::with_capacity(state.len());
    let cells = state
        .cells
        .iter()
        .map(|c| {
            let d = draw_displacement(stats, rng);
            magnitudes.push(d.magnitude);
            Cell {
                position: displace(c.position, d),
                ..c.clone()
            }
        })
        .collect();
    (PopulationState::new(state.frame, cells), magnitudes)
}

pub fn step_positions(
    state: &PopulationState,
    stats: &DatasetStatistics,
    rng: &mut RandomSource,
) -> PopulationState {
    step_positions_recorded(state, stats, rng).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisionEvent {
    pub parent: u32,
    pub daughters: [u32; 2],
}

/// Daughter positions `p ± d·r (cos φ, sin φ)` using the parent radius,
/// reflected into the unit square.
pub fn daughter_positions(parent: &Cell, spread: f64, angle: f64) -> [Point; 2] {
    let off = Point::new(
        spread * parent.radius * angle.cos(),
        spread * parent.radius * angle.sin(),
    );
    let p = parent.position;
    [
        reflect_point(Point::new(p.x + off.x, p.y + off.y)),
        reflect_point(Point::new(p.x - off.x, p.y - off.y)),
    ]
}

/// Moves every mitosis clock one frame forward. Clocks are cleared once a
/// full cycle has elapsed since the division, which makes the cell eligible
/// to divide again.
pub fn advance_mitosis_clocks(state: &mut PopulationState, cycle_length: u32) {
    for c in &mut state.cells {
        c.mitosis_clock = match c.mitosis_clock {
            Some(k) if k + 1 < cycle_length as i32 => Some(k + 1),
            _ => None,
        };
    }
}

/// Each cell outside a mitosis window divides with probability `p_split`.
/// Daughters get fresh labels, freshly sampled areas and a clock of 0 (the
/// division frame); they are appended after the surviving cells.
pub fn maybe_split(
    state: &PopulationState,
    stats: &DatasetStatistics,
    config: &SimulationConfig,
    ids: &mut TrackIds,
    rng: &mut RandomSource,
) -> (PopulationState, Vec<DivisionEvent>) {
    let mut survivors = Vec::with_capacity(state.len());
    let mut born = Vec::new();
    let mut events = Vec::new();
    for cell in &state.cells {
        let eligible = cell.mitosis_clock.is_none();
        if !(eligible && rng.bernoulli(stats.split_probability)) {
            survivors.push(cell.clone());
            continue;
        }
        let angle = rng.uniform(0.0, TAU);
        let spread = rng.uniform(0.7, 0.8);
        let positions = daughter_positions(cell, spread, angle);
        let mut daughters = [0u32; 2];
        for (slot, position) in daughters.iter_mut().zip(positions) {
            let area = sample_area(stats, rng);
            *slot = ids.next_id();
            born.push(Cell {
                track_id: *slot,
                position,
                radius: radius_for_area(area, config.image_size),
                area,
                mitosis_clock: Some(0),
                parent_id: Some(cell.track_id),
            });
        }
        events.push(DivisionEvent {
            parent: cell.track_id,
            daughters,
        });
    }
    survivors.extend(born);
    (PopulationState::new(state.frame, survivors), events)
}

/// One applied repulsion: sweep number (1-based), pair and displacement F.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepulsionStep {
    pub sweep: usize,
    pub i: usize,
    pub j: usize,
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub state: PopulationState,
    /// Sweeps that found at least one overlap.
    pub iterations: usize,
    pub steps: Vec<RepulsionStep>,
}

/// Uniform bucket grid over the unit square for neighbour queries. Buckets
/// hold cell indices in ascending order and are updated in place as cells
/// move between sweeps.
struct Grid {
    side: usize,
    cell: f64,
    buckets: Vec<Vec<usize>>,
    home: Vec<usize>,
}

impl Grid {
    fn build(cells: &[Cell], reach: f64) -> Self {
        let side = if reach > 0.0 {
            ((1.0 / reach).floor() as usize).clamp(1, 512)
        } else {
            512
        };
        let mut grid = Self {
            side,
            cell: 1.0 / side as f64,
            buckets: vec![Vec::new(); side * side],
            home: Vec::with_capacity(cells.len()),
        };
        for (i, c) in cells.iter().enumerate() {
            let b = grid.bucket(c.position);
            grid.home.push(b);
            grid.buckets[b].push(i);
        }
        grid
    }

    fn bucket(&self, p: Point) -> usize {
        let f = |v: f64| ((v / self.cell).floor().max(0.0) as usize).min(self.side - 1);
        f(p.y) * self.side + f(p.x)
    }

    fn rehome(&mut self, i: usize, p: Point) {
        let b = self.bucket(p);
        let old = self.home[i];
        if b != old {
            let at = self.buckets[old]
                .binary_search(&i)
                .expect("cell is in its home bucket");
            self.buckets[old].remove(at);
            let at = self.buckets[b].binary_search(&i).unwrap_err();
            self.buckets[b].insert(at, i);
            self.home[i] = b;
        }
    }

    /// Cells in the 3×3 neighbourhood of `bucket`.
    fn around(&self, bucket: usize) -> impl Iterator<Item = usize> + '_ {
        let (bx, by) = (bucket % self.side, bucket / self.side);
        let last = self.side - 1;
        (by.saturating_sub(1)..=(by + 1).min(last))
            .flat_map(move |y| {
                (bx.saturating_sub(1)..=(bx + 1).min(last)).map(move |x| y * self.side + x)
            })
            .flat_map(move |b| self.buckets[b].iter().copied())
    }

    /// Indices `j > i` in the 3×3 neighbourhood of `bucket`, ascending.
    fn candidates_after(&self, i: usize, bucket: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend(self.around(bucket).filter(|&j| j > i));
        out.sort_unstable();
    }
}

fn repulse(
    cells: &mut [Cell],
    i: usize,
    j: usize,
    params: &RepulsionParams,
    rng: &mut RandomSource,
) -> Option<f64> {
    let (pi, pj) = (cells[i].position, cells[j].position);
    let reach = cells[i].radius + cells[j].radius;
    let v = Point::new(pi.x - pj.x, pi.y - pj.y);
    let dist = v.x.hypot(v.y);
    if dist >= reach {
        return None;
    }
    let theta = if dist == 0.0 {
        rng.uniform(0.0, TAU)
    } else if params.deterministic {
        v.y.atan2(v.x)
    } else {
        v.y.atan2(v.x) + rng.uniform(-params.angle_jitter, params.angle_jitter)
    };
    let eps = if params.deterministic {
        0.0
    } else {
        rng.uniform(params.magnitude_jitter.0, params.magnitude_jitter.1)
    };
    let force = ((reach - dist) * reach / 2.0 * (1.0 + eps)).max(MIN_REPULSION_STEP);
    let (dx, dy) = (force * theta.cos(), force * theta.sin());
    cells[i].position = Point::new(pi.x + dx, pi.y + dy);
    cells[j].position = Point::new(pj.x - dx, pj.y - dy);
    Some(force)
}

fn resolve_inner(
    state: PopulationState,
    params: &RepulsionParams,
    rng: &mut RandomSource,
    mut trace: Option<&mut Vec<RepulsionStep>>,
) -> Result<(PopulationState, usize)> {
    let mut state = state;
    let n = state.cells.len();
    let reach = 2.0 * state.cells.iter().map(|c| c.radius).fold(0.0, f64::max);
    let mut grid = Grid::build(&state.cells, reach);
    let mut candidates = Vec::new();
    let mut iterations = 0;
    // A pair whose cells have not moved since it was last found apart is
    // still apart. After the first sweep only cells near one that moved in
    // the previous sweep, or earlier in the current one, are visited; the
    // pair order within a sweep is unchanged.
    let mut moved_before = vec![true; n];
    let mut moved_now = vec![false; n];
    let mut moved_list: Vec<usize> = (0..n).collect();
    let mut queued = vec![false; n];
    while iterations < params.max_iterations {
        if iterations == 0 {
            queued.fill(true);
        } else {
            for &k in &moved_list {
                grid.rehome(k, state.cells[k].position);
            }
            for &k in &moved_list {
                queued[k] = true;
                for m in grid.around(grid.home[k]) {
                    queued[m] = true;
                }
            }
        }
        let mut next_moved = Vec::new();
        let mut found = 0;
        for i in 0..n {
            if !std::mem::take(&mut queued[i]) {
                continue;
            }
            let still_i = !moved_before[i] && !moved_now[i];
            let bucket = if still_i {
                grid.home[i]
            } else {
                grid.bucket(state.cells[i].position)
            };
            grid.candidates_after(i, bucket, &mut candidates);
            for &j in &candidates {
                if !moved_before[i] && !moved_now[i] && !moved_before[j] && !moved_now[j] {
                    continue;
                }
                let Some(force) = repulse(&mut state.cells, i, j, params, rng) else {
                    continue;
                };
                found += 1;
                for k in [i, j] {
                    if !moved_now[k] {
                        moved_now[k] = true;
                        next_moved.push(k);
                        if !moved_before[k] {
                            queued[k] |= k > i;
                            for m in grid.around(grid.home[k]).filter(|&m| m > i) {
                                queued[m] = true;
                            }
                        }
                    }
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(RepulsionStep {
                        sweep: iterations + 1,
                        i,
                        j,
                        force,
                    });
                }
            }
        }
        if found == 0 {
            return Ok((state, iterations));
        }
        for (k, c) in state.cells.iter_mut().enumerate() {
            let reflected = reflect_point(c.position);
            if reflected != c.position && !moved_now[k] {
                moved_now[k] = true;
                next_moved.push(k);
            }
            c.position = reflected;
        }
        for &k in &moved_list {
            moved_before[k] = false;
        }
        for &k in &next_moved {
            moved_before[k] = true;
            moved_now[k] = false;
        }
        moved_list = next_moved;
        iterations += 1;
    }
    let overlapping = state.overlapping_pairs();
    if overlapping == 0 {
        return Ok((state, iterations));
    }
    Err(Error::Overcrowded {
        iterations,
        overlapping,
    })
}

/// Pushes overlapping pairs apart, sweeping pairs in lexicographic order,
/// until a full sweep finds no overlap.
pub fn resolve_overlaps(
    state: PopulationState,
    params: &RepulsionParams,
    rng: &mut RandomSource,
) -> Result<PopulationState> {
    resolve_inner(state, params, rng, None).map(|(s, _)| s)
}

/// [`resolve_overlaps`] that also records every applied displacement.
pub fn resolve_overlaps_traced(
    state: PopulationState,
    params: &RepulsionParams,
    rng: &mut RandomSource,
) -> Result<Resolution> {
    let mut steps = Vec::new();
    let (state, iterations) = resolve_inner(state, params, rng, Some(&mut steps))?;
    Ok(Resolution {
        state,
        iterations,
        steps,
    })
}

/// Mitosis clock implied by the lineage: `-k` for the `k`-th frame before a
/// division (up to half a cycle), `k` for the `k`-th frame of a daughter
/// (up to one cycle), `None` otherwise. Pre-division offsets take
/// precedence.
pub fn lineage_mitosis_clock(
    record: &TrackRecord,
    divides: bool,
    frame: u32,
    cycle_length: u32,
) -> Option<i32> {
    if !record.is_alive(frame) {
        return None;
    }
    if divides {
        let before = i64::from(record.end) + 1 - i64::from(frame);
        if before <= i64::from(cycle_length / 2) {
            return Some(-before as i32);
        }
    }
    if record.parent != 0 {
        let since = frame - record.begin;
        if since < cycle_length {
            return Some(since as i32);
        }
    }
    None
}

/// Rewrites every cell's clock from the finished lineage, filling in the
/// pre-division ramps that cannot be known while simulating forward.
pub fn annotate_mitosis_clocks(trajectory: &mut TimeLapseTrajectory, cycle_length: u32) {
    let records: BTreeMap<u32, TrackRecord> =
        trajectory.lineage.iter().map(|r| (r.label, *r)).collect();
    let parents = crate::model::children_of(&trajectory.lineage);
    for frame in &mut trajectory.frames {
        for c in &mut frame.cells {
            if let Some(r) = records.get(&c.track_id) {
                let divides = parents.contains_key(&c.track_id);
                c.mitosis_clock = lineage_mitosis_clock(r, divides, frame.frame, cycle_length);
            }
        }
    }
}

/// Runs the motion model for `frames_per_video` frames.
pub fn simulate(config: &SimulationConfig, rng: &mut RandomSource) -> Result<TimeLapseTrajectory> {
    config.validate()?;
    let stats = config.effective_stats();
    let mut ids = TrackIds::default();
    let first = init_population(config, &mut ids, rng)?;
    let mut records: BTreeMap<u32, TrackRecord> = first
        .cells
        .iter()
        .map(|c| (c.track_id, TrackRecord::new(c.track_id, 0, 0, 0)))
        .collect();
    let mut frames = Vec::with_capacity(config.frames_per_video);
    frames.push(first);

    for t in 1..config.frames_per_video as u32 {
        let mut state = frames.last().unwrap().clone();
        advance_mitosis_clocks(&mut state, config.mitosis_cycle_length);
        let moved = step_positions(&state, &stats, rng);
        let (split, events) = maybe_split(&moved, &stats, config, &mut ids, rng);
        let mut next = resolve_overlaps(split, &config.repulsion, rng)?;
        next.frame = t;
        for e in &events {
            for d in e.daughters {
                records.insert(d, TrackRecord::new(d, t, t, e.parent));
            }
        }
        for c in &next.cells {
            records
                .get_mut(&c.track_id)
                .expect("every cell has a record")
                .end = t;
        }
        frames.push(next);
    }

    let mut trajectory = TimeLapseTrajectory {
        frames,
        lineage: records.into_values().collect(),
    };
    annotate_mitosis_clocks(&mut trajectory, config.mitosis_cycle_length);
    Ok(trajectory)
}

/// Simulates `n_videos` independent trajectories, video `v` seeded with
/// `derive_child_seed(config.master_seed, v)`.
pub fn simulate_batch(
    config: &SimulationConfig,
    n_videos: usize,
    exec: Execution,
) -> Result<Vec<TimeLapseTrajectory>> {
    config.validate()?;
    exec.try_map_range(n_videos, |v| {
        let mut rng = RandomSource::from_seed(derive_child_seed(config.master_seed, v as u64));
        simulate(config, &mut rng)
    })
}
