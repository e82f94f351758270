//! Mobility traces: the normalized CSV format, uniform resampling, synthetic
//! random-waypoint generation, and range queries over node positions.
//!
//! A trace holds one position per node per step on a shared time axis.
//! Imported data is resampled onto that axis by linear interpolation, with
//! positions held constant outside a node's sampled interval.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::{self, SplitMix64};

pub const TRACE_CSV_HEADER: &str = "node_id,t_seconds,x_m,y_m";

/// Default resampling interval in seconds.
pub const DEFAULT_STEP_S: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: &'static str },
    #[error("trace line {line}: timestamps must be strictly increasing per node")]
    NonMonotonicTime { line: usize },
    #[error("expected header `{TRACE_CSV_HEADER}`")]
    BadHeader,
    #[error("trace contains no samples")]
    Empty,
    #[error("invalid parameter: {0}")]
    BadParams(&'static str),
}

/// A mobility trace resampled to a uniform interval. Positions are meters;
/// the time axis starts at zero.
#[derive(Debug, Clone)]
pub struct MobilityTrace {
    step_s: f64,
    /// `positions[step][node]`.
    positions: Vec<Vec<(f64, f64)>>,
    /// Original node labels, in dense-index order.
    node_ids: Vec<u32>,
}

impl MobilityTrace {
    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_steps(&self) -> usize {
        self.positions.len()
    }

    pub fn step_s(&self) -> f64 {
        self.step_s
    }

    pub fn duration_s(&self) -> f64 {
        if self.positions.is_empty() {
            0.0
        } else {
            (self.positions.len() - 1) as f64 * self.step_s
        }
    }

    pub fn node_ids(&self) -> &[u32] {
        &self.node_ids
    }

    pub fn position(&self, step: usize, node: usize) -> (f64, f64) {
        self.positions[step][node]
    }

    pub fn positions_at(&self, step: usize) -> &[(f64, f64)] {
        &self.positions[step]
    }

    /// Axis-aligned bounding box over all positions: (min_x, min_y, max_x, max_y).
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut bb = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for step in &self.positions {
            for &(x, y) in step {
                bb.0 = bb.0.min(x);
                bb.1 = bb.1.min(y);
                bb.2 = bb.2.max(x);
                bb.3 = bb.3.max(y);
            }
        }
        bb
    }

    /// All unordered in-range pairs at one step.
    pub fn pairs_in_range(&self, step: usize, range_m: f64) -> Vec<(u32, u32)> {
        pairs_within(&self.positions[step], range_m)
    }

    /// Deterministic contact events `(step, a, b)` with `a < b` over the
    /// whole trace: the time-varying contact graph induced by the radio
    /// range, before any encounter-probability thinning.
    pub fn contact_events(&self, range_m: f64) -> Vec<(usize, u32, u32)> {
        let mut out = Vec::new();
        for step in 0..self.n_steps() {
            for (a, b) in self.pairs_in_range(step, range_m) {
                out.push((step, a, b));
            }
        }
        out
    }

    /// Serializes to the normalized CSV format.
    pub fn to_csv(&self) -> String {
        use core::fmt::Write;
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for (dense, &label) in self.node_ids.iter().enumerate() {
            for step in 0..self.n_steps() {
                let (x, y) = self.positions[step][dense];
                let t = step as f64 * self.step_s;
                let _ = writeln!(out, "{label},{t},{x},{y}");
            }
        }
        out
    }

    /// Parses the normalized CSV and resamples to `step_s`.
    ///
    /// Node ids may be arbitrary u32 labels; they are mapped onto dense
    /// indices in ascending label order. Timestamps must be strictly
    /// increasing per node.
    pub fn parse_csv(text: &str, step_s: f64) -> Result<Self, TraceError> {
        if !(step_s > 0.0) {
            return Err(TraceError::BadParams("step_s must be positive"));
        }
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, raw)) if raw.trim().is_empty() => continue,
                Some((_, raw)) => break raw,
                None => return Err(TraceError::Empty),
            }
        };
        if header.trim() != TRACE_CSV_HEADER {
            return Err(TraceError::BadHeader);
        }

        // label -> samples (t, x, y); also remember the last line per label
        // for monotonicity reporting.
        let mut by_label: alloc::collections::BTreeMap<u32, Vec<(f64, f64, f64)>> =
            alloc::collections::BTreeMap::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split(',');
            let mut field = |reason| {
                parts
                    .next()
                    .map(str::trim)
                    .ok_or(TraceError::Parse { line, reason })
            };
            let label: u32 = field("missing node_id")?
                .parse()
                .map_err(|_| TraceError::Parse { line, reason: "bad node_id" })?;
            let t: f64 = field("missing t_seconds")?
                .parse()
                .map_err(|_| TraceError::Parse { line, reason: "bad t_seconds" })?;
            let x: f64 = field("missing x_m")?
                .parse()
                .map_err(|_| TraceError::Parse { line, reason: "bad x_m" })?;
            let y: f64 = field("missing y_m")?
                .parse()
                .map_err(|_| TraceError::Parse { line, reason: "bad y_m" })?;
            if parts.next().is_some() {
                return Err(TraceError::Parse { line, reason: "too many fields" });
            }
            if !t.is_finite() || !x.is_finite() || !y.is_finite() {
                return Err(TraceError::Parse { line, reason: "non-finite value" });
            }
            let samples = by_label.entry(label).or_default();
            if let Some(&(prev_t, _, _)) = samples.last() {
                if t <= prev_t {
                    return Err(TraceError::NonMonotonicTime { line });
                }
            }
            samples.push((t, x, y));
        }
        if by_label.is_empty() {
            return Err(TraceError::Empty);
        }

        let start = by_label
            .values()
            .map(|s| s[0].0)
            .fold(f64::INFINITY, f64::min);
        let end = by_label
            .values()
            .map(|s| s.last().unwrap().0)
            .fold(f64::NEG_INFINITY, f64::max);
        let n_steps = libm::floor((end - start) / step_s) as usize + 1;

        let node_ids: Vec<u32> = by_label.keys().copied().collect();
        let mut positions = alloc::vec![Vec::with_capacity(node_ids.len()); n_steps];
        for samples in by_label.values() {
            for (step, slot) in positions.iter_mut().enumerate() {
                let t = start + step as f64 * step_s;
                slot.push(sample_at(samples, t));
            }
        }
        Ok(MobilityTrace {
            step_s,
            positions,
            node_ids,
        })
    }
}

/// Linear interpolation with clamping outside the sampled interval.
fn sample_at(samples: &[(f64, f64, f64)], t: f64) -> (f64, f64) {
    let first = samples[0];
    if t <= first.0 {
        return (first.1, first.2);
    }
    let last = samples[samples.len() - 1];
    if t >= last.0 {
        return (last.1, last.2);
    }
    // Binary search for the segment containing t.
    let idx = samples.partition_point(|s| s.0 <= t);
    let (t0, x0, y0) = samples[idx - 1];
    let (t1, x1, y1) = samples[idx];
    let w = (t - t0) / (t1 - t0);
    (x0 + w * (x1 - x0), y0 + w * (y1 - y0))
}

/// Uniform-grid range query over one snapshot of positions. Cells are sized
/// to the query range so only the 3x3 neighborhood needs scanning.
pub fn pairs_within(positions: &[(f64, f64)], range_m: f64) -> Vec<(u32, u32)> {
    let n = positions.len();
    let mut out = Vec::new();
    if n < 2 || !(range_m > 0.0) {
        return out;
    }
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    for &(x, y) in positions {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
    }
    let cell = range_m;
    let key = |x: f64, y: f64| -> (i64, i64) {
        (((x - min_x) / cell) as i64, ((y - min_y) / cell) as i64)
    };
    let mut grid: alloc::collections::BTreeMap<(i64, i64), Vec<u32>> =
        alloc::collections::BTreeMap::new();
    for (i, &(x, y)) in positions.iter().enumerate() {
        grid.entry(key(x, y)).or_default().push(i as u32);
    }
    let r2 = range_m * range_m;
    for (&(cx, cy), members) in &grid {
        // Within-cell pairs.
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                let (ax, ay) = positions[a as usize];
                let (bx, by) = positions[b as usize];
                let (dx, dy) = (ax - bx, ay - by);
                if dx * dx + dy * dy <= r2 {
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
        // Forward neighbor cells only, so each cell pair is visited once.
        for (nx, ny) in [(1, -1), (1, 0), (1, 1), (0, 1)] {
            if let Some(others) = grid.get(&(cx + nx, cy + ny)) {
                for &a in members {
                    for &b in others {
                        let (ax, ay) = positions[a as usize];
                        let (bx, by) = positions[b as usize];
                        let (dx, dy) = (ax - bx, ay - by);
                        if dx * dx + dy * dy <= r2 {
                            out.push((a.min(b), a.max(b)));
                        }
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Random-waypoint synthesis parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointParams {
    pub n_nodes: usize,
    /// Side of the square simulation area, meters.
    pub area_side_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub pause_min_s: f64,
    pub pause_max_s: f64,
    pub duration_s: f64,
    pub step_s: f64,
    pub seed: u64,
}

impl Default for WaypointParams {
    fn default() -> Self {
        WaypointParams {
            n_nodes: 100,
            area_side_m: 1000.0,
            speed_min_mps: 0.5,
            speed_max_mps: 2.0,
            pause_min_s: 0.0,
            pause_max_s: 120.0,
            duration_s: 3600.0,
            step_s: DEFAULT_STEP_S,
            seed: 0,
        }
    }
}

/// Generates a random-waypoint trace: each node walks to uniformly chosen
/// waypoints at a uniform speed, pausing between legs. Deterministic per
/// seed; every node has its own derived stream.
pub fn synth_random_waypoint(params: &WaypointParams) -> Result<MobilityTrace, TraceError> {
    if !(params.area_side_m > 0.0) {
        return Err(TraceError::BadParams("area_side_m must be positive"));
    }
    if !(params.speed_min_mps > 0.0 && params.speed_max_mps >= params.speed_min_mps) {
        return Err(TraceError::BadParams("need 0 < speed_min <= speed_max"));
    }
    if !(params.pause_min_s >= 0.0 && params.pause_max_s >= params.pause_min_s) {
        return Err(TraceError::BadParams("need 0 <= pause_min <= pause_max"));
    }
    if !(params.duration_s >= 0.0 && params.step_s > 0.0) {
        return Err(TraceError::BadParams("need duration >= 0 and step > 0"));
    }
    let n_steps = libm::floor(params.duration_s / params.step_s) as usize + 1;
    let mut positions = alloc::vec![Vec::with_capacity(params.n_nodes); n_steps];
    for node in 0..params.n_nodes {
        let mut rng = SplitMix64::new(rng::derive_stream(params.seed, &[0x8F9, node as u64]));
        let uniform = |rng: &mut SplitMix64, lo: f64, hi: f64| lo + (hi - lo) * rng.next_f64();
        let side = params.area_side_m;
        let mut pos = (uniform(&mut rng, 0.0, side), uniform(&mut rng, 0.0, side));
        let mut step_written = 0usize;
        let mut t = 0.0f64;
        positions[0].push(pos);
        step_written += 1;
        'legs: while step_written < n_steps {
            // Travel leg.
            let target = (uniform(&mut rng, 0.0, side), uniform(&mut rng, 0.0, side));
            let speed = uniform(&mut rng, params.speed_min_mps, params.speed_max_mps);
            let (dx, dy) = (target.0 - pos.0, target.1 - pos.1);
            let dist = libm::sqrt(dx * dx + dy * dy);
            let travel = dist / speed;
            while step_written < n_steps {
                let sample_t = step_written as f64 * params.step_s;
                if sample_t > t + travel {
                    break;
                }
                let w = if travel > 0.0 { (sample_t - t) / travel } else { 1.0 };
                positions[step_written].push((pos.0 + w * dx, pos.1 + w * dy));
                step_written += 1;
            }
            t += travel;
            pos = target;
            if step_written >= n_steps {
                break 'legs;
            }
            // Pause leg.
            let pause = uniform(&mut rng, params.pause_min_s, params.pause_max_s);
            while step_written < n_steps {
                let sample_t = step_written as f64 * params.step_s;
                if sample_t > t + pause {
                    break;
                }
                positions[step_written].push(pos);
                step_written += 1;
            }
            t += pause;
        }
    }
    Ok(MobilityTrace {
        step_s: params.step_s,
        positions,
        node_ids: (0..params.n_nodes as u32).collect(),
    })
}
