//! Jammer placement: uniform random, trace-node-bound (mobile), and
//! simulated-annealing optimized stationary positions.
//!
//! The annealing objective is the number of (step, pair) contact
//! opportunities suppressed, where a contact is suppressed when either
//! endpoint lies strictly inside some jammer's radius. Cooling is geometric;
//! the initial temperature is the objective's standard deviation over random
//! placements, so acceptance starts permissive and tightens as the schedule
//! decays.

use alloc::vec::Vec;

use crate::rng::{self, SplitMix64};
use crate::trace::MobilityTrace;

/// Where jammers sit.
#[derive(Debug, Clone, PartialEq)]
pub enum JammerPlacement {
    /// Stationary points in the plane.
    Static(Vec<(f64, f64)>),
    /// Bound to trace nodes, moving with them.
    Nodes(Vec<u32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    Uniform,
    Annealed,
    Mobile,
}

/// Annealing schedule constants: geometric cooling x0.95 per 100 proposals,
/// 10^4 proposals total.
const PROPOSALS: usize = 10_000;
const COOL_EVERY: usize = 100;
const COOL_FACTOR: f64 = 0.95;
const INIT_SAMPLES: usize = 100;

/// Places `count` jammers for the given trace and jam radius.
///
/// - `Uniform`: positions sampled uniformly over the trace bounding box.
/// - `Annealed`: starts uniform, then maximizes the count of contact
///   opportunities (in-range pairs at `encounter_range_m`) suppressed.
/// - `Mobile`: binds jammers to distinct trace nodes.
///
/// Deterministic per seed.
pub fn place_jammers(
    trace: &MobilityTrace,
    count: usize,
    radius_m: f64,
    encounter_range_m: f64,
    mode: PlacementMode,
    seed: u64,
) -> JammerPlacement {
    let mut rng = SplitMix64::new(rng::derive_stream(seed, &[0x7A3, count as u64]));
    if count == 0 {
        return match mode {
            PlacementMode::Mobile => JammerPlacement::Nodes(Vec::new()),
            _ => JammerPlacement::Static(Vec::new()),
        };
    }
    match mode {
        PlacementMode::Mobile => {
            let picks = rng::sample_indices(&mut rng, trace.n_nodes(), count);
            let mut nodes: Vec<u32> = picks.into_iter().map(|i| i as u32).collect();
            nodes.sort_unstable();
            JammerPlacement::Nodes(nodes)
        }
        PlacementMode::Uniform => {
            JammerPlacement::Static(uniform_positions(trace, count, &mut rng))
        }
        PlacementMode::Annealed => JammerPlacement::Static(anneal_positions(
            trace,
            count,
            radius_m,
            encounter_range_m,
            &mut rng,
        )),
    }
}

fn uniform_positions(trace: &MobilityTrace, count: usize, rng: &mut SplitMix64) -> Vec<(f64, f64)> {
    let (min_x, min_y, max_x, max_y) = finite_bbox(trace);
    (0..count)
        .map(|_| {
            (
                min_x + (max_x - min_x) * rng.next_f64(),
                min_y + (max_y - min_y) * rng.next_f64(),
            )
        })
        .collect()
}

fn finite_bbox(trace: &MobilityTrace) -> (f64, f64, f64, f64) {
    let bb = trace.bounding_box();
    if bb.0.is_finite() {
        bb
    } else {
        (0.0, 0.0, 1.0, 1.0)
    }
}

/// Counts (step, pair) contact events suppressed by the placement: events
/// where either endpoint is strictly within `radius_m` of some jammer.
pub fn suppressed_contacts(
    trace: &MobilityTrace,
    contacts: &[(usize, u32, u32)],
    positions: &[(f64, f64)],
    radius_m: f64,
) -> usize {
    let r2 = radius_m * radius_m;
    let covered = |step: usize, node: u32| {
        let p = trace.position(step, node as usize);
        positions.iter().any(|&(jx, jy)| {
            let (dx, dy) = (p.0 - jx, p.1 - jy);
            dx * dx + dy * dy < r2
        })
    };
    contacts
        .iter()
        .filter(|&&(step, a, b)| covered(step, a) || covered(step, b))
        .count()
}

fn anneal_positions(
    trace: &MobilityTrace,
    count: usize,
    radius_m: f64,
    encounter_range_m: f64,
    rng: &mut SplitMix64,
) -> Vec<(f64, f64)> {
    let contacts = trace.contact_events(encounter_range_m);
    let (min_x, min_y, max_x, max_y) = finite_bbox(trace);
    let span = ((max_x - min_x).max(max_y - min_y)).max(1.0);

    // Initial temperature: standard deviation of the objective over random
    // placements.
    let mut samples = Vec::with_capacity(INIT_SAMPLES);
    for _ in 0..INIT_SAMPLES {
        let pos = uniform_positions(trace, count, rng);
        samples.push(suppressed_contacts(trace, &contacts, &pos, radius_m) as f64);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / samples.len() as f64;
    let mut temperature = libm::sqrt(var).max(1.0);

    let mut current = uniform_positions(trace, count, rng);
    let mut current_score = suppressed_contacts(trace, &contacts, &current, radius_m) as f64;
    let mut best = current.clone();
    let mut best_score = current_score;

    for proposal in 0..PROPOSALS {
        let idx = rng::uniform_below(rng, count);
        let mut candidate = current.clone();
        if rng.next_f64() < 0.2 {
            // Occasional global jump escapes empty regions.
            candidate[idx] = (
                min_x + (max_x - min_x) * rng.next_f64(),
                min_y + (max_y - min_y) * rng.next_f64(),
            );
        } else {
            let sigma = 0.05 * span;
            candidate[idx].0 += sigma * rng::standard_normal(rng);
            candidate[idx].1 += sigma * rng::standard_normal(rng);
            candidate[idx].0 = candidate[idx].0.clamp(min_x, max_x);
            candidate[idx].1 = candidate[idx].1.clamp(min_y, max_y);
        }
        let score = suppressed_contacts(trace, &contacts, &candidate, radius_m) as f64;
        let delta = score - current_score;
        let accept = delta >= 0.0 || rng.next_f64() < libm::exp(delta / temperature);
        if accept {
            current = candidate;
            current_score = score;
            if score > best_score {
                best = current.clone();
                best_score = score;
            }
        }
        if (proposal + 1) % COOL_EVERY == 0 {
            temperature *= COOL_FACTOR;
        }
    }
    best
}
