//! Analytical privacy and robustness tooling: author anonymity sets from the
//! priority recursion, social-graph leakage under chosen-input attacks
//! (static metric, mean-field dynamics, and exact stochastic simulation),
//! and the physical jamming radius.

use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::SocialGraph;
use crate::rng::{self, SplitMix64};
use crate::trace::MobilityTrace;
use crate::trust::{sigmoid_multiplier, TrustParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("invalid parameter: {0}")]
    BadParams(&'static str),
}

// ---------------------------------------------------------------------------
// Temporal hop counts and the empirical hop distribution
// ---------------------------------------------------------------------------

/// Minimum forward counts from `source` to every node over a time-varying
/// contact sequence, respecting causality: a contact can only extend a path
/// whose previous hop happened at the same step or earlier.
///
/// `contacts` are `(step, a, b)` events, undirected. Returns one
/// `Option<hops>` per node; `None` means unreachable within `max_hops`.
pub fn temporal_min_hops(
    contacts: &[(usize, u32, u32)],
    n_nodes: usize,
    source: u32,
    max_hops: usize,
) -> Vec<Option<usize>> {
    const INF: usize = usize::MAX;
    // earliest[v] = earliest step at which v can hold the message using the
    // hop budget explored so far.
    let mut earliest = alloc::vec![INF; n_nodes];
    let mut hops = alloc::vec![None; n_nodes];
    earliest[source as usize] = 0;
    hops[source as usize] = Some(0);

    let mut sorted: Vec<(usize, u32, u32)> = contacts.to_vec();
    sorted.sort_unstable();

    for hop in 1..=max_hops {
        let mut changed = false;
        let mut next = earliest.clone();
        for &(step, a, b) in &sorted {
            let (a, b) = (a as usize, b as usize);
            if earliest[a] <= step && step < next[b] {
                next[b] = step;
                changed = true;
            }
            if earliest[b] <= step && step < next[a] {
                next[a] = step;
                changed = true;
            }
        }
        for v in 0..n_nodes {
            if next[v] < INF && hops[v].is_none() {
                hops[v] = Some(hop);
            }
        }
        earliest = next;
        if !changed {
            break;
        }
    }
    hops
}

/// Empirical distribution of minimum temporal hop counts over sampled
/// ordered node pairs. Pairs unreachable within `n_max` hops are excluded
/// from the pmf and reported as `unreachable_mass`.
#[derive(Debug, Clone, PartialEq)]
pub struct HopDistribution {
    /// `pmf[n]` for n in 0..=n_max; sums to 1 over the reachable pairs.
    pub pmf: Vec<f64>,
    /// Fraction of sampled pairs that were unreachable (or beyond n_max).
    pub unreachable_mass: f64,
}

impl HopDistribution {
    pub fn n_max(&self) -> usize {
        self.pmf.len().saturating_sub(1)
    }

    /// A point distribution at hop `n` (useful for what-if analyses).
    pub fn point(n: usize) -> Self {
        let mut pmf = alloc::vec![0.0; n + 1];
        pmf[n] = 1.0;
        HopDistribution {
            pmf,
            unreachable_mass: 0.0,
        }
    }
}

/// Measures the hop pmf on a trace: minimum temporal hop counts between
/// distinct ordered pairs, sources subsampled to at most `max_sources`.
pub fn empirical_hop_pmf(
    trace: &MobilityTrace,
    encounter_range_m: f64,
    n_max: usize,
    max_sources: usize,
    seed: u64,
) -> Result<HopDistribution, AnalyticsError> {
    if n_max == 0 {
        return Err(AnalyticsError::BadParams("n_max must be at least 1"));
    }
    let n = trace.n_nodes();
    if n < 2 {
        return Err(AnalyticsError::BadParams("need at least two nodes"));
    }
    let contacts = trace.contact_events(encounter_range_m);
    let mut rng = SplitMix64::new(rng::derive_stream(seed, &[0x40B]));
    let sources: Vec<u32> = if max_sources >= n {
        (0..n as u32).collect()
    } else {
        rng::sample_indices(&mut rng, n, max_sources)
            .into_iter()
            .map(|i| i as u32)
            .collect()
    };
    let mut counts = alloc::vec![0usize; n_max + 1];
    let mut unreachable = 0usize;
    let mut total = 0usize;
    for &src in &sources {
        let hops = temporal_min_hops(&contacts, n, src, n_max);
        for (v, h) in hops.iter().enumerate() {
            if v as u32 == src {
                continue;
            }
            total += 1;
            match h {
                Some(h) => counts[*h] += 1,
                None => unreachable += 1,
            }
        }
    }
    let reachable = (total - unreachable) as f64;
    if reachable == 0.0 {
        return Ok(HopDistribution {
            pmf: alloc::vec![0.0; n_max + 1],
            unreachable_mass: 1.0,
        });
    }
    Ok(HopDistribution {
        pmf: counts.iter().map(|&c| c as f64 / reachable).collect(),
        unreachable_mass: unreachable as f64 / total as f64,
    })
}

// ---------------------------------------------------------------------------
// Anonymity-set estimation
// ---------------------------------------------------------------------------

/// Distribution of the per-hop priority multiplier.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierDist {
    /// Constant multiplier (e.g. 1.0 to isolate the noise process).
    Fixed(f64),
    /// Resample uniformly from measured multipliers.
    Empirical(Vec<f64>),
}

impl MultiplierDist {
    fn sample(&self, rng: &mut SplitMix64) -> f64 {
        match self {
            MultiplierDist::Fixed(v) => *v,
            MultiplierDist::Empirical(vals) => vals[rng::uniform_below(rng, vals.len())],
        }
    }
}

/// Model of the received-priority process for anonymity estimation: the
/// hop-count prior, the per-hop multiplier distribution, and the additive
/// noise; Monte Carlo sample count and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct AnonymityModel {
    pub mu: f64,
    pub sigma2: f64,
    pub hop_pmf: HopDistribution,
    pub multiplier: MultiplierDist,
    pub samples: usize,
    pub seed: u64,
}

impl AnonymityModel {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.samples < 10_000 {
            return Err(AnalyticsError::BadParams("need at least 10^4 samples"));
        }
        if self.sigma2 < 0.0 {
            return Err(AnalyticsError::BadParams("sigma2 must be nonnegative"));
        }
        if let MultiplierDist::Empirical(v) = &self.multiplier {
            if v.is_empty() {
                return Err(AnalyticsError::BadParams("empty multiplier sample"));
            }
            if v.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(AnalyticsError::BadParams("multipliers must lie in [0,1]"));
            }
        }
        Ok(())
    }
}

/// Estimates multipliers from a social graph by sampling encounters: random
/// ordered pairs submit capped subsets of their friend sets, and the
/// resulting trust score goes through the sigmoid.
pub fn multiplier_samples_from_graph(
    graph: &SocialGraph,
    params: &TrustParams,
    psi_max_inputs: usize,
    psi_include_prob: f64,
    n_samples: usize,
    seed: u64,
) -> Vec<f64> {
    let n = graph.n_nodes();
    let mut rng = SplitMix64::new(rng::derive_stream(seed, &[0xA11]));
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let a = rng::uniform_below(&mut rng, n) as u32;
        let b = loop {
            let b = rng::uniform_below(&mut rng, n) as u32;
            if b != a {
                break b;
            }
        };
        let fa: Vec<u32> = graph.neighbors(a).collect();
        let fb: Vec<u32> = graph.neighbors(b).collect();
        let sub_a = crate::sim::select_subset(&fa, psi_max_inputs, psi_include_prob, &mut rng);
        let sub_b = crate::sim::select_subset(&fb, psi_max_inputs, psi_include_prob, &mut rng);
        let mut shared = 0u32;
        let (mut i, mut j) = (0, 0);
        while i < sub_a.len() && j < sub_b.len() {
            match sub_a[i].cmp(&sub_b[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let t = crate::trust::trust_score(shared, sub_a.len() as u32, params)
            .expect("shared bounded by submission");
        out.push(sigmoid_multiplier(t, params));
    }
    out
}

/// P(S = 1 | N = n): probability that a message still carries a saturated
/// priority after `n` hops of `S_k = Tr_0^1[p_k S_{k-1} + z_k]`, `S_0 = 1`.
///
/// Saturation is exact: the pre-truncation value must reach 1. Monte Carlo
/// with a per-`n` derived stream, so the estimate is deterministic for a
/// given model.
pub fn priority_likelihood(model: &AnonymityModel, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut rng = SplitMix64::new(rng::derive_stream(model.seed, &[0x5A7, n as u64]));
    let mut saturated = 0usize;
    for _ in 0..model.samples {
        let mut s = 1.0f64;
        for _ in 0..n {
            let p = model.multiplier.sample(&mut rng);
            let z = rng::normal(&mut rng, model.mu, model.sigma2);
            let raw = p * s + z;
            s = raw.clamp(0.0, 1.0);
        }
        if s >= 1.0 {
            saturated += 1;
        }
    }
    saturated as f64 / model.samples as f64
}

/// The anonymity curve: one (confidence, set fraction) point per requested
/// confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct AnonymityCurve {
    pub points: Vec<(f64, f64)>,
}

/// Computes the anonymity-set curve on a trace.
///
/// The posterior over hop counts combines the hop prior with the saturation
/// likelihood; for each confidence level the hop counts are taken greedily
/// by posterior mass and the candidate set is every node within the largest
/// selected hop distance of the observer (a hop-ball, so sets are nested and
/// the curve is monotone). The fraction is averaged uniformly over all
/// observers.
pub fn anonymity_set_curve(
    model: &AnonymityModel,
    trace: &MobilityTrace,
    encounter_range_m: f64,
    confidence_grid: &[f64],
) -> Result<AnonymityCurve, AnalyticsError> {
    model.validate()?;
    let n = trace.n_nodes();
    if n < 2 {
        return Err(AnalyticsError::BadParams("need at least two nodes"));
    }
    let n_max = model.hop_pmf.n_max();
    let contacts = trace.contact_events(encounter_range_m);

    // Posterior over hop counts, up to normalization.
    let mut weights = Vec::with_capacity(n_max + 1);
    for hop in 0..=n_max {
        weights.push(model.hop_pmf.pmf[hop] * priority_likelihood(model, hop));
    }
    let total: f64 = weights.iter().sum();
    let posterior: Vec<f64> = if total > 0.0 {
        weights.iter().map(|w| w / total).collect()
    } else {
        // Degenerate likelihood: fall back to the hop prior.
        model.hop_pmf.pmf.clone()
    };

    // min_hops[v][o]: hops from candidate author v to observer o.
    let min_hops: Vec<Vec<Option<usize>>> = (0..n as u32)
        .map(|v| temporal_min_hops(&contacts, n, v, n_max))
        .collect();

    let mut order: Vec<usize> = (0..=n_max).collect();
    order.sort_by(|&a, &b| {
        posterior[b]
            .partial_cmp(&posterior[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut points = Vec::with_capacity(confidence_grid.len());
    for &c in confidence_grid {
        if !(0.0..=1.0).contains(&c) {
            return Err(AnalyticsError::BadParams("confidence must be in [0,1]"));
        }
        let mut mass = 0.0;
        let mut max_hop = 0usize;
        for &hop in &order {
            mass += posterior[hop];
            max_hop = max_hop.max(hop);
            if mass >= c {
                break;
            }
        }
        // Fraction of nodes within max_hop of each observer, averaged.
        let mut fraction_sum = 0.0;
        for observer in 0..n {
            let mut count = 0usize;
            for candidate in 0..n {
                let hops = if candidate == observer {
                    Some(0)
                } else {
                    min_hops[candidate][observer]
                };
                if let Some(h) = hops {
                    if h <= max_hop {
                        count += 1;
                    }
                }
            }
            fraction_sum += count as f64 / n as f64;
        }
        points.push((c, fraction_sum / n as f64));
    }
    Ok(AnonymityCurve { points })
}

// ---------------------------------------------------------------------------
// Static graph leakage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionSelection {
    Uniform,
    TopDegree,
}

/// d_epsilon: the fraction of graph edges incident to a corrupted node set
/// of size ceil(epsilon * n). The adversary learns every edge emanating from
/// the nodes it corrupts.
pub fn static_leakage(
    graph: &SocialGraph,
    epsilon: f64,
    selection: CorruptionSelection,
    seed: u64,
) -> Result<f64, AnalyticsError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(AnalyticsError::BadParams("epsilon must be in [0,1]"));
    }
    let n = graph.n_nodes();
    let k = libm::ceil(epsilon * n as f64) as usize;
    let corrupted = corruption_set(graph, k, selection, seed);
    Ok(leaked_fraction(graph, &corrupted))
}

/// Leakage at each epsilon on a shared, nested corruption order (so the
/// curve is monotone by construction, matching the incremental-corruption
/// threat model).
pub fn static_leakage_curve(
    graph: &SocialGraph,
    epsilons: &[f64],
    selection: CorruptionSelection,
    seed: u64,
) -> Result<Vec<(f64, f64)>, AnalyticsError> {
    let n = graph.n_nodes();
    let order = corruption_set(graph, n, selection, seed);
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if !(0.0..=1.0).contains(&eps) {
            return Err(AnalyticsError::BadParams("epsilon must be in [0,1]"));
        }
        let k = libm::ceil(eps * n as f64) as usize;
        out.push((eps, leaked_fraction(graph, &order[..k.min(n)])));
    }
    Ok(out)
}

/// The corruption set used by [`static_leakage`] for the same arguments:
/// the first `k` nodes of the (seeded) corruption order.
pub fn corruption_set(
    graph: &SocialGraph,
    k: usize,
    selection: CorruptionSelection,
    seed: u64,
) -> Vec<u32> {
    let n = graph.n_nodes();
    match selection {
        CorruptionSelection::Uniform => {
            let mut rng = SplitMix64::new(rng::derive_stream(seed, &[0xDE5]));
            rng::sample_indices(&mut rng, n, n)
                .into_iter()
                .map(|i| i as u32)
                .take(k)
                .collect()
        }
        CorruptionSelection::TopDegree => graph
            .degree_percentile_nodes(true, 1.0)
            .into_iter()
            .take(k)
            .collect(),
    }
}

fn leaked_fraction(graph: &SocialGraph, corrupted: &[u32]) -> f64 {
    let total = graph.n_edges();
    if total == 0 {
        return 0.0;
    }
    let mut mark = alloc::vec![false; graph.n_nodes()];
    for &c in corrupted {
        mark[c as usize] = true;
    }
    let leaked = graph
        .edges()
        .filter(|&(u, v)| mark[u as usize] || mark[v as usize])
        .count();
    leaked as f64 / total as f64
}

// ---------------------------------------------------------------------------
// Dynamic graph leakage: mean field and exact stochastic simulation
// ---------------------------------------------------------------------------

/// Three-bin edge-knowledge model: L edges learned by the adversary, U edges
/// unlearned, X potential edges absent, with L + U + X = N_E. Edges are
/// created at rate alpha*X, deleted at rate beta*(U+L), and learned at rate
/// gamma*U.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageModel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n_edges: f64,
}

impl LeakageModel {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return Err(AnalyticsError::BadParams("rates must be nonnegative"));
        }
        if self.n_edges < 1.0 {
            return Err(AnalyticsError::BadParams("n_edges must be at least 1"));
        }
        Ok(())
    }

    /// The long-run learned fraction L/(L+U): gamma / (gamma + beta).
    pub fn ratio_asymptote(&self) -> f64 {
        self.gamma / (self.gamma + self.beta)
    }

    /// Exact mean-field solution (L(t), U(t)) with L(0) = U(0) = 0.
    ///
    /// The linear system has eigenvalues -(alpha+beta) and -(beta+gamma);
    /// alpha = gamma is a removable singularity evaluated by the
    /// repeated-root limit form.
    pub fn closed_form(&self, t: f64) -> (f64, f64) {
        let (a, b, g, n) = (self.alpha, self.beta, self.gamma, self.n_edges);
        if t <= 0.0 || a == 0.0 {
            return (0.0, 0.0);
        }
        if b + g == 0.0 {
            // Edges are created and never deleted or learned.
            return (0.0, n * (1.0 - libm::exp(-a * t)));
        }
        let scale = if a > g { a } else { g };
        if libm::fabs(a - g) <= 1e-9 * scale {
            // Repeated eigenvalue -(alpha+beta).
            let s = a + b;
            let e = libm::exp(-s * t);
            let l = a * a * n * (1.0 - (1.0 + s * t) * e) / (s * s);
            let u = a * n * (b - (b - a * s * t) * e) / (s * s);
            return (l, u);
        }
        let d = (a - g) * (a + b) * (b + g);
        let e_ab = libm::exp(-(a + b) * t);
        let e_bg = libm::exp(-(b + g) * t);
        let l = a * g * n * ((a - g) + (b + g) * e_ab - (a + b) * e_bg) / d;
        let u = a * n * (b * (a - g) - a * (b + g) * e_ab + g * (a + b) * e_bg) / d;
        (l, u)
    }

    /// Learned fraction L/(L+U) at time t from the closed form.
    pub fn closed_form_ratio(&self, t: f64) -> f64 {
        let (l, u) = self.closed_form(t);
        if l + u == 0.0 {
            0.0
        } else {
            l / (l + u)
        }
    }

    /// Generic RK4 integration of the mean-field system, as an independent
    /// numerical route to the same trajectory.
    pub fn mean_field_rk4(&self, t_end: f64, dt: f64) -> (f64, f64) {
        let (a, b, g, n) = (self.alpha, self.beta, self.gamma, self.n_edges);
        let deriv = |l: f64, u: f64| -> (f64, f64) {
            (-b * l + g * u, -a * l - (a + b + g) * u + a * n)
        };
        let (mut l, mut u) = (0.0f64, 0.0f64);
        let steps = libm::ceil(t_end / dt) as usize;
        let h = t_end / steps.max(1) as f64;
        for _ in 0..steps {
            let (k1l, k1u) = deriv(l, u);
            let (k2l, k2u) = deriv(l + 0.5 * h * k1l, u + 0.5 * h * k1u);
            let (k3l, k3u) = deriv(l + 0.5 * h * k2l, u + 0.5 * h * k2u);
            let (k4l, k4u) = deriv(l + h * k3l, u + h * k3u);
            l += h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        }
        (l, u)
    }

    /// Exact next-event stochastic simulation of the three-bin process,
    /// sampled onto `sample_points` uniform grid times over `[0, horizon]`.
    /// Returns `(t, L, U, X)` rows.
    pub fn simulate(
        &self,
        horizon: f64,
        sample_points: usize,
        seed: u64,
    ) -> Vec<(f64, u64, u64, u64)> {
        let n = self.n_edges as u64;
        let (mut l, mut u, mut x) = (0u64, 0u64, n);
        let mut rng = SplitMix64::new(rng::derive_stream(seed, &[0x91E]));
        let points = if sample_points < 2 { 2 } else { sample_points };
        let grid: Vec<f64> = (0..points)
            .map(|i| horizon * i as f64 / (points - 1) as f64)
            .collect();
        let mut out = Vec::with_capacity(points);
        let mut next_sample = 0usize;
        let mut t = 0.0f64;
        loop {
            let rate_create = self.alpha * x as f64;
            let rate_del_u = self.beta * u as f64;
            let rate_del_l = self.beta * l as f64;
            let rate_learn = self.gamma * u as f64;
            let total = rate_create + rate_del_u + rate_del_l + rate_learn;
            let t_next = if total > 0.0 {
                let mut uni = rng.next_f64();
                if uni <= 0.0 {
                    uni = f64::MIN_POSITIVE;
                }
                t - libm::log(uni) / total
            } else {
                f64::INFINITY
            };
            while next_sample < points && grid[next_sample] <= t_next && grid[next_sample] <= horizon {
                out.push((grid[next_sample], l, u, x));
                next_sample += 1;
            }
            if t_next > horizon || total == 0.0 {
                break;
            }
            t = t_next;
            let pick = rng.next_f64() * total;
            if pick < rate_create {
                x -= 1;
                u += 1;
            } else if pick < rate_create + rate_del_u {
                u -= 1;
                x += 1;
            } else if pick < rate_create + rate_del_u + rate_del_l {
                l -= 1;
                x += 1;
            } else {
                u -= 1;
                l += 1;
            }
            debug_assert_eq!(l + u + x, n);
        }
        while next_sample < points {
            out.push((grid[next_sample], l, u, x));
            next_sample += 1;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Physical jamming radius
// ---------------------------------------------------------------------------

/// Inputs to the free-space path-loss comparison between a jammer and a
/// legitimate transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    pub jammer_power_w: f64,
    pub phone_power_w: f64,
    pub link_distance_m: f64,
    /// Carried for completeness; the received-power ratio cancels it.
    pub frequency_hz: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        // Military-grade stationary jammer vs. a smartphone's WiFi radio.
        PathLossParams {
            jammer_power_w: 20.0,
            phone_power_w: 0.251,
            link_distance_m: 20.0,
            frequency_hz: 5.4e9,
        }
    }
}

/// Maximum jammer-receiver distance at which the jammer's received power
/// still matches a legitimate transmitter at `link_distance_m`.
///
/// Received power follows P_R = P_T (c / (4 pi d f))^2, so the ratio of the
/// two received powers leaves d_jam = d * sqrt(P_jammer / P_phone); the
/// frequency and constants cancel.
pub fn jam_radius(params: &PathLossParams) -> Result<f64, AnalyticsError> {
    if !(params.jammer_power_w > 0.0
        && params.phone_power_w > 0.0
        && params.link_distance_m > 0.0
        && params.frequency_hz > 0.0)
    {
        return Err(AnalyticsError::BadParams("path loss inputs must be positive"));
    }
    Ok(params.link_distance_m * libm::sqrt(params.jammer_power_w / params.phone_power_w))
}

/// Standard normal CDF via erfc; absolute error well under 1e-7.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}
