//! Social trust scores and message priority arithmetic.
//!
//! During an encounter, each side learns only the *cardinality* of the
//! friend-set intersection. That count, divided by the number of entries the
//! local side submitted, is the trust score; a sigmoid maps it into a
//! multiplier applied to each received message's advertised priority, plus
//! additive Gaussian noise and truncation to [0, 1]. Priorities also decay
//! exponentially over time so stale content leaves the system.

use rand_core::RngCore;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TrustError {
    #[error("shared count {shared} exceeds submitted count {submitted}")]
    SharedExceedsSubmitted { shared: u32, submitted: u32 },
    #[error("invalid trust parameters: {0}")]
    InvalidParams(&'static str),
}

/// Parameters of the trust-to-priority mapping and noise/decay model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustParams {
    /// Floor on the trust score; keeps ordering defined when no friends are
    /// shared. Must sit far below any achievable ratio so it never reorders
    /// genuine trust levels.
    pub epsilon: f64,
    /// Sigmoid steepness.
    pub rho: f64,
    /// Sigmoid midpoint: the mutual-friend ratio at which the multiplier
    /// crosses 1/2.
    pub tau: f64,
    /// Mean of the additive Gaussian priority noise.
    pub mu: f64,
    /// Variance of the additive Gaussian priority noise.
    pub sigma2: f64,
    /// Half-life of the exponential priority decay, in seconds.
    pub decay_half_life_s: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams {
            epsilon: 0.001,
            rho: 13.0,
            tau: 0.3,
            mu: 0.0,
            sigma2: 0.1,
            decay_half_life_s: 7.0 * 24.0 * 3600.0,
        }
    }
}

impl TrustParams {
    /// No-noise variant, useful for deterministic pipelines and tests.
    pub fn deterministic() -> Self {
        TrustParams {
            mu: 0.0,
            sigma2: 0.0,
            ..TrustParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        if !(self.epsilon > 0.0 && self.epsilon < self.tau && self.tau < 1.0) {
            return Err(TrustError::InvalidParams("require 0 < epsilon < tau < 1"));
        }
        if !(self.rho > 0.0) {
            return Err(TrustError::InvalidParams("rho must be positive"));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(TrustError::InvalidParams("sigma2 must be nonnegative"));
        }
        if !(self.decay_half_life_s > 0.0) {
            return Err(TrustError::InvalidParams("decay half-life must be positive"));
        }
        Ok(())
    }
}

/// A message priority, held in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PriorityScore(f64);

impl PriorityScore {
    pub const MAX: PriorityScore = PriorityScore(1.0);
    pub const MIN: PriorityScore = PriorityScore(0.0);

    /// Truncation operator Tr_0^1: clamps into [0, 1]. NaN maps to 0.
    pub fn truncate(value: f64) -> Self {
        if value.is_nan() {
            return PriorityScore(0.0);
        }
        PriorityScore(value.clamp(0.0, 1.0))
    }

    /// Wraps a value already known to lie in [0, 1].
    pub fn new(value: f64) -> Option<Self> {
        if value.is_nan() || !(0.0..=1.0).contains(&value) {
            return None;
        }
        Some(PriorityScore(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_saturated(&self) -> bool {
        self.0 == 1.0
    }
}

/// Trust that the local side assigns to a peer: the shared-friend count over
/// the count of entries the local side submitted to this PSI run, floored at
/// epsilon.
///
/// The denominator is what was *submitted* (after subset selection), not the
/// full store size, so the ratio can reach 1.
pub fn trust_score(shared: u32, own_submitted: u32, params: &TrustParams) -> Result<f64, TrustError> {
    if shared > own_submitted {
        return Err(TrustError::SharedExceedsSubmitted {
            shared,
            submitted: own_submitted,
        });
    }
    if own_submitted == 0 {
        return Ok(params.epsilon);
    }
    let ratio = shared as f64 / own_submitted as f64;
    Ok(if ratio > params.epsilon { ratio } else { params.epsilon })
}

/// The sigmoid priority multiplier: 1 / (1 + exp(-rho (t - tau))).
///
/// Strictly increasing in `t`, exactly 1/2 at `t = tau`.
pub fn sigmoid_multiplier(t: f64, params: &TrustParams) -> f64 {
    1.0 / (1.0 + libm::exp(-params.rho * (t - params.tau)))
}

/// Priority assigned to a received message: Tr_0^1[sigmoid(t) * p_o + z]
/// with z ~ N(mu, sigma2) drawn fresh per call.
pub fn update_priority<R: RngCore>(
    p_o: PriorityScore,
    t: f64,
    params: &TrustParams,
    rng: &mut R,
) -> PriorityScore {
    let z = rng::normal(rng, params.mu, params.sigma2);
    PriorityScore::truncate(sigmoid_multiplier(t, params) * p_o.value() + z)
}

/// Exponential decay: p * 2^(-elapsed / half_life).
pub fn decay_priority(p: PriorityScore, elapsed_s: f64, params: &TrustParams) -> PriorityScore {
    debug_assert!(elapsed_s >= 0.0);
    if elapsed_s <= 0.0 {
        return p;
    }
    PriorityScore::truncate(p.value() * libm::exp2(-elapsed_s / params.decay_half_life_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn params() -> TrustParams {
        TrustParams::deterministic()
    }

    #[test]
    fn trust_ratio_and_floor() {
        let p = params();
        assert_eq!(trust_score(9, 30, &p).unwrap(), 0.3);
        assert_eq!(trust_score(0, 30, &p).unwrap(), 0.001);
        assert_eq!(trust_score(30, 30, &p).unwrap(), 1.0);
        assert_eq!(trust_score(0, 0, &p).unwrap(), 0.001);
        assert!(trust_score(5, 4, &p).is_err());
    }

    #[test]
    fn trust_scale_free() {
        let p = params();
        for (s, o) in [(1u32, 3u32), (2, 7), (9, 30), (5, 5)] {
            for k in 2u32..5 {
                assert_eq!(
                    trust_score(s, o, &p).unwrap(),
                    trust_score(k * s, k * o, &p).unwrap()
                );
            }
        }
    }

    #[test]
    fn sigmoid_midpoint_exact() {
        let p = params();
        assert_eq!(sigmoid_multiplier(p.tau, &p), 0.5);
    }

    #[test]
    fn sigmoid_endpoints() {
        let p = params();
        assert!((sigmoid_multiplier(1.0, &p) - 0.999889).abs() < 1e-6);
        assert!((sigmoid_multiplier(0.0, &p) - 0.019840).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_strictly_increasing() {
        let p = params();
        let mut prev = sigmoid_multiplier(0.0, &p);
        for i in 1..=100 {
            let t = i as f64 / 100.0;
            let m = sigmoid_multiplier(t, &p);
            assert!(m > prev, "not increasing at t={t}");
            prev = m;
        }
    }

    #[test]
    fn update_priority_deterministic_cases() {
        let p = params();
        let mut rng = SplitMix64::new(1);
        let out = update_priority(PriorityScore::MAX, p.tau, &p, &mut rng);
        assert_eq!(out.value(), 0.5);
        let out = update_priority(PriorityScore::MIN, 0.7, &p, &mut rng);
        assert_eq!(out.value(), 0.0);
        let mut noisy = p;
        noisy.mu = 0.3;
        let out = update_priority(PriorityScore::MAX, 1.0, &noisy, &mut rng);
        assert_eq!(out.value(), 1.0); // 0.999889 + 0.3 truncates to 1
    }

    #[test]
    fn update_priority_always_in_unit_interval() {
        let mut p = params();
        p.mu = -0.5;
        p.sigma2 = 1.0;
        let mut rng = SplitMix64::new(2);
        for i in 0..10_000 {
            let po = PriorityScore::truncate(i as f64 / 10_000.0);
            let out = update_priority(po, 0.5, &p, &mut rng);
            assert!((0.0..=1.0).contains(&out.value()));
        }
    }

    #[test]
    fn update_priority_never_amplifies_without_noise() {
        let p = params();
        let mut rng = SplitMix64::new(3);
        for t in [0.0, 0.2, 0.5, 0.9, 1.0] {
            for po in [0.1, 0.5, 1.0] {
                let out = update_priority(PriorityScore::new(po).unwrap(), t, &p, &mut rng);
                assert!(out.value() <= po + 1e-15);
            }
        }
    }

    #[test]
    fn noise_moments_through_update() {
        // With p_o = 0 the pre-truncation value is exactly z; pick noise
        // that stays inside [0,1] so truncation never bites.
        let mut p = params();
        p.mu = 0.5;
        p.sigma2 = 0.001;
        let mut rng = SplitMix64::new(4);
        let n = 100_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let v = update_priority(PriorityScore::MIN, 0.5, &p, &mut rng).value();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se_mean = libm::sqrt(p.sigma2 / n as f64);
        assert!((mean - p.mu).abs() < 3.0 * se_mean, "mean {mean}");
        // SE of sample variance ~ sigma2 * sqrt(2/n).
        let se_var = p.sigma2 * libm::sqrt(2.0 / n as f64);
        assert!((var - p.sigma2).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn decay_half_life_points() {
        let p = params();
        let hl = p.decay_half_life_s;
        let v = |x: f64| PriorityScore::new(x).unwrap();
        assert!((decay_priority(v(0.8), hl, &p).value() - 0.4).abs() < 1e-12);
        assert_eq!(decay_priority(v(0.8), 0.0, &p).value(), 0.8);
        assert!((decay_priority(v(1.0), 2.0 * hl, &p).value() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn decay_is_multiplicative() {
        let p = params();
        let v = PriorityScore::new(0.73).unwrap();
        for (a, b) in [(100.0, 3600.0), (86_400.0, 43_200.0), (1.0, 1.0)] {
            let two_step = decay_priority(decay_priority(v, a, &p), b, &p).value();
            let one_step = decay_priority(v, a + b, &p).value();
            assert!((two_step - one_step).abs() <= 1e-15, "{two_step} vs {one_step}");
        }
    }

    #[test]
    fn params_validation() {
        assert!(TrustParams::default().validate().is_ok());
        let mut bad = TrustParams::default();
        bad.epsilon = 0.5; // above tau
        assert!(bad.validate().is_err());
        let mut bad = TrustParams::default();
        bad.decay_half_life_s = 0.0;
        assert!(bad.validate().is_err());
    }
}
