//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them on success).
//!
//! Heavier simulation-based criteria live here rather than in unit tests so
//! the whole gate can be driven as `cargo test -p sotto-cli --test acceptance`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sotto_core::analytics::{
    anonymity_set_curve, empirical_hop_pmf, jam_radius, norm_cdf, priority_likelihood,
    static_leakage, static_leakage_curve, AnonymityModel, CorruptionSelection, LeakageModel,
    MultiplierDist, PathLossParams,
};
use sotto_core::anneal::PlacementMode;
use sotto_core::exchange::{
    establish_channel, run_exchange, ByteStream, EncounterBudget, ExchangeError, ExchangeOutcome,
    Role,
};
use sotto_core::graph::{barabasi_albert, SocialGraph};
use sotto_core::psi::{psi_finalize, psi_initiate, psi_respond, PsiGroup, Ristretto255};
use sotto_core::sim::{
    run_epidemic_baseline, run_sim, AdversaryConfig, AuthorClass, SimConfig, SimMetrics,
    TrackedSpec, Workload,
};
use sotto_core::store::MessageStore;
use sotto_core::testing::{duplex_pair, Fault, FaultyStream, RecordingStream};
use sotto_core::trace::{synth_random_waypoint, MobilityTrace, WaypointParams};
use sotto_core::trust::{sigmoid_multiplier, TrustParams};

fn pass(n: u32, name: &str, detail: &str) {
    println!("ACCEPTANCE {n:02} ({name}): PASS — {detail}");
}

// ---------------------------------------------------------------------------
// Criterion 1: PSI-Ca oracle equivalence, 1000 randomized trials.
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_psi_oracle_equivalence() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0xACCE_0001);
    let pool: Vec<Vec<u8>> = (0..64u32).map(|i| i.to_be_bytes().to_vec()).collect();
    for trial in 0..1_000 {
        let a_size = rng.gen_range(0..=30);
        let b_size = rng.gen_range(0..=30);
        let mut a: BTreeSet<usize> = BTreeSet::new();
        while a.len() < a_size {
            a.insert(rng.gen_range(0..pool.len()));
        }
        let mut b: BTreeSet<usize> = BTreeSet::new();
        while b.len() < b_size {
            b.insert(rng.gen_range(0..pool.len()));
        }
        let expected = a.intersection(&b).count() as u32;
        let a_refs: Vec<&[u8]> = a.iter().map(|&i| pool[i].as_slice()).collect();
        let b_refs: Vec<&[u8]> = b.iter().map(|&i| pool[i].as_slice()).collect();
        let (state, request) = psi_initiate(&a_refs, &mut rng).unwrap();
        let response = psi_respond(&b_refs, &request, &mut rng).unwrap();
        let got = psi_finalize(state, &response).unwrap();
        assert_eq!(got, expected, "trial {trial}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "must finish within 2 minutes");
    pass(1, "psi oracle", &format!("1000 trials exact in {elapsed:.1?}"));
}

// ---------------------------------------------------------------------------
// Criterion 2: sigmoid point checks.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_sigmoid_points() {
    let params = TrustParams::default(); // rho = 13, tau = 0.3
    let at_tau = sigmoid_multiplier(params.tau, &params);
    assert!((at_tau - 0.5).abs() < 1e-12, "sigmoid(tau) = {at_tau}");
    let at_one = sigmoid_multiplier(1.0, &params);
    assert!((at_one - 0.999889).abs() < 1e-6, "sigmoid(1) = {at_one}");
    let at_zero = sigmoid_multiplier(0.0, &params);
    assert!((at_zero - 0.019840).abs() < 1e-6, "sigmoid(0) = {at_zero}");
    pass(
        2,
        "sigmoid points",
        &format!("sigmoid(tau)={at_tau}, sigmoid(1)={at_one:.6}, sigmoid(0)={at_zero:.6}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: jamming radius from path loss.
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_jam_radius() {
    let radius = jam_radius(&PathLossParams {
        jammer_power_w: 20.0,
        phone_power_w: 0.251,
        link_distance_m: 20.0,
        frequency_hz: 5.4e9,
    })
    .unwrap();
    assert!((radius - 178.5).abs() <= 0.1, "radius {radius}");
    pass(3, "jam radius", &format!("{radius:.2} m for a 20 m link"));
}

// ---------------------------------------------------------------------------
// Criterion 4: leakage ratio asymptote, closed form and stochastic.
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_leakage_asymptote() {
    let started = std::time::Instant::now();
    for (alpha, beta, gamma) in [(1.0, 0.5, 0.5), (2.0, 1.0, 0.25), (0.1, 0.2, 0.8)] {
        let model = LeakageModel {
            alpha,
            beta,
            gamma,
            n_edges: 2_000.0,
        };
        let horizon = 100.0 / beta.min(gamma);
        let expected = model.ratio_asymptote();
        let closed = model.closed_form_ratio(horizon);
        assert!(
            (closed - expected).abs() < 1e-6,
            "closed-form ratio {closed} vs {expected} for ({alpha},{beta},{gamma})"
        );
        let mut finals: Vec<f64> = (0..40)
            .map(|trial| {
                let rows = model.simulate(horizon, 2, 0x4C0 + trial);
                let &(_, l, u, _) = rows.last().unwrap();
                l as f64 / (l + u).max(1) as f64
            })
            .collect();
        finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = finals[finals.len() / 2];
        assert!(
            (median - expected).abs() <= 0.05,
            "stochastic median {median} vs {expected} for ({alpha},{beta},{gamma})"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "must finish within 5 minutes");
    pass(
        4,
        "leakage asymptote",
        &format!("3 rate sets, closed form within 1e-6, stochastic medians within 0.05, {elapsed:.1?}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: closed form vs numeric integration over a rate grid.
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_closed_form_vs_ode() {
    let rates = [0.1, 0.5, 2.0];
    let mut worst: f64 = 0.0;
    for &alpha in &rates {
        for &beta in &rates {
            for &gamma in &rates {
                let model = LeakageModel {
                    alpha,
                    beta,
                    gamma,
                    n_edges: 1_000.0,
                };
                for k in 1..=10 {
                    let t = 5.0 * k as f64;
                    let (lc, uc) = model.closed_form(t);
                    let (lr, ur) = model.mean_field_rk4(t, 1e-3);
                    for (c, r) in [(lc, lr), (uc, ur)] {
                        // Relative agreement; values indistinguishable from
                        // zero at this scale compare absolutely.
                        let scale = c.abs().max(r.abs());
                        let err = if scale < 1e-9 * model.n_edges {
                            (c - r).abs() / model.n_edges
                        } else {
                            (c - r).abs() / scale
                        };
                        worst = worst.max(err);
                        assert!(
                            err <= 1e-6,
                            "rel err {err} at t={t} rates ({alpha},{beta},{gamma})"
                        );
                    }
                }
            }
        }
    }
    pass(
        5,
        "mean-field closed form",
        &format!("27 rate combinations, max relative error {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: static leakage oracle and monotonicity.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_static_leakage() {
    // Exhaustive recount on small graphs via an independent counting route:
    // sum of corrupted degrees minus edges internal to the corrupted set.
    for seed in 0..5u64 {
        let graph = barabasi_albert(40 + (seed as usize % 11), 2, seed).unwrap();
        for eps in [0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
            let d = static_leakage(&graph, eps, CorruptionSelection::Uniform, seed).unwrap();
            let n = graph.n_nodes();
            let k = (eps * n as f64).ceil() as usize;
            let corrupted: BTreeSet<u32> =
                sotto_core::analytics::corruption_set(&graph, k, CorruptionSelection::Uniform, seed)
                    .into_iter()
                    .collect();
            let degree_sum: usize = corrupted.iter().map(|&v| graph.degree(v)).sum();
            let internal = corrupted
                .iter()
                .map(|&v| graph.neighbors(v).filter(|w| corrupted.contains(w)).count())
                .sum::<usize>()
                / 2;
            let oracle = (degree_sum - internal) as f64 / graph.n_edges() as f64;
            assert_eq!(d, oracle, "seed {seed} eps {eps}");
            if eps == 0.0 {
                assert_eq!(d, 0.0);
            }
            if eps == 1.0 {
                assert_eq!(d, 1.0);
            }
        }
    }
    // Monotonicity on a BA(4000, 3) graph with nested corruption.
    let graph = barabasi_albert(4_000, 3, 77).unwrap();
    let eps: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let curve = static_leakage_curve(&graph, &eps, CorruptionSelection::Uniform, 9).unwrap();
    assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1), "curve must be monotone");
    assert_eq!(curve[0].1, 0.0, "d_0 = 0");
    let d05 = curve[1].1;
    let d10 = curve[2].1;
    assert!(d05 < d10, "d_0.05 {d05} < d_0.10 {d10}");
    pass(
        6,
        "static leakage",
        &format!("exact recount match; BA(4000,3): d_0.05={d05:.4} < d_0.10={d10:.4}, monotone"),
    );
}

// ---------------------------------------------------------------------------
// Shared world builders for the simulation criteria.
// ---------------------------------------------------------------------------

const HOURS: f64 = 3600.0;

fn world_400(seed: u64, step_s: f64) -> (MobilityTrace, SocialGraph) {
    let trace = synth_random_waypoint(&WaypointParams {
        n_nodes: 400,
        area_side_m: 2_000.0, // 4 km^2
        speed_min_mps: 0.5,
        speed_max_mps: 2.0,
        pause_min_s: 0.0,
        pause_max_s: 120.0,
        duration_s: 48.0 * HOURS,
        step_s,
        seed: seed ^ 0xA5CE,
    })
    .unwrap();
    let graph = barabasi_albert(400, 3, seed ^ 0x6A).unwrap();
    (trace, graph)
}

fn class_workload(per_class: usize) -> Vec<TrackedSpec> {
    let mut tracked = Vec::new();
    for k in 0..per_class {
        tracked.push(TrackedSpec {
            label: format!("popular{k}"),
            author: AuthorClass::Popular,
        });
        tracked.push(TrackedSpec {
            label: format!("average{k}"),
            author: AuthorClass::Average,
        });
        tracked.push(TrackedSpec {
            label: format!("unpopular{k}"),
            author: AuthorClass::Unpopular,
        });
    }
    tracked
}

fn sim_config_400(seed: u64, tracked: Vec<TrackedSpec>, adversary: AdversaryConfig) -> SimConfig {
    let mut trust = TrustParams::default();
    trust.mu = 0.0;
    trust.sigma2 = 0.01;
    let mut budget = EncounterBudget::default();
    budget.max_messages_per_exchange = 15;
    SimConfig {
        encounter_range_m: 20.0,
        encounter_prob: 0.05,
        trust,
        adversary,
        seed,
        horizon_s: 48.0 * HOURS,
        budget,
        store_capacity: 10_000,
        psi_max_inputs: 30,
        psi_include_prob: 1.0,
        workload: Workload {
            tracked,
            background_count: 400,
            seed_at_s: 0.0,
        },
    }
}

fn class_mean(metrics: &SimMetrics, class: &str, f: impl Fn(&sotto_core::sim::MessageMetrics) -> f64) -> f64 {
    let vals: Vec<f64> = metrics
        .messages
        .iter()
        .filter(|m| m.label.starts_with(class))
        .map(f)
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

// ---------------------------------------------------------------------------
// Criterion 7: propagation dominance, popularity ordering, and coalition
// suppression on the 400-node synthetic world (20 seeds).
// ---------------------------------------------------------------------------

const C7_SEEDS: u64 = 20;

#[test]
fn criterion_07a_epidemic_dominance() {
    let started = std::time::Instant::now();
    for seed in 1..=C7_SEEDS {
        let (trace, graph) = world_400(seed, 30.0);
        let config = sim_config_400(seed, class_workload(1), AdversaryConfig::None);
        let protocol = run_sim(&trace, &graph, &config).unwrap();
        let epidemic = run_epidemic_baseline(&trace, &graph, &config).unwrap();
        for (p, e) in protocol.messages.iter().zip(epidemic.messages.iter()) {
            assert_eq!(p.label, e.label);
            for (step, (rp, re)) in p.reach.iter().zip(e.reach.iter()).enumerate() {
                assert!(
                    rp <= &(re + 1e-12),
                    "seed {seed} msg {} step {step}: protocol {rp} > epidemic {re}",
                    p.label
                );
            }
        }
    }
    pass(
        7,
        "7a epidemic dominance",
        &format!("20 seeds, every message, every step; {:.1?}", started.elapsed()),
    );
}

#[test]
fn criterion_07b_popularity_ordering() {
    let started = std::time::Instant::now();
    let horizon = 48.0 * HOURS;
    let (mut t50_pop, mut t50_avg, mut t50_unpop) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 1..=C7_SEEDS {
        let (trace, graph) = world_400(seed, 30.0);
        let config = sim_config_400(seed, class_workload(5), AdversaryConfig::None);
        let metrics = run_sim(&trace, &graph, &config).unwrap();
        let t50 = |class: &str| {
            class_mean(&metrics, class, |m| {
                m.time_to_reach(0.5, metrics.step_s).unwrap_or(horizon)
            })
        };
        t50_pop += t50("popular") / C7_SEEDS as f64;
        t50_avg += t50("average") / C7_SEEDS as f64;
        t50_unpop += t50("unpopular") / C7_SEEDS as f64;
    }
    assert!(
        t50_pop <= t50_avg && t50_avg <= t50_unpop,
        "mean time-to-50% must order popular <= average <= unpopular, got {t50_pop:.0} / {t50_avg:.0} / {t50_unpop:.0}"
    );
    pass(
        7,
        "7b popularity ordering",
        &format!(
            "mean t50 popular {t50_pop:.0} s <= average {t50_avg:.0} s <= unpopular {t50_unpop:.0} s over 20 seeds; {:.1?}",
            started.elapsed()
        ),
    );
}

fn coalition_experiment() -> (f64, f64, f64, f64) {
    let (mut coal_reach, mut pop_reach, mut coal_prio, mut pop_prio) = (0.0, 0.0, 0.0, 0.0);
    for seed in 1..=C7_SEEDS {
        let (trace, graph) = world_400(seed, 30.0);
        let mut tracked = vec![TrackedSpec {
            label: "propaganda".into(),
            author: AuthorClass::Coalition,
        }];
        for k in 0..5 {
            tracked.push(TrackedSpec {
                label: format!("popular{k}"),
                author: AuthorClass::Popular,
            });
        }
        let config = sim_config_400(
            seed,
            tracked,
            AdversaryConfig::Coalition {
                fraction: 0.015, // 6 of 400 nodes
                shared_friend_ids: true,
            },
        );
        let metrics = run_sim(&trace, &graph, &config).unwrap();
        coal_reach += metrics.messages[0].final_reach() / C7_SEEDS as f64;
        coal_prio += metrics.messages[0].mean_receipt_priority / C7_SEEDS as f64;
        pop_reach += class_mean(&metrics, "popular", |m| m.final_reach()) / C7_SEEDS as f64;
        pop_prio +=
            class_mean(&metrics, "popular", |m| m.mean_receipt_priority) / C7_SEEDS as f64;
    }
    (coal_reach, pop_reach, coal_prio, pop_prio)
}

#[test]
fn criterion_07c_coalition_receipt_priority() {
    let (coal_reach, pop_reach, coal_prio, pop_prio) = coalition_experiment();
    let _ = (coal_reach, pop_reach);
    assert!(
        coal_prio < pop_prio,
        "mean receipt priority of coalition messages ({coal_prio:.4}) must lie strictly below popular ({pop_prio:.4})"
    );
    pass(
        7,
        "7c coalition receipt priority",
        &format!("coalition {coal_prio:.4} < popular {pop_prio:.4} over 20 seeds"),
    );
}

/// The reach half of criterion 7c, implemented exactly as specified.
///
/// This check does not hold in the pinned desk-scale world: six pooled
/// coalition devices pushing one message at every encounter out-offer a
/// single honest author roughly sixfold, and with BA(m=3) friend sets the
/// trust ratio is quantized over 3-6 submissions, so no eviction floor
/// separates coalition receipts from ambient traffic the way the reference
/// system's ~30-entry friend sets do. The suppression the protocol does
/// deliver shows up in the receipt-priority gap (test above), which is the
/// filterable signal. Kept faithful and red rather than weakened.
#[test]
fn criterion_07c_coalition_reach() {
    let (coal_reach, pop_reach, _, _) = coalition_experiment();
    if coal_reach > pop_reach {
        eprintln!(
            "ACCEPTANCE 07 (7c coalition reach): FAIL — coalition final reach {coal_reach:.4} > popular {pop_reach:.4} over 20 seeds"
        );
    }
    assert!(
        coal_reach <= pop_reach,
        "coalition final reach ({coal_reach:.4}) must not exceed popular final reach ({pop_reach:.4})"
    );
    pass(
        7,
        "7c coalition reach",
        &format!("coalition {coal_reach:.4} <= popular {pop_reach:.4} over 20 seeds"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: jamming robustness shape.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_jamming_monotone() {
    // Unconstrained budgets make holder sets per radius structurally nested:
    // larger disks suppress a superset of encounters and every executed
    // exchange carries per-event randomness, so reach is monotone per seed.
    let seeds = 5u64;
    let radii = [0.0, 250.0, 500.0, 1_000.0];
    let mut mean_reach = [0.0f64; 4];
    for seed in 1..=seeds {
        let (trace, graph) = world_400(seed, 30.0);
        let mut per_radius = Vec::new();
        for &radius in &radii {
            let mut config = sim_config_400(
                seed,
                vec![TrackedSpec {
                    label: "probe".into(),
                    author: AuthorClass::Average,
                }],
                AdversaryConfig::Jammer {
                    radius_m: radius,
                    count: 40, // 10% of the population
                    placement: PlacementMode::Mobile,
                },
            );
            config.budget.max_messages_per_exchange = 500;
            config.workload.background_count = 50;
            let metrics = run_sim(&trace, &graph, &config).unwrap();
            per_radius.push(metrics.messages[0].final_reach());
        }
        for (i, r) in per_radius.iter().enumerate() {
            mean_reach[i] += r / seeds as f64;
            if i > 0 {
                assert!(
                    per_radius[i] <= per_radius[i - 1] + 1e-12,
                    "seed {seed}: reach increased with radius: {per_radius:?}"
                );
            }
        }

        // Radius zero must match the unjammed world bit for bit.
        let mut config_zero = sim_config_400(
            seed,
            vec![TrackedSpec {
                label: "probe".into(),
                author: AuthorClass::Average,
            }],
            AdversaryConfig::Jammer {
                radius_m: 0.0,
                count: 40,
                placement: PlacementMode::Mobile,
            },
        );
        config_zero.budget.max_messages_per_exchange = 500;
        config_zero.workload.background_count = 50;
        let jam_zero = run_sim(&trace, &graph, &config_zero).unwrap();
        let mut config_none = config_zero.clone();
        config_none.adversary = AdversaryConfig::None;
        let unjammed = run_sim(&trace, &graph, &config_none).unwrap();
        assert_eq!(jam_zero, unjammed, "seed {seed}: radius 0 differs from unjammed");
    }
    pass(
        8,
        "jamming shape",
        &format!(
            "mean reach by radius {{0,250,500,1000}} = {:.3}/{:.3}/{:.3}/{:.3}, radius-0 == unjammed",
            mean_reach[0], mean_reach[1], mean_reach[2], mean_reach[3]
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: anonymity-set monotonicity and the Gaussian tail check.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_anonymity_monotonicity() {
    // Bundled synthetic trace: a small plaza world with multi-hop structure.
    let trace = synth_random_waypoint(&WaypointParams {
        n_nodes: 40,
        area_side_m: 500.0,
        speed_min_mps: 0.5,
        speed_max_mps: 2.0,
        pause_min_s: 0.0,
        pause_max_s: 60.0,
        duration_s: 6.0 * HOURS,
        step_s: 60.0,
        seed: 0xA01,
    })
    .unwrap();
    let graph = barabasi_albert(40, 3, 0xA02).unwrap();
    let pmf = empirical_hop_pmf(&trace, 20.0, 10, 40, 0xA03).unwrap();
    let multiplier = MultiplierDist::Empirical(
        sotto_core::analytics::multiplier_samples_from_graph(
            &graph,
            &TrustParams::default(),
            30,
            1.0,
            5_000,
            0xA04,
        ),
    );
    let grid: Vec<f64> = (1..=19).map(|i| i as f64 / 20.0).collect();
    let noisy = AnonymityModel {
        mu: 0.3,
        sigma2: 0.1,
        hop_pmf: pmf.clone(),
        multiplier: multiplier.clone(),
        samples: 30_000,
        seed: 0xA05,
    };
    let quiet = AnonymityModel { mu: 0.0, ..noisy.clone() };
    let curve_noisy = anonymity_set_curve(&noisy, &trace, 20.0, &grid).unwrap();
    let curve_quiet = anonymity_set_curve(&quiet, &trace, 20.0, &grid).unwrap();
    for curve in [&curve_noisy, &curve_quiet] {
        assert!(
            curve.points.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-12),
            "curve must be monotone in confidence"
        );
    }
    for ((c, noisy_frac), (_, quiet_frac)) in
        curve_noisy.points.iter().zip(curve_quiet.points.iter())
    {
        assert!(
            noisy_frac >= &(quiet_frac - 1e-12),
            "mu=0.3 curve must dominate mu=0 at confidence {c}: {noisy_frac} vs {quiet_frac}"
        );
    }

    // Gaussian tail: with a unit multiplier, saturation after one hop means
    // z >= 0, i.e. P = Phi(mu/sigma).
    let tail_model = AnonymityModel {
        mu: 0.3,
        sigma2: 0.1,
        hop_pmf: sotto_core::analytics::HopDistribution::point(1),
        multiplier: MultiplierDist::Fixed(1.0),
        samples: 100_000,
        seed: 0xA06,
    };
    let mc = priority_likelihood(&tail_model, 1);
    let exact = norm_cdf(0.3 / 0.1f64.sqrt());
    assert!((mc - exact).abs() <= 0.01, "MC {mc} vs Phi {exact}");
    pass(
        9,
        "anonymity monotonicity",
        &format!(
            "noisy curve dominates quiet curve on {} grid points; tail check {mc:.4} vs {exact:.4}",
            grid.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 10: exchange fault injection.
// ---------------------------------------------------------------------------

type SideResult = (Result<ExchangeOutcome, ExchangeError>, MessageStore, Vec<u8>);

fn exchange_side<S: ByteStream + Send + 'static>(
    stream: S,
    role: Role,
    inputs: Vec<[u8; 32]>,
    mut store: MessageStore,
    seed: u64,
) -> std::thread::JoinHandle<SideResult> {
    std::thread::spawn(move || {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let params = *store.params();
        let result = match establish_channel(stream, role, &mut rng) {
            Ok(mut session) => run_exchange(
                &mut session,
                &inputs,
                &mut store,
                &params,
                &EncounterBudget::default(),
                7_000,
                &mut rng,
            ),
            Err(e) => Err(e),
        };
        let snapshot = store.encode(7_000);
        (result, store, snapshot)
    })
}

fn friend_digests(range: std::ops::Range<u8>) -> Vec<[u8; 32]> {
    range
        .map(|n| {
            let mut b = [0u8; 16];
            b[0] = n;
            b[15] = 0xAF;
            sotto_core::identity::qr_payload(&sotto_core::identity::FriendId::from_bytes(b).unwrap())
                .digest
        })
        .collect()
}

#[test]
fn criterion_10_exchange_fault_injection() {
    let params = TrustParams::deterministic();
    let bodies_a: Vec<String> = (0..8).map(|i| format!("alpha message {i}")).collect();
    let bodies_b: Vec<String> = (0..8).map(|i| format!("beta message {i}")).collect();
    let build_store = |bodies: &[String]| {
        let mut s = MessageStore::new(100, params);
        for b in bodies {
            s.author(b, 7_000).unwrap();
        }
        s
    };
    let inputs_a = friend_digests(0..30);
    let inputs_b = friend_digests(20..50);

    // Reference run: the expected committed state under these seeds.
    let (sa, sb) = duplex_pair();
    let a = exchange_side(sa, Role::Initiator, inputs_a.clone(), build_store(&bodies_a), 11);
    let b = exchange_side(sb, Role::Responder, inputs_b.clone(), build_store(&bodies_b), 22);
    let (ra, _, committed_a) = a.join().unwrap();
    let (rb, _, committed_b) = b.join().unwrap();
    ra.unwrap();
    rb.unwrap();

    let pristine_a = build_store(&bodies_a).encode(7_000);
    let pristine_b = build_store(&bodies_b).encode(7_000);

    // Wire length of a clean session, to bound fault offsets.
    let wire_len = 6_000usize;

    let mut rng = ChaCha20Rng::seed_from_u64(0xFA17);
    let mut cut_count = 0;
    let mut flip_count = 0;
    let mut full_commits = 0;
    let mut aborts = 0;
    for session in 0..100 {
        let fault = if session % 2 == 0 {
            cut_count += 1;
            Fault::CutAfter(rng.gen_range(1..wire_len))
        } else {
            flip_count += 1;
            Fault::FlipBit {
                offset: rng.gen_range(0..wire_len),
                bit: rng.gen_range(0..8),
            }
        };
        let on_initiator_side = rng.gen_bool(0.5);
        let (sa, sb) = duplex_pair();
        let rec_a = RecordingStream::new(sa);
        let wire_a = rec_a.written.clone();
        let rec_b = RecordingStream::new(sb);
        let wire_b = rec_b.written.clone();

        let (ra, rb) = if on_initiator_side {
            let faulty = FaultyStream::new(rec_a, fault);
            let a = exchange_side(faulty, Role::Initiator, inputs_a.clone(), build_store(&bodies_a), 11);
            let b = exchange_side(rec_b, Role::Responder, inputs_b.clone(), build_store(&bodies_b), 22);
            (a.join().unwrap(), b.join().unwrap())
        } else {
            let faulty = FaultyStream::new(rec_b, fault);
            let a = exchange_side(rec_a, Role::Initiator, inputs_a.clone(), build_store(&bodies_a), 11);
            let b = exchange_side(faulty, Role::Responder, inputs_b.clone(), build_store(&bodies_b), 22);
            (a.join().unwrap(), b.join().unwrap())
        };

        // Per-node atomicity: every store ends as the pristine snapshot or
        // the full committed state, nothing in between.
        let (res_a, _, after_a) = ra;
        let (res_b, _, after_b) = rb;
        for (who, res, after, pristine, committed) in [
            ("initiator", &res_a, &after_a, &pristine_a, &committed_a),
            ("responder", &res_b, &after_b, &pristine_b, &committed_b),
        ] {
            match res {
                Ok(_) => {
                    assert_eq!(after, committed, "session {session}: {who} committed partially");
                    full_commits += 1;
                }
                Err(_) => {
                    assert_eq!(after, pristine, "session {session}: {who} aborted but store changed");
                    aborts += 1;
                }
            }
        }

        // No plaintext on the wire, faulted or not.
        let contains = |hay: &[u8], needle: &[u8]| hay.windows(needle.len()).any(|w| w == needle);
        for wire in [wire_a.lock().unwrap(), wire_b.lock().unwrap()] {
            for body in bodies_a.iter().chain(bodies_b.iter()) {
                assert!(!contains(&wire, body.as_bytes()), "body leaked on wire");
            }
            for digest in inputs_a.iter().chain(inputs_b.iter()) {
                assert!(!contains(&wire, digest), "friend hash leaked on wire");
                let h1 = Ristretto255::hash_to_group(digest);
                assert!(
                    !contains(&wire, &Ristretto255::encode(&h1)),
                    "unblinded element leaked on wire"
                );
            }
        }
    }
    pass(
        10,
        "exchange integrity",
        &format!(
            "100 faulted sessions ({cut_count} cuts, {flip_count} flips): {full_commits} full commits, {aborts} clean aborts, zero leaks"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 11: payload size sanity.
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_payload_sanity() {
    let params = TrustParams::deterministic();
    let build_store = |tag: &str| {
        let mut s = MessageStore::new(200, params);
        for i in 0..100 {
            // 140-byte bodies, the benchmark message size.
            let body = format!("{tag}-{i:03}-{}", "x".repeat(140));
            let body = &body[..140];
            s.author(body, 9_000).unwrap();
        }
        s
    };
    let (sa, sb) = duplex_pair();
    let a = exchange_side(sa, Role::Initiator, friend_digests(0..30), build_store("a"), 31);
    let b = exchange_side(sb, Role::Responder, friend_digests(10..40), build_store("b"), 32);
    let (ra, _, _) = a.join().unwrap();
    let (rb, _, _) = b.join().unwrap();
    let oa = ra.unwrap();
    let ob = rb.unwrap();
    assert_eq!(oa.messages_sent, 100);
    assert_eq!(ob.messages_sent, 100);
    let limit = 2 * 23_500;
    for (who, bytes) in [("initiator", oa.bytes_sent), ("responder", ob.bytes_sent)] {
        assert!(
            bytes <= limit,
            "{who} sent {bytes} bytes; limit {limit} (2x the 23.5 KB reference)"
        );
    }
    pass(
        11,
        "payload sanity",
        &format!(
            "100x140B messages + 30-element PSI per direction: {} / {} bytes sent (limit {limit})",
            oa.bytes_sent, ob.bytes_sent
        ),
    );
}
