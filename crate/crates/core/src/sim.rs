//! Discrete-event simulation of the messaging protocol over a mobility
//! trace and a social graph, with coalition and jamming adversaries and an
//! epidemic flooding baseline.
//!
//! At each step, every unordered in-range pair encounters with a small
//! probability; an encounter runs the full trust pipeline (PSI subset
//! selection, cardinality, sigmoid multiplier, noisy priority update, store
//! merge with budget truncation). Honest nodes never upvote, so results
//! lower-bound propagation.
//!
//! All randomness is derived per event from the run seed and the event
//! coordinates (step, pair), never from a shared sequential stream. Two runs
//! that execute different subsets of the same encounter process (for example
//! under different jamming radii, or protocol vs. epidemic) therefore agree
//! exactly on every shared event, making dominance and monotonicity
//! comparisons structural.
//!
//! The per-encounter trust pipeline here is a fast path: it computes the
//! true set intersection directly instead of running the group-exponentiation
//! protocol. Its equivalence to the real PSI-Ca implementation on identical
//! submitted subsets is machine-checked in the test suite.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::anneal::{place_jammers, JammerPlacement, PlacementMode};
use crate::exchange::EncounterBudget;
use crate::graph::SocialGraph;
use crate::rng::{self, SplitMix64};
use crate::store::{MessageId, MessageStore, StoreError};
use crate::trace::MobilityTrace;
use crate::trust::{self, PriorityScore, TrustParams};

/// Stream labels for per-event randomness derivation.
const STREAM_COIN: u64 = 0xC0;
const STREAM_EXCHANGE: u64 = 0xE1;
const STREAM_SETUP: u64 = 0x5E;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("trace has {trace} nodes but graph has {graph}")]
    NodeCountMismatch { trace: usize, graph: usize },
    #[error("invalid simulation config: {0}")]
    BadConfig(&'static str),
    #[error("store: {0}")]
    Store(#[from] StoreError),
}

/// Adversary present in a run.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryConfig {
    None,
    /// A coalition holding `fraction` of the nodes: rewired to few honest
    /// edges, optionally pooling friend ids, forwarding only its own
    /// propaganda.
    Coalition {
        fraction: f64,
        shared_friend_ids: bool,
    },
    /// Jammers suppressing every encounter with an endpoint strictly inside
    /// `radius_m` of a jammer.
    Jammer {
        radius_m: f64,
        count: usize,
        placement: PlacementMode,
    },
}

/// Which node authors a tracked message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthorClass {
    /// Seeded-random node from the 5% best-connected.
    Popular,
    /// Seeded-random node from the middle of the degree distribution.
    Average,
    /// Seeded-random node from the 5% worst-connected.
    Unpopular,
    /// The adversarial coalition (message pre-loaded on every member).
    Coalition,
    Node(u32),
}

/// One tracked message: its reach and receipt priorities are recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackedSpec {
    pub label: String,
    pub author: AuthorClass,
}

/// The message workload: tracked messages plus anonymous background traffic
/// that competes for exchange budget and storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub tracked: Vec<TrackedSpec>,
    /// Background messages authored at t=0 by seeded-random honest nodes.
    pub background_count: usize,
    /// When the tracked messages are authored. A warm-up lets background
    /// traffic fill stores first, so tracked messages face realistic
    /// storage and forwarding competition from their first hop.
    pub seed_at_s: f64,
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            tracked: alloc::vec![TrackedSpec {
                label: String::from("average"),
                author: AuthorClass::Average,
            }],
            background_count: 0,
            seed_at_s: 0.0,
        }
    }
}

/// Full configuration of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub encounter_range_m: f64,
    /// Probability that an in-range pair encounters, per step per pair.
    pub encounter_prob: f64,
    pub trust: TrustParams,
    pub adversary: AdversaryConfig,
    pub seed: u64,
    pub horizon_s: f64,
    pub budget: EncounterBudget,
    pub store_capacity: usize,
    /// Cap on friend hashes submitted per PSI run.
    pub psi_max_inputs: usize,
    /// Independent inclusion probability for each stored friend hash.
    pub psi_include_prob: f64,
    pub workload: Workload,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            encounter_range_m: 20.0,
            encounter_prob: 0.05,
            trust: TrustParams::default(),
            adversary: AdversaryConfig::None,
            seed: 0,
            horizon_s: 24.0 * 3600.0,
            budget: EncounterBudget::default(),
            store_capacity: crate::store::STORE_CAPACITY_DEFAULT,
            psi_max_inputs: crate::psi::PSI_INPUT_CAP,
            psi_include_prob: 1.0,
            workload: Workload::default(),
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        if !(self.encounter_range_m > 0.0) {
            return Err(SimError::BadConfig("encounter_range_m must be positive"));
        }
        if !(self.encounter_prob > 0.0 && self.encounter_prob <= 1.0) {
            return Err(SimError::BadConfig("encounter_prob must be in (0,1]"));
        }
        if self.trust.validate().is_err() {
            return Err(SimError::BadConfig("trust params invalid"));
        }
        if self.psi_max_inputs == 0 || self.psi_max_inputs > crate::psi::PSI_INPUT_CAP {
            return Err(SimError::BadConfig("psi_max_inputs out of range"));
        }
        if !(self.psi_include_prob > 0.0 && self.psi_include_prob <= 1.0) {
            return Err(SimError::BadConfig("psi_include_prob must be in (0,1]"));
        }
        if let AdversaryConfig::Coalition { fraction, .. } = self.adversary {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(SimError::BadConfig("coalition fraction must be in [0,1]"));
            }
        }
        if let AdversaryConfig::Jammer { radius_m, .. } = self.adversary {
            if radius_m < 0.0 {
                return Err(SimError::BadConfig("jam radius must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Metrics for one tracked message.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageMetrics {
    pub label: String,
    pub author: u32,
    /// Step at which the message was authored.
    pub seeded_step: usize,
    /// Fraction of honest nodes that have ever accepted the message, per
    /// step. Monotone nondecreasing.
    pub reach: Vec<f64>,
    /// Cumulative mean first-receipt priority, per step (0 until the first
    /// receipt happens).
    pub mean_priority: Vec<f64>,
    /// Mean priority assigned at each honest node's first receipt.
    pub mean_receipt_priority: f64,
    receipt_count: usize,
}

impl MessageMetrics {
    /// First time the reach meets `fraction`, in seconds since authoring.
    pub fn time_to_reach(&self, fraction: f64, step_s: f64) -> Option<f64> {
        self.reach
            .iter()
            .position(|&r| r >= fraction)
            .map(|step| step.saturating_sub(self.seeded_step) as f64 * step_s)
    }

    pub fn t90_s(&self, step_s: f64) -> Option<f64> {
        self.time_to_reach(0.9, step_s)
    }

    pub fn final_reach(&self) -> f64 {
        self.reach.last().copied().unwrap_or(0.0)
    }
}

/// Result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub step_s: f64,
    pub n_steps: usize,
    pub honest_count: usize,
    pub messages: Vec<MessageMetrics>,
    pub encounters: u64,
    pub exchanges: u64,
}

/// Adversary state resolved against a concrete trace and graph.
pub struct CoalitionSetup {
    /// Sorted adversarial node ids.
    pub members: Vec<u32>,
    /// Pooled honest friend ids every member submits to PSI (pre-cap).
    pub pool: Vec<u32>,
}

/// Selects and rewires the adversarial coalition.
///
/// Members lose their organic edges and attach to a bottom-5%-degree number
/// of honest nodes each. With `shared_friend_ids`, every member submits the
/// union of the coalition's honest edges to PSI (capped per run); otherwise
/// each member submits only its own edges.
pub fn coalition_setup(
    graph: &mut SocialGraph,
    fraction: f64,
    seed: u64,
) -> Result<CoalitionSetup, SimError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(SimError::BadConfig("coalition fraction must be in [0,1]"));
    }
    let n = graph.n_nodes();
    let count = libm::ceil(fraction * n as f64) as usize;
    if count == 0 {
        return Ok(CoalitionSetup {
            members: Vec::new(),
            pool: Vec::new(),
        });
    }
    if count >= n {
        return Err(SimError::BadConfig("coalition cannot be the whole network"));
    }
    let mut rng = SplitMix64::new(rng::derive_stream(seed, &[STREAM_SETUP, 0xC0A1]));
    let mut members: Vec<u32> = rng::sample_indices(&mut rng, n, count)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    members.sort_unstable();

    // Adversaries are poorly connected: attach each to the bottom-5% degree
    // level of the original graph (at least one edge).
    let mut degrees = graph.degrees();
    degrees.sort_unstable();
    let p5 = degrees[(n as f64 * 0.05) as usize].max(1);

    let is_member = |v: u32| members.binary_search(&v).is_ok();
    for &m in &members {
        graph.clear_node(m);
    }
    let honest: Vec<u32> = (0..n as u32).filter(|&v| !is_member(v)).collect();
    let mut pool: alloc::collections::BTreeSet<u32> = alloc::collections::BTreeSet::new();
    for &m in &members {
        let picks = rng::sample_indices(&mut rng, honest.len(), p5);
        for p in picks {
            let target = honest[p];
            graph.add_edge(m, target).map_err(|_| SimError::BadConfig("rewire failed"))?;
            pool.insert(target);
        }
    }
    Ok(CoalitionSetup {
        members,
        pool: pool.into_iter().collect(),
    })
}

enum JamField {
    Off,
    Static { positions: Vec<(f64, f64)>, radius: f64 },
    Mobile { nodes: Vec<u32>, radius: f64 },
}

impl JamField {
    fn blocks(&self, trace: &MobilityTrace, step: usize, a: u32, b: u32) -> bool {
        match self {
            JamField::Off => false,
            JamField::Static { positions, radius } => {
                let r2 = radius * radius;
                let hit = |n: u32| {
                    let p = trace.position(step, n as usize);
                    positions.iter().any(|&(jx, jy)| {
                        let (dx, dy) = (p.0 - jx, p.1 - jy);
                        dx * dx + dy * dy < r2
                    })
                };
                hit(a) || hit(b)
            }
            JamField::Mobile { nodes, radius } => {
                let r2 = radius * radius;
                let hit = |n: u32| {
                    let p = trace.position(step, n as usize);
                    nodes.iter().any(|&j| {
                        let q = trace.position(step, j as usize);
                        let (dx, dy) = (p.0 - q.0, p.1 - q.1);
                        dx * dx + dy * dy < r2
                    })
                };
                hit(a) || hit(b)
            }
        }
    }
}

/// Independent-inclusion subset capped by uniform sampling, mirroring
/// `FriendStore::select_psi_inputs` over node-id friend lists. Returns a
/// sorted subset.
pub(crate) fn select_subset(
    friends: &[u32],
    max_inputs: usize,
    include_prob: f64,
    rng: &mut SplitMix64,
) -> Vec<u32> {
    let mut picked: Vec<u32> = if include_prob >= 1.0 {
        friends.to_vec()
    } else {
        friends
            .iter()
            .copied()
            .filter(|_| rng.next_f64() < include_prob)
            .collect()
    };
    if picked.len() > max_inputs {
        let keep = rng::sample_indices(rng, picked.len(), max_inputs);
        picked = keep.into_iter().map(|i| picked[i]).collect();
    }
    picked.sort_unstable();
    picked
}

fn sorted_intersection_count(a: &[u32], b: &[u32]) -> u32 {
    let (mut i, mut j, mut n) = (0usize, 0usize, 0u32);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Protocol,
    Epidemic,
}

struct World {
    n: usize,
    friends: Vec<Vec<u32>>, // sorted friend-node ids per node; coalition members share the pool
    coalition: Vec<u32>,    // sorted
    jam: JamField,
    honest: Vec<bool>,
    honest_count: usize,
}

fn resolve_world(
    trace: &MobilityTrace,
    graph: &SocialGraph,
    config: &SimConfig,
) -> Result<(World, Option<CoalitionSetup>), SimError> {
    let n = trace.n_nodes();
    if graph.n_nodes() != n {
        return Err(SimError::NodeCountMismatch {
            trace: n,
            graph: graph.n_nodes(),
        });
    }

    let mut graph = graph.clone();
    let mut coalition_info = None;
    let mut coalition: Vec<u32> = Vec::new();
    let mut jam = JamField::Off;
    match &config.adversary {
        AdversaryConfig::None => {}
        AdversaryConfig::Coalition { fraction, .. } => {
            let setup = coalition_setup(&mut graph, *fraction, config.seed)?;
            coalition = setup.members.clone();
            coalition_info = Some(setup);
        }
        AdversaryConfig::Jammer {
            radius_m,
            count,
            placement,
        } => {
            jam = match place_jammers(
                trace,
                *count,
                *radius_m,
                config.encounter_range_m,
                *placement,
                config.seed,
            ) {
                JammerPlacement::Static(positions) => JamField::Static {
                    positions,
                    radius: *radius_m,
                },
                JammerPlacement::Nodes(nodes) => JamField::Mobile {
                    nodes,
                    radius: *radius_m,
                },
            };
        }
    }

    let shared_pool = match (&config.adversary, &coalition_info) {
        (
            AdversaryConfig::Coalition {
                shared_friend_ids: true,
                ..
            },
            Some(setup),
        ) => Some(setup.pool.clone()),
        _ => None,
    };

    let mut friends: Vec<Vec<u32>> = Vec::with_capacity(n);
    for node in 0..n as u32 {
        if coalition.binary_search(&node).is_ok() {
            if let Some(pool) = &shared_pool {
                friends.push(pool.clone());
                continue;
            }
        }
        friends.push(graph.neighbors(node).collect());
    }

    let honest: Vec<bool> = (0..n as u32)
        .map(|v| coalition.binary_search(&v).is_err())
        .collect();
    let honest_count = honest.iter().filter(|&&h| h).count();

    Ok((
        World {
            n,
            friends,
            coalition,
            jam,
            honest,
            honest_count,
        },
        coalition_info,
    ))
}

/// Resolves an author class to a node id, deterministically per seed.
/// Adversarial (coalition / jammer-bound) nodes are never chosen for honest
/// author classes.
fn resolve_author(
    class: &AuthorClass,
    graph: &SocialGraph,
    world: &World,
    seed: u64,
    salt: u64,
) -> Result<u32, SimError> {
    let mut rng = SplitMix64::new(rng::derive_stream(seed, &[STREAM_SETUP, 0xA57, salt]));
    let eligible = |v: &u32| world.honest[*v as usize];
    let pick = |rng: &mut SplitMix64, set: Vec<u32>| -> Result<u32, SimError> {
        let filtered: Vec<u32> = set.into_iter().filter(|v| eligible(v)).collect();
        if filtered.is_empty() {
            return Err(SimError::BadConfig("no eligible author in class"));
        }
        Ok(filtered[rng::uniform_below(rng, filtered.len())])
    };
    match class {
        AuthorClass::Popular => pick(&mut rng, graph.degree_percentile_nodes(true, 0.05)),
        AuthorClass::Unpopular => pick(&mut rng, graph.degree_percentile_nodes(false, 0.05)),
        AuthorClass::Average => {
            let top = graph.degree_percentile_nodes(true, 0.05);
            let bottom = graph.degree_percentile_nodes(false, 0.05);
            let mid: Vec<u32> = (0..world.n as u32)
                .filter(|v| !top.contains(v) && !bottom.contains(v))
                .collect();
            pick(&mut rng, mid)
        }
        AuthorClass::Coalition => world
            .coalition
            .first()
            .copied()
            .ok_or(SimError::BadConfig("coalition author without a coalition")),
        AuthorClass::Node(v) => {
            if (*v as usize) < world.n {
                Ok(*v)
            } else {
                Err(SimError::BadConfig("author node out of range"))
            }
        }
    }
}

struct Tracked {
    label: String,
    author: u32,
    ever: Vec<bool>,
    honest_holders: usize,
    receipt_sum: f64,
    receipt_count: usize,
    reach: Vec<f64>,
    mean_priority: Vec<f64>,
}

/// Runs the protocol simulation. See the module docs for the event model.
pub fn run_sim(
    trace: &MobilityTrace,
    graph: &SocialGraph,
    config: &SimConfig,
) -> Result<SimMetrics, SimError> {
    run_engine(trace, graph, config, Mode::Protocol)
}

/// Runs the epidemic flooding baseline: the identical encounter process, but
/// every encounter transfers every message with no trust, budget, or
/// coalition behavior. Upper-bounds any dissemination policy.
pub fn run_epidemic_baseline(
    trace: &MobilityTrace,
    graph: &SocialGraph,
    config: &SimConfig,
) -> Result<SimMetrics, SimError> {
    run_engine(trace, graph, config, Mode::Epidemic)
}

fn run_engine(
    trace: &MobilityTrace,
    graph: &SocialGraph,
    config: &SimConfig,
    mode: Mode,
) -> Result<SimMetrics, SimError> {
    config.validate()?;
    let (world, _) = resolve_world(trace, graph, config)?;
    let step_s = trace.step_s();
    let n_steps = trace
        .n_steps()
        .min(libm::floor(config.horizon_s / step_s) as usize + 1);

    // The flooding baseline runs on infinite-storage devices; the protocol
    // competes for the configured capacity.
    let capacity = match mode {
        Mode::Protocol => config.store_capacity,
        Mode::Epidemic => usize::MAX,
    };
    let mut stores: Vec<MessageStore> = (0..world.n)
        .map(|_| MessageStore::new(capacity, config.trust))
        .collect();

    // Tracked messages are authored at the seed step (after any warm-up).
    let seed_step = (libm::floor(config.workload.seed_at_s / step_s) as usize)
        .min(n_steps.saturating_sub(1));
    let mut tracked: Vec<Tracked> = Vec::new();
    let mut tracked_bodies: Vec<String> = Vec::new();
    let mut tracked_by_id: alloc::collections::BTreeMap<MessageId, usize> =
        alloc::collections::BTreeMap::new();
    for (i, spec) in config.workload.tracked.iter().enumerate() {
        let author = resolve_author(&spec.author, graph, &world, config.seed, i as u64)?;
        let body = alloc::format!("tracked:{}:{}", i, spec.label);
        let id = crate::store::message_id(&body);
        tracked_by_id.insert(id, i);
        tracked_bodies.push(body);
        tracked.push(Tracked {
            label: spec.label.clone(),
            author,
            ever: alloc::vec![false; world.n],
            honest_holders: 0,
            receipt_sum: 0.0,
            receipt_count: 0,
            reach: Vec::with_capacity(n_steps),
            mean_priority: Vec::with_capacity(n_steps),
        });
    }

    // Background traffic from seeded-random honest nodes.
    {
        let mut rng = SplitMix64::new(rng::derive_stream(config.seed, &[STREAM_SETUP, 0xB6]));
        let honest_nodes: Vec<u32> = (0..world.n as u32)
            .filter(|&v| world.honest[v as usize])
            .collect();
        for k in 0..config.workload.background_count {
            if honest_nodes.is_empty() {
                break;
            }
            let author = honest_nodes[rng::uniform_below(&mut rng, honest_nodes.len())];
            let body = alloc::format!("bg:{k}");
            stores[author as usize].author(&body, 0)?;
        }
    }

    // Per-pair rate limiting state: last exchange step.
    let min_interval_steps = if step_s > 0.0 {
        libm::ceil(config.budget.min_interval_between_encounters_s as f64 / step_s) as usize
    } else {
        0
    };
    let mut last_exchange: alloc::collections::BTreeMap<(u32, u32), usize> =
        alloc::collections::BTreeMap::new();

    let mut encounters = 0u64;
    let mut exchanges = 0u64;

    let is_coalition =
        |v: u32, world: &World| -> bool { world.coalition.binary_search(&v).is_ok() };

    for step in 0..n_steps {
        let now = (step as f64 * step_s) as u64;
        if step == seed_step {
            for (i, spec) in config.workload.tracked.iter().enumerate() {
                let body = &tracked_bodies[i];
                let tr = &mut tracked[i];
                if spec.author == AuthorClass::Coalition {
                    // The coalition pre-loads its propaganda on every member.
                    for &m in &world.coalition {
                        stores[m as usize].author(body, now)?;
                        tr.ever[m as usize] = true;
                    }
                } else {
                    stores[tr.author as usize].author(body, now)?;
                    tr.ever[tr.author as usize] = true;
                    if world.honest[tr.author as usize] {
                        tr.honest_holders = 1;
                    }
                }
            }
        }
        for (a, b) in trace.pairs_in_range(step, config.encounter_range_m) {
            // Encounter coin, independent of everything else in the run.
            let coin = rng::derive_stream(config.seed, &[STREAM_COIN, step as u64, a as u64, b as u64]);
            let u = (coin >> 11) as f64 / (1u64 << 53) as f64;
            if u >= config.encounter_prob {
                continue;
            }
            encounters += 1;
            if world.jam.blocks(trace, step, a, b) {
                continue;
            }
            if min_interval_steps > 1 {
                if let Some(&last) = last_exchange.get(&(a, b)) {
                    if step - last < min_interval_steps {
                        continue;
                    }
                }
            }
            last_exchange.insert((a, b), step);
            exchanges += 1;

            let ex_seed = rng::derive_stream(
                config.seed,
                &[STREAM_EXCHANGE, step as u64, a as u64, b as u64],
            );
            let mut ex_rng = SplitMix64::new(ex_seed);

            // Both outgoing lists snapshot pre-exchange state, as in the
            // wire protocol (staging commits only after DONE).
            let (t_a, t_b) = match mode {
                Mode::Epidemic => (1.0, 1.0),
                Mode::Protocol => {
                    let sub_a = select_subset(
                        &world.friends[a as usize],
                        config.psi_max_inputs,
                        config.psi_include_prob,
                        &mut ex_rng,
                    );
                    let sub_b = select_subset(
                        &world.friends[b as usize],
                        config.psi_max_inputs,
                        config.psi_include_prob,
                        &mut ex_rng,
                    );
                    let cardinality = sorted_intersection_count(&sub_a, &sub_b);
                    let t_a = trust::trust_score(cardinality, sub_a.len() as u32, &config.trust)
                        .expect("cardinality bounded by submission count");
                    let t_b = trust::trust_score(cardinality, sub_b.len() as u32, &config.trust)
                        .expect("cardinality bounded by submission count");
                    (t_a, t_b)
                }
            };

            let list_a = sender_list(&stores[a as usize], a, &world, config, now, mode, is_coalition);
            let list_b = sender_list(&stores[b as usize], b, &world, config, now, mode, is_coalition);

            // b -> a, then a -> b, with noise drawn in list order.
            deliver(
                &list_b, a, t_a, config, mode, now, &mut ex_rng, &mut stores, &mut tracked,
                &tracked_by_id, &world,
            )?;
            deliver(
                &list_a, b, t_b, config, mode, now, &mut ex_rng, &mut stores, &mut tracked,
                &tracked_by_id, &world,
            )?;
        }

        for t in tracked.iter_mut() {
            t.reach.push(t.honest_holders as f64 / world.honest_count.max(1) as f64);
            t.mean_priority.push(if t.receipt_count > 0 {
                t.receipt_sum / t.receipt_count as f64
            } else {
                0.0
            });
        }
    }

    Ok(SimMetrics {
        step_s,
        n_steps,
        honest_count: world.honest_count,
        messages: tracked
            .into_iter()
            .map(|t| MessageMetrics {
                label: t.label,
                author: t.author,
                seeded_step: seed_step,
                reach: t.reach,
                mean_priority: t.mean_priority,
                mean_receipt_priority: if t.receipt_count > 0 {
                    t.receipt_sum / t.receipt_count as f64
                } else {
                    0.0
                },
                receipt_count: t.receipt_count,
            })
            .collect(),
        encounters,
        exchanges,
    })
}

type SenderEntry = (MessageId, String, f64);

fn sender_list(
    store: &MessageStore,
    sender: u32,
    world: &World,
    config: &SimConfig,
    now: u64,
    mode: Mode,
    is_coalition: impl Fn(u32, &World) -> bool,
) -> Vec<SenderEntry> {
    let ordered = store.exchange_order(now);
    let mut out = Vec::new();
    let coalition_sender = mode == Mode::Protocol && is_coalition(sender, world);
    let limit = match mode {
        Mode::Protocol => config.budget.max_messages_per_exchange,
        Mode::Epidemic => usize::MAX,
    };
    for (msg, priority) in ordered {
        if out.len() >= limit {
            break;
        }
        // The coalition spreads only its own messages.
        if coalition_sender && !msg.body().starts_with("tracked:") {
            continue;
        }
        out.push((*msg.id(), String::from(msg.body()), priority.value()));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn deliver(
    list: &[SenderEntry],
    receiver: u32,
    t: f64,
    config: &SimConfig,
    mode: Mode,
    now: u64,
    rng: &mut SplitMix64,
    stores: &mut [MessageStore],
    tracked: &mut [Tracked],
    tracked_by_id: &alloc::collections::BTreeMap<MessageId, usize>,
    world: &World,
) -> Result<(), SimError> {
    for (id, body, advertised) in list {
        let p_o = PriorityScore::truncate(*advertised);
        let updated = match mode {
            Mode::Protocol => trust::update_priority(p_o, t, &config.trust, rng),
            Mode::Epidemic => p_o,
        };
        let result = stores[receiver as usize].merge_received_with_id(*id, body, updated, now)?;
        // A message counts as held only once the store accepts it; an offer
        // that loses the eviction contest was never held.
        if result == crate::store::MergeResult::Rejected {
            continue;
        }
        if let Some(&idx) = tracked_by_id.get(id) {
            let tr = &mut tracked[idx];
            if !tr.ever[receiver as usize] {
                tr.ever[receiver as usize] = true;
                if world.honest[receiver as usize] {
                    tr.honest_holders += 1;
                    tr.receipt_sum += updated.value();
                    tr.receipt_count += 1;
                }
            }
        }
    }
    Ok(())
}
