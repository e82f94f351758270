//! The run configuration file: a versioned TOML document that pins every
//! parameter of an experiment so runs are reproducible artifacts. Unknown
//! keys are rejected; referenced files must exist at load time.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sotto_core::anneal::PlacementMode;
use sotto_core::exchange::EncounterBudget;
use sotto_core::graph::{barabasi_albert, SocialGraph};
use sotto_core::sim::{AdversaryConfig, AuthorClass, SimConfig, TrackedSpec, Workload};
use sotto_core::trace::{synth_random_waypoint, MobilityTrace, WaypointParams};
use sotto_core::trust::TrustParams;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub trust: TrustSection,
    #[serde(default)]
    pub exchange: ExchangeSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub adversary: AdversarySection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub anonymity: AnonymitySection,
    #[serde(default)]
    pub leakage_static: LeakageStaticSection,
    #[serde(default)]
    pub leakage_dynamic: LeakageDynamicSection,
    #[serde(default)]
    pub jam_radius: JamRadiusSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustSection {
    pub epsilon: f64,
    pub rho: f64,
    pub tau: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub decay_half_life_s: f64,
}

impl Default for TrustSection {
    fn default() -> Self {
        let p = TrustParams::default();
        TrustSection {
            epsilon: p.epsilon,
            rho: p.rho,
            tau: p.tau,
            mu: p.mu,
            sigma2: p.sigma2,
            decay_half_life_s: p.decay_half_life_s,
        }
    }
}

impl TrustSection {
    pub fn to_params(&self) -> Result<TrustParams> {
        let params = TrustParams {
            epsilon: self.epsilon,
            rho: self.rho,
            tau: self.tau,
            mu: self.mu,
            sigma2: self.sigma2,
            decay_half_life_s: self.decay_half_life_s,
        };
        params.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(params)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeSection {
    pub max_exchange_bytes: usize,
    pub max_messages_per_exchange: usize,
    pub min_interval_between_encounters_s: u64,
}

impl Default for ExchangeSection {
    fn default() -> Self {
        let b = EncounterBudget::default();
        ExchangeSection {
            max_exchange_bytes: b.max_exchange_bytes,
            max_messages_per_exchange: b.max_messages_per_exchange,
            min_interval_between_encounters_s: b.min_interval_between_encounters_s,
        }
    }
}

impl ExchangeSection {
    pub fn to_budget(&self) -> EncounterBudget {
        EncounterBudget {
            max_exchange_bytes: self.max_exchange_bytes,
            max_messages_per_exchange: self.max_messages_per_exchange,
            min_interval_between_encounters_s: self.min_interval_between_encounters_s,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub seed: u64,
    pub horizon_s: f64,
    pub encounter_range_m: f64,
    pub encounter_prob: f64,
    pub store_capacity: usize,
    pub psi_max_inputs: usize,
    pub psi_include_prob: f64,
    /// Also run the epidemic flooding baseline on the same workload.
    pub epidemic_baseline: bool,
    #[serde(default)]
    pub workload: WorkloadSection,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            seed: 0,
            horizon_s: 2.0 * 3600.0,
            encounter_range_m: 20.0,
            encounter_prob: 0.05,
            store_capacity: 10_000,
            psi_max_inputs: 30,
            psi_include_prob: 1.0,
            epidemic_baseline: true,
            workload: WorkloadSection::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub background_count: usize,
    /// When tracked messages are authored (seconds); a warm-up lets
    /// background traffic fill stores first.
    #[serde(default)]
    pub seed_at_s: f64,
    pub tracked: Vec<TrackedSection>,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection {
            background_count: 0,
            seed_at_s: 0.0,
            tracked: vec![TrackedSection {
                label: "average".into(),
                author: "average".into(),
                node: None,
            }],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackedSection {
    pub label: String,
    /// One of: popular | average | unpopular | coalition | node.
    pub author: String,
    /// Required when author = "node".
    pub node: Option<u32>,
}

impl TrackedSection {
    fn to_spec(&self) -> Result<TrackedSpec> {
        let author = match self.author.as_str() {
            "popular" => AuthorClass::Popular,
            "average" => AuthorClass::Average,
            "unpopular" => AuthorClass::Unpopular,
            "coalition" => AuthorClass::Coalition,
            "node" => AuthorClass::Node(
                self.node
                    .context("tracked author \"node\" requires a node id")?,
            ),
            other => bail!("unknown author class {other:?}"),
        };
        Ok(TrackedSpec {
            label: self.label.clone(),
            author,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySection {
    /// none | passive_unpopular | coalition | jammer.
    pub kind: String,
    pub fraction: Option<f64>,
    pub shared_friend_ids: Option<bool>,
    pub radius_m: Option<f64>,
    pub count: Option<usize>,
    /// mobile | uniform | annealed.
    pub placement: Option<String>,
}

impl Default for AdversarySection {
    fn default() -> Self {
        AdversarySection {
            kind: "none".into(),
            fraction: None,
            shared_friend_ids: None,
            radius_m: None,
            count: None,
            placement: None,
        }
    }
}

impl AdversarySection {
    /// Maps to the core adversary kind. `passive_unpopular` needs no world
    /// changes (it is an unpopular author following the protocol); callers
    /// add the tracked message.
    pub fn to_core(&self) -> Result<AdversaryConfig> {
        match self.kind.as_str() {
            "none" | "passive_unpopular" => Ok(AdversaryConfig::None),
            "coalition" => Ok(AdversaryConfig::Coalition {
                fraction: self.fraction.context("coalition requires fraction")?,
                shared_friend_ids: self.shared_friend_ids.unwrap_or(true),
            }),
            "jammer" => Ok(AdversaryConfig::Jammer {
                radius_m: self.radius_m.context("jammer requires radius_m")?,
                count: self.count.context("jammer requires count")?,
                placement: match self.placement.as_deref().unwrap_or("mobile") {
                    "mobile" => PlacementMode::Mobile,
                    "uniform" => PlacementMode::Uniform,
                    "annealed" => PlacementMode::Annealed,
                    other => bail!("unknown jammer placement {other:?}"),
                },
            }),
            other => bail!("unknown adversary kind {other:?}"),
        }
    }

    pub fn is_passive_unpopular(&self) -> bool {
        self.kind == "passive_unpopular"
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    pub path: Option<PathBuf>,
    pub step_s: Option<f64>,
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_nodes: usize,
    pub area_side_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub pause_min_s: f64,
    pub pause_max_s: f64,
    pub duration_s: f64,
    pub seed: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub path: Option<PathBuf>,
    pub ba: Option<BaSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaSection {
    pub m: usize,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnonymitySection {
    /// Noise parameters; default to the trust section's.
    pub mu: Option<f64>,
    pub sigma2: Option<f64>,
    pub samples: usize,
    pub n_max: usize,
    pub max_sources: usize,
    pub seed: u64,
    /// "empirical" (measured from the graph) or a fixed multiplier value.
    pub multiplier: Option<f64>,
    pub multiplier_samples: usize,
    pub confidence_grid: Option<Vec<f64>>,
}

impl Default for AnonymitySection {
    fn default() -> Self {
        AnonymitySection {
            mu: None,
            sigma2: None,
            samples: 20_000,
            n_max: 10,
            max_sources: 64,
            seed: 0,
            multiplier: None,
            multiplier_samples: 5_000,
            confidence_grid: None,
        }
    }
}

impl AnonymitySection {
    pub fn grid(&self) -> Vec<f64> {
        self.confidence_grid.clone().unwrap_or_else(|| {
            (1..=19).map(|i| i as f64 / 20.0).collect()
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageStaticSection {
    pub epsilons: Vec<f64>,
    /// uniform | top_degree.
    pub selection: String,
    pub seed: u64,
}

impl Default for LeakageStaticSection {
    fn default() -> Self {
        LeakageStaticSection {
            epsilons: (0..=20).map(|i| i as f64 / 20.0).collect(),
            selection: "uniform".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageDynamicSection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n_edges: f64,
    /// Defaults to 100 / min(beta, gamma).
    pub horizon: Option<f64>,
    pub trials: usize,
    pub sample_points: usize,
    pub seed: u64,
}

impl Default for LeakageDynamicSection {
    fn default() -> Self {
        LeakageDynamicSection {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.5,
            n_edges: 2_000.0,
            horizon: None,
            trials: 40,
            sample_points: 201,
            seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JamRadiusSection {
    pub jammer_power_w: f64,
    pub phone_power_w: f64,
    pub link_distance_m: f64,
    pub frequency_hz: f64,
}

impl Default for JamRadiusSection {
    fn default() -> Self {
        JamRadiusSection {
            jammer_power_w: 20.0,
            phone_power_w: 0.251,
            link_distance_m: 20.0,
            frequency_hz: 5.4e9,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if config.version != CONFIG_VERSION {
            bail!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                config.version
            );
        }
        // Referenced files must exist up front.
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if let Some(p) = &config.trace.path {
            let resolved = base.join(p);
            if !resolved.exists() {
                bail!("trace path {} does not exist", resolved.display());
            }
        }
        if let Some(p) = &config.graph.path {
            let resolved = base.join(p);
            if !resolved.exists() {
                bail!("graph path {} does not exist", resolved.display());
            }
        }
        Ok(config)
    }

    /// Builds the mobility trace: loaded from CSV or synthesized.
    pub fn build_trace(&self, config_dir: &Path) -> Result<MobilityTrace> {
        let step = self.trace.step_s.unwrap_or(sotto_core::trace::DEFAULT_STEP_S);
        match (&self.trace.path, &self.trace.synth) {
            (Some(path), None) => {
                let resolved = config_dir.join(path);
                let text = std::fs::read_to_string(&resolved)
                    .with_context(|| format!("reading trace {}", resolved.display()))?;
                MobilityTrace::parse_csv(&text, step).map_err(|e| anyhow::anyhow!("{e}"))
            }
            (None, Some(synth)) => synth_random_waypoint(&WaypointParams {
                n_nodes: synth.n_nodes,
                area_side_m: synth.area_side_m,
                speed_min_mps: synth.speed_min_mps,
                speed_max_mps: synth.speed_max_mps,
                pause_min_s: synth.pause_min_s,
                pause_max_s: synth.pause_max_s,
                duration_s: synth.duration_s,
                step_s: step,
                seed: synth.seed,
            })
            .map_err(|e| anyhow::anyhow!("{e}")),
            (Some(_), Some(_)) => bail!("trace: give either path or synth, not both"),
            (None, None) => bail!("trace: missing both path and synth"),
        }
    }

    /// Builds the social graph: loaded from an edge list or generated.
    pub fn build_graph(&self, config_dir: &Path, n_nodes: usize) -> Result<SocialGraph> {
        match (&self.graph.path, &self.graph.ba) {
            (Some(path), None) => {
                let resolved = config_dir.join(path);
                let text = std::fs::read_to_string(&resolved)
                    .with_context(|| format!("reading graph {}", resolved.display()))?;
                SocialGraph::from_edge_list(&text).map_err(|e| anyhow::anyhow!("{e}"))
            }
            (None, Some(ba)) => {
                barabasi_albert(n_nodes, ba.m, ba.seed).map_err(|e| anyhow::anyhow!("{e}"))
            }
            (Some(_), Some(_)) => bail!("graph: give either path or ba, not both"),
            (None, None) => bail!("graph: missing both path and ba"),
        }
    }

    /// Assembles the core simulation config. `passive_unpopular` adversaries
    /// add an unpopular tracked author if the workload has none.
    pub fn build_sim_config(&self) -> Result<SimConfig> {
        let mut tracked: Vec<TrackedSpec> = self
            .sim
            .workload
            .tracked
            .iter()
            .map(|t| t.to_spec())
            .collect::<Result<_>>()?;
        if self.adversary.is_passive_unpopular()
            && !tracked.iter().any(|t| t.author == AuthorClass::Unpopular)
        {
            tracked.push(TrackedSpec {
                label: "passive-unpopular".into(),
                author: AuthorClass::Unpopular,
            });
        }
        Ok(SimConfig {
            encounter_range_m: self.sim.encounter_range_m,
            encounter_prob: self.sim.encounter_prob,
            trust: self.trust.to_params()?,
            adversary: self.adversary.to_core()?,
            seed: self.sim.seed,
            horizon_s: self.sim.horizon_s,
            budget: self.exchange.to_budget(),
            store_capacity: self.sim.store_capacity,
            psi_max_inputs: self.sim.psi_max_inputs,
            psi_include_prob: self.sim.psi_include_prob,
            workload: Workload {
                tracked,
                background_count: self.sim.workload.background_count,
                seed_at_s: self.sim.workload.seed_at_s,
            },
        })
    }
}
