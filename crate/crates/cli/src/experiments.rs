//! Handlers for the sim and analyze subcommands: build the world from the
//! run config, execute, and emit CSV artifacts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use sotto_core::analytics::{
    anonymity_set_curve, empirical_hop_pmf, jam_radius, multiplier_samples_from_graph,
    priority_likelihood, static_leakage_curve, AnonymityModel, CorruptionSelection, LeakageModel,
    MultiplierDist, PathLossParams,
};
use sotto_core::sim::{run_epidemic_baseline, run_sim};

use crate::config::RunConfig;
use crate::output::{leakage_csv, pairs_csv, reach_csv, write_atomic};

pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub horizon_s: Option<f64>,
}

fn config_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn out_dir(config: &RunConfig, config_path: &Path, overrides: &Overrides) -> PathBuf {
    overrides
        .out_dir
        .clone()
        .unwrap_or_else(|| config_dir(config_path).join(&config.output.dir))
}

pub fn cmd_sim(config_path: &Path, overrides: &Overrides) -> Result<()> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.sim.seed = seed;
    }
    if let Some(h) = overrides.horizon_s {
        config.sim.horizon_s = h;
    }
    let dir = out_dir(&config, config_path, overrides);

    let base = config_dir(config_path);
    let trace = config.build_trace(&base)?;
    let graph = config.build_graph(&base, trace.n_nodes())?;
    let sim_config = config.build_sim_config()?;

    let metrics = run_sim(&trace, &graph, &sim_config).map_err(|e| anyhow::anyhow!("{e}"))?;
    for message in &metrics.messages {
        let path = dir.join(format!("reach_{}.csv", message.label));
        write_atomic(&path, reach_csv(&metrics, message).as_bytes())?;
        let t90 = message
            .t90_s(metrics.step_s)
            .map(|t| format!("{t}"))
            .unwrap_or_else(|| "unreached".into());
        println!(
            "message {}: author {} final_reach {:.4} t90_s {} mean_receipt_priority {:.4}",
            message.label,
            message.author,
            message.final_reach(),
            t90,
            message.mean_receipt_priority
        );
    }
    println!(
        "exchanges {} of {} encounters over {} steps ({} honest nodes)",
        metrics.exchanges, metrics.encounters, metrics.n_steps, metrics.honest_count
    );

    if config.sim.epidemic_baseline {
        let baseline =
            run_epidemic_baseline(&trace, &graph, &sim_config).map_err(|e| anyhow::anyhow!("{e}"))?;
        for message in &baseline.messages {
            let path = dir.join(format!("reach_{}_epidemic.csv", message.label));
            write_atomic(&path, reach_csv(&baseline, message).as_bytes())?;
            let t90 = message
                .t90_s(baseline.step_s)
                .map(|t| format!("{t}"))
                .unwrap_or_else(|| "unreached".into());
            println!(
                "epidemic {}: final_reach {:.4} t90_s {}",
                message.label,
                message.final_reach(),
                t90
            );
        }
    }
    Ok(())
}

pub fn cmd_analyze_anonymity(config_path: &Path, overrides: &Overrides) -> Result<()> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.anonymity.seed = seed;
    }
    let dir = out_dir(&config, config_path, overrides);
    let base = config_dir(config_path);
    let trace = config.build_trace(&base)?;
    let graph = config.build_graph(&base, trace.n_nodes())?;
    let trust = config.trust.to_params()?;

    let section = &config.anonymity;
    let hop_pmf = empirical_hop_pmf(
        &trace,
        config.sim.encounter_range_m,
        section.n_max,
        section.max_sources,
        section.seed,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    println!(
        "hop pmf over {} hops, unreachable mass {:.4}",
        hop_pmf.n_max(),
        hop_pmf.unreachable_mass
    );

    let multiplier = match section.multiplier {
        Some(value) => MultiplierDist::Fixed(value),
        None => MultiplierDist::Empirical(multiplier_samples_from_graph(
            &graph,
            &trust,
            config.sim.psi_max_inputs,
            config.sim.psi_include_prob,
            section.multiplier_samples,
            section.seed,
        )),
    };
    let model = AnonymityModel {
        mu: section.mu.unwrap_or(trust.mu),
        sigma2: section.sigma2.unwrap_or(trust.sigma2),
        hop_pmf,
        multiplier,
        samples: section.samples,
        seed: section.seed,
    };
    for n in 0..=3.min(model.hop_pmf.n_max()) {
        println!("P(S=1 | N={n}) = {:.4}", priority_likelihood(&model, n));
    }
    let grid = section.grid();
    let curve = anonymity_set_curve(&model, &trace, config.sim.encounter_range_m, &grid)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    write_atomic(
        &dir.join("anonymity.csv"),
        pairs_csv("confidence,set_fraction", &curve.points).as_bytes(),
    )?;
    for (c, f) in &curve.points {
        println!("confidence {c:.2} set_fraction {f:.4}");
    }
    Ok(())
}

pub fn cmd_analyze_leakage_static(config_path: &Path, overrides: &Overrides) -> Result<()> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.leakage_static.seed = seed;
    }
    let dir = out_dir(&config, config_path, overrides);
    let base = config_dir(config_path);
    // The static metric needs only the graph; size it from the trace when
    // present, else from the graph file or a default population.
    let n_nodes = match config.build_trace(&base) {
        Ok(trace) => trace.n_nodes(),
        Err(_) => 4_000,
    };
    let graph = config.build_graph(&base, n_nodes)?;
    let section = &config.leakage_static;
    let selection = match section.selection.as_str() {
        "uniform" => CorruptionSelection::Uniform,
        "top_degree" => CorruptionSelection::TopDegree,
        other => bail!("unknown selection {other:?}"),
    };
    let curve = static_leakage_curve(&graph, &section.epsilons, selection, section.seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    write_atomic(
        &dir.join("leakage_static.csv"),
        pairs_csv("epsilon,d_epsilon", &curve).as_bytes(),
    )?;
    for (eps, d) in &curve {
        println!("epsilon {eps:.3} d_epsilon {d:.4}");
    }
    Ok(())
}

pub fn cmd_analyze_leakage_dynamic(config_path: &Path, overrides: &Overrides) -> Result<()> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.leakage_dynamic.seed = seed;
    }
    let dir = out_dir(&config, config_path, overrides);
    let section = &config.leakage_dynamic;
    let model = LeakageModel {
        alpha: section.alpha,
        beta: section.beta,
        gamma: section.gamma,
        n_edges: section.n_edges,
    };
    model.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    let horizon = section.horizon.unwrap_or_else(|| {
        let slowest = section.beta.min(section.gamma);
        if slowest > 0.0 {
            100.0 / slowest
        } else {
            100.0
        }
    });

    // Closed-form mean-field trajectory.
    let points = section.sample_points.max(2);
    let closed: Vec<(f64, f64, f64, f64)> = (0..points)
        .map(|i| {
            let t = horizon * i as f64 / (points - 1) as f64;
            let (l, u) = model.closed_form(t);
            (t, l, u, model.n_edges - l - u)
        })
        .collect();
    write_atomic(&dir.join("leakage_dynamic_closed.csv"), leakage_csv(&closed).as_bytes())?;

    // Exact stochastic trials: full trajectory for the first, final ratio
    // for all.
    let mut final_ratios = Vec::with_capacity(section.trials);
    for trial in 0..section.trials {
        let seed = section.seed.wrapping_add(trial as u64);
        let rows = model.simulate(horizon, points, seed);
        if trial == 0 {
            let rows_f: Vec<(f64, f64, f64, f64)> = rows
                .iter()
                .map(|&(t, l, u, x)| (t, l as f64, u as f64, x as f64))
                .collect();
            write_atomic(&dir.join("leakage_dynamic_sim.csv"), leakage_csv(&rows_f).as_bytes())?;
        }
        let &(_, l, u, _) = rows.last().expect("trajectory never empty");
        if l + u > 0 {
            final_ratios.push(l as f64 / (l + u) as f64);
        } else {
            final_ratios.push(0.0);
        }
    }
    final_ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = final_ratios[final_ratios.len() / 2];
    println!("closed_form_ratio {:.6}", model.closed_form_ratio(horizon));
    println!("sim_median_ratio {median:.6}");
    println!("asymptote {:.6}", model.ratio_asymptote());
    Ok(())
}

pub fn cmd_analyze_jam_radius(config_path: Option<&Path>, link_distance_m: Option<f64>) -> Result<()> {
    let section = match config_path {
        Some(path) => RunConfig::load(path)?.jam_radius,
        None => Default::default(),
    };
    let params = PathLossParams {
        jammer_power_w: section.jammer_power_w,
        phone_power_w: section.phone_power_w,
        link_distance_m: link_distance_m.unwrap_or(section.link_distance_m),
        frequency_hz: section.frequency_hz,
    };
    let radius = jam_radius(&params).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!("jam_radius_m {radius:.1}");
    Ok(())
}
