// SPDX-License-Identifier: Apache-2.0

use num_rational::Rational64;
use rayon::prelude::*;
use scp_sdn::scenarios::{calibrate_costs, throughput_latency_sweep, ScenarioKind};
use scp_sdn::simulator::{run_with, SignalingConfig};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::emit::round6;
use crate::CliError;

/// One output line: a signaling run at an attach rate, or one point of a
/// closed-loop sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: ScenarioKind,
    pub rate_per_s: Option<f64>,
    pub connections: Option<usize>,
    pub total_packets: Option<u64>,
    pub packets_through_app: Option<u64>,
    /// Fraction in [0, 1].
    pub pct_through_app: Option<f64>,
    pub throughput_rps: f64,
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub failed_flows: Option<u64>,
    pub seed: u64,
}

/// Rows finished before a run failed.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct PartialRun {
    pub rows: Vec<ResultRow>,
    #[source]
    pub error: CliError,
}

fn exact(key: &'static str, v: f64) -> Result<Rational64, CliError> {
    Rational64::approximate_float(v).ok_or(CliError::Invalid {
        key,
        message: format!("{v} has no exact representation"),
    })
}

/// Simulator settings of one signaling row.
pub fn signaling_config(
    config: &RunConfig,
    scenario: ScenarioKind,
    rate: f64,
) -> Result<SignalingConfig<Rational64>, CliError> {
    let mut s = SignalingConfig::new(scenario, exact("rate", rate)?);
    s.workload.sim_duration_s = exact("duration", config.duration_s)?;
    s.workload.attach_span_s = exact("attach-span", config.attach_span_s)?;
    s.workload.arrival = config.arrival;
    s.cache_validity_s = exact("validity", config.cache_validity_s)?;
    s.hard_timeout_s = Some(exact("hard-timeout", config.hard_timeout_s)?);
    s.idle_timeout_s = config
        .idle_timeout_s
        .map(|v| exact("idle-timeout", v))
        .transpose()?;
    s.hop_latency_s = exact("hop-latency", config.hop_latency_s)?;
    s.population = config.population.clone();
    s.policy = config.policy;
    s.overload_threshold = config.overload_threshold;
    s.authorization = config.authorization.clone();
    Ok(s)
}

enum Job {
    Signaling { scenario: ScenarioKind, index: usize, rate: f64 },
    Sweep { scenario: ScenarioKind },
}

type JobOutput = Result<(Vec<ResultRow>, Vec<String>), CliError>;

fn run_job(config: &RunConfig, job: &Job) -> JobOutput {
    match *job {
        Job::Signaling { scenario, index, rate } => {
            let seed = config.seed.wrapping_add(index as u64);
            let cfg = signaling_config(config, scenario, rate)?;
            let mut trace = Vec::new();
            let sink = config.trace.is_some().then_some(&mut trace);
            let m = run_with(&cfg, seed, &mut (), sink)?;
            let prefix = format!("{}\t{rate}\t", scenario.name());
            let lines = trace.into_iter().map(|l| format!("{prefix}{l}")).collect();
            let row = ResultRow {
                scenario,
                rate_per_s: Some(rate),
                connections: None,
                total_packets: Some(m.total_packets()),
                packets_through_app: Some(m.packets_through_app()),
                pct_through_app: m.percentage_through_app().map(round6),
                throughput_rps: round6(m.throughput_rps()),
                p50_ms: m.latency_quantile_ms(0.5).map(round6),
                p95_ms: m.latency_quantile_ms(0.95).map(round6),
                failed_flows: Some(m.counts.failed_flows),
                seed,
            };
            Ok((vec![row], lines))
        }
        Job::Sweep { scenario } => {
            let model = calibrate_costs(&config.anchors)?;
            let points = throughput_latency_sweep(scenario, &model, &config.connections, &config.sweep)?;
            let rows = points
                .into_iter()
                .map(|p| ResultRow {
                    scenario,
                    rate_per_s: None,
                    connections: Some(p.connections),
                    total_packets: None,
                    packets_through_app: None,
                    pct_through_app: None,
                    throughput_rps: round6(p.throughput_rps),
                    p50_ms: Some(round6(p.p50_ms)),
                    p95_ms: Some(round6(p.p95_ms)),
                    failed_flows: None,
                    seed: config.seed,
                })
                .collect();
            Ok((rows, Vec::new()))
        }
    }
}

/// Runs every (scenario, rate) signaling point and every scenario sweep,
/// in parallel. Rows come back ordered by scenario, then rate, then
/// connection count. The seed of a rate row is the master seed plus the
/// rate's index.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<ResultRow>, PartialRun> {
    let mut scenarios = config.scenarios.clone();
    scenarios.sort();
    scenarios.dedup();
    let mut jobs = Vec::new();
    for &scenario in &scenarios {
        for (index, &rate) in config.rates.iter().enumerate() {
            jobs.push(Job::Signaling { scenario, index, rate });
        }
        if !config.connections.is_empty() {
            jobs.push(Job::Sweep { scenario });
        }
    }
    let outputs: Vec<JobOutput> = jobs.par_iter().map(|j| run_job(config, j)).collect();
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    let mut failure = None;
    for out in outputs {
        match out {
            Ok((r, t)) => {
                rows.extend(r);
                trace.extend(t);
            }
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.scenario, a.connections.is_some(), a.connections)
            .cmp(&(b.scenario, b.connections.is_some(), b.connections))
            .then(a.rate_per_s.partial_cmp(&b.rate_per_s).unwrap_or(std::cmp::Ordering::Equal))
    });
    if let Some(path) = &config.trace {
        let mut text = trace.join("\n");
        text.push('\n');
        if let Err(source) = std::fs::write(path, text) {
            failure.get_or_insert(CliError::Write { path: path.clone(), source });
        }
    }
    match failure {
        None => Ok(rows),
        Some(error) => Err(PartialRun { rows, error }),
    }
}
