// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use scp_sdn::controller::{AuthorizationMatrix, LbPolicy, DEFAULT_OVERLOAD_THRESHOLD};
use scp_sdn::nf_model::NfType;
use scp_sdn::scenarios::{Anchors, ScenarioKind, SweepParams};
use scp_sdn::simulator::{ArrivalProcess, Population};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Share of packets through the application against attach rate.
    Fig8,
    /// Closed-loop throughput of the three SDN variants.
    Fig7,
}

/// Command-line flags. Every flag is optional here; required values are
/// checked once all layers are merged.
#[derive(Debug, Parser)]
#[command(name = "scp-sdn", version, about = "Simulate an SDN-based SCP in the 5G core control plane")]
pub struct Args {
    /// Scenario to run; repeat for several.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Vec<ScenarioKind>,
    /// Attach rate in users per second; repeat for several.
    #[arg(long, allow_negative_numbers = true)]
    pub rate: Vec<f64>,
    /// Closed-loop connection counts as `start:stop:step`, `start:stop`, a
    /// single count or a comma list.
    #[arg(long)]
    pub connections: Option<String>,
    /// Simulated seconds per signaling run.
    #[arg(long, allow_negative_numbers = true)]
    pub duration: Option<f64>,
    /// Seconds each user stays attached.
    #[arg(long, allow_negative_numbers = true)]
    pub attach_span: Option<f64>,
    /// Discovery cache validity in seconds.
    #[arg(long, allow_negative_numbers = true)]
    pub validity: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub hard_timeout: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub idle_timeout: Option<f64>,
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<LbPolicy>,
    #[arg(long)]
    pub overload_threshold: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// TOML file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the event trace of every signaling run to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    ScenarioKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| {
            let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown scenario `{s}`, expected one of {}", names.join(", "))
        })
}

fn parse_policy(s: &str) -> Result<LbPolicy, String> {
    match s {
        "round-robin" => Ok(LbPolicy::RoundRobin),
        "least-load" => Ok(LbPolicy::LeastLoad),
        _ => Err(format!("unknown policy `{s}`, expected round-robin or least-load")),
    }
}

/// One layer of settings. Layers are merged defaults < preset < file <
/// flags; keys match the flag names.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Layer {
    pub scenario: Option<Vec<ScenarioKind>>,
    pub rate: Option<Vec<f64>>,
    pub connections: Option<String>,
    pub duration: Option<f64>,
    pub attach_span: Option<f64>,
    pub validity: Option<f64>,
    pub hard_timeout: Option<f64>,
    pub idle_timeout: Option<f64>,
    pub arrival: Option<ArrivalProcess>,
    pub hop_latency: Option<f64>,
    pub policy: Option<LbPolicy>,
    pub overload_threshold: Option<u8>,
    /// Allowed `[consumer, producer]` pairs.
    pub authorization: Option<Vec<[NfType; 2]>>,
    pub population: Option<Population>,
    pub anchors: Option<Anchors<f64>>,
    pub sweep: Option<SweepParams<f64>>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub trace: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl Layer {
    fn overlay(mut self, top: Layer) -> Layer {
        overlay!(self, top; scenario, rate, connections, duration, attach_span, validity,
            hard_timeout, idle_timeout, arrival, hop_latency, policy, overload_threshold,
            authorization, population, anchors, sweep, seed, output, format, trace);
        self
    }

    fn from_args(a: Args) -> Layer {
        Layer {
            scenario: (!a.scenario.is_empty()).then_some(a.scenario),
            rate: (!a.rate.is_empty()).then_some(a.rate),
            connections: a.connections,
            duration: a.duration,
            attach_span: a.attach_span,
            validity: a.validity,
            hard_timeout: a.hard_timeout,
            idle_timeout: a.idle_timeout,
            policy: a.policy,
            overload_threshold: a.overload_threshold,
            seed: a.seed,
            output: a.output,
            format: a.format,
            trace: a.trace,
            ..Layer::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Layer, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::File {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}

impl Preset {
    pub fn layer(self) -> Layer {
        match self {
            Preset::Fig8 => Layer {
                scenario: Some(vec![ScenarioKind::SdnReactive]),
                rate: Some((1..=10).map(f64::from).collect()),
                duration: Some(3600.0),
                attach_span: Some(60.0),
                validity: Some(10.0),
                hard_timeout: Some(20.0),
                arrival: Some(ArrivalProcess::Deterministic),
                ..Layer::default()
            },
            Preset::Fig7 => Layer {
                scenario: Some(vec![
                    ScenarioKind::SdnProactive,
                    ScenarioKind::SdnConsumerForwarded,
                    ScenarioKind::SdnBothForwarded,
                ]),
                rate: Some(Vec::new()),
                connections: Some("1:99:2".into()),
                ..Layer::default()
            },
        }
    }
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenarios: Vec<ScenarioKind>,
    pub rates: Vec<f64>,
    pub connections: Vec<usize>,
    pub duration_s: f64,
    pub attach_span_s: f64,
    pub cache_validity_s: f64,
    pub hard_timeout_s: f64,
    pub idle_timeout_s: Option<f64>,
    pub arrival: ArrivalProcess,
    pub hop_latency_s: f64,
    pub policy: LbPolicy,
    pub overload_threshold: u8,
    pub authorization: AuthorizationMatrix,
    pub population: Population,
    pub anchors: Anchors<f64>,
    pub sweep: SweepParams<f64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub trace: Option<PathBuf>,
}

/// Parses `start:stop:step`, `start:stop`, `n` or `a,b,c`.
pub fn parse_connections(spec: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Invalid {
        key: "connections",
        message: format!("cannot parse `{spec}`"),
    };
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let counts: Vec<usize> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let (start, stop, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(bad()),
        };
        if step == 0 || start > stop {
            return Err(bad());
        }
        (start..=stop).step_by(step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_, _>>()?
    };
    if counts.contains(&0) {
        return Err(CliError::Invalid {
            key: "connections",
            message: "counts must be positive".into(),
        });
    }
    Ok(counts)
}

fn positive(key: &'static str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Invalid {
            key,
            message: format!("must be positive, got {v}"),
        })
    }
}

impl RunConfig {
    fn resolve(l: Layer) -> Result<RunConfig, CliError> {
        let scenarios = l.scenario.ok_or(CliError::MissingScenario)?;
        let rates = l.rate.unwrap_or_default();
        for r in &rates {
            if !r.is_finite() || *r < 0.0 {
                return Err(CliError::Invalid {
                    key: "rate",
                    message: format!("must be non-negative, got {r}"),
                });
            }
        }
        let connections = match &l.connections {
            Some(s) => parse_connections(s)?,
            None => Vec::new(),
        };
        let authorization = match l.authorization {
            Some(pairs) => AuthorizationMatrix::new(pairs.into_iter().map(|[c, p]| (c, p))),
            None => AuthorizationMatrix::attach_defaults(),
        };
        let sweep = l.sweep.unwrap_or_default();
        positive("sweep.window_s", sweep.window_s)?;
        let config = RunConfig {
            scenarios,
            rates,
            connections,
            duration_s: positive("duration", l.duration.unwrap_or(3600.0))?,
            attach_span_s: positive("attach-span", l.attach_span.unwrap_or(60.0))?,
            cache_validity_s: positive("validity", l.validity.unwrap_or(10.0))?,
            hard_timeout_s: positive("hard-timeout", l.hard_timeout.unwrap_or(20.0))?,
            idle_timeout_s: l.idle_timeout.map(|v| positive("idle-timeout", v)).transpose()?,
            arrival: l.arrival.unwrap_or_default(),
            hop_latency_s: positive("hop-latency", l.hop_latency.unwrap_or(1e-3))?,
            policy: l.policy.unwrap_or_default(),
            overload_threshold: l.overload_threshold.unwrap_or(DEFAULT_OVERLOAD_THRESHOLD),
            authorization,
            population: l.population.unwrap_or_default(),
            anchors: l.anchors.unwrap_or_default(),
            sweep,
            seed: l.seed.unwrap_or(0),
            output: l.output,
            format: l.format.unwrap_or_default(),
            trace: l.trace,
        };
        if !config.rates.is_empty() && config.attach_span_s >= config.duration_s {
            return Err(CliError::Invalid {
                key: "attach-span",
                message: "must be shorter than the duration".into(),
            });
        }
        if config.overload_threshold > 100 {
            return Err(CliError::Invalid {
                key: "overload-threshold",
                message: "must lie in 0..=100".into(),
            });
        }
        Ok(config)
    }
}

/// Builds the effective configuration from command-line arguments,
/// including the program name.
pub fn parse_config<I, S>(args: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(args)?;
    let mut layer = match args.preset {
        Some(p) => p.layer(),
        None => Layer::default(),
    };
    if let Some(path) = &args.config {
        layer = layer.overlay(Layer::from_file(path)?);
    }
    RunConfig::resolve(layer.overlay(Layer::from_args(args)))
}
