// SPDX-License-Identifier: Apache-2.0

//! Discrete-event signaling simulation, its workload, metrics, and an
//! independent count oracle.

mod engine;
mod metrics;
mod oracle;
mod signaling;
mod workload;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{AuthorizationMatrix, ControllerError, LbPolicy, DEFAULT_OVERLOAD_THRESHOLD};
use crate::flow_engine::{Address, Endpoint, FlowError, StatsTrigger, SwitchId};
use crate::nf_model::{NfType, SbiError};
use crate::scalar::Scalar;
use crate::scenarios::ScenarioKind;

pub use engine::{EventQueue, Phase};
pub use metrics::{quantile, Counts, Metrics};
pub use oracle::analytic_oracle_count;
pub use signaling::{run, run_with, Probe};
pub use workload::{generate_workload, ArrivalProcess, WorkloadEvent, WorkloadSpec};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("oracle does not cover this configuration: {0}")]
    OracleUnsupported(&'static str),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Sbi(#[from] SbiError),
}

/// Instance loads per NF type; the vector length is the instance count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Population {
    pub amf: Vec<u8>,
    pub smf: Vec<u8>,
    pub ausf: Vec<u8>,
}

impl Default for Population {
    fn default() -> Self {
        Population {
            amf: vec![0],
            smf: vec![0],
            ausf: vec![0],
        }
    }
}

impl Population {
    pub fn uniform(amf: usize, smf: usize, ausf: usize) -> Self {
        Population {
            amf: vec![0; amf],
            smf: vec![0; smf],
            ausf: vec![0; ausf],
        }
    }
}

/// Placement of one NF: its endpoint and co-located switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NfPlacement {
    pub nf_type: NfType,
    pub endpoint: Endpoint,
    pub switch: SwitchId,
    pub load: u8,
}

pub const NRF_ENDPOINT: Endpoint = Endpoint {
    address: Address::from_octets(10, 0, 0, 1),
    port: 8080,
};

/// The NRF first, then AMFs, AUSFs and SMFs. Switch ids follow list order.
pub fn placements(population: &Population) -> Vec<NfPlacement> {
    let mut out = vec![NfPlacement {
        nf_type: NfType::Nrf,
        endpoint: NRF_ENDPOINT,
        switch: SwitchId(0),
        load: 0,
    }];
    let groups = [
        (NfType::Amf, 1u8, &population.amf),
        (NfType::Ausf, 2, &population.ausf),
        (NfType::Smf, 3, &population.smf),
    ];
    for (nf_type, block, loads) in groups {
        for (i, &load) in loads.iter().enumerate() {
            let switch = SwitchId(out.len() as u32);
            out.push(NfPlacement {
                nf_type,
                endpoint: Endpoint {
                    address: Address::from_octets(10, 0, block, i as u8 + 1),
                    port: 8080,
                },
                switch,
                load,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalingConfig<T> {
    pub scenario: ScenarioKind,
    pub workload: WorkloadSpec<T>,
    pub cache_validity_s: T,
    pub hard_timeout_s: Option<T>,
    pub idle_timeout_s: Option<T>,
    /// One network, switch to controller, or controller to switch hop.
    pub hop_latency_s: T,
    /// Quiet period after registration before the first attach.
    pub warmup_s: T,
    pub population: Population,
    pub policy: LbPolicy,
    pub overload_threshold: u8,
    pub authorization: AuthorizationMatrix,
    pub stats: Option<StatsTrigger<T>>,
    /// Marks every data request as requiring the previous instance.
    pub binding_required: bool,
}

impl<T: Scalar> SignalingConfig<T> {
    /// Reactive SDN with a 10 s discovery validity, 20 s hard timeout and
    /// 1 ms hops.
    pub fn new(scenario: ScenarioKind, attach_rate_per_s: T) -> Self {
        SignalingConfig {
            scenario,
            workload: WorkloadSpec::new(attach_rate_per_s),
            cache_validity_s: T::from_count(10),
            hard_timeout_s: Some(T::from_count(20)),
            idle_timeout_s: None,
            hop_latency_s: T::from_ratio(1, 1000),
            warmup_s: T::one(),
            population: Population::default(),
            policy: LbPolicy::RoundRobin,
            overload_threshold: DEFAULT_OVERLOAD_THRESHOLD,
            authorization: AuthorizationMatrix::attach_defaults(),
            stats: None,
            binding_required: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.workload.validate()?;
        let positive = |v: Option<T>, what: &str| match v {
            Some(v) if v <= T::zero() => Err(SimError::Config(format!("{what} must be positive"))),
            _ => Ok(()),
        };
        positive(Some(self.cache_validity_s), "cache validity")?;
        positive(Some(self.hop_latency_s), "hop latency")?;
        positive(self.hard_timeout_s, "hard timeout")?;
        positive(self.idle_timeout_s, "idle timeout")?;
        if self.warmup_s < T::zero() {
            return Err(SimError::Config("warmup must be non-negative".into()));
        }
        if let Some(StatsTrigger::Periodic(i)) = self.stats {
            positive(Some(i), "stats interval")?;
        }
        let p = &self.population;
        if p.amf.is_empty() {
            return Err(SimError::Config("at least one AMF is required".into()));
        }
        if p.amf.len().max(p.smf.len()).max(p.ausf.len()) > 250 {
            return Err(SimError::Config("at most 250 instances per type".into()));
        }
        if p.amf.iter().chain(&p.smf).chain(&p.ausf).any(|&l| l > 100) {
            return Err(SimError::Config("loads must lie in 0..=100".into()));
        }
        if self.overload_threshold > 100 {
            return Err(SimError::Config("overload threshold must lie in 0..=100".into()));
        }
        Ok(())
    }
}
