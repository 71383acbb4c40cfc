// SPDX-License-Identifier: Apache-2.0

//! Deployment scenarios and the calibrated station cost model.

mod calibrate;
mod sweep;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControllerError;
use crate::flow_engine::FlowError;

pub use calibrate::{calibrate_costs, Anchors, HopCostModel, StationRole};
pub use sweep::{
    build_topology, throughput_latency_sweep, Hop, Station, SweepParams, SweepPoint, Topology,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("{kind} has no {role} station in the cost model")]
    MissingStation { kind: ScenarioKind, role: StationRole },
    #[error("invalid scenario configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Direct,
    ScpIndependent,
    ScpColocated,
    /// Rules pushed ahead of time; nothing crosses the application.
    SdnProactive,
    /// Consumer-side traffic detours through the application.
    SdnConsumerForwarded,
    /// Traffic of both ends detours through the application.
    SdnBothForwarded,
    /// Reactive rule installation with translation pairs.
    SdnReactive,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::Direct,
        ScenarioKind::ScpIndependent,
        ScenarioKind::ScpColocated,
        ScenarioKind::SdnProactive,
        ScenarioKind::SdnConsumerForwarded,
        ScenarioKind::SdnBothForwarded,
        ScenarioKind::SdnReactive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Direct => "direct",
            ScenarioKind::ScpIndependent => "scp-independent",
            ScenarioKind::ScpColocated => "scp-colocated",
            ScenarioKind::SdnProactive => "sdn-proactive",
            ScenarioKind::SdnConsumerForwarded => "sdn-consumer-forwarded",
            ScenarioKind::SdnBothForwarded => "sdn-both-forwarded",
            ScenarioKind::SdnReactive => "sdn-reactive",
        }
    }

    pub fn is_sdn(self) -> bool {
        matches!(
            self,
            ScenarioKind::SdnProactive
                | ScenarioKind::SdnConsumerForwarded
                | ScenarioKind::SdnBothForwarded
                | ScenarioKind::SdnReactive
        )
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}
