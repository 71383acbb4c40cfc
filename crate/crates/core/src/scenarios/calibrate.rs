// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::{ScenarioError, ScenarioKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationRole {
    ConsumerStack,
    ProducerStack,
    ScpAgent,
    SdnSwitch,
    SdnApp,
    NetworkLink,
}

impl fmt::Display for StationRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StationRole::ConsumerStack => "consumer-stack",
            StationRole::ProducerStack => "producer-stack",
            StationRole::ScpAgent => "scp-agent",
            StationRole::SdnSwitch => "sdn-switch",
            StationRole::SdnApp => "sdn-app",
            StationRole::NetworkLink => "network-link",
        };
        f.write_str(name)
    }
}

/// Saturation throughputs (requests/s) the model is fitted to. Missing
/// fields deserialize to their defaults.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Anchors<T> {
    pub direct_rps: T,
    /// Plateau of the SDN data path when nothing crosses the application.
    pub sdn_data_path_rps: T,
    pub scp_independent_rps: T,
    pub scp_colocated_rps: T,
    /// Plateau when traffic is forwarded through the application.
    pub through_app_rps: T,
    /// Connection count at which the direct path saturates; fixes the
    /// round trip of a lone request.
    pub direct_knee_connections: T,
    /// One-way latency of a network link.
    pub link_latency_s: T,
}

impl<T: Scalar> Default for Anchors<T> {
    fn default() -> Self {
        Anchors {
            direct_rps: T::from_count(31_000),
            sdn_data_path_rps: T::from_count(30_000),
            scp_independent_rps: T::from_count(10_000),
            scp_colocated_rps: T::from_count(5_000),
            through_app_rps: T::from_count(11_000),
            direct_knee_connections: T::from_count(51),
            link_latency_s: T::from_ratio(1, 10_000),
        }
    }
}

/// Per-request service times of every station role in every scenario.
///
/// A station visited on both the request and the response leg spends half
/// its time on each visit, so its rate in requests/s is always
/// `1 / service_time`. Co-located stations are stored at their shared,
/// halved rate.
#[derive(Clone, Debug, PartialEq)]
pub struct HopCostModel<T> {
    service_times: BTreeMap<(ScenarioKind, StationRole), T>,
    /// One-way link latency.
    pub link_latency_s: T,
    /// Fixed round-trip overhead outside the queueing stations.
    pub base_rtt_s: T,
    pub anchors: Anchors<T>,
}

/// Stations of `kind` in request order, excluding links and the
/// reactive application that sits off the data path.
pub(crate) fn data_path(kind: ScenarioKind) -> &'static [StationRole] {
    use StationRole::*;
    match kind {
        ScenarioKind::Direct => &[ConsumerStack, ProducerStack],
        ScenarioKind::ScpIndependent => &[ConsumerStack, ScpAgent, ProducerStack],
        ScenarioKind::ScpColocated => &[ConsumerStack, ScpAgent, ScpAgent, ProducerStack],
        ScenarioKind::SdnProactive | ScenarioKind::SdnReactive => {
            &[ConsumerStack, SdnSwitch, SdnSwitch, ProducerStack]
        }
        ScenarioKind::SdnConsumerForwarded => {
            &[ConsumerStack, SdnSwitch, SdnApp, SdnSwitch, ProducerStack]
        }
        ScenarioKind::SdnBothForwarded => {
            &[ConsumerStack, SdnSwitch, SdnApp, SdnSwitch, SdnApp, ProducerStack]
        }
    }
}

/// Links crossed by a request on its way to the producer.
pub(crate) fn links(kind: ScenarioKind) -> u64 {
    match kind {
        ScenarioKind::ScpIndependent => 2,
        _ => 1,
    }
}

impl<T: Scalar> HopCostModel<T> {
    pub fn service_time(&self, kind: ScenarioKind, role: StationRole) -> Option<T> {
        self.service_times.get(&(kind, role)).copied()
    }

    /// Replaces one service time; `time` must be positive.
    pub fn set_service_time(&mut self, kind: ScenarioKind, role: StationRole, time: T) -> Result<(), ScenarioError> {
        if time <= T::zero() {
            return Err(ScenarioError::Calibration(format!(
                "service time of {role} in {kind} must be positive"
            )));
        }
        self.service_times.insert((kind, role), time);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ScenarioKind, StationRole, T)> + '_ {
        self.service_times.iter().map(|(&(k, r), &t)| (k, r, t))
    }

    /// Bottleneck rate of the data path of `kind`, in requests/s.
    pub fn saturation(&self, kind: ScenarioKind) -> Result<T, ScenarioError> {
        let mut slowest = T::zero();
        for &role in data_path(kind) {
            let t = self
                .service_time(kind, role)
                .ok_or(ScenarioError::MissingStation { kind, role })?;
            slowest = slowest.max_of(t);
        }
        Ok(T::one() / slowest)
    }

    /// Round trip of a single request through an idle `kind` path.
    pub fn unloaded_rtt(&self, kind: ScenarioKind) -> Result<T, ScenarioError> {
        let mut total = self.base_rtt_s + self.link_latency_s * T::from_count(2 * links(kind));
        for &role in data_path(kind) {
            total = total
                + self
                    .service_time(kind, role)
                    .ok_or(ScenarioError::MissingStation { kind, role })?;
        }
        Ok(total)
    }

    /// The saturation anchor `kind` is fitted to.
    pub fn anchor(&self, kind: ScenarioKind) -> T {
        let a = &self.anchors;
        match kind {
            ScenarioKind::Direct => a.direct_rps,
            ScenarioKind::ScpIndependent => a.scp_independent_rps,
            ScenarioKind::ScpColocated => a.scp_colocated_rps,
            ScenarioKind::SdnProactive | ScenarioKind::SdnReactive => a.sdn_data_path_rps,
            ScenarioKind::SdnConsumerForwarded | ScenarioKind::SdnBothForwarded => a.through_app_rps,
        }
    }
}

/// Solves station service times so that every scenario saturates at its
/// anchor.
///
/// The consumer stack runs at twice the direct rate so the producer is the
/// direct bottleneck. Co-located agents and stacks run at half their
/// nominal rate.
pub fn calibrate_costs<T: Scalar>(anchors: &Anchors<T>) -> Result<HopCostModel<T>, ScenarioError> {
    let a = anchors;
    let positive = [
        ("direct", a.direct_rps),
        ("sdn data path", a.sdn_data_path_rps),
        ("independent scp", a.scp_independent_rps),
        ("co-located scp", a.scp_colocated_rps),
        ("through app", a.through_app_rps),
        ("direct knee", a.direct_knee_connections),
    ];
    for (name, v) in positive {
        if v <= T::zero() {
            return Err(ScenarioError::Calibration(format!("{name} anchor must be positive")));
        }
    }
    if a.link_latency_s < T::zero() {
        return Err(ScenarioError::Calibration("link latency must be non-negative".into()));
    }
    let two = T::from_count(2);
    let producer = T::one() / a.direct_rps;
    let consumer = producer / two;
    let switch = T::one() / a.sdn_data_path_rps;
    let agent = T::one() / a.scp_independent_rps;
    let colocated_agent = T::one() / a.scp_colocated_rps;
    let app = T::one() / a.through_app_rps;

    let mut times = BTreeMap::new();
    let mut set = |kind, role, t| {
        times.insert((kind, role), t);
    };
    use StationRole::*;
    set(ScenarioKind::Direct, ConsumerStack, consumer);
    set(ScenarioKind::Direct, ProducerStack, producer);
    set(ScenarioKind::ScpIndependent, ConsumerStack, consumer);
    set(ScenarioKind::ScpIndependent, ScpAgent, agent);
    set(ScenarioKind::ScpIndependent, ProducerStack, producer);
    set(ScenarioKind::ScpColocated, ConsumerStack, consumer * two);
    set(ScenarioKind::ScpColocated, ScpAgent, colocated_agent);
    set(ScenarioKind::ScpColocated, ProducerStack, producer * two);
    for kind in [
        ScenarioKind::SdnProactive,
        ScenarioKind::SdnReactive,
        ScenarioKind::SdnConsumerForwarded,
        ScenarioKind::SdnBothForwarded,
    ] {
        set(kind, ConsumerStack, consumer);
        set(kind, SdnSwitch, switch);
        set(kind, ProducerStack, producer);
    }
    for kind in [
        ScenarioKind::SdnReactive,
        ScenarioKind::SdnConsumerForwarded,
        ScenarioKind::SdnBothForwarded,
    ] {
        set(kind, SdnApp, app);
    }

    let mut model = HopCostModel {
        service_times: times,
        link_latency_s: a.link_latency_s,
        base_rtt_s: T::zero(),
        anchors: *a,
    };
    let knee_rtt = a.direct_knee_connections / a.direct_rps;
    let idle = model.unloaded_rtt(ScenarioKind::Direct)?;
    if knee_rtt <= idle {
        return Err(ScenarioError::Calibration(format!(
            "direct knee at {} connections implies a round trip below the path's own service and link time",
            a.direct_knee_connections.to_f64_lossy()
        )));
    }
    model.base_rtt_s = knee_rtt - idle;

    for kind in ScenarioKind::ALL {
        let got = model.saturation(kind)?;
        let want = model.anchor(kind);
        let gap = if got > want { got - want } else { want - got };
        if gap * T::from_count(100) > want {
            return Err(ScenarioError::Calibration(format!(
                "{kind} cannot reach {} requests/s: another station limits it to {}",
                want.to_f64_lossy(),
                got.to_f64_lossy()
            )));
        }
    }
    Ok(model)
}
