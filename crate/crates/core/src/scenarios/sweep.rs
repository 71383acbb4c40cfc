// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::controller::{ControlMessage, Controller, ControllerConfig};
use crate::flow_engine::{
    apply_actions, Address, Disposition, Endpoint, FlowTable, Packet, PortId, SwitchId,
};
use crate::nf_model::{CorrelationId, InstanceId, NfProfile, NfType, Nrf, SbiMessage, SbiMessageKind};
use crate::scalar::Scalar;
use crate::simulator::{quantile, EventQueue, Phase};

use super::calibrate::{data_path, links, HopCostModel, StationRole};
use super::{ScenarioError, ScenarioKind};

/// A single-server FIFO queue.
#[derive(Clone, Debug, PartialEq)]
pub struct Station<T> {
    pub id: usize,
    pub role: StationRole,
    /// Work per request, split evenly over its visits.
    pub service_time_s: T,
    pub visits: u64,
}

impl<T: Scalar> Station<T> {
    pub fn per_visit_s(&self) -> T {
        self.service_time_s / T::from_count(self.visits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hop {
    Station(usize),
    Link,
}

/// Stations and the request route of one scenario. Responses retrace the
/// route backwards from the hop before the producer.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology<T> {
    pub kind: ScenarioKind,
    pub stations: Vec<Station<T>>,
    pub route: Vec<Hop>,
    /// Off-path application station of the reactive scenario.
    pub app: Option<usize>,
    pub link_latency_s: T,
    pub base_rtt_s: T,
}

impl<T> Topology<T> {
    /// Full round trip as a hop sequence.
    pub fn round_trip(&self) -> Vec<Hop> {
        let mut hops = self.route.clone();
        hops.extend(self.route.iter().rev().skip(1));
        hops
    }
}

/// Path positions followed by a network link.
fn link_after(kind: ScenarioKind) -> &'static [usize] {
    match kind {
        ScenarioKind::Direct => &[0],
        ScenarioKind::ScpIndependent => &[0, 1],
        ScenarioKind::ScpColocated | ScenarioKind::SdnProactive | ScenarioKind::SdnReactive => &[1],
        ScenarioKind::SdnConsumerForwarded | ScenarioKind::SdnBothForwarded => &[2],
    }
}

pub fn build_topology<T: Scalar>(kind: ScenarioKind, model: &HopCostModel<T>) -> Result<Topology<T>, ScenarioError> {
    let mut stations = Vec::new();
    let mut route = Vec::new();
    let cost = |role| {
        let t = model
            .service_time(kind, role)
            .ok_or(ScenarioError::MissingStation { kind, role })?;
        if t <= T::zero() {
            return Err(ScenarioError::Config(format!("{role} in {kind} has no capacity")));
        }
        Ok(t)
    };
    let path = data_path(kind);
    let last = path.len() - 1;
    debug_assert_eq!(link_after(kind).len() as u64, links(kind));
    for (i, &role) in path.iter().enumerate() {
        let id = stations.len();
        stations.push(Station {
            id,
            role,
            service_time_s: cost(role)?,
            visits: if i == last { 1 } else { 2 },
        });
        route.push(Hop::Station(id));
        if link_after(kind).contains(&i) {
            route.push(Hop::Link);
        }
    }
    let app = if kind == ScenarioKind::SdnReactive {
        let id = stations.len();
        stations.push(Station {
            id,
            role: StationRole::SdnApp,
            service_time_s: cost(StationRole::SdnApp)?,
            visits: 2,
        });
        Some(id)
    } else {
        None
    };
    Ok(Topology {
        kind,
        stations,
        route,
        app,
        link_latency_s: model.link_latency_s,
        base_rtt_s: model.base_rtt_s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SweepParams<T> {
    /// Discarded start-up period.
    pub warmup_s: T,
    /// Measurement window following the warm-up.
    pub window_s: T,
    /// Hard timeout of reactive translation rules.
    pub hard_timeout_s: Option<T>,
}

impl<T: Scalar> Default for SweepParams<T> {
    fn default() -> Self {
        SweepParams {
            warmup_s: T::from_ratio(1, 10),
            window_s: T::from_ratio(1, 2),
            hard_timeout_s: Some(T::from_count(20)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub connections: usize,
    pub throughput_rps: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

/// Closed-loop sweep: `n` connections each issue their next request as soon
/// as the previous response arrives.
pub fn throughput_latency_sweep<T: Scalar>(
    kind: ScenarioKind,
    model: &HopCostModel<T>,
    connections: &[usize],
    params: &SweepParams<T>,
) -> Result<Vec<SweepPoint>, ScenarioError> {
    if params.window_s <= T::zero() || params.warmup_s < T::zero() {
        return Err(ScenarioError::Config("sweep window must be positive".into()));
    }
    let topology = build_topology(kind, model)?;
    connections
        .iter()
        .map(|&n| closed_loop(&topology, n, params))
        .collect()
}

/// Position of a request within the round trip.
#[derive(Clone, Debug)]
struct Job<T> {
    conn: usize,
    started: T,
    /// Index into the round trip.
    step: usize,
    packet: Option<Packet<T>>,
    /// Switch whose table miss sent the job to the application.
    detour: Option<SwitchId>,
}

enum Ev<T> {
    Arrive(Job<T>),
    Done(usize),
}

struct Reactive<T> {
    controller: Controller<T>,
    nrf: Nrf,
    tables: Vec<FlowTable<T>>,
    consumer: Endpoint,
    main: Endpoint,
}

const CONSUMER_SWITCH: SwitchId = SwitchId(1);
const PRODUCER_SWITCH: SwitchId = SwitchId(2);

impl<T: Scalar> Reactive<T> {
    fn new(hard: Option<T>) -> Result<Self, ScenarioError> {
        let nrf_ep = Endpoint { address: Address::from_octets(10, 0, 0, 1), port: 8080 };
        let consumer = Endpoint { address: Address::from_octets(10, 0, 1, 1), port: 8080 };
        let producer = Endpoint { address: Address::from_octets(10, 0, 2, 1), port: 8080 };
        let mut config = ControllerConfig::new(nrf_ep);
        config.hard_timeout = hard;
        let mut controller = Controller::new(config)?;
        let mut nrf = Nrf::new(nrf_ep);
        let mut tables = Vec::new();
        for (i, (ep, ty)) in [(nrf_ep, NfType::Nrf), (consumer, NfType::Amf), (producer, NfType::Ausf)]
            .into_iter()
            .enumerate()
        {
            let switch = SwitchId(i as u32);
            controller.add_switch(switch, ep, ty)?;
            tables.push(FlowTable::for_nf(switch, ep));
            for msg in controller.bootstrap_switch(switch)? {
                if let ControlMessage::FlowMod { rule, .. } = msg {
                    tables[i].install_rule(rule, T::zero())?;
                }
            }
        }
        let profile = NfProfile::new(InstanceId(2), NfType::Ausf, producer, 0, 100)
            .expect("valid profile");
        nrf.register(profile).expect("fresh registry");
        let main = controller.main_endpoint(NfType::Ausf).expect("producer type");
        Ok(Reactive { controller, nrf, tables, consumer, main })
    }

    fn request(&self, now: T) -> Packet<T> {
        let message = SbiMessage::new(SbiMessageKind::AuthenticationRequest, CorrelationId(0));
        Packet {
            src: self.consumer,
            dst: self.main,
            size_bytes: message.kind.nominal_size(),
            message,
            created_at: now,
        }
    }

    /// Table lookup at `switch`; `None` on a miss.
    fn lookup(&mut self, switch: SwitchId, packet: &Packet<T>, now: T) -> Option<(Packet<T>, Disposition)> {
        let table = &mut self.tables[switch.0 as usize];
        table.expire_rules(now);
        table.process(packet, now).1.filter(|(_, d)| *d != Disposition::ToController)
    }

    /// Controller reaction to a miss, applied instantly.
    fn escalate(&mut self, switch: SwitchId, packet: Packet<T>, now: T) -> Result<(SwitchId, Packet<T>, Disposition), ScenarioError> {
        let reaction = self.controller.handle_packet_in(switch, packet, now, &self.nrf)?;
        let mut out = None;
        for msg in reaction.messages {
            match msg {
                ControlMessage::FlowMod { switch, rule } => {
                    self.tables[switch.0 as usize].install_rule(rule, now)?;
                }
                ControlMessage::PacketOut { switch, packet, actions } => {
                    let (packet, disposition) = apply_actions(packet, &actions)?;
                    out = Some((switch, packet, disposition));
                }
                _ => {}
            }
        }
        out.ok_or_else(|| ScenarioError::Config("controller dropped a sweep packet".into()))
    }
}

fn closed_loop<T: Scalar>(topology: &Topology<T>, n: usize, params: &SweepParams<T>) -> Result<SweepPoint, ScenarioError> {
    let hops = topology.round_trip();
    let producer_step = topology.route.len() - 1;
    let start = params.warmup_s;
    let stop = params.warmup_s + params.window_s;
    let mut reactive = match topology.app {
        Some(_) => Some(Reactive::new(params.hard_timeout_s)?),
        None => None,
    };
    // Round-trip steps of the two switches, request leg then response leg.
    let switch_steps: Vec<(usize, SwitchId)> = hops
        .iter()
        .enumerate()
        .filter_map(|(i, h)| match h {
            Hop::Station(s) if topology.stations[*s].role == StationRole::SdnSwitch => Some(i),
            _ => None,
        })
        .zip([CONSUMER_SWITCH, PRODUCER_SWITCH, PRODUCER_SWITCH, CONSUMER_SWITCH])
        .collect();
    let step_of_link = |from: SwitchId| {
        hops.iter()
            .enumerate()
            .filter(|(_, h)| **h == Hop::Link)
            .map(|(i, _)| i)
            .nth(if from == CONSUMER_SWITCH { 0 } else { 1 })
            .expect("one link each way")
    };

    let mut queue: EventQueue<T, Ev<T>> = EventQueue::new();
    let mut waiting: Vec<VecDeque<Job<T>>> = vec![VecDeque::new(); topology.stations.len()];
    let mut busy: Vec<Option<Job<T>>> = vec![None; topology.stations.len()];
    let mut completed = 0u64;
    let mut rtts = Vec::new();

    let issue = |queue: &mut EventQueue<T, Ev<T>>, conn: usize, now: T, reactive: &Option<Reactive<T>>| {
        let job = Job {
            conn,
            started: now,
            step: 0,
            packet: reactive.as_ref().map(|r| r.request(now)),
            detour: None,
        };
        queue.schedule(now + topology.base_rtt_s, Phase::Delivery, Ev::Arrive(job));
    };
    for conn in 0..n {
        issue(&mut queue, conn, T::zero(), &reactive);
    }

    while let Some((now, _, ev)) = queue.pop() {
        if now >= stop {
            break;
        }
        match ev {
            Ev::Arrive(mut job) => {
                if job.step == hops.len() {
                    if job.started >= start {
                        completed += 1;
                        rtts.push((now - job.started).to_f64_lossy());
                    }
                    issue(&mut queue, job.conn, now, &reactive);
                    continue;
                }
                let station = match (job.detour, hops[job.step]) {
                    (Some(_), _) => topology.app.expect("reactive"),
                    (None, Hop::Station(s)) => s,
                    (None, Hop::Link) => {
                        job.step += 1;
                        queue.schedule(now + topology.link_latency_s, Phase::Delivery, Ev::Arrive(job));
                        continue;
                    }
                };
                if busy[station].is_none() {
                    let t = topology.stations[station].per_visit_s();
                    busy[station] = Some(job);
                    queue.schedule(now + t, Phase::Delivery, Ev::Done(station));
                } else {
                    waiting[station].push_back(job);
                }
            }
            Ev::Done(station) => {
                let mut job = busy[station].take().expect("station was busy");
                if let Some(next) = waiting[station].pop_front() {
                    let t = topology.stations[station].per_visit_s();
                    busy[station] = Some(next);
                    queue.schedule(now + t, Phase::Delivery, Ev::Done(station));
                }
                if let Some(r) = reactive.as_mut() {
                    route_reactive(r, &mut job, &hops, &switch_steps, producer_step, &step_of_link, now)?;
                } else {
                    job.step += 1;
                }
                queue.schedule(now, Phase::Delivery, Ev::Arrive(job));
            }
        }
    }
    let window = params.window_s.to_f64_lossy();
    Ok(SweepPoint {
        connections: n,
        throughput_rps: completed as f64 / window,
        p50_ms: quantile(&rtts, 0.5).map_or(0.0, |v| v * 1e3),
        p95_ms: quantile(&rtts, 0.95).map_or(0.0, |v| v * 1e3),
    })
}

/// Advances a reactive job past the station it just left, consulting the
/// switch tables and the controller.
fn route_reactive<T: Scalar>(
    r: &mut Reactive<T>,
    job: &mut Job<T>,
    hops: &[Hop],
    switch_steps: &[(usize, SwitchId)],
    producer_step: usize,
    step_of_link: &dyn Fn(SwitchId) -> usize,
    now: T,
) -> Result<(), ScenarioError> {
    let packet = job.packet.take().expect("reactive jobs carry a packet");
    let (switch, packet, disposition) = if let Some(switch) = job.detour.take() {
        r.escalate(switch, packet, now)?
    } else if let Some(&(_, switch)) = switch_steps.iter().find(|(i, _)| *i == job.step) {
        match r.lookup(switch, &packet, now) {
            Some((packet, d)) => (switch, packet, d),
            None => {
                job.detour = Some(switch);
                job.packet = Some(packet);
                return Ok(());
            }
        }
    } else {
        let packet = if job.step == producer_step {
            let message = packet.message.reply(
                packet.message.kind.data_response().expect("sweep requests have replies"),
            );
            Packet {
                src: packet.dst,
                dst: packet.src,
                size_bytes: message.kind.nominal_size(),
                message,
                created_at: now,
            }
        } else {
            packet
        };
        job.packet = Some(packet);
        job.step += 1;
        return Ok(());
    };
    job.step = match (disposition, switch) {
        (Disposition::Forward(PortId::LOCAL), CONSUMER_SWITCH) => hops.len() - 1,
        (Disposition::Forward(PortId::LOCAL), _) => producer_step,
        (Disposition::Forward(_), from) => step_of_link(from),
        _ => return Err(ScenarioError::Config("sweep packet dropped by a switch".into())),
    };
    job.packet = Some(packet);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{calibrate_costs, Anchors};

    fn model() -> HopCostModel<f64> {
        calibrate_costs(&Anchors::default()).unwrap()
    }

    #[test]
    fn direct_is_three_hops() {
        let t = build_topology(ScenarioKind::Direct, &model()).unwrap();
        assert_eq!(t.route, vec![Hop::Station(0), Hop::Link, Hop::Station(1)]);
        assert_eq!(t.round_trip().len(), 5);
    }

    #[test]
    fn independent_agent_sits_between_two_links() {
        let t = build_topology(ScenarioKind::ScpIndependent, &model()).unwrap();
        assert_eq!(
            t.route,
            vec![Hop::Station(0), Hop::Link, Hop::Station(1), Hop::Link, Hop::Station(2)]
        );
        assert_eq!(t.stations[1].role, StationRole::ScpAgent);
    }

    #[test]
    fn colocated_stations_run_at_half_rate() {
        let m = model();
        let t = build_topology(ScenarioKind::ScpColocated, &m).unwrap();
        let producer = t.stations.iter().find(|s| s.role == StationRole::ProducerStack).unwrap();
        let direct = m.service_time(ScenarioKind::Direct, StationRole::ProducerStack).unwrap();
        assert!((producer.service_time_s - 2.0 * direct).abs() < 1e-15);
        assert_eq!(t.stations.iter().filter(|s| s.role == StationRole::ScpAgent).count(), 2);
    }

    #[test]
    fn proactive_has_no_app_station() {
        let t = build_topology(ScenarioKind::SdnProactive, &model()).unwrap();
        assert!(t.stations.iter().all(|s| s.role != StationRole::SdnApp));
        assert!(t.app.is_none());
        let r = build_topology(ScenarioKind::SdnReactive, &model()).unwrap();
        assert!(r.app.is_some());
        assert!(!r.route.contains(&Hop::Station(r.app.unwrap())));
    }

    #[test]
    fn single_connection_matches_idle_round_trip() {
        let m = model();
        for kind in ScenarioKind::ALL {
            let p = &throughput_latency_sweep(kind, &m, &[1], &SweepParams::default()).unwrap()[0];
            let rtt = m.unloaded_rtt(kind).unwrap();
            assert!((p.p95_ms - rtt * 1e3).abs() < 1e-6, "{kind}: {} vs {}", p.p95_ms, rtt * 1e3);
            let expected = 1.0 / rtt;
            assert!((p.throughput_rps - expected).abs() <= expected * 0.01 + 2.0, "{kind}: {}", p.throughput_rps);
        }
    }

    #[test]
    fn missing_station_is_reported() {
        let mut m = model();
        m.set_service_time(ScenarioKind::Direct, StationRole::ProducerStack, 1e-3).unwrap();
        assert!(build_topology(ScenarioKind::Direct, &m).is_ok());
        let err = throughput_latency_sweep(
            ScenarioKind::Direct,
            &m,
            &[1],
            &SweepParams { window_s: 0.0, ..SweepParams::default() },
        );
        assert!(err.is_err());
    }
}
