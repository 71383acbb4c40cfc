// SPDX-License-Identifier: Apache-2.0

//! Packet counts of a reactive run replayed without flow tables or a
//! controller: only rule landing times, bindings and caches are tracked.

use std::collections::{BTreeMap, BTreeSet};

use crate::controller::{AuthorizationMatrix, LbPolicy};
use crate::nf_model::{CallFlowKind, FlowStep, NfType, UserId};
use crate::scalar::Scalar;
use crate::scenarios::ScenarioKind;

use super::{
    generate_workload, placements, ArrivalProcess, Counts, EventQueue, Phase, SignalingConfig,
    SimError, WorkloadEvent,
};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Discovery,
    Request,
    Reply,
}

#[derive(Clone, Copy)]
struct Pkt {
    flow: u64,
    kind: Kind,
    /// Producer type of a data packet.
    target: NfType,
    /// Producer instance of a data packet, once known.
    inst: usize,
    touched: bool,
}

/// What the controller does with a packet.
#[derive(Clone, Copy)]
enum Handling {
    Discovery,
    FirstPacket,
    Relay,
}

enum Ev {
    Registered,
    Workload(WorkloadEvent),
    AtConsumer(Pkt),
    AtProducer(Pkt),
    PacketIn(Pkt, Handling),
    Landing { amf: usize, target: NfType, inst: usize, gen: u64 },
    Out(Pkt, Handling),
    Deliver(Pkt),
    R1Expiry { amf: usize, target: NfType, gen: u64 },
    Removed { amf: usize, target: NfType, gen: u64 },
    End,
}

struct Flow {
    user: UserId,
    amf: usize,
    kind: CallFlowKind,
    pos: usize,
}

struct Replay<T> {
    h: T,
    hard: T,
    validity: T,
    queue: EventQueue<T, Ev>,
    counts: Counts,
    /// Instance count per producer type.
    instances: BTreeMap<NfType, usize>,
    n_amf: usize,
    /// Consumer-side rewrite rule: target instance, landing time, generation.
    r1: BTreeMap<(usize, NfType), (usize, T, u64)>,
    /// Latest landing of the rules tied to a consumer and instance.
    pair: BTreeMap<(usize, NfType, usize), T>,
    bindings: BTreeMap<(usize, NfType), (usize, u64)>,
    cursor: BTreeMap<NfType, usize>,
    ctl_cache: BTreeMap<NfType, T>,
    amf_cache: BTreeMap<(usize, NfType), T>,
    flows: BTreeMap<u64, Flow>,
    next_flow: u64,
    next_gen: u64,
    attached: BTreeSet<UserId>,
}

/// Expected [`Counts`] of `run` for a reactive configuration, computed by an
/// independent replay.
///
/// Covers deterministic arrivals, round-robin selection, loads below the
/// overload threshold, hard timeouts only, no statistics, the default
/// authorization matrix, no binding requests and at least one instance of
/// every type.
pub fn analytic_oracle_count<T: Scalar>(config: &SignalingConfig<T>) -> Result<Counts, SimError> {
    config.validate()?;
    let unsupported = |what| Err(SimError::OracleUnsupported(what));
    if config.scenario != ScenarioKind::SdnReactive {
        return unsupported("only the reactive scenario");
    }
    if config.workload.arrival != ArrivalProcess::Deterministic {
        return unsupported("only deterministic arrivals");
    }
    if config.policy != LbPolicy::RoundRobin {
        return unsupported("only round-robin selection");
    }
    let p = &config.population;
    if p.smf.is_empty() || p.ausf.is_empty() {
        return unsupported("every producer type needs an instance");
    }
    if p.amf.iter().chain(&p.smf).chain(&p.ausf).any(|&l| l >= config.overload_threshold) {
        return unsupported("loads must stay below the overload threshold");
    }
    let Some(hard) = config.hard_timeout_s else {
        return unsupported("a hard timeout is required");
    };
    if config.idle_timeout_s.is_some() || config.stats.is_some() || config.binding_required {
        return unsupported("idle timeouts, statistics and binding requests");
    }
    if config.authorization != AuthorizationMatrix::attach_defaults() {
        return unsupported("only the default authorization matrix");
    }

    let nfs = placements(p);
    let mut instances = BTreeMap::new();
    for nf in &nfs {
        *instances.entry(nf.nf_type).or_insert(0) += 1;
    }
    let mut replay = Replay {
        h: config.hop_latency_s,
        hard,
        validity: config.cache_validity_s,
        queue: EventQueue::new(),
        counts: Counts::default(),
        n_amf: p.amf.len(),
        instances,
        r1: BTreeMap::new(),
        pair: BTreeMap::new(),
        bindings: BTreeMap::new(),
        cursor: BTreeMap::new(),
        ctl_cache: BTreeMap::new(),
        amf_cache: BTreeMap::new(),
        flows: BTreeMap::new(),
        next_flow: 0,
        next_gen: 0,
        attached: BTreeSet::new(),
    };

    // Register is trapped and relayed to the NRF; the acknowledgement misses
    // at the NRF switch and is relayed back.
    let h = replay.h;
    for _ in 1..nfs.len() {
        let c = &mut replay.counts;
        c.registration_packets += 2;
        c.emitted += 2;
        c.nrf_bound += 1;
        c.relayed += 1;
        replay.queue.schedule(h + h, Phase::Delivery, Ev::Registered);
        replay.queue.schedule(h * T::from_count(4), Phase::Delivery, Ev::Registered);
    }
    for (t, ev) in generate_workload(&config.workload, 0)? {
        replay.queue.schedule(config.warmup_s + t, Phase::Delivery, Ev::Workload(ev));
    }
    replay
        .queue
        .schedule(config.warmup_s + config.workload.sim_duration_s, Phase::End, Ev::End);

    while let Some((now, _, ev)) = replay.queue.pop() {
        if let Ev::End = ev {
            break;
        }
        replay.step(now, ev);
    }
    let c = &mut replay.counts;
    c.in_flight = c.emitted - c.delivered - c.dropped;
    Ok(replay.counts)
}

impl<T: Scalar> Replay<T> {
    fn alive(&self, landed: Option<T>, now: T) -> bool {
        landed.is_some_and(|l| now < l + self.hard)
    }

    fn pair_alive(&self, pkt: &Pkt, now: T) -> bool {
        let amf = self.flows[&pkt.flow].amf;
        self.alive(self.pair.get(&(amf, pkt.target, pkt.inst)).copied(), now)
    }

    fn step(&mut self, now: T, ev: Ev) {
        let h = self.h;
        match ev {
            Ev::Registered => self.counts.delivered += 1,
            Ev::Workload(WorkloadEvent::Attach(user)) => self.start(user, CallFlowKind::Attach, now),
            Ev::Workload(WorkloadEvent::Detach(user)) => {
                if self.attached.contains(&user) {
                    self.start(user, CallFlowKind::Detach, now);
                }
            }
            Ev::AtConsumer(mut pkt) => {
                let amf = self.flows[&pkt.flow].amf;
                let (next, handling) = match pkt.kind {
                    Kind::Discovery => (None, Handling::Discovery),
                    Kind::Request => match self.r1.get(&(amf, pkt.target)) {
                        Some(&(inst, landed, _)) if self.alive(Some(landed), now) => {
                            pkt.inst = inst;
                            (Some(Ev::AtProducer(pkt)), Handling::Relay)
                        }
                        _ => (None, Handling::FirstPacket),
                    },
                    Kind::Reply if self.pair_alive(&pkt, now) => (Some(Ev::Deliver(pkt)), Handling::Relay),
                    Kind::Reply => (None, Handling::Relay),
                };
                match next {
                    Some(ev @ Ev::AtProducer(_)) => self.queue.schedule(now + h, Phase::SwitchIngress, ev),
                    Some(ev) => self.queue.schedule(now, Phase::Delivery, ev),
                    None => self.queue.schedule(now + h, Phase::ControllerPacketIn, Ev::PacketIn(pkt, handling)),
                };
            }
            Ev::AtProducer(pkt) => {
                let alive = self.pair_alive(&pkt, now);
                match (pkt.kind, alive) {
                    (Kind::Request, true) => self.queue.schedule(now, Phase::Delivery, Ev::Deliver(pkt)),
                    (_, true) => self.queue.schedule(now + h, Phase::SwitchIngress, Ev::AtConsumer(pkt)),
                    (_, false) => {
                        self.queue
                            .schedule(now + h, Phase::ControllerPacketIn, Ev::PacketIn(pkt, Handling::Relay))
                    }
                };
            }
            Ev::PacketIn(pkt, handling) => self.packet_in(pkt, handling, now),
            Ev::Landing { amf, target, inst, gen } => {
                self.r1.insert((amf, target), (inst, now, gen));
                self.pair.insert((amf, target, inst), now);
                self.queue
                    .schedule(now + self.hard, Phase::RuleExpiry, Ev::R1Expiry { amf, target, gen });
            }
            Ev::Out(pkt, handling) => {
                match handling {
                    Handling::Discovery => self.queue.schedule(now, Phase::DiscoveryDelivery, Ev::Deliver(pkt)),
                    Handling::FirstPacket => self.queue.schedule(now + h, Phase::SwitchIngress, Ev::AtProducer(pkt)),
                    Handling::Relay => self.queue.schedule(now, Phase::Delivery, Ev::Deliver(pkt)),
                };
            }
            Ev::Deliver(pkt) => self.deliver(pkt, now),
            Ev::R1Expiry { amf, target, gen } => {
                if self.r1.get(&(amf, target)).is_some_and(|r| r.2 == gen) {
                    self.r1.remove(&(amf, target));
                    self.queue
                        .schedule(now + h, Phase::ControllerNotify, Ev::Removed { amf, target, gen });
                }
            }
            Ev::Removed { amf, target, gen } => {
                if self.bindings.get(&(amf, target)).is_some_and(|b| b.1 == gen) {
                    self.bindings.remove(&(amf, target));
                }
            }
            Ev::End => {}
        }
    }

    /// Extra wait for the controller's view of `target`, querying the NRF
    /// when it has none.
    fn controller_lookup(&mut self, target: NfType, now: T) -> T {
        match self.ctl_cache.get(&target) {
            Some(&at) if at > now => at - now,
            Some(_) => T::zero(),
            None => {
                let delay = self.h + self.h;
                self.ctl_cache.insert(target, now + delay);
                let c = &mut self.counts;
                c.controller_nrf_queries += 2;
                c.emitted += 2;
                c.delivered += 2;
                delay
            }
        }
    }

    fn packet_in(&mut self, mut pkt: Pkt, handling: Handling, now: T) {
        let first = !pkt.touched;
        pkt.touched = true;
        let at;
        match handling {
            Handling::Discovery => {
                if first {
                    self.counts.nrf_bound += 1;
                }
                let delay = self.controller_lookup(pkt.target, now);
                at = now + delay + self.h;
                // The request is answered by the application itself.
                let c = &mut self.counts;
                c.delivered += 1;
                c.discovery_packets += 1;
                c.emitted += 1;
                c.app_replies += 1;
            }
            Handling::FirstPacket => {
                if first {
                    self.counts.first_packet_packet_ins += 1;
                }
                let delay = self.controller_lookup(pkt.target, now);
                at = now + delay + self.h;
                let amf = self.flows[&pkt.flow].amf;
                let key = (amf, pkt.target);
                let inst = match self.bindings.get(&key) {
                    Some(&(inst, _)) => inst,
                    None => {
                        let n = self.instances[&pkt.target];
                        let cursor = self.cursor.entry(pkt.target).or_insert(0);
                        let inst = *cursor % n;
                        *cursor = inst + 1;
                        inst
                    }
                };
                self.next_gen += 1;
                let gen = self.next_gen;
                self.bindings.insert(key, (inst, gen));
                pkt.inst = inst;
                self.queue.schedule(
                    at,
                    Phase::ControlApply,
                    Ev::Landing { amf, target: pkt.target, inst, gen },
                );
            }
            Handling::Relay => {
                if first {
                    self.counts.relayed += 1;
                }
                at = now + self.h;
            }
        }
        self.queue.schedule(at, Phase::ControlApply, Ev::Out(pkt, handling));
    }

    fn emit(&mut self, pkt: Pkt, now: T) {
        let c = &mut self.counts;
        c.emitted += 1;
        match pkt.kind {
            Kind::Discovery => c.discovery_packets += 1,
            _ => c.data_packets += 1,
        }
        let ev = match pkt.kind {
            Kind::Reply => Ev::AtProducer(pkt),
            _ => Ev::AtConsumer(pkt),
        };
        self.queue.schedule(now, Phase::SwitchIngress, ev);
    }

    fn deliver(&mut self, pkt: Pkt, now: T) {
        self.counts.delivered += 1;
        match pkt.kind {
            Kind::Request => {
                let reply = Pkt { kind: Kind::Reply, touched: false, ..pkt };
                self.emit(reply, now);
            }
            Kind::Discovery => {
                let amf = self.flows[&pkt.flow].amf;
                self.amf_cache.insert((amf, pkt.target), now);
                self.advance(pkt.flow, now);
            }
            Kind::Reply => self.advance(pkt.flow, now),
        }
    }

    fn start(&mut self, user: UserId, kind: CallFlowKind, now: T) {
        let id = self.next_flow;
        self.next_flow += 1;
        let amf = user.0 as usize % self.n_amf;
        self.flows.insert(id, Flow { user, amf, kind, pos: 0 });
        self.proceed(id, now);
    }

    fn advance(&mut self, id: u64, now: T) {
        self.flows.get_mut(&id).expect("live flow").pos += 1;
        self.proceed(id, now);
    }

    fn proceed(&mut self, id: u64, now: T) {
        loop {
            let flow = &self.flows[&id];
            let amf = flow.amf;
            let packet = |kind, target| Pkt { flow: id, kind, target, inst: 0, touched: false };
            match flow.kind.steps().get(flow.pos).copied() {
                None => {
                    let flow = self.flows.remove(&id).expect("live flow");
                    self.counts.completed_flows += 1;
                    match flow.kind {
                        CallFlowKind::Attach => self.attached.insert(flow.user),
                        CallFlowKind::Detach => self.attached.remove(&flow.user),
                    };
                    return;
                }
                Some(FlowStep::Resolve(target)) => {
                    let fresh = self
                        .amf_cache
                        .get(&(amf, target))
                        .is_some_and(|&f| now - f < self.validity);
                    if fresh {
                        self.flows.get_mut(&id).expect("live flow").pos += 1;
                        continue;
                    }
                    return self.emit(packet(Kind::Discovery, target), now);
                }
                Some(FlowStep::Exchange(exchange)) => {
                    return self.emit(packet(Kind::Request, exchange.target()), now);
                }
            }
        }
    }
}
