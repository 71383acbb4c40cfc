// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use crate::controller::{
    ControlMessage, Controller, ControllerConfig, Disposal, PacketInClass, Reaction,
};
use crate::flow_engine::{
    apply_actions, Action, Disposition, Endpoint, FlowRule, FlowTable, Packet, PortId,
    StatsCollector, StatsTrigger, SwitchId,
};
use crate::nf_model::{
    CallFlowKind, ConsumerCache, CorrelationId, FlowCursor, FlowStep, NfProfile, NfType, Nrf,
    SbiMessage, SbiMessageKind, UserId, InstanceId,
};
use crate::scalar::Scalar;
use crate::scenarios::ScenarioKind;

use super::{
    generate_workload, placements, Counts, EventQueue, Metrics, NfPlacement, Phase,
    SignalingConfig, SimError, WorkloadEvent, NRF_ENDPOINT,
};

/// Observer of simulator internals. All methods default to no-ops.
pub trait Probe<T> {
    fn on_delivery(&mut self, _nf: &NfPlacement, _packet: &Packet<T>, _now: T) {}
    fn on_packet_in(&mut self, _switch: SwitchId, _packet: &Packet<T>, _reaction: &Reaction<T>, _now: T) {}
    fn on_flow_mod(&mut self, _switch: SwitchId, _rule: &FlowRule<T>, _now: T) {}
}

impl<T> Probe<T> for () {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Data,
    Discovery,
    Registration,
}

#[derive(Clone, Debug)]
struct InFlight<T> {
    packet: Packet<T>,
    class: Class,
    flow: Option<u64>,
    touched: bool,
}

enum Ev<T> {
    Workload(WorkloadEvent),
    Register(usize),
    Ingress { switch: SwitchId, pkt: InFlight<T> },
    PacketIn { switch: SwitchId, pkt: InFlight<T> },
    FlowMod { switch: SwitchId, rule: FlowRule<T> },
    PacketOut { switch: SwitchId, pkt: InFlight<T>, actions: Vec<Action> },
    Notify(ControlMessage<T>),
    Deliver { nf: usize, pkt: InFlight<T> },
    ExpiryCheck(SwitchId),
    StatsTick(SwitchId),
    End,
}

struct Flow<T> {
    user: UserId,
    amf: usize,
    cursor: FlowCursor,
    latencies: Vec<f64>,
    _started: T,
}

struct Sim<'a, T, P> {
    cfg: &'a SignalingConfig<T>,
    probe: &'a mut P,
    trace: Option<&'a mut Vec<String>>,
    queue: EventQueue<T, Ev<T>>,
    nfs: Vec<NfPlacement>,
    by_endpoint: BTreeMap<Endpoint, usize>,
    caches: BTreeMap<usize, ConsumerCache<T>>,
    amfs: Vec<usize>,
    nrf: Nrf,
    controller: Option<Controller<T>>,
    tables: Vec<FlowTable<T>>,
    collectors: Vec<StatsCollector<T>>,
    pending_checks: Vec<Vec<T>>,
    flows: BTreeMap<u64, Flow<T>>,
    next_flow: u64,
    next_corr: u64,
    attached: BTreeSet<UserId>,
    counts: Counts,
    latencies: Vec<f64>,
    end: T,
}

/// Runs the signaling workload and returns its metrics.
pub fn run<T: Scalar>(config: &SignalingConfig<T>, seed: u64) -> Result<Metrics, SimError> {
    run_with(config, seed, &mut (), None)
}

/// As [`run`], reporting internals to `probe` and optionally appending one
/// line per event to `trace`.
pub fn run_with<T: Scalar, P: Probe<T>>(
    config: &SignalingConfig<T>,
    seed: u64,
    probe: &mut P,
    trace: Option<&mut Vec<String>>,
) -> Result<Metrics, SimError> {
    config.validate()?;
    let workload = generate_workload(&config.workload, seed)?;
    let mut sim = Sim::new(config, probe, trace)?;
    for (t, ev) in workload {
        sim.queue.schedule(config.warmup_s + t, Phase::Delivery, Ev::Workload(ev));
    }
    sim.queue.schedule(sim.end, Phase::End, Ev::End);
    sim.run()
}

impl<'a, T: Scalar, P: Probe<T>> Sim<'a, T, P> {
    fn new(
        cfg: &'a SignalingConfig<T>,
        probe: &'a mut P,
        trace: Option<&'a mut Vec<String>>,
    ) -> Result<Self, SimError> {
        let nfs = placements(&cfg.population);
        let reactive = cfg.scenario == ScenarioKind::SdnReactive;
        let mut controller = None;
        let mut tables = Vec::new();
        let mut collectors = Vec::new();
        if reactive {
            let mut cc = ControllerConfig::new(NRF_ENDPOINT);
            cc.policy = cfg.policy;
            cc.overload_threshold = cfg.overload_threshold;
            cc.idle_timeout = cfg.idle_timeout_s;
            cc.hard_timeout = cfg.hard_timeout_s;
            cc.authorization = cfg.authorization.clone();
            cc.nrf_query_delay = cfg.hop_latency_s + cfg.hop_latency_s;
            let mut ctl = Controller::new(cc)?;
            for nf in &nfs {
                ctl.add_switch(nf.switch, nf.endpoint, nf.nf_type)?;
                tables.push(FlowTable::for_nf(nf.switch, nf.endpoint));
                if let Some(trigger) = cfg.stats {
                    collectors.push(StatsCollector::new(trigger, T::zero()));
                }
            }
            controller = Some(ctl);
        }
        let mut sim = Sim {
            cfg,
            probe,
            trace,
            queue: EventQueue::new(),
            by_endpoint: nfs.iter().enumerate().map(|(i, nf)| (nf.endpoint, i)).collect(),
            caches: BTreeMap::new(),
            amfs: Vec::new(),
            nrf: Nrf::new(NRF_ENDPOINT),
            controller,
            pending_checks: vec![Vec::new(); tables.len()],
            tables,
            collectors,
            flows: BTreeMap::new(),
            next_flow: 0,
            next_corr: 0,
            attached: BTreeSet::new(),
            counts: Counts::default(),
            latencies: Vec::new(),
            end: cfg.warmup_s + cfg.workload.sim_duration_s,
            nfs,
        };
        for (i, nf) in sim.nfs.iter().enumerate() {
            if nf.nf_type == NfType::Amf {
                sim.amfs.push(i);
                sim.caches.insert(i, ConsumerCache::new(cfg.cache_validity_s));
            }
        }
        if let Some(ctl) = sim.controller.as_mut() {
            // Switches come up configured.
            for nf in &sim.nfs {
                for msg in ctl.bootstrap_switch(nf.switch)? {
                    if let ControlMessage::FlowMod { switch, rule } = msg {
                        sim.tables[switch.0 as usize].install_rule(rule, T::zero())?;
                    }
                }
            }
        }
        if let Some(StatsTrigger::Periodic(interval)) = cfg.stats.filter(|_| reactive) {
            for nf in &sim.nfs {
                sim.queue.schedule(interval, Phase::RuleExpiry, Ev::StatsTick(nf.switch));
            }
        }
        for i in 0..sim.nfs.len() {
            if sim.nfs[i].nf_type != NfType::Nrf {
                sim.queue.schedule(T::zero(), Phase::Delivery, Ev::Register(i));
            }
        }
        Ok(sim)
    }

    fn h(&self) -> T {
        self.cfg.hop_latency_s
    }

    fn log(&mut self, now: T, kind: &str, detail: impl FnOnce() -> String) {
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(format!("{}\t{kind}\t{}", now.to_f64_lossy(), detail()));
        }
    }

    fn run(mut self) -> Result<Metrics, SimError> {
        while let Some((now, _, ev)) = self.queue.pop() {
            if let Ev::End = ev {
                self.log(now, "end", String::new);
                break;
            }
            self.dispatch(now, ev)?;
        }
        let c = &mut self.counts;
        c.in_flight = c.emitted - c.delivered - c.dropped;
        Ok(Metrics {
            counts: self.counts,
            latencies_s: self.latencies,
            duration_s: self.cfg.workload.sim_duration_s.to_f64_lossy(),
        })
    }

    fn dispatch(&mut self, now: T, ev: Ev<T>) -> Result<(), SimError> {
        match ev {
            Ev::Workload(WorkloadEvent::Attach(user)) => self.start_flow(user, CallFlowKind::Attach, now),
            Ev::Workload(WorkloadEvent::Detach(user)) => {
                if self.attached.contains(&user) {
                    self.start_flow(user, CallFlowKind::Detach, now)
                } else {
                    Ok(())
                }
            }
            Ev::Register(i) => {
                let nf = self.nfs[i];
                let profile = NfProfile::new(
                    InstanceId(nf.switch.0),
                    nf.nf_type,
                    nf.endpoint,
                    nf.load,
                    100,
                )?;
                let msg = SbiMessage::new(SbiMessageKind::Register(profile), self.corr());
                self.emit(i, NRF_ENDPOINT, msg, Class::Registration, None, now)
            }
            Ev::Ingress { switch, pkt } => self.ingress(switch, pkt, now),
            Ev::PacketIn { switch, pkt } => self.packet_in(switch, pkt, now),
            Ev::FlowMod { switch, rule } => {
                self.probe.on_flow_mod(switch, &rule, now);
                self.log(now, "flow_mod", || format!("{switch} rule {}", rule.id));
                let id = self.tables[switch.0 as usize].install_rule(rule, now)?;
                if let Some(d) = self.tables[switch.0 as usize].rule(id).and_then(|r| r.deadline()) {
                    self.schedule_check(switch, d);
                }
                Ok(())
            }
            Ev::PacketOut { switch, pkt, actions } => {
                let InFlight { packet, class, flow, touched } = pkt;
                let (packet, disposition) = apply_actions(packet, &actions)?;
                let pkt = InFlight { packet, class, flow, touched };
                self.forward(switch, pkt, disposition, now);
                Ok(())
            }
            Ev::Notify(msg) => {
                let ctl = self.controller.as_mut().expect("reactive mode");
                match &msg {
                    ControlMessage::FlowRemoved(fr) => ctl.handle_flow_removed(fr, now),
                    ControlMessage::StatsIn(report) => ctl.handle_stats(report, now),
                    _ => {}
                }
                Ok(())
            }
            Ev::Deliver { nf, pkt } => self.deliver(nf, pkt, now),
            Ev::ExpiryCheck(switch) => {
                let s = switch.0 as usize;
                self.pending_checks[s].retain(|t| *t != now);
                self.expire(switch, now);
                if let Some(d) = self.tables[s].next_expiry() {
                    self.schedule_check(switch, d);
                }
                Ok(())
            }
            Ev::StatsTick(switch) => {
                let s = switch.0 as usize;
                let reports = self.collectors[s].on_tick(&self.tables[s], now);
                let h = self.h();
                for report in reports {
                    self.queue.schedule(now + h, Phase::ControllerNotify, Ev::Notify(ControlMessage::StatsIn(report)));
                }
                if let Some(next) = self.collectors[s].next_tick().filter(|t| *t <= self.end) {
                    self.queue.schedule(next, Phase::RuleExpiry, Ev::StatsTick(switch));
                }
                Ok(())
            }
            Ev::End => Ok(()),
        }
    }

    fn corr(&mut self) -> CorrelationId {
        self.next_corr += 1;
        CorrelationId(self.next_corr)
    }

    fn schedule_check(&mut self, switch: SwitchId, at: T) {
        let pending = &mut self.pending_checks[switch.0 as usize];
        if !pending.contains(&at) {
            pending.push(at);
            self.queue.schedule(at, Phase::RuleExpiry, Ev::ExpiryCheck(switch));
        }
    }

    fn expire(&mut self, switch: SwitchId, now: T) {
        let removed = self.tables[switch.0 as usize].expire_rules(now);
        let h = self.h();
        for fr in removed {
            self.log(now, "flow_removed", || format!("{switch} rule {}", fr.rule_id));
            self.queue.schedule(now + h, Phase::ControllerNotify, Ev::Notify(ControlMessage::FlowRemoved(fr)));
        }
    }

    fn count_class(&mut self, class: Class) {
        let c = &mut self.counts;
        match class {
            Class::Data => c.data_packets += 1,
            Class::Discovery => c.discovery_packets += 1,
            Class::Registration => c.registration_packets += 1,
        }
        c.emitted += 1;
    }

    /// NF `from` sends a new packet.
    fn emit(
        &mut self,
        from: usize,
        dst: Endpoint,
        message: SbiMessage,
        class: Class,
        flow: Option<u64>,
        now: T,
    ) -> Result<(), SimError> {
        self.count_class(class);
        let src = self.nfs[from].endpoint;
        let packet = Packet {
            src,
            dst,
            size_bytes: message.kind.nominal_size(),
            message,
            created_at: now,
        };
        let pkt = InFlight { packet, class, flow, touched: false };
        if self.controller.is_some() {
            let switch = self.nfs[from].switch;
            self.queue.schedule(now, Phase::SwitchIngress, Ev::Ingress { switch, pkt });
        } else {
            self.transparent(pkt, now);
        }
        Ok(())
    }

    /// Non-reactive scenarios: fixed transit with scenario-specific
    /// detours through the application.
    fn transparent(&mut self, pkt: InFlight<T>, now: T) {
        let Some(&to) = self.by_endpoint.get(&pkt.packet.dst) else {
            self.counts.dropped += 1;
            return;
        };
        let is_amf = |e: &Endpoint| self.by_endpoint.get(e).is_some_and(|&i| self.nfs[i].nf_type == NfType::Amf);
        let consumer_side = is_amf(&pkt.packet.src) || is_amf(&pkt.packet.dst);
        let (hops, through) = match self.cfg.scenario {
            ScenarioKind::Direct | ScenarioKind::ScpColocated | ScenarioKind::SdnProactive => (1, false),
            ScenarioKind::ScpIndependent => (2, false),
            ScenarioKind::SdnConsumerForwarded => (if consumer_side { 3 } else { 1 }, consumer_side),
            ScenarioKind::SdnBothForwarded | ScenarioKind::SdnReactive => (5, true),
        };
        if through {
            self.counts.relayed += 1;
        }
        let at = now + self.h() * T::from_count(hops);
        let phase = delivery_phase(&pkt.packet);
        self.queue.schedule(at, phase, Ev::Deliver { nf: to, pkt });
    }

    fn ingress(&mut self, switch: SwitchId, pkt: InFlight<T>, now: T) -> Result<(), SimError> {
        self.expire(switch, now);
        let s = switch.0 as usize;
        let (_, out) = self.tables[s].process(&pkt.packet, now);
        if let Some(collector) = self.collectors.get_mut(s) {
            if let Some(report) = collector.after_match(&self.tables[s], now) {
                let h = self.h();
                self.queue.schedule(now + h, Phase::ControllerNotify, Ev::Notify(ControlMessage::StatsIn(report)));
            }
        }
        let InFlight { class, flow, touched, .. } = pkt;
        match out {
            None | Some((_, Disposition::ToController)) => {
                self.log(now, "packet_in", || format!("{switch} {} -> {}", pkt.packet.src, pkt.packet.dst));
                let h = self.h();
                self.queue.schedule(now + h, Phase::ControllerPacketIn, Ev::PacketIn { switch, pkt });
            }
            Some((packet, disposition)) => {
                self.forward(switch, InFlight { packet, class, flow, touched }, disposition, now);
            }
        }
        Ok(())
    }

    fn forward(&mut self, switch: SwitchId, pkt: InFlight<T>, disposition: Disposition, now: T) {
        match disposition {
            Disposition::Forward(PortId::LOCAL) => {
                let nf = switch.0 as usize;
                let phase = delivery_phase(&pkt.packet);
                self.queue.schedule(now, phase, Ev::Deliver { nf, pkt });
            }
            Disposition::Forward(_) => match self.by_endpoint.get(&pkt.packet.dst) {
                Some(&to) => {
                    let switch = self.nfs[to].switch;
                    let h = self.h();
                    self.queue.schedule(now + h, Phase::SwitchIngress, Ev::Ingress { switch, pkt });
                }
                None => self.counts.dropped += 1,
            },
            Disposition::ToController | Disposition::Drop => self.counts.dropped += 1,
        }
    }

    fn packet_in(&mut self, switch: SwitchId, mut pkt: InFlight<T>, now: T) -> Result<(), SimError> {
        let ctl = self.controller.as_mut().expect("reactive mode");
        let reaction = ctl.handle_packet_in(switch, pkt.packet.clone(), now, &self.nrf)?;
        self.probe.on_packet_in(switch, &pkt.packet, &reaction, now);
        let c = &mut self.counts;
        if !pkt.touched {
            pkt.touched = true;
            match reaction.class {
                PacketInClass::NrfBound => c.nrf_bound += 1,
                PacketInClass::FirstPacket => c.first_packet_packet_ins += 1,
                _ => c.relayed += 1,
            }
        }
        if reaction.nrf_query {
            c.controller_nrf_queries += 2;
            c.emitted += 2;
            c.delivered += 2;
        }
        let generated = match reaction.disposal {
            Disposal::Forwarded => false,
            Disposal::Answered => {
                c.delivered += 1;
                true
            }
            Disposal::Denied(_) => {
                c.dropped += 1;
                true
            }
        };
        let at = now + reaction.delay + self.h();
        let mut original = Some(pkt);
        for msg in reaction.messages {
            match msg {
                ControlMessage::FlowMod { switch, rule } => {
                    self.queue.schedule(at, Phase::ControlApply, Ev::FlowMod { switch, rule });
                }
                ControlMessage::PacketOut { switch, packet, actions } => {
                    let pkt = if generated {
                        let src = original.as_ref().expect("one packet out per reaction");
                        let class = if src.class == Class::Discovery || packet.message.kind.is_discovery() {
                            Class::Discovery
                        } else {
                            src.class
                        };
                        let flow = src.flow;
                        self.count_class(class);
                        self.counts.app_replies += 1;
                        InFlight { packet, class, flow, touched: true }
                    } else {
                        let mut pkt = original.take().expect("one packet out per reaction");
                        pkt.packet = packet;
                        pkt
                    };
                    self.queue.schedule(at, Phase::ControlApply, Ev::PacketOut { switch, pkt, actions });
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn deliver(&mut self, nf: usize, pkt: InFlight<T>, now: T) -> Result<(), SimError> {
        self.counts.delivered += 1;
        let place = self.nfs[nf];
        self.probe.on_delivery(&place, &pkt.packet, now);
        self.log(now, "deliver", || format!("{} {:?}", place.endpoint, pkt.packet.message.kind));
        let latency = (now - pkt.packet.created_at).to_f64_lossy();
        if let Some(flow) = pkt.flow.and_then(|f| self.flows.get_mut(&f)) {
            flow.latencies.push(latency);
        }
        let message = &pkt.packet.message;
        match place.nf_type {
            NfType::Nrf => {
                let reply = match &message.kind {
                    SbiMessageKind::Register(profile) => {
                        self.nrf.register(profile.clone())?;
                        Some((SbiMessageKind::RegistrationAck, Class::Registration))
                    }
                    SbiMessageKind::Deregister(id) => {
                        self.nrf.deregister(*id)?;
                        Some((SbiMessageKind::RegistrationAck, Class::Registration))
                    }
                    SbiMessageKind::DiscoveryRequest { target } => {
                        let endpoints: Vec<_> = self.nrf.discover(*target).iter().map(|p| p.endpoint).collect();
                        let kind = if endpoints.is_empty() {
                            SbiMessageKind::Error(crate::nf_model::ErrorCode::NotFound)
                        } else {
                            SbiMessageKind::DiscoveryResponse { endpoints }
                        };
                        Some((kind, Class::Discovery))
                    }
                    _ => None,
                };
                if let Some((kind, class)) = reply {
                    let msg = message.reply(kind);
                    self.emit(nf, pkt.packet.src, msg, class, pkt.flow, now)?;
                }
            }
            NfType::Amf => self.amf_receive(nf, pkt, now)?,
            _ => {
                if let Some(kind) = message.kind.data_response() {
                    let msg = message.reply(kind);
                    self.emit(nf, pkt.packet.src, msg, Class::Data, pkt.flow, now)?;
                }
            }
        }
        Ok(())
    }

    fn amf_receive(&mut self, nf: usize, pkt: InFlight<T>, now: T) -> Result<(), SimError> {
        let Some(id) = pkt.flow else { return Ok(()) };
        if !self.flows.contains_key(&id) {
            return Ok(());
        }
        match &pkt.packet.message.kind {
            SbiMessageKind::DiscoveryResponse { endpoints } => {
                let flow = self.flows.get_mut(&id).expect("checked");
                let Some(FlowStep::Resolve(target)) = flow.cursor.current() else {
                    return Ok(());
                };
                let ep = endpoints[0];
                self.caches.get_mut(&nf).expect("AMF cache").store(target, ep, now);
                flow.cursor.bind(target, ep);
                flow.cursor.advance();
                self.continue_flow(id, now)
            }
            SbiMessageKind::Error(_) => {
                self.flows.remove(&id);
                self.counts.failed_flows += 1;
                Ok(())
            }
            kind if kind.data_response().is_none() && !kind.is_registration() => {
                let flow = self.flows.get_mut(&id).expect("checked");
                flow.cursor.advance();
                self.continue_flow(id, now)
            }
            _ => Ok(()),
        }
    }

    fn start_flow(&mut self, user: UserId, kind: CallFlowKind, now: T) -> Result<(), SimError> {
        let id = self.next_flow;
        self.next_flow += 1;
        let amf = self.amfs[user.0 as usize % self.amfs.len()];
        self.log(now, "flow_start", || format!("{user} {kind:?}"));
        self.flows.insert(
            id,
            Flow {
                user,
                amf,
                cursor: FlowCursor::new(kind),
                latencies: Vec::new(),
                _started: now,
            },
        );
        self.continue_flow(id, now)
    }

    fn continue_flow(&mut self, id: u64, now: T) -> Result<(), SimError> {
        loop {
            let flow = self.flows.get_mut(&id).expect("live flow");
            let amf = flow.amf;
            match flow.cursor.current() {
                None => {
                    let flow = self.flows.remove(&id).expect("live flow");
                    self.counts.completed_flows += 1;
                    self.latencies.extend(flow.latencies);
                    match flow.cursor.kind() {
                        CallFlowKind::Attach => self.attached.insert(flow.user),
                        CallFlowKind::Detach => self.attached.remove(&flow.user),
                    };
                    return Ok(());
                }
                Some(FlowStep::Resolve(target)) => {
                    if let Some(ep) = self.caches[&amf].lookup(target, now) {
                        flow.cursor.bind(target, ep);
                        flow.cursor.advance();
                        continue;
                    }
                    let msg = SbiMessage::new(SbiMessageKind::DiscoveryRequest { target }, self.corr());
                    return self.emit(amf, NRF_ENDPOINT, msg, Class::Discovery, Some(id), now);
                }
                Some(FlowStep::Exchange(exchange)) => {
                    let dst = flow.cursor.endpoint_for(exchange.target()).expect("resolved");
                    let mut msg = SbiMessage::new(exchange.request(), self.corr());
                    msg.binding_required = self.cfg.binding_required;
                    return self.emit(amf, dst, msg, Class::Data, Some(id), now);
                }
            }
        }
    }
}

fn delivery_phase<T>(packet: &Packet<T>) -> Phase {
    match packet.message.kind {
        SbiMessageKind::DiscoveryResponse { .. } => Phase::DiscoveryDelivery,
        _ => Phase::Delivery,
    }
}
