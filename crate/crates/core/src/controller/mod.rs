// SPDX-License-Identifier: Apache-2.0

//! SDN controller hosting the proxy application: delegated discovery,
//! authorization, instance selection and translation rule installation.

mod authz;
mod balance;
mod messages;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::flow_engine::{
    Action, Endpoint, FlowError, FlowRemoved, FlowRule, FlowStatsReport, MatchCriteria, Packet,
    PortId, RuleId, SwitchId,
};
use crate::nf_model::{ErrorCode, InstanceId, NfProfile, NfType, Nrf, SbiMessageKind};
use crate::scalar::Scalar;

pub use authz::{AuthorizationMatrix, MainEndpointRegistry};
pub use balance::{select_producer, LbPolicy};
pub use messages::{
    ControlMessage, Disposal, EventKind, LogRecord, PacketInClass, Reaction, Verdict,
};

pub const TRAP_PRIORITY: u16 = 1000;
pub const TRANSLATION_PRIORITY: u16 = 100;
pub const DEFAULT_OVERLOAD_THRESHOLD: u8 = 90;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControllerError {
    #[error("unknown switch {0}")]
    UnknownSwitch(SwitchId),
    #[error("switch {0} is already registered")]
    DuplicateSwitch(SwitchId),
    #[error("endpoint {0} collides with a reserved or already attached endpoint")]
    EndpointCollision(Endpoint),
    #[error("no switch hosts endpoint {0}")]
    UnknownEndpoint(Endpoint),
    #[error("main endpoint and instance endpoint must differ")]
    SameEndpoint,
    #[error("no registered instance")]
    NoInstance,
    #[error("all instances are saturated")]
    OverloadDenied,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Clone, Debug)]
pub struct ControllerConfig<T> {
    pub nrf_endpoint: Endpoint,
    pub policy: LbPolicy,
    pub overload_threshold: u8,
    pub idle_timeout: Option<T>,
    pub hard_timeout: Option<T>,
    pub authorization: AuthorizationMatrix,
    /// Types that get a main endpoint, in allocation order.
    pub producer_types: Vec<NfType>,
    /// Round trip of a controller to NRF query.
    pub nrf_query_delay: T,
}

impl<T: Scalar> ControllerConfig<T> {
    pub fn new(nrf_endpoint: Endpoint) -> Self {
        ControllerConfig {
            nrf_endpoint,
            policy: LbPolicy::RoundRobin,
            overload_threshold: DEFAULT_OVERLOAD_THRESHOLD,
            idle_timeout: None,
            hard_timeout: None,
            authorization: AuthorizationMatrix::attach_defaults(),
            producer_types: vec![NfType::Ausf, NfType::Smf, NfType::Amf],
            nrf_query_delay: T::zero(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Attached {
    nf_type: NfType,
}

#[derive(Clone, Debug)]
struct CacheEntry<T> {
    profiles: Vec<NfProfile>,
    available_at: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Binding {
    pub instance: InstanceId,
    pub endpoint: Endpoint,
    /// Consumer-side rewrite rule currently carrying the binding.
    pub rule: RuleId,
}

#[derive(Clone, Debug)]
pub struct Controller<T> {
    config: ControllerConfig<T>,
    mains: MainEndpointRegistry,
    switches: BTreeMap<SwitchId, Attached>,
    by_endpoint: BTreeMap<Endpoint, SwitchId>,
    cache: BTreeMap<NfType, CacheEntry<T>>,
    bindings: BTreeMap<(Endpoint, NfType), Binding>,
    last_bound: BTreeMap<(Endpoint, NfType), InstanceId>,
    rr_cursor: BTreeMap<NfType, usize>,
    producer_rules: BTreeMap<RuleId, InstanceId>,
    last_counts: BTreeMap<(SwitchId, RuleId), (u64, u64)>,
    observed: BTreeMap<InstanceId, (u64, u64)>,
    next_rule: u64,
    nrf_queries: u64,
    log: Vec<LogRecord<T>>,
}

impl<T: Scalar> Controller<T> {
    pub fn new(config: ControllerConfig<T>) -> Result<Self, ControllerError> {
        if MainEndpointRegistry::is_reserved(config.nrf_endpoint.address) {
            return Err(ControllerError::EndpointCollision(config.nrf_endpoint));
        }
        let mains = MainEndpointRegistry::allocate(config.producer_types.iter().copied());
        Ok(Controller {
            config,
            mains,
            switches: BTreeMap::new(),
            by_endpoint: BTreeMap::new(),
            cache: BTreeMap::new(),
            bindings: BTreeMap::new(),
            last_bound: BTreeMap::new(),
            rr_cursor: BTreeMap::new(),
            producer_rules: BTreeMap::new(),
            last_counts: BTreeMap::new(),
            observed: BTreeMap::new(),
            next_rule: 1,
            nrf_queries: 0,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &ControllerConfig<T> {
        &self.config
    }

    pub fn main_endpoints(&self) -> &MainEndpointRegistry {
        &self.mains
    }

    pub fn main_endpoint(&self, nf_type: NfType) -> Option<Endpoint> {
        self.mains.main_for(nf_type)
    }

    pub fn switch_of(&self, endpoint: Endpoint) -> Option<SwitchId> {
        self.by_endpoint.get(&endpoint).copied()
    }

    pub fn nf_type_of(&self, endpoint: Endpoint) -> Option<NfType> {
        self.switch_of(endpoint).map(|s| self.switches[&s].nf_type)
    }

    pub fn binding(&self, consumer: Endpoint, producer: NfType) -> Option<Binding> {
        self.bindings.get(&(consumer, producer)).copied()
    }

    /// Packets plus bytes seen on producer-side rules of `instance`.
    pub fn observed(&self, instance: InstanceId) -> (u64, u64) {
        self.observed.get(&instance).copied().unwrap_or((0, 0))
    }

    pub fn nrf_queries(&self) -> u64 {
        self.nrf_queries
    }

    pub fn log(&self) -> &[LogRecord<T>] {
        &self.log
    }

    /// Records the switch co-located with the NF at `endpoint`.
    pub fn add_switch(
        &mut self,
        switch: SwitchId,
        endpoint: Endpoint,
        nf_type: NfType,
    ) -> Result<(), ControllerError> {
        if self.switches.contains_key(&switch) {
            return Err(ControllerError::DuplicateSwitch(switch));
        }
        if MainEndpointRegistry::is_reserved(endpoint.address)
            || self.by_endpoint.contains_key(&endpoint)
        {
            return Err(ControllerError::EndpointCollision(endpoint));
        }
        self.switches.insert(switch, Attached { nf_type });
        self.by_endpoint.insert(endpoint, switch);
        Ok(())
    }

    fn alloc_rule(&mut self) -> RuleId {
        let id = RuleId(self.next_rule);
        self.next_rule += 1;
        id
    }

    /// The NRF trap rule for `switch`.
    pub fn bootstrap_switch(&mut self, switch: SwitchId) -> Result<Vec<ControlMessage<T>>, ControllerError> {
        if !self.switches.contains_key(&switch) {
            return Err(ControllerError::UnknownSwitch(switch));
        }
        let rule = FlowRule::new(
            self.alloc_rule(),
            TRAP_PRIORITY,
            MatchCriteria::dst(self.config.nrf_endpoint),
            vec![Action::SendToController],
        );
        Ok(vec![ControlMessage::FlowMod { switch, rule }])
    }

    fn switch_for(&self, endpoint: Endpoint) -> Result<SwitchId, ControllerError> {
        self.switch_of(endpoint)
            .ok_or(ControllerError::UnknownEndpoint(endpoint))
    }

    /// Consumer rewrite pair plus plain producer-side forwarding rules. The
    /// first returned id is the consumer-side `dst = main` rule.
    pub fn install_translation_pair(
        &mut self,
        consumer_switch: SwitchId,
        producer_switch: SwitchId,
        consumer: Endpoint,
        main: Endpoint,
        instance: Endpoint,
    ) -> Result<(Vec<ControlMessage<T>>, RuleId), ControllerError> {
        if main == instance {
            return Err(ControllerError::SameEndpoint);
        }
        for s in [consumer_switch, producer_switch] {
            if !self.switches.contains_key(&s) {
                return Err(ControllerError::UnknownSwitch(s));
            }
        }
        let (idle, hard) = (self.config.idle_timeout, self.config.hard_timeout);
        let rule = |this: &mut Self, m: MatchCriteria, actions: Vec<Action>| {
            FlowRule::new(this.alloc_rule(), TRANSLATION_PRIORITY, m, actions).with_timeouts(idle, hard)
        };
        let r1 = rule(
            self,
            MatchCriteria::dst(main),
            vec![Action::RewriteDst(instance), Action::ForwardOut(PortId::UPLINK)],
        );
        let r2 = rule(
            self,
            MatchCriteria::src(instance),
            vec![Action::RewriteSrc(main), Action::ForwardOut(PortId::LOCAL)],
        );
        let r3 = rule(
            self,
            MatchCriteria::between(consumer, instance),
            vec![Action::ForwardOut(PortId::LOCAL)],
        );
        let r4 = rule(
            self,
            MatchCriteria::between(instance, consumer),
            vec![Action::ForwardOut(PortId::UPLINK)],
        );
        let head = r1.id;
        if let Some(id) = self.instance_id_of(instance) {
            self.producer_rules.insert(r3.id, id);
            self.producer_rules.insert(r4.id, id);
        }
        Ok((
            vec![
                ControlMessage::FlowMod { switch: consumer_switch, rule: r1 },
                ControlMessage::FlowMod { switch: consumer_switch, rule: r2 },
                ControlMessage::FlowMod { switch: producer_switch, rule: r3 },
                ControlMessage::FlowMod { switch: producer_switch, rule: r4 },
            ],
            head,
        ))
    }

    fn instance_id_of(&self, endpoint: Endpoint) -> Option<InstanceId> {
        self.cache
            .values()
            .flat_map(|e| e.profiles.iter())
            .find(|p| p.endpoint == endpoint)
            .map(|p| p.instance_id)
    }

    /// Profiles of `target` from the controller cache, querying the NRF on
    /// a miss. Returns the extra wait and whether a query was issued.
    fn profiles_for(&mut self, target: NfType, now: T, nrf: &Nrf) -> (Vec<NfProfile>, T, bool) {
        if let Some(entry) = self.cache.get(&target) {
            let wait = if entry.available_at > now {
                entry.available_at - now
            } else {
                T::zero()
            };
            return (entry.profiles.clone(), wait, false);
        }
        self.nrf_queries += 1;
        let profiles = nrf.discover(target);
        let delay = self.config.nrf_query_delay;
        if !profiles.is_empty() {
            self.cache.insert(
                target,
                CacheEntry {
                    profiles: profiles.clone(),
                    available_at: now + delay,
                },
            );
        }
        (profiles, delay, true)
    }

    fn record(&mut self, now: T, kind: EventKind, switch: SwitchId, verdict: Verdict) {
        self.log.push(LogRecord { time: now, kind, switch, verdict });
    }

    fn local_delivery(&self, switch: SwitchId, packet: Packet<T>, mut actions: Vec<Action>) -> ControlMessage<T> {
        actions.push(Action::ForwardOut(PortId::LOCAL));
        ControlMessage::PacketOut { switch, packet, actions }
    }

    fn error_reply(&self, switch: SwitchId, packet: &Packet<T>, code: ErrorCode, now: T) -> ControlMessage<T> {
        let message = packet.message.reply(SbiMessageKind::Error(code));
        let reply = Packet {
            src: packet.dst,
            dst: packet.src,
            size_bytes: message.kind.nominal_size(),
            message,
            created_at: now,
        };
        self.local_delivery(switch, reply, Vec::new())
    }

    fn deny(&mut self, switch: SwitchId, packet: &Packet<T>, class: PacketInClass, code: ErrorCode, now: T) -> Reaction<T> {
        self.record(now, EventKind::PacketIn, switch, Verdict::Denied(code));
        let out = self.error_reply(switch, packet, code, now);
        Reaction {
            class,
            disposal: Disposal::Denied(code),
            messages: vec![out],
            delay: T::zero(),
            nrf_query: false,
        }
    }

    /// Reacts to a table miss or trapped packet at `switch`.
    pub fn handle_packet_in(
        &mut self,
        switch: SwitchId,
        packet: Packet<T>,
        now: T,
        nrf: &Nrf,
    ) -> Result<Reaction<T>, ControllerError> {
        if !self.switches.contains_key(&switch) {
            return Err(ControllerError::UnknownSwitch(switch));
        }
        if packet.dst == self.config.nrf_endpoint {
            return self.handle_nrf_bound(switch, packet, now, nrf);
        }
        if self.mains.type_of(packet.dst).is_some() {
            return self.handle_first_packet(switch, packet, now, nrf);
        }
        let class = if packet.src == self.config.nrf_endpoint {
            PacketInClass::FromNrf
        } else {
            PacketInClass::MidPath
        };
        let Some(dst_switch) = self.switch_of(packet.dst) else {
            return Ok(self.deny(switch, &packet, PacketInClass::Unroutable, ErrorCode::NotFound, now));
        };
        // Replies from an instance are shown to the consumer as coming from
        // the main endpoint.
        let rewrite = match (self.nf_type_of(packet.src), self.nf_type_of(packet.dst)) {
            (Some(producer), Some(consumer))
                if class == PacketInClass::MidPath
                    && self.config.authorization.authorize(consumer, producer) =>
            {
                self.mains.main_for(producer).map(Action::RewriteSrc)
            }
            _ => None,
        };
        let out = self.local_delivery(dst_switch, packet, rewrite.into_iter().collect());
        self.record(now, EventKind::PacketIn, switch, Verdict::Relayed);
        Ok(Reaction {
            class,
            disposal: Disposal::Forwarded,
            messages: vec![out],
            delay: T::zero(),
            nrf_query: false,
        })
    }

    /// Registration relays and delegated discovery.
    pub fn handle_nrf_bound(
        &mut self,
        switch: SwitchId,
        packet: Packet<T>,
        now: T,
        nrf: &Nrf,
    ) -> Result<Reaction<T>, ControllerError> {
        let class = PacketInClass::NrfBound;
        match packet.message.kind.clone() {
            SbiMessageKind::DiscoveryRequest { target } => {
                let allowed = self
                    .nf_type_of(packet.src)
                    .is_some_and(|c| self.config.authorization.authorize(c, target));
                if !allowed {
                    return Ok(self.deny(switch, &packet, class, ErrorCode::Unauthorized, now));
                }
                let (profiles, delay, queried) = self.profiles_for(target, now, nrf);
                let main = self.mains.main_for(target);
                let (Some(main), false) = (main, profiles.is_empty()) else {
                    let mut r = self.deny(switch, &packet, class, ErrorCode::NotFound, now);
                    r.delay = delay;
                    r.nrf_query = queried;
                    return Ok(r);
                };
                let message = packet.message.reply(SbiMessageKind::DiscoveryResponse {
                    endpoints: vec![main],
                });
                let reply = Packet {
                    src: packet.dst,
                    dst: packet.src,
                    size_bytes: message.kind.nominal_size(),
                    message,
                    created_at: now,
                };
                self.record(now, EventKind::PacketIn, switch, Verdict::Answered);
                Ok(Reaction {
                    class,
                    disposal: Disposal::Answered,
                    messages: vec![self.local_delivery(switch, reply, Vec::new())],
                    delay,
                    nrf_query: queried,
                })
            }
            kind => {
                match &kind {
                    SbiMessageKind::Register(profile) => self.observe_registration(profile),
                    SbiMessageKind::Deregister(id) => self.observe_deregistration(*id),
                    _ => {}
                }
                let nrf_switch = self.switch_for(self.config.nrf_endpoint)?;
                let out = self.local_delivery(nrf_switch, packet, Vec::new());
                self.record(now, EventKind::PacketIn, switch, Verdict::Relayed);
                Ok(Reaction {
                    class,
                    disposal: Disposal::Forwarded,
                    messages: vec![out],
                    delay: T::zero(),
                    nrf_query: false,
                })
            }
        }
    }

    fn observe_registration(&mut self, profile: &NfProfile) {
        if let Some(entry) = self.cache.get_mut(&profile.nf_type) {
            match entry.profiles.iter_mut().find(|p| p.instance_id == profile.instance_id) {
                Some(p) => *p = profile.clone(),
                None => entry.profiles.push(profile.clone()),
            }
        }
    }

    fn observe_deregistration(&mut self, id: InstanceId) {
        for entry in self.cache.values_mut() {
            entry.profiles.retain(|p| p.instance_id != id);
        }
    }

    fn handle_first_packet(
        &mut self,
        switch: SwitchId,
        packet: Packet<T>,
        now: T,
        nrf: &Nrf,
    ) -> Result<Reaction<T>, ControllerError> {
        let class = PacketInClass::FirstPacket;
        let producer_type = self.mains.type_of(packet.dst).expect("checked by caller");
        let consumer = packet.src;
        let allowed = self
            .nf_type_of(consumer)
            .is_some_and(|c| self.config.authorization.authorize(c, producer_type));
        if !allowed {
            return Ok(self.deny(switch, &packet, class, ErrorCode::Unauthorized, now));
        }
        let key = (consumer, producer_type);
        let (profiles, delay, queried) = self.profiles_for(producer_type, now, nrf);
        let threshold = self.config.overload_threshold;
        let current = self.bindings.get(&key).map(|b| b.instance);
        let wanted = current.or_else(|| {
            packet
                .message
                .binding_required
                .then(|| self.last_bound.get(&key).copied())
                .flatten()
        });
        let pinned = wanted.and_then(|id| {
            profiles
                .iter()
                .find(|p| p.instance_id == id && p.load < threshold)
                .cloned()
        });
        let chosen = match pinned {
            Some(p) => Ok(p),
            None => {
                let observed: BTreeMap<InstanceId, u64> =
                    self.observed.iter().map(|(k, v)| (*k, v.1)).collect();
                let cursor = self.rr_cursor.entry(producer_type).or_insert(0);
                select_producer(&profiles, self.config.policy, threshold, cursor, &observed)
            }
        };
        let instance = match chosen {
            Ok(p) => p,
            Err(e) => {
                let code = match e {
                    ControllerError::OverloadDenied => ErrorCode::Overloaded,
                    _ => ErrorCode::NotFound,
                };
                let mut r = self.deny(switch, &packet, class, code, now);
                r.delay = delay;
                r.nrf_query = queried;
                return Ok(r);
            }
        };
        let producer_switch = self.switch_for(instance.endpoint)?;
        let (mut messages, head) = self.install_translation_pair(
            switch,
            producer_switch,
            consumer,
            packet.dst,
            instance.endpoint,
        )?;
        self.bindings.insert(
            key,
            Binding {
                instance: instance.instance_id,
                endpoint: instance.endpoint,
                rule: head,
            },
        );
        self.last_bound.insert(key, instance.instance_id);
        messages.push(ControlMessage::PacketOut {
            switch,
            packet,
            actions: vec![
                Action::RewriteDst(instance.endpoint),
                Action::ForwardOut(PortId::UPLINK),
            ],
        });
        self.record(
            now,
            EventKind::PacketIn,
            switch,
            Verdict::Installed {
                instance: instance.instance_id,
                rule: head,
            },
        );
        Ok(Reaction {
            class,
            disposal: Disposal::Forwarded,
            messages,
            delay,
            nrf_query: queried,
        })
    }

    /// Drops the binding whose current consumer-side rule was removed.
    /// Anything else, including repeats, is ignored.
    pub fn handle_flow_removed(&mut self, removed: &FlowRemoved<T>, now: T) {
        let key = self
            .bindings
            .iter()
            .find(|(_, b)| b.rule == removed.rule_id)
            .map(|(k, _)| *k);
        let verdict = match key {
            Some(k) => {
                self.bindings.remove(&k);
                Verdict::Accounted
            }
            None => Verdict::Ignored,
        };
        self.producer_rules.remove(&removed.rule_id);
        self.record(now, EventKind::FlowRemoved, removed.switch_id, verdict);
    }

    /// Accumulates per-instance traffic from producer-side rule counters.
    pub fn handle_stats(&mut self, report: &FlowStatsReport<T>, now: T) {
        for entry in &report.entries {
            let Some(&instance) = self.producer_rules.get(&entry.rule_id) else {
                continue;
            };
            let key = (report.switch_id, entry.rule_id);
            let (p0, b0) = self.last_counts.get(&key).copied().unwrap_or((0, 0));
            let dp = entry.packet_count.saturating_sub(p0);
            let db = entry.byte_count.saturating_sub(b0);
            self.last_counts.insert(key, (entry.packet_count, entry.byte_count));
            if dp > 0 || db > 0 {
                let total = self.observed.entry(instance).or_insert((0, 0));
                total.0 += dp;
                total.1 += db;
            }
        }
        self.record(now, EventKind::Stats, report.switch_id, Verdict::Accounted);
    }
}
