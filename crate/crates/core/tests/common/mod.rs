// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

pub mod flow_props;

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use proptest::prelude::*;
use scp_sdn::controller::{AuthorizationMatrix, MainEndpointRegistry, Reaction, TRANSLATION_PRIORITY};
use scp_sdn::flow_engine::{Action, Address, Endpoint, FlowRule, MatchCriteria, Packet, SwitchId};
use scp_sdn::nf_model::{CorrelationId, NfType, SbiMessage, SbiMessageKind};
use scp_sdn::scenarios::ScenarioKind;
use scp_sdn::simulator::{
    placements, run_with, NfPlacement, Population, Probe, SignalingConfig, NRF_ENDPOINT,
};

pub fn ep(host: u8, port: u16) -> Endpoint {
    Endpoint { address: Address::from_octets(10, 0, 0, host), port }
}

pub fn packet<T: Default>(src: Endpoint, dst: Endpoint, size: u32) -> Packet<T> {
    Packet {
        src,
        dst,
        message: SbiMessage::new(SbiMessageKind::AuthenticationRequest, CorrelationId(1)),
        size_bytes: size,
        created_at: T::default(),
    }
}

/// Endpoints from a small space so matches collide often.
pub fn arb_endpoint() -> impl Strategy<Value = Endpoint> {
    (1u8..5, prop::sample::select(vec![80u16, 8080])).prop_map(|(h, p)| ep(h, p))
}

pub fn arb_match() -> impl Strategy<Value = MatchCriteria> {
    (
        prop::option::of(1u8..5),
        prop::option::of(prop::sample::select(vec![80u16, 8080])),
        prop::option::of(1u8..5),
        prop::option::of(prop::sample::select(vec![80u16, 8080])),
    )
        .prop_map(|(sa, sp, da, dp)| MatchCriteria {
            src_address: sa.map(|h| Address::from_octets(10, 0, 0, h)),
            src_port: sp,
            dst_address: da.map(|h| Address::from_octets(10, 0, 0, h)),
            dst_port: dp,
        })
}

/// Records what the controller invariants are stated over.
#[derive(Default)]
pub struct InvariantProbe {
    pub placements: Vec<NfPlacement>,
    pub authorization: AuthorizationMatrix,
    pub mains: Option<MainEndpointRegistry>,
    pub violations: Vec<String>,
    pub discovery_responses: usize,
    pub translation_mods: usize,
    pub data_packet_ins: usize,
    pub first_packets: usize,
    /// Translation pairs installed per producer type.
    pub installs: BTreeMap<NfType, usize>,
    /// Producer instances that received at least one packet.
    pub served: BTreeSet<Endpoint>,
}

impl InvariantProbe {
    pub fn new(population: &Population, authorization: AuthorizationMatrix) -> Self {
        InvariantProbe {
            placements: placements(population),
            authorization,
            mains: Some(MainEndpointRegistry::allocate([NfType::Ausf, NfType::Smf, NfType::Amf])),
            ..Default::default()
        }
    }

    fn type_of(&self, e: Endpoint) -> Option<NfType> {
        self.placements.iter().find(|p| p.endpoint == e).map(|p| p.nf_type)
    }

    fn mains(&self) -> &MainEndpointRegistry {
        self.mains.as_ref().expect("constructed with new")
    }
}

impl Probe<Rational64> for InvariantProbe {
    fn on_delivery(&mut self, nf: &NfPlacement, p: &Packet<Rational64>, now: Rational64) {
        if now < p.created_at {
            self.violations.push(format!("delivery before creation: {p:?}"));
        }
        if nf.nf_type == NfType::Amf && p.src != NRF_ENDPOINT && self.mains().type_of(p.src).is_none() {
            self.violations.push(format!("consumer saw instance endpoint {}", p.src));
        }
        if matches!(nf.nf_type, NfType::Smf | NfType::Ausf) {
            self.served.insert(nf.endpoint);
        }
        if let SbiMessageKind::DiscoveryResponse { endpoints } = &p.message.kind {
            self.discovery_responses += 1;
            let ok = endpoints.len() == 1 && self.mains().type_of(endpoints[0]).is_some();
            if !ok {
                self.violations.push(format!("discovery response {endpoints:?}"));
            }
        }
    }

    fn on_packet_in(&mut self, _s: SwitchId, p: &Packet<Rational64>, r: &Reaction<Rational64>, _now: Rational64) {
        let data = !p.message.kind.is_discovery()
            && !p.message.kind.is_registration()
            && !matches!(p.message.kind, SbiMessageKind::Error(_));
        if data {
            self.data_packet_ins += 1;
        }
        if r.flow_mods() > 0 {
            self.first_packets += 1;
        }
    }

    fn on_flow_mod(&mut self, switch: SwitchId, rule: &FlowRule<Rational64>, _now: Rational64) {
        if rule.priority != TRANSLATION_PRIORITY {
            return;
        }
        self.translation_mods += 1;
        let m = rule.match_criteria;
        let dst = m.dst_address.zip(m.dst_port).map(|(address, port)| Endpoint { address, port });
        let mut endpoints: Vec<Endpoint> = Vec::new();
        if let (Some(address), Some(port)) = (m.src_address, m.src_port) {
            endpoints.push(Endpoint { address, port });
        }
        if let (Some(address), Some(port)) = (m.dst_address, m.dst_port) {
            endpoints.push(Endpoint { address, port });
        }
        for a in &rule.actions {
            if let Action::RewriteDst(e) | Action::RewriteSrc(e) = a {
                endpoints.push(*e);
            }
            if let Action::RewriteDst(e) = a {
                match self.type_of(*e) {
                    Some(t) if t != NfType::Amf && dst.is_some_and(|d| self.mains().type_of(d).is_some()) => {
                        *self.installs.entry(t).or_default() += 1;
                    }
                    _ => {}
                }
            }
        }
        endpoints.push(self.placements[switch.0 as usize].endpoint);
        let mut types: Vec<NfType> = endpoints
            .iter()
            .filter_map(|e| self.type_of(*e).or_else(|| self.mains().type_of(*e)))
            .collect();
        types.sort();
        types.dedup();
        let consumer = types.iter().copied().find(|t| *t == NfType::Amf);
        let producers: Vec<NfType> = types.into_iter().filter(|t| *t != NfType::Amf).collect();
        match (consumer, producers.as_slice()) {
            (Some(c), [p]) if self.authorization.authorize(c, *p) => {}
            _ => self.violations.push(format!("flow mod for unauthorized pair at {switch}: {rule:?}")),
        }
    }
}

/// Instances per consumer/producer-type pair the run actually bound.
pub fn pair_count(population: &Population, authorization: &AuthorizationMatrix) -> usize {
    let mut pairs = BTreeMap::new();
    for t in [NfType::Ausf, NfType::Smf] {
        if authorization.authorize(NfType::Amf, t) {
            pairs.insert(t, ());
        }
    }
    pairs.len() * population.amf.len()
}

/// A randomized reactive run for the controller invariants.
#[derive(Clone, Debug)]
pub struct ControllerCase {
    pub population: Population,
    pub allow_ausf: bool,
    pub allow_smf: bool,
    pub rate: (i64, i64),
    pub duration_s: i64,
    pub hard_timeout: Option<(i64, i64)>,
    pub validity_s: i64,
}

pub fn arb_controller_case(expiring: bool) -> impl Strategy<Value = ControllerCase> {
    let hard = if expiring {
        prop::option::of((1i64..40_000, Just(1000i64))).boxed()
    } else {
        Just(None).boxed()
    };
    (
        1usize..3,
        1usize..4,
        1usize..4,
        any::<(bool, bool)>(),
        (1i64..13, 1i64..3),
        70i64..150,
        hard,
        1i64..40,
    )
        .prop_filter("at least three producer instances", |(_, s, a, ..)| s + a >= 3)
        .prop_map(|(amf, smf, ausf, (allow_ausf, allow_smf), rate, duration_s, hard_timeout, validity_s)| {
            ControllerCase {
                population: Population::uniform(amf, smf, ausf),
                allow_ausf,
                allow_smf,
                rate,
                duration_s,
                hard_timeout,
                validity_s,
            }
        })
}

impl ControllerCase {
    pub fn authorization(&self) -> AuthorizationMatrix {
        let mut m = AuthorizationMatrix::default();
        if self.allow_ausf {
            m.allow(NfType::Amf, NfType::Ausf);
        }
        if self.allow_smf {
            m.allow(NfType::Amf, NfType::Smf);
        }
        m
    }

    pub fn config(&self) -> SignalingConfig<Rational64> {
        let mut cfg = SignalingConfig::new(
            ScenarioKind::SdnReactive,
            Rational64::new(self.rate.0, self.rate.1),
        );
        cfg.workload.sim_duration_s = Rational64::from_integer(self.duration_s);
        cfg.population = self.population.clone();
        cfg.authorization = self.authorization();
        cfg.hard_timeout_s = self.hard_timeout.map(|(n, d)| Rational64::new(n, d));
        cfg.cache_validity_s = Rational64::from_integer(self.validity_s);
        cfg
    }

    /// Runs the case and returns every invariant violation found.
    pub fn check(&self) -> Result<Vec<String>, String> {
        let cfg = self.config();
        let mut probe = InvariantProbe::new(&self.population, self.authorization());
        let m = run_with(&cfg, 0, &mut probe, None).map_err(|e| e.to_string())?;
        let mut v = probe.violations;
        if !m.counts.conserved() {
            v.push(format!("counts not conserved: {:?}", m.counts));
        }
        if self.hard_timeout.is_none() {
            // Without expiry each consumer/producer pair sends exactly one
            // data packet through the controller.
            let pairs = pair_count(&self.population, &self.authorization());
            let bound: usize = probe.installs.values().sum();
            if probe.data_packet_ins != probe.first_packets || probe.first_packets != bound || bound > pairs {
                v.push(format!(
                    "{} data packet-ins, {} first packets, {bound} bindings, {pairs} pairs",
                    probe.data_packet_ins, probe.first_packets
                ));
            }
        }
        for (t, installs) in &probe.installs {
            let k = probe.placements.iter().filter(|p| p.nf_type == *t).count();
            if *installs >= k {
                let idle = probe
                    .placements
                    .iter()
                    .filter(|p| p.nf_type == *t && !probe.served.contains(&p.endpoint))
                    .count();
                if idle > 0 {
                    v.push(format!("{idle} {t} instances unreached after {installs} bindings"));
                }
            }
        }
        Ok(v)
    }
}
