// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow_engine::{Endpoint, Packet};
use crate::scalar::Scalar;

use super::{CorrelationId, ErrorCode, NfType, Nrf, SbiMessage, SbiMessageKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ue{}", self.0)
    }
}

/// Discovery results held by a consumer NF. An entry is usable while
/// `now - fetched_at < validity`.
#[derive(Clone, Debug)]
pub struct ConsumerCache<T> {
    validity: T,
    entries: BTreeMap<NfType, (Endpoint, T)>,
}

impl<T: Scalar> ConsumerCache<T> {
    pub fn new(validity: T) -> Self {
        ConsumerCache {
            validity,
            entries: BTreeMap::new(),
        }
    }

    pub fn validity(&self) -> T {
        self.validity
    }

    pub fn lookup(&self, target: NfType, now: T) -> Option<Endpoint> {
        self.entries
            .get(&target)
            .filter(|(_, fetched_at)| now - *fetched_at < self.validity)
            .map(|(ep, _)| *ep)
    }

    pub fn store(&mut self, target: NfType, endpoint: Endpoint, now: T) {
        self.entries.insert(target, (endpoint, now));
    }

    pub fn fetched_at(&self, target: NfType) -> Option<T> {
        self.entries.get(&target).map(|(_, t)| *t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CallFlowKind {
    Attach,
    Detach,
}

/// One request/response pair between the AMF and a producer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExchangeKind {
    Authentication,
    LocationUpdate,
    Session,
    ModifyBearer,
    Detach,
}

impl ExchangeKind {
    pub fn target(self) -> NfType {
        match self {
            ExchangeKind::Authentication | ExchangeKind::LocationUpdate => NfType::Ausf,
            ExchangeKind::Session | ExchangeKind::ModifyBearer | ExchangeKind::Detach => NfType::Smf,
        }
    }

    pub fn request(self) -> SbiMessageKind {
        match self {
            ExchangeKind::Authentication => SbiMessageKind::AuthenticationRequest,
            ExchangeKind::LocationUpdate => SbiMessageKind::LocationUpdateRequest,
            ExchangeKind::Session => SbiMessageKind::SessionRequest,
            ExchangeKind::ModifyBearer => SbiMessageKind::ModifyBearerRequest,
            ExchangeKind::Detach => SbiMessageKind::DetachRequest,
        }
    }

    pub fn response(self) -> SbiMessageKind {
        self.request()
            .data_response()
            .expect("every exchange request has a response kind")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowStep {
    Resolve(NfType),
    Exchange(ExchangeKind),
}

const ATTACH_STEPS: [FlowStep; 6] = [
    FlowStep::Resolve(NfType::Ausf),
    FlowStep::Exchange(ExchangeKind::Authentication),
    FlowStep::Exchange(ExchangeKind::LocationUpdate),
    FlowStep::Resolve(NfType::Smf),
    FlowStep::Exchange(ExchangeKind::Session),
    FlowStep::Exchange(ExchangeKind::ModifyBearer),
];

const DETACH_STEPS: [FlowStep; 2] = [
    FlowStep::Resolve(NfType::Smf),
    FlowStep::Exchange(ExchangeKind::Detach),
];

impl CallFlowKind {
    pub fn steps(self) -> &'static [FlowStep] {
        match self {
            CallFlowKind::Attach => &ATTACH_STEPS,
            CallFlowKind::Detach => &DETACH_STEPS,
        }
    }

    /// Data messages of a completed flow (requests plus responses).
    pub fn data_messages(self) -> usize {
        2 * self
            .steps()
            .iter()
            .filter(|s| matches!(s, FlowStep::Exchange(_)))
            .count()
    }
}

/// Position within a call flow plus the endpoints resolved so far.
#[derive(Clone, Debug)]
pub struct FlowCursor {
    kind: CallFlowKind,
    pos: usize,
    resolved: BTreeMap<NfType, Endpoint>,
}

impl FlowCursor {
    pub fn new(kind: CallFlowKind) -> Self {
        FlowCursor {
            kind,
            pos: 0,
            resolved: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> CallFlowKind {
        self.kind
    }

    pub fn current(&self) -> Option<FlowStep> {
        self.kind.steps().get(self.pos).copied()
    }

    pub fn advance(&mut self) {
        self.pos += 1;
    }

    pub fn is_complete(&self) -> bool {
        self.pos >= self.kind.steps().len()
    }

    pub fn bind(&mut self, target: NfType, endpoint: Endpoint) {
        self.resolved.insert(target, endpoint);
    }

    pub fn endpoint_for(&self, target: NfType) -> Option<Endpoint> {
        self.resolved.get(&target).copied()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CallFlowError {
    #[error("discovery of {target} failed with {code:?}")]
    Discovery { target: NfType, code: ErrorCode },
    #[error("{0} is not attached")]
    NotAttached(UserId),
    #[error("{0} is already attached")]
    AlreadyAttached(UserId),
}

/// A single consumer talking straight to the NRF and producers with no
/// intermediary. Used to check the call-flow message laws in isolation.
#[derive(Clone, Debug)]
pub struct IsolatedNetwork<T> {
    pub nrf: Nrf,
    pub consumer: Endpoint,
    pub cache: ConsumerCache<T>,
    attached: BTreeSet<UserId>,
    next_correlation: u64,
}

impl<T: Scalar> IsolatedNetwork<T> {
    pub fn new(nrf: Nrf, consumer: Endpoint, validity: T) -> Self {
        IsolatedNetwork {
            nrf,
            consumer,
            cache: ConsumerCache::new(validity),
            attached: BTreeSet::new(),
            next_correlation: 0,
        }
    }

    pub fn is_attached(&self, user: UserId) -> bool {
        self.attached.contains(&user)
    }

    fn correlation(&mut self) -> CorrelationId {
        self.next_correlation += 1;
        CorrelationId(self.next_correlation)
    }

    fn run(&mut self, kind: CallFlowKind, now: T) -> Result<Vec<Packet<T>>, CallFlowError> {
        let mut cursor = FlowCursor::new(kind);
        let mut packets = Vec::new();
        while let Some(step) = cursor.current() {
            match step {
                FlowStep::Resolve(target) => {
                    let corr = self.correlation();
                    let (ep, extra) = consumer_resolve(
                        &mut self.cache,
                        &self.nrf,
                        self.consumer,
                        target,
                        now,
                        corr,
                    )?;
                    packets.extend(extra);
                    cursor.bind(target, ep);
                }
                FlowStep::Exchange(exchange) => {
                    let producer = cursor
                        .endpoint_for(exchange.target())
                        .expect("resolve precedes exchange");
                    let request = SbiMessage::new(exchange.request(), self.correlation());
                    let response = request.reply(exchange.response());
                    packets.push(make_packet(self.consumer, producer, request, now));
                    packets.push(make_packet(producer, self.consumer, response, now));
                }
            }
            cursor.advance();
        }
        Ok(packets)
    }
}

fn make_packet<T: Scalar>(src: Endpoint, dst: Endpoint, message: SbiMessage, now: T) -> Packet<T> {
    Packet {
        src,
        dst,
        size_bytes: message.kind.nominal_size(),
        message,
        created_at: now,
    }
}

/// Resolves `target` through the consumer cache, falling back to an NRF
/// discovery (two packets) that refreshes the cache.
pub fn consumer_resolve<T: Scalar>(
    cache: &mut ConsumerCache<T>,
    nrf: &Nrf,
    consumer: Endpoint,
    target: NfType,
    now: T,
    correlation_id: CorrelationId,
) -> Result<(Endpoint, Vec<Packet<T>>), CallFlowError> {
    if let Some(ep) = cache.lookup(target, now) {
        return Ok((ep, Vec::new()));
    }
    let request = SbiMessage::new(SbiMessageKind::DiscoveryRequest { target }, correlation_id);
    let found = nrf.discover(target);
    let Some(first) = found.first() else {
        return Err(CallFlowError::Discovery {
            target,
            code: ErrorCode::NotFound,
        });
    };
    let endpoint = first.endpoint;
    let reply = request.reply(SbiMessageKind::DiscoveryResponse {
        endpoints: found.iter().map(|p| p.endpoint).collect(),
    });
    let packets = vec![
        make_packet(consumer, nrf.endpoint(), request, now),
        make_packet(nrf.endpoint(), consumer, reply, now),
    ];
    cache.store(target, endpoint, now);
    Ok((endpoint, packets))
}

/// Runs a full attach for `user`, returning every packet in order.
pub fn attach_call_flow<T: Scalar>(
    net: &mut IsolatedNetwork<T>,
    user: UserId,
    now: T,
) -> Result<Vec<Packet<T>>, CallFlowError> {
    if net.attached.contains(&user) {
        return Err(CallFlowError::AlreadyAttached(user));
    }
    let packets = net.run(CallFlowKind::Attach, now)?;
    net.attached.insert(user);
    Ok(packets)
}

/// Runs a detach; fails without emitting anything for unknown users.
pub fn detach_call_flow<T: Scalar>(
    net: &mut IsolatedNetwork<T>,
    user: UserId,
    now: T,
) -> Result<Vec<Packet<T>>, CallFlowError> {
    if !net.attached.contains(&user) {
        return Err(CallFlowError::NotAttached(user));
    }
    let packets = net.run(CallFlowKind::Detach, now)?;
    net.attached.remove(&user);
    Ok(packets)
}
