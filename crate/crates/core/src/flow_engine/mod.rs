// SPDX-License-Identifier: Apache-2.0

//! SDN switch model: a single priority-ordered flow table per switch with
//! endpoint matching, endpoint rewrites, per-rule counters and idle/hard
//! timeouts.

mod stats;
mod table;

use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nf_model::SbiMessage;

pub use stats::{FlowStatsReport, RuleStats, StatsCollector, StatsTrigger};
pub use table::{
    apply_actions, Disposition, FlowRemoved, FlowRule, FlowTable, MatchResult, PortAttachment,
    RemovalReason,
};

/// Opaque network address. Rendered as dotted quad.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Address(pub u32);

impl Address {
    pub const fn from_octets(a: u8, b: u8, c: u8, d: u8) -> Self {
        Address(u32::from_be_bytes([a, b, c, d]))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Ipv4Addr::from(self.0).fmt(f)
    }
}

/// Address plus transport port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Endpoint {
    pub address: Address,
    pub port: u16,
}

impl Endpoint {
    /// Port 0 is not a valid transport port.
    pub fn new(address: Address, port: u16) -> Result<Self, FlowError> {
        if port == 0 {
            return Err(FlowError::InvalidPort);
        }
        Ok(Endpoint { address, port })
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.address, self.port)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SwitchId(pub u32);

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Logical switch port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortId(pub u32);

impl PortId {
    /// Port facing the co-located NF.
    pub const LOCAL: PortId = PortId(0);
    /// Port facing the rest of the network.
    pub const UPLINK: PortId = PortId(1);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleId(pub u64);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An abstract control-plane datagram.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet<T> {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub message: SbiMessage,
    pub size_bytes: u32,
    pub created_at: T,
}

/// Endpoint match; `None` fields are wildcards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchCriteria {
    pub src_address: Option<Address>,
    pub src_port: Option<u16>,
    pub dst_address: Option<Address>,
    pub dst_port: Option<u16>,
}

impl MatchCriteria {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn dst(endpoint: Endpoint) -> Self {
        MatchCriteria {
            dst_address: Some(endpoint.address),
            dst_port: Some(endpoint.port),
            ..Self::default()
        }
    }

    pub fn src(endpoint: Endpoint) -> Self {
        MatchCriteria {
            src_address: Some(endpoint.address),
            src_port: Some(endpoint.port),
            ..Self::default()
        }
    }

    pub fn between(src: Endpoint, dst: Endpoint) -> Self {
        MatchCriteria {
            src_address: Some(src.address),
            src_port: Some(src.port),
            dst_address: Some(dst.address),
            dst_port: Some(dst.port),
        }
    }

    pub fn matches<T>(&self, packet: &Packet<T>) -> bool {
        self.src_address.is_none_or(|a| a == packet.src.address)
            && self.src_port.is_none_or(|p| p == packet.src.port)
            && self.dst_address.is_none_or(|a| a == packet.dst.address)
            && self.dst_port.is_none_or(|p| p == packet.dst.port)
    }

    /// True when every packet matched by `other` is also matched by `self`.
    pub fn covers(&self, other: &MatchCriteria) -> bool {
        fn field<V: PartialEq>(outer: Option<V>, inner: Option<V>) -> bool {
            match (outer, inner) {
                (None, _) => true,
                (Some(a), Some(b)) => a == b,
                (Some(_), None) => false,
            }
        }
        field(self.src_address, other.src_address)
            && field(self.src_port, other.src_port)
            && field(self.dst_address, other.dst_address)
            && field(self.dst_port, other.dst_port)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    ForwardOut(PortId),
    SendToController,
    RewriteDst(Endpoint),
    RewriteSrc(Endpoint),
    Drop,
}

impl Action {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            Action::ForwardOut(_) | Action::SendToController | Action::Drop
        )
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::ForwardOut(port) => write!(f, "output:{}", port.0),
            Action::SendToController => f.write_str("controller"),
            Action::RewriteDst(ep) => write!(f, "set_dst:{ep}"),
            Action::RewriteSrc(ep) => write!(f, "set_src:{ep}"),
            Action::Drop => f.write_str("drop"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error("transport port must be in 1..=65535")]
    InvalidPort,
    #[error("action list has no terminal action")]
    MissingTerminalAction,
    #[error("terminal action at position {0} is not last")]
    TerminalNotLast(usize),
    #[error("rule id {0} already names a different rule")]
    DuplicateRuleId(RuleId),
    #[error("timeouts must be positive")]
    NonPositiveTimeout,
}
