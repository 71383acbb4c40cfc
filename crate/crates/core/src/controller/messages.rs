// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use crate::flow_engine::{Action, FlowRemoved, FlowRule, FlowStatsReport, Packet, RuleId, SwitchId};
use crate::nf_model::{ErrorCode, InstanceId};

/// Controller to switch exchange unit.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlMessage<T> {
    PacketIn { switch: SwitchId, packet: Packet<T> },
    PacketOut { switch: SwitchId, packet: Packet<T>, actions: Vec<Action> },
    FlowMod { switch: SwitchId, rule: FlowRule<T> },
    FlowRemoved(FlowRemoved<T>),
    StatsIn(FlowStatsReport<T>),
}

impl<T> ControlMessage<T> {
    pub fn is_flow_mod(&self) -> bool {
        matches!(self, ControlMessage::FlowMod { .. })
    }

    pub fn is_packet_out(&self) -> bool {
        matches!(self, ControlMessage::PacketOut { .. })
    }
}

/// What became of the packet carried by a PacketIn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disposal {
    /// Re-injected, possibly rewritten.
    Forwarded,
    /// Consumed; the PacketOut carries a new reply packet.
    Answered,
    /// Consumed and refused; the PacketOut carries an error reply.
    Denied(ErrorCode),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketInClass {
    /// Destined to the NRF.
    NrfBound,
    /// Sent by the NRF.
    FromNrf,
    /// First packet towards a main endpoint.
    FirstPacket,
    /// Packet of an existing conversation that missed mid-path.
    MidPath,
    /// Nothing known about the destination.
    Unroutable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Relayed,
    Answered,
    Installed { instance: InstanceId, rule: RuleId },
    Denied(ErrorCode),
    Ignored,
    Accounted,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Relayed => f.write_str("relayed"),
            Verdict::Answered => f.write_str("answered"),
            Verdict::Installed { instance, rule } => write!(f, "installed {instance} rule {rule}"),
            Verdict::Denied(code) => write!(f, "denied {}", code.http_status()),
            Verdict::Ignored => f.write_str("ignored"),
            Verdict::Accounted => f.write_str("accounted"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    PacketIn,
    FlowRemoved,
    Stats,
}

/// One structured controller decision.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord<T> {
    pub time: T,
    pub kind: EventKind,
    pub switch: SwitchId,
    pub verdict: Verdict,
}

/// Output of one PacketIn.
#[derive(Clone, Debug, PartialEq)]
pub struct Reaction<T> {
    pub class: PacketInClass,
    pub disposal: Disposal,
    pub messages: Vec<ControlMessage<T>>,
    /// Extra time before the PacketOuts may leave, spent waiting on an NRF
    /// query.
    pub delay: T,
    /// Set when this reaction issued a fresh NRF query.
    pub nrf_query: bool,
}

impl<T> Reaction<T> {
    pub fn flow_mods(&self) -> usize {
        self.messages.iter().filter(|m| m.is_flow_mod()).count()
    }

    pub fn packet_outs(&self) -> usize {
        self.messages.iter().filter(|m| m.is_packet_out()).count()
    }
}
