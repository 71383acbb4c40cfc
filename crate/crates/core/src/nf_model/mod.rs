// SPDX-License-Identifier: Apache-2.0

//! Control-plane network functions: NRF registry, consumer-side discovery
//! cache, and the attach/detach call flows.

mod callflow;
mod nrf;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow_engine::Endpoint;

pub use callflow::{
    attach_call_flow, consumer_resolve, detach_call_flow, CallFlowError, CallFlowKind,
    ConsumerCache, ExchangeKind, FlowCursor, FlowStep, IsolatedNetwork, UserId,
};
pub use nrf::Nrf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[non_exhaustive]
pub enum NfType {
    Nrf,
    Amf,
    Smf,
    Ausf,
}

impl NfType {
    pub const ALL: [NfType; 4] = [NfType::Nrf, NfType::Amf, NfType::Smf, NfType::Ausf];

    pub fn index(self) -> u8 {
        match self {
            NfType::Nrf => 0,
            NfType::Amf => 1,
            NfType::Smf => 2,
            NfType::Ausf => 3,
        }
    }
}

impl fmt::Display for NfType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NfType::Nrf => "NRF",
            NfType::Amf => "AMF",
            NfType::Smf => "SMF",
            NfType::Ausf => "AUSF",
        })
    }
}

impl std::str::FromStr for NfType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nrf" => Ok(NfType::Nrf),
            "amf" => Ok(NfType::Amf),
            "smf" => Ok(NfType::Smf),
            "ausf" => Ok(NfType::Ausf),
            other => Err(format!("unknown NF type `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceId(pub u32);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nf{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NfStatus {
    Registered,
    Deregistered,
}

/// NF profile as held by the NRF. Load is a percentage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NfProfile {
    pub instance_id: InstanceId,
    pub nf_type: NfType,
    pub endpoint: Endpoint,
    pub load: u8,
    pub capacity: u32,
    pub status: NfStatus,
}

impl NfProfile {
    pub fn new(
        instance_id: InstanceId,
        nf_type: NfType,
        endpoint: Endpoint,
        load: u8,
        capacity: u32,
    ) -> Result<Self, SbiError> {
        if load > 100 {
            return Err(SbiError::InvalidProfile("load above 100"));
        }
        if capacity == 0 {
            return Err(SbiError::InvalidProfile("capacity must be positive"));
        }
        Ok(NfProfile {
            instance_id,
            nf_type,
            endpoint,
            load,
            capacity,
            status: NfStatus::Registered,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    Unauthorized,
    NotFound,
    Overloaded,
    Conflict,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::Unauthorized => 403,
            ErrorCode::NotFound => 404,
            ErrorCode::Conflict => 409,
            ErrorCode::Overloaded => 503,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CorrelationId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SbiMessageKind {
    Register(NfProfile),
    Deregister(InstanceId),
    RegistrationAck,
    DiscoveryRequest { target: NfType },
    DiscoveryResponse { endpoints: Vec<Endpoint> },
    AuthenticationRequest,
    AuthenticationReply,
    LocationUpdateRequest,
    LocationUpdateReply,
    SessionRequest,
    SessionResponse,
    ModifyBearerRequest,
    ModifyBearerResponse,
    DetachRequest,
    DetachResponse,
    Error(ErrorCode),
}

impl SbiMessageKind {
    /// Response kind a producer returns for a data request.
    pub fn data_response(&self) -> Option<SbiMessageKind> {
        use SbiMessageKind::*;
        Some(match self {
            AuthenticationRequest => AuthenticationReply,
            LocationUpdateRequest => LocationUpdateReply,
            SessionRequest => SessionResponse,
            ModifyBearerRequest => ModifyBearerResponse,
            DetachRequest => DetachResponse,
            _ => return None,
        })
    }

    pub fn is_discovery(&self) -> bool {
        matches!(
            self,
            SbiMessageKind::DiscoveryRequest { .. } | SbiMessageKind::DiscoveryResponse { .. }
        )
    }

    pub fn is_registration(&self) -> bool {
        matches!(
            self,
            SbiMessageKind::Register(_) | SbiMessageKind::Deregister(_) | SbiMessageKind::RegistrationAck
        )
    }

    /// Nominal encoded size; only flow counters depend on it.
    pub fn nominal_size(&self) -> u32 {
        use SbiMessageKind::*;
        match self {
            Register(_) => 640,
            Deregister(_) => 180,
            RegistrationAck => 200,
            DiscoveryRequest { .. } => 320,
            DiscoveryResponse { endpoints } => 360 + 40 * endpoints.len() as u32,
            AuthenticationRequest | LocationUpdateRequest | SessionRequest | ModifyBearerRequest
            | DetachRequest => 420,
            AuthenticationReply | LocationUpdateReply | SessionResponse | ModifyBearerResponse
            | DetachResponse => 380,
            Error(_) => 160,
        }
    }
}

/// SBI message descriptor carried by a packet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbiMessage {
    pub kind: SbiMessageKind,
    pub correlation_id: CorrelationId,
    pub binding_required: bool,
}

impl SbiMessage {
    pub fn new(kind: SbiMessageKind, correlation_id: CorrelationId) -> Self {
        SbiMessage {
            kind,
            correlation_id,
            binding_required: false,
        }
    }

    pub fn reply(&self, kind: SbiMessageKind) -> Self {
        SbiMessage {
            kind,
            correlation_id: self.correlation_id,
            binding_required: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SbiError {
    #[error("endpoint {0} is already registered by another instance")]
    EndpointConflict(Endpoint),
    #[error("unknown NF instance {0}")]
    UnknownInstance(InstanceId),
    #[error("invalid NF profile: {0}")]
    InvalidProfile(&'static str),
}

impl SbiError {
    pub fn code(&self) -> ErrorCode {
        match self {
            SbiError::EndpointConflict(_) => ErrorCode::Conflict,
            SbiError::UnknownInstance(_) => ErrorCode::NotFound,
            SbiError::InvalidProfile(_) => ErrorCode::Conflict,
        }
    }
}
