// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::flow_engine::{Address, Endpoint};
use crate::nf_model::NfType;

/// Allowed (consumer type, producer type) pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorizationMatrix {
    allowed: BTreeSet<(NfType, NfType)>,
}

impl AuthorizationMatrix {
    pub fn new(pairs: impl IntoIterator<Item = (NfType, NfType)>) -> Self {
        AuthorizationMatrix {
            allowed: pairs.into_iter().collect(),
        }
    }

    /// AMF may reach AUSF and SMF.
    pub fn attach_defaults() -> Self {
        Self::new([(NfType::Amf, NfType::Ausf), (NfType::Amf, NfType::Smf)])
    }

    pub fn allow(&mut self, consumer: NfType, producer: NfType) {
        self.allowed.insert((consumer, producer));
    }

    pub fn authorize(&self, consumer: NfType, producer: NfType) -> bool {
        self.allowed.contains(&(consumer, producer))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (NfType, NfType)> + '_ {
        self.allowed.iter().copied()
    }
}

/// Virtual endpoints standing for a whole producer type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MainEndpointRegistry {
    by_type: BTreeMap<NfType, Endpoint>,
}

impl MainEndpointRegistry {
    /// Reserved block the main endpoints are minted from.
    pub const BLOCK: [u8; 3] = [198, 18, 0];
    pub const PORT: u16 = 80;

    /// One endpoint per type, in the order given, from the reserved block.
    pub fn allocate(types: impl IntoIterator<Item = NfType>) -> Self {
        let [a, b, c] = Self::BLOCK;
        let mut by_type = BTreeMap::new();
        for nf_type in types {
            let next = by_type.len() as u8 + 1;
            by_type.entry(nf_type).or_insert_with(|| Endpoint {
                address: Address::from_octets(a, b, c, next),
                port: Self::PORT,
            });
        }
        MainEndpointRegistry { by_type }
    }

    pub fn main_for(&self, nf_type: NfType) -> Option<Endpoint> {
        self.by_type.get(&nf_type).copied()
    }

    pub fn type_of(&self, endpoint: Endpoint) -> Option<NfType> {
        self.by_type
            .iter()
            .find(|(_, ep)| **ep == endpoint)
            .map(|(t, _)| *t)
    }

    /// True for any address in the reserved block, allocated or not.
    pub fn is_reserved(address: Address) -> bool {
        address.0 >> 8 == Address::from_octets(Self::BLOCK[0], Self::BLOCK[1], Self::BLOCK[2], 0).0 >> 8
    }

    pub fn iter(&self) -> impl Iterator<Item = (NfType, Endpoint)> + '_ {
        self.by_type.iter().map(|(t, ep)| (*t, *ep))
    }
}
