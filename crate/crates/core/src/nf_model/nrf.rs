// SPDX-License-Identifier: Apache-2.0

use crate::flow_engine::Endpoint;

use super::{InstanceId, NfProfile, NfStatus, NfType, SbiError};

/// NF repository: profiles in registration order.
#[derive(Clone, Debug)]
pub struct Nrf {
    endpoint: Endpoint,
    profiles: Vec<NfProfile>,
}

impl Nrf {
    pub fn new(endpoint: Endpoint) -> Self {
        Nrf {
            endpoint,
            profiles: Vec::new(),
        }
    }

    pub fn endpoint(&self) -> Endpoint {
        self.endpoint
    }

    /// Stores `profile` as registered. Re-registering the same instance
    /// updates it in place.
    pub fn register(&mut self, mut profile: NfProfile) -> Result<(), SbiError> {
        let conflict = self.profiles.iter().any(|p| {
            p.endpoint == profile.endpoint
                && p.instance_id != profile.instance_id
                && p.status == NfStatus::Registered
        });
        if conflict {
            return Err(SbiError::EndpointConflict(profile.endpoint));
        }
        profile.status = NfStatus::Registered;
        match self
            .profiles
            .iter_mut()
            .find(|p| p.instance_id == profile.instance_id)
        {
            Some(existing) => *existing = profile,
            None => self.profiles.push(profile),
        }
        Ok(())
    }

    pub fn deregister(&mut self, instance_id: InstanceId) -> Result<(), SbiError> {
        match self
            .profiles
            .iter_mut()
            .find(|p| p.instance_id == instance_id && p.status == NfStatus::Registered)
        {
            Some(profile) => {
                profile.status = NfStatus::Deregistered;
                Ok(())
            }
            None => Err(SbiError::UnknownInstance(instance_id)),
        }
    }

    /// Registered profiles of `target`, in registration order.
    pub fn discover(&self, target: NfType) -> Vec<NfProfile> {
        self.profiles
            .iter()
            .filter(|p| p.nf_type == target && p.status == NfStatus::Registered)
            .cloned()
            .collect()
    }

    pub fn profile(&self, instance_id: InstanceId) -> Option<&NfProfile> {
        self.profiles.iter().find(|p| p.instance_id == instance_id)
    }

    pub fn set_load(&mut self, instance_id: InstanceId, load: u8) -> Result<(), SbiError> {
        if load > 100 {
            return Err(SbiError::InvalidProfile("load above 100"));
        }
        let profile = self
            .profiles
            .iter_mut()
            .find(|p| p.instance_id == instance_id)
            .ok_or(SbiError::UnknownInstance(instance_id))?;
        profile.load = load;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_engine::Address;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn ep(host: u8) -> Endpoint {
        Endpoint::new(Address::from_octets(10, 0, 0, host), 8080).unwrap()
    }

    fn profile(id: u32, nf_type: NfType) -> NfProfile {
        NfProfile::new(InstanceId(id), nf_type, ep(id as u8 + 10), 10, 100).unwrap()
    }

    fn nrf() -> Nrf {
        Nrf::new(ep(1))
    }

    #[test]
    fn register_makes_discoverable() {
        let mut nrf = nrf();
        nrf.register(profile(1, NfType::Ausf)).unwrap();
        let found = nrf.discover(NfType::Ausf);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].instance_id, InstanceId(1));
    }

    #[test]
    fn duplicate_register_is_idempotent() {
        let mut nrf = nrf();
        nrf.register(profile(1, NfType::Ausf)).unwrap();
        nrf.register(profile(1, NfType::Ausf)).unwrap();
        assert_eq!(nrf.discover(NfType::Ausf).len(), 1);
    }

    #[test]
    fn discovery_filters_by_type_in_order() {
        let mut nrf = nrf();
        nrf.register(profile(3, NfType::Smf)).unwrap();
        nrf.register(profile(1, NfType::Ausf)).unwrap();
        nrf.register(profile(2, NfType::Smf)).unwrap();
        let ids: Vec<_> = nrf.discover(NfType::Smf).iter().map(|p| p.instance_id).collect();
        assert_eq!(ids, vec![InstanceId(3), InstanceId(2)]);
        assert!(nrf.discover(NfType::Amf).is_empty());
    }

    #[test]
    fn endpoint_conflict_rejected() {
        let mut nrf = nrf();
        nrf.register(profile(1, NfType::Smf)).unwrap();
        let mut clash = profile(2, NfType::Smf);
        clash.endpoint = ep(11);
        assert_eq!(nrf.register(clash), Err(SbiError::EndpointConflict(ep(11))));
    }

    #[test]
    fn deregister_and_reregister() {
        let mut nrf = nrf();
        nrf.register(profile(1, NfType::Smf)).unwrap();
        nrf.deregister(InstanceId(1)).unwrap();
        assert!(nrf.discover(NfType::Smf).is_empty());
        nrf.register(profile(1, NfType::Smf)).unwrap();
        assert_eq!(nrf.discover(NfType::Smf).len(), 1);
    }

    #[test]
    fn deregister_unknown_leaves_state() {
        let mut nrf = nrf();
        nrf.register(profile(1, NfType::Smf)).unwrap();
        assert_eq!(
            nrf.deregister(InstanceId(9)),
            Err(SbiError::UnknownInstance(InstanceId(9)))
        );
        assert_eq!(nrf.discover(NfType::Smf).len(), 1);
    }

    #[derive(Clone, Debug)]
    enum Op {
        Register(u32, NfType),
        Deregister(u32),
    }

    fn op() -> impl Strategy<Value = Op> {
        let nf_type = prop_oneof![Just(NfType::Amf), Just(NfType::Smf), Just(NfType::Ausf)];
        prop_oneof![
            (0u32..6, nf_type).prop_map(|(i, t)| Op::Register(i, t)),
            (0u32..6).prop_map(Op::Deregister),
        ]
    }

    proptest! {
        // Replay oracle: a map of id -> (type, registered, first-seen order).
        #[test]
        fn discover_matches_set_replay(ops in prop::collection::vec(op(), 0..40)) {
            let mut nrf = nrf();
            let mut oracle: BTreeMap<u32, (NfType, bool, usize)> = BTreeMap::new();
            for (step, op) in ops.iter().enumerate() {
                match *op {
                    Op::Register(id, t) => {
                        nrf.register(profile(id, t)).unwrap();
                        let order = oracle.get(&id).map_or(step, |e| e.2);
                        oracle.insert(id, (t, true, order));
                    }
                    Op::Deregister(id) => {
                        let live = oracle.get(&id).is_some_and(|e| e.1);
                        prop_assert_eq!(nrf.deregister(InstanceId(id)).is_ok(), live);
                        if let Some(e) = oracle.get_mut(&id) { e.1 = false; }
                    }
                }
            }
            for t in [NfType::Amf, NfType::Smf, NfType::Ausf] {
                let mut expected: Vec<_> = oracle.iter()
                    .filter(|(_, e)| e.0 == t && e.1)
                    .map(|(id, e)| (e.2, *id))
                    .collect();
                expected.sort();
                let expected: Vec<_> = expected.into_iter().map(|(_, id)| InstanceId(id)).collect();
                let got: Vec<_> = nrf.discover(t).iter().map(|p| p.instance_id).collect();
                prop_assert_eq!(got, expected);
            }
        }
    }
}
