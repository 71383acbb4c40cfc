// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::nf_model::{InstanceId, NfProfile};

use super::ControllerError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LbPolicy {
    #[default]
    RoundRobin,
    LeastLoad,
}

impl std::str::FromStr for LbPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round-robin" | "rr" => Ok(LbPolicy::RoundRobin),
            "least-load" | "ll" => Ok(LbPolicy::LeastLoad),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

/// Picks a producer among `profiles` (registration order). Instances with
/// `load >= threshold` are skipped.
///
/// `cursor` is the round-robin position for this producer type and is
/// advanced past the chosen instance. `observed_bytes` breaks load ties
/// under `LeastLoad`.
pub fn select_producer(
    profiles: &[NfProfile],
    policy: LbPolicy,
    threshold: u8,
    cursor: &mut usize,
    observed_bytes: &BTreeMap<InstanceId, u64>,
) -> Result<NfProfile, ControllerError> {
    if profiles.is_empty() {
        return Err(ControllerError::NoInstance);
    }
    let eligible = |p: &NfProfile| p.load < threshold;
    match policy {
        LbPolicy::RoundRobin => {
            let n = profiles.len();
            let start = *cursor % n;
            let idx = (0..n)
                .map(|k| (start + k) % n)
                .find(|&i| eligible(&profiles[i]))
                .ok_or(ControllerError::OverloadDenied)?;
            *cursor = idx + 1;
            Ok(profiles[idx].clone())
        }
        LbPolicy::LeastLoad => profiles
            .iter()
            .filter(|p| eligible(p))
            .min_by_key(|p| {
                let bytes = observed_bytes.get(&p.instance_id).copied().unwrap_or(0);
                (p.load, bytes, p.instance_id)
            })
            .cloned()
            .ok_or(ControllerError::OverloadDenied),
    }
}
