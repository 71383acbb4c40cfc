// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::nf_model::UserId;
use crate::scalar::Scalar;

use super::SimError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalProcess {
    #[default]
    Deterministic,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkloadSpec<T> {
    pub attach_rate_per_s: T,
    pub attach_span_s: T,
    pub sim_duration_s: T,
    pub arrival: ArrivalProcess,
}

impl<T: Scalar> WorkloadSpec<T> {
    /// One attach per second for an hour, each user staying a minute.
    pub fn new(attach_rate_per_s: T) -> Self {
        WorkloadSpec {
            attach_rate_per_s,
            attach_span_s: T::from_count(60),
            sim_duration_s: T::from_count(3600),
            arrival: ArrivalProcess::Deterministic,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.attach_rate_per_s < T::zero() {
            return Err(SimError::Config("attach rate must be non-negative".into()));
        }
        if self.sim_duration_s <= T::zero() || self.attach_span_s <= T::zero() {
            return Err(SimError::Config("durations must be positive".into()));
        }
        if self.attach_span_s >= self.sim_duration_s {
            return Err(SimError::Config("attach span must be shorter than the run".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorkloadEvent {
    Attach(UserId),
    Detach(UserId),
}

/// Attach and detach times, sorted by time. Attaches stop at
/// `duration - span` so every detach falls inside the run; at equal times
/// attaches come first.
pub fn generate_workload<T: Scalar>(
    spec: &WorkloadSpec<T>,
    seed: u64,
) -> Result<Vec<(T, WorkloadEvent)>, SimError> {
    spec.validate()?;
    if spec.attach_rate_per_s == T::zero() {
        return Ok(Vec::new());
    }
    let last = spec.sim_duration_s - spec.attach_span_s;
    let attach_times: Vec<T> = match spec.arrival {
        ArrivalProcess::Deterministic => (0u64..)
            .map(|i| T::from_count(i) / spec.attach_rate_per_s)
            .take_while(|t| *t < last)
            .collect(),
        ArrivalProcess::Poisson => {
            let rate = spec.attach_rate_per_s.to_f64_lossy();
            let exp = Exp::new(rate).map_err(|e| SimError::Config(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = 0.0;
            let mut times = Vec::new();
            loop {
                let at = T::from_f64_approx(t);
                if at >= last {
                    break;
                }
                times.push(at);
                t += exp.sample(&mut rng);
            }
            times
        }
    };
    let mut events: Vec<(T, WorkloadEvent)> = Vec::with_capacity(2 * attach_times.len());
    for (i, t) in attach_times.iter().enumerate() {
        events.push((*t, WorkloadEvent::Attach(UserId(i as u32))));
    }
    for (i, t) in attach_times.iter().enumerate() {
        events.push((*t + spec.attach_span_s, WorkloadEvent::Detach(UserId(i as u32))));
    }
    events.sort_by(|a, b| a.0.time_cmp(&b.0));
    Ok(events)
}
