// SPDX-License-Identifier: Apache-2.0

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Packet and flow counters of one run.
///
/// Every emitted packet falls in exactly one of the data, discovery and
/// registration classes; controller to NRF queries count two packets each.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub data_packets: u64,
    pub discovery_packets: u64,
    pub registration_packets: u64,
    pub controller_nrf_queries: u64,
    /// Packets trapped on their way to the NRF.
    pub nrf_bound: u64,
    /// First packets of consumer to producer conversations.
    pub first_packet_packet_ins: u64,
    /// Other packets escalated on a table miss and re-injected.
    pub relayed: u64,
    /// Packets minted by the application: discovery answers and errors.
    pub app_replies: u64,
    pub completed_flows: u64,
    pub failed_flows: u64,
    pub emitted: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl Counts {
    pub fn total_packets(&self) -> u64 {
        self.data_packets + self.discovery_packets + self.registration_packets + self.controller_nrf_queries
    }

    pub fn packets_through_app(&self) -> u64 {
        self.nrf_bound
            + self.first_packet_packet_ins
            + self.relayed
            + self.app_replies
            + self.controller_nrf_queries
    }

    /// Exact share of packets that touched the application.
    pub fn fraction_through_app(&self) -> Option<Ratio<u64>> {
        let total = self.total_packets();
        (total > 0).then(|| Ratio::new(self.packets_through_app(), total))
    }

    pub fn pct_through_app(&self) -> Option<f64> {
        self.fraction_through_app()
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
    }

    pub fn conserved(&self) -> bool {
        self.emitted == self.delivered + self.dropped + self.in_flight
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub counts: Counts,
    /// One-way latency of each message of completed flows, in seconds.
    pub latencies_s: Vec<f64>,
    /// Simulated span over which the workload ran.
    pub duration_s: f64,
}

impl Metrics {
    pub fn total_packets(&self) -> u64 {
        self.counts.total_packets()
    }

    pub fn packets_through_app(&self) -> u64 {
        self.counts.packets_through_app()
    }

    pub fn percentage_through_app(&self) -> Option<f64> {
        self.counts.pct_through_app()
    }

    /// Completed request/response exchanges per second.
    pub fn throughput_rps(&self) -> f64 {
        if self.duration_s > 0.0 {
            self.counts.data_packets as f64 / 2.0 / self.duration_s
        } else {
            0.0
        }
    }

    pub fn latency_quantile_ms(&self, q: f64) -> Option<f64> {
        quantile(&self.latencies_s, q).map(|s| s * 1e3)
    }
}

/// Nearest-rank quantile; `None` for empty input.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.saturating_sub(1).min(sorted.len() - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.5), Some(50.0));
        assert_eq!(quantile(&v, 0.95), Some(95.0));
        assert_eq!(quantile(&v, 1.0), Some(100.0));
        assert_eq!(quantile(&[], 0.5), None);
        assert_eq!(quantile(&[3.0], 0.0), Some(3.0));
    }

    #[test]
    fn fraction() {
        let c = Counts {
            data_packets: 90,
            discovery_packets: 8,
            controller_nrf_queries: 2,
            nrf_bound: 4,
            app_replies: 4,
            ..Counts::default()
        };
        assert_eq!(c.total_packets(), 100);
        assert_eq!(c.fraction_through_app(), Some(Ratio::new(10, 100)));
        assert_eq!(Counts::default().pct_through_app(), None);
    }
}
