// SPDX-License-Identifier: Apache-2.0

use num_rational::Rational64;
use scp_sdn::flow_engine::Packet;
use scp_sdn::scenarios::ScenarioKind;
use scp_sdn::simulator::{
    analytic_oracle_count, run, run_with, ArrivalProcess, NfPlacement, Probe, SignalingConfig,
};

type R = Rational64;

fn cfg(kind: ScenarioKind, rate: R, seconds: i64) -> SignalingConfig<R> {
    let mut c = SignalingConfig::new(kind, rate);
    c.workload.sim_duration_s = R::from_integer(seconds);
    c
}

#[derive(Default)]
struct Causality {
    deliveries: u64,
    late: u64,
}

impl Probe<R> for Causality {
    fn on_delivery(&mut self, _nf: &NfPlacement, p: &Packet<R>, now: R) {
        self.deliveries += 1;
        if now < p.created_at {
            self.late += 1;
        }
    }
}

#[test]
fn same_seed_same_output() {
    for arrival in [ArrivalProcess::Deterministic, ArrivalProcess::Poisson] {
        let mut c = cfg(ScenarioKind::SdnReactive, R::from_integer(3), 200);
        c.workload.arrival = arrival;
        assert_eq!(run(&c, 7).unwrap(), run(&c, 7).unwrap());
    }
    let mut c = cfg(ScenarioKind::SdnReactive, R::from_integer(3), 200);
    c.workload.arrival = ArrivalProcess::Poisson;
    assert_ne!(run(&c, 1).unwrap(), run(&c, 2).unwrap());
}

#[test]
fn deliveries_follow_creation_and_counts_balance() {
    for kind in ScenarioKind::ALL {
        let c = cfg(kind, R::new(5, 2), 150);
        let mut probe = Causality::default();
        let m = run_with(&c, 0, &mut probe, None).unwrap();
        assert!(probe.deliveries > 0);
        assert_eq!(probe.late, 0, "{kind:?}");
        assert!(m.latencies_s.iter().all(|l| *l >= 0.0));
        assert!(m.counts.conserved(), "{kind:?} {:?}", m.counts);
    }
}

#[test]
fn direct_attach_and_detach_cost_eight_and_two() {
    let m = run(&cfg(ScenarioKind::Direct, R::from_integer(2), 300), 0).unwrap();
    let users = m.counts.completed_flows / 2;
    assert_eq!(users, 2 * 240);
    assert_eq!(m.counts.data_packets, users * (8 + 2));
    assert_eq!(m.counts.packets_through_app(), 0);
    assert_eq!(m.percentage_through_app(), Some(0.0));
}

#[test]
fn shared_caches_save_discovery() {
    // One user, then two users five seconds apart.
    let one = run(&cfg(ScenarioKind::SdnReactive, R::new(1, 100), 61), 0).unwrap();
    let two = run(&cfg(ScenarioKind::SdnReactive, R::new(1, 5), 66), 0).unwrap();
    assert_eq!(two.counts.completed_flows, 4);
    assert!(two.counts.discovery_packets < 2 * one.counts.discovery_packets);
    assert_eq!(analytic_oracle_count(&cfg(ScenarioKind::SdnReactive, R::new(1, 5), 66)).unwrap(), two.counts);
}

#[test]
fn oracle_share_falls_with_rate() {
    let mut last = f64::INFINITY;
    for rate in 1..=10 {
        let c = analytic_oracle_count(&SignalingConfig::new(ScenarioKind::SdnReactive, R::from_integer(rate))).unwrap();
        let pct = c.pct_through_app().unwrap();
        assert!(pct < last, "rate {rate}: {pct} after {last}");
        last = pct;
    }
}

#[test]
fn through_app_grows_slower_than_load() {
    let at = |rate| analytic_oracle_count(&SignalingConfig::new(ScenarioKind::SdnReactive, R::from_integer(rate))).unwrap();
    let (a, b) = (at(2), at(4));
    assert!(b.total_packets() as f64 >= 1.9 * a.total_packets() as f64);
    assert!((b.packets_through_app() as f64) < 1.5 * a.packets_through_app() as f64);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = cfg(ScenarioKind::SdnReactive, R::from_integer(1), 50);
    c.workload.attach_span_s = R::from_integer(60);
    assert!(run(&c, 0).is_err());
    let mut c = cfg(ScenarioKind::SdnReactive, R::from_integer(1), 100);
    c.population.amf.clear();
    assert!(run(&c, 0).is_err());
    let mut c = cfg(ScenarioKind::SdnReactive, R::from_integer(1), 100);
    c.hop_latency_s = R::from_integer(0);
    assert!(run(&c, 0).is_err());
}
