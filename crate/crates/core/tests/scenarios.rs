// SPDX-License-Identifier: Apache-2.0

use scp_sdn::scenarios::{
    build_topology, calibrate_costs, throughput_latency_sweep, Anchors, HopCostModel, ScenarioKind,
    SweepParams, SweepPoint,
};

const COUNTS: [usize; 4] = [1, 31, 61, 99];

fn model() -> HopCostModel<f64> {
    calibrate_costs(&Anchors::default()).unwrap()
}

fn sweep(kind: ScenarioKind, counts: &[usize]) -> Vec<SweepPoint> {
    throughput_latency_sweep(kind, &model(), counts, &SweepParams::default()).unwrap()
}

#[test]
fn ordering_holds_beyond_thirty_connections() {
    let order = [
        ScenarioKind::Direct,
        ScenarioKind::SdnProactive,
        ScenarioKind::SdnBothForwarded,
        ScenarioKind::ScpIndependent,
        ScenarioKind::ScpColocated,
    ];
    let rows: Vec<Vec<SweepPoint>> = order.iter().map(|k| sweep(*k, &COUNTS[1..])).collect();
    for i in 0..COUNTS.len() - 1 {
        for w in rows.windows(2) {
            assert!(
                w[0][i].throughput_rps >= w[1][i].throughput_rps,
                "{} connections: {} < {}",
                w[0][i].connections,
                w[0][i].throughput_rps,
                w[1][i].throughput_rps
            );
        }
    }
}

#[test]
fn throughput_never_exceeds_bottleneck() {
    let m = model();
    for kind in ScenarioKind::ALL {
        let cap = m.saturation(kind).unwrap();
        for p in sweep(kind, &COUNTS) {
            assert!(p.throughput_rps <= cap * (1.0 + 1e-9), "{kind:?} {p:?} over {cap}");
        }
    }
}

#[test]
fn forwarded_variants_saturate_together() {
    let a = sweep(ScenarioKind::SdnConsumerForwarded, &[99])[0].throughput_rps;
    let b = sweep(ScenarioKind::SdnBothForwarded, &[99])[0].throughput_rps;
    assert!((a - b).abs() / a.max(b) < 0.10, "{a} vs {b}");
}

#[test]
fn single_connection_runs_at_the_unloaded_rate() {
    let m = model();
    for kind in ScenarioKind::ALL {
        let p = sweep(kind, &[1])[0];
        let rtt = m.unloaded_rtt(kind).unwrap();
        assert!((p.throughput_rps * rtt - 1.0).abs() < 0.01, "{kind:?}: {} vs {}", p.throughput_rps, 1.0 / rtt);
    }
}

#[test]
fn agent_latency_grows_linearly_past_saturation() {
    let p = sweep(ScenarioKind::ScpIndependent, &[61, 99]);
    let growth = p[1].p95_ms / p[0].p95_ms;
    let expected = 99.0 / 61.0;
    assert!((growth / expected - 1.0).abs() < 0.15, "{growth} vs {expected}");
}

#[test]
fn plateaus_track_anchors() {
    let m = model();
    for kind in ScenarioKind::ALL {
        let plateau = sweep(kind, &[99])[0].throughput_rps;
        let anchor = m.anchor(kind);
        assert!((plateau / anchor - 1.0).abs() < 0.05, "{kind:?}: {plateau} vs {anchor}");
    }
}

#[test]
fn inconsistent_anchors_are_rejected() {
    let a = Anchors::<f64> { scp_independent_rps: -1.0, ..Default::default() };
    assert!(calibrate_costs(&a).is_err());
    let a = Anchors::<f64> { direct_knee_connections: 1.0, ..Default::default() };
    assert!(calibrate_costs(&a).is_err());
}

#[test]
fn topologies_work_in_single_precision() {
    let m = calibrate_costs(&Anchors::<f32>::default()).unwrap();
    let t = build_topology(ScenarioKind::SdnReactive, &m).unwrap();
    assert!(t.app.is_some());
    let t = build_topology(ScenarioKind::SdnBothForwarded, &m).unwrap();
    assert!(t.app.is_none());
    assert_eq!(t.round_trip().len(), 2 * t.route.len() - 1);
    let p = throughput_latency_sweep(ScenarioKind::Direct, &m, &[1, 40], &SweepParams::default()).unwrap();
    assert!(p[1].throughput_rps > p[0].throughput_rps);
}

#[test]
fn empty_window_is_a_config_error() {
    let params = SweepParams::<f64> { window_s: 0.0, ..Default::default() };
    assert!(throughput_latency_sweep(ScenarioKind::Direct, &model(), &[1], &params).is_err());
}
