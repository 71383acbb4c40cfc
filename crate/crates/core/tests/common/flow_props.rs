// SPDX-License-Identifier: Apache-2.0

//! Flow-table properties against a brute-force reference table.

use num_rational::Rational64;
use proptest::prelude::*;
use scp_sdn::flow_engine::{
    apply_actions, Action, Disposition, Endpoint, FlowRule, FlowTable, MatchCriteria, MatchResult,
    Packet, PortId, RuleId, SwitchId,
};

use super::{arb_endpoint, arb_match, ep, packet};
use proptest::test_runner::{Config, TestRunner};

type R = Rational64;

pub type Outcome = Result<(), String>;

#[derive(Clone, Debug)]
struct RuleGen {
    priority: u16,
    criteria: MatchCriteria,
    idle: Option<i64>,
    hard: Option<i64>,
}

fn arb_rule() -> impl Strategy<Value = RuleGen> {
    (
        0u16..4,
        arb_match(),
        prop::option::of(1i64..6),
        prop::option::of(1i64..8),
    )
        .prop_map(|(priority, criteria, idle, hard)| RuleGen { priority, criteria, idle, hard })
}

fn arb_traffic() -> impl Strategy<Value = Vec<(i64, Endpoint, Endpoint, u32)>> {
    prop::collection::vec((0i64..3, arb_endpoint(), arb_endpoint(), 1u32..1500), 1..40)
}

/// Reference table: a plain list scanned in full on every lookup.
#[derive(Clone, Debug)]
struct Reference {
    rules: Vec<RefRule>,
}

#[derive(Clone, Debug)]
struct RefRule {
    id: u64,
    priority: u16,
    criteria: MatchCriteria,
    idle: Option<R>,
    hard: Option<R>,
    installed: R,
    last: R,
    bytes: u64,
}

impl Reference {
    fn install(&mut self, r: RefRule) {
        self.rules
            .retain(|x| !(x.priority == r.priority && x.criteria == r.criteria));
        self.rules.push(r);
    }

    fn alive(r: &RefRule, now: R) -> bool {
        r.hard.is_none_or(|h| now - r.installed < h)
            && r.idle.is_none_or(|i| now - r.installed.max(r.last) < i)
    }

    fn lookup(&mut self, p: &Packet<R>, now: R) -> Option<u64> {
        let mut best: Option<usize> = None;
        for (i, r) in self.rules.iter().enumerate() {
            if !Self::alive(r, now) || !r.criteria.matches(p) {
                continue;
            }
            best = match best {
                Some(b) => {
                    let c = &self.rules[b];
                    if r.priority > c.priority || (r.priority == c.priority && r.id < c.id) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
                None => Some(i),
            };
        }
        best.map(|i| {
            let r = &mut self.rules[i];
            r.last = now;
            r.bytes += u64::from(p.size_bytes);
            r.id
        })
    }
}

fn forward() -> Vec<Action> {
    vec![Action::ForwardOut(PortId::UPLINK)]
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

pub fn lookup_agrees_with_reference(cases: u32) -> Outcome {
    runner(cases).run(
        &(prop::collection::vec(arb_rule(), 0..12), arb_traffic()),
        |(rules, traffic)| {
            let mut table = FlowTable::<R>::new(SwitchId(0));
            let mut reference = Reference { rules: Vec::new() };
            for (i, g) in rules.iter().enumerate() {
                let id = i as u64 + 1;
                let rule = FlowRule::new(RuleId(id), g.priority, g.criteria, forward())
                    .with_timeouts(g.idle.map(R::from_integer), g.hard.map(R::from_integer));
                table.install_rule(rule, R::from_integer(0)).unwrap();
                reference.install(RefRule {
                    id,
                    priority: g.priority,
                    criteria: g.criteria,
                    idle: g.idle.map(R::from_integer),
                    hard: g.hard.map(R::from_integer),
                    installed: R::from_integer(0),
                    last: R::from_integer(0),
                    bytes: 0,
                });
            }
            let mut now = R::from_integer(0);
            for (dt, src, dst, size) in traffic {
                now += R::new(dt, 2);
                let p = packet(src, dst, size);
                let got = match table.lookup(&p, now) {
                    MatchResult::Matched(RuleId(id)) => Some(id),
                    MatchResult::TableMiss => None,
                };
                prop_assert_eq!(got, reference.lookup(&p, now));
            }
            Ok(())
        },
    )
    .map_err(|e| e.to_string())
}

pub fn shadowed_rule_never_counts(cases: u32) -> Outcome {
    runner(cases).run(
        &(arb_match(), arb_match(), 1u16..10, arb_traffic()),
        |(wide, narrow_extra, hi, traffic)| {
            // Narrow rule: every field of `wide` plus anything `narrow_extra` adds.
            let narrow = MatchCriteria {
                src_address: wide.src_address.or(narrow_extra.src_address),
                src_port: wide.src_port.or(narrow_extra.src_port),
                dst_address: wide.dst_address.or(narrow_extra.dst_address),
                dst_port: wide.dst_port.or(narrow_extra.dst_port),
            };
            prop_assume!(wide.covers(&narrow));
            let mut table = FlowTable::<R>::new(SwitchId(0));
            table.install_rule(FlowRule::new(RuleId(1), hi - 1, narrow, forward()), R::from_integer(0)).unwrap();
            table.install_rule(FlowRule::new(RuleId(2), hi, wide, forward()), R::from_integer(0)).unwrap();
            for (i, (_, src, dst, size)) in traffic.into_iter().enumerate() {
                table.lookup(&packet(src, dst, size), R::from_integer(i as i64));
            }
            let shadowed = table.rule(RuleId(1)).unwrap();
            prop_assert_eq!(shadowed.packet_count, 0);
            prop_assert_eq!(shadowed.byte_count, 0);
            Ok(())
        },
    )
    .map_err(|e| e.to_string())
}

pub fn bytes_are_conserved(cases: u32) -> Outcome {
    runner(cases).run(
        &(prop::collection::vec(arb_rule(), 0..10), arb_traffic()),
        |(rules, traffic)| {
            let mut table = FlowTable::<R>::new(SwitchId(0));
            // Distinct priorities so no install replaces another.
            for (i, g) in rules.iter().enumerate() {
                let rule = FlowRule::new(RuleId(i as u64 + 1), i as u16, g.criteria, forward())
                    .with_timeouts(g.idle.map(R::from_integer), g.hard.map(R::from_integer));
                table.install_rule(rule, R::from_integer(0)).unwrap();
            }
            let (mut offered, mut missed, mut removed) = (0u64, 0u64, 0u64);
            let mut now = R::from_integer(0);
            for (dt, src, dst, size) in traffic {
                now += R::from_integer(dt);
                removed += table.expire_rules(now).iter().map(|f| f.byte_count).sum::<u64>();
                offered += u64::from(size);
                if table.lookup(&packet(src, dst, size), now) == MatchResult::TableMiss {
                    missed += u64::from(size);
                }
            }
            let live: u64 = table.rules().iter().map(|r| r.byte_count).sum();
            prop_assert_eq!(live + removed + missed, offered);
            Ok(())
        },
    )
    .map_err(|e| e.to_string())
}

pub fn rewrite_then_restore_is_identity(cases: u32) -> Outcome {
    runner(cases).run(
        &(arb_endpoint(), arb_endpoint(), arb_endpoint(), 1u32..1500),
        |(src, main, instance, size)| {
            let original: Packet<R> = packet(main, main, size);
            let original = Packet { src, ..original };
            let (there, d) = apply_actions(
                original.clone(),
                &[Action::RewriteDst(instance), Action::ForwardOut(PortId::UPLINK)],
            ).unwrap();
            prop_assert_eq!(d, Disposition::Forward(PortId::UPLINK));
            prop_assert_eq!(there.dst, instance);
            let (back, _) = apply_actions(there, &[Action::RewriteDst(main), Action::ForwardOut(PortId::LOCAL)]).unwrap();
            prop_assert_eq!(back, original.clone());
            let (s, _) = apply_actions(original.clone(), &[Action::RewriteSrc(instance), Action::RewriteSrc(src), Action::Drop]).unwrap();
            prop_assert_eq!(s, original);
            Ok(())
        },
    )
    .map_err(|e| e.to_string())
}

pub fn timeouts_are_exact(cases: u32) -> Outcome {
    runner(cases).run(
        &(0i64..50, 1i64..400, 1i64..9, prop::collection::vec(-5i64..5, 1..10)),
        |(installed, hard_num, den, probe_offsets)| {
            let t0 = R::from_integer(installed);
            let hard = R::new(hard_num, den);
            let deadline = t0 + hard;
            let m = MatchCriteria::any();
            let mut table = FlowTable::<R>::new(SwitchId(3));
            table.install_rule(FlowRule::new(RuleId(9), 1, m, forward()).with_timeouts(None, Some(hard)), t0).unwrap();
            prop_assert_eq!(table.next_expiry(), Some(deadline));
            let p = packet(ep(1, 80), ep(2, 80), 100);
            // Lookups before the deadline match; at and after it they miss.
            let mut probes: Vec<R> = probe_offsets.iter().map(|k| deadline + R::new(*k, 7 * den)).filter(|t| *t >= t0).collect();
            probes.sort();
            for t in &probes {
                let mut copy = table.clone();
                let hit = copy.lookup(&p, *t) != MatchResult::TableMiss;
                prop_assert_eq!(hit, *t < deadline);
            }
            // Sweeping emits exactly one notification, only once due.
            let before = table.expire_rules(deadline - R::new(1, 1000 * den));
            prop_assert!(before.is_empty());
            let at = table.expire_rules(deadline);
            prop_assert_eq!(at.len(), 1);
            prop_assert_eq!(at[0].rule_id, RuleId(9));
            prop_assert_eq!(at[0].duration, hard);
            prop_assert!(table.expire_rules(deadline + R::from_integer(100)).is_empty());
            prop_assert_eq!(table.lookup(&p, deadline + R::from_integer(1)), MatchResult::TableMiss);
            Ok(())
        },
    )
    .map_err(|e| e.to_string())
}

pub fn ties_go_to_smaller_id_in_any_install_order(cases: u32) -> Outcome {
    runner(cases).run(
        &(prop::collection::vec(arb_match(), 2..8), Just(()).prop_perturb(|_, mut rng| rng.random::<u64>()), arb_endpoint(), arb_endpoint()),
        |(criteria, order, src, dst)| {
            // Same priority, distinct matches; ids assigned then installed in a
            // shuffled order.
            let mut uniq = criteria.clone();
            uniq.sort_by_key(|m| format!("{m:?}"));
            uniq.dedup();
            let mut ids: Vec<usize> = (0..uniq.len()).collect();
            let mut seed = order;
            for i in (1..ids.len()).rev() {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ids.swap(i, (seed >> 33) as usize % (i + 1));
            }
            let mut a = FlowTable::<R>::new(SwitchId(0));
            let mut b = FlowTable::<R>::new(SwitchId(0));
            for (i, m) in uniq.iter().enumerate() {
                a.install_rule(FlowRule::new(RuleId(i as u64 + 1), 5, *m, forward()), R::from_integer(0)).unwrap();
            }
            for &i in &ids {
                b.install_rule(FlowRule::new(RuleId(i as u64 + 1), 5, uniq[i], forward()), R::from_integer(0)).unwrap();
            }
            let p = packet(src, dst, 64);
            let expected = uniq
                .iter()
                .enumerate()
                .find(|(_, m)| m.matches(&p))
                .map(|(i, _)| MatchResult::Matched(RuleId(i as u64 + 1)))
                .unwrap_or(MatchResult::TableMiss);
            prop_assert_eq!(a.lookup(&p, R::from_integer(1)), expected);
            prop_assert_eq!(b.lookup(&p, R::from_integer(1)), expected);
            Ok(())
        },
    )
    .map_err(|e| e.to_string())
}

/// Every flow-table property, by name.
pub type Property = fn(u32) -> Outcome;

pub const ALL: [(&str, Property); 6] = [
    ("lookup agrees with reference", lookup_agrees_with_reference),
    ("priority shadowing", shadowed_rule_never_counts),
    ("byte conservation", bytes_are_conserved),
    ("rewrite round trip", rewrite_then_restore_is_identity),
    ("timeout exactness", timeouts_are_exact),
    ("deterministic tie-breaking", ties_go_to_smaller_id_in_any_install_order),
];
