// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::{FlowTable, RuleId, SwitchId};

/// When a switch pushes flow statistics to the controller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StatsTrigger<T> {
    /// Every `interval` seconds of simulated time.
    Periodic(T),
    /// As soon as any rule has accumulated this many bytes since the last
    /// report.
    Threshold(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleStats<T> {
    pub rule_id: RuleId,
    pub packet_count: u64,
    pub byte_count: u64,
    pub elapsed: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowStatsReport<T> {
    pub switch_id: SwitchId,
    pub emitted_at: T,
    pub entries: Vec<RuleStats<T>>,
}

impl<T: Scalar> FlowStatsReport<T> {
    pub fn snapshot(table: &FlowTable<T>, now: T) -> Self {
        FlowStatsReport {
            switch_id: table.switch_id(),
            emitted_at: now,
            entries: table
                .rules()
                .iter()
                .map(|r| RuleStats {
                    rule_id: r.id,
                    packet_count: r.packet_count,
                    byte_count: r.byte_count,
                    elapsed: now - r.installed_at,
                })
                .collect(),
        }
    }
}

/// Per-switch statistics emitter.
#[derive(Clone, Debug)]
pub struct StatsCollector<T> {
    trigger: StatsTrigger<T>,
    next_tick: Option<T>,
    bytes_at_last_report: HashMap<RuleId, u64>,
}

impl<T: Scalar> StatsCollector<T> {
    pub fn new(trigger: StatsTrigger<T>, start: T) -> Self {
        let next_tick = match trigger {
            StatsTrigger::Periodic(interval) => {
                assert!(interval > T::zero(), "stats interval must be positive");
                Some(start + interval)
            }
            StatsTrigger::Threshold(_) => None,
        };
        StatsCollector {
            trigger,
            next_tick,
            bytes_at_last_report: HashMap::new(),
        }
    }

    pub fn trigger(&self) -> StatsTrigger<T> {
        self.trigger
    }

    /// Next periodic boundary, if periodic.
    pub fn next_tick(&self) -> Option<T> {
        self.next_tick
    }

    /// Emits one report for every periodic boundary at or before `now`.
    pub fn on_tick(&mut self, table: &FlowTable<T>, now: T) -> Vec<FlowStatsReport<T>> {
        let StatsTrigger::Periodic(interval) = self.trigger else {
            return Vec::new();
        };
        let mut reports = Vec::new();
        while let Some(tick) = self.next_tick.filter(|tick| *tick <= now) {
            reports.push(self.emit(table, tick));
            self.next_tick = Some(tick + interval);
        }
        reports
    }

    /// Checks the byte threshold after a match.
    pub fn after_match(&mut self, table: &FlowTable<T>, now: T) -> Option<FlowStatsReport<T>> {
        let StatsTrigger::Threshold(limit) = self.trigger else {
            return None;
        };
        let crossed = table.rules().iter().any(|r| {
            let base = self.bytes_at_last_report.get(&r.id).copied().unwrap_or(0);
            r.byte_count.saturating_sub(base) >= limit
        });
        crossed.then(|| self.emit(table, now))
    }

    fn emit(&mut self, table: &FlowTable<T>, now: T) -> FlowStatsReport<T> {
        self.bytes_at_last_report = table.rules().iter().map(|r| (r.id, r.byte_count)).collect();
        FlowStatsReport::snapshot(table, now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_engine::{Action, Address, Endpoint, FlowRule, MatchCriteria, Packet, PortId};
    use crate::nf_model::{CorrelationId, SbiMessage, SbiMessageKind};

    fn table_with_catch_all() -> FlowTable<f64> {
        let mut table = FlowTable::new(SwitchId(3));
        let rule = FlowRule::new(
            RuleId(1),
            0,
            MatchCriteria::any(),
            vec![Action::ForwardOut(PortId::UPLINK)],
        );
        table.install_rule(rule, 0.0).unwrap();
        table
    }

    fn packet(size: u32) -> Packet<f64> {
        let a = Endpoint::new(Address(1), 80).unwrap();
        let b = Endpoint::new(Address(2), 80).unwrap();
        Packet {
            src: a,
            dst: b,
            message: SbiMessage::new(SbiMessageKind::SessionRequest, CorrelationId(0)),
            size_bytes: size,
            created_at: 0.0,
        }
    }

    #[test]
    fn periodic_without_traffic() {
        let table = FlowTable::<f64>::new(SwitchId(1));
        let mut stats = StatsCollector::new(StatsTrigger::Periodic(5.0), 0.0);
        let mut reports = Vec::new();
        let mut now = 0.0;
        while now <= 60.0 {
            reports.extend(stats.on_tick(&table, now));
            now += 1.0;
        }
        assert_eq!(reports.len(), 12);
        assert!(reports.iter().all(|r| r.entries.is_empty()));
        assert_eq!(reports.last().unwrap().emitted_at, 60.0);
    }

    #[test]
    fn threshold_fires_after_third_packet() {
        let mut table = table_with_catch_all();
        let mut stats = StatsCollector::new(StatsTrigger::Threshold(1000), 0.0);
        let mut fired_at = None;
        for i in 1..=5 {
            table.lookup(&packet(400), i as f64);
            if let Some(report) = stats.after_match(&table, i as f64) {
                fired_at.get_or_insert((i, report));
            }
        }
        let (i, report) = fired_at.unwrap();
        assert_eq!(i, 3);
        assert_eq!(report.entries[0].byte_count, 1200);
        assert_eq!(report.entries[0].packet_count, 3);
    }

    #[test]
    fn threshold_rearms_after_report() {
        let mut table = table_with_catch_all();
        let mut stats = StatsCollector::new(StatsTrigger::Threshold(1000), 0.0);
        let fired: Vec<usize> = (1..=6)
            .filter(|&i| {
                table.lookup(&packet(400), i as f64);
                stats.after_match(&table, i as f64).is_some()
            })
            .collect();
        assert_eq!(fired, vec![3, 6]);
    }
}
