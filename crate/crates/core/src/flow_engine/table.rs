// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::scalar::Scalar;

use super::{Action, Endpoint, FlowError, MatchCriteria, Packet, PortId, RuleId, SwitchId};

/// One flow-table entry.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRule<T> {
    pub id: RuleId,
    pub priority: u16,
    pub match_criteria: MatchCriteria,
    pub actions: Vec<Action>,
    pub idle_timeout: Option<T>,
    pub hard_timeout: Option<T>,
    pub installed_at: T,
    pub last_matched_at: T,
    pub packet_count: u64,
    pub byte_count: u64,
}

impl<T: Scalar> FlowRule<T> {
    /// A rule as carried in a FlowMod: no timeouts, zeroed counters.
    pub fn new(id: RuleId, priority: u16, match_criteria: MatchCriteria, actions: Vec<Action>) -> Self {
        FlowRule {
            id,
            priority,
            match_criteria,
            actions,
            idle_timeout: None,
            hard_timeout: None,
            installed_at: T::zero(),
            last_matched_at: T::zero(),
            packet_count: 0,
            byte_count: 0,
        }
    }

    pub fn with_timeouts(mut self, idle: Option<T>, hard: Option<T>) -> Self {
        self.idle_timeout = idle;
        self.hard_timeout = hard;
        self
    }

    /// Earliest instant at which the rule is expired, given no further
    /// matches.
    pub fn deadline(&self) -> Option<T> {
        let hard = self.hard_timeout.map(|h| self.installed_at + h);
        let idle = self
            .idle_timeout
            .map(|i| self.installed_at.max_of(self.last_matched_at) + i);
        match (hard, idle) {
            (Some(a), Some(b)) => Some(a.min_of(b)),
            (a, b) => a.or(b),
        }
    }

    /// Inclusive boundary: a rule whose elapsed time equals its timeout is
    /// already gone.
    pub fn expiry_reason(&self, now: T) -> Option<RemovalReason> {
        if let Some(hard) = self.hard_timeout {
            if now - self.installed_at >= hard {
                return Some(RemovalReason::HardTimeout);
            }
        }
        if let Some(idle) = self.idle_timeout {
            if now - self.installed_at.max_of(self.last_matched_at) >= idle {
                return Some(RemovalReason::IdleTimeout);
            }
        }
        None
    }

    fn same_slot(&self, other: &FlowRule<T>) -> bool {
        self.priority == other.priority && self.match_criteria == other.match_criteria
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchResult {
    Matched(RuleId),
    TableMiss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RemovalReason {
    IdleTimeout,
    HardTimeout,
}

/// Notification emitted once per expired rule, carrying its final counters.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRemoved<T> {
    pub switch_id: SwitchId,
    pub rule_id: RuleId,
    pub reason: RemovalReason,
    pub packet_count: u64,
    pub byte_count: u64,
    pub duration: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortAttachment {
    Nf(Endpoint),
    Link,
}

/// What happens to a packet once its action list has run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disposition {
    Forward(PortId),
    ToController,
    Drop,
}

#[derive(Clone, Debug)]
pub struct FlowTable<T> {
    switch_id: SwitchId,
    /// Kept sorted by (priority descending, id ascending) so the first
    /// matching live rule is the lookup result.
    rules: Vec<FlowRule<T>>,
    ports: BTreeMap<PortId, PortAttachment>,
}

impl<T: Scalar> FlowTable<T> {
    pub fn new(switch_id: SwitchId) -> Self {
        FlowTable {
            switch_id,
            rules: Vec::new(),
            ports: BTreeMap::new(),
        }
    }

    /// Table for a switch co-located with one NF: local port to the NF,
    /// uplink to the network.
    pub fn for_nf(switch_id: SwitchId, nf: Endpoint) -> Self {
        let mut table = Self::new(switch_id);
        table.attach(PortId::LOCAL, PortAttachment::Nf(nf));
        table.attach(PortId::UPLINK, PortAttachment::Link);
        table
    }

    pub fn switch_id(&self) -> SwitchId {
        self.switch_id
    }

    pub fn attach(&mut self, port: PortId, attachment: PortAttachment) {
        self.ports.insert(port, attachment);
    }

    pub fn port(&self, port: PortId) -> Option<PortAttachment> {
        self.ports.get(&port).copied()
    }

    pub fn ports(&self) -> impl Iterator<Item = (PortId, PortAttachment)> + '_ {
        self.ports.iter().map(|(p, a)| (*p, *a))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> &[FlowRule<T>] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> Option<&FlowRule<T>> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Installs `rule` at `now` with zeroed counters. A rule occupying the
    /// same (match, priority) slot is replaced without a removal
    /// notification.
    pub fn install_rule(&mut self, mut rule: FlowRule<T>, now: T) -> Result<RuleId, FlowError> {
        validate_actions(&rule.actions)?;
        let positive = |t: Option<T>| t.is_none_or(|t| t > T::zero());
        if !positive(rule.idle_timeout) || !positive(rule.hard_timeout) {
            return Err(FlowError::NonPositiveTimeout);
        }
        if let Some(existing) = self.rules.iter().find(|r| r.id == rule.id) {
            if !existing.same_slot(&rule) {
                return Err(FlowError::DuplicateRuleId(rule.id));
            }
        }
        self.rules.retain(|r| !r.same_slot(&rule));

        rule.installed_at = now;
        rule.last_matched_at = now;
        rule.packet_count = 0;
        rule.byte_count = 0;
        let id = rule.id;
        let pos = self
            .rules
            .partition_point(|r| (r.priority, std::cmp::Reverse(r.id)) > (rule.priority, std::cmp::Reverse(rule.id)));
        self.rules.insert(pos, rule);
        Ok(id)
    }

    /// Highest-priority live rule matching `packet`; ties go to the smaller
    /// rule id. Updates the winner's counters.
    pub fn lookup(&mut self, packet: &Packet<T>, now: T) -> MatchResult {
        let hit = self
            .rules
            .iter_mut()
            .find(|r| r.expiry_reason(now).is_none() && r.match_criteria.matches(packet));
        match hit {
            Some(rule) => {
                rule.packet_count += 1;
                rule.byte_count += u64::from(packet.size_bytes);
                rule.last_matched_at = now;
                MatchResult::Matched(rule.id)
            }
            None => MatchResult::TableMiss,
        }
    }

    /// Lookup followed by the matched rule's actions.
    pub fn process(&mut self, packet: &Packet<T>, now: T) -> (MatchResult, Option<(Packet<T>, Disposition)>) {
        let result = self.lookup(packet, now);
        match result {
            MatchResult::Matched(id) => {
                let rule = self.rule(id).expect("matched rule present");
                let out = apply_actions(packet.clone(), &rule.actions)
                    .expect("installed rules carry valid action lists");
                (result, Some(out))
            }
            MatchResult::TableMiss => (result, None),
        }
    }

    /// Removes every expired rule, one notification each.
    pub fn expire_rules(&mut self, now: T) -> Vec<FlowRemoved<T>> {
        let switch_id = self.switch_id;
        let mut removed = Vec::new();
        self.rules.retain(|rule| match rule.expiry_reason(now) {
            Some(reason) => {
                removed.push(FlowRemoved {
                    switch_id,
                    rule_id: rule.id,
                    reason,
                    packet_count: rule.packet_count,
                    byte_count: rule.byte_count,
                    duration: now - rule.installed_at,
                });
                false
            }
            None => true,
        });
        removed
    }

    /// Earliest deadline among installed rules.
    pub fn next_expiry(&self) -> Option<T> {
        self.rules
            .iter()
            .filter_map(FlowRule::deadline)
            .reduce(|a, b| a.min_of(b))
    }

    /// Tab-separated dump, one rule per line in lookup order:
    /// id, priority, src addr, src port, dst addr, dst port, actions,
    /// idle timeout, hard timeout, packets, bytes. `*` marks an absent field.
    pub fn dump(&self) -> String {
        fn opt<V: std::fmt::Display>(v: Option<V>) -> String {
            v.map_or_else(|| "*".to_string(), |v| v.to_string())
        }
        let mut out = String::new();
        for r in &self.rules {
            let m = &r.match_criteria;
            let actions = r
                .actions
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",");
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.id,
                r.priority,
                opt(m.src_address),
                opt(m.src_port),
                opt(m.dst_address),
                opt(m.dst_port),
                actions,
                opt(r.idle_timeout),
                opt(r.hard_timeout),
                r.packet_count,
                r.byte_count,
            );
        }
        out
    }
}

fn validate_actions(actions: &[Action]) -> Result<(), FlowError> {
    match actions.iter().position(Action::is_terminal) {
        None => Err(FlowError::MissingTerminalAction),
        Some(pos) if pos + 1 != actions.len() => Err(FlowError::TerminalNotLast(pos)),
        Some(_) => Ok(()),
    }
}

/// Runs an action list. Rewrites touch only the endpoints; message and size
/// pass through unchanged.
pub fn apply_actions<T>(mut packet: Packet<T>, actions: &[Action]) -> Result<(Packet<T>, Disposition), FlowError> {
    validate_actions(actions)?;
    for action in actions {
        match *action {
            Action::RewriteDst(ep) => packet.dst = ep,
            Action::RewriteSrc(ep) => packet.src = ep,
            Action::ForwardOut(port) => return Ok((packet, Disposition::Forward(port))),
            Action::SendToController => return Ok((packet, Disposition::ToController)),
            Action::Drop => return Ok((packet, Disposition::Drop)),
        }
    }
    unreachable!("validated list ends in a terminal action")
}
