// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::scalar::Scalar;

/// Processing class of an event. At equal times, lower phases run first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Phase {
    RuleExpiry = 0,
    ControlApply = 1,
    ControllerNotify = 2,
    DiscoveryDelivery = 3,
    Delivery = 4,
    SwitchIngress = 5,
    ControllerPacketIn = 6,
    End = 7,
}

struct Entry<T, E> {
    time: T,
    phase: Phase,
    seq: u64,
    event: E,
}

impl<T: Scalar, E> Entry<T, E> {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .time_cmp(&other.time)
            .then(self.phase.cmp(&other.phase))
            .then(self.seq.cmp(&other.seq))
    }
}

impl<T: Scalar, E> PartialEq for Entry<T, E> {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar, E> Eq for Entry<T, E> {}

impl<T: Scalar, E> PartialOrd for Entry<T, E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar, E> Ord for Entry<T, E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

/// Pending events ordered by (time, phase, sequence). The sequence number is
/// assigned at scheduling time.
pub struct EventQueue<T, E> {
    heap: BinaryHeap<Entry<T, E>>,
    next_seq: u64,
    now: T,
}

impl<T: Scalar, E> Default for EventQueue<T, E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar, E> EventQueue<T, E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: T::zero(),
        }
    }

    pub fn now(&self) -> T {
        self.now
    }

    /// Panics if `time` lies before the last popped event.
    pub fn schedule(&mut self, time: T, phase: Phase, event: E) -> u64 {
        assert!(time >= self.now, "event scheduled in the past: {time} < {}", self.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time, phase, seq, event });
        seq
    }

    pub fn pop(&mut self) -> Option<(T, Phase, E)> {
        let entry = self.heap.pop()?;
        self.now = entry.time;
        Some((entry.time, entry.phase, entry.event))
    }

    pub fn peek_time(&self) -> Option<T> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
