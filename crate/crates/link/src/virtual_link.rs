// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

/// One direction of a lock-step serial link: each `tick` launches at most one
/// item and delivers whatever was launched `latency` ticks earlier.
#[derive(Clone, Debug)]
pub struct VirtualLink<T> {
    pipe: VecDeque<Option<T>>,
    sent: u64,
    delivered: u64,
}

impl<T> VirtualLink<T> {
    pub fn new(latency: usize) -> Self {
        let mut pipe = VecDeque::with_capacity(latency + 1);
        pipe.extend((0..latency).map(|_| None));
        VirtualLink { pipe, sent: 0, delivered: 0 }
    }

    pub fn latency(&self) -> usize {
        self.pipe.len()
    }

    pub fn tick(&mut self, input: Option<T>) -> Option<T> {
        if input.is_some() {
            self.sent += 1;
        }
        self.pipe.push_back(input);
        let out = self.pipe.pop_front().flatten();
        if out.is_some() {
            self.delivered += 1;
        }
        out
    }

    /// Items launched but not yet delivered.
    pub fn in_flight(&self) -> usize {
        self.pipe.iter().filter(|s| s.is_some()).count()
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }
}
