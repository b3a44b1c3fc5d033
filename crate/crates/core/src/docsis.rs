//! Upstream DOCSIS MAC: cable modems on a shared broadcast cable, polled by
//! the headend under Double Phase Polling.
//!
//! The modems are split into two groups by alternating positions of the
//! shortest-propagation-delay order. Polling one group overlaps with the
//! grant service of the other, so request round trips do not leave the
//! upstream channel idle. Service is gated: a grant covers exactly the
//! backlog reported in the request.

use serde::{Deserialize, Serialize};

use crate::des::{RngStream, SimTime};
use crate::rates::{ratio, Bitrate};
use crate::traffic::{make_generator, Arrival, Generator, TrafficConfig, TrafficError};

/// Coaxial propagation speed, km/s.
pub const CABLE_KM_PER_S: f64 = 2.0e5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CableConfig {
    pub capacity_gbps: f64,
    /// Share of the capacity left for data after contention and maintenance slots.
    pub data_fraction: f64,
    pub min_distance_km: f64,
    pub max_distance_km: f64,
    /// Size of a request message on the cable.
    pub request_bytes: u32,
}

impl Default for CableConfig {
    fn default() -> Self {
        CableConfig {
            capacity_gbps: 1.0,
            data_fraction: 0.8,
            min_distance_km: 1.0,
            max_distance_km: 2.0,
            request_bytes: 64,
        }
    }
}

/// A packet waiting in a modem, or travelling upstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueuedPacket {
    pub created: SimTime,
    pub bytes: u32,
}

#[derive(Debug)]
pub struct CableModem {
    pub id: u32,
    pub distance_km: f64,
    pub propagation: SimTime,
    generator: Generator,
    lookahead: Option<Arrival>,
    /// Packets covered by the last request and not yet granted.
    requested: Vec<QueuedPacket>,
    pending_request_bytes: u64,
}

impl CableModem {
    pub fn new(id: u32, distance_km: f64, generator: Generator) -> Self {
        let mut generator = generator;
        let lookahead = generator.next_arrival();
        CableModem {
            id,
            distance_km,
            propagation: SimTime::from_secs_f64(distance_km / CABLE_KM_PER_S),
            generator,
            lookahead,
            requested: Vec::new(),
            pending_request_bytes: 0,
        }
    }

    pub fn pending_request_bytes(&self) -> u64 {
        self.pending_request_bytes
    }

    /// Takes every packet created before `at` into the pending request.
    fn snapshot(&mut self, at: SimTime) {
        while let Some(a) = self.lookahead {
            if a.time >= at {
                break;
            }
            self.requested.push(QueuedPacket {
                created: a.time,
                bytes: a.bytes,
            });
            self.pending_request_bytes += a.bytes as u64;
            self.lookahead = self.generator.next_arrival();
        }
    }

    fn take_granted(&mut self) -> Vec<QueuedPacket> {
        self.pending_request_bytes = 0;
        std::mem::take(&mut self.requested)
    }
}

/// A modem's answer to a poll.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub cm: u32,
    pub group: usize,
    pub bytes: u64,
    /// Instant the modem took its backlog snapshot and sent the request.
    pub sent_at: SimTime,
    /// Instant the request is completely received at the remote node.
    pub at_remote_node: SimTime,
}

/// Polls `cm` so that its request leaves at `sent_at`.
///
/// The request reports every packet created before `sent_at` that no
/// earlier request covered; an empty backlog still yields a request.
pub fn request_message(cm: &mut CableModem, group: usize, sent_at: SimTime, request_tx: SimTime) -> Request {
    cm.snapshot(sent_at);
    Request {
        cm: cm.id,
        group,
        bytes: cm.pending_request_bytes,
        sent_at,
        at_remote_node: sent_at + cm.propagation + request_tx,
    }
}

/// One upstream transmission opportunity on the data channel, timed at the remote node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grant {
    pub cm: u32,
    pub start: SimTime,
    pub end: SimTime,
    pub packets: Vec<QueuedPacket>,
}

impl Grant {
    /// Instant each packet is completely received at the remote node.
    pub fn packet_arrivals(&self, data_bps: u64) -> impl Iterator<Item = (QueuedPacket, SimTime)> + '_ {
        let mut sent_bits = 0u64;
        self.packets.iter().map(move |p| {
            sent_bits += p.bytes as u64 * 8;
            (*p, self.start + SimTime::transmission(sent_bits, data_bps))
        })
    }
}

#[derive(Debug)]
pub struct CablePlant {
    pub capacity: Bitrate,
    pub data_fraction: f64,
    pub cms: Vec<CableModem>,
    /// Modem indices by ascending propagation delay.
    pub polling_order: Vec<usize>,
    request_tx: SimTime,
    channel_free: SimTime,
}

impl CablePlant {
    /// Builds `num_cms` modems with distances drawn from `placement` and
    /// traffic from per-modem streams `(seed, first_stream + i)`.
    pub fn new(
        cfg: &CableConfig,
        traffic: &TrafficConfig,
        num_cms: u32,
        seed: u64,
        placement: &mut RngStream,
        first_stream: u64,
    ) -> Result<Self, TrafficError> {
        use rand::Rng;
        let capacity = Bitrate::from_gbps_f64(cfg.capacity_gbps);
        let per_cm = capacity * ratio(1, num_cms.max(1) as i128);
        let mut cms = Vec::with_capacity(num_cms as usize);
        for i in 0..num_cms {
            let d = placement.random_range(cfg.min_distance_km..=cfg.max_distance_km);
            let gen = make_generator(traffic, RngStream::new(seed, first_stream + i as u64), per_cm, capacity)?;
            cms.push(CableModem::new(i, d, gen));
        }
        let mut polling_order: Vec<usize> = (0..cms.len()).collect();
        polling_order.sort_by(|&a, &b| cms[a].propagation.cmp(&cms[b].propagation).then(a.cmp(&b)));
        let request_tx = SimTime::transmission(cfg.request_bytes as u64 * 8, capacity.ceil_bps_u64());
        Ok(CablePlant {
            capacity,
            data_fraction: cfg.data_fraction,
            cms,
            polling_order,
            request_tx,
            channel_free: SimTime::ZERO,
        })
    }

    /// Effective data rate on the upstream channel, whole bit/s.
    pub fn data_bps(&self) -> u64 {
        (self.capacity.as_bps_f64() * self.data_fraction).round() as u64
    }

    pub fn channel_free(&self) -> SimTime {
        self.channel_free
    }

    /// Polls every modem of `group`; polls leave the headend at `now` and
    /// reach the remote node after `downstream`.
    ///
    /// Request opportunities are back-to-back in polling order and arrive at
    /// the remote node from the first multiple of `slot_grid` at which every
    /// polled modem can answer. A zero `slot_grid` disables the alignment.
    pub fn poll(
        &mut self,
        cycle: &PollingCycle,
        group: usize,
        now: SimTime,
        downstream: SimTime,
        slot_grid: SimTime,
    ) -> Vec<Request> {
        let tx = self.request_tx;
        let members = cycle.group(group);
        let mut start = SimTime::ZERO;
        for (k, &i) in members.iter().enumerate() {
            let p = self.cms[i].propagation;
            let earliest = (now + downstream + p + p).saturating_sub(SimTime::from_ps(tx.as_ps() * k as u64));
            start = start.max(earliest);
        }
        if slot_grid > SimTime::ZERO {
            start = SimTime::from_ps(start.as_ps().div_ceil(slot_grid.as_ps()) * slot_grid.as_ps());
        }
        members
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let cm = &mut self.cms[i];
                let slot = start + SimTime::from_ps(tx.as_ps() * k as u64);
                let sent_at = slot - cm.propagation;
                request_message(cm, group, sent_at, tx)
            })
            .collect()
    }

    /// Schedules gated grants for `group` on the data channel, in polling
    /// order, for grants issued at the headend at `now`.
    ///
    /// A burst reaches the remote node no earlier than the grant's trip
    /// down plus the modem's round trip on the cable, and never overlaps
    /// an earlier burst.
    pub fn grant(&mut self, cycle: &PollingCycle, group: usize, now: SimTime, downstream: SimTime) -> Vec<Grant> {
        let data_bps = self.data_bps();
        let mut grants = Vec::new();
        for &i in cycle.group(group) {
            let cm = &mut self.cms[i];
            if cm.pending_request_bytes == 0 {
                continue;
            }
            let earliest = now + downstream + cm.propagation + cm.propagation;
            let start = self.channel_free.max(earliest);
            let bits = cm.pending_request_bytes * 8;
            let end = start + SimTime::transmission(bits, data_bps);
            self.channel_free = end;
            grants.push(Grant {
                cm: cm.id,
                start,
                end,
                packets: cm.take_granted(),
            });
        }
        grants
    }

    /// Bytes reported in requests but not yet granted.
    pub fn requested_backlog(&self) -> u64 {
        self.cms.iter().map(|c| c.pending_request_bytes).sum()
    }
}

/// The two DPP polling groups and which one is collecting requests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PollingCycle {
    pub group_a: Vec<usize>,
    pub group_b: Vec<usize>,
    /// Group whose requests are in flight.
    pub requesting: usize,
    pub cycle_index: u64,
}

impl PollingCycle {
    /// Alternating split of the polling order: positions 0, 2, 4, ... and 1, 3, 5, ...
    pub fn new(polling_order: &[usize]) -> Self {
        let group_a = polling_order.iter().step_by(2).copied().collect();
        let group_b = polling_order.iter().skip(1).step_by(2).copied().collect();
        PollingCycle {
            group_a,
            group_b,
            requesting: 0,
            cycle_index: 0,
        }
    }

    pub fn group(&self, g: usize) -> &[usize] {
        if g == 0 {
            &self.group_a
        } else {
            &self.group_b
        }
    }

    /// Hands the request phase to the other group; a full cycle ends each
    /// time group A requests again.
    pub fn switch(&mut self) -> usize {
        self.requesting = 1 - self.requesting;
        if self.requesting == 0 {
            self.cycle_index += 1;
        }
        self.requesting
    }
}
