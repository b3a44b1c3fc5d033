//! Remote node, shared optical fronthaul and the end-to-end upstream simulation.
//!
//! Cable upstream bursts reach the remote node, are encapsulated (UEPI for
//! R-PHY, frequency-domain I/Q for R-FFT) and queue in a single FIFO toward
//! the headend together with the LTE baseband datagrams. The
//! DOCSIS MAC runs at the headend, so every request crosses the fronthaul
//! before a grant can be issued.

use std::collections::{BTreeMap, VecDeque};

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Batching, ConfigError, RemoteNodeMode, ScenarioConfig};
use crate::des::{RngStream, Scheduler, SimTime};
use crate::docsis::{CablePlant, PollingCycle};
use crate::rates::{iq_expansion_factor, parse_rational, Bitrate, IqMapping, Rational};
use crate::traffic::{make_generator, Generator};
use crate::sched::{nonpreemptive_schedulable_pair, PeriodicTask};

/// Optical propagation speed, m/s.
pub const FIBER_M_PER_S: f64 = 2.0e8;

/// Stream ids reserved for modem placement and queue sampling; traffic streams start at 0.
const PLACEMENT_STREAM: u64 = 1 << 32;
const SAMPLING_STREAM: u64 = PLACEMENT_STREAM + 1;
const LTE_STREAM: u64 = PLACEMENT_STREAM + 2;

fn rational(x: f64) -> Rational {
    parse_rational(&format!("{x:?}")).unwrap_or_else(|| panic!("{x} is not a finite decimal"))
}

fn secs(x: f64) -> SimTime {
    SimTime::from_secs_f64(x)
}

/// Priority class on the fronthaul FIFO.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Priority {
    High,
    Normal,
}

/// Byte expansion applied at the remote node, held as an exact ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Encapsulation {
    num: u64,
    den: u64,
}

impl Encapsulation {
    pub fn new(factor: Rational) -> Self {
        assert!(*factor.numer() > 0 && *factor.denom() > 0, "expansion factor must be positive");
        Encapsulation {
            num: *factor.numer() as u64,
            den: *factor.denom() as u64,
        }
    }

    /// Bytes on the wire for `bytes` of cable payload, rounded up.
    pub fn expand(self, bytes: u64) -> u64 {
        (bytes as u128 * self.num as u128).div_ceil(self.den as u128) as u64
    }

    pub fn factor(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Encapsulation and request priority of a remote-node mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RemoteNode {
    pub mode: RemoteNodeMode,
    pub data: Encapsulation,
    pub request_priority: Priority,
}

impl RemoteNode {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        match cfg.mode {
            RemoteNodeMode::RPhy => Ok(RemoteNode {
                mode: cfg.mode,
                data: Encapsulation::new(Rational::from_integer(1) + rational(cfg.fronthaul.uepi_overhead)),
                request_priority: Priority::High,
            }),
            RemoteNodeMode::RFft => {
                let p = &cfg.docsis_phy;
                let mapping = IqMapping::new(rational(p.code_rate), p.qam_bits, p.bits_per_component)
                    .map_err(|e| ConfigError::Parse(e.to_string()))?;
                Ok(RemoteNode {
                    mode: cfg.mode,
                    data: Encapsulation::new(iq_expansion_factor(&mapping)),
                    request_priority: Priority::Normal,
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Datagram {
    pub bytes: u32,
    pub priority: Priority,
}

/// Encapsulates `bytes` of cable upstream and segments the result into
/// datagrams of at most `frame_bytes`.
pub fn forward_cable_upstream(node: &RemoteNode, bytes: u64, is_request: bool, frame_bytes: u32) -> Vec<Datagram> {
    let priority = if is_request { node.request_priority } else { Priority::Normal };
    let mut left = node.data.expand(bytes);
    let mut out = Vec::new();
    while left > 0 {
        let b = left.min(frame_bytes as u64);
        out.push(Datagram {
            bytes: b as u32,
            priority,
        });
        left -= b;
    }
    out
}

/// Constant-bitrate LTE baseband stream: datagram `k` arrives at `k * spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LteBasebandSource {
    pub rate_bps: u64,
    pub frame_bytes: u32,
}

impl LteBasebandSource {
    pub fn new(rho_b: f64, capacity_bps: u64, frame_bytes: u32) -> Self {
        LteBasebandSource {
            rate_bps: (rho_b * capacity_bps as f64).round() as u64,
            frame_bytes,
        }
    }

    /// Arrival of datagram `k` at the remote node FIFO, `None` at zero load.
    pub fn arrival(&self, k: u64) -> Option<SimTime> {
        if self.rate_bps == 0 {
            return None;
        }
        let ps = k as u128 * self.frame_bytes as u128 * 8 * 1_000_000_000_000 / self.rate_bps as u128;
        Some(SimTime::from_ps(ps as u64))
    }
}

enum LteSource {
    Cbr { src: LteBasebandSource, next: u64 },
    Generated(Box<Generator>),
}

/// LTE datagram arrivals before the end of the run that have not started
/// service. Holds at least one arrival unless the source is exhausted.
struct LteFeed {
    source: LteSource,
    end: SimTime,
    exhausted: bool,
    fetched: VecDeque<SimTime>,
}

impl LteFeed {
    fn new(cfg: &ScenarioConfig, link_bps: u64) -> Result<Self, ConfigError> {
        let source = match cfg.lte_traffic_config() {
            None => LteSource::Cbr {
                src: LteBasebandSource::new(cfg.rho_b, link_bps, cfg.fronthaul.frame_bytes),
                next: 0,
            },
            Some(t) => {
                let link = Bitrate::from_bps(Rational::from_integer(link_bps as i128));
                let g = make_generator(&t, RngStream::new(cfg.seed, LTE_STREAM), link, link)
                    .map_err(|e| ConfigError::Parse(format!("LTE traffic: {e}")))?;
                LteSource::Generated(Box::new(g))
            }
        };
        let mut feed = LteFeed {
            source,
            end: secs(cfg.warmup_s + cfg.duration_s),
            exhausted: false,
            fetched: VecDeque::new(),
        };
        feed.fetch();
        Ok(feed)
    }

    fn fetch(&mut self) {
        if self.exhausted {
            return;
        }
        let next = match &mut self.source {
            LteSource::Cbr { src, next } => {
                *next += 1;
                src.arrival(*next - 1)
            }
            LteSource::Generated(g) => g.next_arrival().map(|a| a.time),
        };
        match next.filter(|&t| t < self.end) {
            Some(t) => self.fetched.push_back(t),
            None => self.exhausted = true,
        }
    }

    fn head(&self) -> Option<SimTime> {
        self.fetched.front().copied()
    }

    fn pop(&mut self) -> Option<SimTime> {
        let t = self.fetched.pop_front();
        if self.fetched.is_empty() {
            self.fetch();
        }
        t
    }

    /// Datagrams that arrived strictly before `now` and are still waiting.
    fn waiting_before(&mut self, now: SimTime) -> u64 {
        while self.fetched.back().is_some_and(|&t| t < now) && !self.exhausted {
            self.fetch();
        }
        self.fetched.partition_point(|&t| t < now) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Stream {
    Docsis,
    Lte,
}

impl std::fmt::Display for Stream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stream::Docsis => "DOCSIS",
            Stream::Lte => "LTE",
        })
    }
}

/// Mean delay of one traffic stream over the measurement window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelayStats {
    pub stream: Stream,
    pub mean_delay_s: f64,
    pub max_delay_s: f64,
    pub count: u64,
    pub warmup_excluded_s: f64,
    pub measurement_duration_s: f64,
}

#[derive(Clone, Debug)]
struct DelayAccumulator {
    sum_ps: u128,
    max_ps: u64,
    count: u64,
}

impl DelayAccumulator {
    fn new() -> Self {
        DelayAccumulator {
            sum_ps: 0,
            max_ps: 0,
            count: 0,
        }
    }

    fn add(&mut self, d: SimTime) {
        self.sum_ps += d.as_ps() as u128;
        self.max_ps = self.max_ps.max(d.as_ps());
        self.count += 1;
    }

    fn mean_s(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.sum_ps / self.count as u128) as f64 * 1e-12
        }
    }

    fn finish(&self, stream: Stream, cfg: &ScenarioConfig) -> DelayStats {
        DelayStats {
            stream,
            mean_delay_s: self.mean_s(),
            max_delay_s: self.max_ps as f64 * 1e-12,
            count: self.count,
            warmup_excluded_s: cfg.warmup_s,
            measurement_duration_s: cfg.duration_s,
        }
    }
}

/// Fronthaul FIFO measurements over the measurement window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FronthaulStats {
    pub utilization: f64,
    pub datagrams: u64,
    pub mean_wait_s: f64,
    /// Time-average number of datagrams waiting, from periodic samples.
    pub mean_waiting_sampled: f64,
    pub backlog_slope_bytes_per_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub mode: RemoteNodeMode,
    pub rho_c: f64,
    pub rho_b: f64,
    pub hurst: f64,
    pub distance_km: f64,
    pub seed: u64,
    pub docsis: DelayStats,
    pub lte: DelayStats,
    pub saturated: bool,
    pub fronthaul: FronthaulStats,
    pub cable_throughput_bps: f64,
    pub polling_cycles: u64,
    /// Whether the configured FFT compute times are schedulable (R-FFT only).
    pub fft_feasible: Option<bool>,
}

/// One delivered DOCSIS packet, for per-packet logs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PacketRecord {
    pub cm_id: u32,
    pub created_at_ps: u64,
    pub delivered_at_headend_ps: u64,
}

#[derive(Clone, Copy, Debug)]
enum ItemKind {
    Packet { cm: u32, created: SimTime },
    Request { group: usize },
}

#[derive(Clone, Copy, Debug)]
struct Item {
    rn_time: SimTime,
    seq: u64,
    bytes: u32,
    kind: ItemKind,
}

#[derive(Default)]
struct PendingBatch {
    normal: Vec<Item>,
    high: Vec<Item>,
}

/// Encapsulated bytes that entered the FIFO together, served datagram by datagram.
struct QueuedBatch {
    arrival: SimTime,
    items: Vec<Item>,
    /// Datagram index carrying each item's last byte.
    last_datagram: Vec<u64>,
    total_bytes: u64,
    datagrams: u64,
    next_datagram: u64,
    item_cursor: usize,
}

impl QueuedBatch {
    fn new(arrival: SimTime, mut items: Vec<Item>, encap: Encapsulation, frame: u64) -> Self {
        items.sort_by_key(|i| (i.rn_time, i.seq));
        let mut raw = 0u64;
        let last_datagram = items
            .iter()
            .map(|i| {
                raw += i.bytes as u64;
                (encap.expand(raw) - 1) / frame
            })
            .collect();
        let total_bytes = encap.expand(raw);
        QueuedBatch {
            arrival,
            items,
            last_datagram,
            total_bytes,
            datagrams: total_bytes.div_ceil(frame),
            next_datagram: 0,
            item_cursor: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Ev {
    BatchReady(SimTime),
    LinkFree(u64),
    GroupComplete(usize),
    Sample,
}

#[derive(Clone, Copy, Debug)]
enum Choice {
    High,
    Normal,
    Lte,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    sched: Scheduler<Ev>,
    plant: CablePlant,
    cycle: PollingCycle,
    node: RemoteNode,
    lte: LteFeed,
    end: SimTime,
    warmup: SimTime,
    cin: SimTime,
    symbol: SimTime,
    frame: u64,
    link_bps: u64,
    seq: u64,

    pending: BTreeMap<SimTime, PendingBatch>,
    high: VecDeque<QueuedBatch>,
    normal: VecDeque<QueuedBatch>,
    queued_bytes: u64,
    queued_datagrams: u64,
    free_at: SimTime,
    armed: Option<(SimTime, u64)>,
    generation: u64,

    group_size: [usize; 2],
    group_received: [usize; 2],
    group_latest: [SimTime; 2],
    granted_undelivered: u64,

    docsis: DelayAccumulator,
    lte_delay: DelayAccumulator,
    wait: DelayAccumulator,
    busy_ps: u128,
    cable_bytes_delivered: u64,
    samples: Vec<(f64, f64)>,
    waiting_samples: Vec<f64>,
    sampler: RngStream,
    observer: Option<&'a mut dyn FnMut(PacketRecord)>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, observer: Option<&'a mut dyn FnMut(PacketRecord)>) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let node = RemoteNode::new(cfg)?;
        let mut placement = RngStream::new(cfg.seed, PLACEMENT_STREAM);
        let plant = CablePlant::new(&cfg.cable, &cfg.traffic_config(), cfg.num_cms, cfg.seed, &mut placement, 0)
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        let cycle = PollingCycle::new(&plant.polling_order);
        let link_bps = (cfg.fronthaul.capacity_gbps * 1e9).round() as u64;
        let group_size = [cycle.group_a.len(), cycle.group_b.len()];
        Ok(Sim {
            cfg,
            sched: Scheduler::new(),
            plant,
            cycle,
            node,
            lte: LteFeed::new(cfg, link_bps)?,
            end: secs(cfg.warmup_s + cfg.duration_s),
            warmup: secs(cfg.warmup_s),
            cin: secs(cfg.distance_km * 1e3 / FIBER_M_PER_S),
            symbol: secs(cfg.docsis_phy.symbol_us * 1e-6),
            frame: cfg.fronthaul.frame_bytes as u64,
            link_bps,
            seq: 0,
            pending: BTreeMap::new(),
            high: VecDeque::new(),
            normal: VecDeque::new(),
            queued_bytes: 0,
            queued_datagrams: 0,
            free_at: SimTime::ZERO,
            armed: None,
            generation: 0,
            group_size,
            group_received: [0; 2],
            group_latest: [SimTime::ZERO; 2],
            granted_undelivered: 0,
            docsis: DelayAccumulator::new(),
            lte_delay: DelayAccumulator::new(),
            wait: DelayAccumulator::new(),
            busy_ps: 0,
            cable_bytes_delivered: 0,
            samples: Vec::new(),
            waiting_samples: Vec::new(),
            sampler: RngStream::new(cfg.seed, SAMPLING_STREAM),
            observer,
        })
    }

    fn batch_key(&self, rn_time: SimTime) -> SimTime {
        match self.cfg.fronthaul.batching {
            Batching::Packet => rn_time,
            Batching::Symbol => {
                let s = self.symbol.as_ps();
                SimTime::from_ps(rn_time.as_ps().div_ceil(s) * s)
            }
        }
    }

    fn add_item(&mut self, rn_time: SimTime, bytes: u32, kind: ItemKind) {
        let key = self.batch_key(rn_time);
        let item = Item {
            rn_time,
            seq: self.seq,
            bytes,
            kind,
        };
        self.seq += 1;
        let high = matches!(kind, ItemKind::Request { .. }) && self.node.request_priority == Priority::High;
        let batch = self.pending.entry(key).or_insert_with(|| {
            self.sched.schedule(key, Ev::BatchReady(key));
            PendingBatch::default()
        });
        if high {
            batch.high.push(item);
        } else {
            batch.normal.push(item);
        }
    }

    fn poll(&mut self, group: usize) {
        let now = self.sched.now();
        let requests = self.plant.poll(&self.cycle, group, now, self.cin, self.symbol);
        self.group_received[group] = 0;
        self.group_latest[group] = SimTime::ZERO;
        let bytes = match self.node.mode {
            RemoteNodeMode::RPhy => self.cfg.fronthaul.rphy_request_bytes,
            RemoteNodeMode::RFft => self.cfg.cable.request_bytes,
        };
        for r in requests {
            self.add_item(r.at_remote_node, bytes, ItemKind::Request { group });
        }
    }

    fn on_group_complete(&mut self, group: usize) {
        let now = self.sched.now();
        let data_bps = self.plant.data_bps();
        let grants = self.plant.grant(&self.cycle, group, now, self.cin);
        for g in &grants {
            let arrivals: Vec<_> = g.packet_arrivals(data_bps).collect();
            for (p, at) in arrivals {
                self.granted_undelivered += p.bytes as u64;
                self.add_item(at, p.bytes, ItemKind::Packet { cm: g.cm, created: p.created });
            }
        }
        let next = self.cycle.switch();
        self.poll(next);
    }

    fn on_batch_ready(&mut self, key: SimTime) {
        let batch = self.pending.remove(&key).expect("batch scheduled once");
        let encap = self.node.data;
        for (items, high) in [(batch.high, true), (batch.normal, false)] {
            if items.is_empty() {
                continue;
            }
            let q = QueuedBatch::new(key, items, encap, self.frame);
            self.queued_bytes += q.total_bytes;
            self.queued_datagrams += q.datagrams;
            if high {
                self.high.push_back(q);
            } else {
                self.normal.push_back(q);
            }
        }
        let decision = self.free_at.max(key);
        if self.armed.is_none_or(|(t, _)| decision < t) {
            self.arm(decision);
        }
    }

    fn arm(&mut self, at: SimTime) {
        self.generation += 1;
        self.armed = Some((at, self.generation));
        self.sched.schedule(at, Ev::LinkFree(self.generation));
    }

    /// Next service decision given the current queue contents.
    fn next_decision(&self) -> Option<(SimTime, Choice)> {
        let h = self.high.front().map(|b| b.arrival);
        let n = self.normal.front().map(|b| b.arrival);
        let l = self.lte.head();
        let earliest = [h, n, l].into_iter().flatten().min()?;
        let at = self.free_at.max(earliest);
        if h.is_some_and(|t| t <= at) {
            return Some((at, Choice::High));
        }
        let choice = match (n.filter(|&t| t <= at), l.filter(|&t| t <= at)) {
            (Some(tn), Some(tl)) if tn < tl => Choice::Normal,
            (Some(_), None) => Choice::Normal,
            _ => Choice::Lte,
        };
        Some((at, choice))
    }

    fn on_link_free(&mut self, generation: u64) {
        if self.armed.map(|(_, g)| g) != Some(generation) {
            return;
        }
        self.armed = None;
        loop {
            let Some((at, choice)) = self.next_decision() else { return };
            let limit = self.sched.peek_time().unwrap_or(SimTime::MAX).min(self.end);
            if at >= limit {
                if at < self.end {
                    self.arm(at);
                }
                return;
            }
            self.serve(at, choice);
        }
    }

    fn record_wait(&mut self, arrival: SimTime, start: SimTime) {
        if arrival >= self.warmup {
            self.wait.add(start - arrival);
        }
    }

    fn serve(&mut self, start: SimTime, choice: Choice) {
        let prop = self.cin;
        match choice {
            Choice::Lte => {
                let arrival = self.lte.pop().expect("chosen LTE datagram exists");
                let finish = start + SimTime::transmission(self.frame * 8, self.link_bps);
                self.account_busy(start, finish);
                self.free_at = finish;
                self.record_wait(arrival, start);
                let received = finish + prop;
                if arrival >= self.warmup && received <= self.end {
                    self.lte_delay.add(received - arrival);
                }
            }
            Choice::High | Choice::Normal => {
                let frame = self.frame;
                let queue = if matches!(choice, Choice::High) { &mut self.high } else { &mut self.normal };
                let batch = queue.front_mut().expect("chosen batch exists");
                let j = batch.next_datagram;
                let bytes = (batch.total_bytes - j * frame).min(frame);
                let arrival = batch.arrival;
                let finish = start + SimTime::transmission(bytes * 8, self.link_bps);
                batch.next_datagram += 1;
                let mut delivered = Vec::new();
                while batch.item_cursor < batch.items.len() && batch.last_datagram[batch.item_cursor] == j {
                    delivered.push(batch.items[batch.item_cursor]);
                    batch.item_cursor += 1;
                }
                if batch.next_datagram == batch.datagrams {
                    queue.pop_front();
                }
                self.queued_bytes -= bytes;
                self.queued_datagrams -= 1;
                self.account_busy(start, finish);
                self.free_at = finish;
                self.record_wait(arrival, start);
                let received = finish + prop;
                for item in delivered {
                    self.deliver(item, received);
                }
            }
        }
    }

    fn account_busy(&mut self, start: SimTime, finish: SimTime) {
        let s = start.max(self.warmup);
        let f = finish.min(self.end);
        if f > s {
            self.busy_ps += (f - s).as_ps() as u128;
        }
    }

    fn deliver(&mut self, item: Item, received: SimTime) {
        match item.kind {
            ItemKind::Packet { cm, created } => {
                self.granted_undelivered -= item.bytes as u64;
                if created >= self.warmup && received <= self.end {
                    self.docsis.add(received - created);
                    self.cable_bytes_delivered += item.bytes as u64;
                }
                if let Some(obs) = self.observer.as_mut() {
                    obs(PacketRecord {
                        cm_id: cm,
                        created_at_ps: created.as_ps(),
                        delivered_at_headend_ps: received.as_ps(),
                    });
                }
            }
            ItemKind::Request { group } => {
                self.group_received[group] += 1;
                self.group_latest[group] = self.group_latest[group].max(received);
                if self.group_received[group] == self.group_size[group] {
                    self.sched.schedule(self.group_latest[group], Ev::GroupComplete(group));
                }
            }
        }
    }

    fn on_sample(&mut self) {
        let now = self.sched.now();
        let lte_waiting = self.lte.waiting_before(now);
        let waiting = self.queued_datagrams + lte_waiting;
        let backlog = self.queued_bytes
            + lte_waiting * self.frame
            + self.plant.requested_backlog()
            + self.granted_undelivered;
        if now >= self.warmup {
            self.samples.push((now.as_secs_f64(), backlog as f64));
            self.waiting_samples.push(waiting as f64);
        }
        // Exponential spacing, so samples see time averages rather than
        // locking onto the symbol or LTE arrival lattice.
        let gap: f64 = Exp1.sample(&mut self.sampler);
        let next = now + secs(gap * self.cfg.sample_interval_s);
        if next <= self.end {
            self.sched.schedule(next, Ev::Sample);
        }
    }

    fn run(mut self) -> ScenarioResult {
        self.poll(0);
        self.sched.schedule(SimTime::ZERO, Ev::Sample);
        if let Some(t) = self.lte.head() {
            self.arm(t);
        }
        while let Some(ev) = self.sched.pop_until(self.end) {
            match ev.payload {
                Ev::BatchReady(key) => self.on_batch_ready(key),
                Ev::LinkFree(g) => self.on_link_free(g),
                Ev::GroupComplete(g) => self.on_group_complete(g),
                Ev::Sample => self.on_sample(),
            }
        }
        self.finish()
    }

    fn finish(self) -> ScenarioResult {
        let cfg = self.cfg;
        let measured = cfg.duration_s;
        let slope = backlog_slope(&self.samples);
        let threshold = cfg.saturation_slope * self.link_bps as f64 / 8.0;
        let fft_feasible = (cfg.mode == RemoteNodeMode::RFft).then(|| fft_feasible(cfg));
        if fft_feasible == Some(false) {
            log::warn!(
                "FFT compute times tau_c = {} us, tau_l = {} us are not schedulable on one module",
                cfg.fft.tau_c_us,
                cfg.fft.tau_l_us
            );
        }
        let mean_waiting = if self.waiting_samples.is_empty() {
            0.0
        } else {
            self.waiting_samples.iter().sum::<f64>() / self.waiting_samples.len() as f64
        };
        ScenarioResult {
            mode: cfg.mode,
            rho_c: cfg.rho_c,
            rho_b: cfg.rho_b,
            hurst: cfg.hurst,
            distance_km: cfg.distance_km,
            seed: cfg.seed,
            docsis: self.docsis.finish(Stream::Docsis, cfg),
            lte: self.lte_delay.finish(Stream::Lte, cfg),
            saturated: slope > threshold,
            fronthaul: FronthaulStats {
                utilization: self.busy_ps as f64 * 1e-12 / measured,
                datagrams: self.wait.count,
                mean_wait_s: self.wait.mean_s(),
                mean_waiting_sampled: mean_waiting,
                backlog_slope_bytes_per_s: slope,
            },
            cable_throughput_bps: self.cable_bytes_delivered as f64 * 8.0 / measured,
            polling_cycles: self.cycle.cycle_index,
            fft_feasible,
        }
    }
}

/// Least-squares slope of the backlog over the final half of the samples.
fn backlog_slope(samples: &[(f64, f64)]) -> f64 {
    let tail = &samples[samples.len() / 2..];
    if tail.len() < 2 {
        return 0.0;
    }
    let n = tail.len() as f64;
    let mx = tail.iter().map(|s| s.0).sum::<f64>() / n;
    let my = tail.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = tail.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|s| (s.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn fft_feasible(cfg: &ScenarioConfig) -> bool {
    let us = |x: f64| secs(x * 1e-6);
    let guard = us(cfg.fft.guard_us);
    let cable = PeriodicTask::new("cable", us(cfg.docsis_phy.symbol_us), us(cfg.fft.tau_c_us)).and_then(|t| t.with_guard(guard));
    let lte = PeriodicTask::new("lte", us(cfg.fft.lte_symbol_us), us(cfg.fft.tau_l_us)).and_then(|t| t.with_guard(guard));
    match (cable, lte) {
        (Ok(c), Ok(l)) => nonpreemptive_schedulable_pair(&c, &l),
        _ => false,
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, ConfigError> {
    Ok(Sim::new(cfg, None)?.run())
}

/// Runs one scenario, passing every delivered DOCSIS packet to `observer`.
pub fn run_scenario_with_packets(
    cfg: &ScenarioConfig,
    observer: &mut dyn FnMut(PacketRecord),
) -> Result<ScenarioResult, ConfigError> {
    Ok(Sim::new(cfg, Some(observer))?.run())
}

/// Runs independent scenarios in parallel; results keep the input order.
pub fn scenario_sweep(grid: &[ScenarioConfig]) -> Result<Vec<ScenarioResult>, ConfigError> {
    assert!(!grid.is_empty(), "empty scenario grid");
    for cfg in grid {
        cfg.validate()?;
    }
    grid.par_iter().map(run_scenario).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::ratio;

    fn short(mode: RemoteNodeMode, rho_c: f64, rho_b: f64) -> ScenarioConfig {
        ScenarioConfig {
            mode,
            rho_c,
            rho_b,
            duration_s: 2.0,
            warmup_s: 0.5,
            num_cms: 40,
            ..Default::default()
        }
    }

    #[test]
    fn rfft_expansion_of_one_packet() {
        let node = RemoteNode::new(&ScenarioConfig::default()).unwrap();
        assert_eq!(node.data, Encapsulation::new(ratio(50, 27)));
        let d = forward_cable_upstream(&node, 472, false, 1500);
        assert_eq!(d, vec![Datagram { bytes: 875, priority: Priority::Normal }]);
        let d = forward_cable_upstream(&node, 1500, false, 1500);
        assert_eq!(d.iter().map(|x| x.bytes).collect::<Vec<_>>(), vec![1500, 1278]);
    }

    #[test]
    fn rphy_without_overhead_is_identity() {
        let mut cfg = ScenarioConfig { mode: RemoteNodeMode::RPhy, ..Default::default() };
        cfg.fronthaul.uepi_overhead = 0.0;
        let node = RemoteNode::new(&cfg).unwrap();
        assert_eq!(forward_cable_upstream(&node, 472, false, 1500)[0].bytes, 472);
        let req = forward_cable_upstream(&node, 64, true, 1500);
        assert_eq!(req, vec![Datagram { bytes: 64, priority: Priority::High }]);
    }

    #[test]
    fn cable_load_on_fronthaul() {
        let node = RemoteNode::new(&ScenarioConfig::default()).unwrap();
        let fronthaul = 600e6 * node.data.factor();
        assert!((fronthaul - 1.111e9).abs() < 1e6, "{fronthaul}");
    }

    #[test]
    fn lte_spacing() {
        let src = LteBasebandSource::new(0.5, 10_000_000_000, 1500);
        assert_eq!(src.arrival(0), Some(SimTime::ZERO));
        assert_eq!(src.arrival(1), Some(SimTime::from_nanos(2400)));
        assert_eq!(LteBasebandSource::new(0.0, 10_000_000_000, 1500).arrival(3), None);
    }

    #[test]
    fn light_load_runs_are_finite_and_unsaturated() {
        for mode in [RemoteNodeMode::RPhy, RemoteNodeMode::RFft] {
            let r = run_scenario(&short(mode, 0.2, 0.3)).unwrap();
            assert!(!r.saturated, "{mode}: {r:?}");
            assert!(r.docsis.count > 0 && r.lte.count > 0);
            assert!(r.docsis.mean_delay_s > 2.0 * 125e-6, "{r:?}");
            assert!(r.lte.mean_delay_s >= 125e-6);
            assert!(r.fronthaul.utilization > 0.3 && r.fronthaul.utilization < 0.4, "{r:?}");
        }
    }

    #[test]
    fn overload_is_flagged() {
        let r = run_scenario(&short(RemoteNodeMode::RFft, 0.6, 1.0)).unwrap();
        assert!(r.saturated, "{r:?}");
    }

    #[test]
    fn deterministic() {
        let cfg = short(RemoteNodeMode::RFft, 0.2, 0.5);
        assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }

    #[test]
    fn cbr_lte_delay_is_transmission_plus_propagation() {
        let mut cfg = short(RemoteNodeMode::RPhy, 0.0, 0.5);
        cfg.fronthaul.lte_traffic = crate::config::LteTraffic::Cbr;
        let r = run_scenario(&cfg).unwrap();
        // Only the poll responses ever delay an LTE datagram.
        let expected = 1.2e-6 + 125e-6;
        assert!(r.lte.mean_delay_s >= expected - 1e-12, "{r:?}");
        assert!(r.lte.mean_delay_s < expected + 50e-9, "{r:?}");
        assert_eq!(r.docsis.count, 0);
    }

    #[test]
    fn poisson_lte_waits_like_md1() {
        let mut cfg = short(RemoteNodeMode::RPhy, 0.0, 0.5);
        cfg.duration_s = 10.0;
        let r = run_scenario(&cfg).unwrap();
        // M/D/1: W = rho S / (2 (1 - rho)) with S = 1.2 us.
        let w = 0.5 * 1.2e-6 / (2.0 * 0.5);
        assert!((r.fronthaul.mean_wait_s / w - 1.0).abs() < 0.02, "{r:?}");
    }

    #[test]
    fn sweep_keeps_order() {
        let grid: Vec<_> = [0.1, 0.2].iter().map(|&b| short(RemoteNodeMode::RPhy, 0.1, b)).collect();
        let rows = scenario_sweep(&grid).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].rho_b, 0.1);
        assert_eq!(rows[1].rho_b, 0.2);
    }
}
