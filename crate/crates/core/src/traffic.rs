//! Packet arrival processes for the cable modems.
//!
//! `H = 0.5` yields Poisson arrivals. Larger `H` superposes Pareto on/off
//! subsources whose on and off periods share the shape `3 - 2H`; each
//! subsource emits back-to-back packets at a fixed peak rate while on.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp, Pareto};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::des::{RngStream, SimTime};
use crate::rates::Bitrate;

pub const DEFAULT_PACKET_BYTES: u32 = 472;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("Hurst parameter {0} outside [0.5, 1)")]
    Hurst(f64),
    #[error("load {0} must be finite and non-negative")]
    Load(f64),
    #[error("offered rate {offered_bps} bps exceeds the access line rate {line_bps} bps")]
    ExceedsLineRate { offered_bps: f64, line_bps: f64 },
    #[error("on/off peak rate {peak_bps} bps exceeds the access line rate {line_bps} bps; raise on_fraction")]
    PeakExceedsLineRate { peak_bps: f64, line_bps: f64 },
    #[error("invalid on/off shape: {0}")]
    OnOff(String),
    #[error("packet size must be positive")]
    PacketSize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketSizeMode {
    /// Every packet is `mean_packet_bytes` long.
    #[default]
    Fixed,
    /// 64 / 576 / 1500 byte mix with mean 472 bytes.
    Trimodal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub hurst: f64,
    pub rho: f64,
    pub mean_packet_bytes: u32,
    pub size_mode: PacketSizeMode,
    /// On/off subsources aggregated per source.
    pub num_subsources: u32,
    /// Long-run fraction of time each subsource is on.
    pub on_fraction: f64,
    /// Mean on-period length in seconds.
    pub mean_on_s: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            hurst: 0.5,
            rho: 0.2,
            mean_packet_bytes: DEFAULT_PACKET_BYTES,
            size_mode: PacketSizeMode::Fixed,
            num_subsources: 16,
            on_fraction: 0.05,
            mean_on_s: 0.002,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(0.5..1.0).contains(&self.hurst) {
            return Err(TrafficError::Hurst(self.hurst));
        }
        if !self.rho.is_finite() || self.rho < 0.0 {
            return Err(TrafficError::Load(self.rho));
        }
        if self.mean_packet_bytes == 0 {
            return Err(TrafficError::PacketSize);
        }
        if self.size_mode == PacketSizeMode::Trimodal && self.mean_packet_bytes != DEFAULT_PACKET_BYTES {
            return Err(TrafficError::OnOff(format!(
                "the trimodal mix has a fixed mean of {DEFAULT_PACKET_BYTES} bytes"
            )));
        }
        if self.is_self_similar() {
            if self.num_subsources == 0 {
                return Err(TrafficError::OnOff("num_subsources must be positive".into()));
            }
            if !(self.on_fraction > 0.0 && self.on_fraction <= 1.0) {
                return Err(TrafficError::OnOff(format!("on_fraction {} outside (0, 1]", self.on_fraction)));
            }
            if !(self.mean_on_s > 0.0 && self.mean_on_s.is_finite()) {
                return Err(TrafficError::OnOff(format!("mean_on_s {} must be positive", self.mean_on_s)));
            }
        }
        Ok(())
    }

    pub fn is_self_similar(&self) -> bool {
        self.hurst > 0.5
    }

    /// Pareto shape of the on and off periods.
    pub fn pareto_shape(&self) -> f64 {
        3.0 - 2.0 * self.hurst
    }
}

/// A generated packet and the timestamps it collects on its way upstream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Packet {
    pub id: u64,
    pub source_id: u32,
    pub size_bytes: u32,
    pub created_at: SimTime,
    pub enqueued_at: Option<SimTime>,
    pub granted_at: Option<SimTime>,
    pub delivered_at: Option<SimTime>,
}

impl Packet {
    pub fn new(id: u64, source_id: u32, size_bytes: u32, created_at: SimTime) -> Self {
        Packet {
            id,
            source_id,
            size_bytes,
            created_at,
            enqueued_at: None,
            granted_at: None,
            delivered_at: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arrival {
    pub time: SimTime,
    pub bytes: u32,
}

/// Packet sizes in bytes.
pub fn packet_size_sample<R: Rng + ?Sized>(mode: PacketSizeMode, mean_bytes: u32, rng: &mut R) -> u32 {
    match mode {
        PacketSizeMode::Fixed => mean_bytes,
        PacketSizeMode::Trimodal => {
            // Weights out of 1848 chosen so the mean is exactly 472 bytes.
            let u = rng.random_range(0..1848u32);
            if u < 924 {
                64
            } else if u < 924 + 620 {
                576
            } else {
                1500
            }
        }
    }
}

#[derive(Debug)]
struct OnOffSubsource {
    /// Virtual on-time (s) still to accumulate before the next packet.
    residual: f64,
    on: bool,
    /// End of the current period, seconds.
    period_end: f64,
    /// Start of the time still to account for, seconds.
    cursor: f64,
    next_bytes: u32,
}

/// Pending emission of one subsource; ties go to the lower index.
#[derive(Clone, Copy, Debug)]
struct Emission {
    at: f64,
    sub: usize,
}

impl PartialEq for Emission {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Emission {}

impl PartialOrd for Emission {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Emission {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at.total_cmp(&other.at).then(self.sub.cmp(&other.sub))
    }
}

#[derive(Debug)]
enum Process {
    Idle,
    Poisson { exp: Exp<f64>, now: f64 },
    OnOff {
        subs: Vec<OnOffSubsource>,
        on_len: Pareto<f64>,
        off_len: Pareto<f64>,
        peak_bps: f64,
        /// Next emission of every subsource.
        next: BinaryHeap<Reverse<Emission>>,
    },
}

/// Arrival process of one traffic source.
#[derive(Debug)]
pub struct Generator {
    cfg: TrafficConfig,
    rng: RngStream,
    process: Process,
    pending_bytes: u32,
    emitted: u64,
}

/// Builds the arrival process of one source offering `cfg.rho * capacity`.
pub fn make_generator(
    cfg: &TrafficConfig,
    stream: RngStream,
    capacity: Bitrate,
    line_rate: Bitrate,
) -> Result<Generator, TrafficError> {
    cfg.validate()?;
    let offered_bps = cfg.rho * capacity.as_bps_f64();
    let line_bps = line_rate.as_bps_f64();
    if offered_bps > line_bps {
        return Err(TrafficError::ExceedsLineRate { offered_bps, line_bps });
    }
    let mut rng = stream;
    let mean_bits = cfg.mean_packet_bytes as f64 * 8.0;
    let first_bytes = packet_size_sample(cfg.size_mode, cfg.mean_packet_bytes, &mut rng);
    let process = if offered_bps == 0.0 {
        Process::Idle
    } else if !cfg.is_self_similar() {
        let exp = Exp::new(offered_bps / mean_bits).expect("positive rate");
        Process::Poisson { exp, now: 0.0 }
    } else {
        let per_sub = offered_bps / cfg.num_subsources as f64;
        let peak_bps = per_sub / cfg.on_fraction;
        if peak_bps > line_bps {
            return Err(TrafficError::PeakExceedsLineRate { peak_bps, line_bps });
        }
        let alpha = cfg.pareto_shape();
        let mean_off = cfg.mean_on_s * (1.0 - cfg.on_fraction) / cfg.on_fraction;
        let scale = |mean: f64| mean * (alpha - 1.0) / alpha;
        let (on_scale, off_scale) = (scale(cfg.mean_on_s), scale(mean_off).max(f64::MIN_POSITIVE));
        let on_len = Pareto::new(on_scale, alpha).map_err(|e| TrafficError::OnOff(e.to_string()))?;
        // on_fraction = 1 degenerates to a constant-rate source.
        let off_len = Pareto::new(off_scale, alpha)
            .map_err(|e| TrafficError::OnOff(e.to_string()))?;
        let mut subs = Vec::with_capacity(cfg.num_subsources as usize);
        for _ in 0..cfg.num_subsources {
            let on = rng.random::<f64>() < cfg.on_fraction;
            let scale = if on { on_scale } else { off_scale };
            let remaining = stationary_residual(scale, alpha, &mut rng);
            let bytes = packet_size_sample(cfg.size_mode, cfg.mean_packet_bytes, &mut rng);
            subs.push(OnOffSubsource {
                residual: rng.random::<f64>() * bytes as f64 * 8.0 / peak_bps,
                on,
                period_end: remaining,
                cursor: 0.0,
                next_bytes: bytes,
            });
        }
        let next = subs
            .iter_mut()
            .enumerate()
            .map(|(sub, s)| Reverse(Emission { at: s.advance(&on_len, &off_len, &mut rng), sub }))
            .collect();
        Process::OnOff {
            subs,
            on_len,
            off_len,
            peak_bps,
            next,
        }
    };
    Ok(Generator {
        cfg: cfg.clone(),
        rng,
        process,
        pending_bytes: first_bytes,
        emitted: 0,
    })
}

/// Remaining length of the period in progress at a random instant: the
/// forward-recurrence time of a Pareto(`scale`, `alpha`) renewal process.
/// Uniform on `[0, scale)` with probability `(alpha - 1) / alpha`, else
/// Pareto with shape `alpha - 1`.
fn stationary_residual(scale: f64, alpha: f64, rng: &mut RngStream) -> f64 {
    if rng.random::<f64>() < (alpha - 1.0) / alpha {
        rng.random::<f64>() * scale
    } else {
        let u: f64 = 1.0 - rng.random::<f64>();
        scale * u.powf(-1.0 / (alpha - 1.0))
    }
}

impl OnOffSubsource {
    /// Time of this subsource's next packet, advancing its on/off periods.
    fn advance(&mut self, on_len: &Pareto<f64>, off_len: &Pareto<f64>, rng: &mut RngStream) -> f64 {
        loop {
            if self.on {
                let available = self.period_end - self.cursor;
                if self.residual <= available {
                    return self.cursor + self.residual;
                }
                self.residual -= available;
                self.on = false;
                self.cursor = self.period_end;
                self.period_end += off_len.sample(rng);
            } else {
                self.on = true;
                self.cursor = self.period_end;
                self.period_end += on_len.sample(rng);
            }
        }
    }
}

impl Generator {
    pub fn config(&self) -> &TrafficConfig {
        &self.cfg
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Next arrival, or `None` for a zero-load source. Times never decrease.
    pub fn next_arrival(&mut self) -> Option<Arrival> {
        let (t, bytes) = match &mut self.process {
            Process::Idle => return None,
            Process::Poisson { exp, now } => {
                *now += exp.sample(&mut self.rng);
                let bytes = self.pending_bytes;
                self.pending_bytes = packet_size_sample(self.cfg.size_mode, self.cfg.mean_packet_bytes, &mut self.rng);
                (*now, bytes)
            }
            Process::OnOff {
                subs,
                on_len,
                off_len,
                peak_bps,
                next,
            } => {
                let Reverse(Emission { at: t, sub }) = next.pop().expect("at least one subsource");
                let s = &mut subs[sub];
                let bytes = s.next_bytes;
                s.cursor = t;
                s.next_bytes = packet_size_sample(self.cfg.size_mode, self.cfg.mean_packet_bytes, &mut self.rng);
                s.residual = s.next_bytes as f64 * 8.0 / *peak_bps;
                let at = s.advance(on_len, off_len, &mut self.rng);
                next.push(Reverse(Emission { at, sub }));
                (t, bytes)
            }
        };
        self.emitted += 1;
        Some(Arrival {
            time: SimTime::from_secs_f64(t),
            bytes,
        })
    }

    /// Arrivals strictly before `end`, in order.
    pub fn arrivals_until(&mut self, end: SimTime) -> Vec<Arrival> {
        let mut out = Vec::new();
        while let Some(a) = self.next_arrival() {
            if a.time >= end {
                break;
            }
            out.push(a);
        }
        out
    }
}

/// Writes `time_ps,bytes` rows for every arrival before `end`.
pub fn write_trace<W: Write>(gen: &mut Generator, end: SimTime, mut out: W) -> io::Result<u64> {
    writeln!(out, "time_ps,bytes")?;
    let mut n = 0;
    while let Some(a) = gen.next_arrival() {
        if a.time >= end {
            break;
        }
        writeln!(out, "{},{}", a.time.as_ps(), a.bytes)?;
        n += 1;
    }
    Ok(n)
}
