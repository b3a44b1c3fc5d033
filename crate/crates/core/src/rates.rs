//! Closed-form fronthaul bitrates for the passband, baseband, frequency
//! domain and FFT function splits.
//!
//! Everything is computed on exact rationals; rounding happens only when a
//! value is presented (see [`present`]).

use std::fmt;
use std::ops::{Add, Mul};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = Ratio<i128>;

const GIGA: i128 = 1_000_000_000;
const MEGA: i128 = 1_000_000;

/// Shorthand for `num / den`.
pub fn ratio(num: i128, den: i128) -> Rational {
    Rational::new(num, den)
}

pub fn int(v: i128) -> Rational {
    Rational::from_integer(v)
}

/// Parses a decimal literal such as `"0.9"` or `"66.7e-6"` exactly.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = match digits.split_once('.') {
        Some((w, f)) => (w, f),
        None => (digits, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{whole}{frac}");
    let mut num: i128 = if all.is_empty() { 0 } else { all.parse().ok()? };
    if neg {
        num = -num;
    }
    let scale = exp - frac.len() as i32;
    let pow = 10i128.checked_pow(scale.unsigned_abs())?;
    Some(if scale >= 0 {
        Rational::from_integer(num.checked_mul(pow)?)
    } else {
        Rational::new(num, pow)
    })
}

pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    Nearest,
    Truncate,
}

/// Rounds `value` to `decimals` decimal places.
pub fn present(value: Rational, decimals: u32, rounding: Rounding) -> Rational {
    let scale = int(10i128.pow(decimals));
    let scaled = value * scale;
    let whole = match rounding {
        Rounding::Nearest => scaled.round(),
        Rounding::Truncate => scaled.trunc(),
    };
    whole / scale
}

/// A bit rate in bit/s, held exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bitrate(Rational);

impl Bitrate {
    pub fn zero() -> Self {
        Bitrate(Rational::zero())
    }

    pub fn from_bps(bps: Rational) -> Self {
        assert!(!bps.is_negative(), "negative bitrate {bps}");
        Bitrate(bps)
    }

    pub fn from_mbps(mbps: i128) -> Self {
        Bitrate::from_bps(int(mbps * MEGA))
    }

    pub fn from_gbps(gbps: i128) -> Self {
        Bitrate::from_bps(int(gbps * GIGA))
    }

    /// From a decimal Gbps figure such as a config value; `x` is read as
    /// its shortest round-trip decimal, so `0.8` means exactly 4/5.
    pub fn from_gbps_f64(x: f64) -> Self {
        let r = parse_rational(&format!("{x:?}")).unwrap_or_else(|| panic!("bitrate {x} is not finite"));
        Bitrate::from_bps(r * int(GIGA))
    }

    pub fn bps(self) -> Rational {
        self.0
    }

    pub fn gbps(self) -> Rational {
        self.0 / int(GIGA)
    }

    pub fn as_bps_f64(self) -> f64 {
        to_f64(self.0)
    }

    pub fn as_gbps_f64(self) -> f64 {
        to_f64(self.gbps())
    }

    /// Gbps rounded for display.
    pub fn gbps_presented(self, decimals: u32, rounding: Rounding) -> Rational {
        present(self.gbps(), decimals, rounding)
    }

    /// Whole bit/s, rounding up; used where a simulator needs an integer link rate.
    pub fn ceil_bps_u64(self) -> u64 {
        self.0.ceil().to_integer() as u64
    }
}

impl Add for Bitrate {
    type Output = Bitrate;
    fn add(self, rhs: Bitrate) -> Bitrate {
        Bitrate(self.0 + rhs.0)
    }
}

impl Mul<Rational> for Bitrate {
    type Output = Bitrate;
    fn mul(self, rhs: Rational) -> Bitrate {
        Bitrate::from_bps(self.0 * rhs)
    }
}

impl std::iter::Sum for Bitrate {
    fn sum<I: Iterator<Item = Bitrate>>(iter: I) -> Bitrate {
        iter.fold(Bitrate::zero(), |a, b| a + b)
    }
}

impl fmt::Display for Bitrate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.as_gbps_f64();
        if g >= 1.0 {
            write!(f, "{g:.3} Gbps")
        } else {
            write!(f, "{:.3} Mbps", g * 1e3)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RateError {
    #[error("code rate must lie in (0, 1], got {0}")]
    CodeRate(Rational),
    #[error("QAM bits per symbol must be one of 2, 4, ..., 12, got {0}")]
    QamBits(u32),
    #[error("{0} must be at least 1")]
    Count(&'static str),
    #[error("load must lie in [0, 1], got {0}")]
    Load(Rational),
    #[error("symbol duration must be positive")]
    SymbolDuration,
    #[error("guard ({guard}) + pilot ({pilots}) subcarriers must be fewer than the {total} total")]
    Subcarriers { guard: u32, pilots: u32, total: u32 },
}

/// How payload bits become frequency-domain I/Q: FEC code rate, bits per
/// QAM symbol and quantizer width per real/imaginary component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IqMapping {
    code_rate: Rational,
    qam_bits: u32,
    bits_per_component: u32,
}

impl IqMapping {
    pub fn new(code_rate: Rational, qam_bits: u32, bits_per_component: u32) -> Result<Self, RateError> {
        if !(code_rate.is_positive() && code_rate <= Rational::one()) {
            return Err(RateError::CodeRate(code_rate));
        }
        if qam_bits == 0 {
            return Err(RateError::QamBits(qam_bits));
        }
        Ok(IqMapping {
            code_rate,
            qam_bits,
            bits_per_component,
        })
    }

    pub fn code_rate(&self) -> Rational {
        self.code_rate
    }

    pub fn qam_bits(&self) -> u32 {
        self.qam_bits
    }

    pub fn bits_per_component(&self) -> u32 {
        self.bits_per_component
    }
}

fn check_qam_bits(bits: u32) -> Result<(), RateError> {
    if bits == 0 || bits > 12 || bits.is_odd() {
        return Err(RateError::QamBits(bits));
    }
    Ok(())
}

/// Sampling-related parameters shared by the LTE and DOCSIS profiles.
pub trait IqProfile {
    fn rru_count(&self) -> u32 {
        1
    }
    fn antennas(&self) -> u32 {
        1
    }
    fn bits_per_component(&self) -> u32;
    fn carrier_freq_hz(&self) -> Rational;
    fn sampling_freq_hz(&self) -> Rational;
    fn oversampling(&self) -> u32 {
        2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LtePhyProfile {
    pub num_rru: u32,
    pub num_antennas: u32,
    pub bits_per_component: u32,
    pub carrier_freq_hz: Rational,
    pub sampling_freq_hz: Rational,
    pub used_subcarriers: u32,
    pub symbol_duration_s: Rational,
    pub oversampling: u32,
    pub qam_bits: u32,
    pub code_rate: Rational,
    pub link_capacity: Bitrate,
}

impl Default for LtePhyProfile {
    /// 20 MHz single-antenna carrier at 2 GHz, 64-QAM at rate 0.9, 1 Gbps payload capacity.
    fn default() -> Self {
        LtePhyProfile {
            num_rru: 1,
            num_antennas: 1,
            bits_per_component: 10,
            carrier_freq_hz: int(2 * GIGA),
            sampling_freq_hz: int(30_720_000),
            used_subcarriers: 1200,
            symbol_duration_s: ratio(667, 10_000_000),
            oversampling: 2,
            qam_bits: 6,
            code_rate: ratio(9, 10),
            link_capacity: Bitrate::from_gbps(1),
        }
    }
}

impl LtePhyProfile {
    pub fn validate(&self) -> Result<(), RateError> {
        if self.num_rru == 0 {
            return Err(RateError::Count("num_rru"));
        }
        if self.num_antennas == 0 {
            return Err(RateError::Count("num_antennas"));
        }
        if self.bits_per_component == 0 {
            return Err(RateError::Count("bits_per_component"));
        }
        if !self.symbol_duration_s.is_positive() {
            return Err(RateError::SymbolDuration);
        }
        check_qam_bits(self.qam_bits)?;
        self.mapping().map(|_| ())
    }

    pub fn mapping(&self) -> Result<IqMapping, RateError> {
        IqMapping::new(self.code_rate, self.qam_bits, self.bits_per_component)
    }
}

impl IqProfile for LtePhyProfile {
    fn rru_count(&self) -> u32 {
        self.num_rru
    }
    fn antennas(&self) -> u32 {
        self.num_antennas
    }
    fn bits_per_component(&self) -> u32 {
        self.bits_per_component
    }
    fn carrier_freq_hz(&self) -> Rational {
        self.carrier_freq_hz
    }
    fn sampling_freq_hz(&self) -> Rational {
        self.sampling_freq_hz
    }
    fn oversampling(&self) -> u32 {
        self.oversampling
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DocsisPhyProfile {
    pub carrier_freq_hz: Rational,
    pub sampling_freq_hz: Rational,
    pub fft_size: u32,
    pub total_subcarriers: u32,
    pub guard_subcarriers: u32,
    pub continuous_pilots: u32,
    pub scattered_pilots: u32,
    pub symbol_duration_s: Rational,
    pub qam_bits: u32,
    pub code_rate: Rational,
    pub bits_per_component: u32,
    pub link_capacity: Bitrate,
}

impl Default for DocsisPhyProfile {
    /// 192 MHz OFDM channel: 8192-point FFT, 25 kHz spacing, 4096-QAM at rate 0.9.
    fn default() -> Self {
        DocsisPhyProfile {
            carrier_freq_hz: int(GIGA),
            sampling_freq_hz: int(204_800_000),
            fft_size: 8192,
            total_subcarriers: 7680,
            guard_subcarriers: 80,
            continuous_pilots: 88,
            scattered_pilots: 60,
            symbol_duration_s: ratio(40, 1_000_000),
            qam_bits: 12,
            code_rate: ratio(9, 10),
            bits_per_component: 10,
            link_capacity: Bitrate::from_gbps(1),
        }
    }
}

impl DocsisPhyProfile {
    pub fn cached_subcarriers(&self) -> u32 {
        self.guard_subcarriers + self.continuous_pilots + self.scattered_pilots
    }

    pub fn validate(&self) -> Result<(), RateError> {
        let cached = self.cached_subcarriers();
        if cached >= self.total_subcarriers {
            return Err(RateError::Subcarriers {
                guard: self.guard_subcarriers,
                pilots: self.continuous_pilots + self.scattered_pilots,
                total: self.total_subcarriers,
            });
        }
        if !self.symbol_duration_s.is_positive() {
            return Err(RateError::SymbolDuration);
        }
        let standard = [ratio(40, 1_000_000), ratio(8413, 100_000_000)];
        if !standard.contains(&self.symbol_duration_s) {
            log::warn!(
                "DOCSIS symbol duration {} s is not one of the standard 40 us / 84.13 us",
                to_f64(self.symbol_duration_s)
            );
        }
        check_qam_bits(self.qam_bits)?;
        self.mapping().map(|_| ())
    }

    pub fn mapping(&self) -> Result<IqMapping, RateError> {
        IqMapping::new(self.code_rate, self.qam_bits, self.bits_per_component)
    }
}

impl IqProfile for DocsisPhyProfile {
    fn bits_per_component(&self) -> u32 {
        self.bits_per_component
    }
    fn carrier_freq_hz(&self) -> Rational {
        self.carrier_freq_hz
    }
    fn sampling_freq_hz(&self) -> Rational {
        self.sampling_freq_hz
    }
}

/// Offered payload as a fraction `rho` of a link capacity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrafficLoad {
    rho: Rational,
    capacity: Bitrate,
}

impl TrafficLoad {
    pub fn new(rho: Rational, capacity: Bitrate) -> Result<Self, RateError> {
        if rho.is_negative() || rho > Rational::one() {
            return Err(RateError::Load(rho));
        }
        Ok(TrafficLoad { rho, capacity })
    }

    pub fn rho(&self) -> Rational {
        self.rho
    }

    pub fn capacity(&self) -> Bitrate {
        self.capacity
    }

    pub fn offered(&self) -> Bitrate {
        self.capacity * self.rho
    }

    pub fn at_full_load(&self) -> TrafficLoad {
        TrafficLoad {
            rho: Rational::one(),
            capacity: self.capacity,
        }
    }
}

fn link_count<P: IqProfile + ?Sized>(p: &P) -> Rational {
    int(p.rru_count() as i128 * p.antennas() as i128)
}

/// Passband sample forwarding: `N W 2 f_c K`.
pub fn passband_rate<P: IqProfile + ?Sized>(p: &P) -> Bitrate {
    let k = int(p.bits_per_component() as i128);
    Bitrate::from_bps(link_count(p) * int(2) * p.carrier_freq_hz() * k)
}

/// Baseband time-domain I/Q forwarding: `N W (os f_s) 2K` with oversampling `os`.
pub fn baseband_rate<P: IqProfile + ?Sized>(p: &P) -> Bitrate {
    let k = int(p.bits_per_component() as i128);
    let os = int(p.oversampling() as i128);
    Bitrate::from_bps(link_count(p) * os * p.sampling_freq_hz() * int(2) * k)
}

/// Frequency-domain forwarding of every used subcarrier: `N W B_sub / T_s 2K`.
pub fn freq_domain_rate(p: &LtePhyProfile) -> Bitrate {
    assert!(p.symbol_duration_s.is_positive(), "symbol duration must be positive");
    let k = int(p.bits_per_component as i128);
    Bitrate::from_bps(
        link_count(p) * int(p.used_subcarriers as i128) / p.symbol_duration_s * int(2) * k,
    )
}

/// Multiplier from payload bits to I/Q bits: `2K / (code_rate * qam_bits)`.
pub fn iq_expansion_factor(m: &IqMapping) -> Rational {
    int(2 * m.bits_per_component as i128) / (m.code_rate * int(m.qam_bits as i128))
}

/// I/Q bitrate carrying only the payload at the given load.
pub fn fft_split_payload_rate(load: &TrafficLoad, m: &IqMapping) -> Bitrate {
    load.offered() * iq_expansion_factor(m)
}

/// Cacheable overhead: a fixed fraction of the full-load payload I/Q rate.
pub fn fft_split_overhead_rate(overhead_fraction: Rational, full_load_payload_rate: Bitrate) -> Bitrate {
    assert!(!overhead_fraction.is_negative(), "negative overhead fraction");
    full_load_payload_rate * overhead_fraction
}

/// FFT-split rate broken into payload and (cacheable) overhead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FftSplitRate {
    pub payload: Bitrate,
    pub overhead: Bitrate,
}

impl FftSplitRate {
    /// Rate without caching.
    pub fn total(&self) -> Bitrate {
        self.payload + self.overhead
    }

    /// Rate with the overhead cached at the remote node.
    pub fn with_caching(&self) -> Bitrate {
        self.payload
    }

    pub fn savings_fraction(&self) -> Rational {
        let total = self.total().bps();
        if total.is_zero() {
            return Rational::zero();
        }
        self.overhead.bps() / total
    }

    pub fn savings_percent(&self) -> Rational {
        self.savings_fraction() * int(100)
    }

    /// Whether the uncached rate fits in the subcarrier capacity `R^F`.
    pub fn fits_within(&self, subcarrier_capacity: Bitrate) -> bool {
        self.total() <= subcarrier_capacity
    }
}

pub fn fft_split_total_rate(load: &TrafficLoad, m: &IqMapping, overhead_fraction: Rational) -> FftSplitRate {
    let payload = fft_split_payload_rate(load, m);
    let full = fft_split_payload_rate(&load.at_full_load(), m);
    FftSplitRate {
        payload,
        overhead: fft_split_overhead_rate(overhead_fraction, full),
    }
}

/// LTE, DOCSIS and combined value of one split at one load.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitTriple {
    pub lte: Bitrate,
    pub docsis: Bitrate,
}

impl SplitTriple {
    pub fn total(&self) -> Bitrate {
        self.lte + self.docsis
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitComparisonRow {
    pub rho: Rational,
    pub fft_cached: SplitTriple,
    pub fft_uncached: SplitTriple,
    pub baseband: SplitTriple,
    pub passband: SplitTriple,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitTableConfig {
    /// Factor applied to the single-carrier LTE baseband rate so that it
    /// carries the same payload capacity as the FFT split.
    pub lte_scaleup: Rational,
    pub lte_overhead: Rational,
    pub docsis_overhead: Rational,
    /// When set, the single-carrier LTE baseband rate is rounded to this
    /// many decimals (in Gbps) before the scale-up.
    pub lte_baseband_base_decimals: Option<u32>,
}

impl Default for SplitTableConfig {
    fn default() -> Self {
        SplitTableConfig {
            lte_scaleup: int(15),
            lte_overhead: ratio(7, 100),
            docsis_overhead: ratio(3, 100),
            lte_baseband_base_decimals: None,
        }
    }
}

/// Downstream LTE + DOCSIS fronthaul rates for every split at each load
/// (the same `rho` is applied to both technologies).
pub fn split_comparison_table(
    lte: &LtePhyProfile,
    docsis: &DocsisPhyProfile,
    loads: &[Rational],
    cfg: &SplitTableConfig,
) -> Result<Vec<SplitComparisonRow>, RateError> {
    lte.validate()?;
    docsis.validate()?;
    let lte_map = lte.mapping()?;
    let doc_map = docsis.mapping()?;

    let lte_base = baseband_rate(lte);
    let lte_base = match cfg.lte_baseband_base_decimals {
        Some(d) => Bitrate::from_bps(present(lte_base.gbps(), d, Rounding::Nearest) * int(GIGA)),
        None => lte_base,
    };
    let baseband = SplitTriple {
        lte: lte_base * cfg.lte_scaleup,
        docsis: baseband_rate(docsis),
    };
    let passband = SplitTriple {
        lte: passband_rate(lte),
        docsis: passband_rate(docsis),
    };

    loads
        .iter()
        .map(|&rho| {
            let l = fft_split_total_rate(&TrafficLoad::new(rho, lte.link_capacity)?, &lte_map, cfg.lte_overhead);
            let d = fft_split_total_rate(
                &TrafficLoad::new(rho, docsis.link_capacity)?,
                &doc_map,
                cfg.docsis_overhead,
            );
            Ok(SplitComparisonRow {
                rho,
                fft_cached: SplitTriple {
                    lte: l.with_caching(),
                    docsis: d.with_caching(),
                },
                fft_uncached: SplitTriple {
                    lte: l.total(),
                    docsis: d.total(),
                },
                baseband,
                passband,
            })
        })
        .collect()
}
