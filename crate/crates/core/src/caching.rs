//! Cacheable broadcast overhead in the downstream resource grids and the
//! memory the remote node needs to hold it.
//!
//! Every overhead is expressed relative to the payload actually carried,
//! so it scales as `1 / rho`.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rates::{int, ratio, DocsisPhyProfile, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CachingError {
    #[error("zero payload load: overhead is unbounded and transmissions can be fully suspended")]
    ZeroLoad,
    #[error("load must be positive, got {0}")]
    NegativeLoad(Rational),
    #[error("grid parameter {0} must be positive")]
    Grid(&'static str),
    #[error("{subcarriers} system subcarriers is not a whole number of {per_rb}-subcarrier resource blocks")]
    PartialResourceBlock { subcarriers: u32, per_rb: u32 },
    #[error("bits per component must be positive")]
    Bits,
}

fn check_load(rho: Rational) -> Result<(), CachingError> {
    if rho.is_zero() {
        return Err(CachingError::ZeroLoad);
    }
    if rho.is_negative() {
        return Err(CachingError::NegativeLoad(rho));
    }
    Ok(())
}

/// LTE downstream grid dimensions and broadcast-channel footprints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LteGridParams {
    pub subcarriers_per_rb: u32,
    pub symbols_per_subframe: u32,
    pub subframes_per_frame: u32,
    pub rs_tones_per_rb_subframe: u32,
    pub system_subcarriers: u32,
    pub pbch_rbs: u32,
    pub pbch_symbols: u32,
    pub sch_rbs: u32,
    /// Synchronization symbols per frame (two symbols, twice per frame).
    pub sch_symbols_per_frame: u32,
    pub sib_rbs: u32,
    pub sib_symbols: u32,
    pub sib_period_frames: u32,
}

impl LteGridParams {
    /// 20 MHz carrier, 100 resource blocks.
    pub fn lte_20mhz() -> Self {
        LteGridParams {
            subcarriers_per_rb: 12,
            symbols_per_subframe: 14,
            subframes_per_frame: 10,
            rs_tones_per_rb_subframe: 8,
            system_subcarriers: 1200,
            pbch_rbs: 6,
            pbch_symbols: 4,
            sch_rbs: 6,
            sch_symbols_per_frame: 4,
            sib_rbs: 8,
            sib_symbols: 14,
            sib_period_frames: 2,
        }
    }

    /// 1.4 MHz carrier, 6 resource blocks.
    pub fn lte_1_4mhz() -> Self {
        LteGridParams {
            system_subcarriers: 72,
            ..Self::lte_20mhz()
        }
    }

    pub fn resource_blocks(&self) -> u32 {
        self.system_subcarriers / self.subcarriers_per_rb
    }

    pub fn validate(&self) -> Result<(), CachingError> {
        let fields = [
            ("subcarriers_per_rb", self.subcarriers_per_rb),
            ("symbols_per_subframe", self.symbols_per_subframe),
            ("subframes_per_frame", self.subframes_per_frame),
            ("rs_tones_per_rb_subframe", self.rs_tones_per_rb_subframe),
            ("system_subcarriers", self.system_subcarriers),
            ("pbch_rbs", self.pbch_rbs),
            ("pbch_symbols", self.pbch_symbols),
            ("sch_rbs", self.sch_rbs),
            ("sch_symbols_per_frame", self.sch_symbols_per_frame),
            ("sib_rbs", self.sib_rbs),
            ("sib_symbols", self.sib_symbols),
            ("sib_period_frames", self.sib_period_frames),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(CachingError::Grid(name));
        }
        if !self.system_subcarriers.is_multiple_of(self.subcarriers_per_rb) {
            return Err(CachingError::PartialResourceBlock {
                subcarriers: self.system_subcarriers,
                per_rb: self.subcarriers_per_rb,
            });
        }
        Ok(())
    }

    fn frame_res(&self) -> i128 {
        self.system_subcarriers as i128 * self.symbols_per_subframe as i128 * self.subframes_per_frame as i128
    }

    /// Resource elements per frame occupied by PBCH, net of the RS tones inside it.
    pub fn pbch_elements(&self) -> i128 {
        let gross = self.pbch_rbs * self.subcarriers_per_rb * self.pbch_symbols;
        (gross - self.rs_tones_per_rb_subframe * self.pbch_rbs) as i128
    }

    pub fn sch_elements(&self) -> i128 {
        (self.sch_rbs * self.subcarriers_per_rb * self.sch_symbols_per_frame) as i128
    }

    /// SIB1/SIB2 resource elements per SIB period, net of RS tones.
    pub fn sib_elements(&self) -> i128 {
        let gross = self.sib_rbs * self.subcarriers_per_rb * self.sib_symbols;
        (gross - self.rs_tones_per_rb_subframe * self.sib_rbs) as i128
    }

    pub fn rs_elements(&self) -> i128 {
        (self.rs_tones_per_rb_subframe * self.resource_blocks()) as i128
    }
}

/// Reference-signal tones per resource block and subframe, over the RB's resource elements.
pub fn rs_overhead(rho: Rational, g: &LteGridParams) -> Result<Rational, CachingError> {
    check_load(rho)?;
    let per_rb = g.subcarriers_per_rb as i128 * g.symbols_per_subframe as i128;
    Ok(int(g.rs_tones_per_rb_subframe as i128) / (rho * int(per_rb)))
}

pub fn pbch_overhead(rho: Rational, g: &LteGridParams) -> Result<Rational, CachingError> {
    check_load(rho)?;
    Ok(int(g.pbch_elements()) / (rho * int(g.frame_res())))
}

pub fn sch_overhead(rho: Rational, g: &LteGridParams) -> Result<Rational, CachingError> {
    check_load(rho)?;
    Ok(int(g.sch_elements()) / (rho * int(g.frame_res())))
}

pub fn sib_overhead(rho: Rational, g: &LteGridParams) -> Result<Rational, CachingError> {
    check_load(rho)?;
    Ok(int(g.sib_elements()) / (rho * int(g.frame_res() * g.sib_period_frames as i128)))
}

/// Guard band plus continuous and scattered pilots over all subcarriers.
pub fn docsis_pilot_overhead(rho: Rational, p: &DocsisPhyProfile) -> Result<Rational, CachingError> {
    check_load(rho)?;
    Ok(int(p.cached_subcarriers() as i128) / (rho * int(p.total_subcarriers as i128)))
}

pub fn lte_total_overhead(rho: Rational, g: &LteGridParams) -> Result<Rational, CachingError> {
    Ok(rs_overhead(rho, g)? + pbch_overhead(rho, g)? + sch_overhead(rho, g)? + sib_overhead(rho, g)?)
}

/// Rounded overhead fractions used when reproducing the published bitrate tables.
pub const LTE_TABLE_OVERHEAD: (i128, i128) = (7, 100);
pub const DOCSIS_TABLE_OVERHEAD: (i128, i128) = (3, 100);

pub fn lte_table_overhead() -> Rational {
    ratio(LTE_TABLE_OVERHEAD.0, LTE_TABLE_OVERHEAD.1)
}

pub fn docsis_table_overhead() -> Rational {
    ratio(DOCSIS_TABLE_OVERHEAD.0, DOCSIS_TABLE_OVERHEAD.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Technology {
    Lte,
    Docsis,
}

/// One cached grid component: its overhead at the profile's load and its memory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheComponent {
    pub name: &'static str,
    pub symbols: i128,
    pub fraction: Rational,
    pub memory_bits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheProfile {
    pub technology: Technology,
    pub rho: Rational,
    pub components: Vec<CacheComponent>,
}

impl CacheProfile {
    pub fn overhead_fraction(&self) -> Rational {
        self.components.iter().map(|c| c.fraction).sum()
    }

    pub fn memory_bits(&self) -> u64 {
        self.components.iter().map(|c| c.memory_bits).sum()
    }

    /// Number of cached symbols per grid unit.
    pub fn cached_symbols(&self) -> i128 {
        self.components.iter().map(|c| c.symbols).sum()
    }

    pub fn component(&self, name: &str) -> Option<&CacheComponent> {
        self.components.iter().find(|c| c.name == name)
    }
}

fn memory(symbols: i128, bits_per_component: u32) -> u64 {
    (symbols as u64) * 2 * bits_per_component as u64
}

/// LTE cache contents (RS, PBCH, SCH, SIB1/2) with overheads at `rho`.
pub fn lte_cache_profile(rho: Rational, g: &LteGridParams, bits_per_component: u32) -> Result<CacheProfile, CachingError> {
    g.validate()?;
    if bits_per_component == 0 {
        return Err(CachingError::Bits);
    }
    let comps = [
        ("RS", g.rs_elements(), rs_overhead(rho, g)?),
        ("PBCH", g.pbch_elements(), pbch_overhead(rho, g)?),
        ("SCH", g.sch_elements(), sch_overhead(rho, g)?),
        ("SIB", g.sib_elements(), sib_overhead(rho, g)?),
    ];
    Ok(CacheProfile {
        technology: Technology::Lte,
        rho,
        components: comps
            .into_iter()
            .map(|(name, symbols, fraction)| CacheComponent {
                name,
                symbols,
                fraction,
                memory_bits: memory(symbols, bits_per_component),
            })
            .collect(),
    })
}

pub fn docsis_cache_profile(rho: Rational, p: &DocsisPhyProfile) -> Result<CacheProfile, CachingError> {
    if p.bits_per_component == 0 {
        return Err(CachingError::Bits);
    }
    let symbols = p.cached_subcarriers() as i128;
    Ok(CacheProfile {
        technology: Technology::Docsis,
        rho,
        components: vec![CacheComponent {
            name: "PILOTS",
            symbols,
            fraction: docsis_pilot_overhead(rho, p)?,
            memory_bits: memory(symbols, p.bits_per_component),
        }],
    })
}

/// Cache memory per component, in bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CacheMemoryReport {
    pub rs_bits: u64,
    pub pbch_bits: u64,
    pub sch_bits: u64,
    pub sib_bits: u64,
    pub docsis_pilot_bits: u64,
}

impl CacheMemoryReport {
    pub fn lte_total_bits(&self) -> u64 {
        self.rs_bits + self.pbch_bits + self.sch_bits + self.sib_bits
    }

    pub fn total_bits(&self) -> u64 {
        self.lte_total_bits() + self.docsis_pilot_bits
    }
}

pub fn cache_memory(
    g: &LteGridParams,
    p: &DocsisPhyProfile,
    bits_per_component: u32,
) -> Result<CacheMemoryReport, CachingError> {
    g.validate()?;
    if bits_per_component == 0 {
        return Err(CachingError::Bits);
    }
    let m = |s| memory(s, bits_per_component);
    Ok(CacheMemoryReport {
        rs_bits: m(g.rs_elements()),
        pbch_bits: m(g.pbch_elements()),
        sch_bits: m(g.sch_elements()),
        sib_bits: m(g.sib_elements()),
        docsis_pilot_bits: m(p.cached_subcarriers() as i128),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::to_f64;

    fn pct(r: Rational) -> f64 {
        to_f64(r) * 100.0
    }

    #[test]
    fn rs_examples() {
        let g = LteGridParams::lte_20mhz();
        assert_eq!(rs_overhead(int(1), &g).unwrap(), ratio(1, 21));
        assert!((to_f64(rs_overhead(ratio(1, 10), &g).unwrap()) - 0.47619).abs() < 1e-5);
        assert!((to_f64(rs_overhead(ratio(1, 100), &g).unwrap()) - 4.7619).abs() < 1e-4);
    }

    #[test]
    fn zero_load_is_an_error() {
        let g = LteGridParams::lte_20mhz();
        assert_eq!(rs_overhead(int(0), &g), Err(CachingError::ZeroLoad));
        assert_eq!(sib_overhead(int(0), &g), Err(CachingError::ZeroLoad));
        assert!(CachingError::ZeroLoad.to_string().contains("suspended"));
        assert_eq!(
            docsis_pilot_overhead(int(0), &DocsisPhyProfile::default()),
            Err(CachingError::ZeroLoad)
        );
    }

    #[test]
    fn broadcast_channel_examples() {
        let g20 = LteGridParams::lte_20mhz();
        let g14 = LteGridParams::lte_1_4mhz();
        assert_eq!(g20.pbch_elements(), 240);
        assert_eq!(g20.sib_elements(), 1280);
        assert!((pct(pbch_overhead(int(1), &g20).unwrap()) - 0.142_86).abs() < 1e-4);
        assert!((pct(pbch_overhead(int(1), &g14).unwrap()) - 2.381).abs() < 1e-3);
        assert!((pct(sch_overhead(int(1), &g20).unwrap()) - 0.171_43).abs() < 1e-4);
        assert!((pct(sch_overhead(int(1), &g14).unwrap()) - 2.857).abs() < 1e-3);
        assert!((pct(sib_overhead(int(1), &g20).unwrap()) - 0.380_95).abs() < 1e-4);
        assert!((pct(sib_overhead(int(1), &g14).unwrap()) - 6.349).abs() < 1e-3);
        assert_eq!(
            sch_overhead(ratio(1, 4), &g20).unwrap(),
            sch_overhead(int(1), &g20).unwrap() * int(4)
        );
    }

    #[test]
    fn docsis_examples() {
        let p = DocsisPhyProfile::default();
        assert_eq!(docsis_pilot_overhead(int(1), &p).unwrap(), ratio(228, 7680));
        assert_eq!(
            docsis_pilot_overhead(ratio(1, 10), &p).unwrap(),
            ratio(228, 7680) * int(10)
        );
        let none = DocsisPhyProfile {
            guard_subcarriers: 0,
            continuous_pilots: 0,
            scattered_pilots: 0,
            ..Default::default()
        };
        assert_eq!(docsis_pilot_overhead(int(1), &none).unwrap(), int(0));
    }

    #[test]
    fn lte_totals() {
        let t20 = lte_total_overhead(int(1), &LteGridParams::lte_20mhz()).unwrap();
        let oracle20 = 8.0 / 168.0 + 240.0 / 168_000.0 + 288.0 / 168_000.0 + 1280.0 / 336_000.0;
        assert!((to_f64(t20) - oracle20).abs() < 1e-12);
        assert!((to_f64(t20) - 0.054_57).abs() < 1e-5);
        let t14 = lte_total_overhead(int(1), &LteGridParams::lte_1_4mhz()).unwrap();
        let oracle = 240.0 / 10080.0 + 288.0 / 10080.0 + 1280.0 / 20160.0 + 8.0 / 168.0;
        assert!((to_f64(t14) - oracle).abs() < 1e-12);
        assert!((to_f64(t14) - 0.164).abs() < 1e-3);
        let half = lte_total_overhead(ratio(1, 2), &LteGridParams::lte_20mhz()).unwrap();
        assert_eq!(half, t20 * int(2));
    }

    #[test]
    fn memory_examples() {
        let m = cache_memory(&LteGridParams::lte_20mhz(), &DocsisPhyProfile::default(), 10).unwrap();
        assert_eq!(m.rs_bits, 16_000);
        assert_eq!(m.pbch_bits, 4_800);
        assert_eq!(m.sch_bits, 5_760);
        assert_eq!(m.sib_bits, 25_600);
        assert_eq!(m.docsis_pilot_bits, 4_560);
        assert_eq!(m.lte_total_bits(), 52_160);
        let wide = cache_memory(&LteGridParams::lte_20mhz(), &DocsisPhyProfile::default(), 15).unwrap();
        assert_eq!(wide.rs_bits, 24_000);
    }

    #[test]
    fn profile_sums() {
        let g = LteGridParams::lte_20mhz();
        let p = lte_cache_profile(int(1), &g, 10).unwrap();
        assert_eq!(p.overhead_fraction(), lte_total_overhead(int(1), &g).unwrap());
        assert_eq!(p.memory_bits(), 52_160);
        assert_eq!(p.component("SIB").unwrap().memory_bits, 25_600);
        let d = docsis_cache_profile(int(1), &DocsisPhyProfile::default()).unwrap();
        assert_eq!(d.memory_bits(), 4_560);
        assert!(d.overhead_fraction() < int(1));
    }

    #[test]
    fn grid_validation() {
        let mut g = LteGridParams::lte_20mhz();
        g.system_subcarriers = 1201;
        assert!(matches!(g.validate(), Err(CachingError::PartialResourceBlock { .. })));
        g.system_subcarriers = 1200;
        g.sib_rbs = 0;
        assert_eq!(g.validate(), Err(CachingError::Grid("sib_rbs")));
    }
}
