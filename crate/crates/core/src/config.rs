//! Scenario configuration, read from TOML.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys and out-of-range values are rejected with the key named.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docsis::CableConfig;
use crate::traffic::{PacketSizeMode, TrafficConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("`{key}` = {value} is out of range: expected {expected}")]
    Range { key: String, value: String, expected: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RemoteNodeMode {
    /// Full DOCSIS PHY at the remote node; frames cross the fronthaul in UEPI.
    #[serde(rename = "rphy")]
    RPhy,
    /// FFT at the remote node; frequency-domain I/Q crosses the fronthaul.
    #[default]
    #[serde(rename = "rfft")]
    RFft,
}

impl RemoteNodeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RemoteNodeMode::RPhy => "rphy",
            RemoteNodeMode::RFft => "rfft",
        }
    }
}

impl fmt::Display for RemoteNodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RemoteNodeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "rphy" => Ok(RemoteNodeMode::RPhy),
            "rfft" => Ok(RemoteNodeMode::RFft),
            _ => Err(format!("unknown mode `{s}`, expected rphy or rfft")),
        }
    }
}

/// How upstream cable bytes are grouped before crossing the fronthaul.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Batching {
    /// Bytes received within one upstream OFDM symbol leave together at the symbol end.
    #[default]
    Symbol,
    /// Each packet or request is forwarded as soon as it is received.
    Packet,
}

/// Arrival process of the LTE baseband datagrams.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LteTraffic {
    /// Poisson at `H = 0.5`, on/off aggregate of `lte_subsources` otherwise.
    #[default]
    Scenario,
    /// Evenly spaced datagrams at exactly `rho_b` of the fronthaul rate.
    Cbr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSection {
    pub packet_bytes: u32,
    pub size_mode: PacketSizeMode,
    pub num_subsources: u32,
    pub on_fraction: f64,
    pub mean_on_s: f64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        let t = TrafficConfig::default();
        TrafficSection {
            packet_bytes: t.mean_packet_bytes,
            size_mode: t.size_mode,
            num_subsources: t.num_subsources,
            on_fraction: t.on_fraction,
            mean_on_s: t.mean_on_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FronthaulSection {
    pub capacity_gbps: f64,
    /// Largest datagram on the fronthaul, also the LTE datagram size.
    pub frame_bytes: u32,
    /// Encapsulation overhead of UEPI in R-PHY mode.
    pub uepi_overhead: f64,
    /// Demodulated request frame an R-PHY node forwards per poll response.
    pub rphy_request_bytes: u32,
    pub batching: Batching,
    pub lte_traffic: LteTraffic,
    /// On/off subsources of the LTE source; their peak never exceeds the link.
    pub lte_subsources: u32,
}

impl Default for FronthaulSection {
    fn default() -> Self {
        FronthaulSection {
            capacity_gbps: 10.0,
            frame_bytes: 1500,
            uepi_overhead: 0.05,
            rphy_request_bytes: 6,
            batching: Batching::Symbol,
            lte_traffic: LteTraffic::Scenario,
            lte_subsources: 64,
        }
    }
}

/// Upstream DOCSIS PHY parameters that set the I/Q expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DocsisPhySection {
    pub code_rate: f64,
    pub qam_bits: u32,
    pub bits_per_component: u32,
    pub symbol_us: f64,
}

impl Default for DocsisPhySection {
    fn default() -> Self {
        DocsisPhySection {
            code_rate: 0.9,
            qam_bits: 12,
            bits_per_component: 10,
            symbol_us: 40.0,
        }
    }
}

/// FFT workloads at an R-FFT remote node, checked for schedulability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FftSection {
    pub tau_c_us: f64,
    pub tau_l_us: f64,
    pub lte_symbol_us: f64,
    pub guard_us: f64,
}

impl Default for FftSection {
    fn default() -> Self {
        FftSection {
            tau_c_us: 20.0,
            tau_l_us: 10.0,
            lte_symbol_us: 66.7,
            guard_us: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: RemoteNodeMode,
    pub rho_c: f64,
    pub rho_b: f64,
    pub hurst: f64,
    pub distance_km: f64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub num_cms: u32,
    pub seed: u64,
    /// Queue-length sampling period.
    pub sample_interval_s: f64,
    /// Backlog growth, as a fraction of the fronthaul rate, above which a run is saturated.
    pub saturation_slope: f64,
    pub traffic: TrafficSection,
    pub cable: CableConfig,
    pub fronthaul: FronthaulSection,
    pub docsis_phy: DocsisPhySection,
    pub fft: FftSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: RemoteNodeMode::RFft,
            rho_c: 0.2,
            rho_b: 0.5,
            hurst: 0.5,
            distance_km: 25.0,
            duration_s: 600.0,
            warmup_s: 10.0,
            num_cms: 200,
            seed: 1,
            sample_interval_s: 0.01,
            saturation_slope: 0.001,
            traffic: TrafficSection::default(),
            cable: CableConfig::default(),
            fronthaul: FronthaulSection::default(),
            docsis_phy: DocsisPhySection::default(),
            fft: FftSection::default(),
        }
    }
}

fn check(key: &str, value: f64, ok: bool, expected: &str) -> Result<(), ConfigError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Range {
            key: key.to_string(),
            value: value.to_string(),
            expected: expected.to_string(),
        })
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        check("rho_c", self.rho_c, unit(self.rho_c), "[0, 1]")?;
        check("rho_b", self.rho_b, unit(self.rho_b), "[0, 1]")?;
        check("hurst", self.hurst, (0.5..1.0).contains(&self.hurst), "[0.5, 1)")?;
        check("distance_km", self.distance_km, (10.0..=50.0).contains(&self.distance_km), "[10, 50]")?;
        check("duration_s", self.duration_s, self.duration_s > 0.0, "> 0")?;
        check("warmup_s", self.warmup_s, self.warmup_s >= 0.0, ">= 0")?;
        check("num_cms", self.num_cms as f64, self.num_cms >= 1, ">= 1")?;
        let si = self.sample_interval_s;
        check("sample_interval_s", si, si > 0.0 && si <= self.duration_s / 4.0, "(0, duration_s / 4]")?;
        check("saturation_slope", self.saturation_slope, self.saturation_slope > 0.0, "> 0")?;

        let t = &self.traffic;
        check("traffic.packet_bytes", t.packet_bytes as f64, t.packet_bytes >= 1, ">= 1")?;
        check("traffic.num_subsources", t.num_subsources as f64, t.num_subsources >= 1, ">= 1")?;
        check("traffic.on_fraction", t.on_fraction, t.on_fraction > 0.0 && t.on_fraction <= 1.0, "(0, 1]")?;
        check("traffic.mean_on_s", t.mean_on_s, t.mean_on_s > 0.0, "> 0")?;

        let c = &self.cable;
        check("cable.capacity_gbps", c.capacity_gbps, c.capacity_gbps > 0.0, "> 0")?;
        check("cable.data_fraction", c.data_fraction, c.data_fraction > 0.0 && c.data_fraction <= 1.0, "(0, 1]")?;
        check("cable.min_distance_km", c.min_distance_km, c.min_distance_km >= 0.0, ">= 0")?;
        check(
            "cable.max_distance_km",
            c.max_distance_km,
            c.max_distance_km >= c.min_distance_km,
            ">= cable.min_distance_km",
        )?;
        check("cable.request_bytes", c.request_bytes as f64, c.request_bytes >= 1, ">= 1")?;

        let f = &self.fronthaul;
        check("fronthaul.capacity_gbps", f.capacity_gbps, f.capacity_gbps > 0.0, "> 0")?;
        check("fronthaul.frame_bytes", f.frame_bytes as f64, f.frame_bytes >= 64, ">= 64")?;
        check("fronthaul.uepi_overhead", f.uepi_overhead, (0.0..=1.0).contains(&f.uepi_overhead), "[0, 1]")?;
        check(
            "fronthaul.rphy_request_bytes",
            f.rphy_request_bytes as f64,
            f.rphy_request_bytes >= 1 && f.rphy_request_bytes <= f.frame_bytes,
            "[1, frame_bytes]",
        )?;
        check("fronthaul.lte_subsources", f.lte_subsources as f64, f.lte_subsources >= 1, ">= 1")?;
        if f.lte_traffic == LteTraffic::Scenario && self.hurst > 0.5 {
            // rho_b <= 1, so this caps each subsource's peak at the link rate.
            check(
                "fronthaul.lte_subsources",
                f.lte_subsources as f64,
                f.lte_subsources as f64 * t.on_fraction >= 1.0,
                ">= 1 / traffic.on_fraction",
            )?;
        }

        let p = &self.docsis_phy;
        check("docsis_phy.code_rate", p.code_rate, p.code_rate > 0.0 && p.code_rate <= 1.0, "(0, 1]")?;
        check("docsis_phy.qam_bits", p.qam_bits as f64, (1..=16).contains(&p.qam_bits), "[1, 16]")?;
        check(
            "docsis_phy.bits_per_component",
            p.bits_per_component as f64,
            (1..=32).contains(&p.bits_per_component),
            "[1, 32]",
        )?;
        check("docsis_phy.symbol_us", p.symbol_us, p.symbol_us > 0.0, "> 0")?;

        let x = &self.fft;
        check("fft.tau_c_us", x.tau_c_us, x.tau_c_us > 0.0, "> 0")?;
        check("fft.tau_l_us", x.tau_l_us, x.tau_l_us > 0.0, "> 0")?;
        check("fft.lte_symbol_us", x.lte_symbol_us, x.lte_symbol_us > 0.0, "> 0")?;
        check("fft.guard_us", x.guard_us, x.guard_us >= 0.0, ">= 0")?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Traffic model of one cable modem.
    pub fn traffic_config(&self) -> TrafficConfig {
        TrafficConfig {
            hurst: self.hurst,
            rho: self.rho_c,
            mean_packet_bytes: self.traffic.packet_bytes,
            size_mode: self.traffic.size_mode,
            num_subsources: self.traffic.num_subsources,
            on_fraction: self.traffic.on_fraction,
            mean_on_s: self.traffic.mean_on_s,
        }
    }

    /// Traffic model of the LTE source, `None` for a constant-bitrate stream.
    pub fn lte_traffic_config(&self) -> Option<TrafficConfig> {
        (self.fronthaul.lte_traffic == LteTraffic::Scenario).then(|| TrafficConfig {
            rho: self.rho_b,
            mean_packet_bytes: self.fronthaul.frame_bytes,
            size_mode: PacketSizeMode::Fixed,
            num_subsources: self.fronthaul.lte_subsources,
            ..self.traffic_config()
        })
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::parse(&text)
}
