//! `rfft`: rate tables, cache overheads, FFT schedules and fronthaul
//! simulations from the command line.

mod commands;
mod output;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfft_core::config::{LteTraffic, RemoteNodeMode};
use rfft_core::rates::{parse_rational, Rational};

#[derive(Debug, Parser)]
#[command(name = "rfft", version, about = "Remote-FFT fronthaul models and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where a command writes its rows.
#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file, `-` for stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Downstream fronthaul rates of every functional split.
    Rates {
        /// Loads to tabulate, as decimals or fractions.
        #[arg(long, value_delimiter = ',', value_parser = rational, default_value = "0.01,0.1,0.2,1")]
        rho: Vec<Rational>,
        /// Decimals of the Gbps columns.
        #[arg(long, default_value_t = 3)]
        decimals: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Overhead and memory of the cacheable control symbols.
    Caching {
        #[arg(long, value_delimiter = ',', value_parser = rational, default_value = "1")]
        rho: Vec<Rational>,
        /// LTE channel bandwidth.
        #[arg(long, value_enum, default_value = "20")]
        bandwidth_mhz: Bandwidth,
        /// Bits per I/Q component held in the cache.
        #[arg(long, default_value_t = 10)]
        bits: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Non-preemptive EDF timeline of the shared FFT module.
    Schedule {
        /// DOCSIS symbol period.
        #[arg(long, value_parser = units::micros, default_value = "40us")]
        t_c: f64,
        /// DOCSIS FFT compute time.
        #[arg(long, value_parser = units::micros, default_value = "20us")]
        tau_c: f64,
        /// LTE symbol period.
        #[arg(long, value_parser = units::micros, default_value = "66.7us")]
        t_l: f64,
        /// LTE FFT compute time.
        #[arg(long, value_parser = units::micros, default_value = "10us")]
        tau_l: f64,
        /// Switching time added to each compute time.
        #[arg(long, value_parser = units::micros, default_value = "0us")]
        guard: f64,
        /// Simulated span; two hyperperiods when omitted.
        #[arg(long, value_parser = units::micros)]
        horizon: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// One fronthaul scenario with DOCSIS and LTE traffic.
    Simulate(Box<SimulateArgs>),
    /// Every scenario of a TOML grid, in parallel.
    Sweep {
        /// Grid file with `[base]` and `[axes]` tables.
        grid: PathBuf,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        jobs: Option<usize>,
        /// Directory for generated output names.
        #[arg(long, env = "RFFT_OUT_DIR", default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Computed rate tables against the published values.
    Tables {
        /// Report cache memory per component instead of the rate cells.
        #[arg(long)]
        memory: bool,
        #[arg(long, default_value_t = 10)]
        bits: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Base scenario file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Cable load.
    #[arg(long)]
    rho_c: Option<f64>,
    /// LTE load on the fronthaul.
    #[arg(long)]
    rho_b: Option<f64>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long, value_parser = units::km)]
    distance_km: Option<f64>,
    /// Measured span after warm-up [default: 600].
    #[arg(long, value_parser = units::seconds)]
    duration_s: Option<f64>,
    /// [default: 10]
    #[arg(long, value_parser = units::seconds)]
    warmup_s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cable modems [default: 200].
    #[arg(long)]
    cms: Option<u32>,
    #[arg(long, value_parser = units::gbps)]
    fronthaul_gbps: Option<f64>,
    #[arg(long, value_enum)]
    lte_traffic: Option<LteArrivals>,
    /// Also write every delivered DOCSIS packet to this CSV.
    #[arg(long)]
    packets: Option<PathBuf>,
    #[arg(long, env = "RFFT_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Rphy,
    Rfft,
}

impl From<Mode> for RemoteNodeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Rphy => RemoteNodeMode::RPhy,
            Mode::Rfft => RemoteNodeMode::RFft,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LteArrivals {
    Scenario,
    Cbr,
}

impl From<LteArrivals> for LteTraffic {
    fn from(m: LteArrivals) -> Self {
        match m {
            LteArrivals::Scenario => LteTraffic::Scenario,
            LteArrivals::Cbr => LteTraffic::Cbr,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Bandwidth {
    #[value(name = "20")]
    Mhz20,
    #[value(name = "1.4")]
    Mhz1_4,
}

/// A decimal such as `0.25` or a fraction such as `1/4`.
fn rational(s: &str) -> Result<Rational, String> {
    let bad = || format!("`{s}` is not a decimal or fraction");
    match s.trim().split_once('/') {
        Some((n, d)) => {
            let (n, d) = (parse_rational(n.trim()).ok_or_else(bad)?, parse_rational(d.trim()).ok_or_else(bad)?);
            if d == Rational::from_integer(0) {
                return Err(bad());
            }
            Ok(n / d)
        }
        None => parse_rational(s.trim()).ok_or_else(bad),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
