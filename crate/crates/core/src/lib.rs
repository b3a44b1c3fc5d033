//! Fronthaul rate models, QAM-symbol caching, shared-FFT scheduling and a
//! discrete-event simulation of cable and LTE upstream traffic sharing one
//! optical fronthaul link.

pub mod caching;
pub mod config;
pub mod des;
pub mod docsis;
pub mod fronthaul;
pub mod grid;
pub mod rates;
pub mod report;
pub mod sched;
pub mod traffic;

pub use caching::{CacheProfile, Technology};
pub use config::{parse_config, ConfigError, RemoteNodeMode, ScenarioConfig};
pub use des::{RngStream, Scheduler, SimTime};
pub use fronthaul::{run_scenario, scenario_sweep, DelayStats, PacketRecord, ScenarioResult};
pub use grid::{parse_grid, SweepGrid};
pub use rates::{Bitrate, DocsisPhyProfile, LtePhyProfile, Rational};
pub use report::{reproduce_tables, TableReport};
pub use sched::{edf_timeline, PeriodicTask, ScheduleTimeline};
pub use traffic::TrafficConfig;
