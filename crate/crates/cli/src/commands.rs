use std::io::BufWriter;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rfft_core::caching::{docsis_cache_profile, lte_cache_profile, CacheProfile, LteGridParams};
use rfft_core::config::{parse_config, ScenarioConfig};
use rfft_core::des::SimTime;
use rfft_core::fronthaul::{run_scenario, run_scenario_with_packets, scenario_sweep};
use rfft_core::grid::parse_grid;
use rfft_core::rates::{split_comparison_table, Rational, SplitTableConfig, SplitTriple};
use rfft_core::report::{
    decimal, delay_rows, memory_checks, reproduce_tables, table_rows, CellStatus, PacketCsv, SweepRow,
};
use rfft_core::sched::{
    edf_timeline, hyperperiod, loose_pair_conditions, nonpreemptive_schedulable_pair, PeriodicTask,
};
use rfft_core::{DocsisPhyProfile, LtePhyProfile};

use crate::output::{create, Sink};
use crate::{Bandwidth, Command, OutputArgs, SimulateArgs};

/// Exit status of `tables` when a computed cell contradicts an unflagged published value.
const MISMATCH_EXIT: u8 = 2;

pub fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Rates { rho, decimals, output } => rates(&rho, decimals, &output),
        Command::Caching { rho, bandwidth_mhz, bits, output } => caching(&rho, bandwidth_mhz, bits, &output),
        Command::Schedule { t_c, tau_c, t_l, tau_l, guard, horizon, output } => {
            schedule([t_c, tau_c, t_l, tau_l], guard, horizon, &output)
        }
        Command::Simulate(args) => simulate(*args),
        Command::Sweep { grid, jobs, out_dir, output } => sweep(&grid, jobs, &out_dir, &output),
        Command::Tables { memory, bits, output } => tables(memory, bits, &output),
    }
}

#[derive(Serialize)]
struct RateRow {
    rho: String,
    split: &'static str,
    lte_gbps: String,
    docsis_gbps: String,
    total_gbps: String,
}

fn rates(loads: &[Rational], decimals: u32, out: &OutputArgs) -> Result<ExitCode> {
    let table = split_comparison_table(
        &LtePhyProfile::default(),
        &DocsisPhyProfile::default(),
        loads,
        &SplitTableConfig::default(),
    )?;
    let g = |t: &SplitTriple| {
        (
            decimal(t.lte.gbps(), decimals),
            decimal(t.docsis.gbps(), decimals),
            decimal(t.total().gbps(), decimals),
        )
    };
    let rows: Vec<RateRow> = table
        .iter()
        .flat_map(|r| {
            [
                ("fft_cached", &r.fft_cached),
                ("fft_uncached", &r.fft_uncached),
                ("baseband", &r.baseband),
                ("passband", &r.passband),
            ]
            .map(|(split, t)| {
                let (lte_gbps, docsis_gbps, total_gbps) = g(t);
                RateRow { rho: decimal(r.rho, 4), split, lte_gbps, docsis_gbps, total_gbps }
            })
        })
        .collect();
    Sink::stdout_default(out).emit(out, &rows, &rows)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CacheRow {
    technology: String,
    component: &'static str,
    rho: String,
    cached_symbols: i128,
    overhead_pct: String,
    memory_bits: u64,
}

fn cache_rows(p: &CacheProfile) -> impl Iterator<Item = CacheRow> + '_ {
    let tech = serde_json::to_value(p.technology)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    p.components.iter().map(move |c| CacheRow {
        technology: tech.clone(),
        component: c.name,
        rho: decimal(p.rho, 4),
        cached_symbols: c.symbols,
        overhead_pct: decimal(c.fraction * Rational::from_integer(100), 3),
        memory_bits: c.memory_bits,
    })
}

fn caching(loads: &[Rational], bw: Bandwidth, bits: u32, out: &OutputArgs) -> Result<ExitCode> {
    let grid = match bw {
        Bandwidth::Mhz20 => LteGridParams::lte_20mhz(),
        Bandwidth::Mhz1_4 => LteGridParams::lte_1_4mhz(),
    };
    let mut rows = Vec::new();
    for &rho in loads {
        rows.extend(cache_rows(&lte_cache_profile(rho, &grid, bits)?));
        rows.extend(cache_rows(&docsis_cache_profile(rho, &DocsisPhyProfile::default())?));
    }
    Sink::stdout_default(out).emit(out, &rows, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn micros_to_time(us: f64) -> SimTime {
    SimTime::from_ps((us * 1e6).round() as u64)
}

/// Exact microsecond rendering of a picosecond clock.
fn us_text(t: SimTime) -> String {
    let ps = t.as_ps();
    format!("{}.{:06}", ps / 1_000_000, ps % 1_000_000)
}

#[derive(Serialize)]
struct JobRow {
    task: String,
    job: u64,
    release_us: String,
    start_us: String,
    finish_us: String,
    deadline_us: String,
    missed: bool,
}

fn schedule(times: [f64; 4], guard: f64, horizon: Option<f64>, out: &OutputArgs) -> Result<ExitCode> {
    let [t_c, tau_c, t_l, tau_l] = times.map(micros_to_time);
    let guard = micros_to_time(guard);
    let cable = PeriodicTask::new("cable", t_c, tau_c)?.with_guard(guard)?;
    let lte = PeriodicTask::new("lte", t_l, tau_l)?.with_guard(guard)?;
    let tasks = [cable, lte];
    let horizon = match horizon {
        Some(h) => micros_to_time(h),
        None => {
            let h = hyperperiod(&tasks).context("periods have no common hyperperiod; pass --horizon")?;
            h + h
        }
    };
    let tl = edf_timeline(&tasks, horizon)?;
    let utilization: f64 = tasks
        .iter()
        .map(|t| {
            let u = t.utilization();
            *u.numer() as f64 / *u.denom() as f64
        })
        .sum();
    eprintln!(
        "utilization {utilization:.4}; loose pair conditions {}; blocking-aware condition {}; {} jobs, {} missed",
        verdict(loose_pair_conditions(&tasks[0], &tasks[1])),
        verdict(nonpreemptive_schedulable_pair(&tasks[0], &tasks[1])),
        tl.entries.len(),
        tl.misses.len(),
    );
    let rows: Vec<JobRow> = tl
        .entries
        .iter()
        .map(|e| JobRow {
            task: e.task.clone(),
            job: e.job,
            release_us: us_text(e.release),
            start_us: us_text(e.start),
            finish_us: us_text(e.finish),
            deadline_us: us_text(e.deadline),
            missed: e.missed(),
        })
        .collect();
    Sink::stdout_default(out).emit(out, &rows, &tl)?;
    Ok(ExitCode::SUCCESS)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "hold"
    } else {
        "fail"
    }
}

fn scenario(a: &SimulateArgs) -> Result<ScenarioConfig> {
    let mut c = match &a.config {
        Some(p) => parse_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(m) = a.mode {
        c.mode = m.into();
    }
    macro_rules! set {
        ($($field:ident = $arg:ident),*) => {$(
            if let Some(v) = a.$arg {
                c.$field = v;
            }
        )*};
    }
    set!(rho_c = rho_c, rho_b = rho_b, hurst = hurst, distance_km = distance_km, duration_s = duration_s,
         warmup_s = warmup_s, seed = seed, num_cms = cms);
    if let Some(g) = a.fronthaul_gbps {
        c.fronthaul.capacity_gbps = g;
    }
    if let Some(t) = a.lte_traffic {
        c.fronthaul.lte_traffic = t.into();
    }
    c.validate()?;
    Ok(c)
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let cfg = scenario(&a)?;
    log::info!("running {} for {} s after {} s warm-up", cfg.mode, cfg.duration_s, cfg.warmup_s);
    let result = match &a.packets {
        None => run_scenario(&cfg)?,
        Some(path) => {
            let mut csv = PacketCsv::new(BufWriter::new(create(path)?));
            let mut failure = None;
            let r = run_scenario_with_packets(&cfg, &mut |p| {
                if failure.is_none() {
                    failure = csv.write(&p).err();
                }
            })?;
            if let Some(e) = failure {
                return Err(e).with_context(|| format!("writing {}", path.display()));
            }
            csv.finish()?;
            r
        }
    };
    if result.saturated {
        log::warn!("the fronthaul queue grew without bound; delays are lower bounds");
    }
    let ext = if a.output.json { "json" } else { "csv" };
    let name = format!(
        "simulate_{}_rhoC{}_rhoB{}_H{}_d{}km_seed{}.{ext}",
        cfg.mode, cfg.rho_c, cfg.rho_b, cfg.hurst, cfg.distance_km, cfg.seed
    );
    Sink::file_default(&a.output, &a.out_dir, &name).emit(&a.output, &delay_rows(&result), &result)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(path: &std::path::Path, jobs: Option<usize>, dir: &std::path::Path, out: &OutputArgs) -> Result<ExitCode> {
    let grid = parse_grid(path)?;
    let scenarios = grid.scenarios()?;
    if scenarios.is_empty() {
        bail!("{} defines no scenarios", path.display());
    }
    eprintln!("{} scenarios", scenarios.len());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let results = pool.install(|| scenario_sweep(&scenarios))?;
    let rows: Vec<SweepRow> = results.iter().map(SweepRow::from).collect();
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("grid");
    let ext = if out.json { "json" } else { "csv" };
    Sink::file_default(out, dir, &format!("sweep_{stem}.{ext}")).emit(out, &rows, &results)?;
    Ok(ExitCode::SUCCESS)
}

fn tables(memory: bool, bits: u32, out: &OutputArgs) -> Result<ExitCode> {
    let sink = Sink::stdout_default(out);
    let statuses: Vec<CellStatus> = if memory {
        let checks = memory_checks(bits)?;
        sink.emit(out, &checks, &checks)?;
        checks.iter().map(|c| c.status).collect()
    } else {
        let reports = reproduce_tables()?;
        let rows = table_rows(&reports);
        sink.emit(out, &rows, &rows)?;
        for r in &reports {
            let count = |s| r.cells.iter().filter(|c| c.status == s).count();
            eprintln!(
                "{}: {} cells, {} flagged, {} mismatched",
                r.table,
                r.cells.len(),
                count(CellStatus::Flagged),
                count(CellStatus::Mismatch)
            );
        }
        reports.iter().flat_map(|r| r.cells.iter().map(|c| c.status)).collect()
    };
    Ok(if statuses.contains(&CellStatus::Mismatch) {
        ExitCode::from(MISMATCH_EXIT)
    } else {
        ExitCode::SUCCESS
    })
}
