//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` fail for reasons outside the code
//! (inconsistent published values or an insufficient published condition).
//! They still print FAIL; the test only errors on an unexpected failure.

mod common;

use std::fmt::Write as _;

use num_traits::{One, Signed, ToPrimitive};
use rand::Rng;
use rfft_core::caching::{
    docsis_pilot_overhead, lte_cache_profile, pbch_overhead, rs_overhead, sch_overhead, sib_overhead, LteGridParams,
};
use rfft_core::config::{RemoteNodeMode, ScenarioConfig};
use rfft_core::des::{RngStream, SimTime};
use rfft_core::fronthaul::{run_scenario, run_scenario_with_packets, scenario_sweep, ScenarioResult};
use rfft_core::rates::{
    baseband_rate, freq_domain_rate, passband_rate, present, ratio, Bitrate, DocsisPhyProfile, LtePhyProfile,
    Rational, Rounding,
};
use rfft_core::report::{
    decimal, delay_rows, memory_checks, reproduce_tables, write_csv, CellStatus, PacketCsv, SweepRow, TableId,
    TableReport,
};
use rfft_core::sched::{edf_timeline, hyperperiod, loose_pair_conditions, nonpreemptive_schedulable_pair, PeriodicTask};
use rfft_core::traffic::{make_generator, TrafficConfig};

/// Criteria that cannot pass as stated; see the README.
const KNOWN_FAILURES: &[u32] = &[3, 6];

type Outcome = Result<String, String>;

fn ensure(ok: bool, log: &mut String, msg: impl AsRef<str>) -> bool {
    if !ok {
        let _ = write!(log, "{}; ", msg.as_ref());
    }
    ok
}

fn finish(log: String, summary: String) -> Outcome {
    if log.is_empty() {
        Ok(summary)
    } else {
        Err(log)
    }
}

fn gbps(r: Rational) -> String {
    decimal(r, 4)
}

// 1. Analytical split rates.
fn analytical_splits() -> Outcome {
    let lte = LtePhyProfile::default();
    let doc = DocsisPhyProfile::default();
    let mut log = String::new();
    let g = |b: Bitrate| b.gbps();
    ensure(g(passband_rate(&lte)) == ratio(40, 1), &mut log, "LTE passband != 40 Gbps");
    ensure(g(passband_rate(&doc)) == ratio(20, 1), &mut log, "DOCSIS passband != 20 Gbps");
    ensure(g(baseband_rate(&lte)) == ratio(12288, 10000), &mut log, "LTE baseband != 1.2288 Gbps");
    ensure(g(baseband_rate(&doc)) == ratio(8192, 1000), &mut log, "DOCSIS baseband != 8.192 Gbps");
    let f_mbps = freq_domain_rate(&lte).bps() / Rational::from_integer(1_000_000);
    ensure(
        present(f_mbps, 1, Rounding::Nearest) == ratio(3598, 10),
        &mut log,
        format!("frequency-domain {} Mbps", decimal(f_mbps, 3)),
    );
    let reports = reproduce_tables().map_err(|e| e.to_string())?;
    let cmp = &reports[2];
    for col in ["baseband lte", "baseband docsis", "baseband total", "passband lte", "passband docsis", "passband total"] {
        let c = cmp.cell("any", col).expect("constant columns present");
        ensure(c.status == CellStatus::Match, &mut log, format!("{col} {} vs {}", decimal(c.computed, 3), decimal(c.reference, 3)));
    }
    finish(
        log,
        format!(
            "passband 40/20 Gbps, baseband {}/{} Gbps, frequency domain {} Mbps",
            gbps(g(baseband_rate(&lte))),
            decimal(g(baseband_rate(&doc)), 3),
            decimal(f_mbps, 1)
        ),
    )
}

fn describe_cells(t: &TableReport, status: CellStatus) -> Vec<String> {
    t.cells
        .iter()
        .filter(|c| c.status == status)
        .map(|c| format!("{} {} / {}: {} vs published {}", t.table, c.row, c.column, decimal(c.computed, c.decimals()), decimal(c.reference, c.decimals())))
        .collect()
}

// 2. LTE FFT-split table.
fn lte_table() -> Outcome {
    let reports = reproduce_tables().map_err(|e| e.to_string())?;
    let t = &reports[0];
    assert_eq!(t.table, TableId::LteFftSplit);
    let mut log = String::new();
    let rates = t.cells.iter().filter(|c| c.column != "savings_pct").count();
    let savings = t.cells.len() - rates;
    ensure(rates == 24 && savings == 4, &mut log, format!("{rates} rate / {savings} savings cells"));
    for m in describe_cells(t, CellStatus::Mismatch) {
        ensure(false, &mut log, m);
    }
    let flagged: Vec<_> = t.cells.iter().filter(|c| c.status == CellStatus::Flagged).collect();
    ensure(
        flagged.len() == 1 && flagged[0].row == "1" && flagged[0].column == "cr=0.9 cached",
        &mut log,
        "expected exactly the full-load cr=0.9 cached cell to be flagged",
    );
    if let Some(c) = flagged.first() {
        ensure(decimal(c.computed, 3) == "3.704", &mut log, format!("flagged cell outputs {}", decimal(c.computed, 3)));
    }
    let s = t.cell("1", "savings_pct").expect("savings cell");
    ensure(s.status == CellStatus::Match && decimal(s.computed, 2) == "6.54", &mut log, "full-load savings != 6.54");
    finish(log, "24 rate + 4 savings cells match; full-load cr=0.9 cached outputs 3.704, published 3.333 flagged".into())
}

// 3. DOCSIS table, no exceptions; split comparison with the inherited flag only.
fn docsis_and_comparison_tables() -> Outcome {
    let reports = reproduce_tables().map_err(|e| e.to_string())?;
    let (doc, cmp) = (&reports[1], &reports[2]);
    let mut log = String::new();
    ensure(doc.cells.len() == 28, &mut log, "DOCSIS table cell count");
    for m in describe_cells(doc, CellStatus::Mismatch).into_iter().chain(describe_cells(doc, CellStatus::Flagged)) {
        ensure(false, &mut log, m);
    }
    for m in describe_cells(cmp, CellStatus::Mismatch) {
        ensure(false, &mut log, m);
    }
    let flagged: Vec<_> = cmp.cells.iter().filter(|c| c.status == CellStatus::Flagged).map(|c| (c.row.as_str(), c.column.as_str())).collect();
    ensure(flagged == [("1", "cached lte"), ("1", "cached total")], &mut log, format!("flagged cells {flagged:?}"));
    if let Some(c) = cmp.cell("1", "cached total") {
        let five_555 = ratio(5555, 1000);
        ensure(
            (c.computed - five_555).abs() <= ratio(1, 1000),
            &mut log,
            format!("flagged total {} not ~5.555", decimal(c.computed, 3)),
        );
    }
    finish(log, "DOCSIS table exact; split comparison matches apart from the flagged full-load cached cells".into())
}

// 4. Caching overheads and homogeneity.
fn caching_overheads() -> Outcome {
    let g20 = LteGridParams::lte_20mhz();
    let g14 = LteGridParams::lte_1_4mhz();
    let doc = DocsisPhyProfile::default();
    let one = Rational::one();
    let pct = |r: Rational| r.to_f64().unwrap() * 100.0;
    let cases = [
        ("RS", pct(rs_overhead(one, &g20).unwrap()), 4.76),
        ("PBCH 20 MHz", pct(pbch_overhead(one, &g20).unwrap()), 0.142),
        ("PBCH 1.4 MHz", pct(pbch_overhead(one, &g14).unwrap()), 2.38),
        ("SCH 20 MHz", pct(sch_overhead(one, &g20).unwrap()), 0.171),
        ("SCH 1.4 MHz", pct(sch_overhead(one, &g14).unwrap()), 2.86),
        ("SIB 20 MHz", pct(sib_overhead(one, &g20).unwrap()), 0.381),
        ("SIB 1.4 MHz", pct(sib_overhead(one, &g14).unwrap()), 6.35),
        ("DOCSIS pilots", pct(docsis_pilot_overhead(one, &doc).unwrap()), 2.97),
    ];
    let mut log = String::new();
    for (name, got, want) in cases {
        // The 1e-9 absorbs float conversion of the exact fraction.
        ensure((got - want).abs() <= 0.01 + 1e-9, &mut log, format!("{name}: {got:.4} % vs {want} %"));
    }
    let mut rng = RngStream::new(4, 0);
    for _ in 0..100 {
        let rho = ratio(rng.random_range(1..=1_000_000), 1_000_000);
        let at = lte_cache_profile(rho, &g20, 10).unwrap().overhead_fraction() * rho;
        let base = lte_cache_profile(one, &g20, 10).unwrap().overhead_fraction();
        let d = docsis_pilot_overhead(rho, &doc).unwrap() * rho;
        ensure(at == base && d == docsis_pilot_overhead(one, &doc).unwrap(), &mut log, format!("homogeneity fails at rho={rho}"));
    }
    finish(log, "8 component overheads within 0.01 pp; overhead(rho) * rho exact for 100 loads".into())
}

// 5. Cache memory.
fn cache_memory_check() -> Outcome {
    let checks = memory_checks(10).map_err(|e| e.to_string())?;
    let mut log = String::new();
    for (name, bits) in [("RS", 16000), ("PBCH", 4800), ("SCH", 5760), ("PILOTS", 4560)] {
        let c = checks.iter().find(|c| c.component == name).expect("component");
        ensure(c.computed_bits == bits && c.status == CellStatus::Match, &mut log, format!("{name}: {} bits", c.computed_bits));
    }
    let sib = checks.iter().find(|c| c.component == "SIB").expect("SIB");
    ensure(
        sib.computed_bits == 25600 && sib.published_bits == 5760 && sib.status == CellStatus::Flagged,
        &mut log,
        format!("SIB {} bits, status {:?}", sib.computed_bits, sib.status),
    );
    finish(log, "RS 16000, PBCH 4800, SCH 5760, pilots 4560 bits; SIB 25600 flagged against 5760".into())
}

fn random_pair(rng: &mut RngStream) -> (PeriodicTask, PeriodicTask) {
    let us = SimTime::from_micros;
    let t_c = rng.random_range(10..=200u64);
    let t_l = rng.random_range(10..=200u64);
    let tau_c = rng.random_range(1..=t_c);
    let tau_l = rng.random_range(1..=t_l);
    (
        PeriodicTask::new("cable", us(t_c), us(tau_c)).unwrap(),
        PeriodicTask::new("lte", us(t_l), us(tau_l)).unwrap(),
    )
}

fn two_hyperperiods(a: &PeriodicTask, b: &PeriodicTask) -> (bool, bool) {
    let tasks = [a.clone(), b.clone()];
    let h = hyperperiod(&tasks).expect("small hyperperiod");
    let tl = edf_timeline(&tasks, h + h).unwrap();
    let repeats = tl.window(SimTime::ZERO, h) == tl.window(h, h);
    (tl.misses.is_empty(), repeats)
}

// 6. Non-preemptive EDF over random task pairs.
fn scheduler() -> Outcome {
    let mut rng = RngStream::new(6, 0);
    let mut log = String::new();
    let (mut feasible, mut missed, mut not_repeating, mut corrected_missed, mut corrected) = (0, 0, 0, 0, 0);
    while feasible < 1000 {
        let (a, b) = random_pair(&mut rng);
        if !loose_pair_conditions(&a, &b) {
            continue;
        }
        feasible += 1;
        let (clean, repeats) = two_hyperperiods(&a, &b);
        if !clean {
            missed += 1;
            if missed <= 3 {
                let _ = write!(
                    log,
                    "miss with T_C={} tau_C={} T_L={} tau_L={} us; ",
                    a.period.as_ps() / 1_000_000,
                    a.compute.as_ps() / 1_000_000,
                    b.period.as_ps() / 1_000_000,
                    b.compute.as_ps() / 1_000_000
                );
            }
        }
        if !repeats {
            not_repeating += 1;
        }
        if nonpreemptive_schedulable_pair(&a, &b) {
            corrected += 1;
            if !clean || !repeats {
                corrected_missed += 1;
            }
        }
    }
    ensure(missed == 0, &mut log, format!("{missed}/1000 sets meeting the stated conditions miss a deadline"));
    ensure(not_repeating == 0, &mut log, format!("{not_repeating}/1000 sets do not repeat per hyperperiod"));
    println!(
        "      info: of these, {corrected} also meet the blocking-aware condition; {corrected_missed} of those miss or fail to repeat"
    );
    let mut overloaded = 0;
    let mut overloaded_clean = 0;
    while overloaded < 1000 {
        let (a, b) = random_pair(&mut rng);
        if a.utilization() + b.utilization() <= num_rational::Ratio::one() {
            continue;
        }
        overloaded += 1;
        if two_hyperperiods(&a, &b).0 {
            overloaded_clean += 1;
        }
    }
    ensure(overloaded_clean == 0, &mut log, format!("{overloaded_clean}/1000 overloaded sets never miss"));
    finish(log, "1000 feasible sets miss nothing and repeat per hyperperiod; 1000 overloaded sets all miss".into())
}

// 7. Traffic generator statistics.
fn traffic() -> Outcome {
    let mut log = String::new();
    let per_cm = Bitrate::from_mbps(5);
    let line = Bitrate::from_gbps(1);
    let poisson = TrafficConfig { hurst: 0.5, rho: 0.2, ..Default::default() };
    let mut g = make_generator(&poisson, RngStream::new(7, 0), per_cm, line).unwrap();
    let mut prev = SimTime::ZERO;
    let mut gaps = Vec::with_capacity(100_000);
    while gaps.len() < 100_000 {
        let a = g.next_arrival().unwrap();
        gaps.push((a.time - prev).as_secs_f64());
        prev = a.time;
    }
    let rate = 5e6 * 0.2 / (472.0 * 8.0);
    let d = common::ks_exponential(&gaps, rate);
    let crit = common::ks_critical_1pct(gaps.len());
    ensure(d < crit, &mut log, format!("KS D={d:.5} >= {crit:.5}"));

    let bursty = TrafficConfig { hurst: 0.8, rho: 0.2, ..Default::default() };
    let dur_s = 600u64;
    let bin = SimTime::from_micros(500);
    let nbins = (dur_s * 2000) as usize;
    let mut series = vec![0f64; nbins];
    let mut bytes = 0u64;
    for cm in 0..200 {
        let mut g = make_generator(&bursty, RngStream::new(7, 1000 + cm), per_cm, line).unwrap();
        while let Some(a) = g.next_arrival() {
            let b = (a.time.as_ps() / bin.as_ps()) as usize;
            if b >= nbins {
                break;
            }
            series[b] += a.bytes as f64;
            bytes += a.bytes as u64;
        }
    }
    let h = common::aggregated_variance_hurst(&series, 4, 32);
    ensure((0.72..=0.88).contains(&h), &mut log, format!("Hurst estimate {h:.3}"));
    let offered = bytes as f64 * 8.0 / dur_s as f64;
    let err = offered / 200e6 - 1.0;
    ensure(err.abs() <= 0.01, &mut log, format!("offered load off by {:.3} %", err * 100.0));
    finish(log, format!("KS D={d:.5} < {crit:.5}; H=0.8 estimate {h:.3}; load error {:+.3} %", err * 100.0))
}

fn desk(mode: RemoteNodeMode, rho_c: f64, rho_b: f64, hurst: f64, d: f64) -> ScenarioConfig {
    ScenarioConfig {
        mode,
        rho_c,
        rho_b,
        hurst,
        distance_km: d,
        duration_s: 60.0,
        warmup_s: 10.0,
        num_cms: 200,
        seed: 1,
        ..Default::default()
    }
}

fn us(x: f64) -> String {
    format!("{:.3} us", x * 1e6)
}

// 8. Desk-scale simulation structure.
fn simulation() -> Outcome {
    use RemoteNodeMode::{RFft, RPhy};
    let mut log = String::new();
    let mut notes = Vec::new();
    let run = |c: ScenarioConfig| -> Result<ScenarioResult, String> { run_scenario(&c).map_err(|e| e.to_string()) };

    // (a)
    for rho_b in [0.2, 0.5, 0.8] {
        let p = run(desk(RPhy, 0.2, rho_b, 0.5, 25.0))?;
        let f = run(desk(RFft, 0.2, rho_b, 0.5, 25.0))?;
        let rel = f.docsis.mean_delay_s / p.docsis.mean_delay_s - 1.0;
        println!(
            "      (a) rho_B={rho_b}: DOCSIS R-PHY {} R-FFT {} ({:+.2} %)",
            us(p.docsis.mean_delay_s),
            us(f.docsis.mean_delay_s),
            rel * 100.0
        );
        ensure(rel.abs() <= 0.05, &mut log, format!("(a) rho_B={rho_b}: R-FFT {:+.2} % vs R-PHY", rel * 100.0));
    }
    notes.push("(a) within 5 %".to_string());

    // (b)
    let f93 = run(desk(RFft, 0.6, 0.93, 0.5, 50.0))?;
    let p93 = run(desk(RPhy, 0.6, 0.93, 0.5, 50.0))?;
    let p97 = run(desk(RPhy, 0.6, 0.97, 0.5, 50.0))?;
    println!(
        "      (b) saturated: R-FFT@0.93={} R-PHY@0.93={} R-PHY@0.97={} (slopes {:.3e} {:.3e} {:.3e} B/s)",
        f93.saturated,
        p93.saturated,
        p97.saturated,
        f93.fronthaul.backlog_slope_bytes_per_s,
        p93.fronthaul.backlog_slope_bytes_per_s,
        p97.fronthaul.backlog_slope_bytes_per_s
    );
    ensure(f93.saturated, &mut log, "(b) R-FFT at rho_B=0.93 not saturated");
    ensure(!p93.saturated, &mut log, "(b) R-PHY at rho_B=0.93 saturated");
    ensure(p97.saturated, &mut log, "(b) R-PHY at rho_B=0.97 not saturated");
    notes.push("(b) knees bracketed".to_string());

    // (c)
    for mode in [RFft, RPhy] {
        let near = run(desk(mode, 0.2, 0.2, 0.5, 10.0))?;
        let far = run(desk(mode, 0.2, 0.2, 0.5, 50.0))?;
        let diff = far.lte.mean_delay_s - near.lte.mean_delay_s;
        println!("      (c) {mode}: LTE 50 km - 10 km = {}", us(diff));
        ensure((diff - 200e-6).abs() <= 10e-6, &mut log, format!("(c) {mode}: difference {}", us(diff)));
    }
    notes.push("(c) 200 us +- 10 us".to_string());

    // (d)
    for mode in [RPhy, RFft] {
        let smooth = run(desk(mode, 0.2, 0.5, 0.5, 25.0))?;
        let bursty = run(desk(mode, 0.2, 0.5, 0.8, 25.0))?;
        println!(
            "      (d) {mode}: DOCSIS {} -> {}, LTE {} -> {} (H 0.5 -> 0.8), cable load {:.4e} -> {:.4e} b/s",
            us(smooth.docsis.mean_delay_s),
            us(bursty.docsis.mean_delay_s),
            us(smooth.lte.mean_delay_s),
            us(bursty.lte.mean_delay_s),
            smooth.cable_throughput_bps,
            bursty.cable_throughput_bps
        );
        ensure(bursty.docsis.mean_delay_s > smooth.docsis.mean_delay_s, &mut log, format!("(d) {mode}: DOCSIS not higher"));
        ensure(bursty.lte.mean_delay_s > smooth.lte.mean_delay_s, &mut log, format!("(d) {mode}: LTE not higher"));
    }
    notes.push("(d) H=0.8 strictly higher".to_string());
    finish(log, notes.join(", "))
}

fn csv_bytes(cfg: &ScenarioConfig) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut packets = PacketCsv::new(Vec::new());
    let mut err = None;
    let r = run_scenario_with_packets(cfg, &mut |p| {
        if let Err(e) = packets.write(&p) {
            err.get_or_insert(e.to_string());
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(e) = err {
        return Err(e);
    }
    write_csv(&delay_rows(&r), &mut out).map_err(|e| e.to_string())?;
    write_csv(&[SweepRow::from(&r)], &mut out).map_err(|e| e.to_string())?;
    out.extend(packets.finish().map_err(|e| e.to_string())?);
    Ok(out)
}

// 9. Byte-identical CSV on re-run.
fn determinism() -> Outcome {
    let mut log = String::new();
    let cfg = ScenarioConfig {
        mode: RemoteNodeMode::RFft,
        hurst: 0.8,
        rho_b: 0.6,
        duration_s: 5.0,
        warmup_s: 1.0,
        seed: 9,
        ..Default::default()
    };
    let a = csv_bytes(&cfg)?;
    let b = csv_bytes(&cfg)?;
    ensure(a == b, &mut log, "re-run CSV differs");
    let grid: Vec<ScenarioConfig> = [RemoteNodeMode::RPhy, RemoteNodeMode::RFft]
        .into_iter()
        .map(|mode| ScenarioConfig { mode, ..cfg.clone() })
        .collect();
    let rows = |rs: Vec<ScenarioResult>| -> Vec<u8> {
        let mut out = Vec::new();
        write_csv(&rs.iter().map(SweepRow::from).collect::<Vec<_>>(), &mut out).unwrap();
        out
    };
    let parallel = rows(scenario_sweep(&grid).map_err(|e| e.to_string())?);
    let serial = rows(grid.iter().map(|c| run_scenario(c).unwrap()).collect());
    ensure(parallel == serial, &mut log, "sweep CSV depends on parallelism");
    finish(log, format!("{} CSV bytes identical across re-runs; sweep independent of parallelism", a.len()))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

/// Runs without the test harness so the criterion lines are never captured.
fn main() {
    let criteria: [Criterion; 9] = [
        (1, "analytical split rates", analytical_splits),
        (2, "LTE FFT-split table", lte_table),
        (3, "DOCSIS and split comparison tables", docsis_and_comparison_tables),
        (4, "caching overheads", caching_overheads),
        (5, "cache memory", cache_memory_check),
        (6, "non-preemptive EDF", scheduler),
        (7, "traffic statistics", traffic),
        (8, "desk-scale simulation", simulation),
        (9, "determinism", determinism),
    ];
    // RFFT_CRITERIA=7,8 runs a subset.
    let only: Option<Vec<u32>> = std::env::var("RFFT_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = std::time::Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match &outcome {
            Ok(s) => println!("PASS criterion {n} ({name}): {s} [{secs:.1} s]"),
            Err(s) => println!("FAIL criterion {n} ({name}): {} [{secs:.1} s]", s.trim_end_matches("; ")),
        }
        match (outcome.is_ok(), KNOWN_FAILURES.contains(&n)) {
            (false, false) => unexpected.push(format!("criterion {n} failed")),
            (true, true) => println!("      note: criterion {n} is listed as a known failure but passed"),
            _ => {}
        }
    }
    assert!(unexpected.is_empty(), "{unexpected:?}");
}
