//! Regression of the computed downstream rate tables against published
//! reference values, and the CSV row schemas shared by every front end.

use std::collections::BTreeMap;
use std::io::Write;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caching::{cache_memory, docsis_table_overhead, lte_table_overhead, LteGridParams};
use crate::fronthaul::{PacketRecord, ScenarioResult};
use crate::rates::{
    fft_split_total_rate, int, parse_rational, present, ratio, split_comparison_table, Bitrate, DocsisPhyProfile,
    IqMapping, LtePhyProfile, RateError, Rational, Rounding, SplitTableConfig, SplitTriple, TrafficLoad,
};

const REFERENCE: &str = include_str!("../data/reference_tables.toml");

/// Decimals shown for rates (Gbps) and savings (percent).
const RATE_DECIMALS: u32 = 3;
const SAVINGS_DECIMALS: u32 = 2;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("reference data: {0}")]
    Reference(String),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("no computed value for {table} {row} / {column}")]
    MissingCell { table: String, row: String, column: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    /// LTE FFT-split rates with and without caching per code rate.
    LteFftSplit,
    /// DOCSIS FFT-split rates with and without caching per code rate.
    DocsisFftSplit,
    /// LTE + DOCSIS totals for every split.
    SplitComparison,
}

impl TableId {
    pub const ALL: [TableId; 3] = [TableId::LteFftSplit, TableId::DocsisFftSplit, TableId::SplitComparison];

    pub fn as_str(self) -> &'static str {
        match self {
            TableId::LteFftSplit => "lte_fft_split",
            TableId::DocsisFftSplit => "docsis_fft_split",
            TableId::SplitComparison => "split_comparison",
        }
    }
}

impl std::fmt::Display for TableId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceFile {
    format_version: u32,
    cell: Vec<ReferenceCell>,
    memory: Vec<ReferenceMemory>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceMemory {
    pub component: String,
    pub bits: u64,
    pub flag: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceCell {
    pub table: TableId,
    pub row: String,
    pub column: String,
    pub value: String,
    /// Known inconsistency of the published value.
    pub flag: Option<String>,
}

/// Version of the embedded reference data.
pub fn reference_version() -> u32 {
    parse_reference().map(|r| r.format_version).unwrap_or(0)
}

fn parse_reference() -> Result<ReferenceFile, ReportError> {
    toml::from_str(REFERENCE).map_err(|e| ReportError::Reference(e.to_string()))
}

pub fn reference_cells() -> Result<Vec<ReferenceCell>, ReportError> {
    Ok(parse_reference()?.cell)
}

pub fn reference_memory() -> Result<Vec<ReferenceMemory>, ReportError> {
    Ok(parse_reference()?.memory)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Match,
    /// Deviates, but the published value is a documented inconsistency.
    Flagged,
    Mismatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellCheck {
    pub row: String,
    pub column: String,
    pub exact: Rational,
    /// `exact` rounded to the table's display precision.
    pub computed: Rational,
    pub reference: Rational,
    pub tolerance: Rational,
    pub status: CellStatus,
    pub flag: Option<String>,
}

impl CellCheck {
    pub fn delta(&self) -> Rational {
        self.computed - self.reference
    }

    pub fn decimals(&self) -> u32 {
        if self.column == "savings_pct" {
            SAVINGS_DECIMALS
        } else {
            RATE_DECIMALS
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableReport {
    pub table: TableId,
    pub cells: Vec<CellCheck>,
    /// Notes of the documented discrepancies that the computation reproduced.
    pub flags: Vec<String>,
}

impl TableReport {
    /// True when every deviating cell is a documented discrepancy.
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.status != CellStatus::Mismatch)
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &CellCheck> {
        self.cells.iter().filter(|c| c.status == CellStatus::Mismatch)
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&CellCheck> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }
}

type Computed = BTreeMap<(String, String), Rational>;

fn gbps(b: Bitrate) -> Rational {
    b.gbps()
}

fn fft_split_cells(
    loads: &[&str],
    qam_bits: u32,
    overhead: Rational,
    code_rates: &[&str],
) -> Result<Computed, ReportError> {
    let mut out = Computed::new();
    for &row in loads {
        let rho = parse_rational(row).expect("static load");
        let load = TrafficLoad::new(rho, Bitrate::from_gbps(1))?;
        let mut savings = None;
        for &cr in code_rates {
            let m = IqMapping::new(parse_rational(cr).expect("static code rate"), qam_bits, 10)?;
            let r = fft_split_total_rate(&load, &m, overhead);
            out.insert((row.into(), format!("cr={cr} uncached")), gbps(r.total()));
            out.insert((row.into(), format!("cr={cr} cached")), gbps(r.with_caching()));
            // Savings do not depend on the code rate; the first one is reported.
            savings.get_or_insert(r.savings_percent());
        }
        out.insert((row.into(), "savings_pct".into()), savings.expect("code rates nonempty"));
    }
    Ok(out)
}

fn split_comparison_cells(loads: &[&str]) -> Result<Computed, ReportError> {
    let rhos: Vec<Rational> = loads.iter().map(|l| parse_rational(l).expect("static load")).collect();
    let cfg = SplitTableConfig {
        lte_overhead: lte_table_overhead(),
        docsis_overhead: docsis_table_overhead(),
        // The published LTE baseband column scales the 2-decimal single-carrier rate.
        lte_baseband_base_decimals: Some(2),
        ..Default::default()
    };
    let rows = split_comparison_table(&LtePhyProfile::default(), &DocsisPhyProfile::default(), &rhos, &cfg)?;
    let mut out = Computed::new();
    let mut put = |row: &str, prefix: &str, t: &SplitTriple| {
        out.insert((row.into(), format!("{prefix} lte")), gbps(t.lte));
        out.insert((row.into(), format!("{prefix} docsis")), gbps(t.docsis));
        out.insert((row.into(), format!("{prefix} total")), gbps(t.total()));
    };
    for (row, r) in loads.iter().zip(&rows) {
        put(row, "cached", &r.fft_cached);
        put(row, "uncached", &r.fft_uncached);
    }
    if let Some(first) = rows.first() {
        put("any", "baseband", &first.baseband);
        put("any", "passband", &first.passband);
    }
    Ok(out)
}

fn computed_cells(table: TableId) -> Result<Computed, ReportError> {
    let loads = ["0.01", "0.1", "0.2", "1"];
    let code_rates = ["0.9", "0.7", "0.5"];
    match table {
        TableId::LteFftSplit => fft_split_cells(&loads, 6, lte_table_overhead(), &code_rates),
        TableId::DocsisFftSplit => fft_split_cells(&loads, 12, docsis_table_overhead(), &code_rates),
        TableId::SplitComparison => split_comparison_cells(&loads),
    }
}

fn check_table(table: TableId, reference: &[ReferenceCell]) -> Result<TableReport, ReportError> {
    let computed = computed_cells(table)?;
    let mut cells = Vec::new();
    let mut flags = Vec::new();
    for r in reference.iter().filter(|r| r.table == table) {
        let exact = *computed
            .get(&(r.row.clone(), r.column.clone()))
            .ok_or_else(|| ReportError::MissingCell {
                table: table.to_string(),
                row: r.row.clone(),
                column: r.column.clone(),
            })?;
        let reference_value = parse_rational(&r.value)
            .ok_or_else(|| ReportError::Reference(format!("bad value {:?} at {} {}", r.value, r.row, r.column)))?;
        let (decimals, tolerance) = if r.column == "savings_pct" {
            (SAVINGS_DECIMALS, ratio(1, 100))
        } else {
            (RATE_DECIMALS, ratio(1, 1000))
        };
        let shown = present(exact, decimals, Rounding::Nearest);
        let within = (shown - reference_value).abs() <= tolerance;
        let status = match (within, &r.flag) {
            (true, _) => CellStatus::Match,
            (false, Some(note)) => {
                flags.push(format!("{table} {} / {}: {note}", r.row, r.column));
                CellStatus::Flagged
            }
            (false, None) => CellStatus::Mismatch,
        };
        if within && r.flag.is_some() {
            log::warn!("{table} {} / {} is flagged but now matches its reference", r.row, r.column);
        }
        cells.push(CellCheck {
            row: r.row.clone(),
            column: r.column.clone(),
            exact,
            computed: shown,
            reference: reference_value,
            tolerance,
            status,
            flag: r.flag.clone(),
        });
    }
    Ok(TableReport { table, cells, flags })
}

/// Computes every reference cell and compares it with the published value.
pub fn reproduce_tables() -> Result<Vec<TableReport>, ReportError> {
    let reference = reference_cells()?;
    TableId::ALL.iter().map(|&t| check_table(t, &reference)).collect()
}

/// Cache memory of one component against its published value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MemoryCheck {
    pub component: String,
    pub computed_bits: u64,
    pub published_bits: u64,
    pub status: CellStatus,
    pub flag: Option<String>,
}

/// Default-grid cache memory at `bits_per_component`, compared exactly.
pub fn memory_checks(bits_per_component: u32) -> Result<Vec<MemoryCheck>, ReportError> {
    let m = cache_memory(&LteGridParams::lte_20mhz(), &DocsisPhyProfile::default(), bits_per_component)
        .map_err(|e| ReportError::Reference(e.to_string()))?;
    reference_memory()?
        .into_iter()
        .map(|r| {
            let computed = match r.component.as_str() {
                "RS" => m.rs_bits,
                "PBCH" => m.pbch_bits,
                "SCH" => m.sch_bits,
                "SIB" => m.sib_bits,
                "PILOTS" => m.docsis_pilot_bits,
                other => return Err(ReportError::Reference(format!("unknown memory component {other}"))),
            };
            let status = match (computed == r.bits, r.flag.is_some()) {
                (true, _) => CellStatus::Match,
                (false, true) => CellStatus::Flagged,
                (false, false) => CellStatus::Mismatch,
            };
            Ok(MemoryCheck {
                component: r.component,
                computed_bits: computed,
                published_bits: r.bits,
                status,
                flag: r.flag,
            })
        })
        .collect()
}

/// Decimal rendering of an exact value, rounded half away from zero.
pub fn decimal(value: Rational, decimals: u32) -> String {
    let scale = 10i128.pow(decimals);
    let scaled = present(value, decimals, Rounding::Nearest) * int(scale);
    let n = scaled.to_integer();
    let sign = if n < 0 { "-" } else { "" };
    let n = n.abs();
    if decimals == 0 {
        return format!("{sign}{n}");
    }
    format!("{sign}{}.{:0width$}", n / scale, n % scale, width = decimals as usize)
}

/// One line of the table regression CSV.
#[derive(Clone, Debug, Serialize)]
pub struct TableCsvRow {
    pub table: TableId,
    pub row: String,
    pub column: String,
    pub computed: String,
    pub reference: String,
    pub delta: String,
    pub status: CellStatus,
}

pub fn table_rows(reports: &[TableReport]) -> Vec<TableCsvRow> {
    reports
        .iter()
        .flat_map(|t| {
            t.cells.iter().map(move |c| {
                let d = c.decimals();
                TableCsvRow {
                    table: t.table,
                    row: c.row.clone(),
                    column: c.column.clone(),
                    computed: decimal(c.computed, d),
                    reference: decimal(c.reference, d),
                    delta: decimal(c.delta(), d),
                    status: c.status,
                }
            })
        })
        .collect()
}

/// One scenario of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: String,
    #[serde(rename = "rho_C")]
    pub rho_c: f64,
    #[serde(rename = "rho_B")]
    pub rho_b: f64,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub d_km: f64,
    pub seed: u64,
    pub docsis_mean_s: f64,
    pub lte_mean_s: f64,
    pub saturated: bool,
}

impl From<&ScenarioResult> for SweepRow {
    fn from(r: &ScenarioResult) -> Self {
        SweepRow {
            mode: r.mode.to_string(),
            rho_c: r.rho_c,
            rho_b: r.rho_b,
            hurst: r.hurst,
            d_km: r.distance_km,
            seed: r.seed,
            docsis_mean_s: r.docsis.mean_delay_s,
            lte_mean_s: r.lte.mean_delay_s,
            saturated: r.saturated,
        }
    }
}

/// Per-stream delay summary of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayRow {
    pub mode: String,
    #[serde(rename = "rho_C")]
    pub rho_c: f64,
    #[serde(rename = "rho_B")]
    pub rho_b: f64,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub d_km: f64,
    pub seed: u64,
    pub stream: String,
    pub mean_delay_s: f64,
    pub max_delay_s: f64,
    pub count: u64,
    pub warmup_excluded_s: f64,
    pub measurement_duration_s: f64,
    pub saturated: bool,
}

pub fn delay_rows(r: &ScenarioResult) -> Vec<DelayRow> {
    [&r.docsis, &r.lte]
        .into_iter()
        .map(|s| DelayRow {
            mode: r.mode.to_string(),
            rho_c: r.rho_c,
            rho_b: r.rho_b,
            hurst: r.hurst,
            d_km: r.distance_km,
            seed: r.seed,
            stream: s.stream.to_string(),
            mean_delay_s: s.mean_delay_s,
            max_delay_s: s.max_delay_s,
            count: s.count,
            warmup_excluded_s: s.warmup_excluded_s,
            measurement_duration_s: s.measurement_duration_s,
            saturated: r.saturated,
        })
        .collect()
}

/// Writes `rows` as CSV with a header line.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Streams per-packet records as CSV.
pub struct PacketCsv<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> PacketCsv<W> {
    pub fn new(writer: W) -> Self {
        PacketCsv {
            inner: csv::Writer::from_writer(writer),
        }
    }

    pub fn write(&mut self, p: &PacketRecord) -> Result<(), ReportError> {
        self.inner.serialize(p)?;
        Ok(())
    }

    /// Flushes and hands back the underlying writer.
    pub fn finish(self) -> Result<W, ReportError> {
        self.inner.into_inner().map_err(|e| ReportError::Io(e.into_error()))
    }
}
