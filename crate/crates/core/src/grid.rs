//! Scenario grids for sweeps.
//!
//! A grid file holds a `[base]` table of scenario keys and an `[axes]`
//! table. Each axis is a scenario key (dotted for nested sections) mapped
//! to a list of values or to a `{ start, stop, step }` range. Scenarios are
//! the Cartesian product of the axes in file order, last axis fastest.
//!
//! ```toml
//! [base]
//! duration_s = 60
//! [axes]
//! mode = ["rphy", "rfft"]
//! rho_b = { start = 0.1, stop = 0.9, step = 0.1 }
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::config::{ConfigError, ScenarioConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    base: Table,
    pub axes: Vec<Axis>,
}

fn parse_err(msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse(msg.into())
}

fn range_values(key: &str, t: &Table) -> Result<Vec<Value>, ConfigError> {
    for k in t.keys() {
        if !["start", "stop", "step"].contains(&k.as_str()) {
            return Err(parse_err(format!("axis `{key}`: unknown range field `{k}`")));
        }
    }
    let field = |name: &str| t.get(name).ok_or_else(|| parse_err(format!("axis `{key}`: range needs `{name}`")));
    let (start, stop, step) = (field("start")?, field("stop")?, field("step")?);
    if let (Some(a), Some(b), Some(s)) = (start.as_integer(), stop.as_integer(), step.as_integer()) {
        if s <= 0 || b < a {
            return Err(parse_err(format!("axis `{key}`: need step > 0 and stop >= start")));
        }
        return Ok((a..=b).step_by(s as usize).map(Value::Integer).collect());
    }
    let num = |v: &Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
    let (Some(a), Some(b), Some(s)) = (num(start), num(stop), num(step)) else {
        return Err(parse_err(format!("axis `{key}`: range bounds must be numbers")));
    };
    if !(s > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
        return Err(parse_err(format!("axis `{key}`: need step > 0 and stop >= start")));
    }
    // Tolerate the representation error of decimal steps at the upper end.
    let n = ((b - a) / s + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| {
            let v = a + i as f64 * s;
            Value::Float((v * 1e9).round() / 1e9)
        })
        .collect())
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut parts = key.split('.').peekable();
    let mut t = table;
    while let Some(p) = parts.next() {
        if parts.peek().is_none() {
            t.insert(p.to_string(), value);
            return Ok(());
        }
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| parse_err(format!("axis `{key}`: `{p}` is not a section")))?;
    }
    Err(parse_err("empty axis key"))
}

impl SweepGrid {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc: Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        let base = match doc.remove("base") {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(_) => return Err(parse_err("`base` must be a table")),
        };
        let axes_table = match doc.remove("axes") {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(_) => return Err(parse_err("`axes` must be a table")),
        };
        if let Some(k) = doc.keys().next() {
            return Err(parse_err(format!("unknown top-level key `{k}`: expected [base] or [axes]")));
        }
        let mut axes = Vec::new();
        for (key, v) in axes_table {
            let values = match v {
                Value::Array(a) => a,
                Value::Table(t) => range_values(&key, &t)?,
                other => vec![other],
            };
            if values.is_empty() {
                return Err(parse_err(format!("axis `{key}` has no values")));
            }
            axes.push(Axis { key, values });
        }
        let grid = SweepGrid { base, axes };
        // Surface bad keys and values before any run starts.
        grid.scenarios()?;
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every scenario of the grid, validated.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>, ConfigError> {
        let mut out = Vec::with_capacity(self.len());
        let mut index = vec![0usize; self.axes.len()];
        loop {
            let mut t = self.base.clone();
            for (axis, &i) in self.axes.iter().zip(&index) {
                set_path(&mut t, &axis.key, axis.values[i].clone())?;
            }
            let text = toml::to_string(&t).map_err(|e| parse_err(e.to_string()))?;
            out.push(ScenarioConfig::parse(&text)?);
            // Odometer increment, last axis fastest.
            let mut k = self.axes.len();
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                index[k] += 1;
                if index[k] < self.axes[k].values.len() {
                    break;
                }
                index[k] = 0;
            }
        }
    }
}

pub fn parse_grid(path: &Path) -> Result<SweepGrid, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SweepGrid::parse(&text)
}
