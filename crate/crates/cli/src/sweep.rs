//! Cartesian parameter sweeps over dotted config keys.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;

use crate::config::{apply_override, resolve, ConfigError};
use crate::run::execute;

/// One swept key and its values, in the order given.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

/// Sweep spec file: `{"axes": [{"key": "controller.kp", "values": [0.02, 0.03]}]}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Schema(format!("sweep spec: {e}")))
    }

    /// Parses `KEY=v1,v2,...`; each value is read as JSON, else as a string.
    pub fn parse_axis(arg: &str) -> Result<Axis, ConfigError> {
        let (key, list) = crate::config::split_override(arg)?;
        let values = list
            .split(',')
            .filter(|v| !v.is_empty())
            .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
            .collect();
        Ok(Axis {
            key: key.to_string(),
            values,
        })
    }

    pub fn cell_count(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|a| a.values.len()).product()
        }
    }

    /// Values of cell `index`; the last axis varies fastest.
    pub fn cell(&self, mut index: usize) -> Vec<&Value> {
        let mut out = vec![&Value::Null; self.axes.len()];
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            let n = axis.values.len();
            *slot = &axis.values[index % n];
            index /= n;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub jumps: usize,
    pub takeoff_time: Option<f64>,
    pub apex_height_m: Option<f64>,
    pub apex_height_bl: Option<f64>,
    pub horizontal_span_m: Option<f64>,
    pub horizontal_span_bl: Option<f64>,
    pub landing_time: Option<f64>,
    pub max_energy_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub index: usize,
    pub values: Vec<Value>,
    pub outcome: Result<CellMetrics, String>,
}

fn run_cell(base: &Value, spec: &SweepSpec, index: usize) -> CellResult {
    let values: Vec<Value> = spec.cell(index).into_iter().cloned().collect();
    let outcome = (|| {
        let mut doc = base.clone();
        for (axis, v) in spec.axes.iter().zip(&values) {
            apply_override(&mut doc, &axis.key, &v.to_string()).map_err(|e| e.to_string())?;
        }
        let cfg = resolve(doc).map_err(|e| e.to_string())?;
        let out = execute(&cfg).map_err(|e| e.to_string())?;
        let first = out.metrics.jumps.iter().find(|j| j.jump_classified);
        Ok(CellMetrics {
            jumps: out.jump_count(),
            takeoff_time: first.map(|j| j.takeoff_time),
            apex_height_m: first.map(|j| j.apex_height_m),
            apex_height_bl: first.map(|j| j.apex_height_bl),
            horizontal_span_m: first.map(|j| j.horizontal_span_m),
            horizontal_span_bl: first.map(|j| j.horizontal_span_bl),
            landing_time: first.filter(|j| j.landed).map(|j| j.landing_time),
            max_energy_residual: out.diagnostics.max_energy_residual,
        })
    })();
    CellResult {
        index,
        values,
        outcome,
    }
}

/// Runs every cell in parallel; results come back in cell order.
pub fn run_sweep(base: &Value, spec: &SweepSpec) -> Vec<CellResult> {
    (0..spec.cell_count())
        .into_par_iter()
        .map(|i| run_cell(base, spec, i))
        .collect()
}

pub const METRIC_COLUMNS: [&str; 10] = [
    "status",
    "error",
    "jumps",
    "takeoff_time",
    "apex_height_m",
    "apex_height_bl",
    "horizontal_span_m",
    "horizontal_span_bl",
    "landing_time",
    "max_energy_residual",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Combined CSV: `cell`, one column per axis key, then [`METRIC_COLUMNS`].
pub fn write_csv<W: Write>(out: W, spec: &SweepSpec, results: &[CellResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cell".to_string()];
    header.extend(spec.axes.iter().map(|a| a.key.clone()));
    header.extend(METRIC_COLUMNS.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for r in results {
        let mut rec = vec![r.index.to_string()];
        rec.extend(r.values.iter().map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }));
        match &r.outcome {
            Ok(m) => rec.extend([
                "ok".to_string(),
                String::new(),
                m.jumps.to_string(),
                opt(m.takeoff_time),
                opt(m.apex_height_m),
                opt(m.apex_height_bl),
                opt(m.horizontal_span_m),
                opt(m.horizontal_span_bl),
                opt(m.landing_time),
                format!("{:.16e}", m.max_energy_residual),
            ]),
            Err(e) => {
                rec.extend(["failed".to_string(), e.clone()]);
                rec.extend(std::iter::repeat_n(String::new(), METRIC_COLUMNS.len() - 2));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
