//! Single-scenario execution and its output files.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use hopwheel::{
    csv::write_trajectory, diagnostics, jump_metrics, run_scenario, AnalysisError,
    DiagnosticsReport64, EventKind, JumpMetrics64, SegmentKind, SimError64, SimState64,
    Termination, TrajectoryRecord64,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::ScenarioConfig;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError64),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            RunError::Sim(SimError64::Divergence { .. } | SimError64::RunawayChatter(_))
                | RunError::Analysis(_)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventSummary {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsFile {
    pub termination: Termination,
    pub events: Vec<EventSummary>,
    pub jumps: Vec<JumpMetrics64>,
}

pub struct RunOutcome {
    pub record: TrajectoryRecord64,
    pub metrics: MetricsFile,
    pub diagnostics: DiagnosticsReport64,
    /// `(t, |dphi|)` at the end of the first ramp segment, if it was reached.
    pub ramp_end_speed: Option<(f64, f64)>,
}

impl RunOutcome {
    /// Number of flights that started with an upward takeoff.
    pub fn jump_count(&self) -> usize {
        self.metrics.jumps.iter().filter(|j| j.jump_classified).count()
    }

    pub fn summary_line(&self) -> String {
        let mut line = format!("jumps={}", self.jump_count());
        match self.metrics.jumps.iter().find(|j| j.jump_classified) {
            Some(j) => line.push_str(&format!(
                " takeoff_t={:.4} apex_bl={:.3} span_bl={:.3}",
                j.takeoff_time, j.apex_height_bl, j.horizontal_span_bl
            )),
            None => line.push_str(" apex_bl=0.000 span_bl=0.000"),
        }
        if let Some((t, w)) = self.ramp_end_speed {
            line.push_str(&format!(" wheel_speed={w:.3}@{t:.3}s"));
        }
        let end = match self.metrics.termination {
            Termination::FirstLanding => "first_landing",
            Termination::Horizon => "horizon",
        };
        line.push_str(&format!(" end={end}"));
        line
    }
}

/// Simulates `cfg` from rest and computes metrics and diagnostics.
pub fn execute(cfg: &ScenarioConfig) -> Result<RunOutcome, RunError> {
    let record = run_scenario(
        &cfg.robot,
        &cfg.sim,
        &cfg.profile,
        &cfg.controller,
        &SimState64::at_rest(),
    )?;
    let jumps = jump_metrics(&record, &cfg.robot)?;
    let diagnostics = diagnostics(&record, &cfg.robot, cfg.robot.mu)?;
    let ramp_end_speed = cfg
        .profile
        .segments
        .iter()
        .find(|s| s.kind == SegmentKind::Ramp)
        .and_then(|s| s.t_end)
        .and_then(|t| {
            let last = record.rows.last()?;
            if last.t() < t {
                return None;
            }
            let i = record.rows.partition_point(|r| r.t() < t);
            let row = record.rows[i];
            Some((row.t(), row.state.dphi.abs()))
        });
    let metrics = MetricsFile {
        termination: record.termination,
        events: record
            .events
            .iter()
            .map(|e| EventSummary { t: e.t, kind: e.kind })
            .collect(),
        jumps,
    };
    Ok(RunOutcome {
        record,
        metrics,
        diagnostics,
        ramp_end_speed,
    })
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    f(&mut out).and_then(|_| out.flush()).map_err(io_err)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    write_with(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

/// Writes the files enabled in `cfg.output`; returns the paths written.
pub fn write_outputs(cfg: &ScenarioConfig, outcome: &RunOutcome) -> Result<Vec<PathBuf>, RunError> {
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    if cfg.output.trajectory_csv {
        let path = dir.join("trajectory.csv");
        write_with(&path, |out| write_trajectory(out, &outcome.record))?;
        written.push(path);
    }
    if cfg.output.metrics_json {
        let path = dir.join("metrics.json");
        write_json(&path, &outcome.metrics)?;
        written.push(path);
    }
    if cfg.output.diagnostics_json {
        let path = dir.join("diagnostics.json");
        write_json(&path, &outcome.diagnostics)?;
        written.push(path);
    }
    Ok(written)
}
