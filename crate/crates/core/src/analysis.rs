//! Jump metrics and physics diagnostics over recorded trajectories.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::solve3;
use crate::model::{
    angular_momentum_about_com, com_acceleration, com_kinematics, flight_dynamics, Phase,
    RobotParams,
};
use crate::sim::{EventKind, Row, TrajectoryRecord};
use crate::{ModelError, Scalar};

/// Summary of one flight segment. Heights and spans refer to the hoop
/// centre; `_bl` values are in hoop diameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpMetrics<T> {
    pub takeoff_time: T,
    /// Landing instant, or the last recorded time if the run hit its horizon.
    pub landing_time: T,
    pub apex_height_m: T,
    pub apex_height_bl: T,
    pub horizontal_span_m: T,
    pub horizontal_span_bl: T,
    /// Centre-of-mass velocity `[dx, dy]` at takeoff (m/s).
    pub com_launch_velocity: [T; 2],
    /// Closed-form apex of the ballistic centre of mass (m).
    pub com_apex_height_m: T,
    /// True when the segment began with an upward takeoff rather than a
    /// non-jump detachment.
    pub jump_classified: bool,
    pub landed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlipInterval<T> {
    pub t_start: T,
    pub t_end: T,
    /// Largest `|lambda1| / lambda2` over the interval.
    pub max_ratio: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport<T> {
    /// `max |E(t) - E(0) - W(t)|` with `W` the actuator work (J).
    pub max_energy_residual: T,
    /// The above divided by the recorded duration (J/s).
    pub energy_residual_rate: T,
    /// `max(|x - R phi|, |y|)` over rolling samples (m).
    pub max_rolling_constraint_residual: T,
    pub slip_intervals: Vec<SlipInterval<T>>,
    /// Largest deviation of the COM from a fitted line (x) and parabola (y)
    /// over each flight segment (m).
    pub flight_parabola_residual: T,
    /// `max(|ddx_com|, |ddy_com + g|)` over flight samples.
    pub flight_com_accel_residual: T,
    /// `max |L(t) - L(t0)| / |L(t0)|` over flight, about the COM. Absolute
    /// when `L(t0)` vanishes.
    pub flight_angular_momentum_drift: T,
    /// `max | |hoop centre - COM| - (m_p/m) l_p |` over all samples (m).
    pub max_com_offset_error: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("flight segment starting at t = {t} has only {samples} sample(s)")]
    DegenerateSegment { t: f64, samples: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Vertex of the parabola through three samples, if it opens downward.
fn parabola_peak<T: Scalar>(p: [(T, T); 3]) -> Option<T> {
    let [(t0, y0), (t1, y1), (t2, y2)] = p;
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let a = (d12 - d01) / (t2 - t0);
    if !(a < T::zero()) {
        return None;
    }
    let b = d01 - a * (t0 + t1);
    let tv = -b / (T::lit(2.0) * a);
    if tv < t0 || tv > t2 {
        return None;
    }
    Some(y0 + (tv - t0) * (d01 + a * (tv - t1)))
}

pub fn jump_metrics<T: Scalar>(
    record: &TrajectoryRecord<T>,
    params: &RobotParams<T>,
) -> Result<Vec<JumpMetrics<T>>, AnalysisError> {
    let bl = params.body_length();
    record
        .flight_segments()
        .into_iter()
        .map(|range| {
            let rows = &record.rows[range];
            let first = rows[0];
            if rows.len() < 2 {
                return Err(AnalysisError::DegenerateSegment {
                    t: first.t().to_f64_lossy(),
                    samples: rows.len(),
                });
            }
            let last = rows[rows.len() - 1];

            let (imax, top) = rows
                .iter()
                .enumerate()
                .fold((0, rows[0].state.y), |acc, (i, r)| {
                    if r.state.y > acc.1 {
                        (i, r.state.y)
                    } else {
                        acc
                    }
                });
            let mut apex = top;
            if imax > 0 && imax + 1 < rows.len() {
                let pt = |r: &Row<T>| (r.t(), r.state.y);
                if let Some(v) = parabola_peak([pt(&rows[imax - 1]), pt(&rows[imax]), pt(&rows[imax + 1])]) {
                    apex = apex.max(v);
                }
            }

            let com = com_kinematics(params, &first.state);
            let rise = com.dy.max(T::zero());
            let com_apex = com.y + rise * rise / (T::lit(2.0) * params.g);
            let span = last.state.x - first.state.x;
            let jump_classified = record
                .events
                .iter()
                .any(|e| e.t == first.t() && e.kind == EventKind::Takeoff);

            Ok(JumpMetrics {
                takeoff_time: first.t(),
                landing_time: last.t(),
                apex_height_m: apex,
                apex_height_bl: apex / bl,
                horizontal_span_m: span,
                horizontal_span_bl: span / bl,
                com_launch_velocity: [com.dx, com.dy],
                com_apex_height_m: com_apex,
                jump_classified,
                landed: last.phase() == Phase::Landed,
            })
        })
        .collect()
}

/// Least-squares fit of `v(t)` by a polynomial of degree 1 or 2; returns the
/// largest absolute residual.
fn poly_fit_residual<T: Scalar>(samples: &[(T, T)], degree: usize) -> T {
    if samples.len() <= degree + 1 {
        return T::zero();
    }
    let (t_lo, t_hi) = (samples[0].0, samples[samples.len() - 1].0);
    let mid = (t_lo + t_hi) / T::lit(2.0);
    let half = ((t_hi - t_lo) / T::lit(2.0)).max(T::min_positive_value());
    let basis = |t: T| {
        let s = (t - mid) / half;
        [T::one(), s, if degree == 2 { s * s } else { T::zero() }]
    };
    let mut ata = [[T::zero(); 3]; 3];
    let mut atb = [T::zero(); 3];
    for &(t, v) in samples {
        let b = basis(t);
        for i in 0..3 {
            atb[i] = atb[i] + b[i] * v;
            for j in 0..3 {
                ata[i][j] = ata[i][j] + b[i] * b[j];
            }
        }
    }
    if degree == 1 {
        ata[2][2] = T::one();
    }
    let Some(c) = solve3(ata, atb, T::zero()) else {
        return T::infinity();
    };
    samples
        .iter()
        .map(|&(t, v)| {
            let b = basis(t);
            (v - (c[0] * b[0] + c[1] * b[1] + c[2] * b[2])).abs()
        })
        .fold(T::zero(), T::max)
}

pub fn diagnostics<T: Scalar>(
    record: &TrajectoryRecord<T>,
    params: &RobotParams<T>,
    mu: T,
) -> Result<DiagnosticsReport<T>, AnalysisError> {
    let zero = T::zero();
    let rows = &record.rows;
    let mut report = DiagnosticsReport {
        max_energy_residual: zero,
        energy_residual_rate: zero,
        max_rolling_constraint_residual: zero,
        slip_intervals: Vec::new(),
        flight_parabola_residual: zero,
        flight_com_accel_residual: zero,
        flight_angular_momentum_drift: zero,
        max_com_offset_error: zero,
    };
    let Some(first) = rows.first() else {
        return Ok(report);
    };

    let e0 = first.energy();
    let w0 = first.work;
    let offset = params.com_offset();
    let mut open: Option<SlipInterval<T>> = None;
    for r in rows {
        let s = &r.state;
        let resid = (r.energy() - e0 - (r.work - w0)).abs();
        report.max_energy_residual = report.max_energy_residual.max(resid);

        let dist = (s.x - r.x_com).hypot(s.y - r.y_com);
        report.max_com_offset_error = report.max_com_offset_error.max((dist - offset).abs());

        let slipping = s.phase == Phase::Rolling && r.forces.lambda1.abs() > mu * r.forces.lambda2;
        if s.phase == Phase::Rolling {
            let c = (s.x - params.radius * s.phi).abs().max(s.y.abs());
            report.max_rolling_constraint_residual = report.max_rolling_constraint_residual.max(c);
        }
        if slipping {
            let ratio = r.forces.lambda1.abs() / r.forces.lambda2;
            let ratio = if ratio.is_nan() || ratio < zero { T::infinity() } else { ratio };
            let iv = open.get_or_insert(SlipInterval {
                t_start: s.t,
                t_end: s.t,
                max_ratio: ratio,
            });
            iv.t_end = s.t;
            iv.max_ratio = iv.max_ratio.max(ratio);
        } else if let Some(iv) = open.take() {
            report.slip_intervals.push(iv);
        }

        if s.phase == Phase::Flight {
            let acc = flight_dynamics(params, s, r.tau)?;
            let (ax, ay) = com_acceleration(params, s, &acc);
            let a = ax.abs().max((ay + params.g).abs());
            report.flight_com_accel_residual = report.flight_com_accel_residual.max(a);
        }
    }
    report.slip_intervals.extend(open);

    let duration = rows[rows.len() - 1].t() - first.t();
    if duration > zero {
        report.energy_residual_rate = report.max_energy_residual / duration;
    }

    for range in record.flight_segments() {
        let seg = &rows[range];
        let xs: Vec<_> = seg.iter().map(|r| (r.t(), r.x_com)).collect();
        let ys: Vec<_> = seg.iter().map(|r| (r.t(), r.y_com)).collect();
        let fit = poly_fit_residual(&xs, 1).max(poly_fit_residual(&ys, 2));
        report.flight_parabola_residual = report.flight_parabola_residual.max(fit);

        let l0 = angular_momentum_about_com(params, &seg[0].state);
        let scale = if l0.abs() > T::lit(1e-12) { l0.abs() } else { T::one() };
        for r in seg {
            let d = (angular_momentum_about_com(params, &r.state) - l0).abs() / scale;
            report.flight_angular_momentum_drift = report.flight_angular_momentum_drift.max(d);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintForces, SimState};
    use crate::sim::{Event, Termination};

    fn params() -> RobotParams<f64> {
        RobotParams::default()
    }

    /// Pure projectile with the pendulum locked straight down, sampled at `dt`
    /// until the hoop centre returns to `y = 0`.
    fn ballistic(p: &RobotParams<f64>, vx: f64, vy: f64, dt: f64) -> TrajectoryRecord<f64> {
        let t_land = 2.0 * vy / p.g;
        let n = (t_land / dt).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        if *times.last().unwrap() < t_land {
            times.push(t_land);
        }
        let rows = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let phase = if i + 1 == times.len() { Phase::Landed } else { Phase::Flight };
                let s = SimState {
                    t,
                    x: vx * t,
                    y: (vy * t - 0.5 * p.g * t * t).max(0.0),
                    dx: vx,
                    dy: vy - p.g * t,
                    phase,
                    ..SimState::at_rest()
                };
                Row::new(p, &s, 0.0, ConstraintForces::default(), 0.0)
            })
            .collect::<Vec<_>>();
        let takeoff = rows[0].state;
        let land = rows[rows.len() - 1].state;
        TrajectoryRecord {
            rows,
            events: vec![
                Event { t: 0.0, kind: EventKind::Takeoff, state: takeoff },
                Event { t: t_land, kind: EventKind::Landing, state: land },
            ],
            termination: Termination::FirstLanding,
        }
    }

    #[test]
    fn no_flight_no_metrics() {
        let p = params();
        let rec = TrajectoryRecord {
            rows: vec![Row::new(&p, &SimState::at_rest(), 0.0, ConstraintForces::default(), 0.0)],
            events: vec![],
            termination: Termination::Horizon,
        };
        assert!(jump_metrics(&rec, &p).unwrap().is_empty());
    }

    #[test]
    fn projectile_matches_closed_form() {
        let p = params();
        let (vx, vy) = (0.8, 1.3);
        let rec = ballistic(&p, vx, vy, 1e-3);
        let m = jump_metrics(&rec, &p).unwrap();
        assert_eq!(m.len(), 1);
        let m = m[0];
        let apex = vy * vy / (2.0 * p.g);
        let range = vx * 2.0 * vy / p.g;
        assert!((m.apex_height_m - apex).abs() < 1e-6, "{} vs {apex}", m.apex_height_m);
        assert!((m.horizontal_span_m - range).abs() < 1e-6);
        assert!((m.apex_height_bl - apex / 0.152).abs() < 1e-5);
        assert!((m.landing_time - 2.0 * vy / p.g).abs() < 1e-12);
        assert!((m.com_launch_velocity[0] - vx).abs() < 1e-15);
        assert!((m.com_apex_height_m - (apex - p.com_offset())).abs() < 1e-12);
        assert!(m.jump_classified && m.landed);
    }

    #[test]
    fn time_reversed_flight_swaps_roles() {
        let p = params();
        let rec = ballistic(&p, 0.5, 1.0, 1e-3);
        let t_end = rec.rows.last().unwrap().t();
        let x_end = rec.rows.last().unwrap().state.x;
        let mut rev_rows: Vec<Row<f64>> = rec
            .rows
            .iter()
            .rev()
            .map(|r| {
                let s = SimState {
                    t: t_end - r.t(),
                    dx: -r.state.dx,
                    dy: -r.state.dy,
                    phase: Phase::Flight,
                    ..r.state
                };
                Row::new(&p, &s, 0.0, ConstraintForces::default(), 0.0)
            })
            .collect();
        let n = rev_rows.len();
        rev_rows[n - 1].state.phase = Phase::Landed;
        let rev = TrajectoryRecord {
            events: vec![Event { t: 0.0, kind: EventKind::Takeoff, state: rev_rows[0].state }],
            rows: rev_rows,
            termination: Termination::FirstLanding,
        };
        let fwd = jump_metrics(&rec, &p).unwrap()[0];
        let bwd = jump_metrics(&rev, &p).unwrap()[0];
        assert!((fwd.apex_height_m - bwd.apex_height_m).abs() < 1e-9);
        assert!((fwd.horizontal_span_m + bwd.horizontal_span_m).abs() < 1e-12);
        // launching backwards is the mirror of the forward landing velocity
        let landing_v = rec.rows.last().unwrap().state;
        assert!((bwd.com_launch_velocity[0] + landing_v.dx).abs() < 1e-12);
        assert!((bwd.com_launch_velocity[1] + landing_v.dy).abs() < 1e-12);
        assert!(x_end > 0.0);
    }

    #[test]
    fn body_length_metrics_are_scale_free() {
        let p = params();
        let k = 3.0;
        let big = RobotParams { radius: p.radius * k, l_p: p.l_p * k, ..p };
        let small = jump_metrics(&ballistic(&p, 0.5, 1.0, 1e-3), &p).unwrap()[0];
        // scaling lengths by k at fixed time scaling by sqrt(k) scales velocities by sqrt(k)
        let scaled = ballistic(&big, 0.5 * k.sqrt(), 1.0 * k.sqrt(), 1e-3 * k.sqrt());
        let large = jump_metrics(&scaled, &big).unwrap()[0];
        assert!((small.apex_height_bl - large.apex_height_bl).abs() < 1e-6);
        assert!((small.horizontal_span_bl - large.horizontal_span_bl).abs() < 1e-9);
    }

    #[test]
    fn single_sample_segment_is_degenerate() {
        let p = params();
        let s = SimState { phase: Phase::Landed, ..SimState::at_rest() };
        let rec = TrajectoryRecord {
            rows: vec![Row::new(&p, &s, 0.0, ConstraintForces::default(), 0.0)],
            events: vec![],
            termination: Termination::FirstLanding,
        };
        assert!(matches!(
            jump_metrics(&rec, &p),
            Err(AnalysisError::DegenerateSegment { samples: 1, .. })
        ));
    }

    #[test]
    fn static_record_is_clean() {
        let p = params();
        let forces = ConstraintForces { lambda1: 0.0, lambda2: p.total_mass() * p.g };
        let rows = (0..10)
            .map(|i| {
                let s = SimState { t: i as f64 * 0.1, ..SimState::at_rest() };
                Row::new(&p, &s, 0.0, forces, 0.0)
            })
            .collect();
        let rec = TrajectoryRecord { rows, events: vec![], termination: Termination::Horizon };
        let d = diagnostics(&rec, &p, 0.8).unwrap();
        assert_eq!(d.max_energy_residual, 0.0);
        assert_eq!(d.max_rolling_constraint_residual, 0.0);
        assert_eq!(d.flight_parabola_residual, 0.0);
        assert!(d.slip_intervals.is_empty());
        assert!(d.max_com_offset_error < 1e-17);
    }

    #[test]
    fn zero_friction_flags_every_loaded_sample() {
        let p = params();
        let rows = (0..6)
            .map(|i| {
                let s = SimState { t: i as f64, ..SimState::at_rest() };
                let lambda1 = if (2..4).contains(&i) { 0.3 } else { 0.0 };
                Row::new(&p, &s, 0.0, ConstraintForces { lambda1, lambda2: 5.0 }, 0.0)
            })
            .collect();
        let rec = TrajectoryRecord { rows, events: vec![], termination: Termination::Horizon };
        let d = diagnostics(&rec, &p, 0.0).unwrap();
        assert_eq!(d.slip_intervals.len(), 1);
        let iv = d.slip_intervals[0];
        assert_eq!((iv.t_start, iv.t_end), (2.0, 3.0));
        assert!((iv.max_ratio - 0.06).abs() < 1e-15);
        assert!(diagnostics(&rec, &p, 0.8).unwrap().slip_intervals.is_empty());
    }

    #[test]
    fn ballistic_fit_is_exact() {
        let p = params();
        let rec = ballistic(&p, 0.3, 0.9, 1e-3);
        let d = diagnostics(&rec, &p, 0.8).unwrap();
        assert!(d.flight_parabola_residual < 1e-12);
        assert!(d.flight_com_accel_residual < 1e-12);
        assert_eq!(d.flight_angular_momentum_drift, 0.0);
    }

    #[test]
    fn parabola_peak_three_points() {
        let f = |t: f64| 2.0 - (t - 0.37).powi(2);
        let v = parabola_peak([(0.0, f(0.0)), (0.3, f(0.3)), (1.0, f(1.0))]).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        assert!(parabola_peak([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).is_none());
    }
}
