//! Hybrid rolling/flight integration with event localization.
//!
//! Each phase is integrated with fixed-step classical RK4. Steps are split at
//! reference-profile breakpoints so that every RK4 stage sees one branch of
//! the schedule. Takeoff is the first sign change of the normal reaction,
//! landing the first downward crossing of the hoop centre through `y = 0`;
//! both are localized by bisection in time. The run stops at the first
//! landing since no impact model exists.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{control_torque, ControllerConfig, ReferenceProfile};
use crate::model::{
    com_kinematics, constraint_forces, dynamics, rolling_dynamics, total_energy, Accelerations,
    ConstraintForces, Phase, RobotParams, SimState,
};
use crate::{ModelError, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig<T> {
    /// Fixed integration step (s).
    pub dt: T,
    /// Horizon (s).
    pub t_end: T,
    /// Width of the final bisection bracket for events (s).
    pub event_time_tol: T,
    /// Allowed violation of the ground/rolling constraints (m).
    pub constraint_tol: T,
    pub max_events: usize,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-4),
            t_end: T::lit(8.0),
            event_time_tol: T::lit(1e-12),
            constraint_tol: T::lit(1e-6),
            max_events: 8,
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    /// Returns the name of the first invalid field.
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err("dt");
        }
        if !(self.t_end.is_finite() && self.t_end > T::zero()) {
            return Err("t_end");
        }
        if !(self.event_time_tol > T::zero() && self.event_time_tol < self.dt) {
            return Err("event_time_tol");
        }
        if !(self.constraint_tol.is_finite() && self.constraint_tol > T::zero()) {
            return Err("constraint_tol");
        }
        if self.max_events < 2 {
            return Err("max_events");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Contact released with the centre of mass moving up.
    Takeoff,
    /// Contact released without upward centre-of-mass velocity.
    NonJumpDetachment,
    Landing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<T> {
    pub t: T,
    pub kind: EventKind,
    pub state: SimState<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FirstLanding,
    Horizon,
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row<T> {
    pub state: SimState<T>,
    pub tau: T,
    pub forces: ConstraintForces<T>,
    pub x_com: T,
    pub y_com: T,
    pub e_kin: T,
    pub e_pot: T,
    /// `|lambda1| > mu * lambda2` while rolling.
    pub slip: bool,
    /// Actuator work `integral tau * psi_dot dt` since the start of the run.
    pub work: T,
}

impl<T: Scalar> Row<T> {
    /// Fills the derived columns (COM, energy, slip flag) for `state`.
    pub fn new(
        params: &RobotParams<T>,
        state: &SimState<T>,
        tau: T,
        forces: ConstraintForces<T>,
        work: T,
    ) -> Self {
        let com = com_kinematics(params, state);
        let energy = total_energy(params, state);
        let slip = state.phase == Phase::Rolling && forces.lambda1.abs() > params.mu * forces.lambda2;
        Self {
            state: *state,
            tau,
            forces,
            x_com: com.x,
            y_com: com.y,
            e_kin: energy.kinetic,
            e_pot: energy.potential,
            slip,
            work,
        }
    }

    #[inline]
    pub fn t(&self) -> T {
        self.state.t
    }

    #[inline]
    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn energy(&self) -> T {
        self.e_kin + self.e_pot
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub rows: Vec<Row<T>>,
    pub events: Vec<Event<T>>,
    pub termination: Termination,
}

impl<T: Scalar> TrajectoryRecord<T> {
    /// Row index ranges `[start, end)` of each flight segment. A segment
    /// includes the trailing `Landed` row when there is one.
    pub fn flight_segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.rows.len() {
            if self.rows[i].phase() == Phase::Rolling {
                i += 1;
                continue;
            }
            let start = i;
            while i < self.rows.len() && self.rows[i].phase() == Phase::Flight {
                i += 1;
            }
            if i < self.rows.len() && self.rows[i].phase() == Phase::Landed {
                i += 1;
            }
            out.push(start..i);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError<T: Scalar> {
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("state became non-finite after t = {}", .last_good.t)]
    Divergence { last_good: Box<SimState<T>> },
    #[error("more than {0} events in one run")]
    RunawayChatter(usize),
}

/// Classifies a contact release from the accelerations at `state`.
///
/// Returns `None` while the normal reaction is still positive.
pub fn detect_takeoff<T: Scalar>(
    params: &RobotParams<T>,
    state: &SimState<T>,
    acc: &Accelerations<T>,
) -> Option<EventKind> {
    if constraint_forces(params, state, acc).lambda2 > T::zero() {
        return None;
    }
    if com_kinematics(params, state).dy > T::zero() {
        Some(EventKind::Takeoff)
    } else {
        Some(EventKind::NonJumpDetachment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandingCheck {
    /// `y` went from positive to non-positive over the step.
    Crossing,
    /// The hoop never rose and has sunk below the constraint tolerance: it
    /// did not really leave the ground.
    Grazing,
}

/// Landing test across one flight step. `lifted` records whether `y` has been
/// positive at any earlier sample of this flight.
pub fn detect_landing<T: Scalar>(
    prev: &SimState<T>,
    next: &SimState<T>,
    lifted: bool,
    constraint_tol: T,
) -> Option<LandingCheck> {
    if prev.y > T::zero() && next.y <= T::zero() {
        Some(LandingCheck::Crossing)
    } else if !lifted && next.y <= T::zero() && next.y < -constraint_tol {
        Some(LandingCheck::Grazing)
    } else {
        None
    }
}

const N: usize = 9;
type Aug<T> = [T; N];

/// Bundles the immutable inputs of one run.
#[derive(Debug, Clone, Copy)]
pub struct Simulator<'a, T> {
    pub params: &'a RobotParams<T>,
    pub cfg: &'a SimConfig<T>,
    pub profile: &'a ReferenceProfile<T>,
    pub controller: &'a ControllerConfig<T>,
}

impl<'a, T: Scalar> Simulator<'a, T> {
    pub fn new(
        params: &'a RobotParams<T>,
        cfg: &'a SimConfig<T>,
        profile: &'a ReferenceProfile<T>,
        controller: &'a ControllerConfig<T>,
    ) -> Self {
        Self {
            params,
            cfg,
            profile,
            controller,
        }
    }

    fn validate(&self) -> Result<(), SimError<T>> {
        self.params.validate()?;
        self.cfg
            .validate()
            .map_err(|k| SimError::Invalid(format!("sim.{k}")))?;
        self.controller
            .validate()
            .map_err(|k| SimError::Invalid(format!("controller.{k}")))?;
        self.profile
            .validate()
            .map_err(|e| SimError::Invalid(format!("profile: {e}")))?;
        Ok(())
    }

    /// Motor torque at `state` (reference evaluated right-continuously).
    pub fn torque(&self, state: &SimState<T>) -> T {
        let r = self.profile.eval(state.t);
        control_torque(self.controller, r, state)
    }

    fn derivative(&self, seg: usize, t: T, z: &Aug<T>, phase: Phase) -> Result<Aug<T>, SimError<T>> {
        let state = unpack(t, z, phase);
        if !state.is_finite() {
            return Err(SimError::Divergence {
                last_good: Box::new(state),
            });
        }
        let tau = control_torque(self.controller, self.profile.eval_segment(seg, t), &state);
        let acc = dynamics(self.params, &state, tau)?;
        Ok([
            state.dphi,
            state.dtheta,
            state.dx,
            state.dy,
            acc.ddphi,
            acc.ddtheta,
            acc.ddx,
            acc.ddy,
            tau * state.psi_dot(),
        ])
    }

    fn rk4(&self, seg: usize, t: T, z: &Aug<T>, h: T, phase: Phase) -> Result<Aug<T>, SimError<T>> {
        let half = T::lit(0.5);
        let k1 = self.derivative(seg, t, z, phase)?;
        let k2 = self.derivative(seg, t + half * h, &axpy(z, half * h, &k1), phase)?;
        let k3 = self.derivative(seg, t + half * h, &axpy(z, half * h, &k2), phase)?;
        let k4 = self.derivative(seg, t + h, &axpy(z, h, &k3), phase)?;
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        let mut out = *z;
        for i in 0..N {
            out[i] = z[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
        Ok(out)
    }

    /// Integrates from `state` (with accumulated `work`) to time `target`,
    /// splitting at profile breakpoints.
    fn advance(&self, state: &SimState<T>, work: T, target: T) -> Result<(SimState<T>, T), SimError<T>> {
        let phase = state.phase;
        let mut z = pack(state, work);
        let mut t = state.t;
        while t < target {
            let seg = self.profile.segment_at(t);
            let end = match self.profile.next_breakpoint(t) {
                Some(b) if b < target => b,
                _ => target,
            };
            z = self.rk4(seg, t, &z, end - t, phase).map_err(|e| match e {
                SimError::Divergence { .. } => SimError::Divergence {
                    last_good: Box::new(*state),
                },
                other => other,
            })?;
            t = end;
        }
        let mut next = unpack(target, &z, phase);
        if phase == Phase::Rolling {
            next.y = T::zero();
            next.dy = T::zero();
        }
        if !next.is_finite() || !z[N - 1].is_finite() {
            return Err(SimError::Divergence {
                last_good: Box::new(*state),
            });
        }
        Ok((next, z[N - 1]))
    }

    /// Advances one fixed step `dt` in the current phase.
    pub fn step(&self, state: &SimState<T>) -> Result<SimState<T>, SimError<T>> {
        if state.phase == Phase::Landed {
            return Err(ModelError::NoDynamics(Phase::Landed).into());
        }
        Ok(self.advance(state, T::zero(), state.t + self.cfg.dt)?.0)
    }

    fn normal_reaction(&self, state: &SimState<T>) -> Result<(T, Accelerations<T>), SimError<T>> {
        let acc = rolling_dynamics(self.params, state, self.torque(state))?;
        Ok((constraint_forces(self.params, state, &acc).lambda2, acc))
    }

    fn row(&self, state: &SimState<T>, work: T) -> Result<Row<T>, SimError<T>> {
        let p = self.params;
        let tau = self.torque(state);
        let forces = if state.phase == Phase::Rolling {
            let acc = rolling_dynamics(p, state, tau)?;
            constraint_forces(p, state, &acc)
        } else {
            ConstraintForces::default()
        };
        Ok(Row::new(p, state, tau, forces, work))
    }

    fn check_initial(&self, s: &SimState<T>) -> Result<(), SimError<T>> {
        if !s.is_finite() {
            return Err(SimError::Invalid("initial state is not finite".into()));
        }
        match s.phase {
            Phase::Landed => Err(SimError::Invalid("initial phase cannot be Landed".into())),
            Phase::Rolling => {
                let tol = self.cfg.constraint_tol;
                if s.y.abs() > tol
                    || s.dy != T::zero()
                    || (s.x - self.params.radius * s.phi).abs() > tol
                    || (s.dx - self.params.radius * s.dphi).abs() > tol
                {
                    Err(SimError::Invalid(
                        "rolling initial state violates x = R phi, y = 0".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            Phase::Flight => Ok(()),
        }
    }

    /// Bisects `(lo, hi]` for the first time at which `pred` holds, starting
    /// from `from` (which sits at `lo`). Returns the state at the upper end.
    fn bisect(
        &self,
        from: &SimState<T>,
        work: T,
        hi: T,
        mut pred: impl FnMut(&Self, &SimState<T>) -> Result<bool, SimError<T>>,
    ) -> Result<(SimState<T>, T), SimError<T>> {
        let mut lo = from.t;
        let mut hi = hi;
        let two = T::lit(2.0);
        while hi - lo > self.cfg.event_time_tol {
            let mid = lo + (hi - lo) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            let (s, _) = self.advance(from, work, mid)?;
            if pred(self, &s)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.advance(from, work, hi)
    }

    /// Runs Rolling -> Flight -> Landed (or the horizon), recording every step.
    pub fn run(&self, initial: &SimState<T>) -> Result<TrajectoryRecord<T>, SimError<T>> {
        self.validate()?;
        self.check_initial(initial)?;

        let cfg = self.cfg;
        let mut rows = Vec::new();
        let mut events = Vec::new();
        let mut state = *initial;
        let mut work = T::zero();
        rows.push(self.row(&state, work)?);

        let push_event = |events: &mut Vec<Event<T>>, ev: Event<T>| {
            events.push(ev);
            if events.len() > cfg.max_events {
                Err(SimError::RunawayChatter(cfg.max_events))
            } else {
                Ok(())
            }
        };

        // contact may already be lost at the first sample
        if state.phase == Phase::Rolling {
            let (_, acc) = self.normal_reaction(&state)?;
            if let Some(kind) = detect_takeoff(self.params, &state, &acc) {
                state.phase = Phase::Flight;
                push_event(&mut events, Event { t: state.t, kind, state })?;
                rows[0] = self.row(&state, work)?;
            }
        }

        let mut origin = state.t;
        let mut k: u64 = 0;
        let mut flight_start = rows.len() - 1;
        let mut lifted = false;

        while state.t < cfg.t_end {
            k += 1;
            let target = (origin + T::from_u64(k).unwrap_or_else(T::max_value) * cfg.dt).min(cfg.t_end);
            let (next, next_work) = self.advance(&state, work, target)?;

            match state.phase {
                Phase::Rolling => {
                    let (lambda2, acc) = self.normal_reaction(&next)?;
                    if lambda2 > T::zero() {
                        state = next;
                        work = next_work;
                        rows.push(self.row(&state, work)?);
                        continue;
                    }
                    let (mut ev, ev_work) = self.bisect(&state, work, target, |sim, s| {
                        Ok(sim.normal_reaction(s)?.0 <= T::zero())
                    })?;
                    let ev_acc = if ev.t == next.t { acc } else { self.normal_reaction(&ev)?.1 };
                    let kind = detect_takeoff(self.params, &ev, &ev_acc)
                        .unwrap_or(EventKind::NonJumpDetachment);
                    ev.phase = Phase::Flight;
                    push_event(&mut events, Event { t: ev.t, kind, state: ev })?;
                    state = ev;
                    work = ev_work;
                    rows.push(self.row(&state, work)?);
                    origin = state.t;
                    k = 0;
                    flight_start = rows.len() - 1;
                    lifted = false;
                }
                Phase::Flight => {
                    match detect_landing(&state, &next, lifted, cfg.constraint_tol) {
                        None => {
                            lifted |= next.y > T::zero();
                            state = next;
                            work = next_work;
                            rows.push(self.row(&state, work)?);
                        }
                        Some(LandingCheck::Crossing) => {
                            let (mut ev, ev_work) =
                                self.bisect(&state, work, target, |_, s| Ok(s.y <= T::zero()))?;
                            ev.phase = Phase::Landed;
                            push_event(&mut events, Event { t: ev.t, kind: EventKind::Landing, state: ev })?;
                            rows.push(self.row(&ev, ev_work)?);
                            return Ok(TrajectoryRecord {
                                rows,
                                events,
                                termination: Termination::FirstLanding,
                            });
                        }
                        Some(LandingCheck::Grazing) => {
                            rows.truncate(flight_start + 1);
                            let last = rows[flight_start];
                            let mut ev = last.state;
                            ev.phase = Phase::Landed;
                            push_event(&mut events, Event { t: ev.t, kind: EventKind::Landing, state: ev })?;
                            rows[flight_start] = self.row(&ev, last.work)?;
                            return Ok(TrajectoryRecord {
                                rows,
                                events,
                                termination: Termination::FirstLanding,
                            });
                        }
                    }
                }
                Phase::Landed => unreachable!("runs stop at landing"),
            }
        }

        Ok(TrajectoryRecord {
            rows,
            events,
            termination: Termination::Horizon,
        })
    }
}

/// One RK4 step of `cfg.dt` from `state`.
pub fn step<T: Scalar>(
    params: &RobotParams<T>,
    cfg: &SimConfig<T>,
    profile: &ReferenceProfile<T>,
    controller: &ControllerConfig<T>,
    state: &SimState<T>,
) -> Result<SimState<T>, SimError<T>> {
    Simulator::new(params, cfg, profile, controller).step(state)
}

pub fn run_scenario<T: Scalar>(
    params: &RobotParams<T>,
    cfg: &SimConfig<T>,
    profile: &ReferenceProfile<T>,
    controller: &ControllerConfig<T>,
    initial: &SimState<T>,
) -> Result<TrajectoryRecord<T>, SimError<T>> {
    Simulator::new(params, cfg, profile, controller).run(initial)
}

fn pack<T: Scalar>(s: &SimState<T>, work: T) -> Aug<T> {
    [s.phi, s.theta, s.x, s.y, s.dphi, s.dtheta, s.dx, s.dy, work]
}

fn unpack<T: Scalar>(t: T, z: &Aug<T>, phase: Phase) -> SimState<T> {
    SimState {
        t,
        phi: z[0],
        theta: z[1],
        x: z[2],
        y: z[3],
        dphi: z[4],
        dtheta: z[5],
        dx: z[6],
        dy: z[7],
        phase,
    }
}

#[inline]
fn axpy<T: Scalar>(z: &Aug<T>, a: T, k: &Aug<T>) -> Aug<T> {
    let mut out = *z;
    for i in 0..N {
        out[i] = z[i] + a * k[i];
    }
    out
}
