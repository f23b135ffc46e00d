//! Physical model of the pendulum-driven wheel.
//!
//! Coordinates are `[phi, theta, x, y]`: hoop angle, pendulum angle (both in
//! the fixed frame, clockwise positive, zero with the pendulum hanging
//! straight down), and the hoop centre position with `y = 0` at ground
//! contact. The motor applies `+tau` to the pendulum and `-tau` to the hoop.
//!
//! The pendulum mass sits at `(x - l_p sin(theta), y - l_p cos(theta))`.

use serde::{Deserialize, Serialize};

use crate::linalg::{det3, solve2, solve3};
use crate::{ModelError, Scalar};

/// Physical constants of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotParams<T> {
    /// Hoop mass (kg).
    pub m_o: T,
    /// Pendulum point mass (kg).
    pub m_p: T,
    /// Hoop radius (m).
    #[serde(rename = "R")]
    pub radius: T,
    /// Radial distance of the pendulum mass from the hoop centre (m).
    pub l_p: T,
    /// Hoop moment of inertia about its geometric centre (kg m^2).
    #[serde(rename = "I_o")]
    pub i_o: T,
    pub g: T,
    /// Motor torque limit (N m).
    pub tau_max: T,
    /// Coulomb friction coefficient, used only to flag slip.
    pub mu: T,
    /// Motor velocity constant (rpm/V).
    pub kv: T,
}

impl<T: Scalar> Default for RobotParams<T> {
    /// 600 g robot with a 125 g pendulum at 51 mm inside a 152 mm hoop,
    /// thin-hoop inertia.
    fn default() -> Self {
        let m_o = T::lit(0.475);
        let radius = T::lit(0.076);
        Self {
            m_o,
            m_p: T::lit(0.125),
            radius,
            l_p: T::lit(0.051),
            i_o: m_o * radius * radius,
            g: T::lit(9.81),
            tau_max: T::lit(0.376),
            mu: T::lit(0.8),
            kv: T::lit(380.0),
        }
    }
}

impl<T: Scalar> RobotParams<T> {
    /// Total mass `m_o + m_p`.
    #[inline]
    pub fn total_mass(&self) -> T {
        self.m_o + self.m_p
    }

    /// Hoop diameter, the unit of "body lengths".
    #[inline]
    pub fn body_length(&self) -> T {
        self.radius + self.radius
    }

    /// Distance from hoop centre to the system centre of mass, `(m_p/m) l_p`.
    #[inline]
    pub fn com_offset(&self) -> T {
        self.m_p / self.total_mass() * self.l_p
    }

    /// Motor torque constant `60 / (2 pi kv)` in N m/A.
    pub fn torque_constant(&self) -> T {
        T::lit(60.0) / (T::lit(2.0) * T::PI() * self.kv)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("m_o", self.m_o),
            ("m_p", self.m_p),
            ("R", self.radius),
            ("l_p", self.l_p),
            ("I_o", self.i_o),
            ("g", self.g),
            ("tau_max", self.tau_max),
            ("kv", self.kv),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > T::zero()) {
                return Err(ModelError::InvalidParam {
                    name,
                    value: value.to_f64_lossy(),
                    reason: "must be finite and > 0",
                });
            }
        }
        if !(self.mu.is_finite() && self.mu >= T::zero()) {
            return Err(ModelError::InvalidParam {
                name: "mu",
                value: self.mu.to_f64_lossy(),
                reason: "must be finite and >= 0",
            });
        }
        if self.l_p >= self.radius {
            return Err(ModelError::InvalidParam {
                name: "l_p",
                value: self.l_p.to_f64_lossy(),
                reason: "pendulum must lie inside the hoop (l_p < R)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Rolling,
    Flight,
    Landed,
}

impl Phase {
    /// Integer code used in trajectory files.
    pub fn code(self) -> u8 {
        match self {
            Phase::Rolling => 0,
            Phase::Flight => 1,
            Phase::Landed => 2,
        }
    }
}

/// Generalized coordinates, their rates, time and active phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState<T> {
    pub t: T,
    pub phi: T,
    pub theta: T,
    pub x: T,
    pub y: T,
    pub dphi: T,
    pub dtheta: T,
    pub dx: T,
    pub dy: T,
    pub phase: Phase,
}

impl<T: Scalar> SimState<T> {
    /// At rest on the ground with the pendulum hanging down.
    pub fn at_rest() -> Self {
        let z = T::zero();
        Self {
            t: z,
            phi: z,
            theta: z,
            x: z,
            y: z,
            dphi: z,
            dtheta: z,
            dx: z,
            dy: z,
            phase: Phase::Rolling,
        }
    }

    /// Rolling state with `x = R phi`, `y = 0` and consistent rates.
    pub fn rolling(params: &RobotParams<T>, phi: T, theta: T, dphi: T, dtheta: T) -> Self {
        Self {
            phi,
            theta,
            x: params.radius * phi,
            dphi,
            dtheta,
            dx: params.radius * dphi,
            ..Self::at_rest()
        }
    }

    /// Relative pendulum rate `dtheta - dphi`, the quantity the motor tracks.
    #[inline]
    pub fn psi_dot(&self) -> T {
        self.dtheta - self.dphi
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t, self.phi, self.theta, self.x, self.y, self.dphi, self.dtheta, self.dx, self.dy,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// Mirror image about the vertical through the origin.
    pub fn mirrored(&self) -> Self {
        Self {
            phi: -self.phi,
            theta: -self.theta,
            x: -self.x,
            dphi: -self.dphi,
            dtheta: -self.dtheta,
            dx: -self.dx,
            ..*self
        }
    }
}

/// Friction (`lambda1`) and normal reaction (`lambda2`) during rolling.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConstraintForces<T> {
    pub lambda1: T,
    pub lambda2: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accelerations<T> {
    pub ddphi: T,
    pub ddtheta: T,
    pub ddx: T,
    pub ddy: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComKinematics<T> {
    pub x: T,
    pub y: T,
    pub dx: T,
    pub dy: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energy<T> {
    pub kinetic: T,
    pub potential: T,
}

impl<T: Scalar> Energy<T> {
    pub fn total(&self) -> T {
        self.kinetic + self.potential
    }
}

pub fn rolling_mass_matrix<T: Scalar>(p: &RobotParams<T>, theta: T) -> [[T; 2]; 2] {
    let m = p.total_mass();
    let off = -p.m_p * p.l_p * p.radius * theta.cos();
    [
        [p.i_o + m * p.radius * p.radius, off],
        [off, p.m_p * p.l_p * p.l_p],
    ]
}

/// Mass matrix of the `(theta, x, y)` block in flight.
pub fn flight_mass_matrix<T: Scalar>(p: &RobotParams<T>, theta: T) -> [[T; 3]; 3] {
    let m = p.total_mass();
    let a = p.m_p * p.l_p;
    let (s, c) = theta.sin_cos();
    let z = T::zero();
    [
        [a * p.l_p, -a * c, a * s],
        [-a * c, m, z],
        [a * s, z, m],
    ]
}

/// Rolling-phase accelerations with `x = R phi`, `y = 0` enforced.
pub fn rolling_dynamics<T: Scalar>(
    p: &RobotParams<T>,
    state: &SimState<T>,
    tau: T,
) -> Result<Accelerations<T>, ModelError> {
    let a = p.m_p * p.l_p;
    let (s, _) = state.theta.sin_cos();
    let mm = rolling_mass_matrix(p, state.theta);
    let rhs = [
        -tau - a * p.radius * state.dtheta * state.dtheta * s,
        tau - a * p.g * s,
    ];
    let tol = T::epsilon() * mm[0][0] * mm[1][1];
    let [ddphi, ddtheta] = solve2(mm, rhs, tol).ok_or_else(|| ModelError::Degenerate {
        phase: Phase::Rolling,
        det: (mm[0][0] * mm[1][1] - mm[0][1] * mm[1][0]).to_f64_lossy(),
        theta: state.theta.to_f64_lossy(),
    })?;
    Ok(Accelerations {
        ddphi,
        ddtheta,
        ddx: p.radius * ddphi,
        ddy: T::zero(),
    })
}

/// Friction and normal reaction required to keep the wheel rolling.
pub fn constraint_forces<T: Scalar>(
    p: &RobotParams<T>,
    state: &SimState<T>,
    acc: &Accelerations<T>,
) -> ConstraintForces<T> {
    let m = p.total_mass();
    let a = p.m_p * p.l_p;
    let (s, c) = state.theta.sin_cos();
    let w2 = state.dtheta * state.dtheta;
    ConstraintForces {
        lambda1: a * (-w2 * s + acc.ddtheta * c) - m * p.radius * acc.ddphi,
        lambda2: a * (w2 * c + acc.ddtheta * s) + m * p.g,
    }
}

/// Free-flight accelerations. The hoop spin decouples as `I_o phi'' = -tau`.
pub fn flight_dynamics<T: Scalar>(
    p: &RobotParams<T>,
    state: &SimState<T>,
    tau: T,
) -> Result<Accelerations<T>, ModelError> {
    let m = p.total_mass();
    let a = p.m_p * p.l_p;
    let (s, c) = state.theta.sin_cos();
    let w2 = state.dtheta * state.dtheta;
    let mm = flight_mass_matrix(p, state.theta);
    let rhs = [tau - a * p.g * s, -a * w2 * s, -a * w2 * c - m * p.g];
    let tol = T::epsilon() * mm[0][0] * m * m;
    let [ddtheta, ddx, ddy] = solve3(mm, rhs, tol).ok_or_else(|| ModelError::Degenerate {
        phase: Phase::Flight,
        det: det3(&mm).to_f64_lossy(),
        theta: state.theta.to_f64_lossy(),
    })?;
    Ok(Accelerations {
        ddphi: -tau / p.i_o,
        ddtheta,
        ddx,
        ddy,
    })
}

/// Dispatches on `state.phase`.
pub fn dynamics<T: Scalar>(
    p: &RobotParams<T>,
    state: &SimState<T>,
    tau: T,
) -> Result<Accelerations<T>, ModelError> {
    match state.phase {
        Phase::Rolling => rolling_dynamics(p, state, tau),
        Phase::Flight => flight_dynamics(p, state, tau),
        Phase::Landed => Err(ModelError::NoDynamics(Phase::Landed)),
    }
}

pub fn com_kinematics<T: Scalar>(p: &RobotParams<T>, state: &SimState<T>) -> ComKinematics<T> {
    let k = p.com_offset();
    let (s, c) = state.theta.sin_cos();
    ComKinematics {
        x: state.x - k * s,
        y: state.y - k * c,
        dx: state.dx - k * state.dtheta * c,
        dy: state.dy + k * state.dtheta * s,
    }
}

/// Centre-of-mass acceleration implied by `acc` at `state`.
pub fn com_acceleration<T: Scalar>(
    p: &RobotParams<T>,
    state: &SimState<T>,
    acc: &Accelerations<T>,
) -> (T, T) {
    let k = p.com_offset();
    let (s, c) = state.theta.sin_cos();
    let w2 = state.dtheta * state.dtheta;
    (
        acc.ddx - k * (acc.ddtheta * c - w2 * s),
        acc.ddy + k * (acc.ddtheta * s + w2 * c),
    )
}

pub fn total_energy<T: Scalar>(p: &RobotParams<T>, state: &SimState<T>) -> Energy<T> {
    let half = T::lit(0.5);
    let (s, c) = state.theta.sin_cos();
    let vpx = state.dx - p.l_p * state.dtheta * c;
    let vpy = state.dy + p.l_p * state.dtheta * s;
    let kinetic = half * p.m_o * (state.dx * state.dx + state.dy * state.dy)
        + half * p.i_o * state.dphi * state.dphi
        + half * p.m_p * (vpx * vpx + vpy * vpy);
    let potential = p.m_o * p.g * state.y + p.m_p * p.g * (state.y - p.l_p * c);
    Energy { kinetic, potential }
}

/// Angular momentum about the system centre of mass, clockwise positive
/// (the sense in which `phi` and `theta` increase).
pub fn angular_momentum_about_com<T: Scalar>(p: &RobotParams<T>, state: &SimState<T>) -> T {
    let com = com_kinematics(p, state);
    let (s, c) = state.theta.sin_cos();
    // (position, velocity) of each point mass relative to the COM
    let hoop = (
        (state.x - com.x, state.y - com.y),
        (state.dx - com.dx, state.dy - com.dy),
    );
    let bob = (
        (state.x - p.l_p * s - com.x, state.y - p.l_p * c - com.y),
        (
            state.dx - p.l_p * state.dtheta * c - com.dx,
            state.dy + p.l_p * state.dtheta * s - com.dy,
        ),
    );
    let ccw = |((rx, ry), (vx, vy)): ((T, T), (T, T))| rx * vy - ry * vx;
    p.i_o * state.dphi - p.m_o * ccw(hoop) - p.m_p * ccw(bob)
}

/// Quadrature-axis current for a torque through the static `K_t` map.
pub fn motor_current<T: Scalar>(p: &RobotParams<T>, tau: T) -> T {
    tau / p.torque_constant()
}
