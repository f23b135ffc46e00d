//! Independent equations of motion built straight from the Lagrangian with
//! hyper-dual numbers (exact first and second derivatives).

#![allow(dead_code)]

use std::ops::{Add, Mul, Neg, Sub};

use hopwheel::RobotParams64;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, Default)]
pub struct HyperDual {
    re: f64,
    e1: f64,
    e2: f64,
    e12: f64,
}

impl HyperDual {
    fn c(v: f64) -> Self {
        Self { re: v, ..Default::default() }
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        Self {
            re: s,
            e1: c * self.e1,
            e2: c * self.e2,
            e12: c * self.e12 - s * self.e1 * self.e2,
        }
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        Self {
            re: c,
            e1: -s * self.e1,
            e2: -s * self.e2,
            e12: -s * self.e12 - c * self.e1 * self.e2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { re: self.re + o.re, e1: self.e1 + o.e1, e2: self.e2 + o.e2, e12: self.e12 + o.e12 }
    }
}
impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}
impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self { re: -self.re, e1: -self.e1, e2: -self.e2, e12: -self.e12 }
    }
}
impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }
}

/// `L = T - V` written from the point-mass velocities, q = [phi, theta, x, y].
fn lagrangian(p: &RobotParams64, q: [HyperDual; 4], qd: [HyperDual; 4]) -> HyperDual {
    let c = HyperDual::c;
    let half = c(0.5);
    let (mo, mp, lp, io, g) = (c(p.m_o), c(p.m_p), c(p.l_p), c(p.i_o), c(p.g));
    let vpx = qd[2] - lp * qd[1] * q[1].cos();
    let vpy = qd[3] + lp * qd[1] * q[1].sin();
    let t = half * mo * (qd[2] * qd[2] + qd[3] * qd[3])
        + half * io * qd[0] * qd[0]
        + half * mp * (vpx * vpx + vpy * vpy);
    let v = mo * g * q[3] + mp * g * (q[3] - lp * q[1].cos());
    t - v
}

/// Returns (M, C q_dot - dL/dq) for the unconstrained four-coordinate system.
fn euler_lagrange(p: &RobotParams64, q: [f64; 4], qd: [f64; 4]) -> (DMatrix<f64>, DVector<f64>) {
    let lift = |v: [f64; 4]| v.map(HyperDual::c);
    let mut m = DMatrix::zeros(4, 4);
    let mut h = DVector::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            // d2L / dqd_i dqd_j
            let mut a = lift(qd);
            a[i].e1 = 1.0;
            a[j].e2 += 1.0;
            m[(i, j)] = lagrangian(p, lift(q), a).e12;
            // d2L / dqd_i dq_j
            let mut b = lift(qd);
            b[i].e1 = 1.0;
            let mut qq = lift(q);
            qq[j].e2 = 1.0;
            h[i] += lagrangian(p, qq, b).e12 * qd[j];
        }
        let mut qq = lift(q);
        qq[i].e1 = 1.0;
        h[i] -= lagrangian(p, qq, lift(qd)).e1;
    }
    (m, h)
}

pub struct OracleRolling {
    pub qdd: [f64; 4],
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Solves the KKT system for the constraints `phi R - x = 0`, `y = 0`.
pub fn rolling(p: &RobotParams64, theta: f64, phi: f64, dphi: f64, dtheta: f64, tau: f64) -> OracleRolling {
    let q = [phi, theta, p.radius * phi, 0.0];
    let qd = [dphi, dtheta, p.radius * dphi, 0.0];
    let (m, h) = euler_lagrange(p, q, qd);
    let a = DMatrix::from_row_slice(2, 4, &[p.radius, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let mut k = DMatrix::zeros(6, 6);
    k.view_mut((0, 0), (4, 4)).copy_from(&m);
    k.view_mut((0, 4), (4, 2)).copy_from(&(-a.transpose()));
    k.view_mut((4, 0), (2, 4)).copy_from(&a);
    let force = DVector::from_vec(vec![-tau, tau, 0.0, 0.0]);
    let mut rhs = DVector::zeros(6);
    rhs.rows_mut(0, 4).copy_from(&(force - h));
    let sol = k.lu().solve(&rhs).expect("KKT system is regular");
    OracleRolling {
        qdd: [sol[0], sol[1], sol[2], sol[3]],
        lambda1: sol[4],
        lambda2: sol[5],
    }
}

pub fn flight(p: &RobotParams64, q: [f64; 4], qd: [f64; 4], tau: f64) -> [f64; 4] {
    let (m, h) = euler_lagrange(p, q, qd);
    let force = DVector::from_vec(vec![-tau, tau, 0.0, 0.0]);
    let sol = m.lu().solve(&(force - h)).expect("mass matrix is regular");
    [sol[0], sol[1], sol[2], sol[3]]
}

/// `max |a - b| / max |b|` (absolute when `b` vanishes).
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

use hopwheel::{Phase, SimState64};
use rand::{rngs::StdRng, Rng};

/// Random valid parameters around the physical robot's scale.
pub fn random_params(rng: &mut StdRng) -> RobotParams64 {
    let m_o = rng.random_range(0.1..2.0);
    let radius = rng.random_range(0.03..0.5);
    RobotParams64 {
        m_o,
        m_p: rng.random_range(0.02..1.0),
        radius,
        l_p: radius * rng.random_range(0.1..0.95),
        i_o: m_o * radius * radius * rng.random_range(0.3..1.2),
        g: rng.random_range(1.0..20.0),
        ..RobotParams64::default()
    }
}

pub fn random_flight_state(rng: &mut StdRng) -> SimState64 {
    SimState64 {
        phase: Phase::Flight,
        phi: rng.random_range(-10.0..10.0),
        theta: rng.random_range(-7.0..7.0),
        x: rng.random_range(-1.0..1.0),
        y: rng.random_range(0.0..0.5),
        dphi: rng.random_range(-50.0..50.0),
        dtheta: rng.random_range(-100.0..100.0),
        dx: rng.random_range(-3.0..3.0),
        dy: rng.random_range(-3.0..3.0),
        ..SimState64::at_rest()
    }
}
