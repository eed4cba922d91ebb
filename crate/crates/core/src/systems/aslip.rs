//! Asymmetric spring-loaded inverted pendulum (ASLIP) hopper.
//!
//! State `q = [x_b, y_b, θ_b, x_t, y_t, ẋ_b, ẏ_b, θ̇_b]`: body position and
//! pitch, toe position, body velocities. The hip sits `l_b` below the center
//! of mass along the body axis, `h = (x_b + l_b sin θ_b, y_b - l_b cos θ_b)`.
//! The leg runs from hip to toe with length `l` and absolute angle `ψ`
//! measured from the downward vertical; the hip angle is `φ = ψ - θ_b`.
//!
//! * Flight: the body is ballistic and the massless leg is rigidly attached,
//!   so the toe moves with the body's rigid-body velocity.
//! * Stance: the toe is pinned; a leg spring `k_l (l_0 - l)` and a hip
//!   torsional spring `k_h (φ_0 - φ)` act on the body. The mass matrix is
//!   constant, so the Lagrangian equations reduce to
//!   `M q̈ = -∇V - m a_g ŷ`.
//!
//! Touchdown fires when the toe reaches the ground, liftoff when the leg
//! returns to rest length; both resets are the identity on this state.

use alloc::vec;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hybrid::{Guard, HybridSystem, Mode, ModeId, Reset, Transition};
use crate::linalg::{Matrix, RowVector, Vector};

pub const FLIGHT: ModeId = ModeId(0);
pub const STANCE: ModeId = ModeId(1);
pub const TOUCHDOWN: usize = 0;
pub const LIFTOFF: usize = 1;
pub const DIM: usize = 8;

const XB: usize = 0;
const YB: usize = 1;
const TH: usize = 2;
const XT: usize = 3;
const YT: usize = 4;
const VX: usize = 5;
const VY: usize = 6;
const VTH: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AslipParams {
    pub m_b: f64,
    pub a_g: f64,
    pub l_b: f64,
    pub i_b: f64,
    pub k_h: f64,
    pub k_l: f64,
    pub l_0: f64,
    pub phi_0: f64,
    pub ground_mean: f64,
    pub sigma_ground: f64,
}

impl Default for AslipParams {
    fn default() -> Self {
        Self { m_b: 1.0, a_g: 9.8, l_b: 0.5, i_b: 1.0, k_h: 100.0, k_l: 100.0, l_0: 1.0, phi_0: 0.0, ground_mean: 0.0, sigma_ground: 0.01 }
    }
}

impl AslipParams {
    fn validate(&self) -> Result<()> {
        let positive = [self.m_b, self.l_b, self.i_b, self.k_h, self.k_l, self.l_0];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("ASLIP masses, inertias, stiffnesses and lengths must be positive"));
        }
        if !(self.sigma_ground >= 0.0) || !self.a_g.is_finite() || !self.phi_0.is_finite() {
            return Err(Error::InvalidArgument("invalid ASLIP parameters"));
        }
        Ok(())
    }

    /// Toe position for a rest-length leg at the rest hip angle.
    pub fn rest_toe(&self, x_b: f64, y_b: f64, theta_b: f64) -> (f64, f64) {
        let (s, c) = theta_b.sin_cos();
        let psi = theta_b + self.phi_0;
        (x_b + self.l_b * s + self.l_0 * psi.sin(), y_b - self.l_b * c - self.l_0 * psi.cos())
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut w = a % two_pi;
    if w > core::f64::consts::PI {
        w -= two_pi;
    } else if w <= -core::f64::consts::PI {
        w += two_pi;
    }
    w
}

/// Leg kinematics at a state.
#[derive(Debug, Clone, Copy)]
struct Leg {
    /// hip - toe
    d: [f64; 2],
    l: f64,
    phi: f64,
    grad_l: [f64; 2],
    grad_psi: [f64; 2],
    sin_th: f64,
    cos_th: f64,
}

impl Leg {
    fn at(x: &Vector, p: &AslipParams) -> Self {
        let (s, c) = x[TH].sin_cos();
        let hip = [x[XB] + p.l_b * s, x[YB] - p.l_b * c];
        let d = [hip[0] - x[XT], hip[1] - x[YT]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let l = l2.sqrt();
        let psi = (-d[0]).atan2(d[1]);
        Self { d, l, phi: wrap_angle(psi - x[TH]), grad_l: [d[0] / l, d[1] / l], grad_psi: [-d[1] / l2, d[0] / l2], sin_th: s, cos_th: c }
    }

    /// `∂h/∂θ`
    fn dh_dtheta(&self, l_b: f64) -> [f64; 2] {
        [l_b * self.cos_th, l_b * self.sin_th]
    }
}

/// Leg length of a state.
pub fn leg_length(x: &Vector, p: &AslipParams) -> f64 {
    Leg::at(x, p).l
}

/// Hip angle `φ` of a state.
pub fn hip_angle(x: &Vector, p: &AslipParams) -> f64 {
    Leg::at(x, p).phi
}

/// Kinetic + gravitational + spring energy (springs count in stance only).
pub fn energy(x: &Vector, p: &AslipParams, mode: ModeId) -> f64 {
    let kinetic = 0.5 * p.m_b * (x[VX] * x[VX] + x[VY] * x[VY]) + 0.5 * p.i_b * x[VTH] * x[VTH];
    let gravity = p.m_b * p.a_g * x[YB];
    if mode == STANCE {
        let leg = Leg::at(x, p);
        let dl = p.l_0 - leg.l;
        let dphi = wrap_angle(p.phi_0 - leg.phi);
        kinetic + gravity + 0.5 * p.k_l * dl * dl + 0.5 * p.k_h * dphi * dphi
    } else {
        kinetic + gravity
    }
}

fn flight_field(x: &Vector, p: &AslipParams) -> Vector {
    Vector::from_column_slice(&[x[VX], x[VY], x[VTH], x[VX] - x[VTH] * (x[YT] - x[YB]), x[VY] + x[VTH] * (x[XT] - x[XB]), 0.0, -p.a_g, 0.0])
}

fn flight_jacobian(x: &Vector) -> Matrix {
    let mut j = Matrix::zeros(DIM, DIM);
    j[(XB, VX)] = 1.0;
    j[(YB, VY)] = 1.0;
    j[(TH, VTH)] = 1.0;
    j[(XT, VX)] = 1.0;
    j[(XT, VTH)] = -(x[YT] - x[YB]);
    j[(XT, YT)] = -x[VTH];
    j[(XT, YB)] = x[VTH];
    j[(YT, VY)] = 1.0;
    j[(YT, VTH)] = x[XT] - x[XB];
    j[(YT, XT)] = x[VTH];
    j[(YT, XB)] = -x[VTH];
    j
}

/// Spring force derivatives `s_l = dV/dl`, `s_h = dV/dφ`.
fn spring_slopes(leg: &Leg, p: &AslipParams) -> (f64, f64) {
    (-p.k_l * (p.l_0 - leg.l), -p.k_h * wrap_angle(p.phi_0 - leg.phi))
}

/// Generalized spring force gradient `∇_q V` for `q = (x_b, y_b, θ_b)`.
fn potential_gradient(leg: &Leg, p: &AslipParams) -> [f64; 3] {
    let (s_l, s_h) = spring_slopes(leg, p);
    let u = [s_l * leg.grad_l[0] + s_h * leg.grad_psi[0], s_l * leg.grad_l[1] + s_h * leg.grad_psi[1]];
    let dh = leg.dh_dtheta(p.l_b);
    [u[0], u[1], dh[0] * u[0] + dh[1] * u[1] - s_h]
}

fn stance_field(x: &Vector, p: &AslipParams) -> Vector {
    let leg = Leg::at(x, p);
    let g = potential_gradient(&leg, p);
    Vector::from_column_slice(&[x[VX], x[VY], x[VTH], 0.0, 0.0, -g[0] / p.m_b, -g[1] / p.m_b - p.a_g, -g[2] / p.i_b])
}

fn stance_jacobian(x: &Vector, p: &AslipParams) -> Matrix {
    let leg = Leg::at(x, p);
    let (s_l, s_h) = spring_slopes(&leg, p);
    let [dx, dy] = leg.d;
    let l = leg.l;
    let l2 = l * l;
    let l4 = l2 * l2;
    let gl = leg.grad_l;
    let gp = leg.grad_psi;

    // Hessian of V with respect to d = hip - toe.
    let hess_l = [[(1.0 - gl[0] * gl[0]) / l, -gl[0] * gl[1] / l], [-gl[0] * gl[1] / l, (1.0 - gl[1] * gl[1]) / l]];
    let hess_psi = [[2.0 * dx * dy / l4, (dy * dy - dx * dx) / l4], [(dy * dy - dx * dx) / l4, -2.0 * dx * dy / l4]];
    let mut h_dd = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            h_dd[i][k] = p.k_l * gl[i] * gl[k] + s_l * hess_l[i][k] + p.k_h * gp[i] * gp[k] + s_h * hess_psi[i][k];
        }
    }
    let u = [s_l * gl[0] + s_h * gp[0], s_l * gl[1] + s_h * gp[1]];
    let dh = leg.dh_dtheta(p.l_b);
    // J_h = ∂h/∂(x_b, y_b, θ_b)
    let j_h = [[1.0, 0.0, dh[0]], [0.0, 1.0, dh[1]]];

    // ∂u/∂q = H_dd J_h - k_h ∇ψ e_θᵀ
    let mut du_dq = [[0.0; 3]; 2];
    for i in 0..2 {
        for k in 0..3 {
            du_dq[i][k] = h_dd[i][0] * j_h[0][k] + h_dd[i][1] * j_h[1][k];
        }
        du_dq[i][2] -= p.k_h * gp[i];
    }
    // ∂s_h/∂q = k_h (∇ψᵀ J_h - e_θᵀ)
    let mut dsh_dq = [0.0; 3];
    for k in 0..3 {
        dsh_dq[k] = p.k_h * (gp[0] * j_h[0][k] + gp[1] * j_h[1][k]);
    }
    dsh_dq[2] -= p.k_h;

    let mut dg_dq = [[0.0; 3]; 3];
    for k in 0..3 {
        dg_dq[0][k] = du_dq[0][k];
        dg_dq[1][k] = du_dq[1][k];
        dg_dq[2][k] = dh[0] * du_dq[0][k] + dh[1] * du_dq[1][k] - dsh_dq[k];
    }
    // ∂(∂h/∂θ)/∂θ · u
    dg_dq[2][2] += -p.l_b * leg.sin_th * u[0] + p.l_b * leg.cos_th * u[1];

    // Toe derivatives: ∂d/∂toe = -I.
    let mut dg_dtoe = [[0.0; 2]; 3];
    for k in 0..2 {
        dg_dtoe[0][k] = -h_dd[0][k];
        dg_dtoe[1][k] = -h_dd[1][k];
        dg_dtoe[2][k] = -(dh[0] * h_dd[0][k] + dh[1] * h_dd[1][k]) + p.k_h * gp[k];
    }

    let inv_mass = [1.0 / p.m_b, 1.0 / p.m_b, 1.0 / p.i_b];
    let mut j = Matrix::zeros(DIM, DIM);
    j[(XB, VX)] = 1.0;
    j[(YB, VY)] = 1.0;
    j[(TH, VTH)] = 1.0;
    for r in 0..3 {
        for k in 0..3 {
            j[(VX + r, XB + k)] = -inv_mass[r] * dg_dq[r][k];
        }
        for k in 0..2 {
            j[(VX + r, XT + k)] = -inv_mass[r] * dg_dtoe[r][k];
        }
    }
    j
}

/// Two-mode ASLIP hopper with touchdown on a flat ground of uncertain height.
pub fn make_aslip(p: AslipParams) -> Result<HybridSystem> {
    p.validate()?;
    let flight = Mode::new("flight", DIM, move |_, x| flight_field(x, &p)).with_jacobian(|_, x| flight_jacobian(x));
    let stance = Mode::new("stance", DIM, move |_, x| stance_field(x, &p)).with_jacobian(move |_, x| stance_jacobian(x, &p));

    let ground = p.ground_mean;
    let touchdown = Guard::new(move |_, x, _| x[YT] - ground)
        .with_grad_x(|_, _, _| {
            let mut g = RowVector::zeros(DIM);
            g[YT] = 1.0;
            g
        })
        .with_grad_t(|_, _, _| 0.0)
        .with_sigma(p.sigma_ground);

    let liftoff = Guard::new(move |_, x, _| p.l_0 - Leg::at(x, &p).l)
        .with_grad_x(move |_, x, _| {
            let leg = Leg::at(x, &p);
            let dh = leg.dh_dtheta(p.l_b);
            let mut g = RowVector::zeros(DIM);
            g[XB] = -leg.grad_l[0];
            g[YB] = -leg.grad_l[1];
            g[TH] = -(leg.grad_l[0] * dh[0] + leg.grad_l[1] * dh[1]);
            g[XT] = leg.grad_l[0];
            g[YT] = leg.grad_l[1];
            g
        })
        .with_grad_t(|_, _, _| 0.0);

    HybridSystem::new(
        vec![flight, stance],
        vec![
            Transition { from: FLIGHT, to: STANCE, guard: touchdown, reset: Reset::identity(DIM) },
            Transition { from: STANCE, to: FLIGHT, guard: liftoff, reset: Reset::identity(DIM) },
        ],
    )
}
