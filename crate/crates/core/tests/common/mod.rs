#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use uaskf_core::systems::aslip::{self, AslipParams};
use uaskf_core::systems::circle::{self, CircleParams};
use uaskf_core::{EventContext, HybridSystem, Matrix, Vector};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

/// Random symmetric positive semidefinite matrix.
pub fn random_covariance(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) * scale);
    &a * a.transpose()
}

/// Pre-impact ball state on a plane through the origin at angle `theta`,
/// moving into it.
pub fn ball_impact_state(rng: &mut ChaCha8Rng, theta: f64) -> Vector {
    let s = rng.random_range(-2.0..2.0);
    let (sn, cs) = theta.sin_cos();
    let tangent = [cs, sn];
    let normal = [-sn, cs];
    let vt = rng.random_range(-3.0..3.0);
    let vn = -rng.random_range(0.5..8.0);
    v(&[s * tangent[0], s * tangent[1], vt * tangent[0] + vn * normal[0], vt * tangent[1] + vn * normal[1]])
}

/// Pre-impact state on the nominal circle moving inward.
pub fn circle_impact_state(rng: &mut ChaCha8Rng, p: &CircleParams) -> Vector {
    let phi: f64 = rng.random_range(-1.2..1.2);
    let n = [-phi.sin(), phi.cos()];
    let t = [phi.cos(), phi.sin()];
    let vt = rng.random_range(-3.0..3.0);
    let vn = -rng.random_range(0.5..8.0);
    v(&[p.radius_mean * n[0], p.radius_mean * n[1], vt * t[0] + vn * n[0], vt * t[1] + vn * n[1]])
}

/// Sliding state on the circle at which the contact force vanishes.
pub fn circle_liftoff_state(rng: &mut ChaCha8Rng, p: &CircleParams) -> Vector {
    let phi: f64 = rng.random_range(-1.0..1.0);
    let pos = [-p.radius_mean * phi.sin(), p.radius_mean * phi.cos()];
    let speed = (p.a_g * pos[1]).sqrt();
    let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let t = [phi.cos(), phi.sin()];
    let x = v(&[pos[0], pos[1], dir * speed * t[0], dir * speed * t[1]]);
    debug_assert!(circle::contact_force(&x, p.center, p.a_g).abs() < 1e-9);
    x
}

/// Random flight state with the toe at ground level and moving down.
pub fn aslip_touchdown_state(rng: &mut ChaCha8Rng, p: &AslipParams) -> Vector {
    let theta: f64 = rng.random_range(-0.3..0.3);
    let psi: f64 = rng.random_range(-0.4..0.4);
    let xt = rng.random_range(-1.0..1.0);
    let yt = p.ground_mean;
    let hip = [xt - p.l_0 * psi.sin(), yt + p.l_0 * psi.cos()];
    let xb = hip[0] - p.l_b * theta.sin();
    let yb = hip[1] + p.l_b * theta.cos();
    let w = rng.random_range(-1.0..1.0);
    let vx = rng.random_range(-2.0..2.0);
    // Keep the toe's vertical velocity negative.
    let vy = -rng.random_range(0.5..5.0) - w * (xt - xb);
    v(&[xb, yb, theta, xt, yt, vx, vy, w])
}

/// Random stance state with the leg at rest length and extending.
pub fn aslip_liftoff_state(rng: &mut ChaCha8Rng, p: &AslipParams) -> Vector {
    let mut x = aslip_touchdown_state(rng, p);
    // Velocity along the leg axis away from the toe.
    let (s, c) = x[2].sin_cos();
    let hip = [x[0] + p.l_b * s, x[1] - p.l_b * c];
    let d = [hip[0] - x[3], hip[1] - x[4]];
    let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let speed = rng.random_range(0.5..4.0);
    let w = x[7];
    x[5] = speed * d[0] / l - w * p.l_b * c;
    x[6] = speed * d[1] / l - w * p.l_b * s;
    debug_assert!((aslip::leg_length(&x, p) - p.l_0).abs() < 1e-12);
    x
}

/// Random state near the operating region of each mode, for derivative checks.
pub fn aslip_stance_state(rng: &mut ChaCha8Rng, p: &AslipParams) -> Vector {
    let theta: f64 = rng.random_range(-0.5..0.5);
    let psi: f64 = rng.random_range(-0.6..0.6);
    let l = rng.random_range(0.5..1.1);
    let xt = rng.random_range(-2.0..2.0);
    let yt = rng.random_range(-0.1..0.1);
    let hip = [xt - l * psi.sin(), yt + l * psi.cos()];
    v(&[
        hip[0] - p.l_b * theta.sin(),
        hip[1] + p.l_b * theta.cos(),
        theta,
        xt,
        yt,
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-2.0..2.0),
    ])
}

pub fn aslip_flight_state(rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(8, |i, _| match i {
        2 => rng.random_range(-0.5..0.5),
        _ => rng.random_range(-3.0..3.0),
    })
}

pub fn circle_state(rng: &mut ChaCha8Rng) -> Vector {
    let phi: f64 = rng.random_range(-3.0..3.0);
    let rho = rng.random_range(1.0..4.0);
    v(&[-rho * phi.sin(), rho * phi.cos(), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
}

/// Classical saltation matrix `D_xR + (f_J - D_xR f_I - D_tR) D_xg / (D_xg f_I + D_tg)`
/// assembled straight from the system's derivatives.
pub fn classical_saltation(sys: &HybridSystem, ctx: &EventContext) -> Matrix {
    let tr = &sys.transitions()[ctx.transition];
    let (t, x, th) = (ctx.t, &ctx.x_pre, &ctx.theta);
    let d_x_r = tr.reset.jac_x(t, x, th);
    let d_x_g = tr.guard.grad_x(t, x, th);
    let denom = (&d_x_g * &ctx.f_pre)[0] + tr.guard.grad_t(t, x, th);
    let jump = &ctx.f_post - &d_x_r * &ctx.f_pre - tr.reset.jac_t(t, x, th);
    &d_x_r + jump * d_x_g / denom
}
