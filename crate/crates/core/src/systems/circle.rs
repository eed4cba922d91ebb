//! Point mass dropped onto a circle of uncertain radius.
//!
//! Mode 0 is ballistic flight; mode 1 slides along the circle. Impact is
//! plastic: the velocity loses its component along the outward normal
//! `n = p / ‖p‖` (the inclined-plane reflection with `α = 0` and the plane
//! tangent to the circle at the impact point). While sliding, the contact
//! force `λ n` keeps the radial acceleration at the centripetal value, giving
//! `λ = (a_g p_y - ‖v‖²) / ‖p‖` for unit mass. Liftoff fires when `λ` reaches
//! zero and the reset is the identity.

use alloc::vec;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hybrid::{Guard, HybridSystem, Mode, ModeId, Reset, Transition};
use crate::linalg::{Matrix, RowVector, Vector};
use crate::systems::ball::ballistic_mode;

pub const AERIAL: ModeId = ModeId(0);
pub const SLIDING: ModeId = ModeId(1);
pub const IMPACT: usize = 0;
pub const LIFTOFF: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleParams {
    pub radius_mean: f64,
    pub sigma_radius: f64,
    /// Circle center; the dynamics below are written relative to it.
    pub center: [f64; 2],
    pub a_g: f64,
}

impl Default for CircleParams {
    fn default() -> Self {
        Self { radius_mean: 2.0, sigma_radius: 0.25, center: [0.0, 0.0], a_g: 9.8 }
    }
}

fn rel(x: &Vector, center: [f64; 2]) -> (f64, f64) {
    (x[0] - center[0], x[1] - center[1])
}

/// Contact multiplier `λ` of the sliding mode.
pub fn contact_force(x: &Vector, center: [f64; 2], a_g: f64) -> f64 {
    let (px, py) = rel(x, center);
    let rho = (px * px + py * py).sqrt();
    (a_g * py - (x[2] * x[2] + x[3] * x[3])) / rho
}

fn contact_force_grad(x: &Vector, center: [f64; 2], a_g: f64) -> RowVector {
    let (px, py) = rel(x, center);
    let rho2 = px * px + py * py;
    let rho = rho2.sqrt();
    let num = a_g * py - (x[2] * x[2] + x[3] * x[3]);
    let rho3 = rho2 * rho;
    RowVector::from_row_slice(&[-num * px / rho3, a_g / rho - num * py / rho3, -2.0 * x[2] / rho, -2.0 * x[3] / rho])
}

fn sliding_mode(center: [f64; 2], a_g: f64) -> Mode {
    Mode::new("sliding", 4, move |_, x| {
        let (px, py) = rel(x, center);
        let rho2 = px * px + py * py;
        let mu = (a_g * py - (x[2] * x[2] + x[3] * x[3])) / rho2;
        Vector::from_column_slice(&[x[2], x[3], mu * px, mu * py - a_g])
    })
    .with_jacobian(move |_, x| {
        let (px, py) = rel(x, center);
        let (vx, vy) = (x[2], x[3]);
        let rho2 = px * px + py * py;
        let num = a_g * py - (vx * vx + vy * vy);
        let mu = num / rho2;
        // ∂μ/∂p and ∂μ/∂v
        let rho4 = rho2 * rho2;
        let dmu_dpx = -2.0 * num * px / rho4;
        let dmu_dpy = a_g / rho2 - 2.0 * num * py / rho4;
        let dmu_dvx = -2.0 * vx / rho2;
        let dmu_dvy = -2.0 * vy / rho2;
        let mut j = Matrix::zeros(4, 4);
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j[(2, 0)] = mu + px * dmu_dpx;
        j[(2, 1)] = px * dmu_dpy;
        j[(2, 2)] = px * dmu_dvx;
        j[(2, 3)] = px * dmu_dvy;
        j[(3, 0)] = py * dmu_dpx;
        j[(3, 1)] = mu + py * dmu_dpy;
        j[(3, 2)] = py * dmu_dvx;
        j[(3, 3)] = py * dmu_dvy;
        j
    })
}

/// Removes the velocity component along the outward normal at the contact point.
pub fn plastic_reset(x: &Vector, center: [f64; 2]) -> Vector {
    let (px, py) = rel(x, center);
    let rho = (px * px + py * py).sqrt();
    let (nx, ny) = (px / rho, py / rho);
    let vn = x[2] * nx + x[3] * ny;
    Vector::from_column_slice(&[x[0], x[1], x[2] - vn * nx, x[3] - vn * ny])
}

fn plastic_reset_jac(x: &Vector, center: [f64; 2]) -> Matrix {
    let (px, py) = rel(x, center);
    let rho = (px * px + py * py).sqrt();
    let n = [px / rho, py / rho];
    let v = [x[2], x[3]];
    let vn = v[0] * n[0] + v[1] * n[1];
    // P = I - n nᵀ, ∂n/∂p = P / ρ
    let proj = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 } - n[i] * n[k];
    let mut j = Matrix::identity(4, 4);
    for i in 0..2 {
        for k in 0..2 {
            // ∂v⁺_i/∂p_k = -(vn ∂n_i/∂p_k + n_i (vᵀ ∂n/∂p_k))
            let v_dn = (v[0] * proj(0, k) + v[1] * proj(1, k)) / rho;
            j[(2 + i, k)] = -(vn * proj(i, k) / rho + n[i] * v_dn);
            j[(2 + i, 2 + k)] = proj(i, k);
        }
    }
    j
}

/// Two-mode circle-drop system. The radius is uncertain only through the
/// impact guard's offset; the reset carries no parameters.
pub fn make_circle_drop(p: CircleParams) -> Result<HybridSystem> {
    if !(p.radius_mean > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive"));
    }
    if !(p.sigma_radius >= 0.0) || !p.a_g.is_finite() {
        return Err(Error::InvalidArgument("invalid circle parameters"));
    }
    let CircleParams { radius_mean, center, a_g, .. } = p;

    let impact_guard = Guard::new(move |_, x, _| {
        let (px, py) = rel(x, center);
        (px * px + py * py).sqrt() - radius_mean
    })
    .with_grad_x(move |_, x, _| {
        let (px, py) = rel(x, center);
        let rho = (px * px + py * py).sqrt();
        RowVector::from_row_slice(&[px / rho, py / rho, 0.0, 0.0])
    })
    .with_grad_t(|_, _, _| 0.0)
    .with_sigma(p.sigma_radius);
    let impact_reset = Reset::new(move |_, x, _| plastic_reset(x, center))
        .with_jac_x(move |_, x, _| plastic_reset_jac(x, center))
        .with_jac_t(|_, _, _| Vector::zeros(4))
        .with_jac_theta(|_, _, _| Matrix::zeros(4, 0));

    let liftoff_guard = Guard::new(move |_, x, _| contact_force(x, center, a_g))
        .with_grad_x(move |_, x, _| contact_force_grad(x, center, a_g))
        .with_grad_t(|_, _, _| 0.0);

    HybridSystem::new(
        vec![ballistic_mode("aerial", a_g), sliding_mode(center, a_g)],
        vec![
            Transition { from: AERIAL, to: SLIDING, guard: impact_guard, reset: impact_reset },
            Transition { from: SLIDING, to: AERIAL, guard: liftoff_guard, reset: Reset::identity(4) },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::Environment;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn drop_on_top_stops_dead() {
        let sys = make_circle_drop(CircleParams::default()).unwrap();
        let env = Environment::nominal(&sys);
        let c = sys.detect_event(AERIAL, 0.0, &v(&[0.0, 5.0, 0.0, 0.0]), 2.0, &env).unwrap().unwrap();
        assert_eq!(c.transition, IMPACT);
        assert_relative_eq!(c.state[1], 2.0, epsilon = 1e-9);
        let post = sys.transitions()[IMPACT].reset.apply(c.t, &c.state, &Vector::zeros(0));
        assert_relative_eq!(post[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(post[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn plastic_impact_keeps_tangential_speed() {
        for &phi in &[0.1, 0.4, -0.7, 1.2] {
            let p = [-2.0 * f64::sin(phi), 2.0 * f64::cos(phi)];
            let vel = [0.3, -6.0];
            let post = plastic_reset(&v(&[p[0], p[1], vel[0], vel[1]]), [0.0, 0.0]);
            let n = [-f64::sin(phi), f64::cos(phi)];
            let speed = (vel[0] * vel[0] + vel[1] * vel[1]).sqrt();
            let cos_a = (vel[0] * n[0] + vel[1] * n[1]) / speed;
            let expected = speed * (1.0 - cos_a * cos_a).sqrt();
            assert_relative_eq!((post[2] * post[2] + post[3] * post[3]).sqrt(), expected, epsilon = 1e-12);
            assert_relative_eq!(post[2] * n[0] + post[3] * n[1], 0.0, epsilon = 1e-12);
            // Same as the inclined-plane reflection with zero restitution at the tangent angle.
            let reflected = crate::systems::ball::inclined_reset(&v(&[p[0], p[1], vel[0], vel[1]]), phi, 0.0);
            assert_relative_eq!(post, reflected, epsilon = 1e-12);
        }
    }

    #[test]
    fn sliding_keeps_radius() {
        let sys = make_circle_drop(CircleParams::default()).unwrap();
        let phi = 0.3_f64;
        let x0 = v(&[-2.0 * phi.sin(), 2.0 * phi.cos(), -phi.cos(), -phi.sin()]);
        let mut x = x0.clone();
        for k in 0..40 {
            x = sys.flow(SLIDING, k as f64 * 0.005, &x, 0.005, false).unwrap().state;
            let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!((rho - 2.0).abs() < 1e-8, "radius drift {}", rho - 2.0);
            let radial_speed = (x[0] * x[2] + x[1] * x[3]) / rho;
            assert!(radial_speed.abs() < 1e-8);
        }
    }

    #[test]
    fn slide_then_liftoff_when_force_vanishes() {
        let sys = make_circle_drop(CircleParams::default()).unwrap();
        let env = Environment::nominal(&sys);
        let traj = sys.simulate_ground_truth(AERIAL, &v(&[0.5, 5.0, 0.0, 0.0]), &env, 3.0, 0.01).unwrap();
        assert!(traj.events.len() >= 2);
        assert_eq!(traj.events[0].transition, IMPACT);
        assert_eq!(traj.events[1].transition, LIFTOFF);
        let lift = &traj.events[1];
        assert!(contact_force(&lift.pre, [0.0, 0.0], 9.8).abs() < 1e-9);
        // Frictionless slide from the impact point: a_g y = v² at liftoff.
        let imp = &traj.events[0].post;
        let v0_sq = imp[2] * imp[2] + imp[3] * imp[3];
        let y_lift = (v0_sq + 2.0 * 9.8 * imp[1]) / (3.0 * 9.8);
        assert_relative_eq!(lift.pre[1], y_lift, epsilon = 1e-6);
    }
}
