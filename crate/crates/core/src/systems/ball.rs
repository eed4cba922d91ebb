//! Planar point mass bouncing off an inclined plane.
//!
//! State `[x₁, x₂, x₃, x₄]` = position and velocity. The plane passes through
//! the origin at angle `θ`, so its unit normal is `n = (-sin θ, cos θ)` and the
//! guard is `x₂ cos θ - x₁ sin θ - δ_g`. The reset reflects the normal
//! velocity component with restitution `α`:
//! `v⁺ = v - (1 + α)(v·n) n`.

use alloc::vec;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hybrid::{Guard, HybridSystem, Mode, ModeId, Reset, Transition};
use crate::linalg::{Matrix, RowVector, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallParams {
    pub a_g: f64,
    /// Mean ground angle (rad).
    pub theta: f64,
    /// Coefficient of restitution.
    pub alpha: f64,
    pub ground_offset_mean: f64,
    pub sigma_ground: f64,
    pub sigma_theta: f64,
    /// When set, restitution becomes a second uncertain reset parameter.
    pub sigma_alpha: Option<f64>,
}

impl Default for BallParams {
    fn default() -> Self {
        Self { a_g: 9.8, theta: -0.25, alpha: 0.8, ground_offset_mean: 0.0, sigma_ground: 0.25, sigma_theta: 0.05, sigma_alpha: None }
    }
}

impl BallParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument("restitution must lie in [0, 1]"));
        }
        if !(self.sigma_ground >= 0.0) || !(self.sigma_theta >= 0.0) || self.sigma_alpha.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::InvalidArgument("standard deviations must be non-negative"));
        }
        if !(self.a_g.is_finite() && self.theta.is_finite()) {
            return Err(Error::InvalidArgument("non-finite ball parameter"));
        }
        Ok(())
    }
}

pub(crate) fn ballistic_mode(name: &str, a_g: f64) -> Mode {
    Mode::new(name, 4, move |_, x| Vector::from_column_slice(&[x[2], x[3], 0.0, -a_g])).with_jacobian(|_, _| {
        let mut j = Matrix::zeros(4, 4);
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j
    })
}

/// Reflection of the velocity about the plane with angle `theta`.
pub fn inclined_reset(x: &Vector, theta: f64, alpha: f64) -> Vector {
    let (s, c) = theta.sin_cos();
    let w = x[3] * c - x[2] * s;
    Vector::from_column_slice(&[x[0], x[1], x[2] + s * (1.0 + alpha) * w, x[3] - c * (1.0 + alpha) * w])
}

fn inclined_reset_jac_x(theta: f64, alpha: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    let k = 1.0 + alpha;
    let mut j = Matrix::identity(4, 4);
    j[(2, 2)] = 1.0 - k * s * s;
    j[(2, 3)] = k * s * c;
    j[(3, 2)] = k * s * c;
    j[(3, 3)] = 1.0 - k * c * c;
    j
}

/// Columns `∂R/∂θ` and `∂R/∂α`.
fn inclined_reset_jac_params(x: &Vector, theta: f64, alpha: f64) -> (Vector, Vector) {
    let (s, c) = theta.sin_cos();
    let k = 1.0 + alpha;
    let w = x[3] * c - x[2] * s;
    let dw = -x[3] * s - x[2] * c;
    let d_theta = Vector::from_column_slice(&[0.0, 0.0, k * (c * w + s * dw), k * (s * w - c * dw)]);
    let d_alpha = Vector::from_column_slice(&[0.0, 0.0, s * w, -c * w]);
    (d_theta, d_alpha)
}

/// One-mode bouncing ball with a self-transition whose reset parameters are
/// `[θ]`, or `[θ, α]` when restitution is uncertain.
pub fn make_bouncing_ball(p: BallParams) -> Result<HybridSystem> {
    p.validate()?;
    let offset = p.ground_offset_mean;
    let guard = Guard::new(move |_, x, th| x[1] * th[0].cos() - x[0] * th[0].sin() - offset)
        .with_grad_x(|_, _, th| {
            let (s, c) = th[0].sin_cos();
            RowVector::from_row_slice(&[-s, c, 0.0, 0.0])
        })
        .with_grad_t(|_, _, _| 0.0)
        .with_sigma(p.sigma_ground);

    let alpha = p.alpha;
    let uncertain_alpha = p.sigma_alpha.is_some();
    let restitution = move |th: &Vector| if uncertain_alpha { th[1] } else { alpha };
    let reset = Reset::new(move |_, x, th| inclined_reset(x, th[0], restitution(th)))
        .with_jac_x(move |_, _, th| inclined_reset_jac_x(th[0], restitution(th)))
        .with_jac_t(|_, _, _| Vector::zeros(4))
        .with_jac_theta(move |_, x, th| {
            let (d_theta, d_alpha) = inclined_reset_jac_params(x, th[0], restitution(th));
            if uncertain_alpha {
                Matrix::from_columns(&[d_theta, d_alpha])
            } else {
                Matrix::from_columns(&[d_theta])
            }
        });
    let reset = match p.sigma_alpha {
        Some(sa) => reset.with_parameters(
            Vector::from_column_slice(&[p.theta, p.alpha]),
            Matrix::from_diagonal(&Vector::from_column_slice(&[p.sigma_theta * p.sigma_theta, sa * sa])),
        ),
        None => reset.with_parameters(Vector::from_column_slice(&[p.theta]), Matrix::from_element(1, 1, p.sigma_theta * p.sigma_theta)),
    };

    HybridSystem::new(vec![ballistic_mode("flight", p.a_g)], vec![Transition { from: ModeId(0), to: ModeId(0), guard, reset }])
}
