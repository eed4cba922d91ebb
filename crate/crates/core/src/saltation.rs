//! First-order maps through a hybrid event: the saltation matrix `Ξ_x`, the
//! guard saltation vector `Ξ_g` and the reset-parameter Jacobian `D_θR`, and
//! the covariance update that combines them.

use crate::error::{Error, Result};
use crate::hybrid::HybridSystem;
use crate::linalg::{self, Matrix, RowVector, Vector};

/// Tolerance for the symmetric/PSD checks on covariance inputs.
const COVARIANCE_PSD_TOL: f64 = 1e-8;

/// Linearization point of an event on `transition`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventContext {
    pub transition: usize,
    pub t: f64,
    pub x_pre: Vector,
    pub x_post: Vector,
    /// Reset parameters the event is linearized at (normally their mean).
    pub theta: Vector,
    pub f_pre: Vector,
    pub f_post: Vector,
}

impl EventContext {
    /// Builds the context at `(t, x_pre)` using the reset's mean parameters.
    pub fn at_mean(system: &HybridSystem, transition: usize, t: f64, x_pre: &Vector) -> Result<Self> {
        let theta = system.transition(transition)?.reset.theta_mean.clone();
        Self::new(system, transition, t, x_pre, theta)
    }

    pub fn new(system: &HybridSystem, transition: usize, t: f64, x_pre: &Vector, theta: Vector) -> Result<Self> {
        let tr = system.transition(transition)?;
        let f_pre = system.eval_field(tr.from, t, x_pre)?;
        let x_post = tr.reset.apply(t, x_pre, &theta);
        let f_post = system.eval_field(tr.to, t, &x_post)?;
        Ok(Self { transition, t, x_pre: x_pre.clone(), x_post, theta, f_pre, f_post })
    }
}

/// `Ξ_x`, `Ξ_g`, `D_θR` and the transversality denominator at one event.
#[derive(Debug, Clone, PartialEq)]
pub struct SaltationBundle {
    pub xi_x: Matrix,
    pub xi_g: Vector,
    pub d_theta_r: Matrix,
    /// `D_xg f_I + D_tg`.
    pub denom: f64,
    pub d_x_r: Matrix,
    pub d_x_g: RowVector,
}

/// Evaluates the event Jacobians of `ctx`.
///
/// `Ξ_g = (D_xR f_I + D_tR - f_J) / (D_xg f_I + D_tg)` and `Ξ_x = D_xR - Ξ_g D_xg`.
pub fn saltation_bundle(system: &HybridSystem, ctx: &EventContext) -> Result<SaltationBundle> {
    let tr = system.transition(ctx.transition)?;
    let (t, x, theta) = (ctx.t, &ctx.x_pre, &ctx.theta);
    let d_x_g = tr.guard.grad_x(t, x, theta);
    let d_t_g = tr.guard.grad_t(t, x, theta);
    let denom = (&d_x_g * &ctx.f_pre)[0] + d_t_g;
    if !(denom.abs() >= system.tolerances.transversality) {
        return Err(Error::TransversalityViolation(denom.abs()));
    }
    let d_x_r = tr.reset.jac_x(t, x, theta);
    let d_t_r = tr.reset.jac_t(t, x, theta);
    let xi_g = (&d_x_r * &ctx.f_pre + d_t_r - &ctx.f_post) / denom;
    let xi_x = &d_x_r - &xi_g * &d_x_g;
    let d_theta_r = tr.reset.jac_theta(t, x, theta);
    Ok(SaltationBundle { xi_x, xi_g, d_theta_r, denom, d_x_r, d_x_g })
}

/// Projects a full-dimensional guard covariance onto the guard normal:
/// `σ_g² = D_xg Σ D_xgᵀ`.
pub fn normal_guard_variance(d_x_g: &RowVector, sigma_full: &Matrix) -> f64 {
    (d_x_g * sigma_full * d_x_g.transpose())[0]
}

impl SaltationBundle {
    /// The block matrix `[[Ξ_x, Ξ_g], [0, 1]]`.
    pub fn extended(&self) -> Matrix {
        let (rows, cols) = self.xi_x.shape();
        let mut m = Matrix::zeros(rows + 1, cols + 1);
        m.view_mut((0, 0), (rows, cols)).copy_from(&self.xi_x);
        m.view_mut((0, cols), (rows, 1)).copy_from(&self.xi_g);
        m[(rows, cols)] = 1.0;
        m
    }

    /// Joint state/guard covariance after the event, starting from
    /// uncorrelated state and guard-offset uncertainty.
    pub fn extended_covariance(&self, sigma_x: &Matrix, sigma_g_sq: f64) -> Result<Matrix> {
        self.check_inputs(sigma_x, sigma_g_sq, &Matrix::zeros(self.d_theta_r.ncols(), self.d_theta_r.ncols()))?;
        let n = sigma_x.nrows();
        let mut prior = Matrix::zeros(n + 1, n + 1);
        prior.view_mut((0, 0), (n, n)).copy_from(sigma_x);
        prior[(n, n)] = sigma_g_sq;
        let ext = self.extended();
        Ok(linalg::symmetrize(&(&ext * prior * ext.transpose())))
    }

    /// Largest entry of `|Ξ_x - (D_xR - Ξ_g D_xg)|`.
    pub fn identity_residual(&self) -> f64 {
        (&self.xi_x - (&self.d_x_r - &self.xi_g * &self.d_x_g)).amax()
    }

    /// `Ξ_x Σ_x Ξ_xᵀ + Ξ_g σ_g² Ξ_gᵀ + D_θR Σ_θ D_θRᵀ`, each term symmetrized.
    pub fn propagate_covariance(&self, sigma_x: &Matrix, sigma_g_sq: f64, sigma_theta: &Matrix) -> Result<Matrix> {
        self.check_inputs(sigma_x, sigma_g_sq, sigma_theta)?;
        let state = linalg::symmetrize(&(&self.xi_x * sigma_x * self.xi_x.transpose()));
        let guard = linalg::symmetrize(&(&self.xi_g * self.xi_g.transpose() * sigma_g_sq));
        let params = linalg::symmetrize(&(&self.d_theta_r * sigma_theta * self.d_theta_r.transpose()));
        Ok(state + guard + params)
    }

    /// Covariance map used by the EKF baseline: `D_xR Σ D_xRᵀ`.
    pub fn reset_jacobian_covariance(&self, sigma_x: &Matrix) -> Result<Matrix> {
        self.check_inputs(sigma_x, 0.0, &Matrix::zeros(self.d_theta_r.ncols(), self.d_theta_r.ncols()))?;
        Ok(linalg::symmetrize(&(&self.d_x_r * sigma_x * self.d_x_r.transpose())))
    }

    fn check_inputs(&self, sigma_x: &Matrix, sigma_g_sq: f64, sigma_theta: &Matrix) -> Result<()> {
        let n = self.xi_x.ncols();
        if sigma_x.nrows() != n || sigma_x.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: sigma_x.nrows() });
        }
        let p = self.d_theta_r.ncols();
        if sigma_theta.nrows() != p || sigma_theta.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: sigma_theta.nrows() });
        }
        if !(sigma_g_sq >= 0.0) || !sigma_g_sq.is_finite() {
            return Err(Error::InvalidCovariance("guard variance must be non-negative"));
        }
        linalg::check_covariance(sigma_x, 1e-9, COVARIANCE_PSD_TOL)?;
        if p > 0 {
            linalg::check_covariance(sigma_theta, 1e-9, COVARIANCE_PSD_TOL)?;
        }
        Ok(())
    }
}
