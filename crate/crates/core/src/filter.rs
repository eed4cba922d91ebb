//! Kalman filtering through hybrid events.
//!
//! All three variants share the mean propagation (flow, reset at mean guard
//! crossings) and differ only in the covariance map applied at an event:
//!
//! | variant | event covariance                                   |
//! |---------|----------------------------------------------------|
//! | EKF     | `D_xR Σ D_xRᵀ`                                     |
//! | SKF     | `Ξ_x Σ Ξ_xᵀ`                                       |
//! | uaSKF   | `Ξ_x Σ Ξ_xᵀ + Ξ_g σ_g² Ξ_gᵀ + D_θR Σ_θ D_θRᵀ`       |
//!
//! Events are triggered by the *mean* estimate reaching a guard of the
//! system's nominal geometry; the filter never sees true impact times.

use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::hybrid::{Environment, HybridSystem, ModeId};
use crate::linalg::{self, Matrix, Vector};
use crate::saltation::{saltation_bundle, EventContext};

/// Largest accepted condition number of the innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterVariant {
    Ekf,
    Skf,
    UaSkf,
}

impl FilterVariant {
    pub const ALL: [FilterVariant; 3] = [FilterVariant::Ekf, FilterVariant::Skf, FilterVariant::UaSkf];

    pub fn tag(self) -> &'static str {
        match self {
            FilterVariant::Ekf => "EKF",
            FilterVariant::Skf => "SKF",
            FilterVariant::UaSkf => "uaSKF",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag().eq_ignore_ascii_case(tag))
    }
}

impl core::fmt::Display for FilterVariant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Mean and covariance of the state estimate in a mode at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mode: ModeId,
    pub mean: Vector,
    pub cov: Matrix,
    pub t: f64,
}

impl GaussianBelief {
    pub fn new(mode: ModeId, mean: Vector, cov: Matrix, t: f64) -> Self {
        Self { mode, mean, cov, t }
    }

    /// Symmetric within 1e-10 and no eigenvalue below -1e-8.
    pub fn check(&self) -> Result<()> {
        if self.cov.nrows() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: self.cov.nrows() });
        }
        linalg::check_covariance(&self.cov, 1e-10, 1e-8)
    }
}

/// Per-mode linear measurement `y = C x + v`, `v ~ N(0, V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    pub c: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl MeasurementModel {
    /// The same model in every mode.
    pub fn uniform(n_modes: usize, c: Matrix, v: Matrix) -> Self {
        Self { c: alloc::vec![c; n_modes], v: alloc::vec![v; n_modes] }
    }
}

/// Per-mode additive process covariance for one full step of length `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessNoise {
    pub w: Vec<Matrix>,
    pub step: f64,
}

impl ProcessNoise {
    pub fn uniform(n_modes: usize, w: Matrix, step: f64) -> Self {
        Self { w: alloc::vec![w; n_modes], step }
    }

    /// `(dt / Δ) W` for a partial step.
    pub fn scaled(&self, mode: ModeId, dt: f64) -> Matrix {
        &self.w[mode.0] * (dt / self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub process_noise: ProcessNoise,
    pub measurement: MeasurementModel,
    /// Upper bound on events (a-priori or a-posteriori) within one step.
    pub max_events: usize,
}

impl FilterConfig {
    pub fn new(process_noise: ProcessNoise, measurement: MeasurementModel) -> Self {
        Self { process_noise, measurement, max_events: 8 }
    }
}

/// A hybrid Kalman filter over a fixed system, variant and configuration.
pub struct HybridFilter<'a> {
    system: &'a HybridSystem,
    variant: FilterVariant,
    config: FilterConfig,
    env: Environment,
}

impl<'a> HybridFilter<'a> {
    pub fn new(system: &'a HybridSystem, variant: FilterVariant, config: FilterConfig) -> Self {
        Self { system, variant, config, env: Environment::nominal(system) }
    }

    pub fn variant(&self) -> FilterVariant {
        self.variant
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    fn smooth_step(&self, belief: &GaussianBelief, dt: f64) -> Result<GaussianBelief> {
        if dt <= 0.0 {
            return Ok(belief.clone());
        }
        let flow = self.system.flow(belief.mode, belief.t, &belief.mean, dt, true)?;
        let a = flow.jacobian.expect("jacobian requested");
        let cov = &a * &belief.cov * a.transpose() + self.config.process_noise.scaled(belief.mode, dt);
        Ok(GaussianBelief { mode: belief.mode, mean: flow.state, cov: linalg::symmetrize(&cov), t: belief.t + dt })
    }

    /// A-priori update within one mode. Fails if the mean meets a guard.
    pub fn predict_smooth(&self, belief: &GaussianBelief, dt: f64) -> Result<GaussianBelief> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("prediction step must be positive"));
        }
        if let Some(c) = self.system.detect_event(belief.mode, belief.t, &belief.mean, dt, &self.env)? {
            return Err(Error::UnexpectedEvent(c.transition));
        }
        self.smooth_step(belief, dt)
    }

    /// Instantaneous event update at `belief.t`: mean through the reset,
    /// covariance through the variant's event map.
    pub fn event_update(&self, belief: &GaussianBelief, transition: usize) -> Result<GaussianBelief> {
        let tr = self.system.transition(transition)?;
        if tr.from != belief.mode {
            return Err(Error::InvalidArgument("transition does not leave the belief's mode"));
        }
        let ctx = EventContext::at_mean(self.system, transition, belief.t, &belief.mean)?;
        let bundle = saltation_bundle(self.system, &ctx)?;
        let p = tr.reset.n_params();
        let cov = match self.variant {
            FilterVariant::Ekf => bundle.reset_jacobian_covariance(&belief.cov)?,
            FilterVariant::Skf => bundle.propagate_covariance(&belief.cov, 0.0, &Matrix::zeros(p, p))?,
            FilterVariant::UaSkf => {
                let sigma_g = tr.guard.sigma_g;
                bundle.propagate_covariance(&belief.cov, sigma_g * sigma_g, &tr.reset.sigma_theta)?
            }
        };
        Ok(GaussianBelief { mode: tr.to, mean: ctx.x_post, cov, t: belief.t })
    }

    /// A-priori update over `dt`, splitting the step at every guard the mean
    /// reaches.
    pub fn hybrid_predict(&self, belief: &GaussianBelief, dt: f64) -> Result<GaussianBelief> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("prediction step must be positive"));
        }
        let t_end = belief.t + dt;
        let mut current = belief.clone();
        let mut events = 0;
        loop {
            let remaining = t_end - current.t;
            if remaining <= 0.0 {
                break;
            }
            match self.system.detect_event(current.mode, current.t, &current.mean, remaining, &self.env)? {
                None => {
                    current = self.smooth_step(&current, remaining)?;
                    break;
                }
                Some(c) => {
                    events += 1;
                    if events > self.config.max_events {
                        return Err(Error::ZenoSuspicion(self.config.max_events));
                    }
                    let mut before = self.smooth_step(&current, c.t - current.t)?;
                    before.mean = c.state;
                    before.t = c.t;
                    current = self.event_update(&before, c.transition)?;
                }
            }
        }
        current.t = t_end;
        Ok(current)
    }

    /// A-posteriori update with measurement `y`.
    pub fn measurement_update(&self, belief: &GaussianBelief, y: &Vector) -> Result<GaussianBelief> {
        let mode = belief.mode.0;
        let c = &self.config.measurement.c[mode];
        let v = &self.config.measurement.v[mode];
        if c.ncols() != belief.mean.len() {
            return Err(Error::DimensionMismatch { expected: belief.mean.len(), got: c.ncols() });
        }
        if y.len() != c.nrows() {
            return Err(Error::DimensionMismatch { expected: c.nrows(), got: y.len() });
        }
        let s = linalg::symmetrize(&(c * &belief.cov * c.transpose() + v));
        let eig = SymmetricEigen::new(s.clone()).eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(cond <= MAX_INNOVATION_CONDITION) {
            return Err(Error::SingularInnovation(cond));
        }
        let pct = &belief.cov * c.transpose();
        let chol = s.cholesky().ok_or(Error::SingularInnovation(cond))?;
        // K = P Cᵀ S⁻¹, solved as S Kᵀ = C P.
        let gain = chol.solve(&pct.transpose()).transpose();
        let innovation = y - c * &belief.mean;
        let mean = &belief.mean + &gain * innovation;
        let cov = &belief.cov - &gain * c * &belief.cov;
        Ok(GaussianBelief { mode: belief.mode, mean, cov: linalg::symmetrize(&cov), t: belief.t })
    }

    /// Applies the event update when the posterior mean lies in a guard it is
    /// moving into (`g ≤ 0` and `D_xg f + D_tg < -tol`). Each transition fires
    /// at most once per call, so contradictory guards cannot cycle.
    pub fn posterior_guard_apply(&self, belief: &GaussianBelief) -> Result<GaussianBelief> {
        let tol = self.system.tolerances.transversality;
        let mut current = belief.clone();
        let mut fired: Vec<usize> = Vec::new();
        loop {
            let hit = self.system.outgoing(current.mode).find(|&i| {
                !fired.contains(&i)
                    && self.system.guard_value(i, current.t, &current.mean, &self.env) <= 0.0
                    && self.system.normal_velocity(i, current.t, &current.mean, &self.env.thetas[i]) < -tol
            });
            match hit {
                Some(i) => {
                    current = self.event_update(&current, i)?;
                    fired.push(i);
                }
                None => return Ok(current),
            }
        }
    }

    /// Runs predict / update / posterior-guard steps over a measurement
    /// stream. `None` entries are prediction-only steps.
    pub fn run(&self, initial: &GaussianBelief, measurements: &[(f64, Option<Vector>)]) -> Result<Vec<GaussianBelief>> {
        let mut belief = initial.clone();
        let mut out = Vec::with_capacity(measurements.len());
        for (t, y) in measurements {
            belief = self.hybrid_predict(&belief, t - belief.t)?;
            if let Some(y) = y {
                belief = self.measurement_update(&belief, y)?;
                belief = self.posterior_guard_apply(&belief)?;
            }
            out.push(belief.clone());
        }
        Ok(out)
    }
}

/// Convenience wrapper around [`HybridFilter::run`].
pub fn run_filter(
    system: &HybridSystem,
    variant: FilterVariant,
    initial: &GaussianBelief,
    measurements: &[(f64, Option<Vector>)],
    config: &FilterConfig,
) -> Result<Vec<GaussianBelief>> {
    HybridFilter::new(system, variant, config.clone()).run(initial, measurements)
}
