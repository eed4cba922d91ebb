//! Sampling oracle for uncertainty propagation through hybrid events and the
//! closed-form Gaussian K-L divergence used to score predicted covariances.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::filter::GaussianBelief;
use crate::hybrid::{Environment, HybridSystem, ModeId};
use crate::linalg::{self, Matrix, Vector};

/// Regularization added once to a singular covariance before giving up.
const KL_REGULARIZATION: f64 = 1e-10;
const KL_MIN_EIGENVALUE: f64 = 1e-12;

/// Particles at a common time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    /// One particle per row.
    pub particles: Matrix,
    pub t: f64,
    pub modes: Vec<ModeId>,
    /// Particles dropped because their simulation diverged.
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop every particle at this absolute time.
    Horizon(f64),
    /// Stop at the nominal trajectory's first event time plus `settle`;
    /// every particle must have passed through an event by then.
    AfterNominalEvent { settle: f64 },
}

/// What to sample and how far to propagate it.
pub struct PropagationSpec<'a> {
    pub system: &'a HybridSystem,
    pub initial: GaussianBelief,
    /// Guard-offset standard deviation per transition.
    pub sigma_g: Vec<f64>,
    /// Reset-parameter covariance per transition.
    pub sigma_theta: Vec<Matrix>,
    pub n_samples: usize,
    pub stop: StopRule,
}

impl<'a> PropagationSpec<'a> {
    /// Uses the uncertainties declared on the system's guards and resets.
    pub fn from_system(system: &'a HybridSystem, initial: GaussianBelief, n_samples: usize, stop: StopRule) -> Self {
        Self {
            system,
            initial,
            sigma_g: system.transitions().iter().map(|tr| tr.guard.sigma_g).collect(),
            sigma_theta: system.transitions().iter().map(|tr| tr.reset.sigma_theta.clone()).collect(),
            n_samples,
            stop,
        }
    }

    fn validate(&self) -> Result<()> {
        let n_tr = self.system.transitions().len();
        if self.sigma_g.len() != n_tr || self.sigma_theta.len() != n_tr {
            return Err(Error::DimensionMismatch { expected: n_tr, got: self.sigma_g.len() });
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidArgument("at least two samples are required"));
        }
        if self.sigma_g.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("guard sigma must be non-negative"));
        }
        for (s, tr) in self.sigma_theta.iter().zip(self.system.transitions()) {
            if s.nrows() != tr.reset.n_params() {
                return Err(Error::DimensionMismatch { expected: tr.reset.n_params(), got: s.nrows() });
            }
        }
        match self.stop {
            StopRule::Horizon(t) if !(t > self.initial.t) => Err(Error::InvalidArgument("horizon must lie after the initial time")),
            StopRule::AfterNominalEvent { settle } if !(settle > 0.0) => Err(Error::InvalidArgument("settle time must be positive")),
            _ => self.initial.check(),
        }
    }

    /// Absolute stop time and whether every particle must have an event.
    fn stop_time(&self) -> Result<(f64, bool)> {
        match self.stop {
            StopRule::Horizon(t) => Ok((t, false)),
            StopRule::AfterNominalEvent { settle } => {
                let t_event = nominal_first_event(self.system, &self.initial, 1e3)?.ok_or(Error::MissedEvent(usize::MAX))?;
                Ok((t_event + settle, true))
            }
        }
    }
}

/// Time of the first event of the mean trajectory with the nominal environment,
/// searching up to `limit` seconds ahead.
pub fn nominal_first_event(system: &HybridSystem, initial: &GaussianBelief, limit: f64) -> Result<Option<f64>> {
    let env = Environment::nominal(system);
    let mut t = initial.t;
    let mut x = initial.mean.clone();
    let chunk = 1.0;
    while t - initial.t < limit {
        if let Some(c) = system.detect_event(initial.mode, t, &x, chunk, &env)? {
            return Ok(Some(c.t));
        }
        x = system.flow(initial.mode, t, &x, chunk, false)?.state;
        t += chunk;
    }
    Ok(None)
}

/// Deterministic per-particle random stream derived from `(seed, index)`.
pub fn particle_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Draws initial states, guard offsets and reset parameters and simulates
/// every particle to the stop rule.
pub fn sample_propagate(spec: &PropagationSpec<'_>, seed: u64) -> Result<SampleCloud> {
    spec.validate()?;
    let system = spec.system;
    let (t_stop, require_event) = spec.stop_time()?;
    let dim = spec.initial.mean.len();
    let init_root = linalg::psd_sqrt(&spec.initial.cov);
    let theta_roots: Vec<Matrix> = spec.sigma_theta.iter().map(linalg::psd_sqrt).collect();
    let mut rows: Vec<Vector> = Vec::with_capacity(spec.n_samples);
    let mut modes = Vec::with_capacity(spec.n_samples);
    let mut excluded = 0;
    for i in 0..spec.n_samples {
        let mut rng = particle_rng(seed, i as u64);
        let x0 = &spec.initial.mean + &init_root * standard_normal_vector(&mut rng, dim);
        let mut env = Environment::nominal(system);
        for (k, tr) in system.transitions().iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            env.guard_offsets[k] = spec.sigma_g[k] * z;
            let p = tr.reset.n_params();
            env.thetas[k] = &tr.reset.theta_mean + &theta_roots[k] * standard_normal_vector(&mut rng, p);
        }
        let outcome = system.advance(spec.initial.mode, spec.initial.t, &x0, t_stop - spec.initial.t, &env);
        match outcome {
            Ok(adv) => {
                if require_event && adv.events.is_empty() {
                    return Err(Error::MissedEvent(i));
                }
                rows.push(adv.state);
                modes.push(adv.mode);
            }
            Err(Error::NumericalDivergence { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if excluded * 100 > spec.n_samples {
        return Err(Error::TooManyDiverged { excluded, total: spec.n_samples });
    }
    let particles = Matrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
    Ok(SampleCloud { particles, t: t_stop, modes, excluded })
}

/// Sample mean and unbiased sample covariance of a single-mode cloud.
pub fn empirical_moments(cloud: &SampleCloud) -> Result<GaussianBelief> {
    let n = cloud.particles.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument("at least two particles are required"));
    }
    let mode = cloud.modes[0];
    if cloud.modes.iter().any(|m| *m != mode) {
        return Err(Error::MultimodalCloud);
    }
    let mean = cloud.particles.row_mean().transpose();
    let mut centered = cloud.particles.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok(GaussianBelief { mode, mean, cov: linalg::symmetrize(&cov), t: cloud.t })
}

fn positive_definite(cov: &Matrix) -> Result<Matrix> {
    if linalg::min_eigenvalue(cov) > KL_MIN_EIGENVALUE {
        return Ok(cov.clone());
    }
    let regularized = cov + Matrix::identity(cov.nrows(), cov.ncols()) * KL_REGULARIZATION;
    if linalg::min_eigenvalue(&regularized) > KL_MIN_EIGENVALUE {
        Ok(regularized)
    } else {
        Err(Error::SingularCovariance)
    }
}

/// `KL(G0 ‖ G1)` for multivariate Gaussians.
pub fn kl_divergence(g0: &GaussianBelief, g1: &GaussianBelief) -> Result<f64> {
    let k = g0.mean.len();
    if g1.mean.len() != k || g0.cov.nrows() != k || g1.cov.nrows() != k {
        return Err(Error::DimensionMismatch { expected: k, got: g1.mean.len() });
    }
    let s0 = positive_definite(&g0.cov)?;
    let s1 = positive_definite(&g1.cov)?;
    let c0 = s0.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let c1 = s1.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let trace = c1.solve(&s0).trace();
    let dmu = &g1.mean - &g0.mean;
    let mahalanobis = dmu.dot(&c1.solve(&dmu));
    let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| -> f64 { 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() };
    let kl = 0.5 * (trace + mahalanobis - k as f64 + logdet(&c1) - logdet(&c0));
    Ok(kl.max(0.0))
}
