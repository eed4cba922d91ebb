//! Four-case propagation study: sample clouds through an uncertain event
//! against the saltation-only and uncertainty-aware covariance predictions.

use serde::Serialize;
use uaskf_core::filter::GaussianBelief;
use uaskf_core::hybrid::Environment;
use uaskf_core::linalg::symmetrize;
use uaskf_core::montecarlo::{empirical_moments, kl_divergence, sample_propagate, PropagationSpec, StopRule};
use uaskf_core::{saltation_bundle, Error, EventContext, Matrix};

use crate::config::{build, ExperimentConfig};
use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyCase {
    None,
    GuardOnly,
    ResetOnly,
    Both,
}

impl UncertaintyCase {
    pub const ALL: [UncertaintyCase; 4] = [Self::None, Self::GuardOnly, Self::ResetOnly, Self::Both];

    pub fn label(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::GuardOnly => "guard_only",
            Self::ResetOnly => "reset_only",
            Self::Both => "both",
        }
    }

    fn guard(self) -> bool {
        matches!(self, Self::GuardOnly | Self::Both)
    }

    fn reset(self) -> bool {
        matches!(self, Self::ResetOnly | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub case: UncertaintyCase,
    pub sigma_g: f64,
    pub sigma_theta_diag: Vec<f64>,
    pub n_used: usize,
    pub excluded: usize,
    /// `KL(prediction ‖ empirical)`; `None` when the cloud could not be summarized.
    pub kl_saltation_only: Option<f64>,
    pub kl_uncertainty_aware: Option<f64>,
    /// Same scores with the arguments swapped, `KL(empirical ‖ prediction)`.
    pub kl_saltation_only_reverse: Option<f64>,
    pub kl_uncertainty_aware_reverse: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationReport {
    pub system: String,
    pub n_samples: usize,
    pub t_event: f64,
    pub t_stop: f64,
    pub cases: Vec<CaseResult>,
}

/// Linearization of the nominal trajectory around its first event.
struct Nominal {
    transition: usize,
    t_event: f64,
    t_stop: f64,
    /// Mean at the stop time.
    mean: GaussianBelief,
    /// `A_post Ξ_x A_pre`
    state_map: Matrix,
    /// `A_post Ξ_g`
    guard_map: Matrix,
    /// `A_post D_θR`
    param_map: Matrix,
}

fn linearize_nominal(cfg: &ExperimentConfig, setup: &crate::config::Setup) -> Result<Nominal, RunError> {
    let sys = &setup.system;
    let init = &setup.initial;
    let env = Environment::nominal(sys);
    let t_event = uaskf_core::montecarlo::nominal_first_event(sys, init, 1e3)
        .map_err(RunError::Numerical)?
        .ok_or(RunError::Numerical(Error::MissedEvent(0)))?;
    let t_stop = t_event + cfg.settle;
    let crossing = sys
        .detect_event(init.mode, init.t, &init.mean, t_stop - init.t, &env)
        .map_err(RunError::Numerical)?
        .ok_or(RunError::Numerical(Error::MissedEvent(0)))?;
    let num = RunError::Numerical;
    let a_pre = sys.flow(init.mode, init.t, &init.mean, crossing.t - init.t, true).map_err(num)?.jacobian.unwrap();
    let ctx = EventContext::at_mean(sys, crossing.transition, crossing.t, &crossing.state).map_err(num)?;
    let bundle = saltation_bundle(sys, &ctx).map_err(num)?;
    let to = sys.transitions()[crossing.transition].to;
    if sys.detect_event(to, crossing.t, &ctx.x_post, t_stop - crossing.t, &env).map_err(num)?.is_some() {
        return Err(RunError::Config("settle time reaches a second event of the nominal trajectory".into()));
    }
    let post = sys.flow(to, crossing.t, &ctx.x_post, t_stop - crossing.t, true).map_err(num)?;
    let a_post = post.jacobian.unwrap();
    Ok(Nominal {
        transition: crossing.transition,
        t_event: crossing.t,
        t_stop,
        mean: GaussianBelief::new(to, post.state, Matrix::zeros(0, 0), t_stop),
        state_map: &a_post * &bundle.xi_x * &a_pre,
        guard_map: &a_post * Matrix::from_column_slice(bundle.xi_g.len(), 1, bundle.xi_g.as_slice()),
        param_map: &a_post * &bundle.d_theta_r,
    })
}

pub fn run_propagation_experiment(cfg: &ExperimentConfig) -> Result<PropagationReport, RunError> {
    let setup = build(cfg)?;
    let sys = &setup.system;
    let nominal = linearize_nominal(cfg, &setup)?;
    let k = nominal.transition;
    let tr = &sys.transitions()[k];
    let full_sigma_g = tr.guard.sigma_g;
    let full_sigma_theta = tr.reset.sigma_theta.clone();
    let p = tr.reset.n_params();

    let state_cov = symmetrize(&(&nominal.state_map * &setup.initial.cov * nominal.state_map.transpose()));
    let mut cases = Vec::new();
    for case in UncertaintyCase::ALL {
        let sigma_g = if case.guard() { full_sigma_g } else { 0.0 };
        let sigma_theta = if case.reset() { full_sigma_theta.clone() } else { Matrix::zeros(p, p) };
        let mut spec =
            PropagationSpec::from_system(sys, setup.initial.clone(), cfg.n_samples, StopRule::AfterNominalEvent { settle: cfg.settle });
        for (i, (sg, st)) in spec.sigma_g.iter_mut().zip(spec.sigma_theta.iter_mut()).enumerate() {
            *sg = if i == k { sigma_g } else { 0.0 };
            *st = if i == k { sigma_theta.clone() } else { Matrix::zeros(st.nrows(), st.ncols()) };
        }
        let guard_cov = symmetrize(&(&nominal.guard_map * nominal.guard_map.transpose() * (sigma_g * sigma_g)));
        let param_cov = symmetrize(&(&nominal.param_map * &sigma_theta * nominal.param_map.transpose()));
        let salted = GaussianBelief { cov: state_cov.clone(), ..nominal.mean.clone() };
        let aware = GaussianBelief { cov: &state_cov + guard_cov + param_cov, ..nominal.mean.clone() };

        let mut result = CaseResult {
            case,
            sigma_g,
            sigma_theta_diag: sigma_theta.diagonal().iter().copied().collect(),
            n_used: 0,
            excluded: 0,
            kl_saltation_only: None,
            kl_uncertainty_aware: None,
            kl_saltation_only_reverse: None,
            kl_uncertainty_aware_reverse: None,
            status: "ok".into(),
        };
        let cloud = sample_propagate(&spec, cfg.seed).map_err(RunError::Numerical)?;
        result.n_used = cloud.particles.nrows();
        result.excluded = cloud.excluded;
        let unreached = cloud.modes.iter().filter(|m| **m != nominal.mean.mode).count();
        match empirical_moments(&cloud) {
            Ok(empirical) => {
                let kl = |g: &GaussianBelief| kl_divergence(g, &empirical).map_err(RunError::Numerical);
                result.kl_saltation_only = Some(kl(&salted)?);
                result.kl_uncertainty_aware = Some(kl(&aware)?);
                let rev = |g: &GaussianBelief| kl_divergence(&empirical, g).map_err(RunError::Numerical);
                result.kl_saltation_only_reverse = Some(rev(&salted)?);
                result.kl_uncertainty_aware_reverse = Some(rev(&aware)?);
            }
            Err(Error::MultimodalCloud) => {
                result.status = format!("multimodal cloud: {unreached} of {} particles outside the post-event mode", result.n_used);
            }
            Err(e) => return Err(RunError::Numerical(e)),
        }
        cases.push(result);
    }
    Ok(PropagationReport { system: cfg.system.clone(), n_samples: cfg.n_samples, t_event: nominal.t_event, t_stop: nominal.t_stop, cases })
}
