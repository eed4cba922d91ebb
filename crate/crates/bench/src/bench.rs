//! Monte Carlo filter benchmark: per-trial ground truth, identical measurement
//! streams for every estimator, and paired statistics.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use uaskf_core::filter::{FilterVariant, GaussianBelief, HybridFilter};
use uaskf_core::hybrid::Environment;
use uaskf_core::linalg::psd_sqrt;
use uaskf_core::montecarlo::particle_rng;
use uaskf_core::stats::{median, sign_test};
use uaskf_core::{HybridSystem, Matrix, ModeId, Vector};

use crate::config::{build, ErrorMetric, ExperimentConfig, NoiseInjection, Setup};
use crate::RunError;

/// Benchmarks abort when more trials than this fraction fail.
pub const MAX_FAILED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial: usize,
    pub estimator: FilterVariant,
    /// Mean over steps and state coordinates of the squared error.
    pub mse: f64,
    /// Steps × columns (state coordinates, or one column for the L2 metric).
    pub per_step_abs_error: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub estimator: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub system: String,
    pub n_trials: usize,
    pub baseline: Option<String>,
    pub candidate: Option<String>,
    pub median_mse_improvement_pct: Option<f64>,
    pub peak_avg_error_improvement_pct: Option<f64>,
    pub peak_time: Option<f64>,
    pub sign_test_p: Option<f64>,
    /// Trials where the candidate's MSE is lower / higher than the baseline's.
    pub n_candidate_better: usize,
    pub n_baseline_better: usize,
    /// Earliest and latest first-event time across trials.
    pub first_impact_t: Option<f64>,
    pub last_impact_t: Option<f64>,
    /// Improvement of the trial- and time-averaged error per column.
    pub per_dim_improvement_pct: Vec<f64>,
    pub failures: Vec<TrialFailure>,
    pub times: Vec<f64>,
    /// Estimator tag → steps × columns of trial-averaged absolute error.
    pub mean_error_curves: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub reports: Vec<TrialReport>,
    pub summary: BenchmarkSummary,
}

/// One simulated trial: truth at every step and the measurements taken.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub times: Vec<f64>,
    pub truth: Vec<Vector>,
    pub measurements: Vec<(f64, Option<Vector>)>,
    pub first_event: Option<f64>,
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Applies resets for guards the state sits in while still moving into them
/// (noise can push the truth across a guard between steps).
fn settle_guards(sys: &HybridSystem, mode: &mut ModeId, x: &mut Vector, t: f64, env: &Environment, events: &mut Vec<f64>) {
    let tol = sys.tolerances.transversality;
    let mut fired = Vec::new();
    while let Some(i) = sys
        .outgoing(*mode)
        .find(|&i| !fired.contains(&i) && sys.guard_value(i, t, x, env) <= 0.0 && sys.normal_velocity(i, t, x, &env.thetas[i]) < -tol)
    {
        let tr = &sys.transitions()[i];
        *x = tr.reset.apply(t, x, &env.thetas[i]);
        *mode = tr.to;
        events.push(t);
        fired.push(i);
    }
}

/// Draws the trial's initial state and environment and simulates the truth
/// and its measurements. Every random draw comes from the `(seed, trial)`
/// stream, so trials are independent of each other and of execution order.
pub fn simulate_trial(cfg: &ExperimentConfig, setup: &Setup, trial: usize) -> Result<TrialData, RunError> {
    let sys = &setup.system;
    let mut rng = particle_rng(cfg.seed, trial as u64);
    let n = setup.initial.mean.len();
    let mut x = &setup.initial.mean + psd_sqrt(&setup.initial.cov) * normal_vector(&mut rng, n);
    let mut env = Environment::nominal(sys);
    let k = setup.uncertain_transition;
    let tr = &sys.transitions()[k];
    let z: f64 = StandardNormal.sample(&mut rng);
    env.guard_offsets[k] = tr.guard.sigma_g * z;
    env.thetas[k] = &tr.reset.theta_mean + psd_sqrt(&tr.reset.sigma_theta) * normal_vector(&mut rng, tr.reset.n_params());

    let steps = (cfg.duration / cfg.dt).round() as usize;
    let w = Matrix::from_diagonal(&Vector::from_column_slice(&cfg.process_noise_diag));
    let w_root = match cfg.process_noise_injection {
        NoiseInjection::None => None,
        NoiseInjection::PerStep => Some(psd_sqrt(&w)),
        NoiseInjection::Continuous => Some(psd_sqrt(&(w * cfg.dt))),
    };
    let c = &setup.filter.measurement.c[0];
    let v_root = psd_sqrt(&setup.filter.measurement.v[0]);

    let mut mode = setup.initial.mode;
    let mut t = 0.0;
    let mut events = Vec::new();
    let mut data = TrialData {
        times: Vec::with_capacity(steps),
        truth: Vec::with_capacity(steps),
        measurements: Vec::with_capacity(steps),
        first_event: None,
    };
    for step in 1..=steps {
        let t_next = step as f64 * cfg.dt;
        let adv = sys.advance(mode, t, &x, t_next - t, &env).map_err(RunError::Numerical)?;
        events.extend(adv.events.iter().map(|e| e.t));
        mode = adv.mode;
        x = adv.state;
        t = t_next;
        if let Some(root) = &w_root {
            x += root * normal_vector(&mut rng, n);
            settle_guards(sys, &mut mode, &mut x, t, &env, &mut events);
        }
        let y = c * &x + &v_root * normal_vector(&mut rng, c.nrows());
        data.times.push(t);
        data.truth.push(x.clone());
        data.measurements.push((t, Some(y)));
    }
    data.first_event = events.first().copied();
    Ok(data)
}

fn trial_report(
    trial: usize,
    estimator: FilterVariant,
    truth: &[Vector],
    estimates: &[GaussianBelief],
    metric: ErrorMetric,
) -> TrialReport {
    let n = truth[0].len();
    let steps = truth.len();
    let mut sq = 0.0;
    let cols = match metric {
        ErrorMetric::PerDimAbs => n,
        ErrorMetric::L2 => 1,
    };
    let mut err = Matrix::zeros(steps, cols);
    for (k, (x, b)) in truth.iter().zip(estimates).enumerate() {
        let e = &b.mean - x;
        sq += e.norm_squared();
        match metric {
            ErrorMetric::PerDimAbs => {
                for d in 0..n {
                    err[(k, d)] = e[d].abs();
                }
            }
            ErrorMetric::L2 => err[(k, 0)] = e.norm(),
        }
    }
    TrialReport { trial, estimator, mse: sq / (steps * n) as f64, per_step_abs_error: err }
}

pub fn run_filter_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkOutput, RunError> {
    let setup = build(cfg)?;
    let variants = cfg.variants()?;
    let filters: Vec<HybridFilter<'_>> = variants.iter().map(|v| HybridFilter::new(&setup.system, *v, setup.filter.clone())).collect();

    let mut reports = Vec::with_capacity(cfg.n_trials * variants.len());
    let mut failures = Vec::new();
    let mut failed_trials = 0;
    let mut first_events = Vec::new();
    let mut times = Vec::new();
    for trial in 0..cfg.n_trials {
        let data = simulate_trial(cfg, &setup, trial)?;
        if let Some(t) = data.first_event {
            first_events.push(t);
        }
        let mut trial_reports = Vec::with_capacity(filters.len());
        let mut failed = false;
        for f in &filters {
            match f.run(&setup.initial, &data.measurements) {
                Ok(est) => trial_reports.push(trial_report(trial, f.variant(), &data.truth, &est, cfg.error_metric)),
                Err(e) => {
                    failed = true;
                    failures.push(TrialFailure { trial, estimator: f.variant().tag().to_string(), error: e.to_string() });
                }
            }
        }
        if failed {
            failed_trials += 1;
            if failed_trials as f64 > MAX_FAILED_FRACTION * cfg.n_trials as f64 {
                return Err(RunError::TooManyFailures { failed: failed_trials, total: cfg.n_trials, first: failures[0].error.clone() });
            }
        } else {
            reports.extend(trial_reports);
        }
        times = data.times;
    }
    let summary = summarize(cfg, &variants, &reports, failures, &first_events, &times);
    Ok(BenchmarkOutput { reports, summary })
}

fn report_for(reports: &[TrialReport], v: FilterVariant) -> Vec<&TrialReport> {
    reports.iter().filter(|r| r.estimator == v).collect()
}

fn mean_curve(reports: &[&TrialReport]) -> Option<Matrix> {
    let first = reports.first()?;
    let mut acc = Matrix::zeros(first.per_step_abs_error.nrows(), first.per_step_abs_error.ncols());
    for r in reports {
        acc += &r.per_step_abs_error;
    }
    Some(acc / reports.len() as f64)
}

fn improvement(base: f64, cand: f64) -> f64 {
    (base - cand) / base * 100.0
}

pub fn summarize(
    cfg: &ExperimentConfig,
    variants: &[FilterVariant],
    reports: &[TrialReport],
    failures: Vec<TrialFailure>,
    first_events: &[f64],
    times: &[f64],
) -> BenchmarkSummary {
    let curves: Vec<(FilterVariant, Matrix)> =
        variants.iter().filter_map(|v| mean_curve(&report_for(reports, *v)).map(|c| (*v, c))).collect();
    let mut summary = BenchmarkSummary {
        system: cfg.system.clone(),
        n_trials: cfg.n_trials,
        baseline: None,
        candidate: None,
        median_mse_improvement_pct: None,
        peak_avg_error_improvement_pct: None,
        peak_time: None,
        sign_test_p: None,
        n_candidate_better: 0,
        n_baseline_better: 0,
        first_impact_t: first_events.iter().copied().reduce(f64::min),
        last_impact_t: first_events.iter().copied().reduce(f64::max),
        per_dim_improvement_pct: vec![],
        failures,
        times: times.to_vec(),
        mean_error_curves: curves
            .iter()
            .map(|(v, c)| (v.tag().to_string(), c.row_iter().map(|r| r.iter().copied().collect()).collect()))
            .collect(),
    };
    let (base, cand) = (FilterVariant::Skf, FilterVariant::UaSkf);
    if !(variants.contains(&base) && variants.contains(&cand)) {
        return summary;
    }
    summary.baseline = Some(base.tag().into());
    summary.candidate = Some(cand.tag().into());
    let b = report_for(reports, base);
    let c = report_for(reports, cand);
    if b.is_empty() {
        return summary;
    }
    let diffs: Vec<f64> = b.iter().zip(&c).map(|(rb, rc)| rb.mse - rc.mse).collect();
    let rel: Vec<f64> = b.iter().zip(&c).map(|(rb, rc)| if rb.mse == rc.mse { 0.0 } else { improvement(rb.mse, rc.mse) }).collect();
    summary.median_mse_improvement_pct = median(&rel);
    summary.n_candidate_better = diffs.iter().filter(|d| **d > 0.0).count();
    summary.n_baseline_better = diffs.iter().filter(|d| **d < 0.0).count();
    summary.sign_test_p = Some(sign_test(&diffs).unwrap_or(1.0));

    let curve = |v: FilterVariant| curves.iter().find(|(w, _)| *w == v).map(|(_, c)| c);
    if let (Some(cb), Some(cc)) = (curve(base), curve(cand)) {
        let mut best: Option<(f64, usize)> = None;
        for k in 0..cb.nrows() {
            let (mb, mc) = (cb.row(k).mean(), cc.row(k).mean());
            let imp = if mb == mc { 0.0 } else { improvement(mb, mc) };
            if best.is_none_or(|(v, _)| imp > v) {
                best = Some((imp, k));
            }
        }
        if let Some((imp, k)) = best {
            summary.peak_avg_error_improvement_pct = Some(imp);
            summary.peak_time = times.get(k).copied();
        }
        summary.per_dim_improvement_pct = (0..cb.ncols())
            .map(|d| {
                let (mb, mc) = (cb.column(d).mean(), cc.column(d).mean());
                if mb == mc {
                    0.0
                } else {
                    improvement(mb, mc)
                }
            })
            .collect();
    }
    summary
}
