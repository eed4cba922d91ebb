//! Experiment configuration (JSON) and the per-system defaults.

use serde::{Deserialize, Serialize};
use uaskf_core::filter::{FilterConfig, FilterVariant, GaussianBelief, MeasurementModel, ProcessNoise};
use uaskf_core::systems::{self, aslip, circle, AslipParams, BallParams, CircleParams};
use uaskf_core::{HybridSystem, Matrix, ModeId, Vector};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// Absolute error of every state coordinate.
    #[default]
    PerDimAbs,
    /// Euclidean norm of the state error.
    L2,
}

/// How ground-truth trajectories receive process noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseInjection {
    /// No process noise; the truth differs from the nominal model only
    /// through its initial state and environment draw.
    #[default]
    None,
    /// Additive Gaussian noise with covariance `W` after every step.
    PerStep,
    /// `W` read as a rate: covariance `W·dt` after every step.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: String,
    pub n_trials: usize,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub initial_mean: Vec<f64>,
    pub initial_cov_diag: Vec<f64>,
    /// Filter process noise per `dt` step.
    pub process_noise_diag: Vec<f64>,
    pub meas_noise_diag: Vec<f64>,
    pub sigma_g: f64,
    pub sigma_theta_diag: Vec<f64>,
    pub estimators: Vec<String>,
    pub n_samples: usize,
    #[serde(default)]
    pub error_metric: ErrorMetric,
    #[serde(default)]
    pub process_noise_injection: NoiseInjection,
    /// Time past the nominal event at which propagation clouds are compared.
    #[serde(default = "default_settle")]
    pub settle: f64,
    #[serde(default = "default_true")]
    pub write_errors: bool,
    #[serde(default)]
    pub write_curves: bool,
}

fn default_settle() -> f64 {
    0.3
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn default_for(system: &str) -> Option<Self> {
        let base = |system: &str| ExperimentConfig {
            system: system.to_string(),
            n_trials: 1000,
            duration: 1.0,
            dt: 0.01,
            seed: 0,
            initial_mean: vec![],
            initial_cov_diag: vec![],
            process_noise_diag: vec![],
            meas_noise_diag: vec![],
            sigma_g: 0.0,
            sigma_theta_diag: vec![],
            estimators: vec!["SKF".into(), "uaSKF".into()],
            n_samples: 10_000,
            error_metric: ErrorMetric::PerDimAbs,
            process_noise_injection: NoiseInjection::None,
            settle: default_settle(),
            write_errors: true,
            write_curves: false,
        };
        match system {
            "ball2d" => {
                let p = BallParams::default();
                Some(ExperimentConfig {
                    initial_mean: vec![0.0, 3.0, 0.0, -5.0],
                    initial_cov_diag: vec![0.05, 0.05, 0.001, 0.001],
                    process_noise_diag: vec![10.0, 10.0, 1.0, 1.0],
                    meas_noise_diag: vec![1.0, 1.0],
                    sigma_g: p.sigma_ground,
                    sigma_theta_diag: vec![p.sigma_theta],
                    ..base(system)
                })
            }
            "circle_drop" => Some(ExperimentConfig {
                duration: 3.0,
                initial_mean: vec![0.5, 5.0, 0.0, 0.0],
                initial_cov_diag: vec![0.1; 4],
                process_noise_diag: vec![0.1, 0.1, 0.01, 0.01],
                meas_noise_diag: vec![0.1, 0.1],
                sigma_g: CircleParams::default().sigma_radius,
                ..base(system)
            }),
            "aslip" => {
                let p = AslipParams::default();
                let (xt, yt) = p.rest_toe(0.0, 2.5, 0.0);
                Some(ExperimentConfig {
                    duration: 5.0,
                    dt: 0.005,
                    initial_mean: vec![0.0, 2.5, 0.0, xt, yt, 0.0, 0.0, 0.0],
                    initial_cov_diag: vec![1e-6; 8],
                    process_noise_diag: vec![1e-3; 8],
                    meas_noise_diag: vec![0.01; 5],
                    sigma_g: p.sigma_ground,
                    ..base(system)
                })
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let fail = |msg: String| Err(RunError::Config(msg));
        let Some(defaults) = Self::default_for(&self.system) else {
            return fail(format!("unknown system `{}` (expected one of {:?})", self.system, systems::NAMES));
        };
        if self.n_trials < 1 {
            return fail("n_trials must be at least 1".into());
        }
        if !(self.dt > 0.0) || !(self.duration >= self.dt) {
            return fail("need dt > 0 and duration >= dt".into());
        }
        if !(self.settle > 0.0) {
            return fail("settle must be positive".into());
        }
        let checks = [
            ("initial_mean", self.initial_mean.len(), defaults.initial_mean.len()),
            ("initial_cov_diag", self.initial_cov_diag.len(), defaults.initial_cov_diag.len()),
            ("process_noise_diag", self.process_noise_diag.len(), defaults.process_noise_diag.len()),
            ("meas_noise_diag", self.meas_noise_diag.len(), defaults.meas_noise_diag.len()),
            ("sigma_theta_diag", self.sigma_theta_diag.len(), defaults.sigma_theta_diag.len()),
        ];
        for (name, got, expected) in checks {
            if got != expected {
                return fail(format!("{name} has length {got}, expected {expected}"));
            }
        }
        let diagonals = [&self.initial_cov_diag, &self.process_noise_diag, &self.meas_noise_diag, &self.sigma_theta_diag];
        if diagonals.iter().any(|d| d.iter().any(|v| !(*v >= 0.0 && v.is_finite()))) {
            return fail("covariance diagonals must be finite and non-negative".into());
        }
        if self.meas_noise_diag.contains(&0.0) {
            return fail("measurement noise must be positive".into());
        }
        if self.initial_mean.iter().any(|v| !v.is_finite()) {
            return fail("initial_mean must be finite".into());
        }
        if !(self.sigma_g >= 0.0 && self.sigma_g.is_finite()) {
            return fail("sigma_g must be finite and non-negative".into());
        }
        self.variants()?;
        Ok(())
    }

    pub fn variants(&self) -> Result<Vec<FilterVariant>, RunError> {
        if self.estimators.is_empty() {
            return Err(RunError::Config("no estimators selected".into()));
        }
        let mut out = Vec::new();
        for tag in &self.estimators {
            let v = FilterVariant::from_tag(tag).ok_or_else(|| RunError::Config(format!("unknown estimator `{tag}`")))?;
            if out.contains(&v) {
                return Err(RunError::Config(format!("estimator `{tag}` listed twice")));
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// A system built from a config plus what the filters need to run on it.
pub struct Setup {
    pub system: HybridSystem,
    /// Transition whose guard offset and reset parameters are uncertain.
    pub uncertain_transition: usize,
    pub initial: GaussianBelief,
    pub filter: FilterConfig,
}

fn diag(values: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(values))
}

/// Measures the first `k` coordinates.
fn position_selector(k: usize, n: usize) -> Matrix {
    Matrix::from_fn(k, n, |r, c| if r == c { 1.0 } else { 0.0 })
}

pub fn build(cfg: &ExperimentConfig) -> Result<Setup, RunError> {
    cfg.validate()?;
    let (system, uncertain_transition) = match cfg.system.as_str() {
        "ball2d" => {
            let p = BallParams { sigma_ground: cfg.sigma_g, sigma_theta: cfg.sigma_theta_diag[0], ..BallParams::default() };
            (systems::make_bouncing_ball(p), 0)
        }
        "circle_drop" => {
            let p = CircleParams { sigma_radius: cfg.sigma_g, ..CircleParams::default() };
            (systems::make_circle_drop(p), circle::IMPACT)
        }
        "aslip" => {
            let p = AslipParams { sigma_ground: cfg.sigma_g, ..AslipParams::default() };
            (systems::make_aslip(p), aslip::TOUCHDOWN)
        }
        other => return Err(RunError::Config(format!("unknown system `{other}`"))),
    };
    let system = system.map_err(|e| RunError::Config(e.to_string()))?;
    let n = cfg.initial_mean.len();
    let n_modes = system.modes().len();
    let k = cfg.meas_noise_diag.len();
    let initial = GaussianBelief::new(ModeId(0), Vector::from_column_slice(&cfg.initial_mean), diag(&cfg.initial_cov_diag), 0.0);
    let filter = FilterConfig::new(
        ProcessNoise::uniform(n_modes, diag(&cfg.process_noise_diag), cfg.dt),
        MeasurementModel::uniform(n_modes, position_selector(k, n), diag(&cfg.meas_noise_diag)),
    );
    Ok(Setup { system, uncertain_transition, initial, filter })
}
