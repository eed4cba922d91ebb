//! Event-driven hybrid dynamical systems: modes with vector fields, guarded
//! transitions with parameterized resets, fixed-step RK4 flows with
//! variational equations, event localization and ground-truth simulation.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, RowVector, Vector};

/// Index of a discrete mode within its owning [`HybridSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId(pub usize);

type FieldFn = dyn Fn(f64, &Vector) -> Vector + Send + Sync;
type FieldJacobianFn = dyn Fn(f64, &Vector) -> Matrix + Send + Sync;
type GuardFn = dyn Fn(f64, &Vector, &Vector) -> f64 + Send + Sync;
type GuardGradFn = dyn Fn(f64, &Vector, &Vector) -> RowVector + Send + Sync;
type ResetFn = dyn Fn(f64, &Vector, &Vector) -> Vector + Send + Sync;
type ResetJacobianFn = dyn Fn(f64, &Vector, &Vector) -> Matrix + Send + Sync;

/// Numerical settings for integration and event handling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest RK4 step.
    pub h_max: f64,
    /// Bisection stops once the guard value is this close to zero.
    pub guard_zero: f64,
    /// Minimum `|D_xg f + D_tg|` at a crossing.
    pub transversality: f64,
    pub max_bisection: usize,
    pub max_events_per_step: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { h_max: 1e-3, guard_zero: 1e-10, transversality: 1e-8, max_bisection: 80, max_events_per_step: 8 }
    }
}

/// A continuous mode: a time-varying vector field on an `dim`-dimensional domain.
pub struct Mode {
    name: String,
    dim: usize,
    field: Box<FieldFn>,
    jacobian: Option<Box<FieldJacobianFn>>,
}

impl Mode {
    pub fn new<F>(name: impl Into<String>, dim: usize, field: F) -> Self
    where
        F: Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    {
        Self { name: name.into(), dim, field: Box::new(field), jacobian: None }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(f64, &Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jacobian = Some(Box::new(jacobian));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn field(&self, t: f64, x: &Vector) -> Vector {
        (self.field)(t, x)
    }

    /// `D_xF`, analytic when supplied, otherwise central differences.
    pub fn jacobian(&self, t: f64, x: &Vector) -> Matrix {
        match &self.jacobian {
            Some(j) => j(t, x),
            None => self.fd_jacobian(t, x),
        }
    }

    pub fn fd_jacobian(&self, t: f64, x: &Vector) -> Matrix {
        linalg::fd_jacobian(|y| (self.field)(t, y), x)
    }
}

/// Guard function `g(t, x; θ)`; the transition fires when `g - δ_g ≤ 0`.
///
/// `θ` is the reset parameter vector of the owning transition, so guards whose
/// geometry shares a parameter with the reset (the ball's ground angle) see
/// the same draw.
pub struct Guard {
    value: Box<GuardFn>,
    grad_x: Option<Box<GuardGradFn>>,
    grad_t: Option<Box<GuardFn>>,
    /// Standard deviation of the guard offset along its normal.
    pub sigma_g: f64,
}

impl Guard {
    pub fn new<G>(value: G) -> Self
    where
        G: Fn(f64, &Vector, &Vector) -> f64 + Send + Sync + 'static,
    {
        Self { value: Box::new(value), grad_x: None, grad_t: None, sigma_g: 0.0 }
    }

    pub fn with_grad_x<G>(mut self, grad: G) -> Self
    where
        G: Fn(f64, &Vector, &Vector) -> RowVector + Send + Sync + 'static,
    {
        self.grad_x = Some(Box::new(grad));
        self
    }

    pub fn with_grad_t<G>(mut self, grad: G) -> Self
    where
        G: Fn(f64, &Vector, &Vector) -> f64 + Send + Sync + 'static,
    {
        self.grad_t = Some(Box::new(grad));
        self
    }

    pub fn with_sigma(mut self, sigma_g: f64) -> Self {
        self.sigma_g = sigma_g;
        self
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad_x.is_some()
    }

    pub fn value(&self, t: f64, x: &Vector, theta: &Vector) -> f64 {
        (self.value)(t, x, theta)
    }

    pub fn grad_x(&self, t: f64, x: &Vector, theta: &Vector) -> RowVector {
        match &self.grad_x {
            Some(g) => g(t, x, theta),
            None => linalg::fd_gradient(|y| (self.value)(t, y, theta), x),
        }
    }

    pub fn grad_t(&self, t: f64, x: &Vector, theta: &Vector) -> f64 {
        match &self.grad_t {
            Some(g) => g(t, x, theta),
            None => linalg::fd_derivative(|s| (self.value)(s, x, theta), t),
        }
    }
}

/// Parameterized reset map `R(t, x, θ)` with its Jacobians and the
/// distribution of `θ`.
pub struct Reset {
    apply: Box<ResetFn>,
    jac_x: Option<Box<ResetJacobianFn>>,
    jac_t: Option<Box<ResetFn>>,
    jac_theta: Option<Box<ResetJacobianFn>>,
    pub theta_mean: Vector,
    pub sigma_theta: Matrix,
}

impl Reset {
    pub fn new<R>(apply: R) -> Self
    where
        R: Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            apply: Box::new(apply),
            jac_x: None,
            jac_t: None,
            jac_theta: None,
            theta_mean: Vector::zeros(0),
            sigma_theta: Matrix::zeros(0, 0),
        }
    }

    /// Identity reset between modes of equal dimension.
    pub fn identity(dim: usize) -> Self {
        Self::new(|_, x, _| x.clone())
            .with_jac_x(move |_, _, _| Matrix::identity(dim, dim))
            .with_jac_t(move |_, _, _| Vector::zeros(dim))
            .with_jac_theta(move |_, _, _| Matrix::zeros(dim, 0))
    }

    pub fn with_jac_x<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &Vector, &Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jac_x = Some(Box::new(jac));
        self
    }

    pub fn with_jac_t<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.jac_t = Some(Box::new(jac));
        self
    }

    pub fn with_jac_theta<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &Vector, &Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jac_theta = Some(Box::new(jac));
        self
    }

    pub fn with_parameters(mut self, theta_mean: Vector, sigma_theta: Matrix) -> Self {
        self.theta_mean = theta_mean;
        self.sigma_theta = sigma_theta;
        self
    }

    pub fn n_params(&self) -> usize {
        self.theta_mean.len()
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.jac_x.is_some() && self.jac_theta.is_some()
    }

    pub fn apply(&self, t: f64, x: &Vector, theta: &Vector) -> Vector {
        (self.apply)(t, x, theta)
    }

    pub fn jac_x(&self, t: f64, x: &Vector, theta: &Vector) -> Matrix {
        match &self.jac_x {
            Some(j) => j(t, x, theta),
            None => linalg::fd_jacobian(|y| (self.apply)(t, y, theta), x),
        }
    }

    pub fn jac_t(&self, t: f64, x: &Vector, theta: &Vector) -> Vector {
        match &self.jac_t {
            Some(j) => j(t, x, theta),
            None => linalg::fd_vector_derivative(|s| (self.apply)(s, x, theta), t),
        }
    }

    pub fn jac_theta(&self, t: f64, x: &Vector, theta: &Vector) -> Matrix {
        match &self.jac_theta {
            Some(j) => j(t, x, theta),
            None if theta.is_empty() => Matrix::zeros((self.apply)(t, x, theta).len(), 0),
            None => linalg::fd_jacobian(|p| (self.apply)(t, x, p), theta),
        }
    }
}

/// A directed edge of the mode graph.
pub struct Transition {
    pub from: ModeId,
    pub to: ModeId,
    pub guard: Guard,
    pub reset: Reset,
}

/// Per-realization environment: a guard offset and reset parameter vector for
/// every transition, held fixed along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub guard_offsets: Vec<f64>,
    pub thetas: Vec<Vector>,
}

impl Environment {
    /// Zero offsets and mean reset parameters.
    pub fn nominal(system: &HybridSystem) -> Self {
        Self {
            guard_offsets: alloc::vec![0.0; system.transitions.len()],
            thetas: system.transitions.iter().map(|tr| tr.reset.theta_mean.clone()).collect(),
        }
    }
}

/// Result of [`HybridSystem::flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub state: Vector,
    /// Flow-map Jacobian, when requested.
    pub jacobian: Option<Matrix>,
}

/// A located guard crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub transition: usize,
    pub t: f64,
    pub state: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub transition: usize,
    pub pre: Vector,
    pub post: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub mode: ModeId,
    pub state: Vector,
}

/// Recorded ground-truth trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridTrajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<EventRecord>,
}

/// Outcome of advancing a hybrid state over a fixed time span.
#[derive(Debug, Clone, PartialEq)]
pub struct Advance {
    pub mode: ModeId,
    pub state: Vector,
    pub events: Vec<EventRecord>,
}

/// Mode graph with fields, guards and resets.
pub struct HybridSystem {
    modes: Vec<Mode>,
    transitions: Vec<Transition>,
    pub tolerances: Tolerances,
}

impl HybridSystem {
    pub fn new(modes: Vec<Mode>, transitions: Vec<Transition>) -> Result<Self> {
        for (i, tr) in transitions.iter().enumerate() {
            if tr.from.0 >= modes.len() || tr.to.0 >= modes.len() {
                return Err(Error::InvalidArgument("transition references an unknown mode"));
            }
            if transitions[..i].iter().any(|other| other.from == tr.from && other.to == tr.to) {
                return Err(Error::InvalidArgument("duplicate transition"));
            }
            let p = tr.reset.theta_mean.len();
            if tr.reset.sigma_theta.nrows() != p || tr.reset.sigma_theta.ncols() != p {
                return Err(Error::DimensionMismatch { expected: p, got: tr.reset.sigma_theta.nrows() });
            }
            linalg::check_covariance(&tr.reset.sigma_theta, 1e-12, 1e-10)?;
            if !(tr.guard.sigma_g >= 0.0) {
                return Err(Error::InvalidArgument("guard sigma must be non-negative"));
            }
        }
        Ok(Self { modes, transitions, tolerances: Tolerances::default() })
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, id: ModeId) -> Result<&Mode> {
        self.modes.get(id.0).ok_or(Error::InvalidArgument("unknown mode"))
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, index: usize) -> Result<&Transition> {
        self.transitions.get(index).ok_or(Error::InvalidArgument("unknown transition"))
    }

    /// Indices of transitions leaving `mode`.
    pub fn outgoing(&self, mode: ModeId) -> impl Iterator<Item = usize> + '_ {
        self.transitions.iter().enumerate().filter(move |(_, tr)| tr.from == mode).map(|(i, _)| i)
    }

    fn check_dim(&self, mode: ModeId, x: &Vector) -> Result<&Mode> {
        let m = self.mode(mode)?;
        if x.len() != m.dim {
            return Err(Error::DimensionMismatch { expected: m.dim, got: x.len() });
        }
        Ok(m)
    }

    pub fn eval_field(&self, mode: ModeId, t: f64, x: &Vector) -> Result<Vector> {
        Ok(self.check_dim(mode, x)?.field(t, x))
    }

    /// Guard value including the environment's offset: `g(t, x; θ) - δ_g`.
    pub fn guard_value(&self, transition: usize, t: f64, x: &Vector, env: &Environment) -> f64 {
        let tr = &self.transitions[transition];
        tr.guard.value(t, x, &env.thetas[transition]) - env.guard_offsets[transition]
    }

    /// `D_xg f + D_tg` for `transition` at `(t, x)`.
    pub fn normal_velocity(&self, transition: usize, t: f64, x: &Vector, theta: &Vector) -> f64 {
        let tr = &self.transitions[transition];
        let f = self.modes[tr.from.0].field(t, x);
        (tr.guard.grad_x(t, x, theta) * f)[0] + tr.guard.grad_t(t, x, theta)
    }

    fn rk4_step(&self, mode: &Mode, t: f64, x: &Vector, h: f64, a: Option<&Matrix>) -> (Vector, Option<Matrix>) {
        let half = 0.5 * h;
        let k1 = mode.field(t, x);
        let x2 = x + &k1 * half;
        let k2 = mode.field(t + half, &x2);
        let x3 = x + &k2 * half;
        let k3 = mode.field(t + half, &x3);
        let x4 = x + &k3 * h;
        let k4 = mode.field(t + h, &x4);
        let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        let next_a = a.map(|a| {
            let l1 = mode.jacobian(t, x) * a;
            let l2 = mode.jacobian(t + half, &x2) * (a + &l1 * half);
            let l3 = mode.jacobian(t + half, &x3) * (a + &l2 * half);
            let l4 = mode.jacobian(t + h, &x4) * (a + &l3 * h);
            a + (l1 + (l2 + l3) * 2.0 + l4) * (h / 6.0)
        });
        (next, next_a)
    }

    fn substeps(&self, dt: f64) -> (usize, f64) {
        if dt <= 0.0 {
            return (0, 0.0);
        }
        let n = (dt / self.tolerances.h_max).ceil().max(1.0) as usize;
        (n, dt / n as f64)
    }

    /// Flows `x0` for `dt` seconds in `mode` with fixed-step RK4, optionally
    /// integrating the variational equations for the flow Jacobian.
    pub fn flow(&self, mode: ModeId, t0: f64, x0: &Vector, dt: f64, want_jacobian: bool) -> Result<Flow> {
        let m = self.check_dim(mode, x0)?;
        if !(dt >= 0.0) {
            return Err(Error::InvalidArgument("flow duration must be non-negative"));
        }
        let (n, h) = self.substeps(dt);
        let mut x = x0.clone();
        let mut a = want_jacobian.then(|| Matrix::identity(m.dim, m.dim));
        for k in 0..n {
            let t = t0 + k as f64 * h;
            let (nx, na) = self.rk4_step(m, t, &x, h, a.as_ref());
            if nx.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalDivergence { t: t + h });
            }
            x = nx;
            a = na;
        }
        Ok(Flow { state: x, jacobian: a })
    }

    /// Finds the earliest guard crossing of the flow from `(t0, x0)` within `dt`.
    ///
    /// A crossing is a change from `g > 0` to `g ≤ 0` between consecutive
    /// integration nodes, so guards that start on or below zero only become
    /// active once the flow has left them. The crossing is localized by
    /// bisection on the re-integrated flow.
    pub fn detect_event(&self, mode: ModeId, t0: f64, x0: &Vector, dt: f64, env: &Environment) -> Result<Option<Crossing>> {
        let m = self.check_dim(mode, x0)?;
        let outgoing: Vec<usize> = self.outgoing(mode).collect();
        if outgoing.is_empty() || dt <= 0.0 {
            return Ok(None);
        }
        let guards = |t: f64, x: &Vector| -> Vec<f64> { outgoing.iter().map(|&i| self.guard_value(i, t, x, env)).collect() };
        let (n, h) = self.substeps(dt);
        let mut x = x0.clone();
        let mut prev = guards(t0, &x);
        for k in 0..n {
            let t = t0 + k as f64 * h;
            let (nx, _) = self.rk4_step(m, t, &x, h, None);
            if nx.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalDivergence { t: t + h });
            }
            let cur = guards(t + h, &nx);
            let armed: Vec<usize> = (0..outgoing.len()).filter(|&j| prev[j] > 0.0 && cur[j] <= 0.0).collect();
            if !armed.is_empty() {
                let crossing = self.bisect(m, t, &x, h, &outgoing, &armed, env);
                let denom = self.normal_velocity(crossing.transition, crossing.t, &crossing.state, &env.thetas[crossing.transition]);
                if denom.abs() < self.tolerances.transversality {
                    return Err(Error::GrazingContact { transition: crossing.transition, t: crossing.t, denom });
                }
                return Ok(Some(crossing));
            }
            x = nx;
            prev = cur;
        }
        Ok(None)
    }

    #[allow(clippy::too_many_arguments)]
    fn bisect(&self, m: &Mode, t_lo: f64, x_lo: &Vector, h: f64, outgoing: &[usize], armed: &[usize], env: &Environment) -> Crossing {
        let state_at = |tau: f64| self.rk4_step(m, t_lo, x_lo, tau, None).0;
        let lowest =
            |t: f64, x: &Vector| -> (usize, f64) {
                armed
                    .iter()
                    .map(|&j| (outgoing[j], self.guard_value(outgoing[j], t, x, env)))
                    .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
            };
        let (mut lo, mut hi) = (0.0, h);
        let mut x_hi = state_at(h);
        let (mut which, mut g_hi) = lowest(t_lo + h, &x_hi);
        for _ in 0..self.tolerances.max_bisection {
            if g_hi.abs() < self.tolerances.guard_zero {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let x_mid = state_at(mid);
            let (j, g_mid) = lowest(t_lo + mid, &x_mid);
            if g_mid <= 0.0 {
                hi = mid;
                x_hi = x_mid;
                which = j;
                g_hi = g_mid;
            } else {
                lo = mid;
            }
        }
        Crossing { transition: which, t: t_lo + hi, state: x_hi }
    }

    /// Advances `(mode, x0)` from `t0` to `t0 + dt`, applying every reset met
    /// along the way with the environment's parameters.
    pub fn advance(&self, mode: ModeId, t0: f64, x0: &Vector, dt: f64, env: &Environment) -> Result<Advance> {
        let t_end = t0 + dt;
        let mut mode = mode;
        let mut t = t0;
        let mut x = x0.clone();
        let mut events = Vec::new();
        loop {
            let remaining = t_end - t;
            if remaining <= 0.0 {
                break;
            }
            match self.detect_event(mode, t, &x, remaining, env)? {
                None => {
                    x = self.flow(mode, t, &x, remaining, false)?.state;
                    break;
                }
                Some(c) => {
                    if events.len() >= self.tolerances.max_events_per_step {
                        return Err(Error::ZenoSuspicion(self.tolerances.max_events_per_step));
                    }
                    let tr = &self.transitions[c.transition];
                    let post = tr.reset.apply(c.t, &c.state, &env.thetas[c.transition]);
                    events.push(EventRecord { t: c.t, transition: c.transition, pre: c.state, post: post.clone() });
                    mode = tr.to;
                    t = c.t;
                    x = post;
                }
            }
        }
        Ok(Advance { mode, state: x, events })
    }

    /// Simulates a ground-truth trajectory with a fixed environment draw and
    /// records the state every `dt_record` seconds (including `t = 0`).
    pub fn simulate_ground_truth(
        &self,
        mode0: ModeId,
        x0: &Vector,
        env: &Environment,
        horizon: f64,
        dt_record: f64,
    ) -> Result<HybridTrajectory> {
        if !(horizon > 0.0) || !(dt_record > 0.0) {
            return Err(Error::InvalidArgument("horizon and record step must be positive"));
        }
        if env.guard_offsets.len() != self.transitions.len() || env.thetas.len() != self.transitions.len() {
            return Err(Error::DimensionMismatch { expected: self.transitions.len(), got: env.guard_offsets.len() });
        }
        self.check_dim(mode0, x0)?;
        let steps = (horizon / dt_record - 1e-9).ceil() as usize;
        let mut traj = HybridTrajectory::default();
        let mut mode = mode0;
        let mut x = x0.clone();
        traj.samples.push(Sample { t: 0.0, mode, state: x.clone() });
        for k in 0..steps {
            let t = k as f64 * dt_record;
            let dt = (horizon - t).min(dt_record);
            let adv = self.advance(mode, t, &x, dt, env)?;
            mode = adv.mode;
            x = adv.state;
            traj.events.extend(adv.events);
            traj.samples.push(Sample { t: t + dt, mode, state: x.clone() });
        }
        Ok(traj)
    }
}
