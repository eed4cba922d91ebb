//! Simulated perturbations through an event against the first-order maps.
//! Halving the perturbation size should quarter the linearization error.

mod common;

use common::*;
use uaskf_core::hybrid::Environment;
use uaskf_core::systems::circle::{self, CircleParams};
use uaskf_core::systems::{make_bouncing_ball, make_circle_drop, BallParams};
use uaskf_core::{saltation_bundle, EventContext, HybridSystem, Matrix, ModeId, Vector};

const EPS: f64 = 1e-3;
const MIN_RATIO: f64 = 3.5;
/// Errors below this are at integration/localization precision.
const FLOOR: f64 = 1e-11;

struct Setup {
    sys: HybridSystem,
    mode: ModeId,
    x0: Vector,
    horizon: f64,
}

struct Linearization {
    xi_x: Matrix,
    xi_g: Vector,
    d_theta_r: Matrix,
}

impl Setup {
    fn end_state(&self, x0: &Vector, env: &Environment) -> Vector {
        let a = self.sys.advance(self.mode, 0.0, x0, self.horizon, env).unwrap();
        assert_eq!(a.events.len(), 1, "perturbed run must still see exactly one event");
        a.state
    }

    /// Maps an event-local perturbation to the end time:
    /// `A_post · M · A_pre` pieces around the nominal event.
    fn linearize(&self) -> (Matrix, Matrix, Linearization) {
        let env = Environment::nominal(&self.sys);
        let c = self.sys.detect_event(self.mode, 0.0, &self.x0, self.horizon, &env).unwrap().unwrap();
        let a_pre = self.sys.flow(self.mode, 0.0, &self.x0, c.t, true).unwrap().jacobian.unwrap();
        let ctx = EventContext::at_mean(&self.sys, c.transition, c.t, &c.state).unwrap();
        let b = saltation_bundle(&self.sys, &ctx).unwrap();
        let to = self.sys.transitions()[c.transition].to;
        let a_post = self.sys.flow(to, c.t, &ctx.x_post, self.horizon - c.t, true).unwrap().jacobian.unwrap();
        (a_pre, a_post, Linearization { xi_x: b.xi_x, xi_g: b.xi_g, d_theta_r: b.d_theta_r })
    }
}

fn ratio(err: impl Fn(f64) -> f64) -> f64 {
    let (e1, e2) = (err(EPS), err(EPS / 2.0));
    if e1 < FLOOR {
        return f64::INFINITY;
    }
    e1 / e2
}

fn check_state_directions(setup: &Setup) {
    let (a_pre, a_post, lin) = setup.linearize();
    let env = Environment::nominal(&setup.sys);
    let nominal = setup.end_state(&setup.x0, &env);
    let n = setup.x0.len();
    let dirs = [
        Vector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
        Vector::from_fn(n, |i, _| if i == 1 { 1.0 } else { 0.0 }),
        Vector::from_fn(n, |i, _| if i == 2 { 1.0 } else { 0.0 }),
        Vector::from_fn(n, |i, _| if i == 3 { 1.0 } else { 0.0 }),
        Vector::from_fn(n, |i, _| [0.3, -0.7, 0.5, 0.4][i]),
    ];
    let map = &a_post * &lin.xi_x * &a_pre;
    for d in &dirs {
        let err = |eps: f64| {
            let moved = setup.end_state(&(&setup.x0 + d * eps), &env);
            (moved - &nominal - &map * d * eps).amax()
        };
        let r = ratio(err);
        assert!(r >= MIN_RATIO, "state direction {d} ratio {r}");
    }
}

fn check_guard_offset(setup: &Setup, transition: usize) {
    let (_, a_post, lin) = setup.linearize();
    let env = Environment::nominal(&setup.sys);
    let nominal = setup.end_state(&setup.x0, &env);
    for sign in [1.0, -1.0] {
        let err = |eps: f64| {
            let mut shifted = env.clone();
            shifted.guard_offsets[transition] = sign * eps;
            let moved = setup.end_state(&setup.x0, &shifted);
            (moved - &nominal - &a_post * &lin.xi_g * (sign * eps)).amax()
        };
        let r = ratio(err);
        assert!(r >= MIN_RATIO, "guard offset ratio {r}");
    }
}

fn ball_setup() -> Setup {
    Setup {
        sys: make_bouncing_ball(BallParams::default()).unwrap(),
        mode: ModeId(0),
        // Lands on the plane's pivot, where the guard does not move with θ.
        x0: v(&[0.0, 3.0, 0.0, -5.0]),
        horizon: 0.6,
    }
}

fn circle_setup() -> Setup {
    Setup { sys: make_circle_drop(CircleParams::default()).unwrap(), mode: circle::AERIAL, x0: v(&[0.5, 5.0, 0.0, 0.0]), horizon: 0.9 }
}

#[test]
fn ball_state_perturbation_is_second_order() {
    check_state_directions(&ball_setup());
}

#[test]
fn ball_guard_offset_perturbation_is_second_order() {
    check_guard_offset(&ball_setup(), 0);
}

#[test]
fn ball_angle_perturbation_is_second_order() {
    let setup = ball_setup();
    let (_, a_post, lin) = setup.linearize();
    let env = Environment::nominal(&setup.sys);
    let nominal = setup.end_state(&setup.x0, &env);
    for sign in [1.0, -1.0] {
        let err = |eps: f64| {
            let mut tilted = env.clone();
            tilted.thetas[0][0] += sign * eps;
            let moved = setup.end_state(&setup.x0, &tilted);
            (moved - &nominal - &a_post * &lin.d_theta_r * Vector::from_element(1, sign * eps)).amax()
        };
        let r = ratio(err);
        assert!(r >= MIN_RATIO, "angle ratio {r}");
    }
}

#[test]
fn circle_state_perturbation_is_second_order() {
    check_state_directions(&circle_setup());
}

#[test]
fn circle_radius_perturbation_is_second_order() {
    check_guard_offset(&circle_setup(), circle::IMPACT);
}
