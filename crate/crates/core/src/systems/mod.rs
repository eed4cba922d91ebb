//! Benchmark systems with analytic derivatives.

pub mod aslip;
pub mod ball;
pub mod circle;

use crate::error::Result;
use crate::hybrid::HybridSystem;

pub use aslip::{make_aslip, AslipParams};
pub use ball::{make_bouncing_ball, BallParams};
pub use circle::{make_circle_drop, CircleParams};

/// Identifiers accepted by [`by_name`].
pub const NAMES: [&str; 3] = ["ball2d", "circle_drop", "aslip"];

/// Builds a system with default parameters from its identifier.
pub fn by_name(name: &str) -> Option<Result<HybridSystem>> {
    match name {
        "ball2d" => Some(make_bouncing_ball(BallParams::default())),
        "circle_drop" => Some(make_circle_drop(CircleParams::default())),
        "aslip" => Some(make_aslip(AslipParams::default())),
        _ => None,
    }
}
