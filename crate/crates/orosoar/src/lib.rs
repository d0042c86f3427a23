//! Orographic-soaring MAV simulation library.
//!
//! A deterministic fixed-wing MAV simulator around a parametric ramp-updraft
//! wind field, closed by a cascaded INDI controller with throttle-minimizing
//! weighted-least-squares control allocation, and a local search that moves
//! the hold position until the vehicle soars with (near) zero throttle.
//!
//! The main pieces:
//!
//! - [`wind`]: analytic wind-field surrogate over an inclined ramp, plus
//!   excess-updraft feasibility grids
//! - [`polar`]: piecewise-quartic glide polar (sink rate vs airspeed) with a
//!   windmilling drag step
//! - [`vehicle`]: point-mass-with-rotational-dynamics plant whose steady
//!   glide reproduces the polar
//! - [`indi`]: cascaded PD + incremental-inversion controller
//! - [`alloc`]: box-constrained WLS control allocation (active set)
//! - [`search`]: zero-temperature local search over x-z hold positions
//! - [`harness`]: scenario loop, metrics, sweeps
//! - [`config`]: versioned scenario configuration (TOML)
//! - [`simlog`]: fixed-schema CSV run logs

pub mod alloc;
pub mod config;
pub mod contour;
pub mod filter;
pub mod harness;
pub mod indi;
pub mod polar;
pub mod search;
pub mod simlog;
pub mod vehicle;
pub mod wind;

use nalgebra::Vector3;

/// 3D vector in the world frame (x toward the tunnel outlet, y left, z up).
pub type Vec3 = Vector3<f64>;

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.81;

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_shortest_path() {
        assert!((wrap_angle(3.2) - (3.2 - 2.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!((wrap_angle(-3.2) - (2.0 * std::f64::consts::PI - 3.2)).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
        // pi maps to pi, not -pi
        assert!((wrap_angle(std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-15);
    }
}
