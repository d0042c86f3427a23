//! Cascaded incremental controller.
//!
//! Outer loop: position/velocity PD produces a linear acceleration
//! reference; the incremental inversion compares it against the filtered
//! measured acceleration and the WLS allocator distributes the increment
//! over roll, pitch and (normalized) thrust. Inner loop: attitude/rate PD
//! produces an angular acceleration reference which is inverted through the
//! airspeed-scheduled effectiveness into surface increments.
//!
//! Increments are always taken relative to *filtered* signals, and each
//! filtered pair (actuator vs acceleration) passes through structurally
//! identical low-pass filters so their phase stays matched.

use crate::alloc::{
    build_allocation_problem, wls_solve, ActiveBound, AllocationWeights, ControlLimits,
};
use crate::filter::FilterBank;
use crate::vehicle::{airspeed, control_effectiveness, ActuatorVector, Plant, VehicleState,
    THROTTLE_RANGE};
use crate::wind::WindVector;
use crate::{wrap_angle, Vec3};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("yaw reference undefined: waypoint coincides with position")]
    CoincidentWaypoint,
    #[error("singular control effectiveness")]
    SingularEffectiveness,
}

/// Per-axis PD gains of both loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerGains {
    /// Outer position-error gain, 1/s.
    pub k_xi: [f64; 3],
    /// Outer velocity-error gain, 1/s.
    pub k_xi_dot: [f64; 3],
    /// Inner attitude-error gain, 1/s.
    pub k_eta: [f64; 3],
    /// Inner rate-error gain, 1/s.
    pub k_omega: [f64; 3],
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            k_xi: [0.6; 3],
            k_xi_dot: [1.2; 3],
            k_eta: [8.0; 3],
            k_omega: [15.0; 3],
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), String> {
        let all = self
            .k_xi
            .iter()
            .chain(&self.k_xi_dot)
            .chain(&self.k_eta)
            .chain(&self.k_omega);
        for &g in all {
            if !(g > 0.0 && g.is_finite()) {
                return Err(format!("controller gains must be positive, got {g}"));
            }
        }
        Ok(())
    }
}

/// Outer PD: acceleration reference from position and velocity errors,
/// per axis.
pub fn outer_accel_ref(xi_ref: Vec3, state: &VehicleState, gains: &ControllerGains) -> Vec3 {
    let mut out = Vec3::zeros();
    for i in 0..3 {
        let pos_err = xi_ref[i] - state.position[i];
        out[i] = gains.k_xi_dot[i] * (gains.k_xi[i] * pos_err - state.velocity[i]);
    }
    out
}

/// Heading reference pointing from the vehicle toward the virtual waypoint
/// (quadrant-correct).
pub fn yaw_reference(position: (f64, f64), waypoint: (f64, f64)) -> Result<f64, ControlError> {
    let dx = waypoint.0 - position.0;
    let dy = waypoint.1 - position.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(ControlError::CoincidentWaypoint);
    }
    Ok(dy.atan2(dx))
}

/// Outer incremental inversion: the objective increment the allocator must
/// realize.
pub fn outer_indi(xi_ddot_ref: Vec3, xi_ddot_f: Vec3) -> Vec3 {
    xi_ddot_ref - xi_ddot_f
}

/// Inner PD: angular acceleration reference with wrapped attitude errors.
pub fn inner_rate_ref(eta_ref: Vec3, state: &VehicleState, gains: &ControllerGains) -> Vec3 {
    let mut out = Vec3::zeros();
    for i in 0..3 {
        let err = wrap_angle(eta_ref[i] - state.attitude[i]);
        out[i] = gains.k_omega[i] * (gains.k_eta[i] * err - state.rates[i]);
    }
    out
}

/// Inner incremental inversion: `u = u_f + G^-1 (omega_dot_ref -
/// omega_dot_f)`, clamped to surface ranges. Errors on singular G.
pub fn inner_indi(
    omega_dot_ref: Vec3,
    omega_dot_f: Vec3,
    g: &Matrix3<f64>,
    u_f: Vector3<f64>,
) -> Result<(Vector3<f64>, Vector3<f64>), ControlError> {
    let lu = g.lu();
    if lu.determinant().abs() < 1e-9 {
        return Err(ControlError::SingularEffectiveness);
    }
    let increment = lu
        .solve(&(omega_dot_ref - omega_dot_f))
        .ok_or(ControlError::SingularEffectiveness)?;
    let raw = u_f + increment;
    let clamped = Vector3::new(
        raw.x.clamp(-1.0, 1.0),
        raw.y.clamp(-1.0, 1.0),
        raw.z.clamp(-1.0, 1.0),
    );
    Ok((increment, clamped))
}

/// Filter memory of both incremental loops.
#[derive(Debug, Clone)]
pub struct IndiMemory {
    /// Filtered linear acceleration (outer).
    pub(crate) xi_ddot_f: FilterBank,
    /// Filtered outer control vector (roll, pitch, thrust-normalized).
    pub(crate) outer_ctrl_f: FilterBank,
    /// Filtered angular acceleration (inner).
    pub(crate) omega_dot_f: FilterBank,
    /// Filtered surface positions (inner).
    pub(crate) surf_f: FilterBank,
}

impl IndiMemory {
    pub fn new(inner_cutoff: f64, outer_cutoff: f64, dt: f64) -> IndiMemory {
        IndiMemory {
            xi_ddot_f: FilterBank::new(3, outer_cutoff, dt),
            outer_ctrl_f: FilterBank::new(3, outer_cutoff, dt),
            omega_dot_f: FilterBank::new(3, inner_cutoff, dt),
            surf_f: FilterBank::new(3, inner_cutoff, dt),
        }
    }
}

/// Controller parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub gains: ControllerGains,
    /// Inner-loop filter cutoff, rad/s.
    pub inner_cutoff: f64,
    /// Outer-loop filter cutoff, rad/s.
    pub outer_cutoff: f64,
    /// Roll reference limit, rad.
    pub roll_limit: f64,
    /// Pitch reference limit, rad.
    pub pitch_limit: f64,
    pub weights: AllocationWeights,
    /// Virtual waypoint the nose points at, (x, y) m.
    pub waypoint: (f64, f64),
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            gains: ControllerGains::default(),
            inner_cutoff: 15.0,
            outer_cutoff: 10.0,
            roll_limit: 0.5,
            pitch_limit: 0.45,
            weights: AllocationWeights::default(),
            waypoint: (15.0, 0.0),
        }
    }
}

/// Internals of one control step, logged for post-analysis.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub xi_ddot_ref: Vec3,
    /// Allocator objective increment, ordered (lateral, vertical,
    /// longitudinal).
    pub v_alloc: Vector3<f64>,
    pub eta_ref: Vec3,
    pub omega_dot_ref: Vec3,
    pub alloc_cost: f64,
    pub alloc_iterations: usize,
    pub alloc_degraded: bool,
    pub alloc_active: [ActiveBound; 3],
    pub fault: Option<&'static str>,
}

/// One controller instance: owns its filter memory and the last command.
#[derive(Debug, Clone)]
pub struct SoaringController {
    pub config: ControllerConfig,
    memory: IndiMemory,
    last_command: ActuatorVector,
}

impl SoaringController {
    pub fn new(config: ControllerConfig, dt: f64) -> SoaringController {
        let memory = IndiMemory::new(config.inner_cutoff, config.outer_cutoff, dt);
        SoaringController { config, memory, last_command: ActuatorVector::zero() }
    }

    /// Settle the filters onto the current measurements so the first
    /// increments start from a consistent state.
    pub fn initialize(&mut self, state: &VehicleState, actuators: &ActuatorVector) {
        self.memory.xi_ddot_f.reset(state.lin_acc.as_slice());
        self.memory.omega_dot_f.reset(state.ang_acc.as_slice());
        self.memory.surf_f.reset(actuators.surfaces().as_slice());
        self.memory.outer_ctrl_f.reset(&[
            state.attitude.x,
            state.attitude.y,
            actuators.throttle_fraction(),
        ]);
        self.last_command = *actuators;
    }

    /// Run one control step: update filters with the current measurements,
    /// then produce actuator commands for the hold target.
    pub fn step(
        &mut self,
        state: &VehicleState,
        actuators: &ActuatorVector,
        target: Vec3,
        plant: &Plant,
        wind: WindVector,
    ) -> (ActuatorVector, StepDiagnostics) {
        let cfg = &self.config;
        // measurements through identical filter pairs
        let xi_f = self.memory.xi_ddot_f.step(state.lin_acc.as_slice());
        let octl_f = self.memory.outer_ctrl_f.step(&[
            state.attitude.x,
            state.attitude.y,
            actuators.throttle_fraction(),
        ]);
        let om_f = self.memory.omega_dot_f.step(state.ang_acc.as_slice());
        let su_f = self.memory.surf_f.step(actuators.surfaces().as_slice());

        let mut fault = None;

        // outer loop
        let xi_ddot_ref = outer_accel_ref(target, state, &cfg.gains);
        let v_raw = outer_indi(xi_ddot_ref, Vec3::new(xi_f[0], xi_f[1], xi_f[2]));
        // objective components in control-aligned order:
        // (lateral <- roll, vertical <- pitch, longitudinal <- thrust)
        let v_alloc = Vector3::new(v_raw.y, v_raw.z, v_raw.x);
        let g_o = plant.outer_effectiveness(state, wind, octl_f[2]);
        let current = Vector3::new(octl_f[0], octl_f[1], octl_f[2]);
        let limits = ControlLimits {
            roll: (-cfg.roll_limit, cfg.roll_limit),
            pitch: (-cfg.pitch_limit, cfg.pitch_limit),
            thrust: (0.0, 1.0),
        };
        let (increment, alloc_cost, alloc_iterations, alloc_degraded, alloc_active) =
            match build_allocation_problem(v_alloc, g_o, current, &limits, &cfg.weights)
                .and_then(|p| wls_solve(&p, cfg.weights.max_iterations))
            {
                Ok(sol) => (
                    sol.u_wls,
                    sol.achieved_cost,
                    sol.iterations,
                    sol.degraded,
                    sol.active_set,
                ),
                Err(_) => {
                    fault = Some("allocation failed");
                    (Vector3::zeros(), f64::NAN, 0, true, [ActiveBound::Free; 3])
                }
            };

        let phi_ref = (current[0] + increment[0]).clamp(-cfg.roll_limit, cfg.roll_limit);
        let theta_ref = (current[1] + increment[1]).clamp(-cfg.pitch_limit, cfg.pitch_limit);
        let thrust_frac = (current[2] + increment[2]).clamp(0.0, 1.0);
        let psi_ref = match yaw_reference(
            (state.position.x, state.position.y),
            cfg.waypoint,
        ) {
            Ok(psi) => psi,
            Err(_) => {
                fault = Some("waypoint coincident");
                state.attitude.z
            }
        };
        let eta_ref = Vec3::new(phi_ref, theta_ref, psi_ref);

        // inner loop
        let omega_dot_ref = inner_rate_ref(eta_ref, state, &cfg.gains);
        let v_air = airspeed(state, wind);
        let g_inner = control_effectiveness(&plant.config, v_air);
        let surfaces = match inner_indi(
            omega_dot_ref,
            Vec3::new(om_f[0], om_f[1], om_f[2]),
            &g_inner,
            Vector3::new(su_f[0], su_f[1], su_f[2]),
        ) {
            Ok((_, u)) => u,
            Err(_) => {
                // hold the last command and raise the flag
                fault = Some("singular inner effectiveness");
                self.last_command.surfaces()
            }
        };

        let command = ActuatorVector {
            aileron: surfaces.x,
            elevator: surfaces.y,
            rudder: surfaces.z,
            throttle: thrust_frac * THROTTLE_RANGE,
        }
        .clamped();
        self.last_command = command;
        (
            command,
            StepDiagnostics {
                xi_ddot_ref,
                v_alloc,
                eta_ref,
                omega_dot_ref,
                alloc_cost,
                alloc_iterations,
                alloc_degraded,
                alloc_active,
                fault,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state_at(position: Vec3, velocity: Vec3) -> VehicleState {
        let mut s = VehicleState::at_rest(position);
        s.velocity = velocity;
        s
    }

    #[test]
    fn outer_pd_zero_error_zero_reference() {
        let g = ControllerGains::default();
        let s = state_at(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros());
        let a = outer_accel_ref(Vec3::new(1.0, 2.0, 3.0), &s, &g);
        assert_eq!(a, Vec3::zeros());
    }

    #[test]
    fn outer_pd_position_term() {
        let mut g = ControllerGains::default();
        g.k_xi = [1.0; 3];
        g.k_xi_dot = [2.0; 3];
        let s = state_at(Vec3::zeros(), Vec3::zeros());
        let a = outer_accel_ref(Vec3::new(1.0, 0.0, 0.0), &s, &g);
        assert!((a.x - 2.0).abs() < 1e-15 && a.y == 0.0 && a.z == 0.0);
    }

    #[test]
    fn outer_pd_velocity_term() {
        let mut g = ControllerGains::default();
        g.k_xi = [1.0; 3];
        g.k_xi_dot = [2.0; 3];
        let s = state_at(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0));
        let a = outer_accel_ref(Vec3::zeros(), &s, &g);
        assert!((a.x + 2.0).abs() < 1e-15);
    }

    #[test]
    fn yaw_reference_examples() {
        assert_eq!(yaw_reference((0.0, 0.0), (15.0, 0.0)).unwrap(), 0.0);
        let v = yaw_reference((0.0, 1.0), (15.0, 0.0)).unwrap();
        assert!((v - (-1.0f64 / 15.0).atan()).abs() < 1e-12, "{v}");
        assert!((v + 0.0666).abs() < 1e-3);
        let m = yaw_reference((0.0, -1.0), (15.0, 0.0)).unwrap();
        assert!((m + v).abs() < 1e-15, "mirror symmetry");
        assert_eq!(
            yaw_reference((3.0, 2.0), (3.0, 2.0)),
            Err(ControlError::CoincidentWaypoint)
        );
    }

    proptest! {
        #[test]
        fn yaw_reference_rotation_equivariance(angle in 0.0..(2.0 * std::f64::consts::PI), r in 0.5..10.0f64) {
            // rotating the vehicle about the waypoint rotates the reference
            // by the same angle
            let wp = (15.0, 0.0);
            let base = (wp.0 - r, wp.1);
            let psi0 = yaw_reference(base, wp).unwrap();
            let rotated = (
                wp.0 - r * angle.cos(),
                wp.1 - r * angle.sin(),
            );
            let psi1 = yaw_reference(rotated, wp).unwrap();
            let want = crate::wrap_angle(psi0 + angle);
            prop_assert!((crate::wrap_angle(psi1 - want)).abs() < 1e-9);
        }
    }

    #[test]
    fn outer_indi_is_difference() {
        let v = outer_indi(Vec3::new(0.0, 0.0, 1.0), Vec3::zeros());
        assert_eq!(v, Vec3::new(0.0, 0.0, 1.0));
        let v = outer_indi(Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(v, Vec3::zeros());
        // steady bias shifts the increment by exactly -bias
        let bias = Vec3::new(0.3, -0.2, 0.1);
        let a = outer_indi(Vec3::new(1.0, 1.0, 1.0), bias);
        assert_eq!(a, Vec3::new(1.0, 1.0, 1.0) - bias);
    }

    #[test]
    fn inner_pd_examples() {
        let mut g = ControllerGains::default();
        g.k_eta = [5.0; 3];
        g.k_omega = [10.0; 3];
        let s = state_at(Vec3::zeros(), Vec3::zeros());
        let r = inner_rate_ref(Vec3::new(0.0, 0.1, 0.0), &s, &g);
        assert!((r.y - 5.0).abs() < 1e-12, "{}", r.y);
        assert_eq!(inner_rate_ref(Vec3::zeros(), &s, &g), Vec3::zeros());
    }

    #[test]
    fn inner_pd_wraps_attitude_error() {
        let g = ControllerGains::default();
        let mut s = state_at(Vec3::zeros(), Vec3::zeros());
        s.attitude = Vec3::new(0.0, 0.0, 3.1);
        let r = inner_rate_ref(Vec3::new(0.0, 0.0, -3.1), &s, &g);
        let wrapped_err = crate::wrap_angle(-3.1 - 3.1);
        assert!((wrapped_err - 0.08318).abs() < 1e-4);
        let want = g.k_omega[2] * (g.k_eta[2] * wrapped_err - 0.0);
        assert!((r.z - want).abs() < 1e-12);
        assert!(r.z > 0.0, "must take the short way around");
    }

    #[test]
    fn inner_indi_identity_when_converged() {
        let g = Matrix3::identity() * 50.0;
        let u_f = Vector3::new(0.1, -0.2, 0.3);
        let om = Vec3::new(1.0, 2.0, 3.0);
        let (inc, u) = inner_indi(om, om, &g, u_f).unwrap();
        assert_eq!(inc, Vector3::zeros());
        assert_eq!(u, u_f);
    }

    #[test]
    fn inner_indi_identity_g() {
        let g = Matrix3::identity();
        let (inc, u) =
            inner_indi(Vec3::new(0.1, 0.0, 0.0), Vec3::zeros(), &g, Vector3::zeros()).unwrap();
        assert!((inc.x - 0.1).abs() < 1e-15);
        assert_eq!(u, Vector3::new(0.1, 0.0, 0.0));
    }

    #[test]
    fn inner_indi_inversion_round_trip() {
        // G * (u - u_f) must reproduce the commanded increment to 1e-12
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut g = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    g[(i, j)] = if i == j {
                        rng.random_range(20.0..80.0)
                    } else {
                        rng.random_range(-5.0..5.0)
                    };
                }
            }
            let u_f = Vector3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            );
            let delta = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let om_f = Vec3::new(1.0, -2.0, 0.5);
            let (_, u) = inner_indi(om_f + delta, om_f, &g, u_f).unwrap();
            let realized = g * (u - u_f);
            assert!((realized - delta).norm() < 1e-12, "residual {}", (realized - delta).norm());
        }
    }

    #[test]
    fn inner_indi_singular_is_fault() {
        let mut g = Matrix3::identity();
        g[(1, 1)] = 0.0;
        assert_eq!(
            inner_indi(Vec3::new(0.0, 1.0, 0.0), Vec3::zeros(), &g, Vector3::zeros()),
            Err(ControlError::SingularEffectiveness)
        );
    }

    #[test]
    fn paired_filters_share_coefficients() {
        let mem = IndiMemory::new(15.0, 10.0, 0.002);
        // impulse-response equality of the paired banks
        let mut a = mem.omega_dot_f.clone();
        let mut b = mem.surf_f.clone();
        let mut x = [1.0, 1.0, 1.0];
        for _ in 0..300 {
            assert_eq!(a.step(&x), b.step(&x));
            x = [0.0, 0.0, 0.0];
        }
        let mut c = mem.xi_ddot_f.clone();
        let mut d = mem.outer_ctrl_f.clone();
        let mut x = [1.0, 1.0, 1.0];
        for _ in 0..300 {
            assert_eq!(c.step(&x), d.step(&x));
            x = [0.0, 0.0, 0.0];
        }
    }

    #[test]
    fn cascade_drives_attitude_error_down_on_perfect_plant() {
        // perfect plant: angular acceleration responds exactly as G * u
        let dt = 0.002;
        let gains = ControllerGains::default();
        let g = Matrix3::from_diagonal(&Vector3::new(60.0, 50.0, 25.0));
        let mut mem_om = FilterBank::new(3, 15.0, dt);
        let mut mem_u = FilterBank::new(3, 15.0, dt);
        let mut s = state_at(Vec3::zeros(), Vec3::zeros());
        s.attitude = Vec3::new(0.3, -0.2, 2.9);
        let eta_ref = Vec3::new(0.0, 0.1, -3.0); // yaw error wraps across pi
        let mut u = Vector3::zeros();
        let mut om_dot = Vec3::zeros();
        for _ in 0..(2.0 / dt) as usize {
            let om_f = mem_om.step(om_dot.as_slice());
            let u_f = mem_u.step(u.as_slice());
            let rate_ref = inner_rate_ref(eta_ref, &s, &gains);
            let (_, nu) = inner_indi(
                rate_ref,
                Vec3::new(om_f[0], om_f[1], om_f[2]),
                &g,
                Vector3::new(u_f[0], u_f[1], u_f[2]),
            )
            .unwrap();
            u = nu;
            om_dot = g * u;
            s.rates += om_dot * dt;
            s.attitude += s.rates * dt;
            for i in 0..3 {
                s.attitude[i] = crate::wrap_angle(s.attitude[i]);
            }
        }
        for i in 0..3 {
            let err = crate::wrap_angle(eta_ref[i] - s.attitude[i]).abs();
            assert!(err < 1e-3, "axis {i} error {err}");
        }
    }
}
