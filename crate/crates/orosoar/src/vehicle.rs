//! Simplified rigid-body MAV plant.
//!
//! A point mass with rotational dynamics: aerodynamic drag is constructed
//! from the glide polar so that a steady zero-throttle glide reproduces the
//! polar's sink rate exactly; lift follows a linear lift-curve rotated by
//! roll; moments come from actuator deflections through an airspeed-scheduled
//! effectiveness with rate damping; all actuators carry a first-order lag.
//!
//! World frame: x forward (toward the tunnel), y left, z up, right handed.
//! Attitude is roll/pitch/yaw Euler angles; positive roll is right-wing-down,
//! positive pitch is nose-up, positive yaw turns the nose toward +y.

use crate::polar::PolarModel;
use crate::wind::WindVector;
use crate::{wrap_angle, Vec3, GRAVITY};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimFault {
    #[error("dt {0} outside (0, 0.01] s")]
    BadDt(f64),
    #[error("non-finite state after step at airspeed {airspeed:.3}: {what}")]
    NonFinite { what: &'static str, airspeed: f64 },
}

/// Full simulated vehicle state.
#[derive(Debug, Clone)]
pub struct VehicleState {
    /// Position, m.
    pub position: Vec3,
    /// Ground-frame velocity, m/s.
    pub velocity: Vec3,
    /// Attitude [roll, pitch, yaw], rad, wrapped to (-pi, pi].
    pub attitude: Vec3,
    /// Body rates [p, q, r], rad/s.
    pub rates: Vec3,
    /// Linear acceleration of the last step, m/s^2.
    pub lin_acc: Vec3,
    /// Angular acceleration of the last step, rad/s^2.
    pub ang_acc: Vec3,
}

impl VehicleState {
    pub fn at_rest(position: Vec3) -> VehicleState {
        VehicleState {
            position,
            velocity: Vec3::zeros(),
            attitude: Vec3::zeros(),
            rates: Vec3::zeros(),
            lin_acc: Vec3::zeros(),
            ang_acc: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.iter().all(|v| v.is_finite())
            && self.rates.iter().all(|v| v.is_finite())
    }
}

/// Actuator commands/positions: surfaces normalized to [-1, 1], throttle in
/// command units [0, 9600].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActuatorVector {
    pub aileron: f64,
    pub elevator: f64,
    pub rudder: f64,
    pub throttle: f64,
}

/// Full throttle command value.
pub const THROTTLE_RANGE: f64 = 9600.0;

impl ActuatorVector {
    pub fn zero() -> ActuatorVector {
        ActuatorVector { aileron: 0.0, elevator: 0.0, rudder: 0.0, throttle: 0.0 }
    }

    /// Clamp every channel into its command range.
    pub fn clamped(&self) -> ActuatorVector {
        ActuatorVector {
            aileron: self.aileron.clamp(-1.0, 1.0),
            elevator: self.elevator.clamp(-1.0, 1.0),
            rudder: self.rudder.clamp(-1.0, 1.0),
            throttle: self.throttle.clamp(0.0, THROTTLE_RANGE),
        }
    }

    pub fn surfaces(&self) -> Vector3<f64> {
        Vector3::new(self.aileron, self.elevator, self.rudder)
    }

    pub fn throttle_fraction(&self) -> f64 {
        self.throttle / THROTTLE_RANGE
    }
}

/// Per-axis quadratic effectiveness schedule `c0 + c1 v + c2 v^2`, floored.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EffectivenessQuadratic(pub [f64; 3]);

impl EffectivenessQuadratic {
    pub fn eval(&self, v: f64, floor: f64) -> f64 {
        let [c0, c1, c2] = self.0;
        (c0 + c1 * v + c2 * v * v).max(floor)
    }
}

/// Physical and aerodynamic parameters of the plant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleConfig {
    pub mass: f64,
    pub wingspan: f64,
    pub wing_area: f64,
    pub air_density: f64,
    /// First-order actuator time constant, s.
    pub actuator_tau: f64,
    /// Thrust at full throttle, N (linear in the command).
    pub max_thrust: f64,
    pub cl0: f64,
    pub cl_alpha: f64,
    pub cl_min: f64,
    pub cl_max: f64,
    /// Quadratic drag penalty for flying off the polar's trim lift
    /// coefficient.
    pub off_trim_drag: f64,
    /// Rotational rate damping per axis, 1/s.
    pub rot_damping: [f64; 3],
    /// Inner effectiveness quadratics per axis (roll, pitch, yaw):
    /// rad/s^2 per unit deflection as a function of airspeed.
    pub eff_roll: EffectivenessQuadratic,
    pub eff_pitch: EffectivenessQuadratic,
    pub eff_yaw: EffectivenessQuadratic,
    /// Lower clamp of the effectiveness schedule.
    pub eff_floor: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        VehicleConfig {
            mass: 0.716,
            wingspan: 1.1,
            wing_area: 0.18,
            air_density: 1.225,
            actuator_tau: 0.05,
            max_thrust: 1.2,
            cl0: 0.4,
            cl_alpha: 5.7,
            cl_min: -0.3,
            cl_max: 1.45,
            off_trim_drag: 0.04,
            rot_damping: [3.0, 4.0, 2.0],
            eff_roll: EffectivenessQuadratic([0.0, 0.0, 1.0]),
            eff_pitch: EffectivenessQuadratic([0.0, 0.0, 0.8]),
            eff_yaw: EffectivenessQuadratic([0.0, 0.0, 0.35]),
            eff_floor: 2.0,
        }
    }
}

impl VehicleConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("mass", self.mass),
            ("wing_area", self.wing_area),
            ("air_density", self.air_density),
            ("actuator_tau", self.actuator_tau),
            ("max_thrust", self.max_thrust),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.cl_min >= self.cl_max {
            return Err("cl_min must be below cl_max".into());
        }
        Ok(())
    }
}

/// Airspeed: magnitude of the vehicle velocity relative to the air.
pub fn airspeed(state: &VehicleState, wind: WindVector) -> f64 {
    (state.velocity - wind.air_velocity()).norm()
}

/// Inner-loop control effectiveness: diagonal map from surface deflections
/// (aileron, elevator, rudder) to body angular accelerations, scheduled by
/// airspeed and floor-clamped.
pub fn control_effectiveness(config: &VehicleConfig, airspeed: f64) -> Matrix3<f64> {
    let v = airspeed.max(0.0);
    Matrix3::from_diagonal(&Vector3::new(
        config.eff_roll.eval(v, config.eff_floor),
        config.eff_pitch.eval(v, config.eff_floor),
        config.eff_yaw.eval(v, config.eff_floor),
    ))
}

/// Thrust acceleration along body x for a throttle command. Out-of-range
/// commands are clamped and flagged.
pub fn thrust_accel(throttle: f64, config: &VehicleConfig) -> (f64, bool) {
    let clamped = throttle.clamp(0.0, THROTTLE_RANGE);
    let warned = clamped != throttle;
    ((config.max_thrust * clamped / THROTTLE_RANGE) / config.mass, warned)
}

/// Body x axis in world coordinates.
pub fn body_x(attitude: Vec3) -> Vec3 {
    let (phi, theta, psi) = (attitude.x, attitude.y, attitude.z);
    let _ = phi;
    Vec3::new(theta.cos() * psi.cos(), theta.cos() * psi.sin(), theta.sin())
}

/// Aerodynamic frame of the relative wind: forward along v_rel, right,
/// lift-up. Falls back to the attitude axes at negligible airspeed.
fn aero_frame(v_rel: Vec3, attitude: Vec3) -> (Vec3, Vec3, Vec3) {
    let v = v_rel.norm();
    let f = if v > 1e-6 { v_rel / v } else { body_x(attitude) };
    let mut r = f.cross(&Vec3::z());
    let rn = r.norm();
    if rn < 1e-9 {
        r = Vec3::new(0.0, -1.0, 0.0);
    } else {
        r /= rn;
    }
    let u = r.cross(&f);
    (f, r, u)
}

/// Per-step aerodynamic diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct AeroInfo {
    pub airspeed: f64,
    pub alpha: f64,
    pub cl: f64,
    pub lift: f64,
    pub drag: f64,
}

/// The plant: configuration plus the polar that anchors its drag.
#[derive(Debug, Clone)]
pub struct Plant {
    pub config: VehicleConfig,
    pub polar: PolarModel,
}

impl Plant {
    pub fn new(config: VehicleConfig, polar: PolarModel) -> Plant {
        Plant { config, polar }
    }

    fn dynamic_pressure_area(&self, v: f64) -> f64 {
        0.5 * self.config.air_density * v * v * self.config.wing_area
    }

    /// Trim lift coefficient of a steady polar glide at airspeed `v`.
    pub fn cl_trim(&self, v: f64) -> f64 {
        let sink = self.polar.sink_rate_clamped(v);
        let gamma = (sink / v).clamp(-1.0, 1.0).asin();
        let qs = self.dynamic_pressure_area(v).max(1e-9);
        self.config.mass * GRAVITY * gamma.cos() / qs
    }

    /// Angle of attack: pitch minus the flight-path angle of the relative
    /// wind (projected onto the heading's vertical plane).
    pub fn angle_of_attack(&self, v_rel: Vec3, attitude: Vec3) -> f64 {
        let psi = attitude.z;
        let horiz = (v_rel.x * psi.cos() + v_rel.y * psi.sin()).max(0.05);
        let gamma_fp = v_rel.z.atan2(horiz);
        attitude.y - gamma_fp
    }

    /// Aerodynamic + gravity + thrust force on the vehicle, N, and the
    /// aerodynamic state used.
    pub fn net_force(
        &self,
        state: &VehicleState,
        wind: WindVector,
        throttle: f64,
    ) -> (Vec3, AeroInfo) {
        let (t_acc, _) = thrust_accel(throttle, &self.config);
        self.net_force_thrust_newtons(state, wind, t_acc * self.config.mass)
    }

    /// Force balance with the thrust given directly in newtons (may be
    /// negative; the trim solver needs a smooth residual across zero).
    fn net_force_thrust_newtons(
        &self,
        state: &VehicleState,
        wind: WindVector,
        thrust_n: f64,
    ) -> (Vec3, AeroInfo) {
        let cfg = &self.config;
        let v_rel = state.velocity - wind.air_velocity();
        let v = v_rel.norm().max(0.5);
        let (f_hat, r_hat, u_hat) = aero_frame(v_rel, state.attitude);
        let alpha = self.angle_of_attack(v_rel, state.attitude);
        let cl = (cfg.cl0 + cfg.cl_alpha * alpha).clamp(cfg.cl_min, cfg.cl_max);
        let qs = self.dynamic_pressure_area(v);
        let lift = qs * cl;
        let cl_t = self.cl_trim(v);
        let sink = self.polar.sink_rate_clamped(v);
        let drag = cfg.mass * GRAVITY * sink / v + cfg.off_trim_drag * qs * (cl - cl_t).powi(2);
        let phi = state.attitude.x;
        let lift_dir = u_hat * phi.cos() + r_hat * phi.sin();
        let force = Vec3::new(0.0, 0.0, -cfg.mass * GRAVITY)
            + lift * lift_dir
            + drag * (-f_hat)
            + thrust_n * body_x(state.attitude);
        (force, AeroInfo { airspeed: v, alpha, cl, lift, drag })
    }

    /// Outer-loop control effectiveness: rows are (lateral y, vertical z,
    /// longitudinal x) acceleration increments; columns are (roll, pitch,
    /// thrust-normalized) increments, linearized about the current state
    /// and thrust setting.
    ///
    /// Entries (m is mass, L lift, D' off-trim drag slope, T_max full
    /// thrust, b the body-x axis, d the roll-rotated lift direction):
    ///   d(acc)/d(phi)  = L * (r cos(phi) - u sin(phi)) / m
    ///   d(acc)/d(theta)= (qS cl_alpha * d - D' * f + Tn T_max db/dtheta) / m
    ///   d(acc)/d(Tn)   = T_max * b / m
    pub fn outer_effectiveness(
        &self,
        state: &VehicleState,
        wind: WindVector,
        thrust_frac: f64,
    ) -> Matrix3<f64> {
        let cfg = &self.config;
        let v_rel = state.velocity - wind.air_velocity();
        let v = v_rel.norm().max(0.5);
        let (f_hat, r_hat, u_hat) = aero_frame(v_rel, state.attitude);
        let alpha = self.angle_of_attack(v_rel, state.attitude);
        let cl = (cfg.cl0 + cfg.cl_alpha * alpha).clamp(cfg.cl_min, cfg.cl_max);
        let qs = self.dynamic_pressure_area(v);
        let lift = qs * cl;
        let cl_t = self.cl_trim(v);
        let phi = state.attitude.x;
        let lift_dir = u_hat * phi.cos() + r_hat * phi.sin();

        let d_phi = lift * (r_hat * phi.cos() - u_hat * phi.sin()) / cfg.mass;
        let dl_dtheta = qs * cfg.cl_alpha;
        let dd_dtheta = 2.0 * cfg.off_trim_drag * qs * (cl - cl_t) * cfg.cl_alpha;
        // the thrust vector also rotates with pitch
        let (theta, psi) = (state.attitude.y, state.attitude.z);
        let db_dtheta = Vec3::new(-theta.sin() * psi.cos(), -theta.sin() * psi.sin(), theta.cos());
        let d_theta = (dl_dtheta * lift_dir - dd_dtheta * f_hat
            + thrust_frac.clamp(0.0, 1.0) * cfg.max_thrust * db_dtheta)
            / cfg.mass;
        let d_tn = cfg.max_thrust * body_x(state.attitude) / cfg.mass;

        Matrix3::new(
            d_phi.y, d_theta.y, d_tn.y, // lateral
            d_phi.z, d_theta.z, d_tn.z, // vertical
            d_phi.x, d_theta.x, d_tn.x, // longitudinal
        )
    }

    /// Solve for the pitch and normalized throttle that hold the vehicle
    /// stationary in the given wind (roll and yaw zero). Newton iteration on
    /// the (x, z) force balance; None when no equilibrium exists within the
    /// actuator and lift limits.
    pub fn hover_trim(&self, wind: WindVector) -> Option<(f64, f64)> {
        let state_for = |theta: f64| VehicleState {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            attitude: Vec3::new(0.0, theta, 0.0),
            rates: Vec3::zeros(),
            lin_acc: Vec3::zeros(),
            ang_acc: Vec3::zeros(),
        };
        let residual = |theta: f64, tn: f64| -> Vec3 {
            let thrust_n = self.config.max_thrust * tn;
            let (f, _) = self.net_force_thrust_newtons(&state_for(theta), wind, thrust_n);
            f
        };
        let mut theta = 0.05;
        let mut tn = 0.3;
        for _ in 0..80 {
            let r = residual(theta, tn);
            if !(r.x.is_finite() && r.z.is_finite()) {
                return None;
            }
            if r.x.abs() < 1e-10 && r.z.abs() < 1e-10 {
                break;
            }
            let h = 1e-6;
            let rt = residual(theta + h, tn);
            let rn = residual(theta, tn + h);
            // 2x2 Jacobian on (x, z)
            let j = [
                [(rt.x - r.x) / h, (rn.x - r.x) / h],
                [(rt.z - r.z) / h, (rn.z - r.z) / h],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-12 {
                return None;
            }
            let dth = (-r.x * j[1][1] + r.z * j[0][1]) / det;
            let dtn = (-j[0][0] * r.z + j[1][0] * r.x) / det;
            theta = (theta + dth).clamp(-0.6, 0.6);
            tn = (tn + dtn).clamp(-0.5, 1.5);
        }
        let r = residual(theta, tn);
        // a hair of negative thrust (order (sink/V)^2) marks a point just
        // inside the soarable set; report it as zero throttle
        let ok = r.x.abs() < 1e-6 && r.z.abs() < 1e-6 && (-0.02..=1.0).contains(&tn);
        // reject solutions that required a clamped lift coefficient
        let alpha = self.angle_of_attack(-wind.air_velocity(), Vec3::new(0.0, theta, 0.0));
        let cl = self.config.cl0 + self.config.cl_alpha * alpha;
        (ok && cl < self.config.cl_max && cl > self.config.cl_min)
            .then_some((theta, tn.max(0.0)))
    }

    /// Pitch attitude and flight-path angle of a steady polar glide at
    /// airspeed `v` in still air.
    pub fn trim_glide(&self, v: f64) -> (f64, f64) {
        let sink = self.polar.sink_rate_clamped(v);
        let gamma = -(sink / v).clamp(-1.0, 1.0).asin();
        let alpha = (self.cl_trim(v) - self.config.cl0) / self.config.cl_alpha;
        (alpha + gamma, gamma)
    }

    /// Advance the plant one step of `dt` seconds under actuator commands.
    /// Semi-implicit Euler; actuators lag first order toward the commands.
    pub fn step(
        &self,
        state: &VehicleState,
        actuators: &mut ActuatorVector,
        commanded: &ActuatorVector,
        wind: WindVector,
        dt: f64,
    ) -> Result<VehicleState, SimFault> {
        if !(dt > 0.0 && dt <= 0.01) {
            return Err(SimFault::BadDt(dt));
        }
        let cfg = &self.config;
        let cmd = commanded.clamped();
        let lag = 1.0 - (-dt / cfg.actuator_tau).exp();
        actuators.aileron += (cmd.aileron - actuators.aileron) * lag;
        actuators.elevator += (cmd.elevator - actuators.elevator) * lag;
        actuators.rudder += (cmd.rudder - actuators.rudder) * lag;
        actuators.throttle += (cmd.throttle - actuators.throttle) * lag;
        *actuators = actuators.clamped();

        let (force, aero) = self.net_force(state, wind, actuators.throttle);
        let lin_acc = force / cfg.mass;

        let g = control_effectiveness(cfg, aero.airspeed);
        let damping = Vector3::from_row_slice(&cfg.rot_damping);
        let ang_acc = g * actuators.surfaces() - damping.component_mul(&state.rates);

        let mut next = state.clone();
        next.lin_acc = lin_acc;
        next.ang_acc = ang_acc;
        next.velocity += lin_acc * dt;
        next.position += next.velocity * dt;
        next.rates += ang_acc * dt;
        // Euler-angle kinematics (roll-pitch-yaw)
        let (phi, theta) = (next.attitude.x, next.attitude.y);
        let (sp, cp) = (phi.sin(), phi.cos());
        let ct = theta.cos().abs().max(0.2) * theta.cos().signum();
        let tt = theta.tan().clamp(-5.0, 5.0);
        let (p, q, r) = (next.rates.x, next.rates.y, next.rates.z);
        let eta_dot = Vec3::new(
            p + sp * tt * q + cp * tt * r,
            cp * q - sp * r,
            (sp * q + cp * r) / ct,
        );
        next.attitude += eta_dot * dt;
        next.attitude.x = wrap_angle(next.attitude.x);
        next.attitude.y = wrap_angle(next.attitude.y);
        next.attitude.z = wrap_angle(next.attitude.z);

        if !next.is_finite() {
            return Err(SimFault::NonFinite { what: "state", airspeed: aero.airspeed });
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wind::WindVector;

    fn plant() -> Plant {
        Plant::new(VehicleConfig::default(), PolarModel::bundled_default())
    }

    fn still() -> WindVector {
        WindVector { u: 0.0, w: 0.0 }
    }

    #[test]
    fn airspeed_stationary_in_headwind() {
        let s = VehicleState::at_rest(Vec3::zeros());
        let v = airspeed(&s, WindVector { u: 8.5, w: 0.0 });
        assert!((v - 8.5).abs() < 1e-12);
    }

    #[test]
    fn airspeed_zero_when_moving_with_wind() {
        let mut s = VehicleState::at_rest(Vec3::zeros());
        s.velocity = WindVector { u: 8.5, w: 0.3 }.air_velocity();
        assert!(airspeed(&s, WindVector { u: 8.5, w: 0.3 }) < 1e-12);
    }

    #[test]
    fn airspeed_adds_forward_speed_to_headwind() {
        let mut s = VehicleState::at_rest(Vec3::zeros());
        s.velocity = Vec3::new(1.0, 0.0, 0.0);
        let v = airspeed(&s, WindVector { u: 8.5, w: 0.0 });
        assert!((v - 9.5).abs() < 1e-12, "airspeed {v}");
    }

    #[test]
    fn effectiveness_floor_at_zero_airspeed() {
        let cfg = VehicleConfig::default();
        let g = control_effectiveness(&cfg, 0.0);
        for i in 0..3 {
            assert_eq!(g[(i, i)], cfg.eff_floor);
        }
    }

    #[test]
    fn effectiveness_follows_quadratic_schedule() {
        let cfg = VehicleConfig::default();
        let v = 9.0;
        let g1 = control_effectiveness(&cfg, v);
        let g2 = control_effectiveness(&cfg, 2.0 * v);
        // direct polynomial evaluation oracle
        for (i, quad) in [cfg.eff_roll, cfg.eff_pitch, cfg.eff_yaw].iter().enumerate() {
            let want1 = quad.eval(v, cfg.eff_floor);
            let want2 = quad.eval(2.0 * v, cfg.eff_floor);
            assert_eq!(g1[(i, i)], want1);
            assert_eq!(g2[(i, i)], want2);
        }
    }

    #[test]
    fn symmetric_coefficients_give_equal_axes() {
        let mut cfg = VehicleConfig::default();
        cfg.eff_pitch = cfg.eff_roll;
        let g = control_effectiveness(&cfg, 8.0);
        assert_eq!(g[(0, 0)], g[(1, 1)]);
    }

    #[test]
    fn thrust_endpoints_and_clamping() {
        let cfg = VehicleConfig::default();
        assert_eq!(thrust_accel(0.0, &cfg), (0.0, false));
        let (a, warned) = thrust_accel(THROTTLE_RANGE, &cfg);
        assert!((a - cfg.max_thrust / cfg.mass).abs() < 1e-12);
        assert!(!warned);
        let (a_over, warned_over) = thrust_accel(THROTTLE_RANGE + 100.0, &cfg);
        assert_eq!(a_over, a);
        assert!(warned_over);
        // monotone
        let mut last = -1.0;
        for i in 0..=10 {
            let (a, _) = thrust_accel(i as f64 * 960.0, &cfg);
            assert!(a >= last);
            last = a;
        }
    }

    #[test]
    fn dt_bounds_enforced() {
        let p = plant();
        let s = VehicleState::at_rest(Vec3::zeros());
        let mut act = ActuatorVector::zero();
        let cmd = ActuatorVector::zero();
        assert!(matches!(p.step(&s, &mut act, &cmd, still(), 0.0), Err(SimFault::BadDt(_))));
        assert!(matches!(p.step(&s, &mut act, &cmd, still(), 0.02), Err(SimFault::BadDt(_))));
    }

    #[test]
    fn energy_non_increasing_in_still_air_zero_throttle() {
        let p = plant();
        let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 50.0));
        let (theta, _) = p.trim_glide(9.0);
        s.attitude.y = theta;
        s.velocity = Vec3::new(9.0, 0.0, -0.6);
        let mut act = ActuatorVector::zero();
        let cmd = ActuatorVector::zero();
        let energy = |s: &VehicleState| {
            0.5 * p.config.mass * s.velocity.norm_squared()
                + p.config.mass * GRAVITY * s.position.z
        };
        let mut e = energy(&s);
        for _ in 0..5000 {
            s = p.step(&s, &mut act, &cmd, still(), 0.002).unwrap();
            let e2 = energy(&s);
            assert!(e2 <= e + 1e-9, "energy rose {e} -> {e2}");
            e = e2;
        }
    }

    #[test]
    fn determinism_same_inputs_same_state() {
        let p = plant();
        let mut s1 = VehicleState::at_rest(Vec3::new(0.0, 0.0, 10.0));
        s1.velocity = Vec3::new(8.0, 0.1, -0.5);
        let mut s2 = s1.clone();
        let mut a1 = ActuatorVector::zero();
        let mut a2 = ActuatorVector::zero();
        let cmd = ActuatorVector { aileron: 0.1, elevator: -0.2, rudder: 0.05, throttle: 2000.0 };
        let w = WindVector { u: 6.0, w: 0.4 };
        for _ in 0..500 {
            s1 = p.step(&s1, &mut a1, &cmd, w, 0.002).unwrap();
            s2 = p.step(&s2, &mut a2, &cmd, w, 0.002).unwrap();
        }
        assert_eq!(s1.position, s2.position);
        assert_eq!(s1.velocity, s2.velocity);
        assert_eq!(s1.attitude, s2.attitude);
    }

    #[test]
    fn actuators_stay_in_range_after_clamping() {
        let p = plant();
        let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 10.0));
        s.velocity = Vec3::new(8.0, 0.0, 0.0);
        let mut act = ActuatorVector::zero();
        let cmd = ActuatorVector { aileron: 5.0, elevator: -7.0, rudder: 2.0, throttle: 20000.0 };
        for _ in 0..200 {
            s = p.step(&s, &mut act, &cmd, still(), 0.002).unwrap();
            assert!(act.aileron <= 1.0 && act.aileron >= -1.0);
            assert!(act.elevator <= 1.0 && act.elevator >= -1.0);
            assert!(act.throttle >= 0.0 && act.throttle <= THROTTLE_RANGE);
        }
    }

    #[test]
    fn hover_trim_in_flat_wind_needs_about_38_percent() {
        // thrust calibration anchor: powered hover in the no-ramp tunnel flow
        let p = plant();
        let (theta, tn) = p.hover_trim(WindVector { u: 8.5, w: 0.0 }).expect("trim exists");
        assert!(
            (tn - 0.38).abs() < 0.03,
            "hover throttle fraction {tn}, want ~0.38 (theta {theta})"
        );
    }

    #[test]
    fn hover_trim_zero_throttle_when_updraft_balances_sink() {
        let p = plant();
        let v = 8.5;
        let sink = p.polar.sink_rate(v).unwrap();
        // updraft equal to the sink rate at the hover airspeed: equilibrium
        // needs (almost) no thrust
        let w = WindVector { u: (v * v - sink * sink).sqrt(), w: 0.98 * sink };
        let (_, tn) = p.hover_trim(w).expect("soaring trim exists");
        assert!(tn < 0.015, "throttle fraction {tn}");
    }

    #[test]
    fn outer_effectiveness_matches_finite_differences() {
        let p = plant();
        let wind = WindVector { u: 8.5, w: 0.4 };
        let mut s = VehicleState::at_rest(Vec3::zeros());
        s.attitude = Vec3::new(0.03, 0.06, -0.02);
        let base_tn = 0.2;
        let g = p.outer_effectiveness(&s, wind, base_tn);
        let h = 1e-6;
        let acc = |st: &VehicleState, tn: f64| {
            let (f, _) = p.net_force(st, wind, tn * THROTTLE_RANGE);
            f / p.config.mass
        };
        let a0 = acc(&s, base_tn);
        let mut sp = s.clone();
        sp.attitude.x += h;
        let dphi = (acc(&sp, base_tn) - a0) / h;
        let mut st = s.clone();
        st.attitude.y += h;
        let dtheta = (acc(&st, base_tn) - a0) / h;
        let dtn = (acc(&s, base_tn + h) - a0) / h;
        for (row, want) in [
            (0, Vec3::new(dphi.y, dtheta.y, dtn.y)),
            (1, Vec3::new(dphi.z, dtheta.z, dtn.z)),
            (2, Vec3::new(dphi.x, dtheta.x, dtn.x)),
        ] {
            for col in 0..3 {
                let got = g[(row, col)];
                let w = want[col];
                assert!(
                    (got - w).abs() <= 1e-3 * w.abs().max(1.0),
                    "G_o[{row}][{col}] = {got}, fd = {w}"
                );
            }
        }
    }
}
