//! Analytic surrogate for the wind-tunnel-plus-ramp flow field.
//!
//! World frame: +x points from the soaring region toward the tunnel outlet
//! (the direction the vehicle faces), +z up, y lateral. The jet travels in
//! -x. The ramp's leading edge (its foot, the edge the flow meets first)
//! sits on the ground at `leading_edge_x`; the plate rises downwind, so the
//! crest (trailing edge, "end of the slope") is at `leading_edge_x -
//! L*cos(slope)` and the wake extends to still smaller x.
//!
//! The vertical component is proportional to `nominal_speed * tan(slope)`,
//! shaped by a smooth along-flow envelope (weak at the foot, maximal near
//! the crest, exponential roll-off downstream of the crest and upstream of
//! the foot) and an exponential decay with height above the effective
//! surface. The horizontal component is the nominal speed attenuated by a
//! logarithmic boundary-layer profile near the surface. Everything is
//! continuous in position and exactly linear in the nominal speed.

use crate::polar::{PolarError, PolarModel};
use crate::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WindError {
    #[error("non-finite sample input (position or time)")]
    NonFinite,
    #[error("invalid ramp: {0}")]
    BadRamp(String),
    #[error("invalid wind schedule: {0}")]
    BadSchedule(String),
    #[error("empty feasibility grid ({nx}x{nz})")]
    EmptyGrid { nx: usize, nz: usize },
    #[error(transparent)]
    Polar(#[from] PolarError),
}

/// Horizontal/vertical air velocity at a point. `u` is the headwind
/// component, positive blowing toward the vehicle (against its facing
/// direction +x); `w` is positive up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindVector {
    pub u: f64,
    pub w: f64,
}

impl WindVector {
    /// Air velocity in world coordinates: the flow moves in -x.
    pub fn air_velocity(&self) -> Vec3 {
        Vec3::new(-self.u, 0.0, self.w)
    }
}

/// Ramp geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampConfig {
    /// Plate inclination, degrees.
    pub slope_angle_deg: f64,
    /// Plate length along the surface, m.
    #[serde(default = "default_ramp_length")]
    pub ramp_length: f64,
    /// Tunnel cross-section side, m.
    #[serde(default = "default_tunnel_cross_section")]
    pub tunnel_cross_section: f64,
    /// World x of the plate's ground-level leading edge.
    #[serde(default)]
    pub leading_edge_x: f64,
}

fn default_ramp_length() -> f64 {
    2.44
}
fn default_tunnel_cross_section() -> f64 {
    2.85
}

impl RampConfig {
    pub fn validate(&self) -> Result<(), WindError> {
        if !(self.slope_angle_deg >= 0.0 && self.slope_angle_deg < 90.0) {
            return Err(WindError::BadRamp(format!(
                "slope_angle_deg {} not in [0, 90)",
                self.slope_angle_deg
            )));
        }
        if !(self.ramp_length > 0.0) {
            return Err(WindError::BadRamp(format!(
                "ramp_length {} must be > 0",
                self.ramp_length
            )));
        }
        if !(self.tunnel_cross_section > 0.0) {
            return Err(WindError::BadRamp("tunnel_cross_section must be > 0".into()));
        }
        Ok(())
    }

    /// x of the crest (trailing edge) for a given slope.
    pub fn crest_x(&self, slope_deg: f64) -> f64 {
        self.leading_edge_x - self.ramp_length * slope_deg.to_radians().cos()
    }

    /// Crest height for a given slope.
    pub fn crest_height(&self, slope_deg: f64) -> f64 {
        self.ramp_length * slope_deg.to_radians().sin()
    }

    /// Height of the solid plate at `x` (zero off the plate). Unlike the
    /// flow's effective surface, this does not extend into the wake.
    pub fn solid_height(&self, x: f64, slope_deg: f64) -> f64 {
        let x_te = self.crest_x(slope_deg);
        if x >= x_te && x <= self.leading_edge_x {
            (self.leading_edge_x - x) * slope_deg.to_radians().tan()
        } else {
            0.0
        }
    }
}

/// One schedule knot: conditions at `time` (linearly interpolated between
/// knots, clamped beyond the ends).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleKnot {
    pub time: f64,
    pub nominal_speed: f64,
    pub slope_angle_deg: f64,
}

/// Piecewise-linear time series of tunnel conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindSchedule {
    pub knots: Vec<ScheduleKnot>,
}

impl WindSchedule {
    pub fn constant(nominal_speed: f64, slope_angle_deg: f64) -> Self {
        WindSchedule {
            knots: vec![ScheduleKnot { time: 0.0, nominal_speed, slope_angle_deg }],
        }
    }

    pub fn validate(&self) -> Result<(), WindError> {
        if self.knots.is_empty() {
            return Err(WindError::BadSchedule("schedule has no knots".into()));
        }
        for w in self.knots.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(WindError::BadSchedule(format!(
                    "times not strictly increasing ({} then {})",
                    w[0].time, w[1].time
                )));
            }
        }
        for k in &self.knots {
            if !(k.nominal_speed >= 0.0) {
                return Err(WindError::BadSchedule(format!(
                    "nominal_speed {} < 0",
                    k.nominal_speed
                )));
            }
            if !(k.slope_angle_deg >= 0.0 && k.slope_angle_deg < 90.0) {
                return Err(WindError::BadSchedule(format!(
                    "slope_angle_deg {} not in [0, 90)",
                    k.slope_angle_deg
                )));
            }
        }
        Ok(())
    }

    /// Conditions at `t` (clamped to the schedule ends).
    pub fn at(&self, t: f64) -> (f64, f64) {
        let ks = &self.knots;
        if t <= ks[0].time {
            return (ks[0].nominal_speed, ks[0].slope_angle_deg);
        }
        if t >= ks[ks.len() - 1].time {
            let k = ks[ks.len() - 1];
            return (k.nominal_speed, k.slope_angle_deg);
        }
        for w in ks.windows(2) {
            if t >= w[0].time && t <= w[1].time {
                let f = (t - w[0].time) / (w[1].time - w[0].time);
                return (
                    w[0].nominal_speed + f * (w[1].nominal_speed - w[0].nominal_speed),
                    w[0].slope_angle_deg + f * (w[1].slope_angle_deg - w[0].slope_angle_deg),
                );
            }
        }
        unreachable!("schedule interpolation fell through")
    }
}

/// Shape parameters of the surrogate flow. Lengths in meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindShape {
    /// Updraft e-folding height above the effective surface.
    /// Defaults to 0.5 x ramp_length.
    pub vertical_decay: f64,
    /// Updraft e-folding length downstream of the crest.
    /// Defaults to 1.0 x ramp_length.
    pub downstream_decay: f64,
    /// Upwash e-folding length upstream of the foot.
    pub upstream_onset: f64,
    /// Fraction of full deflection already present at the foot.
    pub foot_fraction: f64,
    /// Along-face development e-folding length as a fraction of the face's
    /// horizontal extent.
    pub development_fraction: f64,
    /// Fraction of the ideal surface-following deflection u*tan(slope)
    /// realized by the jet.
    pub deflection_efficiency: f64,
    /// Boundary-layer thickness: full free-stream speed at/above this height
    /// over the local surface.
    pub bl_ref_height: f64,
    /// Boundary-layer roughness length of the log profile.
    pub bl_roughness: f64,
}

impl WindShape {
    /// Spec-default shape for a given ramp.
    pub fn defaults_for(ramp: &RampConfig) -> Self {
        WindShape {
            vertical_decay: 0.5 * ramp.ramp_length,
            downstream_decay: 1.0 * ramp.ramp_length,
            upstream_onset: 0.25 * ramp.ramp_length,
            foot_fraction: 0.15,
            development_fraction: 0.5,
            deflection_efficiency: 0.35,
            bl_ref_height: 0.2,
            bl_roughness: 0.005,
        }
    }

    pub fn validate(&self) -> Result<(), WindError> {
        let positive = [
            ("vertical_decay", self.vertical_decay),
            ("downstream_decay", self.downstream_decay),
            ("upstream_onset", self.upstream_onset),
            ("development_fraction", self.development_fraction),
            ("deflection_efficiency", self.deflection_efficiency),
            ("bl_ref_height", self.bl_ref_height),
            ("bl_roughness", self.bl_roughness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WindError::BadRamp(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.foot_fraction >= 0.0 && self.foot_fraction < 1.0) {
            return Err(WindError::BadRamp(format!(
                "foot_fraction {} not in [0, 1)",
                self.foot_fraction
            )));
        }
        Ok(())
    }
}

/// The complete environment: geometry, schedule and flow shape.
#[derive(Debug, Clone)]
pub struct WindField {
    pub ramp: RampConfig,
    pub schedule: WindSchedule,
    pub shape: WindShape,
}

impl WindField {
    pub fn new(ramp: RampConfig, schedule: WindSchedule, shape: WindShape) -> Result<Self, WindError> {
        ramp.validate()?;
        schedule.validate()?;
        shape.validate()?;
        Ok(WindField { ramp, schedule, shape })
    }

    /// Height of the effective surface at `x` for a given slope: flat ground
    /// upwind of the foot, the plate itself over the face, and a smooth
    /// relaxation from crest height back to the floor in the wake.
    pub fn surface_height(&self, x: f64, slope_deg: f64) -> f64 {
        let tan = slope_deg.to_radians().tan();
        let x_le = self.ramp.leading_edge_x;
        let x_te = self.ramp.crest_x(slope_deg);
        if x >= x_le {
            0.0
        } else if x >= x_te {
            (x_le - x) * tan
        } else {
            self.ramp.crest_height(slope_deg) * (-(x_te - x) / self.shape.downstream_decay).exp()
        }
    }

    /// Along-flow updraft envelope in [0, 1]. `x` in world coordinates.
    fn envelope(&self, x: f64, slope_deg: f64) -> f64 {
        let x_le = self.ramp.leading_edge_x;
        let x_te = self.ramp.crest_x(slope_deg);
        let g0 = self.shape.foot_fraction;
        let face = (x_le - x_te).max(1e-9);
        let dev = self.shape.development_fraction * face;
        if x >= x_le {
            // upwash ahead of the foot
            g0 * (-(x - x_le) / self.shape.upstream_onset).exp()
        } else if x >= x_te {
            // development along the face
            1.0 - (1.0 - g0) * (-(x_le - x) / dev).exp()
        } else {
            // wake roll-off past the crest
            let g_crest = 1.0 - (1.0 - g0) * (-face / dev).exp();
            g_crest * (-(x_te - x) / self.shape.downstream_decay).exp()
        }
    }

    /// Log-profile boundary-layer factor in [0, 1] for height `h` above the
    /// local surface.
    fn bl_factor(&self, h: f64) -> f64 {
        if h >= self.shape.bl_ref_height {
            return 1.0;
        }
        let z0 = self.shape.bl_roughness;
        let num = (1.0 + h.max(0.0) / z0).ln();
        let den = (1.0 + self.shape.bl_ref_height / z0).ln();
        (num / den).clamp(0.0, 1.0)
    }

    /// Deterministic wind sample at a world position and time.
    pub fn sample(&self, position: Vec3, time: f64) -> Result<WindVector, WindError> {
        if !(position.iter().all(|c| c.is_finite()) && time.is_finite()) {
            return Err(WindError::NonFinite);
        }
        let (speed, slope_deg) = self.schedule.at(time);
        Ok(self.sample_at(position.x, position.z, speed, slope_deg))
    }

    fn sample_at(&self, x: f64, z: f64, speed: f64, slope_deg: f64) -> WindVector {
        let h = (z - self.surface_height(x, slope_deg)).max(0.0);
        let u = speed * self.bl_factor(h);
        let tan = slope_deg.to_radians().tan();
        let w = speed
            * tan
            * self.shape.deflection_efficiency
            * self.envelope(x, slope_deg)
            * (-h / self.shape.vertical_decay).exp();
        WindVector { u, w }
    }

    /// Airspeed of a vehicle holding still at a point: the magnitude of the
    /// local air velocity.
    pub fn hover_airspeed(wind: WindVector) -> f64 {
        (wind.u * wind.u + wind.w * wind.w).sqrt()
    }

    /// Updraft minus the sink rate at the hover-implied airspeed; zero marks
    /// sustainable soaring positions.
    pub fn excess_updraft(
        &self,
        position: Vec3,
        time: f64,
        polar: &PolarModel,
    ) -> Result<f64, WindError> {
        let wind = self.sample(position, time)?;
        let airspeed = Self::hover_airspeed(wind);
        let sink = polar.sink_rate(airspeed)?;
        Ok(wind.w - sink)
    }
}

/// Spec-shaped free function: sample with default shape parameters.
pub fn sample_wind(
    position: Vec3,
    time: f64,
    schedule: &WindSchedule,
    ramp: &RampConfig,
) -> Result<WindVector, WindError> {
    let field = WindField::new(
        ramp.clone(),
        schedule.clone(),
        WindShape::defaults_for(ramp),
    )?;
    field.sample(position, time)
}

/// Rectangular x-z grid at the tunnel's lateral center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn xs(&self) -> Vec<f64> {
        lin_space(self.x_min, self.x_max, self.nx)
    }
    pub fn zs(&self) -> Vec<f64> {
        lin_space(self.z_min, self.z_max, self.nz)
    }
}

fn lin_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Dense excess-updraft field. Cells where the hover airspeed falls outside
/// the polar domain hold NaN (no sustained flight possible there).
#[derive(Debug, Clone)]
pub struct FeasibilityGrid {
    pub spec: GridSpec,
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
    /// Row-major over z then x: `excess[iz * nx + ix]`.
    pub excess: Vec<f64>,
}

impl FeasibilityGrid {
    pub fn at(&self, ix: usize, iz: usize) -> f64 {
        self.excess[iz * self.spec.nx + ix]
    }

    /// Grid rows as CSV `x,z,excess_updraft` (NaN cells emitted as empty).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,z,excess_updraft")?;
        for (iz, &z) in self.zs.iter().enumerate() {
            for (ix, &x) in self.xs.iter().enumerate() {
                let e = self.at(ix, iz);
                if e.is_nan() {
                    writeln!(out, "{x:.4},{z:.4},")?;
                } else {
                    writeln!(out, "{x:.4},{z:.4},{e:.6}")?;
                }
            }
        }
        Ok(())
    }
}

/// Evaluate the excess-updraft field over a grid at time `t`.
pub fn feasible_region_grid(
    field: &WindField,
    polar: &PolarModel,
    spec: &GridSpec,
    t: f64,
) -> Result<FeasibilityGrid, WindError> {
    if spec.nx == 0 || spec.nz == 0 {
        return Err(WindError::EmptyGrid { nx: spec.nx, nz: spec.nz });
    }
    let xs = spec.xs();
    let zs = spec.zs();
    let mut excess = Vec::with_capacity(spec.nx * spec.nz);
    for &z in &zs {
        for &x in &xs {
            let v = match field.excess_updraft(Vec3::new(x, 0.0, z), t, polar) {
                Ok(e) => e,
                Err(WindError::Polar(PolarError::OutOfDomain { .. })) => f64::NAN,
                Err(e) => return Err(e),
            };
            excess.push(v);
        }
    }
    Ok(FeasibilityGrid { spec: spec.clone(), xs, zs, excess })
}

/// All altitudes in `[z_lo, z_hi]` where the excess updraft crosses zero on
/// the vertical line at `x` (scan plus bisection; out-of-domain stretches are
/// skipped).
pub fn column_zero_crossings(
    field: &WindField,
    polar: &PolarModel,
    x: f64,
    z_lo: f64,
    z_hi: f64,
    scan_points: usize,
    t: f64,
) -> Vec<f64> {
    let n = scan_points.max(2);
    let eval = |z: f64| -> Option<f64> {
        field
            .excess_updraft(Vec3::new(x, 0.0, z), t, polar)
            .ok()
            .filter(|e| e.is_finite())
    };
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let z = z_lo + (z_hi - z_lo) * i as f64 / (n - 1) as f64;
        let e = eval(z);
        if let (Some((pz, pe)), Some(ce)) = (prev, e) {
            if pe == 0.0 {
                out.push(pz);
            } else if pe * ce < 0.0 {
                // bisect
                let (mut a, mut b) = (pz, z);
                let (mut ea, _) = (pe, ce);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    match eval(m) {
                        Some(em) => {
                            if ea * em <= 0.0 {
                                b = m;
                            } else {
                                a = m;
                                ea = em;
                            }
                        }
                        None => break,
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        prev = e.map(|e| (z, e));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(slope: f64, speed: f64) -> WindField {
        let ramp = RampConfig {
            slope_angle_deg: slope,
            ramp_length: 2.44,
            tunnel_cross_section: 2.85,
            leading_edge_x: 0.0,
        };
        let shape = WindShape::defaults_for(&ramp);
        WindField::new(ramp, WindSchedule::constant(speed, slope), shape).unwrap()
    }

    #[test]
    fn flat_plate_deflects_nothing() {
        let f = field(0.0, 8.5);
        for &(x, z) in &[(-3.0, 0.5), (0.0, 1.0), (2.0, 0.05), (-1.2, 2.0)] {
            let w = f.sample(Vec3::new(x, 0.0, z), 0.0).unwrap();
            assert_eq!(w.w, 0.0, "w at ({x},{z})");
            assert!(w.u >= 0.0);
        }
    }

    #[test]
    fn free_stream_recovery_far_above() {
        let f = field(23.2, 8.5);
        let w = f.sample(Vec3::new(-2.3, 0.0, 40.0), 0.0).unwrap();
        assert!(w.w.abs() < 1e-6, "w={}", w.w);
        assert!((w.u - 8.5).abs() < 1e-9, "u={}", w.u);
    }

    #[test]
    fn linear_in_free_stream_speed() {
        let f1 = field(23.2, 8.5);
        let f2 = field(23.2, 17.0);
        for &(x, z) in &[(-2.3, 1.2), (-1.0, 0.4), (0.5, 0.2), (-4.0, 0.9)] {
            let a = f1.sample(Vec3::new(x, 0.0, z), 0.0).unwrap();
            let b = f2.sample(Vec3::new(x, 0.0, z), 0.0).unwrap();
            assert!((b.u - 2.0 * a.u).abs() <= 1e-13 * a.u.abs().max(1.0));
            assert!((b.w - 2.0 * a.w).abs() <= 1e-13 * a.w.abs().max(1.0));
        }
    }

    #[test]
    fn updraft_maximal_near_crest() {
        // Grid-scan oracle: for the published tunnel case the strongest
        // updraft sits close to the end of the slope.
        let f = field(23.2, 8.5);
        let crest_x = f.ramp.crest_x(23.2);
        let crest_z = f.ramp.crest_height(23.2);
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..240 {
            for j in 0..120 {
                let x = -6.0 + 8.0 * i as f64 / 239.0;
                let z = 0.02 + 3.0 * j as f64 / 119.0;
                let h = z - f.surface_height(x, 23.2);
                if h < 0.0 {
                    continue; // inside the plate
                }
                let w = f.sample(Vec3::new(x, 0.0, z), 0.0).unwrap().w;
                if w > best.0 {
                    best = (w, x, z);
                }
            }
        }
        assert!(best.0 > 0.0);
        assert!(
            (best.1 - crest_x).abs() < 0.45,
            "updraft max at x={} but crest at {crest_x}",
            best.1
        );
        assert!(best.2 < crest_z + 0.6, "updraft max too high: z={}", best.2);
    }

    #[test]
    fn boundary_layer_slows_near_surface() {
        let f = field(23.2, 8.5);
        let x = -1.2;
        let zs = f.surface_height(x, 23.2);
        let low = f.sample(Vec3::new(x, 0.0, zs + 0.01), 0.0).unwrap();
        let high = f.sample(Vec3::new(x, 0.0, zs + 1.0), 0.0).unwrap();
        assert!(low.u < 0.75 * high.u, "low.u={} high.u={}", low.u, high.u);
    }

    #[test]
    fn rejects_non_finite_inputs() {
        let f = field(23.2, 8.5);
        assert!(matches!(
            f.sample(Vec3::new(f64::NAN, 0.0, 1.0), 0.0),
            Err(WindError::NonFinite)
        ));
        assert!(matches!(
            f.sample(Vec3::new(0.0, 0.0, 1.0), f64::INFINITY),
            Err(WindError::NonFinite)
        ));
    }

    #[test]
    fn schedule_interpolates_and_clamps() {
        let s = WindSchedule {
            knots: vec![
                ScheduleKnot { time: 10.0, nominal_speed: 8.5, slope_angle_deg: 23.2 },
                ScheduleKnot { time: 20.0, nominal_speed: 9.8, slope_angle_deg: 23.2 },
            ],
        };
        s.validate().unwrap();
        assert_eq!(s.at(0.0).0, 8.5);
        assert_eq!(s.at(30.0).0, 9.8);
        let mid = s.at(15.0).0;
        assert!((mid - 9.15).abs() < 1e-12);
    }

    #[test]
    fn schedule_rejects_non_increasing_times() {
        let s = WindSchedule {
            knots: vec![
                ScheduleKnot { time: 10.0, nominal_speed: 8.5, slope_angle_deg: 23.2 },
                ScheduleKnot { time: 10.0, nominal_speed: 9.8, slope_angle_deg: 23.2 },
            ],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn excess_updraft_matches_components() {
        let f = field(23.2, 8.5);
        let polar = PolarModel::bundled_default();
        let p = Vec3::new(-2.5, 0.0, 1.1);
        let wind = f.sample(p, 0.0).unwrap();
        let v = WindField::hover_airspeed(wind);
        let want = wind.w - polar.sink_rate(v).unwrap();
        let got = f.excess_updraft(p, 0.0, &polar).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn zero_slope_excess_is_negative_everywhere() {
        let f = field(0.0, 8.5);
        let polar = PolarModel::bundled_default();
        for &(x, z) in &[(-3.0, 1.0), (0.0, 2.0), (-1.0, 0.5)] {
            let e = f.excess_updraft(Vec3::new(x, 0.0, z), 0.0, &polar).unwrap();
            assert!(e < 0.0, "excess {e} at ({x},{z})");
        }
    }

    #[test]
    fn grid_1x1_equals_pointwise() {
        let f = field(23.2, 8.5);
        let polar = PolarModel::bundled_default();
        let spec = GridSpec { x_min: -2.5, x_max: -2.5, z_min: 1.1, z_max: 1.1, nx: 1, nz: 1 };
        let g = feasible_region_grid(&f, &polar, &spec, 0.0).unwrap();
        let want = f.excess_updraft(Vec3::new(-2.5, 0.0, 1.1), 0.0, &polar).unwrap();
        assert_eq!(g.at(0, 0), want);
    }

    #[test]
    fn empty_grid_is_error() {
        let f = field(23.2, 8.5);
        let polar = PolarModel::bundled_default();
        let spec = GridSpec { x_min: -3.0, x_max: 0.0, z_min: 0.0, z_max: 2.0, nx: 0, nz: 5 };
        assert!(matches!(
            feasible_region_grid(&f, &polar, &spec, 0.0),
            Err(WindError::EmptyGrid { .. })
        ));
    }

    proptest! {
        #[test]
        fn continuity_above_boundary_layer(
            x in -6.0..2.0f64,
            frac in 0.0..1.0f64,
            dir in 0usize..2,
        ) {
            // 1 mm steps change the wind by less than 1e-3 m/s outside the
            // (deliberately steep) surface boundary layer.
            let f = field(23.2, 8.5);
            let z = f.surface_height(x, 23.2) + f.shape.bl_ref_height + 0.01 + 2.0 * frac;
            let p0 = Vec3::new(x, 0.0, z);
            let p1 = if dir == 0 {
                Vec3::new(x + 1e-3, 0.0, z)
            } else {
                Vec3::new(x, 0.0, z + 1e-3)
            };
            let a = f.sample(p0, 0.0).unwrap();
            let b = f.sample(p1, 0.0).unwrap();
            prop_assert!((a.u - b.u).abs() <= 1e-3, "du {}", (a.u - b.u).abs());
            prop_assert!((a.w - b.w).abs() <= 1e-3, "dw {}", (a.w - b.w).abs());
        }

        #[test]
        fn continuity_through_geometry_kinks(
            frac in 0.0..1.0f64,
            z in 0.05..3.0f64,
        ) {
            // Steps straddling the foot/crest/wake boundaries stay bounded by
            // the local gradient scale (no genuine jumps anywhere).
            let f = field(23.2, 8.5);
            let crest = f.ramp.crest_x(23.2);
            let x = crest - 0.5 + frac; // straddles the crest line region
            let a = f.sample(Vec3::new(x, 0.0, z), 0.0).unwrap();
            let b = f.sample(Vec3::new(x + 1e-4, 0.0, z), 0.0).unwrap();
            prop_assert!((a.w - b.w).abs() <= 5e-3);
            // the u profile is steep inside the boundary layer but never
            // steeper than its own design gradient
            let max_du_dh = 8.5 / (f.shape.bl_roughness
                * (1.0 + f.shape.bl_ref_height / f.shape.bl_roughness).ln());
            let dh = 1e-4 * (1.0 + 23.2f64.to_radians().tan());
            prop_assert!((a.u - b.u).abs() <= max_du_dh * dh * 1.05 + 1e-9);
        }

        #[test]
        fn linearity_property(
            k in 0.1..4.0f64,
            x in -5.0..1.0f64,
            z in 0.05..3.0f64,
        ) {
            let base = field(23.2, 8.5);
            let scaled = field(23.2, 8.5 * k);
            let a = base.sample(Vec3::new(x, 0.0, z), 0.0).unwrap();
            let b = scaled.sample(Vec3::new(x, 0.0, z), 0.0).unwrap();
            prop_assert!((b.u - k * a.u).abs() <= 1e-12 * (1.0 + a.u.abs() * k));
            prop_assert!((b.w - k * a.w).abs() <= 1e-12 * (1.0 + a.w.abs() * k));
        }
    }
}
