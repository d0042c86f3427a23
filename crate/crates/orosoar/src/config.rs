//! Versioned scenario configuration.
//!
//! Scenarios are TOML files with an explicit `version` field. Unknown keys
//! are errors, not warnings, so a stored scenario keeps meaning exactly what
//! it meant when written.

use crate::alloc::AllocationWeights;
use crate::indi::{ControllerConfig, ControllerGains};
use crate::polar::{parse_samples_csv, PolarError, PolarModel};
use crate::search::{SafeVolume, SearchGains};
use crate::vehicle::{Plant, VehicleConfig};
use crate::wind::{RampConfig, ScheduleKnot, WindError, WindField, WindSchedule, WindShape};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The schema version this build reads and writes.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported config version {0} (this build reads version {CONFIG_VERSION})")]
    Version(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Optional overrides of the analytic flow-shape parameters; anything left
/// unset falls back to the ramp-derived defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindShapeOverrides {
    pub vertical_decay: Option<f64>,
    pub downstream_decay: Option<f64>,
    pub upstream_onset: Option<f64>,
    pub foot_fraction: Option<f64>,
    pub development_fraction: Option<f64>,
    pub deflection_efficiency: Option<f64>,
    pub bl_ref_height: Option<f64>,
    pub bl_roughness: Option<f64>,
}

impl WindShapeOverrides {
    pub fn resolve(&self, ramp: &RampConfig) -> WindShape {
        let mut s = WindShape::defaults_for(ramp);
        if let Some(v) = self.vertical_decay {
            s.vertical_decay = v;
        }
        if let Some(v) = self.downstream_decay {
            s.downstream_decay = v;
        }
        if let Some(v) = self.upstream_onset {
            s.upstream_onset = v;
        }
        if let Some(v) = self.foot_fraction {
            s.foot_fraction = v;
        }
        if let Some(v) = self.development_fraction {
            s.development_fraction = v;
        }
        if let Some(v) = self.deflection_efficiency {
            s.deflection_efficiency = v;
        }
        if let Some(v) = self.bl_ref_height {
            s.bl_ref_height = v;
        }
        if let Some(v) = self.bl_roughness {
            s.bl_roughness = v;
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindConfig {
    pub ramp: RampConfig,
    #[serde(default)]
    pub shape: WindShapeOverrides,
    /// Tunnel conditions over time; at least one knot.
    pub schedule: Vec<ScheduleKnot>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarConfig {
    /// CSV of (airspeed_mps, sink_mps) samples; the bundled polar when
    /// unset.
    pub csv: Option<String>,
    /// Windmilling onset airspeed used when fitting CSV samples.
    pub breakpoint: f64,
}

impl Default for PolarConfig {
    fn default() -> Self {
        PolarConfig { csv: None, breakpoint: 9.8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub gains: SearchGains,
    /// Dwell length per evaluated position, s.
    pub dwell: f64,
    /// Initial span of each dwell excluded from the averages, s.
    pub settle: f64,
    /// Simulation time at which the search starts, s.
    pub start_time: f64,
    /// Margin kept from the physical volume bounds, m.
    pub safe_margin: f64,
    /// Minimum target clearance above the ramp face, m.
    pub face_clearance: f64,
    /// Explicit safe-volume override (derived from geometry when unset).
    pub safe_volume: Option<SafeVolume>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            gains: SearchGains::default(),
            dwell: 8.0,
            settle: 3.0,
            start_time: 30.0,
            safe_margin: 0.3,
            face_clearance: 0.15,
            safe_volume: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StandbyConfig {
    /// Horizontal position of the standby hold, m.
    pub x: f64,
    /// Altitude of the standby hold; auto-trimmed when unset.
    pub z: Option<f64>,
    /// Trim throttle (percent of full range) the auto-trim looks for.
    pub target_throttle_pct: f64,
}

impl Default for StandbyConfig {
    fn default() -> Self {
        StandbyConfig { x: -2.6, z: None, target_throttle_pct: 20.0 }
    }
}

/// Deterministic wind perturbation pulse (half-cosine bump added to the
/// sampled wind), for exercising throttle recovery.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GustConfig {
    pub enabled: bool,
    pub t_start: f64,
    pub duration: f64,
    pub delta_u: f64,
    pub delta_w: f64,
}

impl Default for GustConfig {
    fn default() -> Self {
        GustConfig { enabled: false, t_start: 0.0, duration: 5.0, delta_u: 0.0, delta_w: 0.0 }
    }
}

impl GustConfig {
    /// Wind perturbation at time `t` (zero outside the pulse).
    pub fn delta(&self, t: f64) -> (f64, f64) {
        if !self.enabled || t < self.t_start || t > self.t_start + self.duration {
            return (0.0, 0.0);
        }
        let phase = (t - self.t_start) / self.duration;
        let bump = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * phase).cos());
        (self.delta_u * bump, self.delta_w * bump)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    /// Log every n-th simulation step.
    #[serde(default = "default_log_decimation")]
    pub log_decimation: usize,
    pub wind: WindConfig,
    #[serde(default)]
    pub polar: PolarConfig,
    #[serde(default)]
    pub vehicle: VehicleConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub standby: StandbyConfig,
    #[serde(default)]
    pub gust: GustConfig,
    /// Initial lateral offset from the tunnel centerline, m (gives the
    /// roll/yaw loops a transient to reject).
    #[serde(default = "default_y_offset")]
    pub initial_y_offset: f64,
}

fn default_dt() -> f64 {
    0.002
}
fn default_log_decimation() -> usize {
    10
}
fn default_y_offset() -> f64 {
    0.05
}

impl ScenarioConfig {
    /// Parse a TOML scenario, mapping parse failures to line/column
    /// diagnostics.
    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => offset_to_line_col(text, span.start),
                None => (0, 0),
            };
            ConfigError::Parse { line, column, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<ScenarioConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(ConfigError::Invalid(format!("dt {} outside (0, 0.01]", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(ConfigError::Invalid(format!("duration {} invalid", self.duration)));
        }
        if self.log_decimation == 0 {
            return Err(ConfigError::Invalid("log_decimation must be >= 1".into()));
        }
        self.wind.ramp.validate()?;
        self.schedule().validate()?;
        self.wind.shape.resolve(&self.wind.ramp).validate()?;
        self.vehicle.validate().map_err(ConfigError::Invalid)?;
        self.controller.gains.validate().map_err(ConfigError::Invalid)?;
        self.search.gains.validate().map_err(ConfigError::Invalid)?;
        if !(self.search.dwell > self.search.settle && self.search.settle >= 0.0) {
            return Err(ConfigError::Invalid("dwell must exceed settle".into()));
        }
        if self.search.start_time < 0.0 {
            return Err(ConfigError::Invalid("search start_time must be >= 0".into()));
        }
        let safe = self.safe_volume();
        if !(safe.x_min < safe.x_max && safe.z_min < safe.z_max) {
            return Err(ConfigError::Invalid("safe volume is empty".into()));
        }
        if !safe.contains((self.standby.x, self.standby.z.unwrap_or(safe.z_min))) {
            return Err(ConfigError::Invalid(format!(
                "standby ({}, {:?}) outside the safe volume",
                self.standby.x, self.standby.z
            )));
        }
        let w = &self.controller.weights;
        if w.w_v.iter().chain(&w.w_u).any(|&x| !(x > 0.0)) || !(w.gamma > 0.0) {
            return Err(ConfigError::Invalid("allocation weights must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> WindSchedule {
        WindSchedule { knots: self.wind.schedule.clone() }
    }

    pub fn wind_field(&self) -> Result<WindField, ConfigError> {
        Ok(WindField::new(
            self.wind.ramp.clone(),
            self.schedule(),
            self.wind.shape.resolve(&self.wind.ramp),
        )?)
    }

    pub fn polar_model(&self) -> Result<PolarModel, ConfigError> {
        match &self.polar.csv {
            None => Ok(PolarModel::bundled_default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let samples = parse_samples_csv(&text)?;
                Ok(PolarModel::fit(&samples, self.polar.breakpoint)?)
            }
        }
    }

    pub fn plant(&self) -> Result<Plant, ConfigError> {
        Ok(Plant::new(self.vehicle.clone(), self.polar_model()?))
    }

    /// The x-z box the search may move the hold target within: spans the
    /// wake through the region ahead of the ramp's foot, floor to a bit
    /// above the jet, shrunk by the configured margin.
    pub fn safe_volume(&self) -> SafeVolume {
        if let Some(v) = self.search.safe_volume {
            return v;
        }
        let ramp = &self.wind.ramp;
        let slope0 = self
            .wind
            .schedule
            .first()
            .map(|k| k.slope_angle_deg)
            .unwrap_or(ramp.slope_angle_deg);
        let crest_x = ramp.crest_x(slope0);
        let m = self.search.safe_margin;
        SafeVolume {
            x_min: crest_x - 1.5 * ramp.ramp_length + m,
            x_max: ramp.leading_edge_x + 0.75 * ramp.ramp_length - m,
            z_min: m,
            z_max: ramp.crest_height(slope0) + ramp.tunnel_cross_section - m,
        }
    }

    /// Controller gains shortcut.
    pub fn gains(&self) -> &ControllerGains {
        &self.controller.gains
    }

    /// Allocation weights shortcut.
    pub fn weights(&self) -> &AllocationWeights {
        &self.controller.weights
    }
}

fn offset_to_line_col(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in text.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
version = 1
duration = 10.0

[wind.ramp]
slope_angle_deg = 23.2

[[wind.schedule]]
time = 0.0
nominal_speed = 8.5
slope_angle_deg = 23.2
"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ScenarioConfig::from_toml_str(&minimal_toml()).unwrap();
        assert_eq!(cfg.version, 1);
        assert_eq!(cfg.dt, 0.002);
        assert_eq!(cfg.controller.weights.w_v, [1.0, 100.0, 1.0]);
        assert_eq!(cfg.search.gains.threshold, 43.0);
        assert_eq!(cfg.search.dwell, 8.0);
        assert!((cfg.vehicle.mass - 0.716).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_are_errors_with_line_numbers() {
        let text = minimal_toml() + "\n[controller]\nnot_a_field = 3\n";
        match ScenarioConfig::from_toml_str(&text) {
            Err(ConfigError::Parse { line, .. }) => assert!(line > 1, "line {line}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let text = minimal_toml().replace("version = 1", "version = 2");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&text),
            Err(ConfigError::Version(2))
        ));
    }

    #[test]
    fn bad_dt_rejected() {
        let text = minimal_toml().replace("duration = 10.0", "duration = 10.0\ndt = 0.05");
        match ScenarioConfig::from_toml_str(&text) {
            Err(ConfigError::Invalid(msg)) => assert!(msg.contains("dt"), "{msg}"),
            other => panic!("expected invalid dt, got {other:?}"),
        }
    }

    #[test]
    fn shape_overrides_resolve_against_ramp_defaults() {
        let mut cfg = ScenarioConfig::from_toml_str(&minimal_toml()).unwrap();
        let shape = cfg.wind.shape.resolve(&cfg.wind.ramp);
        assert!((shape.vertical_decay - 0.5 * 2.44).abs() < 1e-12);
        assert!((shape.downstream_decay - 2.44).abs() < 1e-12);
        cfg.wind.shape.vertical_decay = Some(0.28);
        let shape = cfg.wind.shape.resolve(&cfg.wind.ramp);
        assert_eq!(shape.vertical_decay, 0.28);
        assert!((shape.downstream_decay - 2.44).abs() < 1e-12);
    }

    #[test]
    fn safe_volume_derived_from_geometry() {
        let cfg = ScenarioConfig::from_toml_str(&minimal_toml()).unwrap();
        let v = cfg.safe_volume();
        assert!(v.x_min < -4.0 && v.x_max > 1.0);
        assert_eq!(v.z_min, 0.3);
        assert!(v.z_max > 3.0);
        assert!(v.contains((cfg.standby.x, 1.0)));
    }

    #[test]
    fn gust_pulse_is_zero_outside_window_and_smooth_inside() {
        let g = GustConfig {
            enabled: true,
            t_start: 10.0,
            duration: 4.0,
            delta_u: 1.0,
            delta_w: -0.5,
        };
        assert_eq!(g.delta(9.9), (0.0, 0.0));
        assert_eq!(g.delta(14.1), (0.0, 0.0));
        let (du, dw) = g.delta(12.0); // peak at the center
        assert!((du - 1.0).abs() < 1e-12 && (dw + 0.5).abs() < 1e-12);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::from_toml_str(&minimal_toml()).unwrap();
        let text = cfg.to_toml_string();
        let cfg2 = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.to_toml_string(), cfg2.to_toml_string());
    }
}
