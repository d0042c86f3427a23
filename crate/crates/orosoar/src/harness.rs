//! Scenario orchestration.
//!
//! One scenario = one fixed-rate loop wiring the wind field, plant,
//! controller, allocator and search together: sample wind, run the
//! controller, step the plant, update the search at dwell boundaries.
//! Deterministic under a fixed seed. Sweeps run independent scenarios per
//! parameter value and collect comparison metrics.

use crate::config::{ConfigError, ScenarioConfig};
use crate::indi::SoaringController;
use crate::search::{
    dwell_evaluate, search_cost, DwellSample, SearchPhase, SearchState,
};
use crate::simlog::{event_label, phase_label, LogRecord};
use crate::vehicle::{airspeed, ActuatorVector, Plant, SimFault, VehicleState, THROTTLE_RANGE};
use crate::wind::{WindError, WindField};
use crate::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error("no standby trim point found on the column x = {x}")]
    NoStandby { x: f64 },
    #[error("log is empty")]
    EmptyLog,
}

/// Run summary statistics.
#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    /// Mean throttle percent over the search-and-soar phase (from search
    /// start to the end of the log).
    pub mean_throttle_pct: Option<f64>,
    /// Seconds after search start until the throttle stays below 0.5% for
    /// at least 10 s.
    pub time_to_zero_throttle: Option<f64>,
    /// RMS distance from the mean position over the final converged phase.
    pub position_std: Option<f64>,
    /// Moves taken by the search (kept/random/reversed).
    pub search_steps: usize,
    /// Times a converged search resumed after an environment change.
    pub restarts: usize,
    /// Whether the log ends in a converged phase.
    pub converged: bool,
    /// Seconds after search start until the first convergence.
    pub time_to_converged: Option<f64>,
    /// Mean throttle percent over the final converged phase.
    pub converged_throttle_pct: Option<f64>,
    /// Mean position over the final converged phase.
    pub converged_mean_x: Option<f64>,
    pub converged_mean_z: Option<f64>,
}

/// Everything a run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<LogRecord>,
    pub metrics: RunMetrics,
    /// Simulation fault, if the run aborted early.
    pub fault: Option<String>,
    /// Raw simulation steps executed.
    pub steps_executed: usize,
    /// The standby position actually used (after auto-trim).
    pub standby: (f64, f64),
}

/// Find the standby altitude on the column `x`: the altitude whose hover
/// trim throttle sits closest to the configured target percent.
pub fn auto_standby_z(
    field: &WindField,
    plant: &Plant,
    x: f64,
    z_range: (f64, f64),
    target_pct: f64,
) -> Result<(f64, f64), HarnessError> {
    let n = ((z_range.1 - z_range.0) / 0.01).ceil() as usize;
    let mut best: Option<(f64, f64, f64)> = None; // (score, z, tn)
    for i in 0..=n {
        let z = z_range.1 - (z_range.1 - z_range.0) * i as f64 / n as f64;
        let wind = match field.sample(Vec3::new(x, 0.0, z), 0.0) {
            Ok(w) => w,
            Err(_) => continue,
        };
        if let Some((_, tn)) = plant.hover_trim(wind) {
            let score = (tn * 100.0 - target_pct).abs();
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, z, tn));
            }
        }
    }
    best.map(|(_, z, tn)| (z, tn)).ok_or(HarnessError::NoStandby { x })
}

/// Run one scenario to completion (or to a simulation fault, in which case
/// the partial log is returned with the fault recorded).
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let field = config.wind_field()?;
    let plant = config.plant()?;
    let safe = config.safe_volume();
    let dt = config.dt;
    let n_steps = (config.duration / dt).round() as usize;

    // standby: auto-trim altitude unless pinned
    let standby_x = config.standby.x;
    let (standby_z, trim_tn) = match config.standby.z {
        Some(z) => {
            let wind = field.sample(Vec3::new(standby_x, 0.0, z), 0.0)?;
            let tn = plant.hover_trim(wind).map(|(_, tn)| tn).unwrap_or(0.35);
            (z, tn)
        }
        None => auto_standby_z(
            &field,
            &plant,
            standby_x,
            (safe.z_min, safe.z_max),
            config.standby.target_throttle_pct,
        )?,
    };
    let standby = (standby_x, standby_z);

    // initial state at the standby, trimmed
    let wind0 = field.sample(Vec3::new(standby_x, 0.0, standby_z), 0.0)?;
    let theta0 = plant.hover_trim(wind0).map(|(th, _)| th).unwrap_or(0.05);
    let mut state = VehicleState::at_rest(Vec3::new(
        standby_x,
        config.initial_y_offset,
        standby_z,
    ));
    state.attitude = Vec3::new(0.0, theta0, 0.0);
    let mut actuators = ActuatorVector {
        aileron: 0.0,
        elevator: 0.0,
        rudder: 0.0,
        throttle: trim_tn * THROTTLE_RANGE,
    };
    let mut controller = SoaringController::new(config.controller.clone(), dt);
    controller.initialize(&state, &actuators);

    let mut search = SearchState::new(standby, config.seed);
    let mut search_active = false;
    let mut dwell: Vec<DwellSample> = Vec::new();
    let mut records = Vec::with_capacity(n_steps / config.log_decimation + 1);
    let mut fault = None;
    let mut steps_executed = 0;

    for i in 0..n_steps {
        let t = i as f64 * dt;
        let wind = {
            let mut w = field.sample(state.position, t)?;
            let (du, dw) = config.gust.delta(t);
            w.u += du;
            w.w += dw;
            w
        };

        // search layer: dwell bookkeeping at the current target
        let mut event = None;
        if t >= config.search.start_time {
            if !search_active {
                search_active = true;
                search.phase = SearchPhase::Holding;
                dwell.clear();
            }
            let euler_pitch_rate = state.attitude.x.cos() * state.rates.y
                - state.attitude.x.sin() * state.rates.z;
            dwell.push(DwellSample {
                t,
                throttle_pct: actuators.throttle / THROTTLE_RANGE * 100.0,
                x_speed: state.velocity.x,
                z_speed: state.velocity.z,
                pitch_rate: euler_pitch_rate,
            });
            if dwell.first().map_or(false, |s| t - s.t >= config.search.settle) {
                if search.phase == SearchPhase::Holding {
                    search.phase = SearchPhase::Evaluating;
                }
            }
            if let Some(sample) =
                dwell_evaluate(&dwell, config.search.dwell, config.search.settle)
            {
                let cost = search_cost(&sample, &config.search.gains);
                let ev = search.step(cost, &config.search.gains, &safe);
                event = Some((ev, cost));
                dwell.clear();
            }
        }

        let target = Vec3::new(search.current_target.0, 0.0, search.current_target.1);
        let (cmd, diag) = controller.step(&state, &actuators, target, &plant, wind);

        // log before stepping so row i describes time t
        if i % config.log_decimation == 0 {
            let v_air = airspeed(&state, wind);
            let excess = field
                .excess_updraft(state.position, t, &plant.polar)
                .unwrap_or(f64::NAN);
            records.push(LogRecord {
                t,
                position: [state.position.x, state.position.y, state.position.z],
                velocity: [state.velocity.x, state.velocity.y, state.velocity.z],
                attitude: [state.attitude.x, state.attitude.y, state.attitude.z],
                rates: [state.rates.x, state.rates.y, state.rates.z],
                lin_acc: [state.lin_acc.x, state.lin_acc.y, state.lin_acc.z],
                aileron: actuators.aileron,
                elevator: actuators.elevator,
                rudder: actuators.rudder,
                throttle_cmd: cmd.throttle,
                throttle_pct: actuators.throttle / THROTTLE_RANGE * 100.0,
                airspeed: v_air,
                wind_u: wind.u,
                wind_w: wind.w,
                acc_ref: [diag.xi_ddot_ref.x, diag.xi_ddot_ref.y, diag.xi_ddot_ref.z],
                v_alloc: [diag.v_alloc.x, diag.v_alloc.y, diag.v_alloc.z],
                roll_ref: diag.eta_ref.x,
                pitch_ref: diag.eta_ref.y,
                yaw_ref: diag.eta_ref.z,
                alloc_cost: diag.alloc_cost,
                alloc_iters: diag.alloc_iterations,
                alloc_degraded: diag.alloc_degraded,
                search_phase: if search_active {
                    phase_label(Some(search.phase)).to_string()
                } else {
                    phase_label(None).to_string()
                },
                target_x: search.current_target.0,
                target_z: search.current_target.1,
                search_cost: event.map(|(_, c)| c).unwrap_or(f64::NAN),
                search_event: event_label(event.map(|(e, _)| e)).to_string(),
                excess_updraft: excess,
            });
        } else if let Some((ev, cost)) = event {
            // search events always get a row, decimation or not
            let mut r = records.last().cloned().unwrap_or_else(|| blank_record(t));
            r.t = t;
            r.search_event = event_label(Some(ev)).to_string();
            r.search_cost = cost;
            r.search_phase = phase_label(Some(search.phase)).to_string();
            r.target_x = search.current_target.0;
            r.target_z = search.current_target.1;
            records.push(r);
        }

        match plant.step(&state, &mut actuators, &cmd, wind, dt) {
            Ok(next) => state = next,
            Err(e @ SimFault::NonFinite { .. }) | Err(e @ SimFault::BadDt(_)) => {
                fault = Some(e.to_string());
                break;
            }
        }
        steps_executed += 1;
    }

    let metrics = compute_metrics(&records).unwrap_or_default();
    Ok(RunOutput { records, metrics, fault, steps_executed, standby })
}

fn blank_record(t: f64) -> LogRecord {
    LogRecord {
        t,
        position: [f64::NAN; 3],
        velocity: [f64::NAN; 3],
        attitude: [f64::NAN; 3],
        rates: [f64::NAN; 3],
        lin_acc: [f64::NAN; 3],
        aileron: f64::NAN,
        elevator: f64::NAN,
        rudder: f64::NAN,
        throttle_cmd: f64::NAN,
        throttle_pct: f64::NAN,
        airspeed: f64::NAN,
        wind_u: f64::NAN,
        wind_w: f64::NAN,
        acc_ref: [f64::NAN; 3],
        v_alloc: [f64::NAN; 3],
        roll_ref: f64::NAN,
        pitch_ref: f64::NAN,
        yaw_ref: f64::NAN,
        alloc_cost: f64::NAN,
        alloc_iters: 0,
        alloc_degraded: false,
        search_phase: "standby".into(),
        target_x: f64::NAN,
        target_z: f64::NAN,
        search_cost: f64::NAN,
        search_event: String::new(),
        excess_updraft: f64::NAN,
    }
}

/// Contiguous converged stretches of a log, as index ranges.
pub fn converged_segments(records: &[LogRecord]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, r) in records.iter().enumerate() {
        if r.search_phase == "converged" {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push((s, i));
        }
    }
    if let Some(s) = start {
        out.push((s, records.len()));
    }
    out
}

/// Compute run metrics from a log.
pub fn compute_metrics(records: &[LogRecord]) -> Result<RunMetrics, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyLog);
    }
    let mut m = RunMetrics::default();
    let search_start = records.iter().position(|r| r.search_phase != "standby");

    m.search_steps = records
        .iter()
        .filter(|r| matches!(r.search_event.as_str(), "kept" | "random" | "reversed"))
        .count();
    m.restarts = records.iter().filter(|r| r.search_event == "restarted").count();

    if let Some(s0) = search_start {
        let t0 = records[s0].t;
        let phase_rows: Vec<&LogRecord> = records[s0..].iter().collect();
        if !phase_rows.is_empty() {
            m.mean_throttle_pct = Some(
                phase_rows.iter().map(|r| r.throttle_pct).sum::<f64>() / phase_rows.len() as f64,
            );
        }
        // first time the throttle stays below 0.5% for >= 10 s
        let mut run_start: Option<f64> = None;
        for r in &phase_rows {
            if r.throttle_pct < 0.5 {
                let s = *run_start.get_or_insert(r.t);
                if r.t - s >= 10.0 {
                    m.time_to_zero_throttle = Some(s - t0);
                    break;
                }
            } else {
                run_start = None;
            }
        }
        if let Some(first_conv) =
            records[s0..].iter().find(|r| r.search_phase == "converged")
        {
            m.time_to_converged = Some(first_conv.t - t0);
        }
    }

    let segments = converged_segments(records);
    if let Some(&(a, b)) = segments.last() {
        let seg = &records[a..b];
        let n = seg.len() as f64;
        let mx = seg.iter().map(|r| r.position[0]).sum::<f64>() / n;
        let my = seg.iter().map(|r| r.position[1]).sum::<f64>() / n;
        let mz = seg.iter().map(|r| r.position[2]).sum::<f64>() / n;
        let var = seg
            .iter()
            .map(|r| {
                (r.position[0] - mx).powi(2)
                    + (r.position[1] - my).powi(2)
                    + (r.position[2] - mz).powi(2)
            })
            .sum::<f64>()
            / n;
        m.position_std = Some(var.sqrt());
        m.converged_mean_x = Some(mx);
        m.converged_mean_z = Some(mz);
        m.converged_throttle_pct =
            Some(seg.iter().map(|r| r.throttle_pct).sum::<f64>() / n);
    }
    m.converged = records.last().map(|r| r.search_phase == "converged").unwrap_or(false);
    Ok(m)
}

/// Which scenario parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NominalSpeed,
    SlopeAngle,
}

impl SweepAxis {
    pub fn apply(&self, config: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = config.clone();
        for k in &mut c.wind.schedule {
            match self {
                SweepAxis::NominalSpeed => k.nominal_speed = value,
                SweepAxis::SlopeAngle => k.slope_angle_deg = value,
            }
        }
        if let SweepAxis::SlopeAngle = self {
            c.wind.ramp.slope_angle_deg = value;
        }
        c
    }
}

/// One sweep entry: the parameter value and the run result (faults recorded
/// per run; the sweep continues).
#[derive(Debug)]
pub struct SweepEntry {
    pub value: f64,
    pub result: Result<RunOutput, String>,
}

/// Run independent seeded scenarios across a parameter axis.
pub fn run_sweep(base: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Vec<SweepEntry> {
    values
        .iter()
        .map(|&value| {
            let cfg = axis.apply(base, value);
            let result = run_scenario(&cfg).map_err(|e| e.to_string());
            SweepEntry { value, result }
        })
        .collect()
}

/// Comparison table of a sweep as CSV.
pub fn sweep_csv(axis: SweepAxis, entries: &[SweepEntry]) -> String {
    let axis_name = match axis {
        SweepAxis::NominalSpeed => "nominal_speed",
        SweepAxis::SlopeAngle => "slope_angle_deg",
    };
    let mut out = format!(
        "{axis_name},converged,converged_mean_x,converged_mean_z,mean_throttle_pct,\
         time_to_zero_throttle,search_steps,restarts,fault\n"
    );
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    for e in entries {
        match &e.result {
            Ok(run) => {
                let m = &run.metrics;
                out.push_str(&format!(
                    "{:.4},{},{},{},{},{},{},{},{}\n",
                    e.value,
                    m.converged as u8,
                    opt(m.converged_mean_x),
                    opt(m.converged_mean_z),
                    opt(m.mean_throttle_pct),
                    opt(m.time_to_zero_throttle),
                    m.search_steps,
                    m.restarts,
                    run.fault.clone().unwrap_or_default(),
                ));
            }
            Err(err) => {
                out.push_str(&format!("{:.4},,,,,,,,{}\n", e.value, err));
            }
        }
    }
    out
}
