//! Fixed-schema run logs.
//!
//! One row per logged simulation step, CSV with the column set below. The
//! writer emits deterministic text (same run, same bytes); the reader
//! validates the header and reports missing columns by name.

use crate::search::{SearchEvent, SearchPhase};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log header mismatch: missing columns {0:?}")]
    MissingColumns(Vec<String>),
    #[error("log line {line}: {msg}")]
    Row { line: usize, msg: String },
    #[error("empty log")]
    Empty,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// The log column names, in order.
pub const COLUMNS: &[&str] = &[
    "t", "x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw", "p", "q", "r", "ax", "ay",
    "az", "aileron", "elevator", "rudder", "throttle_cmd", "throttle_pct", "airspeed", "wind_u",
    "wind_w", "acc_ref_x", "acc_ref_y", "acc_ref_z", "v_alloc_lat", "v_alloc_vert",
    "v_alloc_long", "roll_ref", "pitch_ref", "yaw_ref", "alloc_cost", "alloc_iters",
    "alloc_degraded", "search_phase", "target_x", "target_z", "search_cost", "search_event",
    "excess_updraft",
];

/// One logged step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub attitude: [f64; 3],
    pub rates: [f64; 3],
    pub lin_acc: [f64; 3],
    pub aileron: f64,
    pub elevator: f64,
    pub rudder: f64,
    pub throttle_cmd: f64,
    pub throttle_pct: f64,
    pub airspeed: f64,
    pub wind_u: f64,
    pub wind_w: f64,
    pub acc_ref: [f64; 3],
    pub v_alloc: [f64; 3],
    pub roll_ref: f64,
    pub pitch_ref: f64,
    pub yaw_ref: f64,
    pub alloc_cost: f64,
    pub alloc_iters: usize,
    pub alloc_degraded: bool,
    pub search_phase: String,
    pub target_x: f64,
    pub target_z: f64,
    pub search_cost: f64,
    pub search_event: String,
    pub excess_updraft: f64,
}

pub fn phase_label(phase: Option<SearchPhase>) -> &'static str {
    match phase {
        None => "standby",
        Some(SearchPhase::Holding) => "holding",
        Some(SearchPhase::Evaluating) => "evaluating",
        Some(SearchPhase::Converged) => "converged",
    }
}

pub fn event_label(event: Option<SearchEvent>) -> &'static str {
    match event {
        None => "",
        Some(SearchEvent::Converged) => "converged",
        Some(SearchEvent::KeptDirection) => "kept",
        Some(SearchEvent::RandomDirection) => "random",
        Some(SearchEvent::Reversed) => "reversed",
        Some(SearchEvent::Restarted) => "restarted",
        Some(SearchEvent::AllDirectionsExcluded) => "excluded",
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

/// Write records as CSV.
pub fn write_csv<W: std::io::Write>(mut out: W, records: &[LogRecord]) -> Result<(), LogError> {
    writeln!(out, "{}", COLUMNS.join(","))?;
    for r in records {
        let fields: Vec<String> = vec![
            format!("{:.4}", r.t),
            fmt(r.position[0]),
            fmt(r.position[1]),
            fmt(r.position[2]),
            fmt(r.velocity[0]),
            fmt(r.velocity[1]),
            fmt(r.velocity[2]),
            fmt(r.attitude[0]),
            fmt(r.attitude[1]),
            fmt(r.attitude[2]),
            fmt(r.rates[0]),
            fmt(r.rates[1]),
            fmt(r.rates[2]),
            fmt(r.lin_acc[0]),
            fmt(r.lin_acc[1]),
            fmt(r.lin_acc[2]),
            fmt(r.aileron),
            fmt(r.elevator),
            fmt(r.rudder),
            fmt(r.throttle_cmd),
            fmt(r.throttle_pct),
            fmt(r.airspeed),
            fmt(r.wind_u),
            fmt(r.wind_w),
            fmt(r.acc_ref[0]),
            fmt(r.acc_ref[1]),
            fmt(r.acc_ref[2]),
            fmt(r.v_alloc[0]),
            fmt(r.v_alloc[1]),
            fmt(r.v_alloc[2]),
            fmt(r.roll_ref),
            fmt(r.pitch_ref),
            fmt(r.yaw_ref),
            fmt(r.alloc_cost),
            r.alloc_iters.to_string(),
            (r.alloc_degraded as u8).to_string(),
            r.search_phase.clone(),
            fmt(r.target_x),
            fmt(r.target_z),
            fmt(r.search_cost),
            r.search_event.clone(),
            fmt(r.excess_updraft),
        ];
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Parse a log CSV produced by [`write_csv`]. Permissive about extra
/// whitespace, strict about the column set.
pub fn read_csv(text: &str) -> Result<Vec<LogRecord>, LogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| LogError::Row { line: 1, msg: e.to_string() })?
        .clone();
    let have: Vec<&str> = header.iter().collect();
    let missing: Vec<String> = COLUMNS
        .iter()
        .filter(|c| !have.contains(*c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(LogError::MissingColumns(missing));
    }
    let idx: Vec<usize> = COLUMNS
        .iter()
        .map(|c| have.iter().position(|h| h == c).unwrap())
        .collect();

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| LogError::Row { line, msg: e.to_string() })?;
        let f = |k: usize| -> Result<f64, LogError> {
            let s = &rec[idx[k]];
            if s.is_empty() {
                return Ok(f64::NAN);
            }
            s.parse().map_err(|_| LogError::Row {
                line,
                msg: format!("bad number {:?} in column {}", s, COLUMNS[k]),
            })
        };
        let s = |k: usize| rec[idx[k]].to_string();
        out.push(LogRecord {
            t: f(0)?,
            position: [f(1)?, f(2)?, f(3)?],
            velocity: [f(4)?, f(5)?, f(6)?],
            attitude: [f(7)?, f(8)?, f(9)?],
            rates: [f(10)?, f(11)?, f(12)?],
            lin_acc: [f(13)?, f(14)?, f(15)?],
            aileron: f(16)?,
            elevator: f(17)?,
            rudder: f(18)?,
            throttle_cmd: f(19)?,
            throttle_pct: f(20)?,
            airspeed: f(21)?,
            wind_u: f(22)?,
            wind_w: f(23)?,
            acc_ref: [f(24)?, f(25)?, f(26)?],
            v_alloc: [f(27)?, f(28)?, f(29)?],
            roll_ref: f(30)?,
            pitch_ref: f(31)?,
            yaw_ref: f(32)?,
            alloc_cost: f(33)?,
            alloc_iters: f(34)? as usize,
            alloc_degraded: f(35)? != 0.0,
            search_phase: s(36),
            target_x: f(37)?,
            target_z: f(38)?,
            search_cost: f(39)?,
            search_event: s(40),
            excess_updraft: f(41)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn sample_record(t: f64) -> LogRecord {
    LogRecord {
        t,
        position: [1.0, 0.0, 2.0],
        velocity: [0.1, 0.0, -0.05],
        attitude: [0.01, 0.05, 0.0],
        rates: [0.0; 3],
        lin_acc: [0.0; 3],
        aileron: 0.0,
        elevator: -0.1,
        rudder: 0.0,
        throttle_cmd: 1920.0,
        throttle_pct: 20.0,
        airspeed: 8.5,
        wind_u: 8.5,
        wind_w: 0.3,
        acc_ref: [0.0; 3],
        v_alloc: [0.0; 3],
        roll_ref: 0.0,
        pitch_ref: 0.05,
        yaw_ref: 0.0,
        alloc_cost: 1.0,
        alloc_iters: 1,
        alloc_degraded: false,
        search_phase: "standby".into(),
        target_x: -2.6,
        target_z: 1.4,
        search_cost: f64::NAN,
        search_event: String::new(),
        excess_updraft: -0.2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let records: Vec<LogRecord> = (0..5).map(|i| sample_record(i as f64 * 0.02)).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = read_csv(&text).unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(back[3].search_phase, "standby");
        assert!((back[3].throttle_pct - 20.0).abs() < 1e-9);
        assert!(back[3].search_cost.is_nan());
    }

    #[test]
    fn deterministic_bytes() {
        let records: Vec<LogRecord> = (0..10).map(|i| sample_record(i as f64 * 0.02)).collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&mut a, &records).unwrap();
        write_csv(&mut b, &records).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_columns_named() {
        let text = "t,x,y\n0.0,1.0,2.0\n";
        match read_csv(text) {
            Err(LogError::MissingColumns(cols)) => {
                assert!(cols.contains(&"throttle_pct".to_string()));
                assert!(cols.contains(&"search_phase".to_string()));
            }
            other => panic!("expected missing columns, got {other:?}"),
        }
    }
}
