//! Glide polar: sink rate as a function of airspeed.
//!
//! The polar is stored as two degree-4 polynomials split at a breakpoint
//! airspeed where the freewheeling propeller starts adding drag, so the sink
//! rate takes a bounded upward step there. Evaluation never extrapolates:
//! airspeeds outside the valid domain are an error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolarError {
    #[error("airspeed {airspeed:.3} m/s outside polar domain [{min:.3}, {max:.3}]")]
    OutOfDomain { airspeed: f64, min: f64, max: f64 },
    #[error("segment below breakpoint has {0} samples, need at least 5")]
    TooFewLowSamples(usize),
    #[error("segment at/above breakpoint has {0} samples, need at least 5")]
    TooFewHighSamples(usize),
    #[error("rank-deficient sample set: {0}")]
    RankDeficient(String),
    #[error("non-finite sample (airspeed {0}, sink {1})")]
    NonFiniteSample(f64, f64),
    #[error("polar csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Degree-4 polynomial in (v - center); centering keeps the normal equations
/// well conditioned over flight-speed ranges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Quartic {
    pub center: f64,
    pub coeffs: [f64; 5],
}

impl Quartic {
    pub fn eval(&self, v: f64) -> f64 {
        let d = v - self.center;
        // Horner
        let c = &self.coeffs;
        (((c[4] * d + c[3]) * d + c[2]) * d + c[1]) * d + c[0]
    }
}

/// Piecewise sink-rate model: `low` applies below the breakpoint airspeed,
/// `high` at and above it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolarModel {
    pub breakpoint: f64,
    pub low: Quartic,
    pub high: Quartic,
    /// Valid airspeed domain [min, max], m/s.
    pub domain: (f64, f64),
    /// Pooled RMS of fit residuals over both segments, m/s.
    pub residual_rms: f64,
}

impl PolarModel {
    /// Least-squares degree-4 fit per segment. Samples are split at
    /// `breakpoint`; each segment needs at least 5 samples. The valid domain
    /// is the sampled airspeed range.
    pub fn fit(samples: &[(f64, f64)], breakpoint: f64) -> Result<Self, PolarError> {
        for &(v, s) in samples {
            if !v.is_finite() || !s.is_finite() {
                return Err(PolarError::NonFiniteSample(v, s));
            }
        }
        let low: Vec<(f64, f64)> = samples.iter().copied().filter(|&(v, _)| v < breakpoint).collect();
        let high: Vec<(f64, f64)> = samples.iter().copied().filter(|&(v, _)| v >= breakpoint).collect();
        if low.len() < 5 {
            return Err(PolarError::TooFewLowSamples(low.len()));
        }
        if high.len() < 5 {
            return Err(PolarError::TooFewHighSamples(high.len()));
        }
        let (low_q, low_sse) = fit_quartic(&low)?;
        let (high_q, high_sse) = fit_quartic(&high)?;
        let n = (low.len() + high.len()) as f64;
        let vmin = samples.iter().map(|&(v, _)| v).fold(f64::INFINITY, f64::min);
        let vmax = samples.iter().map(|&(v, _)| v).fold(f64::NEG_INFINITY, f64::max);
        Ok(PolarModel {
            breakpoint,
            low: low_q,
            high: high_q,
            domain: (vmin, vmax),
            residual_rms: ((low_sse + high_sse) / n).sqrt(),
        })
    }

    /// Sink rate at `airspeed`, m/s (positive down). Errors outside the
    /// valid domain; never extrapolates silently.
    pub fn sink_rate(&self, airspeed: f64) -> Result<f64, PolarError> {
        if !(airspeed >= self.domain.0 && airspeed <= self.domain.1) {
            return Err(PolarError::OutOfDomain {
                airspeed,
                min: self.domain.0,
                max: self.domain.1,
            });
        }
        Ok(self.eval_unchecked(airspeed))
    }

    /// Sink rate with the airspeed clamped into the valid domain. The plant
    /// uses this during transients; steady flight stays inside the domain.
    pub fn sink_rate_clamped(&self, airspeed: f64) -> f64 {
        self.eval_unchecked(airspeed.clamp(self.domain.0, self.domain.1))
    }

    fn eval_unchecked(&self, v: f64) -> f64 {
        if v < self.breakpoint {
            self.low.eval(v)
        } else {
            self.high.eval(v)
        }
    }

    /// Airspeed of minimum sink over the valid domain (1 mm/s-resolution scan
    /// refined by golden-section on the winning segment).
    pub fn min_sink_airspeed(&self) -> f64 {
        let (lo, hi) = self.domain;
        let n = 2000;
        let mut best_v = lo;
        let mut best_s = f64::INFINITY;
        for i in 0..=n {
            let v = lo + (hi - lo) * i as f64 / n as f64;
            let s = self.eval_unchecked(v);
            if s < best_s {
                best_s = s;
                best_v = v;
            }
        }
        // local refinement around the scan winner
        let dv = (hi - lo) / n as f64;
        let (mut a, mut b) = ((best_v - dv).max(lo), (best_v + dv).min(hi));
        for _ in 0..60 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if self.eval_unchecked(m1) < self.eval_unchecked(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        0.5 * (a + b)
    }

    /// The sink-rate step at the breakpoint (high side minus low side).
    pub fn windmilling_step(&self) -> f64 {
        self.high.eval(self.breakpoint) - self.low.eval(self.breakpoint)
    }

    /// The polar bundled with the library: shaped after a small 3d-printed
    /// 5-channel model plane, minimum sink ~0.55 m/s near 9.1 m/s and a
    /// ~+0.3 m/s windmilling step at 9.8 m/s. Fitted from the bundled sample
    /// CSV at load.
    pub fn bundled_default() -> PolarModel {
        let samples = parse_samples_csv(BUNDLED_POLAR_CSV)
            .expect("bundled polar csv is valid");
        PolarModel::fit(&samples, 9.8).expect("bundled polar fits")
    }
}

/// Bundled default polar samples (airspeed m/s, sink m/s).
pub const BUNDLED_POLAR_CSV: &str = include_str!("../data/polar_default.csv");

/// Parse `(airspeed, sink)` sample rows from CSV text with an
/// `airspeed_mps,sink_mps` header.
pub fn parse_samples_csv(text: &str) -> Result<Vec<(f64, f64)>, PolarError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2; // header is line 1
        let rec = rec.map_err(|e| PolarError::Csv { line, msg: e.to_string() })?;
        if rec.len() != 2 {
            return Err(PolarError::Csv {
                line,
                msg: format!("expected 2 fields, got {}", rec.len()),
            });
        }
        let v: f64 = rec[0].parse().map_err(|_| PolarError::Csv {
            line,
            msg: format!("bad airspeed {:?}", &rec[0]),
        })?;
        let s: f64 = rec[1].parse().map_err(|_| PolarError::Csv {
            line,
            msg: format!("bad sink rate {:?}", &rec[1]),
        })?;
        if !v.is_finite() || !s.is_finite() {
            return Err(PolarError::Csv { line, msg: "non-finite value".into() });
        }
        out.push((v, s));
    }
    Ok(out)
}

/// Least-squares quartic through the samples; returns the polynomial and the
/// sum of squared residuals.
fn fit_quartic(samples: &[(f64, f64)]) -> Result<(Quartic, f64), PolarError> {
    use nalgebra::{DMatrix, DVector};
    let n = samples.len();
    let center = samples.iter().map(|&(v, _)| v).sum::<f64>() / n as f64;
    let mut a = DMatrix::zeros(n, 5);
    let mut b = DVector::zeros(n);
    for (i, &(v, s)) in samples.iter().enumerate() {
        let d = v - center;
        let mut p = 1.0;
        for j in 0..5 {
            a[(i, j)] = p;
            p *= d;
        }
        b[i] = s;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10;
    if svd.singular_values.iter().any(|&s| s < tol) {
        return Err(PolarError::RankDeficient(format!(
            "condition number exceeds 1e10 (sigma ratio {:.3e})",
            svd.singular_values.min() / smax
        )));
    }
    let x = svd.solve(&b, tol).map_err(|e| PolarError::RankDeficient(e.to_string()))?;
    let resid = &a * &x - &b;
    let sse = resid.dot(&resid);
    let mut coeffs = [0.0; 5];
    for j in 0..5 {
        coeffs[j] = x[j];
    }
    Ok((Quartic { center, coeffs }, sse))
}
