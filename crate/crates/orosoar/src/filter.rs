//! Second-order Butterworth low-pass filters.
//!
//! The incremental controller compares filtered accelerations against
//! filtered commands, so paired signals must pass through structurally
//! identical filters; [`Biquad::new`] with equal parameters yields
//! bit-identical responses.

/// Discrete biquad realized from the analog second-order Butterworth
/// prototype via the bilinear transform with frequency prewarping (exact
/// -3 dB point at the requested cutoff).
#[derive(Debug, Clone, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    /// `cutoff` in rad/s, `dt` the fixed sample period in seconds.
    pub fn new(cutoff: f64, dt: f64) -> Biquad {
        assert!(cutoff > 0.0 && dt > 0.0, "cutoff and dt must be positive");
        let k = (cutoff * dt / 2.0).tan();
        let sqrt2 = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
        let b0 = k * k * norm;
        Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - sqrt2 * k + k * k) * norm],
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    /// Advance one sample.
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.b[1] * self.x1 + self.b[2] * self.x2
            - self.a[0] * self.y1
            - self.a[1] * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    /// Last output without advancing.
    pub fn value(&self) -> f64 {
        self.y1
    }

    /// Jump the filter to a steady state at `v` (unit DC gain).
    pub fn reset(&mut self, v: f64) {
        self.x1 = v;
        self.x2 = v;
        self.y1 = v;
        self.y2 = v;
    }
}

/// A bank of identical biquads filtering a small fixed set of channels.
#[derive(Debug, Clone)]
pub struct FilterBank {
    filters: Vec<Biquad>,
}

impl FilterBank {
    pub fn new(channels: usize, cutoff: f64, dt: f64) -> FilterBank {
        FilterBank { filters: vec![Biquad::new(cutoff, dt); channels] }
    }

    pub fn step(&mut self, inputs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(inputs.len(), self.filters.len());
        self.filters.iter_mut().zip(inputs).map(|(f, &x)| f.step(x)).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.filters.iter().map(|f| f.value()).collect()
    }

    pub fn reset(&mut self, values: &[f64]) {
        for (f, &v) in self.filters.iter_mut().zip(values) {
            f.reset(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_dc_gain() {
        let mut f = Biquad::new(15.0, 0.002);
        let mut y = 0.0;
        for _ in 0..5000 {
            y = f.step(1.0);
        }
        assert!((y - 1.0).abs() < 1e-9, "dc gain {y}");
    }

    #[test]
    fn zero_in_zero_out() {
        let mut f = Biquad::new(10.0, 0.002);
        for _ in 0..100 {
            assert_eq!(f.step(0.0), 0.0);
        }
    }

    #[test]
    fn minus_3db_at_cutoff() {
        // frequency-sweep oracle at the cutoff: steady amplitude ratio must
        // be 1/sqrt(2) within 5%
        let dt = 0.002;
        let wc = 15.0;
        let mut f = Biquad::new(wc, dt);
        let mut peak: f64 = 0.0;
        let total = 40_000;
        for i in 0..total {
            let t = i as f64 * dt;
            let y = f.step((wc * t).sin());
            if i > total - 3000 {
                peak = peak.max(y.abs());
            }
        }
        let want = 1.0 / 2f64.sqrt();
        assert!(
            (peak - want).abs() / want < 0.05,
            "cutoff gain {peak}, want {want} within 5%"
        );
    }

    #[test]
    fn step_overshoot_within_butterworth_bound() {
        // zeta = 1/sqrt(2) gives ~4.3% overshoot; allow 5%
        let mut f = Biquad::new(10.0, 0.002);
        let mut max_y: f64 = 0.0;
        for _ in 0..20_000 {
            max_y = max_y.max(f.step(1.0));
        }
        assert!(max_y <= 1.05, "overshoot {max_y}");
    }

    #[test]
    fn identical_parameters_give_identical_impulse_response() {
        let mut a = Biquad::new(15.0, 0.002);
        let mut b = Biquad::new(15.0, 0.002);
        let mut x = 1.0;
        for _ in 0..500 {
            assert_eq!(a.step(x), b.step(x));
            x = 0.0;
        }
    }

    #[test]
    fn reset_establishes_steady_state() {
        let mut f = Biquad::new(10.0, 0.002);
        f.reset(3.5);
        assert_eq!(f.value(), 3.5);
        let y = f.step(3.5);
        assert!((y - 3.5).abs() < 1e-12);
    }
}
