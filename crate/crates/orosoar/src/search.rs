//! Local search for a zero-throttle soaring position.
//!
//! Zero-temperature neighborhood search over (x, z) hold targets: dwell at
//! the current target, score the dwell with a weighted cost of throttle and
//! residual motion, and step through the four axis directions, keeping
//! improving moves, backtracking on worsening ones, and stopping once the
//! cost falls below a threshold. The environment may change at any time, so
//! a converged search keeps scoring its position and resumes when the cost
//! rises back above the threshold.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Cost weights and the convergence threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchGains {
    /// Throttle weight (per percent of full range).
    pub k1: f64,
    /// Horizontal ground-speed weight.
    pub k2: f64,
    /// Vertical ground-speed weight.
    pub k3: f64,
    /// Pitch-rate weight.
    pub k4: f64,
    pub threshold: f64,
}

impl Default for SearchGains {
    fn default() -> Self {
        SearchGains { k1: 9.6, k2: 1.6, k3: 1.0, k4: 10.0, threshold: 43.0 }
    }
}

impl SearchGains {
    pub fn validate(&self) -> Result<(), String> {
        for (n, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("threshold", self.threshold),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("search gain {n} must be >= 0, got {v}"));
            }
        }
        if self.threshold <= 0.0 {
            return Err("threshold must be positive".into());
        }
        Ok(())
    }
}

/// Averaged dwell measurements feeding the cost: throttle in percent of
/// full range, speeds and pitch rate as means of absolute values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSample {
    pub throttle_pct: f64,
    pub x_speed: f64,
    pub z_speed: f64,
    pub pitch_rate: f64,
}

/// Weighted soaring cost of a dwell.
pub fn search_cost(sample: &CostSample, gains: &SearchGains) -> f64 {
    debug_assert!((0.0..=100.0).contains(&sample.throttle_pct));
    gains.k1 * sample.throttle_pct
        + gains.k2 * sample.x_speed.abs()
        + gains.k3 * sample.z_speed.abs()
        + gains.k4 * sample.pitch_rate.abs()
}

/// Step size schedule: bigger exploration while the cost is far above the
/// threshold, fine adjustment close to it.
pub fn step_size(cost: f64, threshold: f64) -> f64 {
    if cost >= 3.0 * threshold {
        0.3
    } else if cost >= 2.0 * threshold {
        0.2
    } else if cost >= 1.5 * threshold {
        0.1
    } else {
        0.05
    }
}

/// The four neighborhood directions in the (x, z) plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 4] =
        [Direction::Forward, Direction::Backward, Direction::Up, Direction::Down];

    pub fn unit(&self) -> (f64, f64) {
        match self {
            Direction::Forward => (1.0, 0.0),
            Direction::Backward => (-1.0, 0.0),
            Direction::Up => (0.0, 1.0),
            Direction::Down => (0.0, -1.0),
        }
    }

    pub fn reversed(&self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// Clearance constraint above the slanted ramp face: targets must stay
/// `clearance` above the line rising from (foot_x, 0) to (crest_x, crest_h).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceConstraint {
    pub foot_x: f64,
    pub crest_x: f64,
    pub crest_h: f64,
    pub clearance: f64,
}

impl FaceConstraint {
    pub fn min_z(&self, x: f64) -> f64 {
        if x > self.foot_x || x < self.crest_x {
            return self.clearance;
        }
        let frac = (self.foot_x - x) / (self.foot_x - self.crest_x);
        self.crest_h * frac + self.clearance
    }
}

/// The region the hold target may move in: an axis-aligned x-z box minus a
/// clearance zone over the ramp face.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeVolume {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    #[serde(default)]
    pub face: Option<FaceConstraint>,
}

impl SafeVolume {
    pub fn boxed(x_min: f64, x_max: f64, z_min: f64, z_max: f64) -> SafeVolume {
        SafeVolume { x_min, x_max, z_min, z_max, face: None }
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        let in_box =
            p.0 >= self.x_min && p.0 <= self.x_max && p.1 >= self.z_min && p.1 <= self.z_max;
        let above_face = self.face.map_or(true, |f| p.1 >= f.min_z(p.0));
        in_box && above_face
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchPhase {
    /// Settling at the current target (start of a dwell).
    Holding,
    /// Averaging the dwell window.
    Evaluating,
    /// Below threshold; staying put.
    Converged,
}

/// What one search update did; logged as a typed event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchEvent {
    /// Cost below threshold: stay at the current position.
    Converged,
    /// Improved while continuing in the same direction.
    KeptDirection,
    /// Improved right after a backtrack: picked a fresh random direction.
    RandomDirection,
    /// Worsened: returned to the previous position exactly.
    Reversed,
    /// A converged position stopped satisfying the threshold; searching again.
    Restarted,
    /// Every direction would leave the safe volume; holding position.
    AllDirectionsExcluded,
}

/// Search bookkeeping between dwells.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub current_target: (f64, f64),
    pub previous_target: (f64, f64),
    pub direction: Direction,
    pub returned: bool,
    pub previous_cost: f64,
    pub phase: SearchPhase,
    pub steps: usize,
    pub restarts: usize,
    rng: ChaCha8Rng,
}

impl SearchState {
    /// A fresh search at `target`. The first improving evaluation picks a
    /// random direction (the search starts as if it had just backtracked).
    pub fn new(target: (f64, f64), seed: u64) -> SearchState {
        SearchState {
            current_target: target,
            previous_target: target,
            direction: Direction::Forward,
            returned: true,
            previous_cost: f64::INFINITY,
            phase: SearchPhase::Holding,
            steps: 0,
            restarts: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn random_direction_within(
        &mut self,
        step: f64,
        safe: &SafeVolume,
    ) -> Option<Direction> {
        let valid: Vec<Direction> = Direction::ALL
            .into_iter()
            .filter(|d| {
                let (dx, dz) = d.unit();
                safe.contains((
                    self.current_target.0 + dx * step,
                    self.current_target.1 + dz * step,
                ))
            })
            .collect();
        if valid.is_empty() {
            None
        } else {
            Some(valid[self.rng.random_range(0..valid.len())])
        }
    }

    /// Advance the search with the cost of a completed dwell at the current
    /// target. Returns the event; the next target is `current_target`.
    pub fn step(&mut self, new_cost: f64, gains: &SearchGains, safe: &SafeVolume) -> SearchEvent {
        if new_cost < gains.threshold {
            self.previous_cost = new_cost;
            self.phase = SearchPhase::Converged;
            return SearchEvent::Converged;
        }

        let mut restarted = false;
        if self.phase == SearchPhase::Converged {
            // environment changed under a converged position: search again,
            // starting as fresh as the initial move
            self.restarts += 1;
            self.returned = true;
            self.previous_cost = f64::INFINITY;
            restarted = true;
        }
        self.phase = SearchPhase::Holding;

        let step = step_size(new_cost, gains.threshold);
        let event;
        if new_cost < self.previous_cost {
            // improvement: keep going, or re-randomize after a backtrack
            if self.returned {
                match self.random_direction_within(step, safe) {
                    Some(d) => {
                        self.direction = d;
                        self.returned = false;
                        event = SearchEvent::RandomDirection;
                    }
                    None => {
                        self.previous_cost = new_cost;
                        return SearchEvent::AllDirectionsExcluded;
                    }
                }
            } else {
                event = SearchEvent::KeptDirection;
            }
            let (dx, dz) = self.direction.unit();
            let candidate =
                (self.current_target.0 + dx * step, self.current_target.1 + dz * step);
            let candidate = if safe.contains(candidate) {
                candidate
            } else {
                // the continuing direction would exit: resample the rest
                match self.random_direction_within(step, safe) {
                    Some(d) => {
                        self.direction = d;
                        let (dx, dz) = d.unit();
                        (self.current_target.0 + dx * step, self.current_target.1 + dz * step)
                    }
                    None => {
                        self.previous_cost = new_cost;
                        return SearchEvent::AllDirectionsExcluded;
                    }
                }
            };
            self.previous_target = self.current_target;
            self.current_target = candidate;
        } else {
            // worse (ties count as worse): return to the previous position
            self.direction = self.direction.reversed();
            self.returned = true;
            let back = self.previous_target;
            self.previous_target = self.current_target;
            self.current_target = back;
            event = SearchEvent::Reversed;
        }
        self.previous_cost = new_cost;
        self.steps += 1;
        if restarted {
            SearchEvent::Restarted
        } else {
            event
        }
    }
}

/// One instant of the signals the dwell averages.
#[derive(Debug, Clone, Copy)]
pub struct DwellSample {
    pub t: f64,
    pub throttle_pct: f64,
    pub x_speed: f64,
    pub z_speed: f64,
    pub pitch_rate: f64,
}

/// Average a dwell window into a cost sample. The window must span at least
/// `dwell` seconds from its first sample; the first `settle` seconds are
/// excluded from the averages. Returns None while the window is too short.
pub fn dwell_evaluate(window: &[DwellSample], dwell: f64, settle: f64) -> Option<CostSample> {
    let first = window.first()?.t;
    let last = window.last()?.t;
    if last - first < dwell {
        return None;
    }
    let cut = first + settle;
    let mut n = 0usize;
    let mut acc = CostSample { throttle_pct: 0.0, x_speed: 0.0, z_speed: 0.0, pitch_rate: 0.0 };
    for s in window.iter().filter(|s| s.t >= cut) {
        acc.throttle_pct += s.throttle_pct;
        acc.x_speed += s.x_speed.abs();
        acc.z_speed += s.z_speed.abs();
        acc.pitch_rate += s.pitch_rate.abs();
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let n = n as f64;
    Some(CostSample {
        throttle_pct: (acc.throttle_pct / n).clamp(0.0, 100.0),
        x_speed: acc.x_speed / n,
        z_speed: acc.z_speed / n,
        pitch_rate: acc.pitch_rate / n,
    })
}
