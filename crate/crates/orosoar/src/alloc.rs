//! Box-constrained weighted-least-squares control allocation.
//!
//! Each outer-loop step distributes a commanded acceleration increment over
//! (roll, pitch, thrust) by minimizing
//!
//! ```text
//! C(u) = |W_u (u - u_p)|^2 + gamma * |W_v (G_o u - v)|^2,   lb <= u <= ub
//! ```
//!
//! with thrust de-prioritized through `W_v`, so the vehicle soars with the
//! throttle parked at its lower bound whenever pitch can do the work.
//! Thrust enters in normalized units ([0, 1] over the full command range) so
//! the weight triple applies to commensurate quantities.
//!
//! The solver is a primal active set: solve the free-variable least-squares
//! system, clamp the most-violated bound (index order breaks ties), and at
//! feasible candidates check the sign of the bound multipliers, releasing
//! the worst offender. Deterministic throughout.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("inverted bounds on control {index}: lower {lower} > upper {upper}")]
    InvertedBounds { index: usize, lower: f64, upper: f64 },
    #[error("non-finite allocation input")]
    NonFinite,
    #[error("weights must be positive (w[{0}] = {1})")]
    BadWeight(usize, f64),
}

/// Which bound a control sits on in the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveBound {
    Free,
    Lower,
    Upper,
}

/// The quadratic program of one allocation step.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    /// Objective-by-control effectiveness.
    pub g: Matrix3<f64>,
    /// Objective increment to realize.
    pub v: Vector3<f64>,
    /// Control weighting (diagonal).
    pub w_u: Vector3<f64>,
    /// Objective weighting (diagonal).
    pub w_v: Vector3<f64>,
    /// Objective-tracking scale factor.
    pub gamma: f64,
    /// Preferred control increment.
    pub u_p: Vector3<f64>,
    pub lower: Vector3<f64>,
    pub upper: Vector3<f64>,
}

impl AllocationProblem {
    pub fn validate(&self) -> Result<(), AllocError> {
        let finite = self.g.iter().all(|c| c.is_finite())
            && self.v.iter().all(|c| c.is_finite())
            && self.lower.iter().all(|c| c.is_finite())
            && self.upper.iter().all(|c| c.is_finite())
            && self.gamma.is_finite()
            && self.gamma > 0.0;
        if !finite {
            return Err(AllocError::NonFinite);
        }
        for i in 0..3 {
            if !(self.w_u[i] > 0.0) {
                return Err(AllocError::BadWeight(i, self.w_u[i]));
            }
            if !(self.w_v[i] > 0.0) {
                return Err(AllocError::BadWeight(i, self.w_v[i]));
            }
            if self.lower[i] > self.upper[i] {
                return Err(AllocError::InvertedBounds {
                    index: i,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }

    /// The allocation cost at `u`.
    pub fn cost(&self, u: &Vector3<f64>) -> f64 {
        let du = u - self.u_p;
        let r = self.g * u - self.v;
        let mut c = 0.0;
        for i in 0..3 {
            c += (self.w_u[i] * du[i]).powi(2) + self.gamma * (self.w_v[i] * r[i]).powi(2);
        }
        c
    }

    /// Gradient of the cost at `u`.
    pub fn gradient(&self, u: &Vector3<f64>) -> Vector3<f64> {
        let (h, c) = self.normal_system();
        2.0 * (h * u - c)
    }

    /// Weighted objective-tracking residual |W_v (G u - v)|.
    pub fn tracking_residual(&self, u: &Vector3<f64>) -> f64 {
        let r = self.g * u - self.v;
        (0..3).map(|i| (self.w_v[i] * r[i]).powi(2)).sum::<f64>().sqrt()
    }

    /// H and c with cost = u'Hu - 2c'u + const.
    fn normal_system(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let wu2 = Matrix3::from_diagonal(&self.w_u.map(|w| w * w));
        let wv2 = Matrix3::from_diagonal(&self.w_v.map(|w| w * w));
        let h = wu2 + self.g.transpose() * wv2 * self.g * self.gamma;
        let c = wu2 * self.u_p + self.g.transpose() * wv2 * self.v * self.gamma;
        (h, c)
    }
}

#[derive(Debug, Clone)]
pub struct AllocationSolution {
    pub u_wls: Vector3<f64>,
    pub active_set: [ActiveBound; 3],
    pub iterations: usize,
    pub achieved_cost: f64,
    /// Set when the solver ran out of iterations; the solution is the best
    /// feasible iterate found.
    pub degraded: bool,
    /// Objective rows with all-zero effectiveness (unreachable objectives).
    pub unreachable_rows: Vec<usize>,
}

/// Maximum KKT multiplier slack, relative to the local gradient scale.
const KKT_TOL: f64 = 1e-9;

/// Solve the allocation QP. `max_iterations` bounds the number of
/// free-subsystem solves; on exhaustion the best feasible iterate is
/// returned with `degraded` set.
pub fn wls_solve(problem: &AllocationProblem, max_iterations: usize) -> Result<AllocationSolution, AllocError> {
    problem.validate()?;
    let (h, c) = problem.normal_system();
    let unreachable_rows: Vec<usize> = (0..3)
        .filter(|&r| (0..3).all(|j| problem.g[(r, j)] == 0.0))
        .collect();

    // start from the preferred increment clamped into the box
    let mut u = Vector3::zeros();
    let mut active = [ActiveBound::Free; 3];
    for i in 0..3 {
        u[i] = problem.u_p[i].clamp(problem.lower[i], problem.upper[i]);
        if u[i] <= problem.lower[i] {
            active[i] = ActiveBound::Lower;
        } else if u[i] >= problem.upper[i] {
            active[i] = ActiveBound::Upper;
        }
    }
    // all-free first solve
    active = [ActiveBound::Free; 3];

    let grad_scale = {
        let gnorm = problem.gradient(&Vector3::zeros()).norm();
        gnorm.max(h.norm()).max(1.0)
    };

    let mut best: Option<(f64, Vector3<f64>, [ActiveBound; 3])> = None;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let candidate = solve_free(&h, &c, &active, problem);
        // find the most-violated bound among free variables
        let mut worst: Option<(usize, f64, ActiveBound)> = None;
        for i in 0..3 {
            if active[i] != ActiveBound::Free {
                continue;
            }
            let (viol, side) = if candidate[i] < problem.lower[i] {
                (problem.lower[i] - candidate[i], ActiveBound::Lower)
            } else if candidate[i] > problem.upper[i] {
                (candidate[i] - problem.upper[i], ActiveBound::Upper)
            } else {
                continue;
            };
            // strictly-greater keeps index order on ties
            if worst.map_or(true, |(_, wv, _)| viol > wv) {
                worst = Some((i, viol, side));
            }
        }
        if let Some((i, _, side)) = worst {
            active[i] = side;
            continue;
        }

        // feasible candidate: record and check multiplier signs
        u = candidate;
        let cost = problem.cost(&u);
        if best.as_ref().map_or(true, |(bc, _, _)| cost < *bc) {
            best = Some((cost, u, active));
        }
        let g = 2.0 * (h * u - c);
        let mut release: Option<(usize, f64)> = None;
        for i in 0..3 {
            let slack = match active[i] {
                ActiveBound::Free => continue,
                // at the lower bound the gradient must push down (g >= 0)
                ActiveBound::Lower => g[i],
                // at the upper bound it must push up (g <= 0)
                ActiveBound::Upper => -g[i],
            };
            if slack < -KKT_TOL * grad_scale {
                if release.map_or(true, |(_, ws)| slack < ws) {
                    release = Some((i, slack));
                }
            }
        }
        match release {
            Some((i, _)) => active[i] = ActiveBound::Free,
            None => {
                return Ok(AllocationSolution {
                    u_wls: u,
                    active_set: active,
                    iterations,
                    achieved_cost: cost,
                    degraded: false,
                    unreachable_rows,
                });
            }
        }
    }

    let (cost, u, active) = best.unwrap_or_else(|| {
        let mut u = Vector3::zeros();
        let mut act = [ActiveBound::Free; 3];
        for i in 0..3 {
            u[i] = problem.u_p[i].clamp(problem.lower[i], problem.upper[i]);
            act[i] = ActiveBound::Free;
        }
        (problem.cost(&u), u, act)
    });
    Ok(AllocationSolution {
        u_wls: u,
        active_set: active,
        iterations,
        achieved_cost: cost,
        degraded: true,
        unreachable_rows,
    })
}

/// Solve the free-variable subsystem of H u = c with active variables pinned
/// to their bounds.
fn solve_free(
    h: &Matrix3<f64>,
    c: &Vector3<f64>,
    active: &[ActiveBound; 3],
    problem: &AllocationProblem,
) -> Vector3<f64> {
    let free: Vec<usize> = (0..3).filter(|&i| active[i] == ActiveBound::Free).collect();
    let mut u = Vector3::zeros();
    for i in 0..3 {
        u[i] = match active[i] {
            ActiveBound::Lower => problem.lower[i],
            ActiveBound::Upper => problem.upper[i],
            ActiveBound::Free => 0.0,
        };
    }
    let k = free.len();
    if k == 0 {
        return u;
    }
    // rhs = c_f - H_fa u_a
    let mut rhs = vec![0.0; k];
    for (a, &i) in free.iter().enumerate() {
        let mut r = c[i];
        for j in 0..3 {
            if active[j] != ActiveBound::Free {
                r -= h[(i, j)] * u[j];
            }
        }
        rhs[a] = r;
    }
    match k {
        1 => {
            let i = free[0];
            u[i] = rhs[0] / h[(i, i)];
        }
        2 => {
            let (i, j) = (free[0], free[1]);
            let (a, b, d, e) = (h[(i, i)], h[(i, j)], h[(j, i)], h[(j, j)]);
            let det = a * e - b * d;
            u[i] = (rhs[0] * e - b * rhs[1]) / det;
            u[j] = (a * rhs[1] - rhs[0] * d) / det;
        }
        3 => {
            let sol = h
                .cholesky()
                .map(|ch| ch.solve(&Vector3::new(rhs[0], rhs[1], rhs[2])))
                .unwrap_or_else(|| {
                    h.lu().solve(&Vector3::new(rhs[0], rhs[1], rhs[2])).unwrap_or_default()
                });
            u = sol;
        }
        _ => unreachable!(),
    }
    u
}

/// KKT residual of a solution: the largest violation over stationarity of
/// free variables and multiplier signs of active ones, normalized by the
/// gradient scale. Zero at an exact optimum.
pub fn kkt_residual(problem: &AllocationProblem, solution: &AllocationSolution) -> f64 {
    let g = problem.gradient(&solution.u_wls);
    let scale = g.norm().max(problem.gradient(&Vector3::zeros()).norm()).max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let r = match solution.active_set[i] {
            ActiveBound::Free => g[i].abs(),
            ActiveBound::Lower => (-g[i]).max(0.0),
            ActiveBound::Upper => g[i].max(0.0),
        };
        worst = worst.max(r);
    }
    worst / scale
}

/// Published allocation weights: (roll, pitch, thrust) objective weights,
/// identity control weights, gamma, zero preferred increment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationWeights {
    #[serde(default = "default_w_v")]
    pub w_v: [f64; 3],
    #[serde(default = "default_w_u")]
    pub w_u: [f64; 3],
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub u_p: [f64; 3],
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_w_v() -> [f64; 3] {
    [1.0, 100.0, 1.0]
}
fn default_w_u() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}
fn default_gamma() -> f64 {
    1e6
}
fn default_max_iterations() -> usize {
    6
}

impl Default for AllocationWeights {
    fn default() -> Self {
        AllocationWeights {
            w_v: default_w_v(),
            w_u: default_w_u(),
            gamma: default_gamma(),
            u_p: [0.0; 3],
            max_iterations: default_max_iterations(),
        }
    }
}

/// Absolute limits of the allocated controls, in allocator units
/// (roll rad, pitch rad, thrust normalized to [0, 1]).
#[derive(Debug, Clone, Copy)]
pub struct ControlLimits {
    pub roll: (f64, f64),
    pub pitch: (f64, f64),
    pub thrust: (f64, f64),
}

/// Assemble the QP for one step: increment bounds keep the absolute commands
/// inside their limits given the current (roll, pitch, thrust-normalized)
/// command.
pub fn build_allocation_problem(
    v_wls: Vector3<f64>,
    g_o: Matrix3<f64>,
    current: Vector3<f64>,
    limits: &ControlLimits,
    weights: &AllocationWeights,
) -> Result<AllocationProblem, AllocError> {
    let lim = [limits.roll, limits.pitch, limits.thrust];
    let mut lower = Vector3::zeros();
    let mut upper = Vector3::zeros();
    for i in 0..3 {
        let (lo, hi) = lim[i];
        if lo > hi {
            return Err(AllocError::InvertedBounds { index: i, lower: lo, upper: hi });
        }
        lower[i] = lo - current[i];
        upper[i] = hi - current[i];
        // current command may sit exactly on a limit; keep the box non-empty
        if lower[i] > 0.0 {
            lower[i] = 0.0;
        }
        if upper[i] < 0.0 {
            upper[i] = 0.0;
        }
    }
    let problem = AllocationProblem {
        g: g_o,
        v: v_wls,
        w_u: Vector3::from_row_slice(&weights.w_u),
        w_v: Vector3::from_row_slice(&weights.w_v),
        gamma: weights.gamma,
        u_p: Vector3::from_row_slice(&weights.u_p),
        lower,
        upper,
    };
    problem.validate()?;
    Ok(problem)
}

/// Independent verification oracles for the allocation QP. These evaluate
/// the cost directly from its definition and never call the solver.
pub mod oracle {
    use super::AllocationProblem;
    use nalgebra::Vector3;

    /// Exhaustive grid minimum of the allocation cost over the box at the
    /// given resolution. Returns (cost, argmin).
    pub fn grid_min(problem: &AllocationProblem, step: f64) -> (f64, Vector3<f64>) {
        let counts: Vec<usize> = (0..3)
            .map(|i| ((problem.upper[i] - problem.lower[i]) / step).round() as usize + 1)
            .collect();
        let mut best = (f64::INFINITY, Vector3::zeros());
        let mut u = Vector3::zeros();
        for a in 0..counts[0] {
            u[0] = (problem.lower[0] + a as f64 * step).min(problem.upper[0]);
            for b in 0..counts[1] {
                u[1] = (problem.lower[1] + b as f64 * step).min(problem.upper[1]);
                for c in 0..counts[2] {
                    u[2] = (problem.lower[2] + c as f64 * step).min(problem.upper[2]);
                    let cost = cost_direct(problem, &u);
                    if cost < best.0 {
                        best = (cost, u);
                    }
                }
            }
        }
        best
    }

    /// Cost evaluated straight from the definition.
    pub fn cost_direct(p: &AllocationProblem, u: &Vector3<f64>) -> f64 {
        let mut c = 0.0;
        for i in 0..3 {
            c += (p.w_u[i] * (u[i] - p.u_p[i])).powi(2);
            let mut gi = 0.0;
            for j in 0..3 {
                gi += p.g[(i, j)] * u[j];
            }
            c += p.gamma * (p.w_v[i] * (gi - p.v[i])).powi(2);
        }
        c
    }

    /// First-order bound on how far the grid minimum can sit above the true
    /// minimum: gradient norm at the grid argmin times the cell diagonal,
    /// plus curvature over half a cell.
    pub fn grid_error_bound(p: &AllocationProblem, at: &Vector3<f64>, step: f64) -> f64 {
        let g = p.gradient(at);
        let half_diag = 0.5 * step * 3f64.sqrt();
        let (h, _) = {
            // reuse the quadratic structure: |H| bounds curvature
            let wu2 = nalgebra::Matrix3::from_diagonal(&p.w_u.map(|w| w * w));
            let wv2 = nalgebra::Matrix3::from_diagonal(&p.w_v.map(|w| w * w));
            (wu2 + p.g.transpose() * wv2 * p.g * p.gamma, ())
        };
        g.norm() * half_diag + h.norm() * half_diag * half_diag
    }
}
