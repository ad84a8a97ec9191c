//! Exact solutions: optimal gain, the relative value iteration oracle, the
//! breakpoint staircase and the two constrained solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::model::{CellModel, ClassRates};
use crate::mdp::policy::{
    evaluate_policy, fair_fraction, validate_alpha, Policy, RandomizedThresholdPolicy,
    ThresholdPolicy,
};

/// Optimal average reward `sum_s g(s) max(R_mobile(s), xi R_static(s))`.
/// Per-state greedy choice is optimal because actions do not affect
/// transitions.
pub fn lambda_star(model: &CellModel, xi: f64) -> f64 {
    model
        .stationary
        .iter()
        .zip(&model.rates)
        .map(|(g, r)| g * r.mobile.max(xi * r.static_))
        .sum()
}

#[derive(Debug, Clone)]
pub struct RviResult {
    pub gain: f64,
    /// Differential values, normalised to 0 at the empty state.
    pub h: Vec<f64>,
    pub iterations: usize,
}

/// Relative value iteration on the average-reward optimality equation
/// `h(s) = max_x (x R_m(s) + xi (1-x) R_s(s)) - lambda + E h(S')`.
///
/// Stops when the span of the Bellman increment `T h - h` is at most `tol`;
/// the gain is the midpoint of its range.
pub fn relative_value_iteration(
    model: &CellModel,
    xi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RviResult> {
    let n = model.len();
    let outcomes = arrival_outcomes(model);
    let reward: Vec<f64> = model
        .rates
        .iter()
        .map(|r| r.mobile.max(xi * r.static_))
        .collect();
    let successors: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            outcomes
                .iter()
                .map(|(a, _)| model.space.successor(s, a))
                .collect()
        })
        .collect();
    let reference = model.space.empty_index();
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    for iteration in 1..=max_iter {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..n {
            let expected: f64 = successors[s]
                .iter()
                .zip(&outcomes)
                .map(|(&t, (_, p))| p * h[t])
                .sum();
            next[s] = reward[s] + expected;
            let diff = next[s] - h[s];
            lo = lo.min(diff);
            hi = hi.max(diff);
        }
        let offset = next[reference];
        for (dst, src) in h.iter_mut().zip(&next) {
            *dst = src - offset;
        }
        if hi - lo <= tol {
            return Ok(RviResult {
                gain: 0.5 * (lo + hi),
                h,
                iterations: iteration,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "relative value iteration",
        iterations: max_iter,
    })
}

/// Joint per-slot arrival vectors with positive probability.
fn arrival_outcomes(model: &CellModel) -> Vec<(Vec<u32>, f64)> {
    let mut outcomes = vec![(Vec::new(), 1.0)];
    for road in &model.scenario.roads {
        let pmf = road.arrival_pmf();
        outcomes = outcomes
            .into_iter()
            .flat_map(|(prefix, p)| {
                pmf.iter()
                    .enumerate()
                    .filter(|(_, q)| **q > 0.0)
                    .map(move |(k, q)| {
                        let mut a = prefix.clone();
                        a.push(k as u32);
                        (a, p * q)
                    })
            })
            .collect();
    }
    outcomes
}

/// Relative width within which two ratios count as one breakpoint. States
/// holding the same users in a different order can differ by a few ulps.
pub const BREAKPOINT_MERGE_TOLERANCE: f64 = 1e-12;

/// Sorted distinct ratios `R_mobile(s) / R_static(s)` over states with
/// `R_mobile(s) > 0`: the multipliers at which the threshold policy flips.
/// Ratios closer than [`BREAKPOINT_MERGE_TOLERANCE`] are merged into the
/// smallest of them.
pub fn breakpoints(model: &CellModel) -> Result<Vec<f64>> {
    let mut ratios = Vec::new();
    for r in &model.rates {
        if r.mobile > 0.0 {
            if r.static_ <= 0.0 {
                return Err(Error::invalid("rate table", "static rate must be > 0"));
            }
            ratios.push(r.mobile / r.static_);
        }
    }
    ratios.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(ratios.len());
    for x in ratios {
        match merged.last() {
            Some(&b) if x - b <= BREAKPOINT_MERGE_TOLERANCE * b => {}
            _ => merged.push(x),
        }
    }
    Ok(merged)
}

/// Optimal class throughputs as a piecewise-constant function of `xi`.
///
/// `static_levels[0]` and `mobile_levels[0]` hold for `xi` in `[0, b_1)`;
/// entry `k >= 1` holds strictly between `b_k` and `b_{k+1}`. Each level is
/// evaluated inside its open interval, away from rounding at the ends.
#[derive(Debug, Clone)]
pub struct Staircase {
    pub breakpoints: Vec<f64>,
    pub static_levels: Vec<f64>,
    pub mobile_levels: Vec<f64>,
}

impl Staircase {
    pub fn new(model: &CellModel) -> Result<Self> {
        let breakpoints = breakpoints(model)?;
        let mut static_levels = Vec::with_capacity(breakpoints.len() + 1);
        let mut mobile_levels = Vec::with_capacity(breakpoints.len() + 1);
        let n = breakpoints.len();
        let probes = (0..=n).map(|k| match k {
            0 => 0.0,
            k if k == n => 2.0 * breakpoints[n - 1] + 1.0,
            k => 0.5 * (breakpoints[k - 1] + breakpoints[k]),
        });
        for xi in probes {
            let e = evaluate_policy(model, &Policy::Threshold(ThresholdPolicy::new(xi)))?;
            static_levels.push(e.su_throughput);
            mobile_levels.push(e.mu_throughput);
        }
        Ok(Staircase {
            breakpoints,
            static_levels,
            mobile_levels,
        })
    }

    /// Index of the level in force at `xi`.
    pub fn level_at(&self, xi: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= xi)
    }

    /// One tenth of the distance from breakpoint `k` (1-based) to its
    /// neighbours (0 standing in for the neighbour below the first one).
    pub fn local_delta(&self, k: usize) -> f64 {
        let b = &self.breakpoints;
        let below = if k >= 2 { b[k - 2] } else { 0.0 };
        let mut gap = b[k - 1] - below;
        if k < b.len() {
            gap = gap.min(b[k] - b[k - 1]);
        }
        0.1 * gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedSolution {
    pub xi: f64,
    pub p: f64,
    pub delta: f64,
    /// Static class throughput of the returned policy, evaluated exactly.
    pub achieved: f64,
}

impl ConstrainedSolution {
    pub fn policy(&self) -> RandomizedThresholdPolicy {
        RandomizedThresholdPolicy {
            xi: self.xi,
            p: self.p,
            delta: self.delta,
        }
    }
}

/// Maximises mobile throughput subject to static throughput `>= r0` by
/// randomising between the threshold policies just below and just above the
/// breakpoint whose jump straddles `r0`, so the constraint holds with
/// equality.
pub fn solve_constrained(model: &CellModel, r0: f64) -> Result<ConstrainedSolution> {
    solve_constrained_on(model, &Staircase::new(model)?, r0)
}

pub fn solve_constrained_on(
    model: &CellModel,
    stairs: &Staircase,
    r0: f64,
) -> Result<ConstrainedSolution> {
    let levels = &stairs.static_levels;
    let min = levels[0];
    let max = *levels.last().expect("at least one level");
    if !(r0 >= min && r0 <= max) {
        return Err(Error::Infeasible { r0, min, max });
    }
    if stairs.breakpoints.is_empty() {
        return Ok(ConstrainedSolution {
            xi: 0.0,
            p: 0.0,
            delta: 1e-3,
            achieved: min,
        });
    }
    // Smallest k >= 1 with L_k >= r0.
    let k = 1 + levels[1..].partition_point(|&l| l < r0);
    let (lower, upper) = (levels[k - 1], levels[k]);
    let p = if upper == r0 {
        0.0
    } else {
        (upper - r0) / (upper - lower)
    };
    let mut solution = ConstrainedSolution {
        xi: stairs.breakpoints[k - 1],
        p,
        delta: stairs.local_delta(k),
        achieved: 0.0,
    };
    solution.achieved =
        evaluate_policy(model, &Policy::Randomized(solution.policy()))?.su_throughput;
    Ok(solution)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairSolution {
    pub xi: f64,
    pub achieved: f64,
    pub iterations: usize,
}

pub const FAIR_TOLERANCE: f64 = 1e-9;
pub const FAIR_MAX_ITER: usize = 200;

/// Static alpha-moment throughput of the fair policy, as a function of `xi`.
pub struct FairStaticCurve {
    stationary: Vec<f64>,
    moments: Vec<ClassRates>,
    alpha: f64,
}

impl FairStaticCurve {
    pub fn new(model: &CellModel, alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        Ok(FairStaticCurve {
            stationary: model.stationary.clone(),
            moments: model.class_moments(alpha)?,
            alpha,
        })
    }

    pub fn at(&self, xi: f64) -> f64 {
        self.stationary
            .iter()
            .zip(&self.moments)
            .map(|(g, m)| {
                g * (1.0 - fair_fraction(*m, xi, self.alpha)).powf(self.alpha) * m.static_
            })
            .sum()
    }

    /// Supremum over `xi`: every state fully static.
    pub fn supremum(&self) -> f64 {
        self.stationary
            .iter()
            .zip(&self.moments)
            .map(|(g, m)| g * m.static_)
            .sum()
    }
}

/// Bisection for the unique `xi` at which the fair policy's static
/// alpha-moment throughput equals `r0`.
pub fn solve_constrained_fair(model: &CellModel, r0: f64, alpha: f64) -> Result<FairSolution> {
    solve_constrained_fair_with(model, r0, alpha, FAIR_TOLERANCE, FAIR_MAX_ITER)
}

pub fn solve_constrained_fair_with(
    model: &CellModel,
    r0: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FairSolution> {
    const XI_MIN: f64 = 1e-12;
    const XI_MAX: f64 = 1e12;
    let curve = FairStaticCurve::new(model, alpha)?;
    let floor = curve.at(XI_MIN);
    let ceiling = curve.at(XI_MAX);
    if !(r0 >= floor && r0 <= ceiling) {
        return Err(Error::Infeasible {
            r0,
            min: floor,
            max: ceiling,
        });
    }
    let mut lo = XI_MIN;
    let mut hi = 1.0;
    while curve.at(hi) < r0 {
        lo = hi;
        hi *= 2.0;
        if hi > XI_MAX {
            hi = XI_MAX;
            break;
        }
    }
    for iteration in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let value = curve.at(mid);
        if (value - r0).abs() <= tol {
            return Ok(FairSolution {
                xi: mid,
                achieved: value,
                iterations: iteration,
            });
        }
        if value < r0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        what: "fair multiplier bisection",
        iterations: max_iter,
    })
}
