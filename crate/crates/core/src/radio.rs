//! Interference field, per-location rates and the fading chain.
//!
//! Rates are per unit bandwidth: a user holding the whole band at a location
//! with signal-to-interference ratio `sir` downloads `log2(1 + sir)` bits in a
//! slot. There is no thermal noise term, so only power ratios matter.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Base-station positions and transmit powers. Only power ratios matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsLayout {
    pub positions: Vec<Point>,
    pub tx_powers: Vec<f64>,
    pub serving_index: usize,
}

impl BsLayout {
    /// Stations on `{(spacing*i, spacing*j) : -half <= i, j <= half}` with unit
    /// power, serving the one at the origin.
    pub fn square_grid(half: i32, spacing: f64) -> Self {
        let mut positions = Vec::new();
        for i in -half..=half {
            for j in -half..=half {
                positions.push(Point::new(spacing * f64::from(i), spacing * f64::from(j)));
            }
        }
        let serving_index = positions
            .iter()
            .position(|p| p.x == 0.0 && p.y == 0.0)
            .expect("grid contains the origin");
        let tx_powers = vec![1.0; positions.len()];
        BsLayout {
            positions,
            tx_powers,
            serving_index,
        }
    }

    pub fn serving_position(&self) -> Point {
        self.positions[self.serving_index]
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::invalid("layout.positions", "no base stations"));
        }
        if self.tx_powers.len() != self.positions.len() {
            return Err(Error::invalid(
                "layout.tx_powers",
                format!(
                    "{} powers for {} stations",
                    self.tx_powers.len(),
                    self.positions.len()
                ),
            ));
        }
        if let Some(k) = self
            .tx_powers
            .iter()
            .position(|p| !(p.is_finite() && *p > 0.0))
        {
            return Err(Error::invalid(
                format!("layout.tx_powers[{k}]"),
                "must be finite and > 0",
            ));
        }
        if self.serving_index >= self.positions.len() {
            return Err(Error::invalid("layout.serving_index", "out of range"));
        }
        let mut sorted: Vec<(f64, f64)> = self.positions.iter().map(|p| (p.x, p.y)).collect();
        if sorted
            .iter()
            .any(|(x, y)| !(x.is_finite() && y.is_finite()))
        {
            return Err(Error::invalid("layout.positions", "non-finite coordinate"));
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("layout.positions", "duplicate station"));
        }
        Ok(())
    }
}

/// Deterministic per-link gain `(station index, receiver location) -> gain`.
pub type ShadowGain = Arc<dyn Fn(usize, Point) -> f64 + Send + Sync>;

#[derive(Clone, Serialize, Deserialize)]
pub struct PropagationModel {
    pub path_loss_exponent: f64,
    pub min_distance: f64,
    /// Multiplicative link gain; `None` is the constant 1.
    #[serde(skip)]
    pub shadow: Option<ShadowGain>,
}

impl PropagationModel {
    pub fn new(path_loss_exponent: f64) -> Self {
        PropagationModel {
            path_loss_exponent,
            min_distance: 0.5,
            shadow: None,
        }
    }

    pub fn with_shadow(mut self, shadow: ShadowGain) -> Self {
        self.shadow = Some(shadow);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 2.0) {
            return Err(Error::invalid(
                "propagation.path_loss_exponent",
                "must be finite and > 2",
            ));
        }
        if !(self.min_distance.is_finite() && self.min_distance > 0.0) {
            return Err(Error::invalid("propagation.min_distance", "must be > 0"));
        }
        Ok(())
    }

    fn link_gain(&self, station: usize, at: Point) -> f64 {
        self.shadow.as_ref().map_or(1.0, |g| g(station, at))
    }
}

impl fmt::Debug for PropagationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PropagationModel")
            .field("path_loss_exponent", &self.path_loss_exponent)
            .field("min_distance", &self.min_distance)
            .field("shadow", &self.shadow.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

// Shadowing closures cannot be compared; two models are equal when their
// numeric parameters match and both use (or both skip) a shadow hook.
impl PartialEq for PropagationModel {
    fn eq(&self, other: &Self) -> bool {
        self.path_loss_exponent == other.path_loss_exponent
            && self.min_distance == other.min_distance
            && self.shadow.is_some() == other.shadow.is_some()
    }
}

/// Signal-to-interference ratio at `point` for the serving station.
///
/// Powers enter relative to the serving station's power, so a common scale
/// factor on every power cancels before any distance term is touched.
pub fn sir_at(point: Point, layout: &BsLayout, prop: &PropagationModel) -> Result<f64> {
    let beta = prop.path_loss_exponent;
    let serving_power = layout.tx_powers[layout.serving_index];
    let received = |k: usize| {
        let d = point.distance(layout.positions[k]).max(prop.min_distance);
        (layout.tx_powers[k] / serving_power) * prop.link_gain(k, point) * d.powf(-beta)
    };
    let signal = received(layout.serving_index);
    let interference: f64 = (0..layout.positions.len())
        .filter(|&k| k != layout.serving_index)
        .map(received)
        .sum();
    if interference <= 0.0 {
        return Err(Error::DegenerateLayout {
            point: [point.x, point.y],
        });
    }
    Ok(signal / interference)
}

/// `log2(1 + sir)` bits per slot per unit bandwidth.
pub fn rate_per_unit_bw(sir: f64) -> Result<f64> {
    if !(sir.is_finite() && sir >= 0.0) {
        return Err(Error::invalid(
            "sir",
            format!("{sir} is not a finite value >= 0"),
        ));
    }
    Ok((1.0 + sir).log2())
}

/// Per-unit-bandwidth rates at every road-segment centre and static user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    /// `mu_rate[road][segment]`, segment 0 being the entry segment.
    pub mu_rate: Vec<Vec<f64>>,
    pub su_rate: Vec<f64>,
}

impl RateTable {
    pub fn scaled(&self, c: f64) -> RateTable {
        RateTable {
            mu_rate: self
                .mu_rate
                .iter()
                .map(|road| road.iter().map(|r| r * c).collect())
                .collect(),
            su_rate: self.su_rate.iter().map(|r| r * c).collect(),
        }
    }

    pub fn static_users(&self) -> usize {
        self.su_rate.len()
    }
}

pub fn build_rate_table(scenario: &Scenario) -> Result<RateTable> {
    let rate =
        |p: Point| sir_at(p, &scenario.layout, &scenario.propagation).and_then(rate_per_unit_bw);
    let mu_rate = scenario
        .roads
        .iter()
        .map(|road| {
            road.segment_centers()
                .into_iter()
                .map(rate)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let su_rate = scenario
        .static_users
        .iter()
        .map(|&p| rate(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateTable { mu_rate, su_rate })
}

/// Finite-state Markov chain of multiplicative channel gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingProcess {
    pub gains: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

const ROW_SUM_TOL: f64 = 1e-9;

impl FadingProcess {
    /// Builds a chain after checking that gains are positive and finite and
    /// that `transition` is square and row-stochastic. Ergodicity is checked
    /// separately by [`FadingProcess::validate_ergodic`].
    pub fn new(gains: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let proc = FadingProcess { gains, transition };
        proc.validate_structure()?;
        Ok(proc)
    }

    /// Single state with gain 1: no fading.
    pub fn constant() -> Self {
        FadingProcess {
            gains: vec![1.0],
            transition: vec![vec![1.0]],
        }
    }

    /// Two states `{1 - swing, 1 + swing}` switching with probability `switch`.
    pub fn two_state(swing: f64, switch: f64) -> Result<Self> {
        FadingProcess::new(
            vec![1.0 - swing, 1.0 + swing],
            vec![vec![1.0 - switch, switch], vec![switch, 1.0 - switch]],
        )
    }

    /// Gains {0.5, 1.5}, symmetric switch probability 0.1.
    pub fn default_two_state() -> Self {
        FadingProcess::two_state(0.5, 0.1).expect("valid default chain")
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn max_gain(&self) -> f64 {
        self.gains.iter().copied().fold(0.0, f64::max)
    }

    fn validate_structure(&self) -> Result<()> {
        let n = self.gains.len();
        if n == 0 {
            return Err(Error::invalid("fading.gains", "empty"));
        }
        if let Some(k) = self.gains.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::invalid(
                format!("fading.gains[{k}]"),
                "must be finite and > 0",
            ));
        }
        if self.transition.len() != n {
            return Err(Error::invalid("fading.transition", "must be square"));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(
                    format!("fading.transition[{i}]"),
                    "must be square",
                ));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invalid(
                    format!("fading.transition[{i}]"),
                    "entries must be probabilities",
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(
                    format!("fading.transition[{i}]"),
                    format!("row sums to {sum}"),
                ));
            }
        }
        Ok(())
    }

    /// Irreducible and aperiodic, i.e. some power of the transition matrix is
    /// strictly positive. By Wielandt's bound it suffices to check the
    /// `(n-1)^2 + 1`-th power of the support pattern.
    pub fn is_primitive(&self) -> bool {
        let n = self.len();
        let support: Vec<Vec<bool>> = self
            .transition
            .iter()
            .map(|row| row.iter().map(|p| *p > 0.0).collect())
            .collect();
        let mut power = support.clone();
        for _ in 1..((n - 1) * (n - 1) + 1) {
            let mut next = vec![vec![false; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if power[i][k] {
                        for j in 0..n {
                            next[i][j] |= support[k][j];
                        }
                    }
                }
            }
            power = next;
        }
        power.iter().all(|row| row.iter().all(|&b| b))
    }

    /// Stationary law, solving `pi (P - I) = 0`, `sum pi = 1` by Gaussian
    /// elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.len();
        // Rows of the system: (P^T - I) with the last equation replaced by
        // the normalisation.
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = self.transition[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..n {
            a[n - 1][j] = 1.0;
        }
        a[n - 1][n] = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
                .expect("non-empty");
            a.swap(col, pivot);
            let diag = a[col][col];
            if diag.abs() < 1e-300 {
                continue;
            }
            for r in 0..n {
                if r != col {
                    let factor = a[r][col] / diag;
                    if factor != 0.0 {
                        for c in col..=n {
                            a[r][c] -= factor * a[col][c];
                        }
                    }
                }
            }
        }
        (0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect()
    }

    pub fn stationary_mean_gain(&self) -> f64 {
        self.stationary()
            .iter()
            .zip(&self.gains)
            .map(|(p, g)| p * g)
            .sum()
    }

    /// Checks everything a fading process must satisfy inside a scenario:
    /// primitive chain and unit mean gain under the stationary law.
    pub fn validate_ergodic(&self) -> Result<()> {
        self.validate_structure()?;
        if !self.is_primitive() {
            return Err(Error::invalid(
                "fading.transition",
                "chain must be irreducible and aperiodic",
            ));
        }
        let mean = self.stationary_mean_gain();
        if (mean - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "fading.gains",
                format!("stationary mean gain is {mean}, expected 1"),
            ));
        }
        Ok(())
    }

    /// Draws the next state from row `current`; returns it with its gain.
    pub fn step<R: Rng + ?Sized>(&self, current: usize, rng: &mut R) -> (usize, f64) {
        let row = &self.transition[current];
        if row.len() == 1 {
            return (0, self.gains[0]);
        }
        let next = sample_index(row, rng);
        (next, self.gains[next])
    }

    /// Draws a state from the stationary law.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, stationary: &[f64], rng: &mut R) -> usize {
        if stationary.len() == 1 {
            return 0;
        }
        sample_index(stationary, rng)
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // Rounding left the cumulative sum a hair below 1.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}
