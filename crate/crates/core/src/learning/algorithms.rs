//! The four online bandwidth-sharing learners.
//!
//! Each learner picks the mobile-class fraction for the current slot from
//! its running estimates (`decide`) and folds the slot's feedback back into
//! them (`update`). The threshold learners only ever serve one class per
//! slot, so they explore: with probability `epsilon` the action is a fair
//! coin flip instead of the greedy choice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::schedule::{StepSchedule, Timescales};
use crate::learning::state::{LearnerState, SlotFeedback};
use crate::mdp::policy::validate_alpha;
use crate::mdp::{fair_fraction, ClassRates, StateIndex};

/// Per-slot multiplier perturbation: uniform on `[-delta, 0]` with
/// probability `p`, uniform on `(0, delta]` otherwise.
pub fn sample_delta<R: Rng + ?Sized>(p: f64, delta: f64, rng: &mut R) -> f64 {
    let below = rng.gen::<f64>() < p;
    let u: f64 = rng.gen();
    if below {
        -delta * u
    } else {
        delta * (1.0 - u)
    }
}

/// With probability `epsilon`, a forced action chosen by an independent fair
/// coin.
fn explore<R: Rng + ?Sized>(epsilon: f64, rng: &mut R) -> Option<u8> {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Some(u8::from(rng.gen::<bool>()))
    } else {
        None
    }
}

/// Greedy threshold on estimates; exact ties go to the static class.
fn greedy(est_mobile: f64, est_static: f64, xi: f64) -> u8 {
    u8::from(est_mobile - xi * est_static > 0.0)
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon", "must lie in [0, 1]"));
    }
    Ok(())
}

fn validate_estimate(initial: f64) -> Result<()> {
    if !(initial.is_finite() && initial > 0.0) {
        return Err(Error::invalid("initial estimate", "must be finite and > 0"));
    }
    Ok(())
}

/// Mean-rate update gated on the class that was served.
fn update_rate_estimates(learner: &mut LearnerState, fb: &SlotFeedback, schedule: StepSchedule) {
    let s = fb.state;
    learner.visits[s] += 1;
    if fb.action >= 1.0 {
        if let Some(x) = fb.mobile_sample {
            learner.visits_mobile[s] += 1;
            let a = schedule.at(learner.visits_mobile[s]);
            learner.rate_est_mobile[s] += a * (x - learner.rate_est_mobile[s]);
        }
    } else if fb.action <= 0.0 {
        if let Some(x) = fb.static_sample {
            learner.visits_static[s] += 1;
            let a = schedule.at(learner.visits_static[s]);
            learner.rate_est_static[s] += a * (x - learner.rate_est_static[s]);
        }
    }
}

/// Alpha-moment update: both classes are sampled whenever they hold any
/// bandwidth, with a step driven by the visit count of the state.
fn update_moment_estimates(
    learner: &mut LearnerState,
    fb: &SlotFeedback,
    alpha: f64,
    schedule: StepSchedule,
) {
    let s = fb.state;
    learner.visits[s] += 1;
    let a = schedule.at(learner.visits[s]);
    if let Some(x) = fb.mobile_sample {
        learner.visits_mobile[s] += 1;
        learner.rate_est_mobile[s] += a * (x.powf(alpha) - learner.rate_est_mobile[s]);
    }
    if let Some(x) = fb.static_sample {
        learner.visits_static[s] += 1;
        learner.rate_est_static[s] += a * (x.powf(alpha) - learner.rate_est_static[s]);
    }
}

/// Unconstrained learner at a fixed multiplier.
#[derive(Debug, Clone)]
pub struct SingleTimescale {
    pub learner: LearnerState,
    pub xi: f64,
    pub epsilon: f64,
    pub schedule: StepSchedule,
}

impl SingleTimescale {
    pub fn new(
        states: usize,
        xi: f64,
        epsilon: f64,
        schedule: StepSchedule,
        initial_estimate: f64,
    ) -> Result<Self> {
        validate_epsilon(epsilon)?;
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(Error::invalid("xi", "must be finite and >= 0"));
        }
        Ok(SingleTimescale {
            learner: LearnerState::new(states, initial_estimate, xi, 0.0),
            xi,
            epsilon,
            schedule,
        })
    }

    pub fn decide<R: Rng + ?Sized>(&mut self, s: StateIndex, rng: &mut R) -> u8 {
        explore(self.epsilon, rng).unwrap_or_else(|| {
            greedy(
                self.learner.rate_est_mobile[s],
                self.learner.rate_est_static[s],
                self.xi,
            )
        })
    }

    pub fn update(&mut self, fb: &SlotFeedback) {
        update_rate_estimates(&mut self.learner, fb, self.schedule);
        self.learner.slot += 1;
    }

    /// Per-state probability of serving the mobile class under the current
    /// estimates, exploration included.
    pub fn mobile_probabilities(&self) -> Vec<f64> {
        let l = &self.learner;
        (0..l.len())
            .map(|s| {
                let greedy = f64::from(greedy(l.rate_est_mobile[s], l.rate_est_static[s], self.xi));
                (1.0 - self.epsilon) * greedy + 0.5 * self.epsilon
            })
            .collect()
    }
}

/// Constrained learner: estimates and the randomisation probability `p` move
/// on the fast timescale, the multiplier `xi` on the slow one.
#[derive(Debug, Clone)]
pub struct TwoTimescale {
    pub learner: LearnerState,
    pub r0: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub upper: f64,
    pub steps: Timescales,
}

impl TwoTimescale {
    pub fn new(
        states: usize,
        r0: f64,
        epsilon: f64,
        delta: f64,
        upper: f64,
        steps: Timescales,
        initial_estimate: f64,
    ) -> Result<Self> {
        validate_epsilon(epsilon)?;
        validate_estimate(initial_estimate)?;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", "must be > 0"));
        }
        if !(upper.is_finite() && upper > 0.0) {
            return Err(Error::invalid("upper bound A", "must be > 0"));
        }
        if !(r0.is_finite() && r0 >= 0.0) {
            return Err(Error::invalid("r0", "must be finite and >= 0"));
        }
        Ok(TwoTimescale {
            learner: LearnerState::new(states, initial_estimate, 0.5 * upper, 0.5),
            r0,
            epsilon,
            delta,
            upper,
            steps,
        })
    }

    pub fn decide<R: Rng + ?Sized>(&mut self, s: StateIndex, rng: &mut R) -> u8 {
        if let Some(forced) = explore(self.epsilon, rng) {
            return forced;
        }
        let shift = sample_delta(self.learner.p, self.delta, rng);
        greedy(
            self.learner.rate_est_mobile[s],
            self.learner.rate_est_static[s],
            self.learner.xi + shift,
        )
    }

    pub fn update(&mut self, fb: &SlotFeedback) {
        update_rate_estimates(&mut self.learner, fb, self.steps.fast);
        self.learner.slot += 1;
        let tau = self.learner.slot;
        let served_static = if fb.action <= 0.0 {
            fb.static_sample.unwrap_or(0.0)
        } else {
            0.0
        };
        let l = &mut self.learner;
        l.p = (l.p + self.steps.fast.at(tau) * (served_static - self.r0)).clamp(0.0, 1.0);
        l.xi = (l.xi + self.steps.slow.at(tau) * (self.r0 - served_static)).clamp(0.0, self.upper);
    }
}

/// Unconstrained alpha-fair learner: no exploration is needed because both
/// classes hold bandwidth in every slot.
#[derive(Debug, Clone)]
pub struct FairLearner {
    pub learner: LearnerState,
    pub xi: f64,
    pub alpha: f64,
    pub schedule: StepSchedule,
}

impl FairLearner {
    pub fn new(
        states: usize,
        xi: f64,
        alpha: f64,
        schedule: StepSchedule,
        initial_estimate: f64,
    ) -> Result<Self> {
        validate_alpha(alpha)?;
        validate_estimate(initial_estimate)?;
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::invalid("xi", "must be finite and > 0"));
        }
        Ok(FairLearner {
            learner: LearnerState::new(states, initial_estimate, xi, 0.0),
            xi,
            alpha,
            schedule,
        })
    }

    pub fn decide(&self, s: StateIndex) -> f64 {
        fair_decision(&self.learner, s, self.xi, self.alpha)
    }

    pub fn update(&mut self, fb: &SlotFeedback) {
        update_moment_estimates(&mut self.learner, fb, self.alpha, self.schedule);
        self.learner.slot += 1;
    }
}

fn fair_decision(learner: &LearnerState, s: StateIndex, xi: f64, alpha: f64) -> f64 {
    fair_fraction(
        ClassRates {
            mobile: learner.rate_est_mobile[s],
            static_: learner.rate_est_static[s],
        },
        xi,
        alpha,
    )
}

/// Which static sample drives the multiplier of the constrained fair learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FairDrift {
    /// `((1 - eta) * static sample)^alpha`: the drift vanishes exactly when
    /// the static alpha-moment throughput equals `r0`.
    #[default]
    Weighted,
    /// `(static sample)^alpha`, ignoring the allocated fraction.
    Literal,
}

/// Constrained alpha-fair learner: single timescale, multiplier projected to
/// `[lower, upper]`.
#[derive(Debug, Clone)]
pub struct FairConstrained {
    pub learner: LearnerState,
    pub alpha: f64,
    pub r0: f64,
    pub lower: f64,
    pub upper: f64,
    pub schedule: StepSchedule,
    pub drift: FairDrift,
}

impl FairConstrained {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        states: usize,
        alpha: f64,
        r0: f64,
        lower: f64,
        upper: f64,
        schedule: StepSchedule,
        drift: FairDrift,
        initial_estimate: f64,
    ) -> Result<Self> {
        validate_alpha(alpha)?;
        validate_estimate(initial_estimate)?;
        if !(lower.is_finite() && lower > 0.0 && upper.is_finite() && upper > lower) {
            return Err(Error::invalid("multiplier bounds", "need 0 < B < A"));
        }
        if !(r0.is_finite() && r0 >= 0.0) {
            return Err(Error::invalid("r0", "must be finite and >= 0"));
        }
        Ok(FairConstrained {
            learner: LearnerState::new(states, initial_estimate, 0.5 * upper, 0.0),
            alpha,
            r0,
            lower,
            upper,
            schedule,
            drift,
        })
    }

    pub fn decide(&self, s: StateIndex) -> f64 {
        fair_decision(&self.learner, s, self.learner.xi, self.alpha)
    }

    pub fn update(&mut self, fb: &SlotFeedback) {
        update_moment_estimates(&mut self.learner, fb, self.alpha, self.schedule);
        self.learner.slot += 1;
        let tau = self.learner.slot;
        let sample = match self.drift {
            FairDrift::Weighted => fb.static_download.powf(self.alpha),
            FairDrift::Literal => fb.static_sample.unwrap_or(0.0).powf(self.alpha),
        };
        let l = &mut self.learner;
        l.xi = (l.xi + self.schedule.at(tau) * (self.r0 - sample)).clamp(self.lower, self.upper);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn fb(state: StateIndex, action: f64, mobile: f64, static_: f64) -> SlotFeedback {
        let mobile_sample = (action > 0.0).then_some(mobile);
        let static_sample = (action < 1.0).then_some(static_);
        SlotFeedback {
            state,
            action,
            mobile_sample,
            static_sample,
            mobile_download: action * mobile,
            static_download: (1.0 - action) * static_,
        }
    }

    fn harmonic() -> StepSchedule {
        StepSchedule::new(1.0).unwrap()
    }

    #[test]
    fn delta_support() {
        let mut r = rng();
        for _ in 0..10_000 {
            let d = sample_delta(1.0, 0.01, &mut r);
            assert!((-0.01..=0.0).contains(&d));
            let d = sample_delta(0.0, 0.01, &mut r);
            assert!(d > 0.0 && d <= 0.01);
        }
    }

    #[test]
    fn delta_frequency() {
        let mut r = rng();
        let n = 100_000;
        let below = (0..n)
            .filter(|_| sample_delta(0.3, 1.0, &mut r) <= 0.0)
            .count();
        let se = (0.3 * 0.7 / n as f64).sqrt();
        assert!((below as f64 / n as f64 - 0.3).abs() < 3.0 * se);
    }

    #[test]
    fn alg1_full_exploration_is_a_fair_coin() {
        let mut alg = SingleTimescale::new(1, 1.0, 1.0, harmonic(), 1.0).unwrap();
        alg.learner.rate_est_mobile[0] = 100.0;
        let mut r = rng();
        let n = 100_000;
        let ones: u32 = (0..n).map(|_| u32::from(alg.decide(0, &mut r))).sum();
        let se = (0.25 / n as f64).sqrt();
        assert!((f64::from(ones) / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn alg1_greedy_and_tie() {
        let mut alg = SingleTimescale::new(1, 2.0, 0.0, harmonic(), 1.0).unwrap();
        let mut r = rng();
        alg.learner.rate_est_mobile[0] = 3.0;
        assert_eq!(alg.decide(0, &mut r), 1);
        alg.learner.rate_est_mobile[0] = 2.0;
        assert_eq!(alg.decide(0, &mut r), 0);
        alg.learner.rate_est_mobile[0] = 1.0;
        assert_eq!(alg.decide(0, &mut r), 0);
    }

    #[test]
    fn alg1_update_examples() {
        let schedule = StepSchedule::new(0.6).unwrap();
        let mut alg = SingleTimescale::new(3, 1.0, 0.1, schedule, 1.0).unwrap();
        alg.update(&fb(1, 1.0, 4.2, 9.9));
        assert_eq!(alg.learner.rate_est_mobile[1], 4.2);
        assert_eq!(alg.learner.rate_est_static[1], 1.0);
        alg.update(&fb(1, 0.0, 9.9, 2.5));
        assert_eq!(alg.learner.rate_est_static[1], 2.5);
        for s in [0, 2] {
            assert_eq!(alg.learner.rate_est_mobile[s].to_bits(), 1.0f64.to_bits());
            assert_eq!(alg.learner.rate_est_static[s].to_bits(), 1.0f64.to_bits());
        }
        assert_eq!(alg.learner.visits, vec![0, 2, 0]);
        assert_eq!(alg.learner.visits_mobile, vec![0, 1, 0]);
        assert_eq!(alg.learner.visits_static, vec![0, 1, 0]);
    }

    #[test]
    fn alg1_harmonic_steps_give_running_mean() {
        let mut alg = SingleTimescale::new(1, 1.0, 0.1, harmonic(), 7.0).unwrap();
        let samples = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        for (k, x) in samples.iter().enumerate() {
            alg.update(&fb(0, 1.0, *x, 0.0));
            let mean = samples[..=k].iter().sum::<f64>() / (k + 1) as f64;
            assert!((alg.learner.rate_est_mobile[0] - mean).abs() < 1e-12);
        }
    }

    fn alg2(upper: f64) -> TwoTimescale {
        TwoTimescale::new(
            2,
            1.0,
            0.05,
            1e-3,
            upper,
            Timescales::new(0.6, 0.9).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn alg2_projection() {
        let mut alg = alg2(4.0);
        alg.learner.p = 1.0;
        alg.update(&fb(0, 0.0, 0.0, 5.0));
        assert_eq!(alg.learner.p, 1.0);
        alg.learner.xi = 4.0;
        alg.update(&fb(0, 1.0, 3.0, 0.0));
        assert_eq!(alg.learner.xi, 4.0);
        alg.learner.xi = 0.0;
        alg.update(&fb(0, 0.0, 0.0, 50.0));
        assert_eq!(alg.learner.xi, 0.0);
    }

    #[test]
    fn alg2_drift_signs() {
        let mut alg = alg2(4.0);
        let (p0, xi0) = (alg.learner.p, alg.learner.xi);
        alg.update(&fb(0, 0.0, 0.0, 1.5));
        assert!(alg.learner.p > p0);
        assert!(alg.learner.xi < xi0);
        let (p1, xi1) = (alg.learner.p, alg.learner.xi);
        alg.update(&fb(0, 1.0, 3.0, 0.0));
        assert!(alg.learner.p < p1);
        assert!(alg.learner.xi > xi1);
    }

    #[test]
    fn alg2_forced_exploration_ignores_estimates() {
        let mut alg = alg2(4.0);
        alg.epsilon = 1.0;
        let mut r1 = rng();
        let mut r2 = rng();
        let a: Vec<u8> = (0..200).map(|_| alg.decide(0, &mut r1)).collect();
        alg.learner.rate_est_mobile[0] = 1e6;
        let b: Vec<u8> = (0..200).map(|_| alg.decide(0, &mut r2)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn alg2_tiny_perturbation_matches_plain_threshold() {
        let mut alg = alg2(4.0);
        alg.epsilon = 0.0;
        alg.learner.p = 1.0;
        alg.delta = 1e-9;
        alg.learner.xi = 1.3;
        alg.learner.rate_est_mobile = vec![3.0, 1.0];
        alg.learner.rate_est_static = vec![2.0, 1.0];
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(alg.decide(0, &mut r), 1);
            assert_eq!(alg.decide(1, &mut r), 0);
        }
    }

    #[test]
    fn alg2_breakpoint_splits_actions() {
        let mut alg = alg2(4.0);
        alg.epsilon = 0.0;
        alg.learner.p = 0.5;
        alg.learner.xi = 1.5;
        alg.learner.rate_est_mobile[0] = 3.0;
        alg.learner.rate_est_static[0] = 2.0;
        let mut r = rng();
        let n = 100_000;
        let ones: u32 = (0..n).map(|_| u32::from(alg.decide(0, &mut r))).sum();
        let se = (0.25 / n as f64).sqrt();
        assert!((f64::from(ones) / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn alg3_decide_examples() {
        let mut alg = FairLearner::new(1, 2.0, 0.5, harmonic(), 1.0).unwrap();
        alg.learner.rate_est_mobile[0] = 2.0;
        alg.learner.rate_est_static[0] = 1.0;
        assert_eq!(alg.decide(0), 0.5);
        alg.learner.rate_est_mobile[0] = 1e-200;
        assert!(alg.decide(0) < 1e-100);
        alg.xi = 1.0;
        alg.learner.rate_est_static[0] = 1.3;
        alg.learner.rate_est_mobile[0] = 2.0 * 1.3;
        assert!((alg.decide(0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn alg3_first_visit_and_untouched() {
        let mut alg = FairLearner::new(2, 2.0, 0.5, StepSchedule::new(0.6).unwrap(), 1.0).unwrap();
        alg.update(&fb(0, 0.25, 4.0, 9.0));
        assert_eq!(alg.learner.rate_est_mobile[0], 2.0);
        assert_eq!(alg.learner.rate_est_static[0], 3.0);
        assert_eq!(alg.learner.rate_est_mobile[1], 1.0);
        assert_eq!(alg.learner.visits, vec![1, 0]);
    }

    #[test]
    fn alg3_continuity() {
        let mut alg = FairLearner::new(1, 2.0, 0.5, harmonic(), 1.0).unwrap();
        alg.learner.rate_est_mobile[0] = 1.7;
        alg.learner.rate_est_static[0] = 1.2;
        let base = alg.decide(0);
        let mut lipschitz: f64 = 0.0;
        for k in 1..=20 {
            let h = 1e-3 / f64::from(k);
            alg.learner.rate_est_mobile[0] = 1.7 + h;
            lipschitz = lipschitz.max((alg.decide(0) - base).abs() / h);
        }
        assert!(lipschitz.is_finite() && lipschitz < 10.0, "{lipschitz}");
    }

    #[test]
    fn alg4_projection_and_drift() {
        let mut alg = FairConstrained::new(
            1,
            0.5,
            1.0,
            0.1,
            4.0,
            StepSchedule::new(0.6).unwrap(),
            FairDrift::Weighted,
            1.0,
        )
        .unwrap();
        alg.learner.xi = 0.1;
        alg.update(&fb(0, 0.1, 1.0, 100.0));
        assert_eq!(alg.learner.xi, 0.1);
        let before = alg.learner.xi;
        alg.update(&fb(0, 0.5, 1.0, 0.25));
        assert!(alg.learner.xi > before);
    }

    #[test]
    fn alg4_drift_variants_differ() {
        let make =
            |drift| FairConstrained::new(1, 0.5, 1.0, 0.1, 4.0, harmonic(), drift, 1.0).unwrap();
        let mut w = make(FairDrift::Weighted);
        let mut l = make(FairDrift::Literal);
        let feedback = fb(0, 0.75, 1.0, 4.0);
        w.update(&feedback);
        l.update(&feedback);
        // Weighted sample (0.25 * 4)^0.5 = 1 = r0; literal sample 4^0.5 = 2.
        assert_eq!(w.learner.xi, 2.0);
        assert_eq!(l.learner.xi, 1.0);
    }

    #[test]
    fn constructor_validation() {
        assert!(SingleTimescale::new(1, -1.0, 0.1, harmonic(), 1.0).is_err());
        assert!(SingleTimescale::new(1, 1.0, 1.5, harmonic(), 1.0).is_err());
        assert!(FairLearner::new(1, 1.0, 1.0, harmonic(), 1.0).is_err());
        assert!(FairLearner::new(1, 1.0, 0.5, harmonic(), 0.0).is_err());
        assert!(
            FairConstrained::new(1, 0.5, 1.0, 0.0, 4.0, harmonic(), FairDrift::Weighted, 1.0)
                .is_err()
        );
    }
}
