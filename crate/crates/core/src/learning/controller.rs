//! Slot-level decision makers behind one object-safe interface, and a
//! name-keyed registry that builds them from a cell model and a config.

use std::collections::BTreeMap;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::algorithms::{
    sample_delta, FairConstrained, FairDrift, FairLearner, SingleTimescale, TwoTimescale,
};
use crate::learning::schedule::{StepSchedule, Timescales};
use crate::learning::state::{LearnerState, SlotFeedback};
use crate::mdp::{
    fair_fraction, solve_constrained, threshold_action, CellModel, ClassRates, Policy,
    RandomizedThresholdPolicy, StateIndex, TieAction,
};

/// Chooses the mobile fraction of the band each slot and optionally learns
/// from the slot's feedback.
pub trait Controller: Send {
    fn name(&self) -> &str;

    /// Mobile fraction `eta` in `[0, 1]` for state `s`.
    fn decide(&mut self, s: StateIndex, rng: &mut dyn RngCore) -> f64;

    fn observe(&mut self, _feedback: &SlotFeedback) {}

    /// Current Lagrange multiplier, if the controller has one.
    fn multiplier(&self) -> Option<f64> {
        None
    }

    /// Current randomisation probability, if the controller has one.
    fn randomization(&self) -> Option<f64> {
        None
    }

    fn learner(&self) -> Option<&LearnerState> {
        None
    }
}

/// A stationary policy driven by the true class rates.
pub struct FixedPolicyController {
    name: String,
    policy: Policy,
    rates: Vec<ClassRates>,
    /// Precomputed mobile fraction per state for the non-random policies.
    fractions: Option<Vec<f64>>,
}

impl FixedPolicyController {
    pub fn new(model: &CellModel, policy: Policy) -> Result<Self> {
        policy.validate()?;
        let fractions = match policy {
            Policy::Threshold(t) => Some(
                model
                    .rates
                    .iter()
                    .map(|&r| f64::from(threshold_action(r, t.xi, t.tie)))
                    .collect(),
            ),
            Policy::Randomized(_) => None,
            Policy::Fair(f) => Some(
                model
                    .class_moments(f.alpha)?
                    .into_iter()
                    .map(|m| fair_fraction(m, f.xi, f.alpha))
                    .collect(),
            ),
            Policy::EqualShare(_) => {
                let k = model.static_users() as f64;
                Some(
                    (0..model.len())
                        .map(|s| {
                            let m = f64::from(model.mobile_users(s));
                            m / (m + k)
                        })
                        .collect(),
                )
            }
        };
        let name = match policy {
            Policy::Threshold(_) => "threshold",
            Policy::Randomized(_) => "randomized",
            Policy::Fair(_) => "fair",
            Policy::EqualShare(_) => "equal-share",
        };
        Ok(FixedPolicyController {
            name: name.to_string(),
            policy,
            rates: model.rates.clone(),
            fractions,
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }
}

impl Controller for FixedPolicyController {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, s: StateIndex, rng: &mut dyn RngCore) -> f64 {
        if let Some(f) = &self.fractions {
            return f[s];
        }
        let Policy::Randomized(r) = self.policy else {
            unreachable!("only the randomised policy is sampled per slot")
        };
        let shifted = r.xi + sample_delta(r.p, r.delta, rng);
        f64::from(threshold_action(self.rates[s], shifted, TieAction::Static))
    }

    fn multiplier(&self) -> Option<f64> {
        match self.policy {
            Policy::Threshold(t) => Some(t.xi),
            Policy::Randomized(r) => Some(r.xi),
            Policy::Fair(f) => Some(f.xi),
            Policy::EqualShare(_) => None,
        }
    }

    fn randomization(&self) -> Option<f64> {
        match self.policy {
            Policy::Randomized(r) => Some(r.p),
            _ => None,
        }
    }
}

macro_rules! learner_controller {
    ($ty:ty, $name:literal, |$me:ident, $s:ident, $rng:ident| $decide:expr, $p:expr) => {
        impl Controller for $ty {
            fn name(&self) -> &str {
                $name
            }

            fn decide(&mut self, $s: StateIndex, $rng: &mut dyn RngCore) -> f64 {
                let $me = self;
                $decide
            }

            fn observe(&mut self, feedback: &SlotFeedback) {
                self.update(feedback);
            }

            fn multiplier(&self) -> Option<f64> {
                Some(self.learner.xi)
            }

            fn randomization(&self) -> Option<f64> {
                $p.then_some(self.learner.p)
            }

            fn learner(&self) -> Option<&LearnerState> {
                Some(&self.learner)
            }
        }
    };
}

learner_controller!(
    SingleTimescale,
    "learn1",
    |me, s, rng| f64::from(SingleTimescale::decide(me, s, rng)),
    false
);
learner_controller!(
    TwoTimescale,
    "learn2",
    |me, s, rng| f64::from(TwoTimescale::decide(me, s, rng)),
    true
);
learner_controller!(
    FairLearner,
    "learn3",
    |me, s, _rng| FairLearner::decide(me, s),
    false
);
learner_controller!(
    FairConstrained,
    "learn4",
    |me, s, _rng| FairConstrained::decide(me, s),
    false
);

/// Parameters for building any registered controller. Unset fields fall
/// back to per-controller defaults; fields a controller needs but cannot
/// default are reported as validation errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub xi: Option<f64>,
    pub alpha: Option<f64>,
    pub r0: Option<f64>,
    pub p: Option<f64>,
    pub epsilon: f64,
    /// Perturbation half-width. `None` derives it from the true breakpoints.
    pub delta: Option<f64>,
    pub n1: f64,
    pub n2: f64,
    /// Lower multiplier bound `B` of the constrained fair learner.
    pub lower: f64,
    /// Upper multiplier bound `A`. `None` means `2 * max_s R_mobile / R_static`.
    pub upper: Option<f64>,
    pub initial_estimate: f64,
    pub drift: FairDrift,
    pub tie: TieAction,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            xi: None,
            alpha: None,
            r0: None,
            p: None,
            epsilon: 0.05,
            delta: None,
            n1: 0.6,
            n2: 0.9,
            lower: 1e-3,
            upper: None,
            initial_estimate: 1.0,
            drift: FairDrift::Weighted,
            tie: TieAction::Static,
        }
    }
}

pub const DEFAULT_LEARNING_DELTA: f64 = 1e-3;

impl ControllerConfig {
    fn need(value: Option<f64>, field: &str, controller: &str) -> Result<f64> {
        value.ok_or_else(|| Error::invalid(field, format!("required by `{controller}`")))
    }

    pub fn upper_bound(&self, model: &CellModel) -> f64 {
        self.upper.unwrap_or_else(|| 2.0 * model.max_ratio())
    }

    /// Perturbation width for the constrained learner: the configured value,
    /// else a tenth of the smaller of `epsilon` and the breakpoint gap around
    /// the exact constrained multiplier.
    pub fn learning_delta(&self, model: &CellModel, r0: f64) -> Result<f64> {
        if let Some(d) = self.delta {
            return Ok(d);
        }
        let exact = solve_constrained(model, r0)?;
        let mut d = exact.delta;
        if self.epsilon > 0.0 {
            d = d.min(self.epsilon / 10.0);
        }
        Ok(d)
    }
}

pub type ControllerBuilder =
    Box<dyn Fn(&CellModel, &ControllerConfig) -> Result<Box<dyn Controller>> + Send + Sync>;

/// Name-keyed controller factories.
pub struct ControllerRegistry {
    builders: BTreeMap<String, ControllerBuilder>,
}

impl fmt::Debug for ControllerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.builders.keys()).finish()
    }
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        ControllerRegistry {
            builders: BTreeMap::new(),
        }
    }

    /// Fixed policies `threshold`, `randomized`, `fair`, `equal-share` and
    /// the learners `learn1` to `learn4`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("threshold", |model, cfg| {
            let xi = ControllerConfig::need(cfg.xi, "xi", "threshold")?;
            let policy = Policy::Threshold(crate::mdp::ThresholdPolicy { xi, tie: cfg.tie });
            Ok(Box::new(FixedPolicyController::new(model, policy)?))
        });
        reg.register("randomized", |model, cfg| {
            let policy = match cfg.r0 {
                Some(r0) => solve_constrained(model, r0)?.policy(),
                None => RandomizedThresholdPolicy {
                    xi: ControllerConfig::need(cfg.xi, "xi", "randomized")?,
                    p: cfg.p.unwrap_or(0.5),
                    delta: cfg.delta.unwrap_or(DEFAULT_LEARNING_DELTA),
                },
            };
            Ok(Box::new(FixedPolicyController::new(
                model,
                Policy::Randomized(policy),
            )?))
        });
        reg.register("fair", |model, cfg| {
            let policy = crate::mdp::FairPolicy {
                xi: ControllerConfig::need(cfg.xi, "xi", "fair")?,
                alpha: ControllerConfig::need(cfg.alpha, "alpha", "fair")?,
            };
            Ok(Box::new(FixedPolicyController::new(
                model,
                Policy::Fair(policy),
            )?))
        });
        reg.register("equal-share", |model, cfg| {
            let alpha = cfg.alpha.unwrap_or(0.5);
            let policy = Policy::EqualShare(crate::mdp::EqualSharePolicy { alpha });
            Ok(Box::new(FixedPolicyController::new(model, policy)?))
        });
        reg.register("learn1", |model, cfg| {
            let xi = ControllerConfig::need(cfg.xi, "xi", "learn1")?;
            let schedule = StepSchedule::new(cfg.n1)?;
            let alg =
                SingleTimescale::new(model.len(), xi, cfg.epsilon, schedule, cfg.initial_estimate)?;
            Ok(Box::new(alg))
        });
        reg.register("learn2", |model, cfg| {
            let r0 = ControllerConfig::need(cfg.r0, "r0", "learn2")?;
            let delta = cfg.learning_delta(model, r0)?;
            let alg = TwoTimescale::new(
                model.len(),
                r0,
                cfg.epsilon,
                delta,
                cfg.upper_bound(model),
                Timescales::new(cfg.n1, cfg.n2)?,
                cfg.initial_estimate,
            )?;
            Ok(Box::new(alg))
        });
        reg.register("learn3", |model, cfg| {
            let alg = FairLearner::new(
                model.len(),
                ControllerConfig::need(cfg.xi, "xi", "learn3")?,
                ControllerConfig::need(cfg.alpha, "alpha", "learn3")?,
                StepSchedule::new(cfg.n1)?,
                cfg.initial_estimate,
            )?;
            Ok(Box::new(alg))
        });
        reg.register("learn4", |model, cfg| {
            let alg = FairConstrained::new(
                model.len(),
                ControllerConfig::need(cfg.alpha, "alpha", "learn4")?,
                ControllerConfig::need(cfg.r0, "r0", "learn4")?,
                cfg.lower,
                cfg.upper_bound(model),
                StepSchedule::new(cfg.n1)?,
                cfg.drift,
                cfg.initial_estimate,
            )?;
            Ok(Box::new(alg))
        });
        reg
    }

    /// Adds or replaces the builder registered under `name`.
    pub fn register<F>(&mut self, name: &str, builder: F)
    where
        F: Fn(&CellModel, &ControllerConfig) -> Result<Box<dyn Controller>> + Send + Sync + 'static,
    {
        self.builders.insert(name.to_string(), Box::new(builder));
    }

    pub fn get(&self, name: &str) -> Option<&ControllerBuilder> {
        self.builders.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn build(
        &self,
        name: &str,
        model: &CellModel,
        config: &ControllerConfig,
    ) -> Result<Box<dyn Controller>> {
        let builder = self
            .get(name)
            .ok_or_else(|| Error::UnknownController(name.to_string()))?;
        builder(model, config)
    }
}
