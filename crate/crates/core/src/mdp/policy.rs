//! Stationary policies and their exact evaluation under the stationary law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::model::{CellModel, ClassRates};

/// Which class gets the band when `R_mobile = xi * R_static` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieAction {
    #[default]
    Static,
    Mobile,
}

/// Whole band to the mobile class iff `R_mobile(s) > xi * R_static(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub xi: f64,
    #[serde(default)]
    pub tie: TieAction,
}

/// Threshold policy at the perturbed multiplier `xi + delta_tau`, where
/// `delta_tau` is uniform on `[-delta, 0]` with probability `p` and uniform on
/// `(0, delta]` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedThresholdPolicy {
    pub xi: f64,
    pub p: f64,
    pub delta: f64,
}

/// Interior alpha-fair split of the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairPolicy {
    pub xi: f64,
    pub alpha: f64,
}

/// Non-opportunistic baseline: every user, static or mobile, gets
/// `1 / (m(s) + K)` of the band. Throughputs are reported as alpha-moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualSharePolicy {
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Policy {
    Threshold(ThresholdPolicy),
    Randomized(RandomizedThresholdPolicy),
    Fair(FairPolicy),
    EqualShare(EqualSharePolicy),
}

impl ThresholdPolicy {
    pub fn new(xi: f64) -> Self {
        ThresholdPolicy {
            xi,
            tie: TieAction::Static,
        }
    }
}

impl RandomizedThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.xi >= 0.0) {
            return Err(Error::invalid("xi", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid("p", "must lie in [0, 1]"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid("delta", "must be > 0"));
        }
        Ok(())
    }

    /// `P(delta_tau < y)`: the probability that the perturbed threshold sits
    /// strictly below a state whose ratio exceeds `xi` by `y`.
    pub fn perturbation_cdf(&self, y: f64) -> f64 {
        let (p, d) = (self.p, self.delta);
        if y <= -d {
            0.0
        } else if y <= 0.0 {
            p * (y + d) / d
        } else if y < d {
            p + (1.0 - p) * y / d
        } else {
            1.0
        }
    }
}

impl FairPolicy {
    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(Error::invalid("xi", "must be finite and > 0"));
        }
        Ok(())
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", "must lie strictly inside (0, 1)"));
    }
    Ok(())
}

/// 1 (mobile) or 0 (static) under the threshold rule.
pub fn threshold_action(rates: ClassRates, xi: f64, tie: TieAction) -> u8 {
    let gap = rates.mobile - xi * rates.static_;
    if gap > 0.0 {
        1
    } else if gap < 0.0 {
        0
    } else {
        match tie {
            TieAction::Static => 0,
            TieAction::Mobile => 1,
        }
    }
}

/// Mobile fraction maximising `x^a M + xi (1-x)^a S` over `x` in `[0, 1]`,
/// where `M`, `S` are the classes' alpha-moments:
///
/// `eta = (xi S)^(1/(a-1)) / ((xi S)^(1/(a-1)) + M^(1/(a-1)))`
///
/// evaluated as `1 / (1 + (xi S / M)^(1/(1-a)))` to stay finite at the
/// extremes. A state with `M = 0` gets nothing.
pub fn fair_fraction(moments: ClassRates, xi: f64, alpha: f64) -> f64 {
    if moments.mobile <= 0.0 {
        return 0.0;
    }
    let odds = (xi * moments.static_ / moments.mobile).powf(1.0 / (1.0 - alpha));
    1.0 / (1.0 + odds)
}

/// Fair split for deterministic per-unit rates, where the alpha-moments are
/// `R^alpha`. The rate ratio is formed before any power is taken, so scaling
/// the rate table by a power of two leaves the result bit-identical.
pub fn fair_allocation(rates: ClassRates, xi: f64, alpha: f64) -> f64 {
    if rates.mobile <= 0.0 {
        return 0.0;
    }
    let ratio = rates.static_ / rates.mobile;
    let odds = (xi * ratio.powf(alpha)).powf(1.0 / (1.0 - alpha));
    1.0 / (1.0 + odds)
}

/// Exact long-run throughputs of a stationary policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    /// Mobile class throughput (alpha-moment form for fair and equal-share
    /// policies), bits per slot.
    pub mu_throughput: f64,
    pub su_throughput: f64,
    /// `mu_throughput + xi * su_throughput`; equal to `mu_throughput +
    /// su_throughput` for the equal-share baseline.
    pub lambda: f64,
}

impl Policy {
    pub fn validate(&self) -> Result<()> {
        match self {
            Policy::Threshold(t) => {
                if !(t.xi.is_finite() && t.xi >= 0.0) {
                    return Err(Error::invalid("xi", "must be finite and >= 0"));
                }
                Ok(())
            }
            Policy::Randomized(r) => r.validate(),
            Policy::Fair(f) => f.validate(),
            Policy::EqualShare(e) => {
                if !(e.alpha > 0.0 && e.alpha <= 1.0) {
                    return Err(Error::invalid("alpha", "must lie in (0, 1]"));
                }
                Ok(())
            }
        }
    }
}

pub fn evaluate_policy(model: &CellModel, policy: &Policy) -> Result<PolicyEvaluation> {
    policy.validate()?;
    let g = &model.stationary;
    let eval = match *policy {
        Policy::Threshold(t) => {
            let (mu, su) = accumulate(g, &model.rates, |_, r| {
                f64::from(threshold_action(*r, t.xi, t.tie))
            });
            PolicyEvaluation {
                mu_throughput: mu,
                su_throughput: su,
                lambda: mu + t.xi * su,
            }
        }
        Policy::Randomized(rp) => {
            let (mu, su) = accumulate(g, &model.rates, |_, r| randomized_mobile_prob(&rp, *r));
            PolicyEvaluation {
                mu_throughput: mu,
                su_throughput: su,
                lambda: mu + rp.xi * su,
            }
        }
        Policy::Fair(f) => {
            let moments = model.class_moments(f.alpha)?;
            let (mu, su) = accumulate_alpha(g, &moments, f.alpha, |_, m| {
                fair_fraction(*m, f.xi, f.alpha)
            });
            PolicyEvaluation {
                mu_throughput: mu,
                su_throughput: su,
                lambda: mu + f.xi * su,
            }
        }
        Policy::EqualShare(e) => {
            let k = model.static_users() as f64;
            let moments = model.class_moments(e.alpha)?;
            let (mu, su) = accumulate_alpha(g, &moments, e.alpha, |s, _| {
                let m = f64::from(model.mobile_users(s));
                m / (m + k)
            });
            PolicyEvaluation {
                mu_throughput: mu,
                su_throughput: su,
                lambda: mu + su,
            }
        }
    };
    Ok(eval)
}

/// Exact throughputs of an arbitrary stationary randomized policy over the
/// actions {0, 1}, given the per-state probability of serving the mobile
/// class.
pub fn evaluate_mobile_probabilities(
    model: &CellModel,
    mobile_prob: &[f64],
    xi: f64,
) -> Result<PolicyEvaluation> {
    if mobile_prob.len() != model.len() {
        return Err(Error::invalid(
            "mobile_prob",
            "one probability per state required",
        ));
    }
    if mobile_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("mobile_prob", "entries must lie in [0, 1]"));
    }
    let (mu, su) = accumulate(&model.stationary, &model.rates, |s, _| mobile_prob[s]);
    Ok(PolicyEvaluation {
        mu_throughput: mu,
        su_throughput: su,
        lambda: mu + xi * su,
    })
}

/// Probability that the randomized threshold policy serves the mobile class.
pub fn randomized_mobile_prob(policy: &RandomizedThresholdPolicy, r: ClassRates) -> f64 {
    if r.static_ > 0.0 {
        policy.perturbation_cdf(r.mobile / r.static_ - policy.xi)
    } else if r.mobile > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn accumulate(
    g: &[f64],
    rates: &[ClassRates],
    mobile_share: impl Fn(usize, &ClassRates) -> f64,
) -> (f64, f64) {
    let mut mu = 0.0;
    let mut su = 0.0;
    for (s, (gs, r)) in g.iter().zip(rates).enumerate() {
        let eta = mobile_share(s, r);
        mu += gs * eta * r.mobile;
        su += gs * (1.0 - eta) * r.static_;
    }
    (mu, su)
}

fn accumulate_alpha(
    g: &[f64],
    moments: &[ClassRates],
    alpha: f64,
    fraction: impl Fn(usize, &ClassRates) -> f64,
) -> (f64, f64) {
    let mut mu = 0.0;
    let mut su = 0.0;
    for (s, (gs, m)) in g.iter().zip(moments).enumerate() {
        let eta = fraction(s, m);
        mu += gs * eta.powf(alpha) * m.mobile;
        su += gs * (1.0 - eta).powf(alpha) * m.static_;
    }
    (mu, su)
}
