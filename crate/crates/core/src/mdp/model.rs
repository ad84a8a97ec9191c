//! Per-state class rates and the precomputed cell model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::state::{MdpState, StateIndex, StateSpace, DEFAULT_STATE_CAP};
use crate::radio::{build_rate_table, RateTable};
use crate::scenario::Scenario;

/// Per-unit-bandwidth rates of the two classes in one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub mobile: f64,
    pub static_: f64,
}

/// Rates of the two classes when the whole band goes to that class and is
/// split equally within it. A state without mobile users has mobile rate 0.
pub fn class_rates(state: &MdpState, table: &RateTable) -> ClassRates {
    let users = state.user_count();
    let mobile = if users == 0 {
        0.0
    } else {
        let total: f64 = state
            .occupancy
            .iter()
            .zip(&table.mu_rate)
            .flat_map(|(road, rates)| {
                let l = road.len();
                // Residual time t sits on segment l - t (0-based): a fresh
                // arrival occupies the entry segment.
                road.iter()
                    .enumerate()
                    .map(move |(t0, &count)| f64::from(count) * rates[l - 1 - t0])
            })
            .sum();
        total / f64::from(users)
    };
    ClassRates {
        mobile,
        static_: mean(&table.su_rate),
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Everything the exact solvers need about one scenario: the rate table, the
/// state space, per-state class rates and the stationary law.
#[derive(Debug, Clone)]
pub struct CellModel {
    pub scenario: Scenario,
    pub table: RateTable,
    pub space: StateSpace,
    pub rates: Vec<ClassRates>,
    pub stationary: Vec<f64>,
    mobile_users: Vec<u32>,
}

/// Cap on the number of gain combinations enumerated per state when
/// computing exact fractional moments under fading.
const MOMENT_ENUMERATION_CAP: usize = 1 << 22;

impl CellModel {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let table = build_rate_table(&scenario)?;
        CellModel::with_table(scenario, table)
    }

    /// Builds the model around an externally supplied rate table (for
    /// instance a scaled one).
    pub fn with_table(scenario: Scenario, table: RateTable) -> Result<Self> {
        Self::with_table_and_cap(scenario, table, DEFAULT_STATE_CAP)
    }

    pub fn with_table_and_cap(scenario: Scenario, table: RateTable, cap: usize) -> Result<Self> {
        if table.mu_rate.len() != scenario.roads.len()
            || table
                .mu_rate
                .iter()
                .zip(&scenario.roads)
                .any(|(r, road)| r.len() != road.segment_count)
            || table.su_rate.len() != scenario.static_users.len()
        {
            return Err(Error::invalid(
                "rate table",
                "dimensions do not match the scenario",
            ));
        }
        let space = StateSpace::for_scenario(&scenario, cap)?;
        let pmfs: Vec<Vec<f64>> = scenario.roads.iter().map(|r| r.arrival_pmf()).collect();
        let stationary = space.stationary(&pmfs);
        let mut rates = Vec::with_capacity(space.len());
        let mut mobile_users = Vec::with_capacity(space.len());
        for s in space.states() {
            rates.push(class_rates(&s, &table));
            mobile_users.push(s.user_count());
        }
        Ok(CellModel {
            scenario,
            table,
            space,
            rates,
            stationary,
            mobile_users,
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn mobile_users(&self, s: StateIndex) -> u32 {
        self.mobile_users[s]
    }

    pub fn static_users(&self) -> usize {
        self.table.su_rate.len()
    }

    /// Mean static class rate under the stationary law (the static rate of
    /// the always-static policy).
    pub fn static_capacity(&self) -> f64 {
        self.stationary
            .iter()
            .zip(&self.rates)
            .map(|(g, r)| g * r.static_)
            .sum()
    }

    /// Largest ratio `R_mobile(s) / R_static(s)` over all states.
    pub fn max_ratio(&self) -> f64 {
        self.rates
            .iter()
            .filter(|r| r.static_ > 0.0)
            .map(|r| r.mobile / r.static_)
            .fold(0.0, f64::max)
    }

    /// Exact `E[R_class(s)^alpha]` for every state, the expectation running
    /// over independent per-user fading gains drawn from the chain's
    /// stationary law. Without fading this is `R(s)^alpha`.
    pub fn class_moments(&self, alpha: f64) -> Result<Vec<ClassRates>> {
        let fading = match &self.scenario.fading {
            None => {
                return Ok(self
                    .rates
                    .iter()
                    .map(|r| ClassRates {
                        mobile: r.mobile.powf(alpha),
                        static_: r.static_.powf(alpha),
                    })
                    .collect())
            }
            Some(f) if f.len() == 1 => {
                let g = f.gains[0];
                return Ok(self
                    .rates
                    .iter()
                    .map(|r| ClassRates {
                        mobile: (r.mobile * g).powf(alpha),
                        static_: (r.static_ * g).powf(alpha),
                    })
                    .collect());
            }
            Some(f) => f,
        };
        let law: Vec<(f64, f64)> = fading
            .stationary()
            .into_iter()
            .zip(fading.gains.iter().copied())
            .filter(|(p, _)| *p > 0.0)
            .collect();
        let k = self.static_users();
        let static_terms: Vec<f64> = self.table.su_rate.iter().map(|r| r / k as f64).collect();
        let static_moment = fractional_moment(&static_terms, &law, alpha)?;
        self.space
            .states()
            .enumerate()
            .map(|(i, s)| {
                let m = self.mobile_users[i];
                let mobile = if m == 0 {
                    0.0
                } else {
                    let terms: Vec<f64> = s
                        .occupancy
                        .iter()
                        .zip(&self.table.mu_rate)
                        .flat_map(|(road, rates)| {
                            let l = road.len();
                            road.iter().enumerate().flat_map(move |(t0, &count)| {
                                std::iter::repeat_n(
                                    rates[l - 1 - t0] / f64::from(m),
                                    count as usize,
                                )
                            })
                        })
                        .collect();
                    fractional_moment(&terms, &law, alpha)?
                };
                Ok(ClassRates {
                    mobile,
                    static_: static_moment,
                })
            })
            .collect()
    }
}

/// `E[(sum_u w_u G_u)^alpha]` with i.i.d. gains `G_u` from `law`.
fn fractional_moment(weights: &[f64], law: &[(f64, f64)], alpha: f64) -> Result<f64> {
    let combos = (law.len() as f64).powi(weights.len() as i32);
    if combos > MOMENT_ENUMERATION_CAP as f64 {
        return Err(Error::invalid(
            "fading",
            format!("{combos} gain combinations exceed the exact-moment cap"),
        ));
    }
    fn recurse(weights: &[f64], law: &[(f64, f64)], alpha: f64, prob: f64, acc: f64) -> f64 {
        match weights.split_first() {
            None => prob * acc.powf(alpha),
            Some((w, rest)) => law
                .iter()
                .map(|(p, g)| recurse(rest, law, alpha, prob * p, acc + w * g))
                .sum(),
        }
    }
    Ok(recurse(weights, law, alpha, 1.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::FadingProcess;

    fn table() -> RateTable {
        RateTable {
            mu_rate: vec![vec![1.0, 2.0, 3.0]],
            su_rate: vec![4.0, 2.0],
        }
    }

    #[test]
    fn empty_state() {
        let r = class_rates(&MdpState::empty(&[3]), &table());
        assert_eq!(
            r,
            ClassRates {
                mobile: 0.0,
                static_: 3.0
            }
        );
    }

    #[test]
    fn single_user_at_entry() {
        let s = MdpState {
            occupancy: vec![vec![0, 0, 1]],
        };
        assert_eq!(class_rates(&s, &table()).mobile, 1.0);
    }

    #[test]
    fn two_users_share_equally() {
        // Residual 1 -> last segment (3.0), residual 2 -> middle (2.0).
        let s = MdpState {
            occupancy: vec![vec![1, 1, 0]],
        };
        assert_eq!(class_rates(&s, &table()).mobile, 2.5);
    }

    #[test]
    fn table1_model_shape() {
        let model = CellModel::new(Scenario::table1(0.1)).unwrap();
        assert_eq!(model.len(), 1024);
        assert!((model.stationary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((model.static_capacity() - model.rates[0].static_).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_table() {
        let s = Scenario::table1(0.1);
        assert!(CellModel::with_table(s, table()).is_err());
    }

    #[test]
    fn moments_without_fading_are_powers() {
        let model = CellModel::new(Scenario::table1(0.1)).unwrap();
        let m = model.class_moments(0.5).unwrap();
        for (r, mo) in model.rates.iter().zip(&m) {
            assert_eq!(mo.mobile, r.mobile.powf(0.5));
        }
    }

    #[test]
    fn moments_with_fading_enumerate_gains() {
        let s = Scenario::table1(0.1).with_fading(Some(FadingProcess::default_two_state()));
        let model = CellModel::new(s).unwrap();
        let m = model.class_moments(1.0).unwrap();
        // alpha = 1: unit-mean gains give back the mean rates.
        for (r, mo) in model.rates.iter().zip(&m) {
            assert!((mo.mobile - r.mobile).abs() < 1e-12);
            assert!((mo.static_ - r.static_).abs() < 1e-12);
        }
        // A single mobile user at rate r: E[(r G)^a] = r^a (0.5^a + 1.5^a) / 2.
        let single = model.space.encode(&MdpState {
            occupancy: vec![{
                let mut v = vec![0; 10];
                v[9] = 1;
                v
            }],
        });
        let m = model.class_moments(0.5).unwrap();
        let r = model.rates[single].mobile;
        let expected = r.sqrt() * (0.5f64.sqrt() + 1.5f64.sqrt()) / 2.0;
        assert!((m[single].mobile - expected).abs() < 1e-12);
    }
}
