//! Equal-share versus opportunistic comparison over the six reference
//! `(alpha, theta, xi)` configurations.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{
    evaluate_policy, CellModel, EqualSharePolicy, FairPolicy, Policy, ThresholdPolicy,
};
use crate::scenario::Scenario;

/// `(alpha, theta, xi)` for each row.
pub const TABLE1_ROWS: [(f64, f64, f64); 6] = [
    (1.0, 0.1, 3.1),
    (1.0, 0.01, 3.1),
    (0.8, 0.1, 2.85),
    (0.8, 0.01, 2.9),
    (0.5, 0.1, 2.9),
    (0.5, 0.01, 3.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub alpha: f64,
    pub theta: f64,
    pub xi: f64,
    pub equal_mobile: f64,
    pub equal_static: f64,
    pub optimal_mobile: f64,
    pub optimal_static: f64,
}

/// The optimal policy at multiplier `xi`: the greedy threshold for
/// `alpha = 1`, the fair split otherwise.
pub fn optimal_policy(alpha: f64, xi: f64) -> Policy {
    if alpha == 1.0 {
        Policy::Threshold(ThresholdPolicy::new(xi))
    } else {
        Policy::Fair(FairPolicy { xi, alpha })
    }
}

/// One row on a prepared model whose arrival probability is `theta`.
pub fn table1_row(model: &CellModel, alpha: f64, xi: f64) -> Result<Table1Row> {
    let equal = evaluate_policy(model, &Policy::EqualShare(EqualSharePolicy { alpha }))?;
    let optimal = evaluate_policy(model, &optimal_policy(alpha, xi))?;
    Ok(Table1Row {
        alpha,
        theta: model.scenario.roads[0].arrival_prob,
        xi,
        equal_mobile: equal.mu_throughput,
        equal_static: equal.su_throughput,
        optimal_mobile: optimal.mu_throughput,
        optimal_static: optimal.su_throughput,
    })
}

/// All six rows for `base`, with the arrival probability of every road set
/// to each row's `theta`. The rate table is built once.
pub fn table1(base: &Scenario) -> Result<Vec<Table1Row>> {
    let table = crate::radio::build_rate_table(base)?;
    let mut rows = Vec::with_capacity(TABLE1_ROWS.len());
    let mut cached: Option<(f64, CellModel)> = None;
    for &(alpha, theta, xi) in &TABLE1_ROWS {
        if cached.as_ref().map(|(t, _)| *t) != Some(theta) {
            let scenario = base.clone().with_arrival_prob(theta);
            scenario.validate()?;
            cached = Some((theta, CellModel::with_table(scenario, table.clone())?));
        }
        let (_, model) = cached.as_ref().expect("model prepared above");
        rows.push(table1_row(model, alpha, xi)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_rows_in_order() {
        let rows = table1(&Scenario::table1(0.1)).unwrap();
        assert_eq!(rows.len(), 6);
        for (row, &(a, t, x)) in rows.iter().zip(&TABLE1_ROWS) {
            assert_eq!((row.alpha, row.theta, row.xi), (a, t, x));
            assert!(row.optimal_mobile > row.equal_mobile);
        }
    }
}
