//! Rates seen through a noisy location estimate.
//!
//! When the base station only observes an estimate `s_hat` of the true state,
//! the threshold and fair rules run unchanged on the posterior-mean rates
//! `r~(s_hat) = sum_s p(s | s_hat) R(s)`.

use crate::error::{Error, Result};
use crate::mdp::model::ClassRates;
use crate::mdp::state::StateIndex;

const ROW_TOL: f64 = 1e-9;

/// Sparse conditional law `p(true state | observed state)`, one row per
/// observed state.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorKernel {
    rows: Vec<Vec<(StateIndex, f64)>>,
}

impl PosteriorKernel {
    pub fn new(rows: Vec<Vec<(StateIndex, f64)>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invalid(
                    format!("kernel row {i}"),
                    "negative probability",
                ));
            }
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::invalid(
                    format!("kernel row {i}"),
                    format!("sums to {sum}, expected 1"),
                ));
            }
        }
        Ok(PosteriorKernel { rows })
    }

    pub fn identity(n: usize) -> Self {
        PosteriorKernel {
            rows: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn from_dense(matrix: &[Vec<f64>]) -> Result<Self> {
        PosteriorKernel::new(
            matrix
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, p)| **p != 0.0)
                        .map(|(j, p)| (j, *p))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[Vec<(StateIndex, f64)>] {
        &self.rows
    }
}

pub fn posterior_rates(kernel: &PosteriorKernel, rates: &[ClassRates]) -> Result<Vec<ClassRates>> {
    kernel
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut out = ClassRates {
                mobile: 0.0,
                static_: 0.0,
            };
            for &(s, p) in row {
                let r = rates.get(s).ok_or_else(|| {
                    Error::invalid(format!("kernel row {i}"), format!("state {s} out of range"))
                })?;
                out.mobile += p * r.mobile;
                out.static_ += p * r.static_;
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates() -> Vec<ClassRates> {
        vec![
            ClassRates {
                mobile: 0.0,
                static_: 2.0,
            },
            ClassRates {
                mobile: 4.0,
                static_: 2.0,
            },
            ClassRates {
                mobile: 1.0,
                static_: 3.0,
            },
        ]
    }

    #[test]
    fn identity_kernel() {
        let r = rates();
        assert_eq!(
            posterior_rates(&PosteriorKernel::identity(3), &r).unwrap(),
            r
        );
    }

    #[test]
    fn uniform_over_two() {
        let k = PosteriorKernel::new(vec![vec![(1, 0.5), (2, 0.5)]]).unwrap();
        let out = posterior_rates(&k, &rates()).unwrap();
        assert_eq!(
            out,
            vec![ClassRates {
                mobile: 2.5,
                static_: 2.5
            }]
        );
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        assert!(PosteriorKernel::new(vec![vec![(0, 0.5)]]).is_err());
        assert!(PosteriorKernel::new(vec![vec![(0, 1.5), (1, -0.5)]]).is_err());
        let k = PosteriorKernel::new(vec![vec![(7, 1.0)]]).unwrap();
        assert!(posterior_rates(&k, &rates()).is_err());
    }

    #[test]
    fn segment_confusion_matches_dense_product() {
        use crate::mdp::state::StateSpace;
        // One road of 4 segments; a lone user is misplaced by one segment
        // with probability q either way, reflected at the road ends.
        let space = StateSpace::new(vec![4], vec![1], 1 << 10).unwrap();
        let n = space.len();
        let q = 0.15;
        let mut dense = vec![vec![0.0; n]; n];
        for (i, st) in space.states().enumerate() {
            let occ = &st.occupancy[0];
            if st.user_count() != 1 {
                dense[i][i] = 1.0;
                continue;
            }
            let t = occ.iter().position(|&c| c == 1).unwrap() as i64;
            for (shift, w) in [(-1, q), (0, 1.0 - 2.0 * q), (1, q)] {
                let mut u = t + shift;
                if !(0..4).contains(&u) {
                    u = t - shift;
                }
                let mut moved = st.clone();
                moved.occupancy[0] = vec![0; 4];
                moved.occupancy[0][u as usize] = 1;
                dense[i][space.encode(&moved)] += w;
            }
        }
        let rates: Vec<ClassRates> = (0..n)
            .map(|s| ClassRates {
                mobile: 0.5 + (s as f64).sqrt(),
                static_: 1.0 + 0.1 * s as f64,
            })
            .collect();
        let kernel = PosteriorKernel::from_dense(&dense).unwrap();
        let out = posterior_rates(&kernel, &rates).unwrap();
        for (i, row) in dense.iter().enumerate() {
            let m: f64 = row.iter().zip(&rates).map(|(p, r)| p * r.mobile).sum();
            let st: f64 = row.iter().zip(&rates).map(|(p, r)| p * r.static_).sum();
            assert!((out[i].mobile - m).abs() < 1e-12);
            assert!((out[i].static_ - st).abs() < 1e-12);
        }
    }
}
