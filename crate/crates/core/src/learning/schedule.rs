use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step sizes `a(t) = t^(-n)` with `n` in `(1/2, 1]`, so that `sum a(t)`
/// diverges while `sum a(t)^2` converges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    exponent: f64,
}

impl StepSchedule {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::invalid(
                "step exponent",
                format!("{exponent} is outside (1/2, 1]"),
            ));
        }
        Ok(StepSchedule { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn step(&self, t: u64) -> Result<f64> {
        if t < 1 {
            return Err(Error::invalid("step index", "must be >= 1"));
        }
        Ok(self.at(t))
    }

    /// `t^(-n)`; callers guarantee `t >= 1`.
    pub(crate) fn at(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        if self.exponent == 1.0 {
            1.0 / t as f64
        } else {
            (t as f64).powf(-self.exponent)
        }
    }
}

/// Fast (`a`) and slow (`b`) schedules with `1/2 < n_fast < n_slow <= 1`,
/// hence `b(t) / a(t) -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timescales {
    pub fast: StepSchedule,
    pub slow: StepSchedule,
}

impl Timescales {
    pub fn new(n_fast: f64, n_slow: f64) -> Result<Self> {
        let fast = StepSchedule::new(n_fast)?;
        let slow = StepSchedule::new(n_slow)?;
        if n_fast >= n_slow {
            return Err(Error::invalid(
                "step exponents",
                format!("need n1 < n2, got n1 = {n_fast}, n2 = {n_slow}"),
            ));
        }
        Ok(Timescales { fast, slow })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = StepSchedule::new(0.6).unwrap();
        assert_eq!(s.step(1).unwrap(), 1.0);
        assert_eq!(StepSchedule::new(1.0).unwrap().step(4).unwrap(), 0.25);
        assert!(s.step(0).is_err());
    }

    #[test]
    fn exponent_range() {
        assert!(StepSchedule::new(0.5).is_err());
        assert!(StepSchedule::new(1.01).is_err());
        assert!(StepSchedule::new(0.51).is_ok());
        assert!(Timescales::new(0.6, 0.9).is_ok());
        assert!(Timescales::new(0.9, 0.6).is_err());
        assert!(Timescales::new(0.7, 0.7).is_err());
    }

    #[test]
    fn squared_steps_stay_below_zeta() {
        // sum_{t>=1} t^-1.2 = zeta(1.2) = 5.591582441177...
        let s = StepSchedule::new(0.6).unwrap();
        let partial: f64 = (1..=1_000_000u64).map(|t| s.at(t).powi(2)).sum();
        let zeta_1_2 = 5.591_582_441_177_751;
        assert!(partial < zeta_1_2);
        // Tail beyond N is about N^-0.2 / 0.2 = 0.315 at N = 10^6.
        assert!((zeta_1_2 - partial - 1e6f64.powf(-0.2) / 0.2).abs() < 1e-3);
    }

    #[test]
    fn slow_over_fast_vanishes() {
        let ts = Timescales::new(0.6, 0.9).unwrap();
        let ratio = |t: u64| ts.slow.at(t) / ts.fast.at(t);
        assert!(ratio(1_000_000) < ratio(1_000) && ratio(1_000_000) < 0.02);
    }
}
