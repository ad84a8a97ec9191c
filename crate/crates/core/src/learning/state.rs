use serde::{Deserialize, Serialize};

use crate::mdp::StateIndex;

/// Running per-state estimates, visit counters and scalar iterates shared by
/// the four online learners. In the alpha-fair learners the estimates track
/// alpha-moments rather than mean rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub rate_est_mobile: Vec<f64>,
    pub rate_est_static: Vec<f64>,
    /// Slots in which state `s` was visited and the mobile class was served.
    pub visits_mobile: Vec<u64>,
    /// Slots in which state `s` was visited and the static class was served.
    pub visits_static: Vec<u64>,
    pub visits: Vec<u64>,
    pub xi: f64,
    pub p: f64,
    /// Number of completed updates.
    pub slot: u64,
}

impl LearnerState {
    pub fn new(states: usize, initial_estimate: f64, xi: f64, p: f64) -> Self {
        LearnerState {
            rate_est_mobile: vec![initial_estimate; states],
            rate_est_static: vec![initial_estimate; states],
            visits_mobile: vec![0; states],
            visits_static: vec![0; states],
            visits: vec![0; states],
            xi,
            p,
            slot: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rate_est_mobile.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate_est_mobile.is_empty()
    }
}

/// What the base station learns at the end of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotFeedback {
    pub state: StateIndex,
    /// Fraction of the band given to the mobile class.
    pub action: f64,
    /// Per-unit-bandwidth class rate realised this slot; `None` when the
    /// class received no bandwidth.
    pub mobile_sample: Option<f64>,
    pub static_sample: Option<f64>,
    /// Class downloads in bits: fraction times per-unit-bandwidth sample.
    pub mobile_download: f64,
    pub static_download: f64,
}
