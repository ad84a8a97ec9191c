//! Opportunistic bandwidth sharing between static and mobile users of one
//! cellular cell: radio model, exact MDP solvers, online learners and a
//! slotted simulator.

pub mod error;
pub mod experiments;
pub mod learning;
pub mod mdp;
pub mod radio;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
pub use scenario::Scenario;
