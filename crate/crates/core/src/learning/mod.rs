//! Online stochastic-approximation learners and the controller registry.

pub mod algorithms;
pub mod controller;
pub mod schedule;
pub mod state;

pub use algorithms::{
    sample_delta, FairConstrained, FairDrift, FairLearner, SingleTimescale, TwoTimescale,
};
pub use controller::{
    Controller, ControllerBuilder, ControllerConfig, ControllerRegistry, FixedPolicyController,
    DEFAULT_LEARNING_DELTA,
};
pub use schedule::{StepSchedule, Timescales};
pub use state::{LearnerState, SlotFeedback};
