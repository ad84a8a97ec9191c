//! Exact model of one cell: states, stationary law, class rates, policies
//! and their optimal parameters.

pub mod model;
pub mod policy;
pub mod posterior;
pub mod solve;
pub mod state;

pub use model::{class_rates, CellModel, ClassRates};
pub use policy::{
    evaluate_mobile_probabilities, evaluate_policy, fair_allocation, fair_fraction,
    randomized_mobile_prob, threshold_action, EqualSharePolicy, FairPolicy, Policy,
    PolicyEvaluation, RandomizedThresholdPolicy, ThresholdPolicy, TieAction,
};
pub use posterior::{posterior_rates, PosteriorKernel};
pub use solve::{
    breakpoints, lambda_star, relative_value_iteration, solve_constrained, solve_constrained_fair,
    solve_constrained_fair_with, solve_constrained_on, ConstrainedSolution, FairSolution,
    FairStaticCurve, RviResult, Staircase, BREAKPOINT_MERGE_TOLERANCE,
};
pub use state::{MdpState, StateIndex, StateSpace, DEFAULT_STATE_CAP};
