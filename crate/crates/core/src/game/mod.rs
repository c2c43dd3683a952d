//! Markov games, Markov policies, trajectory sampling and exact evaluators.

pub mod eval;
pub mod model;
pub mod policy;
pub mod rollout;

pub use eval::{
    best_modification_value, best_response_value, brute_force_pure_nash, cce_gap, ce_gap, evaluate_modified,
    evaluate_value, nash_gap, EvalLimits, GapReport, PlayerValues, PureNashSearch, ValueTable,
};
pub use model::{GameDocument, JointActions, RewardNoise, TabularMarkovGame, Tensor};
pub use policy::{Component, MixtureMarkovPolicy, PlayerPolicy, ProductLayer, StrategyModification};
pub use rollout::{
    concat_rollout, rollout_count, sample_trajectory, sample_trajectory_seeded, SwitchAction, Trajectory, Transition,
};
