//! Learning Markov coarse-correlated, correlated and Nash equilibria in
//! multi-player Markov games with independent linear function approximation.
//!
//! The crate has three layers:
//!
//! * exact tooling: [`game`] (models, policies, rollouts, dynamic-programming
//!   evaluators and brute-force oracles) and [`envs`] (game families and
//!   per-player feature maps);
//! * learning primitives: [`oracles`] (full-information and bandit no-regret
//!   learners) and [`regression`] (norm-constrained least squares and
//!   elliptical bonuses);
//! * learners: [`prefi`] (policy replay with full-information oracles),
//!   [`prebo`] (policy replay with bandit oracles, tabular), and [`nash_ca`]
//!   (coordinate ascent to a pure Nash equilibrium in potential games).
//!
//! [`harness`] wires everything into configurable, seeded experiments.

pub mod common;
pub mod envs;
pub mod error;
pub mod game;
pub mod harness;
pub mod nash_ca;
pub mod oracles;
pub mod prebo;
pub mod prefi;
pub mod regression;
pub mod rng;

pub use error::{Error, Result};
