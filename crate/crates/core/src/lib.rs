//! Online goal inference and uncertainty-aware helping in a symbolic
//! household environment.
//!
//! A main agent works on a hidden household task; a helper watches its
//! actions, maintains a particle set of (goal, predicted plan) hypotheses
//! proposed by a small neural network and filtered by inverse planning, and
//! picks helping subgoals by trading expected speedup against its own cost
//! and the disruption it causes.
//!
//! Modules, bottom-up:
//! - [`worldsim`]: scene-graph states, actions, transitions, apartments
//! - [`goals`]: goal predicates, task grammar, satisfaction, F1
//! - [`planner`]: macro scripts, hierarchical planner, MCTS, BFS oracle
//! - [`gpn`]: goal proposal network
//! - [`nopa`]: the particle-filter helper
//! - [`baselines`]: comparison helpers
//! - [`episode`]: main/helper controllers and the episode loop
//! - [`bench`]: datasets, evaluation, metrics

pub mod baselines;
pub mod bench;
pub mod episode;
pub mod goals;
pub mod gpn;
pub mod nopa;
pub mod planner;
pub mod worldsim;

#[cfg(test)]
mod testutil;
