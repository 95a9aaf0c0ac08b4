//! Plan generation toward goal predicates.
//!
//! Planning works on [`Requirement`]s. A goal becomes one `Place`
//! requirement per predicate; helper subgoals also use `Holds` (hand an
//! object to the other agent) and `Restore` (put an object back where it
//! started). Plans are built from macro options (fetch one object, deliver
//! one held object) that expand to primitive actions:
//!
//! - [`hp_plan`] picks options greedily, nearest first.
//! - [`mcts_plan`] runs UCT over option choices with greedy rollouts.
//! - [`bfs_optimal`] is an exact primitive-level search used as an oracle.
//!
//! Every plan assumes the other agent stays idle.

mod bfs;
mod macros;
mod mcts;
mod plan;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::goals::{count_satisfied, GoalSpec, Predicate};
use crate::worldsim::{Action, ClassName, EntityId, Placement, SceneGraph};

pub use bfs::{bfs_optimal, bfs_optimal_for};
pub use macros::{hp_plan, hp_plan_for, macro_script};
pub use mcts::{mcts_plan, mcts_plan_for, MctsConfig, UNBOUNDED};
pub use plan::{Plan, PlanDoc, PlanStep};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("unreachable subgoal: {0}")]
    Unreachable(String),
    #[error("search budget of {0} nodes exceeded")]
    Budget(usize),
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
    #[error("plan does not replay: {0}")]
    Replay(String),
}

/// One condition a plan must establish.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Requirement {
    /// At least `count` instances satisfy `pred`.
    Place { pred: Predicate, count: u32 },
    /// `holder` holds at least `count` objects of `class`.
    Holds { holder: EntityId, class: ClassName, count: u32 },
    /// `object` is back at `placement`.
    Restore { object: EntityId, placement: Placement },
}

impl Requirement {
    pub fn is_met(&self, state: &SceneGraph) -> bool {
        match *self {
            Requirement::Place { pred, count } => count_satisfied(state, &pred) >= count,
            Requirement::Holds { holder, class, count } => held_of_class(state, holder, class) >= count,
            Requirement::Restore { object, placement } => state.placement(object) == placement,
        }
    }

    /// Object class this requirement consumes, if it is class-level.
    pub fn class(&self) -> Option<ClassName> {
        match *self {
            Requirement::Place { pred, .. } => Some(pred.class),
            Requirement::Holds { class, .. } => Some(class),
            Requirement::Restore { .. } => None,
        }
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::Place { pred, count } => write!(f, "{pred}>={count}"),
            Requirement::Holds { holder, class, count } => write!(f, "HOLDS({holder},{class})>={count}"),
            Requirement::Restore { object, placement } => match placement {
                Placement::On(l) => write!(f, "RESTORE(ON({object},{l}))"),
                Placement::In(l) => write!(f, "RESTORE(IN({object},{l}))"),
                Placement::HeldBy(a) => write!(f, "RESTORE(HOLDS({a},{object}))"),
                Placement::None => write!(f, "RESTORE({object})"),
            },
        }
    }
}

pub fn held_of_class(state: &SceneGraph, holder: EntityId, class: ClassName) -> u32 {
    state.held_by(holder).filter(|&o| state.class_of(o) == class).count() as u32
}

/// One `Place` requirement per goal predicate.
pub fn goal_requirements(goal: &GoalSpec) -> Vec<Requirement> {
    goal.iter().map(|(p, c)| Requirement::Place { pred: *p, count: c as u32 }).collect()
}

/// What an agent plans toward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub agent: EntityId,
    pub reqs: Vec<Requirement>,
    /// Count objects already held by the other agent as committed to this
    /// agent's requirements, so the two do not fetch the same units.
    pub commit_other: bool,
    /// Objects the other agent is expected to fetch. They are never fetched
    /// and, under `commit_other`, count as committed units.
    pub claimed: BTreeSet<EntityId>,
}

impl Task {
    pub fn new(agent: EntityId, reqs: Vec<Requirement>) -> Self {
        Task { agent, reqs, commit_other: false, claimed: BTreeSet::new() }
    }

    pub fn goal(agent: EntityId, goal: &GoalSpec) -> Self {
        Self::new(agent, goal_requirements(goal))
    }

    pub fn committing_other(mut self) -> Self {
        self.commit_other = true;
        self
    }

    pub fn claiming(mut self, claimed: BTreeSet<EntityId>) -> Self {
        self.claimed = claimed;
        self
    }

    pub fn is_met(&self, state: &SceneGraph) -> bool {
        self.reqs.iter().all(|r| r.is_met(state))
    }
}

/// Objects the main agent grabs on its current trip (before its next put
/// or handover) when following the hierarchical planner toward `goal`.
pub fn current_trip_grabs(state: &SceneGraph, goal: &GoalSpec) -> BTreeSet<EntityId> {
    let Ok(plan) = hp_plan(state, goal) else { return BTreeSet::new() };
    plan.actions()
        .take_while(|a| !matches!(a, Action::PutOn { .. } | Action::PutIn { .. } | Action::Give { .. }))
        .filter_map(|a| match a {
            Action::Grab { object } => Some(object),
            _ => None,
        })
        .collect()
}
