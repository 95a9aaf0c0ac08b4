use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::worldsim::{short_hash, step_single, Action, EntityId, SceneGraph};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub action: Action,
    /// State after `action`, with the other agent idle.
    pub state: SceneGraph,
}

/// A single-agent action sequence with the states it predicts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    agent: EntityId,
    origin: SceneGraph,
    steps: Vec<PlanStep>,
}

impl Plan {
    pub fn new(origin: SceneGraph, agent: EntityId) -> Self {
        Plan { agent, origin, steps: Vec::new() }
    }

    /// Appends `action` if it is legal in the current final state.
    pub fn push(&mut self, action: Action) -> Result<(), PlannerError> {
        let next = step_single(self.final_state(), self.agent, &action)
            .ok_or_else(|| PlannerError::Replay(format!("{action} is illegal at step {}", self.steps.len())))?;
        self.steps.push(PlanStep { action, state: next });
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, action: Action, state: SceneGraph) {
        self.steps.push(PlanStep { action, state });
    }

    pub fn from_actions(origin: SceneGraph, agent: EntityId, actions: &[Action]) -> Result<Self, PlannerError> {
        let mut plan = Plan::new(origin, agent);
        for a in actions {
            plan.push(*a)?;
        }
        Ok(plan)
    }

    pub fn agent(&self) -> EntityId {
        self.agent
    }

    pub fn origin(&self) -> &SceneGraph {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    pub fn first_action(&self) -> Action {
        self.steps.first().map_or(Action::Idle, |s| s.action)
    }

    /// State after the last step (the origin for an empty plan).
    pub fn final_state(&self) -> &SceneGraph {
        self.steps.last().map_or(&self.origin, |s| &s.state)
    }

    pub fn truncate(&mut self, len: usize) {
        self.steps.truncate(len);
    }

    /// Replays the actions from the origin and compares every predicted state.
    pub fn verify(&self) -> Result<(), PlannerError> {
        let mut s = self.origin.clone();
        for (i, step) in self.steps.iter().enumerate() {
            s = step_single(&s, self.agent, &step.action)
                .ok_or_else(|| PlannerError::Replay(format!("step {i}: {} is illegal", step.action)))?;
            if s != step.state {
                return Err(PlannerError::Replay(format!("step {i}: predicted state differs")));
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> PlanDoc {
        PlanDoc {
            agent: self.agent,
            origin: self.origin.state_hash(),
            actions: self.actions().collect(),
            hashes: self.steps.iter().map(|s| s.state.state_hash()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("plan serialization is infallible")
    }

    /// Identity of the action sequence and its origin.
    pub fn hash(&self) -> String {
        let actions: Vec<Action> = self.actions().collect();
        let body = serde_json::to_string(&(self.agent, self.origin.state_hash(), actions))
            .expect("plan serialization is infallible");
        short_hash(body.as_bytes())
    }
}

/// Serialized plan: actions plus the hash of every predicted state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub agent: EntityId,
    pub origin: String,
    pub actions: Vec<Action>,
    pub hashes: Vec<String>,
}

impl PlanDoc {
    /// Rebuilds the plan from `origin`, checking every stored hash.
    pub fn replay(&self, origin: &SceneGraph) -> Result<Plan, PlannerError> {
        if origin.state_hash() != self.origin {
            return Err(PlannerError::Replay("origin hash mismatch".into()));
        }
        if self.hashes.len() != self.actions.len() {
            return Err(PlannerError::Replay("hash count differs from action count".into()));
        }
        let plan = Plan::from_actions(origin.clone(), self.agent, &self.actions)?;
        for (i, (step, h)) in plan.steps.iter().zip(&self.hashes).enumerate() {
            if &step.state.state_hash() != h {
                return Err(PlannerError::Replay(format!("step {i}: hash mismatch")));
            }
        }
        Ok(plan)
    }
}
