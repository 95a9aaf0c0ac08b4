//! Particle set maintenance.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{seed_of, NopaConfig};
use crate::goals::{GoalSpec, PredicateVocabulary};
use crate::gpn::{encode_delta, sample_goal, GpnParams};
use crate::planner::{mcts_plan, Plan, PlanStep};
use crate::worldsim::{Action, SceneGraph};

/// Where goal proposals come from.
#[derive(Clone, Debug)]
pub enum Proposer {
    Gpn(Arc<GpnParams>),
    /// Uniform over a fixed goal set (the task-grammar support).
    Uniform(Arc<Vec<GoalSpec>>),
}

impl Proposer {
    pub fn propose(
        &self,
        s0: &SceneGraph,
        state: &SceneGraph,
        vocab: &PredicateVocabulary,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<GoalSpec> {
        match self {
            Proposer::Gpn(params) => {
                let heads = encode_delta(s0, state, vocab).and_then(|d| params.forward(&d));
                match heads {
                    Ok(h) => (0..k).filter_map(|_| sample_goal(&h, vocab, state, rng).ok()).collect(),
                    Err(e) => {
                        log::warn!("goal proposal failed: {e}");
                        Vec::new()
                    }
                }
            }
            Proposer::Uniform(goals) => (0..k).filter_map(|_| goals.choose(rng).cloned()).collect(),
        }
    }
}

/// A goal hypothesis with the main agent's predicted plan. `cursor` counts
/// the plan steps already matched by observed actions.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub goal: GoalSpec,
    pub plan: Plan,
    pub cursor: usize,
}

impl Particle {
    /// Predicted steps not yet matched.
    pub fn remaining(&self) -> &[PlanStep] {
        &self.plan.steps()[self.cursor.min(self.plan.len())..]
    }

    /// Position of `action` in the remaining plan.
    fn find(&self, action: &Action) -> Option<usize> {
        self.remaining().iter().position(|s| s.action == *action).map(|i| self.cursor + i)
    }
}

/// Membership rule: Idle is always consistent; any other action must occur
/// (same variant and arguments) somewhere in the remaining plan.
pub fn is_consistent(particle: &Particle, action: &Action) -> bool {
    action.is_idle() || particle.find(action).is_some()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Updates since the last resample.
    pub l: usize,
    /// Tick of the last resample.
    pub created: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleReason {
    ColdStart,
    AllRejected,
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateEvent {
    Resampled(ResampleReason),
    Filtered { kept: usize, rejected: usize },
}

/// Inputs of one inference update.
pub struct InferenceContext<'a> {
    pub t: u32,
    pub s0: &'a SceneGraph,
    pub state: &'a SceneGraph,
    pub proposer: &'a Proposer,
    pub vocab: &'a PredicateVocabulary,
    pub cfg: &'a NopaConfig,
    pub seed: u64,
}

fn resample(ctx: &InferenceContext<'_>) -> Vec<Particle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[ctx.seed, ctx.t as u64, 0x70726f70]));
    let goals = ctx.proposer.propose(ctx.s0, ctx.state, ctx.vocab, ctx.cfg.k, &mut rng);
    goals
        .into_iter()
        .enumerate()
        .map(|(k, goal)| {
            let cfg = ctx.cfg.mcts.with_seed(seed_of(&[ctx.seed, ctx.t as u64, k as u64]));
            let plan = mcts_plan(ctx.state, &goal, ctx.cfg.t_prop, &cfg)
                .unwrap_or_else(|_| Plan::new(ctx.state.clone(), ctx.state.main_agent()));
            Particle { goal, plan, cursor: 0 }
        })
        .collect()
}

/// One inference step. With no particles, or when all are rejected, or once
/// `t_prop` updates have passed since the last resample, `k` new particles
/// are proposed from the current state and `l` resets to 0. Otherwise the
/// particles consistent with `observed` are kept and `l` increments.
pub fn update_particles(
    q: Option<ParticleSet>,
    observed: Option<&Action>,
    ctx: &InferenceContext<'_>,
) -> (ParticleSet, UpdateEvent) {
    let fresh = |reason| {
        let set = ParticleSet { particles: resample(ctx), l: 0, created: ctx.t };
        (set, UpdateEvent::Resampled(reason))
    };
    let Some(mut q) = q.filter(|q| !q.particles.is_empty()) else {
        return fresh(ResampleReason::ColdStart);
    };
    if q.l >= ctx.cfg.t_prop {
        return fresh(ResampleReason::Horizon);
    }
    let before = q.particles.len();
    if let Some(a) = observed.filter(|a| !a.is_idle()) {
        let mut kept = Vec::with_capacity(before);
        for mut p in q.particles {
            match p.find(a) {
                Some(i) => {
                    p.cursor = i + 1;
                    kept.push(p);
                }
                None if !ctx.cfg.inverse_planning => kept.push(p),
                None => {}
            }
        }
        q.particles = kept;
    }
    if q.particles.is_empty() {
        return fresh(ResampleReason::AllRejected);
    }
    q.l += 1;
    let kept = q.particles.len();
    (q, UpdateEvent::Filtered { kept, rejected: before - kept })
}
