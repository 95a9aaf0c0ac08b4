//! The NOPA helper: particle-filter goal inference with inverse-planning
//! rejection, and subgoal selection by an uncertainty-aware value.
//!
//! A particle pairs a proposed goal with the main agent's predicted plan for
//! the next `t_prop` steps. Particles survive while every observed main
//! action occurs in the unexecuted part of their plan. Candidate subgoals are
//! placements and handovers that appear in particle goals or predicted
//! trajectories, plus putting back objects the helper has moved.

mod particles;
mod subgoal;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::episode::{HelperController, HelperDecision, HelperInfo, Observation, ParticleSummary};
use crate::goals::{marginal_mode, GoalSpec, PredicateVocabulary};
use crate::gpn::GpnParams;
use crate::planner::MctsConfig;
use crate::worldsim::{Action, EntityId};

pub use particles::{
    is_consistent, update_particles, InferenceContext, Particle, ParticleSet, Proposer, ResampleReason, UpdateEvent,
};
pub use subgoal::{helping_value, select_subgoal, subgoal_value, Selection, SubgoalCandidate, SubgoalKey, Weights};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NopaConfig {
    /// Proposals drawn per resample.
    pub k: usize,
    pub t_max: u32,
    /// Prediction horizon of particle plans and the forced-resample period.
    pub t_prop: usize,
    pub weights: Weights,
    /// Main-agent step estimate for subgoals seen only in proposed goals.
    pub l_max: u32,
    pub mcts: MctsConfig,
    /// The helper acts only when the best value exceeds this.
    pub idle_threshold: f64,
    /// Reject particles inconsistent with observed actions.
    pub inverse_planning: bool,
}

impl Default for NopaConfig {
    fn default() -> Self {
        NopaConfig {
            k: 20,
            t_max: 250,
            t_prop: 15,
            weights: Weights { w_r: 1.0, w_c: 1.0, w_m: 5.0 },
            l_max: 100,
            mcts: MctsConfig::default(),
            idle_threshold: 0.0,
            inverse_planning: true,
        }
    }
}

impl NopaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 || self.t_prop == 0 || self.t_max == 0 || self.l_max == 0 {
            return Err("k, t_prop, t_max and l_max must be >= 1".into());
        }
        let w = &self.weights;
        if [w.w_r, w.w_c, w.w_m].iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err("weights must be finite and >= 0".into());
        }
        self.mcts.validate().map_err(|e| e.to_string())
    }
}

/// splitmix64 finalizer, used to derive independent seeds.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn seed_of(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6e6f_7061, |acc, &p| mix(acc ^ p))
}

/// NOPA as a helper controller.
pub struct NopaHelper {
    cfg: NopaConfig,
    proposer: Proposer,
    vocab: Arc<PredicateVocabulary>,
    seed: u64,
    particles: Option<ParticleSet>,
    /// Objects the helper has held at some point.
    touched: BTreeSet<EntityId>,
}

impl NopaHelper {
    pub fn new(cfg: NopaConfig, proposer: Proposer, vocab: Arc<PredicateVocabulary>, seed: u64) -> Self {
        NopaHelper { cfg, proposer, vocab, seed, particles: None, touched: BTreeSet::new() }
    }

    /// GPN-guided helper for the given apartment vocabulary.
    pub fn with_gpn(cfg: NopaConfig, gpn: Arc<GpnParams>, vocab: Arc<PredicateVocabulary>, seed: u64) -> Self {
        Self::new(cfg, Proposer::Gpn(gpn), vocab, seed)
    }

    pub fn particles(&self) -> Option<&ParticleSet> {
        self.particles.as_ref()
    }

    pub fn config(&self) -> &NopaConfig {
        &self.cfg
    }

    /// One inference update followed by subgoal selection.
    pub fn decide(&mut self, obs: &Observation<'_>) -> (HelperDecision, UpdateEvent, Selection) {
        let helper = obs.state.helper_agent();
        for o in obs.state.held_by(helper) {
            self.touched.insert(o);
        }
        let ctx = InferenceContext {
            t: obs.t,
            s0: obs.s0,
            state: obs.state,
            proposer: &self.proposer,
            vocab: &self.vocab,
            cfg: &self.cfg,
            seed: self.seed,
        };
        let (set, event) = update_particles(self.particles.take(), obs.last_main_action.as_ref(), &ctx);
        let selection = select_subgoal(&set, obs.s0, obs.state, &self.touched, &self.cfg, seed_of(&[self.seed, obs.t as u64]));
        let info = HelperInfo {
            particles: set
                .particles
                .iter()
                .map(|p| ParticleSummary { goal: p.goal.clone(), plan_hash: p.plan.hash() })
                .collect(),
            resampled: matches!(event, UpdateEvent::Resampled(_)),
            chosen_subgoal: selection.chosen.as_ref().map(|c| c.key.to_string()),
            value: selection.chosen.as_ref().map(|c| c.value),
            candidates: selection.log.clone(),
        };
        let action = selection.chosen.as_ref().map_or(Action::Idle, |c| c.plan.first_action());
        self.particles = Some(set);
        (HelperDecision { action, info }, event, selection)
    }
}

impl HelperController for NopaHelper {
    fn act(&mut self, obs: &Observation<'_>) -> HelperDecision {
        self.decide(obs).0
    }

    fn belief(&self) -> Option<GoalSpec> {
        let set = self.particles.as_ref()?;
        Some(marginal_mode(set.particles.iter().map(|p| &p.goal)))
    }
}
