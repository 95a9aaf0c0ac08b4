//! Comparison helpers and NOPA ablations behind one constructor.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::episode::{
    HelperController, HelperDecision, HelperInfo, NoopHelper, Observation, ParticleSummary,
};
use crate::goals::{count_satisfied, marginal_mode, GoalSpec, PredicateVocabulary};
use crate::gpn::{argmax_goal, encode_delta, GpnParams};
use crate::nopa::{
    seed_of, update_particles, InferenceContext, NopaConfig, NopaHelper, ParticleSet, Proposer, SubgoalKey,
};
use crate::planner::{current_trip_grabs, held_of_class, hp_plan, hp_plan_for, mcts_plan_for, Requirement, Task, UNBOUNDED};
use crate::worldsim::{Action, SceneGraph};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("unknown helper spec: {0}")]
    UnknownSpec(String),
    #[error("ablation flags are only valid with the nopa helper")]
    AblationWithoutNopa,
    #[error("helper {0} needs a trained goal proposal network")]
    MissingGpn(String),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelperKind {
    None,
    Nopa,
    HpGt,
    HpGpn,
    AfGpn,
    Empowerment,
    HpRg,
}

impl HelperKind {
    pub const ALL: [HelperKind; 7] = [
        HelperKind::None,
        HelperKind::Nopa,
        HelperKind::HpGt,
        HelperKind::HpGpn,
        HelperKind::AfGpn,
        HelperKind::Empowerment,
        HelperKind::HpRg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HelperKind::None => "none",
            HelperKind::Nopa => "nopa",
            HelperKind::HpGt => "hp_gt",
            HelperKind::HpGpn => "hp_gpn",
            HelperKind::AfGpn => "af_gpn",
            HelperKind::Empowerment => "empowerment",
            HelperKind::HpRg => "hp_rg",
        }
    }

    fn uses_gpn(self) -> bool {
        matches!(self, HelperKind::Nopa | HelperKind::HpGpn | HelperKind::AfGpn)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Ablations {
    /// Uniform grammar proposals instead of the network.
    pub random_proposals: bool,
    /// Never reject particles.
    pub no_inverse_planning: bool,
    /// No penalty on state changes (`w_m = 0`).
    pub no_return: bool,
}

impl Ablations {
    fn any(&self) -> bool {
        self.random_proposals || self.no_inverse_planning || self.no_return
    }
}

/// Which trained network a GPN-based helper loads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpnTag {
    #[default]
    Large,
    Small,
}

/// Parsed form of `<kind>[,flag...]`, e.g. `nopa,no_return,gpn=small`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HelperSpec {
    pub kind: HelperKind,
    pub ablations: Ablations,
    pub gpn: GpnTag,
}

impl HelperSpec {
    pub fn new(kind: HelperKind) -> Self {
        HelperSpec { kind, ablations: Ablations::default(), gpn: GpnTag::Large }
    }

    pub fn with_ablations(kind: HelperKind, ablations: Ablations) -> Result<Self, BaselineError> {
        let spec = HelperSpec { kind, ablations, gpn: GpnTag::Large };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.ablations.any() && self.kind != HelperKind::Nopa {
            return Err(BaselineError::AblationWithoutNopa);
        }
        Ok(())
    }

    /// Whether building this helper requires a trained network.
    pub fn needs_gpn(&self) -> bool {
        self.kind.uses_gpn() && !(self.kind == HelperKind::Nopa && self.ablations.random_proposals)
    }
}

impl fmt::Display for HelperSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        let a = &self.ablations;
        for (on, name) in
            [(a.random_proposals, "random_proposals"), (a.no_inverse_planning, "no_inverse_planning"), (a.no_return, "no_return")]
        {
            if on {
                write!(f, ",{name}")?;
            }
        }
        if self.gpn == GpnTag::Small {
            f.write_str(",gpn=small")?;
        }
        Ok(())
    }
}

impl FromStr for HelperSpec {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(',').map(str::trim);
        let kind_name = parts.next().unwrap_or_default();
        let kind = HelperKind::ALL
            .into_iter()
            .find(|k| k.name() == kind_name)
            .ok_or_else(|| BaselineError::UnknownSpec(s.to_string()))?;
        let mut spec = HelperSpec::new(kind);
        for flag in parts {
            match flag {
                "random_proposals" => spec.ablations.random_proposals = true,
                "no_inverse_planning" => spec.ablations.no_inverse_planning = true,
                "no_return" => spec.ablations.no_return = true,
                "gpn=large" => spec.gpn = GpnTag::Large,
                "gpn=small" => spec.gpn = GpnTag::Small,
                _ => return Err(BaselineError::UnknownSpec(s.to_string())),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Shared, read-only inputs for building helpers.
#[derive(Clone, Debug, Default)]
pub struct HelperResources {
    pub gpn_large: Option<Arc<GpnParams>>,
    pub gpn_small: Option<Arc<GpnParams>>,
    pub nopa: NopaConfig,
}

impl HelperResources {
    fn gpn(&self, spec: &HelperSpec) -> Result<Arc<GpnParams>, BaselineError> {
        let g = match spec.gpn {
            GpnTag::Large => &self.gpn_large,
            GpnTag::Small => &self.gpn_small,
        };
        g.clone().ok_or_else(|| BaselineError::MissingGpn(spec.to_string()))
    }
}

/// Builds a helper for one episode. Only the oracle receives `goal`.
pub fn build_helper(
    spec: &HelperSpec,
    s0: &SceneGraph,
    goal: &GoalSpec,
    seed: u64,
    res: &HelperResources,
) -> Result<Box<dyn HelperController>, BaselineError> {
    spec.validate()?;
    res.nopa.validate().map_err(BaselineError::Config)?;
    let vocab = Arc::new(PredicateVocabulary::for_scene(s0));
    let support = || Arc::new(crate::goals::grammar_support(s0).unwrap_or_default());
    Ok(match spec.kind {
        HelperKind::None => Box::new(NoopHelper),
        HelperKind::HpGt => Box::new(HpGoalHelper::new(goal.clone())),
        HelperKind::HpRg => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[seed, 0x7267]));
            match support().choose(&mut rng) {
                Some(g) => Box::new(HpGoalHelper::new(g.clone())),
                None => Box::new(NoopHelper),
            }
        }
        HelperKind::HpGpn => Box::new(HpGpnHelper { gpn: res.gpn(spec)?, vocab, belief: None }),
        HelperKind::AfGpn => Box::new(AfGpnHelper {
            cfg: res.nopa.clone(),
            proposer: Proposer::Gpn(res.gpn(spec)?),
            vocab,
            seed,
            particles: None,
        }),
        HelperKind::Empowerment => Box::new(EmpowermentHelper { support: support(), k: res.nopa.k, cfg: res.nopa.clone(), seed }),
        HelperKind::Nopa => {
            let mut cfg = res.nopa.clone();
            let a = spec.ablations;
            cfg.inverse_planning = !a.no_inverse_planning;
            if a.no_return {
                cfg.weights.w_m = 0.0;
            }
            let proposer = if a.random_proposals { Proposer::Uniform(support()) } else { Proposer::Gpn(res.gpn(spec)?) };
            Box::new(NopaHelper::new(cfg, proposer, vocab, seed))
        }
    })
}

/// Helper's hierarchical-planner action toward `goal`. Units the main agent
/// carries, or would grab on its current trip if `goal` were its goal, are
/// left to it.
fn hp_action(state: &SceneGraph, goal: &GoalSpec) -> Action {
    if goal.is_empty() {
        return Action::Idle;
    }
    let task = Task::goal(state.helper_agent(), goal).committing_other().claiming(current_trip_grabs(state, goal));
    hp_plan_for(state, &task).map(|p| p.first_action()).unwrap_or(Action::Idle)
}

/// HP toward a fixed goal: the true goal (oracle) or an episode-fixed
/// random goal.
pub struct HpGoalHelper {
    goal: GoalSpec,
}

impl HpGoalHelper {
    pub fn new(goal: GoalSpec) -> Self {
        HpGoalHelper { goal }
    }
}

impl HelperController for HpGoalHelper {
    fn act(&mut self, obs: &Observation<'_>) -> HelperDecision {
        HelperDecision::act(hp_action(obs.state, &self.goal))
    }

    fn belief(&self) -> Option<GoalSpec> {
        Some(self.goal.clone())
    }
}

/// HP toward the network's per-predicate argmax, recomputed every tick.
pub struct HpGpnHelper {
    gpn: Arc<GpnParams>,
    vocab: Arc<PredicateVocabulary>,
    belief: Option<GoalSpec>,
}

impl HelperController for HpGpnHelper {
    fn act(&mut self, obs: &Observation<'_>) -> HelperDecision {
        let goal = match encode_delta(obs.s0, obs.state, &self.vocab).and_then(|d| self.gpn.forward(&d)) {
            Ok(heads) => argmax_goal(&heads, &self.vocab, obs.state),
            Err(e) => {
                log::warn!("hp_gpn: {e}");
                GoalSpec::default()
            }
        };
        let action = hp_action(obs.state, &goal);
        self.belief = Some(goal);
        HelperDecision::act(action)
    }

    fn belief(&self) -> Option<GoalSpec> {
        self.belief.clone()
    }
}

/// Most frequent action; ties go to the smallest in action order.
pub fn modal_action(actions: impl IntoIterator<Item = Action>) -> Option<Action> {
    let mut tally: BTreeMap<Action, usize> = BTreeMap::new();
    for a in actions {
        *tally.entry(a).or_default() += 1;
    }
    let mut best: Option<(Action, usize)> = None;
    for (a, n) in tally {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((a, n));
        }
    }
    best.map(|(a, _)| a)
}

/// NOPA's goal inference, acting on the modal first action of the helper's
/// HP plans toward each particle goal.
pub struct AfGpnHelper {
    cfg: NopaConfig,
    proposer: Proposer,
    vocab: Arc<PredicateVocabulary>,
    seed: u64,
    particles: Option<ParticleSet>,
}

impl HelperController for AfGpnHelper {
    fn act(&mut self, obs: &Observation<'_>) -> HelperDecision {
        let ctx = InferenceContext {
            t: obs.t,
            s0: obs.s0,
            state: obs.state,
            proposer: &self.proposer,
            vocab: &self.vocab,
            cfg: &self.cfg,
            seed: self.seed,
        };
        let (set, _) = update_particles(self.particles.take(), obs.last_main_action.as_ref(), &ctx);
        let firsts = set
            .particles
            .iter()
            .map(|p| hp_action(obs.state, &p.goal))
            .filter(|a| !a.is_idle());
        let action = modal_action(firsts).unwrap_or(Action::Idle);
        let info = HelperInfo {
            particles: set
                .particles
                .iter()
                .map(|p| ParticleSummary { goal: p.goal.clone(), plan_hash: p.plan.hash() })
                .collect(),
            ..HelperInfo::default()
        };
        self.particles = Some(set);
        HelperDecision { action, info }
    }

    fn belief(&self) -> Option<GoalSpec> {
        let set = self.particles.as_ref()?;
        Some(marginal_mode(set.particles.iter().map(|p| &p.goal)))
    }
}

/// Subgoal keys reached along a predicted main-agent plan for `goal`.
pub fn trajectory_subgoals(state: &SceneGraph, goal: &GoalSpec) -> Vec<(SubgoalKey, Requirement)> {
    let Ok(plan) = hp_plan(state, goal) else { return Vec::new() };
    let main = state.main_agent();
    let mut out = Vec::new();
    for pred in goal.predicates() {
        let now = count_satisfied(state, pred);
        if plan.steps().iter().any(|s| count_satisfied(&s.state, pred) > now) {
            let base = now + held_of_class(state, main, pred.class);
            out.push((
                SubgoalKey::Place { pred: *pred, level: base + 1 },
                Requirement::Place { pred: *pred, count: base + 1 },
            ));
        }
    }
    let mut classes: Vec<_> =
        plan.steps().iter().flat_map(|s| s.state.held_by(main).map(|o| s.state.class_of(o))).collect();
    classes.sort();
    classes.dedup();
    for class in classes {
        let now = held_of_class(state, main, class);
        out.push((
            SubgoalKey::MainHolds { class, level: now + 1 },
            Requirement::Holds { holder: main, class, count: now + 1 },
        ));
    }
    out
}

/// Goal-agnostic helper: the most common subgoal across plans for `k`
/// uniformly drawn goals.
pub struct EmpowermentHelper {
    support: Arc<Vec<GoalSpec>>,
    k: usize,
    cfg: NopaConfig,
    seed: u64,
}

impl HelperController for EmpowermentHelper {
    fn act(&mut self, obs: &Observation<'_>) -> HelperDecision {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[self.seed, obs.t as u64, 0x656d70]));
        let mut tally: BTreeMap<SubgoalKey, (usize, Requirement)> = BTreeMap::new();
        for _ in 0..self.k {
            let Some(goal) = self.support.choose(&mut rng) else { break };
            for (key, req) in trajectory_subgoals(obs.state, goal) {
                tally.entry(key).or_insert((0, req)).0 += 1;
            }
        }
        let mut best: Option<(SubgoalKey, usize, Requirement)> = None;
        for (key, (n, req)) in tally {
            if best.is_none_or(|(_, b, _)| n > b) {
                best = Some((key, n, req));
            }
        }
        let Some((key, _, req)) = best else { return HelperDecision::idle() };
        let mut task = Task::new(obs.state.helper_agent(), vec![req]);
        task.commit_other = matches!(req, Requirement::Place { .. });
        let cfg = self.cfg.mcts.with_seed(seed_of(&[self.seed, obs.t as u64]));
        let action = mcts_plan_for(obs.state, &task, UNBOUNDED, &cfg).map(|p| p.first_action()).unwrap_or(Action::Idle);
        HelperDecision {
            action,
            info: HelperInfo { chosen_subgoal: Some(key.to_string()), ..HelperInfo::default() },
        }
    }
}

#[cfg(test)]
mod tests;
