//! Joint episodes: controller interfaces, the stepwise episode driver and
//! replayable JSON-lines records.
//!
//! Each tick the helper decides first, seeing only the initial state, the
//! current state and the main agent's previous action. The main agent then
//! chooses, and both actions go through one simultaneous step.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::goals::{goal_f1, is_satisfied, GoalSpec};
use crate::planner::hp_plan;
use crate::worldsim::{is_legal, legal_actions, step, Action, Outcome, SceneDoc, SceneGraph};

pub const T_MAX: u32 = 250;
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EpisodeError {
    #[error("illegal main action {action}")]
    IllegalAction { action: Action, legal: Vec<Action> },
    #[error("episode already finished")]
    Finished,
    #[error("main controller failed: {0}")]
    MainController(String),
    #[error("malformed record: {0}")]
    Record(String),
    #[error("replay diverged at tick {tick}: expected {expected}, got {got}")]
    Replay { tick: u32, expected: String, got: String },
}

/// Everything a helper may condition on at tick `t`.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub t: u32,
    pub s0: &'a SceneGraph,
    pub state: &'a SceneGraph,
    /// The main agent's action executed at tick `t - 1`.
    pub last_main_action: Option<Action>,
}

/// Goal hypothesis as logged: the goal and the hash of its predicted plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSummary {
    pub goal: GoalSpec,
    pub plan_hash: String,
}

/// One scored helping subgoal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLog {
    pub key: String,
    pub support: usize,
    pub particles: usize,
    pub l_m: u32,
    pub l_h: u32,
    pub diff_delta: i64,
    pub value: f64,
}

/// Diagnostics a helper reports alongside its action.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HelperInfo {
    pub particles: Vec<ParticleSummary>,
    pub resampled: bool,
    pub chosen_subgoal: Option<String>,
    pub value: Option<f64>,
    pub candidates: Vec<CandidateLog>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HelperDecision {
    pub action: Action,
    pub info: HelperInfo,
}

impl HelperDecision {
    pub fn idle() -> Self {
        Self::act(Action::Idle)
    }

    pub fn act(action: Action) -> Self {
        HelperDecision { action, info: HelperInfo::default() }
    }
}

pub trait HelperController: Send {
    fn act(&mut self, obs: &Observation<'_>) -> HelperDecision;

    /// Current point estimate of the main agent's goal, if the helper has one.
    fn belief(&self) -> Option<GoalSpec> {
        None
    }
}

/// Helper that never acts.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoopHelper;

impl HelperController for NoopHelper {
    fn act(&mut self, _: &Observation<'_>) -> HelperDecision {
        HelperDecision::idle()
    }
}

pub trait MainController: Send {
    fn act(&mut self, state: &SceneGraph, goal: &GoalSpec) -> Result<Action, EpisodeError>;
}

/// Replans with the hierarchical planner every tick and idles when the goal
/// is currently unreachable (for instance while the helper holds the last
/// needed object).
#[derive(Clone, Copy, Debug, Default)]
pub struct PlannerMain;

impl MainController for PlannerMain {
    fn act(&mut self, state: &SceneGraph, goal: &GoalSpec) -> Result<Action, EpisodeError> {
        Ok(hp_plan(state, goal).map(|p| p.first_action()).unwrap_or(Action::Idle))
    }
}

/// Uniformly random legal actions.
#[derive(Clone, Debug)]
pub struct RandomMain {
    rng: ChaCha8Rng,
}

impl RandomMain {
    pub fn new(seed: u64) -> Self {
        RandomMain { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl MainController for RandomMain {
    fn act(&mut self, state: &SceneGraph, _: &GoalSpec) -> Result<Action, EpisodeError> {
        let actions = legal_actions(state, state.main_agent());
        Ok(actions.choose(&mut self.rng).copied().unwrap_or(Action::Idle))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub version: u32,
    pub episode: String,
    pub template: u32,
    pub seed: u64,
    pub goal: GoalSpec,
    pub helper: String,
    pub t_max: u32,
    pub initial_hash: String,
    pub initial_state: SceneDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: u32,
    /// Hash of the state after this tick.
    pub s_hash: String,
    pub a_m: Action,
    pub a_h: Action,
    pub outcomes: [Outcome; 2],
    pub particles: Vec<ParticleSummary>,
    pub chosen_subgoal: Option<String>,
    #[serde(rename = "V")]
    pub value: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub satisfied: bool,
    pub length: u32,
    /// Time limit reached before the goal was satisfied.
    pub incomplete: bool,
    pub aborted: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub header: EpisodeHeader,
    pub ticks: Vec<TickRecord>,
    pub outcome: Option<EpisodeOutcome>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Line {
    Header(EpisodeHeader),
    Tick(TickRecord),
    Outcome(EpisodeOutcome),
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    /// Header line, one line per tick, then the outcome line if finished.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |l: &Line| {
            out.push_str(&serde_json::to_string(l).expect("records serialize"));
            out.push('\n');
        };
        push(&Line::Header(self.header.clone()));
        for t in &self.ticks {
            push(&Line::Tick(t.clone()));
        }
        if let Some(o) = &self.outcome {
            push(&Line::Outcome(o.clone()));
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Self, EpisodeError> {
        let bad = |m: String| EpisodeError::Record(m);
        let mut lines = s.lines().filter(|l| !l.trim().is_empty()).enumerate();
        let header = match lines.next() {
            Some((_, l)) => match serde_json::from_str(l).map_err(|e| bad(format!("line 1: {e}")))? {
                Line::Header(h) => h,
                _ => return Err(bad("first line must be the header".into())),
            },
            None => return Err(bad("empty record".into())),
        };
        let mut ticks = Vec::new();
        let mut outcome = None;
        for (i, l) in lines {
            if outcome.is_some() {
                return Err(bad(format!("line {}: data after outcome", i + 1)));
            }
            match serde_json::from_str(l).map_err(|e| bad(format!("line {}: {e}", i + 1)))? {
                Line::Header(_) => return Err(bad(format!("line {}: repeated header", i + 1))),
                Line::Tick(t) => {
                    if t.t as usize != ticks.len() {
                        return Err(bad(format!("line {}: tick {} out of order", i + 1, t.t)));
                    }
                    ticks.push(t)
                }
                Line::Outcome(o) => outcome = Some(o),
            }
        }
        Ok(EpisodeRecord { header, ticks, outcome })
    }

    /// Re-executes the logged actions from the initial state, checking every
    /// state hash and outcome. Returns the final state.
    pub fn replay(&self) -> Result<SceneGraph, EpisodeError> {
        let mut state = SceneGraph::from_doc(&self.header.initial_state).map_err(|e| EpisodeError::Record(e.to_string()))?;
        let diverged = |tick: u32, expected: &str, got: String| EpisodeError::Replay { tick, expected: expected.into(), got };
        if state.state_hash() != self.header.initial_hash {
            return Err(diverged(0, &self.header.initial_hash, state.state_hash()));
        }
        for t in &self.ticks {
            let (next, outcomes) = step(&state, &t.a_m, &t.a_h);
            if outcomes != t.outcomes {
                return Err(diverged(t.t, &format!("{:?}", t.outcomes), format!("{outcomes:?}")));
            }
            if next.state_hash() != t.s_hash {
                return Err(diverged(t.t, &t.s_hash, next.state_hash()));
            }
            state = next;
        }
        Ok(state)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    AwaitingMain,
    Done,
}

impl fmt::Display for EpisodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpisodeStatus::AwaitingMain => "awaiting_main",
            EpisodeStatus::Done => "done",
        })
    }
}

/// Identity of an episode, recorded in its header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub episode: String,
    pub template: u32,
    pub seed: u64,
    pub goal: GoalSpec,
    pub s0: SceneGraph,
}

/// Result of one tick.
#[derive(Clone, Debug)]
pub struct TickResult {
    pub record: TickRecord,
    pub info: HelperInfo,
}

/// Stepwise joint episode. The main agent's action is supplied by the
/// caller, so the same driver serves planner-controlled and human runs.
pub struct Episode {
    s0: SceneGraph,
    state: SceneGraph,
    goal: GoalSpec,
    helper: Box<dyn HelperController>,
    last_main: Option<Action>,
    record: EpisodeRecord,
}

impl Episode {
    pub fn new(spec: EpisodeSpec, helper_name: &str, helper: Box<dyn HelperController>, t_max: u32) -> Self {
        let header = EpisodeHeader {
            version: RECORD_VERSION,
            episode: spec.episode,
            template: spec.template,
            seed: spec.seed,
            goal: spec.goal.clone(),
            helper: helper_name.to_string(),
            t_max,
            initial_hash: spec.s0.state_hash(),
            initial_state: spec.s0.to_doc(),
        };
        let mut ep = Episode {
            state: spec.s0.clone(),
            s0: spec.s0,
            goal: spec.goal,
            helper,
            last_main: None,
            record: EpisodeRecord { header, ticks: Vec::new(), outcome: None },
        };
        ep.finish_if_over();
        ep
    }

    pub fn s0(&self) -> &SceneGraph {
        &self.s0
    }

    pub fn state(&self) -> &SceneGraph {
        &self.state
    }

    pub fn goal(&self) -> &GoalSpec {
        &self.goal
    }

    pub fn tick(&self) -> u32 {
        self.record.ticks.len() as u32
    }

    pub fn record(&self) -> &EpisodeRecord {
        &self.record
    }

    pub fn into_record(self) -> EpisodeRecord {
        self.record
    }

    pub fn status(&self) -> EpisodeStatus {
        if self.record.outcome.is_some() {
            EpisodeStatus::Done
        } else {
            EpisodeStatus::AwaitingMain
        }
    }

    pub fn helper_belief(&self) -> Option<GoalSpec> {
        self.helper.belief()
    }

    /// Legal actions of the main agent in the current state (Idle included).
    pub fn legal_main_actions(&self) -> Vec<Action> {
        legal_actions(&self.state, self.state.main_agent())
    }

    /// Runs one tick with the given main action.
    pub fn step(&mut self, main_action: Action) -> Result<TickResult, EpisodeError> {
        if self.status() == EpisodeStatus::Done {
            return Err(EpisodeError::Finished);
        }
        let main = self.state.main_agent();
        if !main_action.is_idle() && !is_legal(&self.state, main, &main_action) {
            return Err(EpisodeError::IllegalAction { action: main_action, legal: self.legal_main_actions() });
        }
        let t = self.tick();
        let decision = self.helper.act(&Observation {
            t,
            s0: &self.s0,
            state: &self.state,
            last_main_action: self.last_main,
        });
        let (next, outcomes) = step(&self.state, &main_action, &decision.action);
        self.state = next;
        self.last_main = Some(main_action);
        let f1 = self.helper.belief().map(|b| goal_f1(&b, &self.goal));
        let record = TickRecord {
            t,
            s_hash: self.state.state_hash(),
            a_m: main_action,
            a_h: decision.action,
            outcomes,
            particles: decision.info.particles.clone(),
            chosen_subgoal: decision.info.chosen_subgoal.clone(),
            value: decision.info.value,
            f1,
        };
        self.record.ticks.push(record.clone());
        self.finish_if_over();
        Ok(TickResult { record, info: decision.info })
    }

    fn finish_if_over(&mut self) {
        let satisfied = is_satisfied(&self.state, &self.goal);
        let length = self.tick();
        if satisfied || length >= self.record.header.t_max {
            self.record.outcome = Some(EpisodeOutcome { satisfied, length, incomplete: !satisfied, aborted: None });
        }
    }

    /// Ends the episode early with a diagnostic.
    pub fn abort(&mut self, reason: String) {
        let satisfied = is_satisfied(&self.state, &self.goal);
        self.record.outcome =
            Some(EpisodeOutcome { satisfied, length: self.tick(), incomplete: !satisfied, aborted: Some(reason) });
    }
}

/// Runs an episode to completion with a main controller.
pub fn run_episode(mut ep: Episode, main: &mut dyn MainController) -> EpisodeRecord {
    run_episode_with(&mut ep, main, |_| {});
    ep.into_record()
}

/// Like [`run_episode`], calling `on_tick` after every tick.
pub fn run_episode_with(ep: &mut Episode, main: &mut dyn MainController, mut on_tick: impl FnMut(&TickResult)) {
    while ep.status() == EpisodeStatus::AwaitingMain {
        let action = match main.act(ep.state(), ep.goal()) {
            Ok(a) => a,
            Err(e) => {
                ep.abort(e.to_string());
                return;
            }
        };
        match ep.step(action) {
            Ok(r) => on_tick(&r),
            Err(e) => {
                ep.abort(format!("main controller: {e}"));
                return;
            }
        }
    }
}
