//! Benchmark harness: episode datasets, solo baselines, evaluation runs and
//! their metrics.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{build_helper, BaselineError, HelperResources, HelperSpec};
use crate::episode::{run_episode_with, Episode, EpisodeRecord, EpisodeSpec, PlannerMain, T_MAX};
use crate::goals::{is_satisfied, sample_task, GoalSpec, PredicateVocabulary};
use crate::gpn::{GpnError, GpnExample};
use crate::nopa::seed_of;
use crate::planner::hp_plan;
use crate::worldsim::{
    generate_apartment, state_diff_where, step_single, Action, ApartmentTemplate, ClassName, SceneDoc, SceneGraph,
    TEST_TEMPLATES, TRAIN_TEMPLATES,
};

/// Points on the normalized time axis of F1 curves.
pub const F1_BINS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid episode length: L_H must be >= 1")]
    InvalidLength,
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Helper(#[from] BaselineError),
    #[error(transparent)]
    Gpn(#[from] GpnError),
    #[error("vocabulary mismatch: network has {expected} rows, apartment has {got}")]
    Vocabulary { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    TrainLarge,
    TrainSmall,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::TrainLarge, Split::TrainSmall, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::TrainLarge => "train_large",
            Split::TrainSmall => "train_small",
            Split::Test => "test",
        }
    }

    pub fn templates(self) -> &'static [u32] {
        match self {
            Split::Test => &TEST_TEMPLATES,
            _ => &TRAIN_TEMPLATES,
        }
    }

    /// Desk-scale episode count.
    pub fn default_size(self) -> usize {
        match self {
            Split::TrainLarge => 600,
            Split::TrainSmall => 30,
            Split::Test => 20,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| BenchError::Dataset(format!("unknown split {s}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub template: u32,
    pub seed: u64,
}

/// Which apartments and seeds make up a split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: Split,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// `count` entries with templates drawn from the split's template set.
    pub fn new(split: Split, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[seed, split as u64]));
        let entries = (0..count)
            .map(|i| ManifestEntry {
                id: format!("{}-{i:04}", split.name()),
                template: *split.templates().choose(&mut rng).expect("non-empty template set"),
                seed: seed_of(&[seed, split as u64, i as u64]),
            })
            .collect();
        DatasetManifest { split, seed, entries }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        for e in &self.entries {
            if !self.split.templates().contains(&e.template) {
                return Err(BenchError::Dataset(format!(
                    "{}: template {} is not in the {} template set",
                    e.id, e.template, self.split
                )));
            }
        }
        Ok(())
    }
}

/// A solo main-agent episode: apartment, goal, and the planner's actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeData {
    pub entry: ManifestEntry,
    pub goal: GoalSpec,
    pub s0: SceneDoc,
    pub actions: Vec<Action>,
    /// Solo length; `T_MAX` when the planner did not finish.
    pub l_m: u32,
    pub incomplete: bool,
}

impl EpisodeData {
    pub fn initial_state(&self) -> Result<SceneGraph, BenchError> {
        SceneGraph::from_doc(&self.s0).map_err(|e| BenchError::Dataset(format!("{}: {e}", self.entry.id)))
    }

    /// Every pre-action state `s_0 .. s_{L-1}` of the stored trajectory.
    pub fn states(&self) -> Result<Vec<SceneGraph>, BenchError> {
        let mut s = self.initial_state()?;
        let main = s.main_agent();
        let mut out = Vec::with_capacity(self.actions.len());
        for a in &self.actions {
            let next = step_single(&s, main, a)
                .ok_or_else(|| BenchError::Dataset(format!("{}: illegal stored action {a:?}", self.entry.id)))?;
            out.push(std::mem::replace(&mut s, next));
        }
        Ok(out)
    }

    /// One training triple per stored step.
    pub fn gpn_examples(&self) -> Result<Vec<GpnExample>, BenchError> {
        let s0 = self.initial_state()?;
        let vocab = PredicateVocabulary::for_scene(&s0);
        self.states()?.iter().map(|st| Ok(GpnExample::new(&s0, st, &self.goal, &vocab)?)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedEpisode {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub episodes: Vec<EpisodeData>,
    pub skipped: Vec<SkippedEpisode>,
}

impl Dataset {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dataset serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, BenchError> {
        let d: Dataset = serde_json::from_str(s).map_err(|e| BenchError::Dataset(e.to_string()))?;
        d.manifest.validate()?;
        Ok(d)
    }

    /// Training triples of every episode; the count equals the sum of
    /// episode lengths.
    pub fn gpn_examples(&self) -> Result<Vec<GpnExample>, BenchError> {
        let mut out = Vec::new();
        for ep in &self.episodes {
            out.extend(ep.gpn_examples()?);
        }
        Ok(out)
    }

    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.actions.len()).sum()
    }
}

/// The apartment and goal of a manifest entry.
pub fn instantiate(entry: &ManifestEntry) -> Result<(SceneGraph, GoalSpec), String> {
    let template = ApartmentTemplate::builtin(entry.template).map_err(|e| e.to_string())?;
    let skeleton = template.skeleton().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[entry.seed, 0x676f616c]));
    let goal = sample_task(&mut rng, &skeleton).map_err(|e| e.to_string())?;
    let s0 = generate_apartment(&template, entry.seed, &goal).map_err(|e| e.to_string())?;
    Ok((s0, goal))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoloRun {
    pub actions: Vec<Action>,
    pub l_m: u32,
    pub incomplete: bool,
}

/// The planner-controlled main agent working alone. `L_M` is `T_MAX`
/// (flagged incomplete) when it does not finish in time.
pub fn measure_solo_length(s0: &SceneGraph, goal: &GoalSpec) -> SoloRun {
    let main = s0.main_agent();
    let mut s = s0.clone();
    let mut actions = Vec::new();
    while !is_satisfied(&s, goal) && (actions.len() as u32) < T_MAX {
        let a = hp_plan(&s, goal).map(|p| p.first_action()).unwrap_or(Action::Idle);
        s = step_single(&s, main, &a).unwrap_or(s);
        actions.push(a);
    }
    let incomplete = !is_satisfied(&s, goal);
    SoloRun { l_m: actions.len() as u32, actions, incomplete }
}

fn generate_one(entry: &ManifestEntry) -> Result<EpisodeData, String> {
    let (s0, goal) = instantiate(entry)?;
    let solo = measure_solo_length(&s0, &goal);
    if solo.incomplete {
        return Err(format!("planner did not finish within {T_MAX} steps"));
    }
    if solo.l_m == 0 {
        return Err("goal already satisfied at the start".into());
    }
    Ok(EpisodeData { entry: entry.clone(), goal, s0: s0.to_doc(), actions: solo.actions, l_m: solo.l_m, incomplete: false })
}

/// Runs the solo planner on every manifest entry. Entries that fail are
/// skipped with a logged reason.
pub fn generate_dataset(manifest: &DatasetManifest) -> Result<Dataset, BenchError> {
    manifest.validate()?;
    let results: Vec<_> = manifest.entries.par_iter().map(generate_one).collect();
    let mut episodes = Vec::new();
    let mut skipped = Vec::new();
    for (entry, r) in manifest.entries.iter().zip(results) {
        match r {
            Ok(ep) => episodes.push(ep),
            Err(reason) => {
                log::warn!("skipping {}: {reason}", entry.id);
                skipped.push(SkippedEpisode { id: entry.id.clone(), reason });
            }
        }
    }
    Ok(Dataset { manifest: manifest.clone(), episodes, skipped })
}

/// `L_M / L_H - 1`.
pub fn compute_speedup(l_m: u32, l_h: u32) -> Result<f64, BenchError> {
    if l_h == 0 {
        return Err(BenchError::InvalidLength);
    }
    Ok(l_m as f64 / l_h as f64 - 1.0)
}

/// F1 at normalized times `(b+1)/F1_BINS`, `b = 0..F1_BINS`. The value at
/// time `x` is the belief after tick `ceil(x * L_M) - 1`; ticks past the end
/// of the episode carry its last value forward.
pub fn f1_curve(f1: &[f64], l_m: u32) -> Option<Vec<f64>> {
    if f1.is_empty() || l_m == 0 {
        return None;
    }
    Some(
        (1..=F1_BINS)
            .map(|b| {
                let t = (b as u64 * l_m as u64).div_ceil(F1_BINS as u64) as usize;
                f1[t.saturating_sub(1).min(f1.len() - 1)]
            })
            .collect(),
    )
}

/// One joint episode of the evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRun {
    pub episode: String,
    pub run: u32,
    pub seed: u64,
    pub l_m: u32,
    pub l_h: u32,
    pub speedup: f64,
    pub satisfied: bool,
    /// Belief F1 after each tick; empty for helpers without a belief.
    pub f1: Vec<f64>,
    pub f1_curve: Option<Vec<f64>>,
    /// Final state change on objects of classes outside the goal.
    pub nongoal_diff: usize,
}

/// Mean and standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Stat { mean: 0.0, se: 0.0, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, se, n }
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.se
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.se
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub helper: String,
    pub split: Split,
    pub runs: u32,
    pub seed: u64,
    pub episodes: Vec<EpisodeRun>,
    pub speedup: Stat,
    /// Mean speedup of each run over all episodes.
    pub run_speedups: Vec<f64>,
    /// Mean F1 per normalized-time point over completed runs with beliefs.
    pub f1_curve: Option<Vec<f64>>,
    pub completed: usize,
    pub nongoal_diff: Stat,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, BenchError> {
        serde_json::from_str(s).map_err(|e| BenchError::Dataset(e.to_string()))
    }

    /// `x,f1` rows of the mean F1 curve.
    pub fn f1_csv(&self) -> String {
        let mut out = String::from("x,f1\n");
        if let Some(curve) = &self.f1_curve {
            for (b, v) in curve.iter().enumerate() {
                out.push_str(&format!("{:.2},{v:.6}\n", (b + 1) as f64 / F1_BINS as f64));
            }
        }
        out
    }

    /// Speedup recomputed from the stored lengths of every run.
    pub fn check_speedups(&self) -> bool {
        self.episodes.iter().all(|r| compute_speedup(r.l_m, r.l_h).is_ok_and(|s| s == r.speedup))
    }
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub runs: u32,
    pub seed: u64,
    pub t_max: u32,
    pub resources: HelperResources,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { runs: 3, seed: 0, t_max: T_MAX, resources: HelperResources::default() }
    }
}

/// A joint run of one stored episode with a helper, returning the record and
/// the final state.
pub fn run_joint(
    data: &EpisodeData,
    spec: &HelperSpec,
    seed: u64,
    cfg: &EvalConfig,
) -> Result<(EpisodeRecord, SceneGraph), BenchError> {
    let s0 = data.initial_state()?;
    for g in [&cfg.resources.gpn_large, &cfg.resources.gpn_small].into_iter().flatten() {
        let got = PredicateVocabulary::for_scene(&s0).len();
        if g.rows() != got {
            return Err(BenchError::Vocabulary { expected: g.rows(), got });
        }
    }
    let helper = build_helper(spec, &s0, &data.goal, seed, &cfg.resources)?;
    let ep_spec = EpisodeSpec {
        episode: data.entry.id.clone(),
        template: data.entry.template,
        seed,
        goal: data.goal.clone(),
        s0,
    };
    let mut ep = Episode::new(ep_spec, &spec.to_string(), helper, cfg.t_max);
    run_episode_with(&mut ep, &mut PlannerMain, |_| {});
    let state = ep.state().clone();
    Ok((ep.into_record(), state))
}

fn eval_one(
    data: &EpisodeData,
    run: u32,
    spec: &HelperSpec,
    cfg: &EvalConfig,
) -> Result<(EpisodeRun, EpisodeRecord), BenchError> {
    let seed = seed_of(&[cfg.seed, data.entry.seed, run as u64]);
    let (record, last) = run_joint(data, spec, seed, cfg)?;
    let outcome = record.outcome.as_ref().expect("finished episode");
    let l_h = outcome.length;
    let f1: Vec<f64> = record.ticks.iter().filter_map(|t| t.f1).collect();
    let f1 = if f1.len() == record.ticks.len() { f1 } else { Vec::new() };
    let s0 = data.initial_state()?;
    let goal_classes: BTreeSet<ClassName> = data.goal.predicates().map(|p| p.class).collect();
    let nongoal_diff = state_diff_where(&s0, &last, |o| !goal_classes.contains(&s0.class_of(o)))
        .map_err(|e| BenchError::Dataset(e.to_string()))?;
    let run = EpisodeRun {
        episode: data.entry.id.clone(),
        run,
        seed,
        l_m: data.l_m,
        l_h,
        speedup: compute_speedup(data.l_m, l_h)?,
        satisfied: outcome.satisfied,
        f1_curve: f1_curve(&f1, data.l_m),
        f1,
        nongoal_diff,
    };
    Ok((run, record))
}

/// Every dataset episode, `cfg.runs` times, with the planner as main agent.
pub fn run_eval(dataset: &Dataset, spec: &HelperSpec, cfg: &EvalConfig) -> Result<EvalReport, BenchError> {
    run_eval_with_records(dataset, spec, cfg).map(|(report, _)| report)
}

/// Like [`run_eval`], also returning the episode records in report order.
pub fn run_eval_with_records(
    dataset: &Dataset,
    spec: &HelperSpec,
    cfg: &EvalConfig,
) -> Result<(EvalReport, Vec<EpisodeRecord>), BenchError> {
    spec.validate()?;
    let jobs: Vec<(usize, u32)> =
        (0..dataset.episodes.len()).flat_map(|i| (0..cfg.runs).map(move |r| (i, r))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(i, r)| eval_one(&dataset.episodes[i], r, spec, cfg)).collect();
    let (episodes, records): (Vec<EpisodeRun>, Vec<EpisodeRecord>) =
        results.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().unzip();

    let speedups: Vec<f64> = episodes.iter().map(|r| r.speedup).collect();
    let run_speedups = (0..cfg.runs)
        .map(|run| Stat::of(&episodes.iter().filter(|r| r.run == run).map(|r| r.speedup).collect::<Vec<_>>()).mean)
        .collect();
    let curves: Vec<&Vec<f64>> = episodes.iter().filter(|r| r.satisfied).filter_map(|r| r.f1_curve.as_ref()).collect();
    let f1_curve = (!curves.is_empty()).then(|| {
        (0..F1_BINS).map(|b| curves.iter().map(|c| c[b]).sum::<f64>() / curves.len() as f64).collect()
    });
    let diffs: Vec<f64> = episodes.iter().map(|r| r.nongoal_diff as f64).collect();
    let report = EvalReport {
        helper: spec.to_string(),
        split: dataset.manifest.split,
        runs: cfg.runs,
        seed: cfg.seed,
        speedup: Stat::of(&speedups),
        run_speedups,
        f1_curve,
        completed: episodes.iter().filter(|r| r.satisfied).count(),
        nongoal_diff: Stat::of(&diffs),
        episodes,
    };
    Ok((report, records))
}
