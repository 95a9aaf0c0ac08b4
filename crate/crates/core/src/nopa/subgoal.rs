//! Helping-subgoal candidates and their value.
//!
//! Each candidate carries its probability as an exact fraction
//! `support / particles`, so the value numerator
//! `w_r*support*gain - particles*(w_c*L_H + w_m*dd)` can be compared without
//! rounding for integer or dyadic weights.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{seed_of, NopaConfig, ParticleSet};
use crate::episode::CandidateLog;
use crate::goals::{count_satisfied, Predicate};
use crate::planner::{held_of_class, mcts_plan_for, Plan, Requirement, Task, UNBOUNDED};
use crate::worldsim::{state_diff, ClassName, EntityId, SceneGraph, HAND_CAPACITY};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_r: f64,
    pub w_c: f64,
    pub w_m: f64,
}

impl Weights {
    pub fn scaled(&self, lambda: f64) -> Self {
        Weights { w_r: self.w_r * lambda, w_c: self.w_c * lambda, w_m: self.w_m * lambda }
    }
}

/// Identity of a candidate. The derived order is the final tie-break.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubgoalKey {
    /// The `level`-th instance satisfying `pred`.
    Place { pred: Predicate, level: u32 },
    /// The main agent holding `level` objects of `class`.
    MainHolds { class: ClassName, level: u32 },
    /// `object` back at its initial placement.
    Restore { object: EntityId },
}

impl fmt::Display for SubgoalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgoalKey::Place { pred, level } => write!(f, "{pred}#{level}"),
            SubgoalKey::MainHolds { class, level } => write!(f, "HOLDS(main,{class})#{level}"),
            SubgoalKey::Restore { object } => write!(f, "RESTORE({object})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgoalCandidate {
    pub key: SubgoalKey,
    /// What the helper plan establishes.
    pub requirement: Requirement,
    /// Supporting particles; equals `particles` for initial-state edges.
    pub support: usize,
    pub particles: usize,
    pub l_m: u32,
    pub l_h: u32,
    /// `D(s0, s_hat) - D(s0, s_t)`.
    pub diff_delta: i64,
    pub value: f64,
    pub plan: Plan,
}

impl SubgoalCandidate {
    pub fn p(&self) -> f64 {
        self.support as f64 / self.particles as f64
    }

    /// `particles * V`, exact for integer or dyadic weights.
    fn numerator(&self, w: &Weights) -> f64 {
        let q = self.particles as f64;
        let gain = self.l_m.saturating_sub(self.l_h) as f64;
        w.w_r * self.support as f64 * gain - q * w.w_c * self.l_h as f64 - q * w.w_m * self.diff_delta as f64
    }

    pub fn log(&self) -> CandidateLog {
        CandidateLog {
            key: self.key.to_string(),
            support: self.support,
            particles: self.particles,
            l_m: self.l_m,
            l_h: self.l_h,
            diff_delta: self.diff_delta,
            value: self.value,
        }
    }
}

/// `w_r * p * max(L_M - L_H, 0) - w_c * L_H - w_m * dd`.
pub fn helping_value(p: f64, l_m: u32, l_h: u32, diff_delta: i64, w: &Weights) -> f64 {
    w.w_r * p * (l_m as f64 - l_h as f64).max(0.0) - w.w_c * l_h as f64 - w.w_m * diff_delta as f64
}

/// Value of a candidate, recomputing the state change from its plan.
pub fn subgoal_value(cand: &SubgoalCandidate, s0: &SceneGraph, st: &SceneGraph, w: &Weights) -> f64 {
    helping_value(cand.p(), cand.l_m, cand.l_h, diff_delta(s0, st, cand.plan.final_state()), w)
}

fn diff_delta(s0: &SceneGraph, st: &SceneGraph, s_hat: &SceneGraph) -> i64 {
    let d = |s| state_diff(s0, s).expect("states of one episode") as i64;
    d(s_hat) - d(st)
}

/// Outcome of subgoal selection: the chosen candidate, if any has a value
/// above the idle threshold, and every scored candidate.
#[derive(Clone, Debug, Default)]
pub struct Selection {
    pub chosen: Option<SubgoalCandidate>,
    pub log: Vec<CandidateLog>,
}

struct Proto {
    key: SubgoalKey,
    requirement: Requirement,
    support: usize,
    particles: usize,
    l_m: u32,
}

fn first_tau(states: &[&SceneGraph], pred: impl Fn(&SceneGraph) -> bool) -> Option<u32> {
    states.iter().position(|s| pred(s)).map(|i| i as u32 + 1)
}

fn prototypes(
    q: &ParticleSet,
    s0: &SceneGraph,
    st: &SceneGraph,
    touched: &BTreeSet<EntityId>,
    l_max: u32,
) -> Vec<Proto> {
    let main = st.main_agent();
    let n = q.particles.len();
    let trajs: Vec<Vec<&SceneGraph>> =
        q.particles.iter().map(|p| p.remaining().iter().map(|s| &s.state).collect()).collect();
    let mut out = Vec::new();

    let preds: BTreeSet<Predicate> = q.particles.iter().flat_map(|p| p.goal.predicates().copied()).collect();
    for pred in preds {
        let base = count_satisfied(st, &pred) + held_of_class(st, main, pred.class);
        let top = q
            .particles
            .iter()
            .zip(&trajs)
            .map(|(p, tr)| {
                let reached = tr.iter().map(|s| count_satisfied(s, &pred)).max().unwrap_or(0);
                reached.max(p.goal.count(&pred) as u32)
            })
            .max()
            .unwrap_or(0);
        for level in base + 1..=top {
            let mut support = 0;
            let mut l_m = u32::MAX;
            for (p, tr) in q.particles.iter().zip(&trajs) {
                if let Some(tau) = first_tau(tr, |s| count_satisfied(s, &pred) >= level) {
                    support += 1;
                    l_m = l_m.min(tau);
                } else if p.goal.count(&pred) as u32 >= level {
                    support += 1;
                    l_m = l_m.min(l_max);
                }
            }
            if support > 0 {
                out.push(Proto {
                    key: SubgoalKey::Place { pred, level },
                    requirement: Requirement::Place { pred, count: base + 1 },
                    support,
                    particles: n,
                    l_m,
                });
            }
        }
    }

    let classes: BTreeSet<ClassName> =
        trajs.iter().flatten().flat_map(|s| s.held_by(main).map(|o| s.class_of(o))).collect();
    for class in classes {
        let now = held_of_class(st, main, class);
        for level in now + 1..=HAND_CAPACITY as u32 {
            let taus: Vec<u32> =
                trajs.iter().filter_map(|tr| first_tau(tr, |s| held_of_class(s, main, class) >= level)).collect();
            if let Some(&l_m) = taus.iter().min() {
                out.push(Proto {
                    key: SubgoalKey::MainHolds { class, level },
                    requirement: Requirement::Holds { holder: main, class, count: now + 1 },
                    support: taus.len(),
                    particles: n,
                    l_m,
                });
            }
        }
    }

    for &object in touched {
        let (home, now) = (s0.placement(object), st.placement(object));
        if home == now || now.holder() == Some(main) {
            continue;
        }
        let class = st.class_of(object);
        let serves_goal =
            q.particles.iter().any(|p| p.goal.predicates().any(|pr| pr.class == class && pr.matches(now)));
        if !serves_goal {
            out.push(Proto {
                key: SubgoalKey::Restore { object },
                requirement: Requirement::Restore { object, placement: home },
                support: 1,
                particles: 1,
                l_m: 0,
            });
        }
    }
    out
}

/// Scores every candidate and picks the best by value, then shorter helper
/// plan, then key. Returns no choice when the best value does not exceed
/// the idle threshold.
pub fn select_subgoal(
    q: &ParticleSet,
    s0: &SceneGraph,
    st: &SceneGraph,
    touched: &BTreeSet<EntityId>,
    cfg: &NopaConfig,
    seed: u64,
) -> Selection {
    let helper = st.helper_agent();
    let mut plans: BTreeMap<Requirement, Option<Plan>> = BTreeMap::new();
    let mut candidates = Vec::new();
    for proto in prototypes(q, s0, st, touched, cfg.l_max) {
        let next_seed = seed_of(&[seed, plans.len() as u64]);
        let plan = plans.entry(proto.requirement).or_insert_with(|| {
            if proto.requirement.is_met(st) {
                return None;
            }
            let mut task = Task::new(helper, vec![proto.requirement]);
            task.commit_other = matches!(proto.requirement, Requirement::Place { .. });
            mcts_plan_for(st, &task, UNBOUNDED, &cfg.mcts.with_seed(next_seed)).ok().filter(|p| !p.is_empty())
        });
        let Some(plan) = plan.clone() else { continue };
        let l_h = plan.len() as u32;
        let dd = diff_delta(s0, st, plan.final_state());
        let mut cand = SubgoalCandidate {
            key: proto.key,
            requirement: proto.requirement,
            support: proto.support,
            particles: proto.particles,
            l_m: proto.l_m,
            l_h,
            diff_delta: dd,
            value: 0.0,
            plan,
        };
        cand.value = helping_value(cand.p(), cand.l_m, cand.l_h, dd, &cfg.weights);
        candidates.push(cand);
    }
    let log = candidates.iter().map(|c| c.log()).collect();
    let w = &cfg.weights;
    let better = |a: &SubgoalCandidate, b: &SubgoalCandidate| {
        let (na, nb) = (a.numerator(w) * b.particles as f64, b.numerator(w) * a.particles as f64);
        na > nb || (na == nb && (a.l_h, a.key) < (b.l_h, b.key))
    };
    let mut best: Option<SubgoalCandidate> = None;
    for c in candidates {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            best = Some(c);
        }
    }
    let chosen = best.filter(|b| b.numerator(w) > cfg.idle_threshold * b.particles as f64);
    Selection { chosen, log }
}
