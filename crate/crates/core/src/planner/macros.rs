//! Macro options and the greedy hierarchical planner.

use std::collections::{BTreeMap, BTreeSet};

use super::{held_of_class, Plan, PlannerError, Requirement, Task};
use crate::goals::{count_satisfied, GoalSpec, Predicate};
use crate::worldsim::{act_in_place, Action, Category, ClassName, EntityId, SceneGraph, UNREACHABLE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Target {
    Loc(EntityId),
    Agent(EntityId),
}

/// One macro option. Variant order is the tie-break between equal costs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Macro {
    Deliver { object: EntityId, target: Target },
    Fetch { object: EntityId },
    Stash { object: EntityId, location: EntityId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Opt {
    pub cost: u32,
    pub mac: Macro,
}

fn nav_cost(state: &SceneGraph, agent: EntityId, target: EntityId) -> Option<u32> {
    if state.close_target(agent) == Some(target) {
        return Some(0);
    }
    match state.layout().room_distance(state.room_of(agent), state.room_of(target)) {
        UNREACHABLE => None,
        d => Some(d + 1),
    }
}

fn is_closed(state: &SceneGraph, loc: EntityId) -> bool {
    state.class_of(loc).openable() && !state.is_open(loc)
}

/// Whether a fetch of `object` from `loc` can skip navigation.
fn fetch_in_reach(state: &SceneGraph, agent: EntityId, object: EntityId, loc: EntityId) -> bool {
    let close = state.close_target(agent);
    close == Some(loc) || (close == Some(object) && !is_closed(state, loc))
}

fn fetch_cost(state: &SceneGraph, agent: EntityId, object: EntityId, loc: EntityId) -> Option<u32> {
    let nav = if fetch_in_reach(state, agent, object, loc) { 0 } else { nav_cost(state, agent, loc)? };
    Some(nav + is_closed(state, loc) as u32 + 1)
}

fn deliver_cost(state: &SceneGraph, agent: EntityId, target: Target) -> Option<u32> {
    match target {
        Target::Loc(l) => Some(nav_cost(state, agent, l)? + is_closed(state, l) as u32 + 1),
        Target::Agent(h) => Some(nav_cost(state, agent, h)? + 1),
    }
}

/// Units still to be fetched per class after counting held objects.
struct Demand {
    per_class: BTreeMap<ClassName, u32>,
    restore: BTreeSet<EntityId>,
}

impl Demand {
    fn compute(state: &SceneGraph, task: &Task, unmet: &[Requirement]) -> Self {
        let agent = task.agent;
        let other = state.other_agent(agent);
        let mut own: BTreeMap<ClassName, u32> = BTreeMap::new();
        for o in state.held_by(agent) {
            *own.entry(state.class_of(o)).or_default() += 1;
        }
        let mut theirs: BTreeMap<ClassName, u32> = BTreeMap::new();
        if task.commit_other {
            for o in state.held_by(other).chain(task.claimed.iter().copied()) {
                *theirs.entry(state.class_of(o)).or_default() += 1;
            }
        }
        let mut per_class = BTreeMap::new();
        let mut restore = BTreeSet::new();
        for r in unmet {
            let (class, mut need, other_counts) = match *r {
                Requirement::Place { pred, count } => {
                    (pred.class, count.saturating_sub(count_satisfied(state, &pred)), true)
                }
                Requirement::Holds { holder, class, count } => {
                    (class, count.saturating_sub(held_of_class(state, holder, class)), holder != other)
                }
                Requirement::Restore { object, .. } => {
                    if state.placement(object).holder().is_none() {
                        restore.insert(object);
                    }
                    continue;
                }
            };
            for (pool, usable) in [(&mut own, true), (&mut theirs, other_counts)] {
                if usable {
                    let have = pool.entry(class).or_default();
                    let take = need.min(*have);
                    *have -= take;
                    need -= take;
                }
            }
            if need > 0 {
                *per_class.entry(class).or_default() += need;
            }
        }
        Demand { per_class, restore }
    }

    fn is_zero(&self) -> bool {
        self.per_class.is_empty() && self.restore.is_empty()
    }

    fn units(&self) -> u32 {
        self.per_class.values().sum::<u32>() + self.restore.len() as u32
    }
}

fn unmet(state: &SceneGraph, task: &Task) -> Vec<Requirement> {
    task.reqs.iter().copied().filter(|r| !r.is_met(state)).collect()
}

/// Whether `object` currently counts toward some `Place` requirement.
fn locked(state: &SceneGraph, task: &Task, object: EntityId) -> bool {
    let p = state.placement(object);
    task.reqs.iter().any(|r| match r {
        Requirement::Place { pred, .. } => pred.class == state.class_of(object) && pred.matches(p),
        _ => false,
    })
}

/// All macro options in tie-break order, or `None` when the task is done
/// (nothing unmet, or only units committed to the other agent remain).
/// `Some(empty)` means the task is stuck.
pub(crate) fn options(state: &SceneGraph, task: &Task) -> Option<Vec<Opt>> {
    let unmet = unmet(state, task);
    if unmet.is_empty() {
        return None;
    }
    let agent = task.agent;
    let held: Vec<EntityId> = state.held_by(agent).collect();
    let mut out = Vec::new();
    for &o in &held {
        let class = state.class_of(o);
        for r in &unmet {
            let target = match *r {
                Requirement::Place { pred, .. } if pred.class == class => Some(Target::Loc(pred.loc)),
                Requirement::Holds { holder, class: c, .. }
                    if c == class && holder != agent && state.has_free_hand(holder) =>
                {
                    Some(Target::Agent(holder))
                }
                Requirement::Restore { object, placement } if object == o => placement.location().map(Target::Loc),
                _ => None,
            };
            if let Some(target) = target {
                if let Some(cost) = deliver_cost(state, agent, target) {
                    out.push(Opt { cost, mac: Macro::Deliver { object: o, target } });
                }
            }
        }
    }
    let demand = Demand::compute(state, task, &unmet);
    if state.has_free_hand(agent) {
        let mut seen = BTreeSet::new();
        for &o in state.objects() {
            let Some(loc) = state.placement(o).location() else { continue };
            let class = state.class_of(o);
            let is_restore = demand.restore.contains(&o);
            let demanded =
                demand.per_class.contains_key(&class) && !locked(state, task, o) && !task.claimed.contains(&o);
            if !is_restore && !(demanded && seen.insert((class, loc))) {
                continue;
            }
            if let Some(cost) = fetch_cost(state, agent, o, loc) {
                out.push(Opt { cost, mac: Macro::Fetch { object: o } });
            }
        }
    }
    if out.is_empty() && demand.is_zero() && held.is_empty() {
        return None;
    }
    if out.is_empty() && !state.has_free_hand(agent) {
        let goal_locs: BTreeSet<EntityId> = task
            .reqs
            .iter()
            .filter_map(|r| match r {
                Requirement::Place { pred, .. } => Some(pred.loc),
                _ => None,
            })
            .collect();
        for &o in &held {
            let best = state
                .locations()
                .iter()
                .filter(|l| !goal_locs.contains(l))
                .filter_map(|&l| deliver_cost(state, agent, Target::Loc(l)).map(|c| (c, l)))
                .min();
            if let Some((cost, location)) = best {
                out.push(Opt { cost, mac: Macro::Stash { object: o, location } });
            }
        }
    }
    if out.is_empty() && demand.is_zero() {
        return None;
    }
    out.sort();
    Some(out)
}

fn navigate(state: &SceneGraph, agent: EntityId, target: EntityId, out: &mut Vec<Action>) {
    if state.close_target(agent) == Some(target) {
        return;
    }
    let layout = state.layout();
    let dest = state.room_of(target);
    let mut cur = state.room_of(agent);
    while cur != dest {
        let hop = layout.next_hop(cur, dest).expect("costed options are reachable");
        out.push(Action::MoveToRoom { room: hop });
        cur = hop;
    }
    out.push(Action::MoveTo { target });
}

fn put(state: &SceneGraph, object: EntityId, loc: EntityId) -> Action {
    match state.category_of(loc) {
        Category::Surface => Action::PutOn { object, surface: loc },
        _ => Action::PutIn { object, container: loc },
    }
}

/// Primitive actions of a macro, starting from `state`.
pub(crate) fn expand(state: &SceneGraph, agent: EntityId, mac: Macro) -> Vec<Action> {
    let mut out = Vec::with_capacity(8);
    match mac {
        Macro::Fetch { object } => {
            let loc = state.placement(object).location().expect("fetch targets a placed object");
            if !fetch_in_reach(state, agent, object, loc) {
                navigate(state, agent, loc, &mut out);
            }
            if is_closed(state, loc) {
                out.push(Action::Open { container: loc });
            }
            out.push(Action::Grab { object });
        }
        Macro::Deliver { object, target: Target::Loc(l) } | Macro::Stash { object, location: l } => {
            navigate(state, agent, l, &mut out);
            if is_closed(state, l) {
                out.push(Action::Open { container: l });
            }
            out.push(put(state, object, l));
        }
        Macro::Deliver { object, target: Target::Agent(h) } => {
            navigate(state, agent, h, &mut out);
            out.push(Action::Give { object, receiver: h });
        }
    }
    out
}

/// Applies a macro in place and returns the number of primitive steps.
pub(crate) fn apply_macro(state: &mut SceneGraph, agent: EntityId, mac: Macro) -> Result<u32, PlannerError> {
    let actions = expand(state, agent, mac);
    for a in &actions {
        if !act_in_place(state, agent, a) {
            return Err(PlannerError::Replay(format!("macro {mac:?} produced illegal {a}")));
        }
    }
    Ok(actions.len() as u32)
}

/// Upper bound on macros needed to finish `task` from `state`.
pub(crate) fn macro_limit(state: &SceneGraph, task: &Task) -> usize {
    let unmet = unmet(state, task);
    let units = Demand::compute(state, task, &unmet).units() as usize + state.held_count(task.agent);
    3 * units + 6
}

/// Greedy rollout: returns the macros taken, the number of primitive steps,
/// and whether the task finished within `max_macros`.
pub(crate) fn greedy(
    state: &mut SceneGraph,
    task: &Task,
    max_macros: usize,
) -> Result<(Vec<Macro>, u32, bool), PlannerError> {
    let mut macros = Vec::new();
    let mut steps = 0;
    loop {
        let Some(opts) = options(state, task) else {
            if !task.commit_other && !task.is_met(state) {
                return Err(PlannerError::Unreachable(describe(task)));
            }
            return Ok((macros, steps, true));
        };
        let Some(best) = opts.first() else {
            return Err(PlannerError::Unreachable(describe(task)));
        };
        if macros.len() >= max_macros {
            return Ok((macros, steps, false));
        }
        steps += apply_macro(state, task.agent, best.mac)?;
        macros.push(best.mac);
    }
}

pub(crate) fn describe(task: &Task) -> String {
    let reqs: Vec<String> = task.reqs.iter().map(|r| r.to_string()).collect();
    format!("agent {} cannot reach {{{}}}", task.agent, reqs.join(", "))
}

/// Expands macros from `origin` into a plan of at most `horizon` steps.
pub(crate) fn build_plan(origin: &SceneGraph, agent: EntityId, macros: &[Macro], horizon: usize) -> Plan {
    let mut plan = Plan::new(origin.clone(), agent);
    let mut state = origin.clone();
    'outer: for &mac in macros {
        for a in expand(&state, agent, mac) {
            if plan.len() >= horizon {
                break 'outer;
            }
            let ok = act_in_place(&mut state, agent, &a);
            debug_assert!(ok, "expanded macro action {a} is legal");
            plan.push_unchecked(a, state.clone());
        }
    }
    plan
}

/// Greedy nearest-first plan for an arbitrary task.
pub fn hp_plan_for(state: &SceneGraph, task: &Task) -> Result<Plan, PlannerError> {
    let mut s = state.clone();
    let limit = macro_limit(state, task);
    let (macros, _, done) = greedy(&mut s, task, limit)?;
    if !done {
        return Err(PlannerError::Unreachable(describe(task)));
    }
    Ok(build_plan(state, task.agent, &macros, usize::MAX))
}

/// Greedy nearest-first plan for the main agent toward `goal`.
pub fn hp_plan(state: &SceneGraph, goal: &GoalSpec) -> Result<Plan, PlannerError> {
    hp_plan_for(state, &Task::goal(state.main_agent(), goal))
}

/// Plan that raises the satisfied count of `pred` by one, using the nearest
/// available instance.
pub fn macro_script(state: &SceneGraph, agent: EntityId, pred: &Predicate) -> Result<Plan, PlannerError> {
    let count = count_satisfied(state, pred) + 1;
    hp_plan_for(state, &Task::new(agent, vec![Requirement::Place { pred: *pred, count }]))
}
