//! Exact breadth-first search over primitive actions, used as an oracle.
//!
//! Only actions that can matter are expanded: moves to relevant entities,
//! opening relevant containers, grabbing relevant objects and putting them
//! on relevant locations (irrelevant held objects may go anywhere). Closing
//! containers and idling never shorten a plan.

use std::collections::{BTreeSet, HashSet};

use super::{Plan, PlannerError, Requirement, Task};
use crate::goals::GoalSpec;
use crate::worldsim::{act_in_place, legal_actions, Action, EntityId, Placement, SceneGraph};

struct Relevance {
    objects: BTreeSet<EntityId>,
    targets: BTreeSet<EntityId>,
    gives: bool,
}

impl Relevance {
    fn new(state: &SceneGraph, task: &Task) -> Self {
        let mut objects = BTreeSet::new();
        let mut targets = BTreeSet::new();
        let mut gives = false;
        for r in &task.reqs {
            match *r {
                Requirement::Place { pred, .. } => {
                    targets.insert(pred.loc);
                }
                Requirement::Holds { holder, .. } => {
                    targets.insert(holder);
                    gives = true;
                }
                Requirement::Restore { object, placement } => {
                    objects.insert(object);
                    targets.extend(placement.location());
                }
            }
        }
        let classes: BTreeSet<_> = task.reqs.iter().filter_map(|r| r.class()).collect();
        for &o in state.objects() {
            if classes.contains(&state.class_of(o)) {
                objects.insert(o);
            }
        }
        for &o in &objects {
            targets.extend(state.placement(o).location());
        }
        Relevance { objects, targets, gives }
    }

    fn keep(&self, a: &Action) -> bool {
        match *a {
            Action::Idle | Action::Close { .. } => false,
            Action::MoveToRoom { .. } => true,
            Action::MoveTo { target } => self.targets.contains(&target) || self.objects.contains(&target),
            Action::Open { container } => self.targets.contains(&container),
            Action::Grab { object } => self.objects.contains(&object),
            Action::PutOn { object, surface: l } | Action::PutIn { object, container: l } => {
                self.targets.contains(&l) || !self.objects.contains(&object)
            }
            Action::Give { .. } => self.gives,
        }
    }

    fn key(&self, state: &SceneGraph, agent: EntityId) -> Vec<u32> {
        let mut key = vec![state.room_of(agent).0, state.close_target(agent).map_or(u32::MAX, |e| e.0)];
        for &t in &self.targets {
            key.push(state.is_open(t) as u32);
        }
        for &o in state.objects() {
            if self.objects.contains(&o) || state.placement(o) == Placement::HeldBy(agent) {
                key.push(o.0);
                key.push(match state.placement(o) {
                    Placement::None => 0,
                    Placement::On(l) => (1 << 30) | l.0,
                    Placement::In(l) => (2 << 30) | l.0,
                    Placement::HeldBy(a) => (3 << 30) | a.0,
                });
            }
        }
        key
    }
}

/// Shortest plan for `task`, `Ok(None)` if none exists, or a budget error
/// once more than `cap` nodes have been expanded.
pub fn bfs_optimal_for(state: &SceneGraph, task: &Task, cap: usize) -> Result<Option<Plan>, PlannerError> {
    let agent = task.agent;
    if task.is_met(state) {
        return Ok(Some(Plan::new(state.clone(), agent)));
    }
    let rel = Relevance::new(state, task);
    // (parent index, action) for path reconstruction
    let mut tree: Vec<(usize, Action)> = vec![(usize::MAX, Action::Idle)];
    let mut seen = HashSet::new();
    seen.insert(rel.key(state, agent));
    let mut layer = vec![(0usize, state.clone())];
    let mut expanded = 0;
    while !layer.is_empty() {
        let mut next = Vec::new();
        for (idx, s) in layer {
            expanded += 1;
            if expanded > cap {
                return Err(PlannerError::Budget(cap));
            }
            for a in legal_actions(&s, agent) {
                if !rel.keep(&a) {
                    continue;
                }
                let mut child = s.clone();
                act_in_place(&mut child, agent, &a);
                if !seen.insert(rel.key(&child, agent)) {
                    continue;
                }
                tree.push((idx, a));
                let id = tree.len() - 1;
                if task.is_met(&child) {
                    let mut actions = Vec::new();
                    let mut cur = id;
                    while cur != 0 {
                        actions.push(tree[cur].1);
                        cur = tree[cur].0;
                    }
                    actions.reverse();
                    return Plan::from_actions(state.clone(), agent, &actions).map(Some);
                }
                next.push((id, child));
            }
        }
        layer = next;
    }
    Ok(None)
}

/// Shortest main-agent plan toward `goal`.
pub fn bfs_optimal(state: &SceneGraph, goal: &GoalSpec, cap: usize) -> Result<Option<Plan>, PlannerError> {
    bfs_optimal_for(state, &Task::goal(state.main_agent(), goal), cap)
}
