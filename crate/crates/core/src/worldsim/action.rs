//! Two-agent action semantics and the simultaneous-step transition.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::class::Category;
use super::scene::{EntityId, Placement, SceneGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Action {
    MoveToRoom { room: EntityId },
    MoveTo { target: EntityId },
    Open { container: EntityId },
    Close { container: EntityId },
    Grab { object: EntityId },
    PutOn { object: EntityId, surface: EntityId },
    PutIn { object: EntityId, container: EntityId },
    Give { object: EntityId, receiver: EntityId },
    Idle,
}

impl Action {
    pub fn is_idle(&self) -> bool {
        matches!(self, Action::Idle)
    }

    fn ids(&self) -> [Option<EntityId>; 2] {
        match *self {
            Action::MoveToRoom { room } => [Some(room), None],
            Action::MoveTo { target } => [Some(target), None],
            Action::Open { container } | Action::Close { container } => [Some(container), None],
            Action::Grab { object } => [Some(object), None],
            Action::PutOn { object, surface } => [Some(object), Some(surface)],
            Action::PutIn { object, container } => [Some(object), Some(container)],
            Action::Give { object, receiver } => [Some(object), Some(receiver)],
            Action::Idle => [None, None],
        }
    }

    /// Shared resource contended by simultaneous actions.
    fn resource(&self) -> Option<EntityId> {
        match *self {
            Action::Grab { object }
            | Action::PutOn { object, .. }
            | Action::PutIn { object, .. }
            | Action::Give { object, .. } => Some(object),
            Action::Open { container } | Action::Close { container } => Some(container),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::MoveToRoom { room } => write!(f, "MoveToRoom({room})"),
            Action::MoveTo { target } => write!(f, "MoveTo({target})"),
            Action::Open { container } => write!(f, "Open({container})"),
            Action::Close { container } => write!(f, "Close({container})"),
            Action::Grab { object } => write!(f, "Grab({object})"),
            Action::PutOn { object, surface } => write!(f, "PutOn({object},{surface})"),
            Action::PutIn { object, container } => write!(f, "PutIn({object},{container})"),
            Action::Give { object, receiver } => write!(f, "Give({object},{receiver})"),
            Action::Idle => write!(f, "Idle"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Failed,
}

impl Outcome {
    pub fn is_ok(self) -> bool {
        self == Outcome::Ok
    }
}

/// Can `agent` grab `object` right now (ignoring hand capacity)?
fn can_reach_object(state: &SceneGraph, agent: EntityId, object: EntityId) -> bool {
    let close = state.close_target(agent);
    match state.placement(object) {
        Placement::On(l) => close == Some(object) || close == Some(l),
        Placement::In(l) => (close == Some(object) || close == Some(l)) && state.is_open(l),
        _ => false,
    }
}

/// Precondition check for one agent acting alone on `state`.
pub fn is_legal(state: &SceneGraph, agent: EntityId, action: &Action) -> bool {
    if !state.contains(agent) || !state.is_agent(agent) {
        return false;
    }
    if action.ids().iter().flatten().any(|id| !state.contains(*id)) {
        return false;
    }
    let here = state.room_of(agent);
    let close = state.close_target(agent);
    match *action {
        Action::Idle => true,
        Action::MoveToRoom { room } => {
            state.category_of(room) == Category::Room && state.layout().adjacent_rooms(here).contains(&room)
        }
        Action::MoveTo { target } => {
            target != agent
                && state.category_of(target) != Category::Room
                && state.room_of(target) == here
                && state.placement(target).holder().is_none()
                && close != Some(target)
        }
        Action::Open { container } => {
            state.class_of(container).openable() && close == Some(container) && !state.is_open(container)
        }
        Action::Close { container } => {
            state.class_of(container).openable() && close == Some(container) && state.is_open(container)
        }
        Action::Grab { object } => {
            state.class_of(object).grabbable()
                && state.has_free_hand(agent)
                && can_reach_object(state, agent, object)
        }
        Action::PutOn { object, surface } => {
            state.placement(object) == Placement::HeldBy(agent)
                && state.category_of(surface) == Category::Surface
                && close == Some(surface)
        }
        Action::PutIn { object, container } => {
            state.placement(object) == Placement::HeldBy(agent)
                && state.category_of(container) == Category::Container
                && close == Some(container)
                && state.is_open(container)
        }
        Action::Give { object, receiver } => {
            state.placement(object) == Placement::HeldBy(agent)
                && receiver == state.other_agent(agent)
                && close == Some(receiver)
                && state.room_of(receiver) == here
                && state.has_free_hand(receiver)
        }
    }
}

/// Every action whose preconditions hold for `agent`, in canonical order.
pub fn legal_actions(state: &SceneGraph, agent: EntityId) -> Vec<Action> {
    let mut out = vec![Action::Idle];
    if !state.contains(agent) || !state.is_agent(agent) {
        return out;
    }
    let here = state.room_of(agent);
    for &room in state.layout().adjacent_rooms(here) {
        out.push(Action::MoveToRoom { room });
    }
    for e in state.layout().entities() {
        let a = Action::MoveTo { target: e.id };
        if is_legal(state, agent, &a) {
            out.push(a);
        }
    }
    if let Some(c) = state.close_target(agent) {
        for a in [Action::Open { container: c }, Action::Close { container: c }] {
            if is_legal(state, agent, &a) {
                out.push(a);
            }
        }
        if state.class_of(c).is_location() {
            let rel_put = |object: EntityId| match state.category_of(c) {
                Category::Surface => Action::PutOn { object, surface: c },
                _ => Action::PutIn { object, container: c },
            };
            for o in state.held_by(agent).collect::<Vec<_>>() {
                let a = rel_put(o);
                if is_legal(state, agent, &a) {
                    out.push(a);
                }
            }
        }
        if c == state.other_agent(agent) {
            for o in state.held_by(agent).collect::<Vec<_>>() {
                let a = Action::Give { object: o, receiver: c };
                if is_legal(state, agent, &a) {
                    out.push(a);
                }
            }
        }
    }
    if state.has_free_hand(agent) {
        for &o in state.objects() {
            let a = Action::Grab { object: o };
            if is_legal(state, agent, &a) {
                out.push(a);
            }
        }
    }
    out.sort();
    out
}

/// Applies an action known to be legal.
fn apply(state: &mut SceneGraph, agent: EntityId, action: &Action) {
    match *action {
        Action::Idle => {}
        Action::MoveToRoom { room } => {
            state.set_room(agent, room);
            state.set_close(agent, None);
        }
        Action::MoveTo { target } => state.set_close(agent, Some(target)),
        Action::Open { container } => state.set_open(container, true),
        Action::Close { container } => state.set_open(container, false),
        Action::Grab { object } => state.set_placement(object, Placement::HeldBy(agent)),
        Action::PutOn { object, surface } => state.set_placement(object, Placement::On(surface)),
        Action::PutIn { object, container } => state.set_placement(object, Placement::In(container)),
        Action::Give { object, receiver } => state.set_placement(object, Placement::HeldBy(receiver)),
    }
}

/// Single-agent step with the other agent idle. Returns `None` if illegal.
pub fn step_single(state: &SceneGraph, agent: EntityId, action: &Action) -> Option<SceneGraph> {
    if !is_legal(state, agent, action) {
        return None;
    }
    let mut next = state.clone();
    apply(&mut next, agent, action);
    next.settle();
    next.advance_tick();
    Some(next)
}

/// [`step_single`] on a state owned by the caller. Returns `false` and leaves
/// the state untouched if the action is illegal.
pub(crate) fn act_in_place(state: &mut SceneGraph, agent: EntityId, action: &Action) -> bool {
    if !is_legal(state, agent, action) {
        return false;
    }
    apply(state, agent, action);
    state.settle();
    state.advance_tick();
    true
}

/// Simultaneous transition. Both actions are judged against the pre-state;
/// the main agent's action is applied first and wins any contention over the
/// same object or container. The helper's action must also remain legal
/// after the main agent's effect, otherwise it fails as a no-op.
pub fn step(state: &SceneGraph, main_action: &Action, helper_action: &Action) -> (SceneGraph, [Outcome; 2]) {
    let main = state.main_agent();
    let helper = state.helper_agent();
    let mut next = state.clone();

    let main_ok = is_legal(state, main, main_action);
    if main_ok {
        apply(&mut next, main, main_action);
    }
    let contended = main_ok
        && helper_action.resource().is_some()
        && helper_action.resource() == main_action.resource();
    let helper_ok = !contended && is_legal(state, helper, helper_action) && is_legal(&next, helper, helper_action);
    if helper_ok {
        apply(&mut next, helper, helper_action);
    }
    next.settle();
    next.advance_tick();
    let outcome = |ok: bool| if ok { Outcome::Ok } else { Outcome::Failed };
    (next, [outcome(main_ok), outcome(helper_ok)])
}
