//! Scene construction helpers shared by unit tests.

use crate::goals::{GoalSpec, Predicate};
use crate::worldsim::{
    generate_apartment, step_single, Action, ApartmentTemplate, ClassName, EntityId, Placement, SceneGraph,
};

pub fn template(id: u32) -> ApartmentTemplate {
    ApartmentTemplate::builtin(id).unwrap()
}

pub fn skeleton(id: u32) -> SceneGraph {
    template(id).skeleton().unwrap()
}

pub fn pred(scene: &SceneGraph, class: ClassName, loc: ClassName) -> Predicate {
    Predicate::at(scene, class, scene.unique_location(loc).unwrap())
}

pub fn goal(scene: &SceneGraph, items: &[(ClassName, ClassName, u8)]) -> GoalSpec {
    GoalSpec::new(items.iter().map(|&(c, l, n)| (pred(scene, c, l), n))).unwrap()
}

/// Apartment `id` generated for a goal given as (class, location, count).
pub fn apartment(id: u32, seed: u64, items: &[(ClassName, ClassName, u8)]) -> (SceneGraph, GoalSpec) {
    let g = goal(&skeleton(id), items);
    (generate_apartment(&template(id), seed, &g).unwrap(), g)
}

pub fn find(scene: &SceneGraph, class: ClassName) -> Vec<EntityId> {
    scene.objects().iter().copied().filter(|&o| scene.class_of(o) == class).collect()
}

pub fn location(scene: &SceneGraph, class: ClassName) -> EntityId {
    scene.unique_location(class).unwrap()
}

/// Room containing the unique location of class `class`.
pub fn room(scene: &SceneGraph, class: ClassName) -> EntityId {
    scene.room_of(location(scene, class))
}

/// Walks `agent` next to `target` with single-agent steps.
pub fn walk_to(mut s: SceneGraph, agent: EntityId, target: EntityId) -> SceneGraph {
    let room = s.room_of(target);
    while s.room_of(agent) != room {
        let hop = s.layout().next_hop(s.room_of(agent), room).unwrap();
        s = step_single(&s, agent, &Action::MoveToRoom { room: hop }).unwrap();
    }
    if s.close_target(agent) != Some(target) {
        s = step_single(&s, agent, &Action::MoveTo { target }).unwrap();
    }
    s
}

/// Teleports an object (test setup only).
pub fn place(s: &mut SceneGraph, object: EntityId, p: Placement) {
    s.set_placement(object, p);
    if let Some(l) = p.location() {
        let room = s.room_of(l);
        s.set_room(object, room);
    }
    s.settle();
    s.check_invariants().unwrap();
}

/// Teleports an agent into `room` with no CLOSE target (test setup only).
pub fn put_agent(s: &mut SceneGraph, agent: EntityId, room: EntityId) {
    s.set_room(agent, room);
    s.set_close(agent, None);
    s.settle();
    s.check_invariants().unwrap();
}

pub fn open(s: &mut SceneGraph, container: EntityId) {
    s.set_open(container, true);
}
