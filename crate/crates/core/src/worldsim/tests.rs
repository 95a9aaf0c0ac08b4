use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::goals::{count_satisfied, GoalSpec, Predicate};

fn template(id: u32) -> ApartmentTemplate {
    ApartmentTemplate::builtin(id).unwrap()
}

fn plates_on_table(scene: &SceneGraph, n: u8) -> GoalSpec {
    let table = scene.unique_location(ClassName::Kitchentable).unwrap();
    GoalSpec::new([(Predicate::at(scene, ClassName::Plate, table), n)]).unwrap()
}

fn find(scene: &SceneGraph, class: ClassName) -> Vec<EntityId> {
    scene.layout().entities().iter().filter(|e| e.class == class).map(|e| e.id).collect()
}

/// Walks `agent` to `target` with single-agent steps.
fn walk_to(mut s: SceneGraph, agent: EntityId, target: EntityId) -> SceneGraph {
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

#[test]
fn builtin_templates_are_valid_and_complete() {
    let all = ApartmentTemplate::builtins();
    assert_eq!(all.len(), 7);
    for t in &all {
        let classes = t.location_classes();
        for c in ClassName::LOCATIONS {
            assert!(classes.contains(&c), "template {} lacks {c}", t.id);
        }
        let sk = t.skeleton().unwrap();
        assert!(sk.layout().is_connected());
        assert!((4..=8).contains(&sk.rooms().len()));
    }
}

#[test]
fn generated_apartment_has_goal_count_plus_one_and_is_valid() {
    let t = template(1);
    let goal = plates_on_table(&t.skeleton().unwrap(), 2);
    let s = generate_apartment(&t, 7, &goal).unwrap();
    s.check_invariants().unwrap();
    assert!(find(&s, ClassName::Plate).len() >= 3);
    for &o in s.objects() {
        // every object starts inside a closed container
        match s.placement(o) {
            Placement::In(c) => assert!(!s.is_open(c)),
            p => panic!("object {o} starts at {p:?}"),
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let t = template(3);
    let goal = plates_on_table(&t.skeleton().unwrap(), 3);
    let a = generate_apartment(&t, 42, &goal).unwrap();
    let b = generate_apartment(&t, 42, &goal).unwrap();
    assert_eq!(a.to_canonical_json(), b.to_canonical_json());
    let c = generate_apartment(&t, 43, &goal).unwrap();
    assert_ne!(a.to_canonical_json(), c.to_canonical_json());
}

#[test]
fn goal_location_missing_is_unsatisfiable() {
    let mut t = template(1);
    let sk = t.skeleton().unwrap();
    let dw = sk.unique_location(ClassName::Dishwasher).unwrap();
    let goal = GoalSpec::new([(Predicate::at(&sk, ClassName::Plate, dw), 1)]).unwrap();
    t.furniture.retain(|f| f.class != ClassName::Dishwasher);
    t.validate().unwrap();
    let err = generate_apartment(&t, 1, &goal).unwrap_err();
    assert!(matches!(err, WorldError::UnsatisfiableConfig(_)), "{err:?}");
}

#[test]
fn template_validation_rejects_bad_documents() {
    let mut t = template(2);
    t.doors.clear();
    assert!(matches!(t.validate(), Err(WorldError::InvalidTemplate(_))));
    let mut t = template(2);
    t.spawn[0].locations = vec!["kitchentable".into()];
    assert!(t.validate().is_err(), "spawning on a goal location must be rejected");
    assert!(ApartmentTemplate::from_json("{}").is_err());
    let json = template(5).to_json();
    assert_eq!(ApartmentTemplate::from_json(&json).unwrap(), template(5));
}

#[test]
fn hand_capacity_blocks_grab() {
    let t = template(1);
    let goal = plates_on_table(&t.skeleton().unwrap(), 2);
    let mut s = generate_apartment(&t, 3, &goal).unwrap();
    let main = s.main_agent();
    let plates = find(&s, ClassName::Plate);
    let cab = s.placement(plates[0]).location().unwrap();
    s = walk_to(s, main, cab);
    s = step_single(&s, main, &Action::Open { container: cab }).unwrap();
    let in_cab: Vec<EntityId> =
        s.objects().iter().copied().filter(|&o| s.placement(o) == Placement::In(cab)).collect();
    assert!(in_cab.len() >= 3, "seed chosen so the cabinet holds at least three objects");
    s = step_single(&s, main, &Action::Grab { object: in_cab[0] }).unwrap();
    s = step_single(&s, main, &Action::Grab { object: in_cab[1] }).unwrap();
    let legal = legal_actions(&s, main);
    assert!(!legal.iter().any(|a| matches!(a, Action::Grab { .. })));
    assert!(!is_legal(&s, main, &Action::Grab { object: in_cab[2] }));
}

#[test]
fn closed_container_gates_grab() {
    let t = template(1);
    let goal = plates_on_table(&t.skeleton().unwrap(), 1);
    let mut s = generate_apartment(&t, 11, &goal).unwrap();
    let main = s.main_agent();
    let plate = find(&s, ClassName::Plate)[0];
    let cab = s.placement(plate).location().unwrap();
    s = walk_to(s, main, cab);
    let legal = legal_actions(&s, main);
    assert!(legal.contains(&Action::Open { container: cab }));
    assert!(!legal.contains(&Action::Grab { object: plate }));
    s = step_single(&s, main, &Action::Open { container: cab }).unwrap();
    assert!(legal_actions(&s, main).contains(&Action::Grab { object: plate }));
}

#[test]
fn legal_actions_in_empty_hallway_match_definition() {
    let t = template(1);
    let goal = plates_on_table(&t.skeleton().unwrap(), 1);
    // find a seed where the main agent starts alone in the (furniture-free) hallway
    let s = (0..200)
        .map(|seed| generate_apartment(&t, seed, &goal).unwrap())
        .find(|s| {
            let hall = s.room_of(s.main_agent());
            s.class_of(hall) == ClassName::Hallway && s.room_of(s.helper_agent()) != hall
        })
        .expect("some seed starts the main agent alone in the hallway");
    let main = s.main_agent();
    let hall = s.room_of(main);
    // oracle: enumerate the definition directly
    let mut expected = BTreeSet::from([Action::Idle]);
    for &r in s.rooms() {
        if s.layout().adjacent_rooms(hall).contains(&r) {
            expected.insert(Action::MoveToRoom { room: r });
        }
    }
    for e in s.layout().entities() {
        if e.id != main && e.category() != Category::Room && s.room_of(e.id) == hall {
            expected.insert(Action::MoveTo { target: e.id });
        }
    }
    let got: BTreeSet<Action> = legal_actions(&s, main).into_iter().collect();
    assert_eq!(got, expected);
    assert_eq!(got.len(), 1 + 3, "hallway of template 1 has three doors and nothing else");
}

#[test]
fn simultaneous_grab_goes_to_main() {
    let t = template(5);
    let goal = plates_on_table(&t.skeleton().unwrap(), 1);
    let mut s = generate_apartment(&t, 2, &goal).unwrap();
    let (main, helper) = (s.main_agent(), s.helper_agent());
    let apple = find(&s, ClassName::Apple)[0];
    let loc = s.placement(apple).location().unwrap();
    s = walk_to(s, main, loc);
    s = walk_to(s, helper, loc);
    s = step_single(&s, main, &Action::Open { container: loc }).unwrap();
    let grab = Action::Grab { object: apple };
    let (next, outcomes) = step(&s, &grab, &grab);
    assert_eq!(outcomes, [Outcome::Ok, Outcome::Failed]);
    assert_eq!(next.placement(apple), Placement::HeldBy(main));
    next.check_invariants().unwrap();
}

#[test]
fn idle_idle_only_advances_tick() {
    let t = template(2);
    let s = generate_apartment(&t, 9, &plates_on_table(&t.skeleton().unwrap(), 1)).unwrap();
    let (next, outcomes) = step(&s, &Action::Idle, &Action::Idle);
    assert_eq!(outcomes, [Outcome::Ok, Outcome::Ok]);
    assert_eq!(next.tick(), s.tick() + 1);
    assert_eq!(next.edges(), s.edges());
    assert_eq!(next.clone().with_tick(s.tick()), s);
}

#[test]
fn give_transfers_holds_edge() {
    let t = template(5);
    let mut s = generate_apartment(&t, 4, &plates_on_table(&t.skeleton().unwrap(), 1)).unwrap();
    let (main, helper) = (s.main_agent(), s.helper_agent());
    let plate = find(&s, ClassName::Plate)[0];
    let loc = s.placement(plate).location().unwrap();
    s = walk_to(s, helper, loc);
    s = step_single(&s, helper, &Action::Open { container: loc }).unwrap();
    s = step_single(&s, helper, &Action::Grab { object: plate }).unwrap();
    s = walk_to(s, main, loc);
    s = walk_to(s, helper, main);
    let give = Action::Give { object: plate, receiver: main };
    assert!(legal_actions(&s, helper).contains(&give));
    let (next, outcomes) = step(&s, &Action::Idle, &give);
    assert_eq!(outcomes, [Outcome::Ok, Outcome::Ok]);
    assert_eq!(next.placement(plate), Placement::HeldBy(main));
    assert!(next.edges().contains(&Edge(main, Relation::Holds, plate)));
    assert!(!next.edges().contains(&Edge(helper, Relation::Holds, plate)));
    next.check_invariants().unwrap();
}

#[test]
fn state_diff_counts_placement_edges() {
    let t = template(1);
    let s0 = generate_apartment(&t, 5, &plates_on_table(&t.skeleton().unwrap(), 1)).unwrap();
    assert_eq!(state_diff(&s0, &s0).unwrap(), 0);
    let main = s0.main_agent();
    let plate = find(&s0, ClassName::Plate)[0];
    let cab = s0.placement(plate).location().unwrap();
    let mut s = walk_to(s0.clone(), main, cab);
    // moving the agent changes nothing that counts
    assert_eq!(state_diff(&s0, &s).unwrap(), 0);
    s = step_single(&s, main, &Action::Open { container: cab }).unwrap();
    s = step_single(&s, main, &Action::Grab { object: plate }).unwrap();
    // IN edge removed, HOLDS edge added
    assert_eq!(state_diff(&s0, &s).unwrap(), 2);
    let table = s.unique_location(ClassName::Kitchentable).unwrap();
    s = walk_to(s, main, table);
    s = step_single(&s, main, &Action::PutOn { object: plate, surface: table }).unwrap();
    assert_eq!(state_diff(&s0, &s).unwrap(), 2);
    assert_eq!(state_diff(&s, &s0).unwrap(), 2);
    assert_eq!(count_satisfied(&s, &Predicate::at(&s, ClassName::Plate, table)), 1);

    let other = generate_apartment(&template(2), 5, &plates_on_table(&template(2).skeleton().unwrap(), 1)).unwrap();
    assert_eq!(state_diff(&s0, &other), Err(WorldError::IncomparableStates));
}

#[test]
fn grab_then_put_back_restores_placements() {
    let t = template(4);
    let s0 = generate_apartment(&t, 8, &plates_on_table(&t.skeleton().unwrap(), 2)).unwrap();
    let main = s0.main_agent();
    let plate = find(&s0, ClassName::Plate)[0];
    let cab = s0.placement(plate).location().unwrap();
    let mut s = walk_to(s0.clone(), main, cab);
    s = step_single(&s, main, &Action::Open { container: cab }).unwrap();
    let before = s.placement_edges();
    s = step_single(&s, main, &Action::Grab { object: plate }).unwrap();
    s = step_single(&s, main, &Action::PutIn { object: plate, container: cab }).unwrap();
    assert_eq!(s.placement_edges(), before);
}

#[test]
fn canonical_json_round_trips_and_is_sorted() {
    let t = template(7);
    let s = generate_apartment(&t, 1, &plates_on_table(&t.skeleton().unwrap(), 2)).unwrap();
    let json = s.to_canonical_json();
    let back = SceneGraph::from_json(&json).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_canonical_json(), json);
    let doc = s.to_doc();
    assert!(doc.edges.windows(2).all(|w| w[0] < w[1]));
    assert!(doc.entities.windows(2).all(|w| w[0].id < w[1].id));
}

#[test]
fn from_json_rejects_invariant_violations() {
    let t = template(1);
    let s = generate_apartment(&t, 1, &plates_on_table(&t.skeleton().unwrap(), 1)).unwrap();
    let mut doc = s.to_doc();
    let plate = find(&s, ClassName::Plate)[0];
    // second placement edge for the same plate
    let table = s.unique_location(ClassName::Kitchentable).unwrap();
    doc.edges.push(Edge(plate, Relation::On, table));
    assert!(SceneGraph::from_doc(&doc).is_err());

    let mut doc = s.to_doc();
    doc.edges.retain(|e| !(e.0 == plate && e.1 == Relation::InsideRoom));
    assert!(SceneGraph::from_doc(&doc).is_err());

    let mut doc = s.to_doc();
    doc.entities[0].category = Category::Object;
    assert!(SceneGraph::from_doc(&doc).is_err());
}

/// Random joint rollouts over legal actions: every post-state satisfies the
/// invariants and no object is ever held twice.
#[test]
fn random_rollouts_preserve_invariants() {
    let mut total_steps = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (i, t) in ApartmentTemplate::builtins().iter().enumerate() {
        for seed in 0..15u64 {
            let goal = plates_on_table(&t.skeleton().unwrap(), 2);
            let mut s = generate_apartment(t, seed * 31 + i as u64, &goal).unwrap();
            for _ in 0..100 {
                let am = *legal_actions(&s, s.main_agent()).choose(&mut rng).unwrap();
                let ah = *legal_actions(&s, s.helper_agent()).choose(&mut rng).unwrap();
                let (next, outcomes) = step(&s, &am, &ah);
                assert!(outcomes[0].is_ok(), "legal main action must succeed");
                next.check_invariants().unwrap();
                let holds = next.edges().into_iter().filter(|e| e.1 == Relation::Holds).count();
                let held: BTreeSet<EntityId> =
                    next.edges().into_iter().filter(|e| e.1 == Relation::Holds).map(|e| e.2).collect();
                assert_eq!(holds, held.len(), "an object is held twice");
                s = next;
                total_steps += 1;
            }
        }
    }
    assert!(total_steps >= 10_000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_deterministic(seed in 0u64..1000, picks in proptest::collection::vec((0usize..64, 0usize..64), 1..40)) {
        let t = template((seed % 7) as u32 + 1);
        let goal = plates_on_table(&t.skeleton().unwrap(), 1);
        let s0 = generate_apartment(&t, seed, &goal).unwrap();
        let run = || {
            let mut s = s0.clone();
            for &(i, j) in &picks {
                let lm = legal_actions(&s, s.main_agent());
                let lh = legal_actions(&s, s.helper_agent());
                let (next, _) = step(&s, &lm[i % lm.len()], &lh[j % lh.len()]);
                s = next;
            }
            s.to_canonical_json()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn state_diff_is_symmetric(seed in 0u64..500, picks in proptest::collection::vec(0usize..64, 1..30)) {
        let t = template(2);
        let goal = plates_on_table(&t.skeleton().unwrap(), 1);
        let s0 = generate_apartment(&t, seed, &goal).unwrap();
        let mut s = s0.clone();
        for &i in &picks {
            let l = legal_actions(&s, s.main_agent());
            s = step_single(&s, s.main_agent(), &l[i % l.len()]).unwrap();
        }
        prop_assert_eq!(state_diff(&s0, &s).unwrap(), state_diff(&s, &s0).unwrap());
    }
}
