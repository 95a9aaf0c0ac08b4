use super::*;
use crate::episode::{run_episode, Episode, EpisodeSpec, PlannerMain, T_MAX};
use crate::testutil::*;
use crate::worldsim::{ClassName::*, EntityId};

fn joint(spec: &HelperSpec, s0: &SceneGraph, goal: &GoalSpec, seed: u64, res: &HelperResources) -> crate::episode::EpisodeRecord {
    let helper = build_helper(spec, s0, goal, seed, res).unwrap();
    let ep = EpisodeSpec { episode: "b".into(), template: 6, seed, goal: goal.clone(), s0: s0.clone() };
    run_episode(Episode::new(ep, &spec.to_string(), helper, T_MAX), &mut PlannerMain)
}

fn resources(s0: &SceneGraph) -> HelperResources {
    let rows = PredicateVocabulary::for_scene(s0).len();
    let gpn = Arc::new(GpnParams::init(rows, crate::gpn::EMBED_DIM, crate::gpn::HIDDEN_DIM, 0));
    HelperResources { gpn_large: Some(gpn.clone()), gpn_small: Some(gpn), ..Default::default() }
}

#[test]
fn spec_strings_round_trip() {
    for s in [
        "none",
        "nopa",
        "hp_gt",
        "hp_gpn",
        "af_gpn",
        "empowerment",
        "hp_rg",
        "nopa,no_inverse_planning",
        "nopa,random_proposals,no_return",
        "nopa,no_return,gpn=small",
        "hp_gpn,gpn=small",
    ] {
        let spec: HelperSpec = s.parse().unwrap();
        assert_eq!(spec.to_string(), s);
    }
    assert_eq!("nopa, gpn=large".parse::<HelperSpec>().unwrap(), HelperSpec::new(HelperKind::Nopa));
}

#[test]
fn bad_spec_strings_are_rejected() {
    assert!(matches!("oracle".parse::<HelperSpec>(), Err(BaselineError::UnknownSpec(_))));
    assert!(matches!("nopa,fast".parse::<HelperSpec>(), Err(BaselineError::UnknownSpec(_))));
    assert_eq!("hp_gt,no_return".parse::<HelperSpec>(), Err(BaselineError::AblationWithoutNopa));
    let a = Ablations { no_return: true, ..Ablations::default() };
    assert!(HelperSpec::with_ablations(HelperKind::Empowerment, a).is_err());
    assert!(HelperSpec::with_ablations(HelperKind::Nopa, a).is_ok());
}

#[test]
fn gpn_requirements() {
    assert!(HelperSpec::new(HelperKind::Nopa).needs_gpn());
    assert!(!"nopa,random_proposals".parse::<HelperSpec>().unwrap().needs_gpn());
    assert!(!HelperSpec::new(HelperKind::HpGt).needs_gpn());
    let (s0, goal) = apartment(6, 1, &[(Plate, Kitchentable, 1)]);
    let err = build_helper(&HelperSpec::new(HelperKind::HpGpn), &s0, &goal, 0, &HelperResources::default()).err();
    assert_eq!(err, Some(BaselineError::MissingGpn("hp_gpn".into())));
}

#[test]
fn modal_action_breaks_ties_towards_the_smallest_action() {
    let (a, b) = (Action::Grab { object: EntityId(9) }, Action::Grab { object: EntityId(4) });
    assert_eq!(modal_action([a, b]), Some(b.min(a)));
    assert_eq!(modal_action([a, b, a]), Some(a));
    assert_eq!(modal_action(std::iter::empty()), None);
}

#[test]
fn oracle_helper_shortens_the_episode() {
    let (s0, goal) = apartment(6, 2, &[(Plate, Kitchentable, 3), (Fork, Kitchentable, 3)]);
    let res = HelperResources::default();
    let solo = joint(&HelperSpec::new(HelperKind::None), &s0, &goal, 0, &res);
    let helped = joint(&HelperSpec::new(HelperKind::HpGt), &s0, &goal, 0, &res);
    let (l_m, l_h) = (solo.outcome.unwrap(), helped.outcome.unwrap());
    assert!(l_m.satisfied && l_h.satisfied);
    assert!(l_h.length < l_m.length, "{} vs {}", l_h.length, l_m.length);
    assert!(helped.ticks.iter().all(|t| t.f1 == Some(1.0)));
}

#[test]
fn every_helper_runs_and_is_deterministic() {
    let (s0, goal) = apartment(7, 3, &[(Cupcake, Fridge, 1), (Plate, Kitchentable, 1)]);
    let res = resources(&s0);
    for kind in HelperKind::ALL {
        let spec = HelperSpec::new(kind);
        let a = joint(&spec, &s0, &goal, 5, &res);
        let b = joint(&spec, &s0, &goal, 5, &res);
        assert_eq!(a, b, "{spec}");
        assert!(a.outcome.is_some());
        a.replay().unwrap();
    }
}

#[test]
fn trajectory_subgoals_cover_the_next_placement() {
    let (s0, goal) = apartment(6, 4, &[(Plate, Kitchentable, 2)]);
    let subs = trajectory_subgoals(&s0, &goal);
    let pred = goal.predicates().next().copied().unwrap();
    assert!(subs.iter().any(|(k, _)| *k == SubgoalKey::Place { pred, level: 1 }));
    assert!(subs.iter().any(|(k, _)| matches!(k, SubgoalKey::MainHolds { class: Plate, level: 1 })));
}
