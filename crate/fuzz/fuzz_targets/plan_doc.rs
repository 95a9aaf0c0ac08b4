#![no_main]

use std::sync::LazyLock;

use libfuzzer_sys::fuzz_target;
use owah::goals::{GoalSpec, Predicate};
use owah::planner::PlanDoc;
use owah::worldsim::{generate_apartment, ApartmentTemplate, ClassName, SceneGraph};

static ORIGIN: LazyLock<SceneGraph> = LazyLock::new(|| {
    let template = ApartmentTemplate::builtin(6).unwrap();
    let skeleton = template.skeleton().unwrap();
    let table = skeleton.unique_location(ClassName::Kitchentable).unwrap();
    let goal = GoalSpec::new([(Predicate::at(&skeleton, ClassName::Plate, table), 2)]).unwrap();
    generate_apartment(&template, 0, &goal).unwrap()
});

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<PlanDoc>(data) else { return };
    if let Ok(plan) = doc.replay(&ORIGIN) {
        assert_eq!(plan.len(), doc.actions.len());
        plan.verify().expect("replayed plans verify");
    }
});
