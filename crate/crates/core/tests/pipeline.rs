//! End-to-end use of the public API: data generation, network training,
//! helped evaluation and record replay.

use std::sync::Arc;

use owah::baselines::{HelperKind, HelperResources, HelperSpec};
use owah::bench::{compute_speedup, generate_dataset, run_eval_with_records, Dataset, DatasetManifest, EvalConfig, EvalReport, Split};
use owah::episode::EpisodeRecord;
use owah::goals::is_satisfied;
use owah::gpn::{train_gpn, GpnParams, TrainConfig};
use owah::worldsim::SceneGraph;

fn trained(train: &Dataset) -> Arc<GpnParams> {
    let cfg = TrainConfig { epochs: 3, batch_size: 64, ..TrainConfig::default() };
    Arc::new(train_gpn(&train.gpn_examples().unwrap(), 16, 16, &cfg).unwrap().params)
}

#[test]
fn helped_episodes_replay_and_agree_with_the_report() {
    let train = generate_dataset(&DatasetManifest::new(Split::TrainSmall, 12, 3)).unwrap();
    let test = generate_dataset(&DatasetManifest::new(Split::Test, 3, 3)).unwrap();
    let gpn = trained(&train);
    let cfg = EvalConfig {
        runs: 2,
        seed: 1,
        resources: HelperResources { gpn_large: Some(gpn), ..Default::default() },
        ..Default::default()
    };
    let spec = HelperSpec::new(HelperKind::Nopa);
    let (report, records) = run_eval_with_records(&test, &spec, &cfg).unwrap();
    assert_eq!(records.len(), 6);
    assert_eq!(report.episodes.len(), 6);
    assert!(report.check_speedups());

    for (run, rec) in report.episodes.iter().zip(&records) {
        assert_eq!(run.episode, rec.header.episode);
        let text = rec.to_jsonl();
        let back = EpisodeRecord::from_jsonl(&text).unwrap();
        let last = back.replay().unwrap();
        assert_eq!(last.state_hash(), rec.ticks.last().unwrap().s_hash);
        if run.satisfied {
            assert!(is_satisfied(&last, &rec.header.goal));
            assert_eq!(run.speedup, compute_speedup(run.l_m, run.l_h).unwrap());
        }
        assert_eq!(run.f1.len(), rec.len());
    }

    let again = EvalReport::from_json(&report.to_json()).unwrap();
    assert_eq!(again.to_json(), report.to_json());
}

#[test]
fn datasets_survive_serialization_and_reproduce_their_trajectories() {
    let data = generate_dataset(&DatasetManifest::new(Split::Test, 4, 9)).unwrap();
    let back = Dataset::from_json(&data.to_json()).unwrap();
    assert_eq!(back, data);
    for ep in &back.episodes {
        let s0: SceneGraph = ep.initial_state().unwrap();
        let states = ep.states().unwrap();
        assert_eq!(states.len(), ep.actions.len());
        assert_eq!(states[0].state_hash(), s0.state_hash());
        assert!(!ep.incomplete);
    }
    assert_eq!(back.gpn_examples().unwrap().len(), back.total_steps());
}

#[test]
fn helpers_that_need_a_network_refuse_to_run_without_one() {
    let test = generate_dataset(&DatasetManifest::new(Split::Test, 1, 0)).unwrap();
    for name in ["nopa", "hp_gpn", "af_gpn"] {
        let spec: HelperSpec = name.parse().unwrap();
        assert!(run_eval_with_records(&test, &spec, &EvalConfig::default()).is_err(), "{name}");
    }
    let uniform: HelperSpec = "nopa,random_proposals".parse().unwrap();
    let cfg = EvalConfig { runs: 1, ..Default::default() };
    assert!(run_eval_with_records(&test, &uniform, &cfg).is_ok());
}
