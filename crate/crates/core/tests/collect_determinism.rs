use tactigrasp_core::dataset::{collect, to_bytes, CollectConfig, DataError};
use tactigrasp_core::grasping::DiscardReason;
use tactigrasp_core::geometry::{make_primitive, Primitive};
use tactigrasp_core::grasping::{ObjectModel, SimConfig};

fn object(id: &str, kind: Primitive, scale: f64) -> ObjectModel {
    let mesh = make_primitive(&kind, 32).unwrap();
    ObjectModel::new(id, &mesh, scale, 500.0).unwrap()
}

fn corpus() -> Vec<ObjectModel> {
    vec![
        object("box", Primitive::Box { x: 0.05, y: 0.04, z: 0.06 }, 0.8),
        object("cyl", Primitive::Cylinder { radius: 0.025, height: 0.08 }, 0.7),
    ]
}

#[test]
fn fifty_samples_are_byte_identical_across_runs_and_workers() {
    let sim = SimConfig::default();
    let cc = CollectConfig { n_target: 50, seed: 11, workers: 1, ..CollectConfig::default() };
    let a = collect(&corpus(), &sim, &cc).unwrap();
    let b = collect(&corpus(), &sim, &cc).unwrap();
    let c = collect(&corpus(), &sim, &CollectConfig { workers: 3, ..cc }).unwrap();
    assert_eq!(a.len(), 50);
    let bytes = to_bytes(&a).unwrap();
    assert_eq!(bytes, to_bytes(&b).unwrap());
    assert_eq!(bytes, to_bytes(&c).unwrap());
    // a different seed gives a different corpus
    let d = collect(&corpus(), &sim, &CollectConfig { seed: 12, ..cc }).unwrap();
    assert_ne!(bytes, to_bytes(&d).unwrap());
}

#[test]
fn object_too_small_to_touch_spends_its_budget_on_discards() {
    let sim = SimConfig::default();
    let speck = object("speck", Primitive::Sphere { radius: 0.001 }, 1.0);
    let cc = CollectConfig { n_target: 10, seed: 3, budget_factor: 4, ..CollectConfig::default() };

    let mut objects = corpus();
    objects.truncate(1);
    objects.push(speck.clone());
    let ds = collect(&objects, &sim, &cc).unwrap();
    assert_eq!(ds.len(), 10);
    assert!(ds.samples.iter().all(|s| s.object_id == "box"));
    let t = &ds.telemetry.per_object["speck"];
    assert_eq!(t.recorded, 0);
    assert_eq!(t.attempts, 4 * 5);
    assert_eq!(t.discarded(), t.attempts);
    let by_reason = ds.telemetry.discarded_by_reason();
    assert_eq!(by_reason.values().sum::<u64>(), ds.telemetry.attempts_total() - 10);
    assert_eq!(t.no_grasp + t.no_contact + t.invalid_tactile, t.attempts);
    assert!(by_reason.keys().all(|r| matches!(r, DiscardReason::NoGrasp | DiscardReason::NoContact | DiscardReason::InvalidTactile)));

    let alone = collect(&[speck], &sim, &cc);
    assert!(matches!(alone, Err(DataError::BudgetExhausted { collected: 0, target: 10 })));
}
