use std::path::Path;

use flowfit::demand::DemandStratum;
use flowfit::io::{export_model, load_model};
use flowfit::network::validate;
use flowfit::synthetic::{regional_model, toy_model, RegionalConfig};

fn bundled() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/model.toml")
}

#[test]
fn bundled_toy_loads_clean_and_matches_generator() {
    let loaded = load_model(&bundled()).unwrap();
    assert!(validate(&loaded.network).is_empty());
    assert_eq!(loaded.zones.len(), 8);
    let generated = toy_model(0.0, 0).unwrap();
    assert_eq!(loaded.zones, generated.zones);
    assert_eq!(loaded.network, generated.network);
    assert_eq!(loaded.counts, generated.counts);
    assert_eq!(loaded.strata, generated.strata);
    assert_eq!(loaded.assignment, generated.assignment);
    assert_eq!(loaded.scenarios.len(), 1);
}

#[test]
fn load_export_load_is_identity() {
    let original = load_model(&bundled()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let again = load_model(&export_model(&original, dir.path()).unwrap()).unwrap();
    assert_eq!(again, original);
}

#[test]
fn regional_model_with_derived_jobs_round_trips() {
    let truth = [DemandStratum::new("pop-jobs", "population", "jobs", 0.9, 0.06)];
    let cfg = RegionalConfig {
        n_counts: 40,
        ..RegionalConfig::default()
    };
    let model = regional_model(&cfg, &truth, &truth).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let loaded = load_model(&export_model(&model, dir.path()).unwrap()).unwrap();
    assert_eq!(loaded, model);
    let dir2 = tempfile::tempdir().unwrap();
    let spec2 = export_model(&loaded, dir2.path()).unwrap();
    for f in ["model.toml", "zones.csv", "nodes.csv", "links.csv", "counts.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(spec2.parent().unwrap().join(f)).unwrap(),
            "{f}"
        );
    }
}
