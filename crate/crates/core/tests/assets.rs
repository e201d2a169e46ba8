//! The shipped models.

use std::path::Path;

use myoforge::geometry::{muscle_lengths, uniform_grid};
use myoforge::model::{load_native_model, parse_reference_model, CompiledModel, ModelDoc};
use myoforge::muscle::passive_force_length;

fn asset(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("assets")
            .join(name),
    )
    .unwrap()
}

fn native(name: &str) -> ModelDoc {
    load_native_model(&asset(name)).unwrap()
}

/// Every posture of a grid with `n` samples per joint.
fn postures(model: &ModelDoc, n: usize) -> Vec<Vec<f64>> {
    let grid = uniform_grid(model, n);
    let mut out = vec![vec![]];
    for g in &grid {
        out = out
            .iter()
            .flat_map(|p| g.iter().map(move |q| [p.clone(), vec![*q]].concat()))
            .collect();
    }
    out
}

#[test]
fn native_elbow_is_the_parsed_reference() {
    let parsed = parse_reference_model(&asset("elbow.osim")).unwrap();
    assert_eq!(parsed.model, native("elbow.json"));
    assert!(
        parsed
            .warnings
            .iter()
            .any(|w| w.contains("CoordinateLimitForce")),
        "{:?}",
        parsed.warnings
    );
}

#[test]
fn assets_are_valid() {
    for name in ["elbow.json", "finger.json"] {
        let m = native(name);
        assert!(m.validate().is_empty(), "{name}: {}", m.validate());
    }
    let elbow = native("elbow.json");
    assert_eq!(elbow.muscles.len(), 6);
    assert_eq!(elbow.markers.len(), 2);
}

#[test]
fn no_passive_force_inside_joint_ranges() {
    for (name, n) in [("elbow.json", 200), ("finger.json", 7)] {
        let m = native(name);
        let c = CompiledModel::new(&m).unwrap();
        for q in postures(&m, n) {
            let lengths = muscle_lengths(&c, &q).unwrap();
            for (spec, l) in m.muscles.iter().zip(lengths) {
                let fp = passive_force_length(l / spec.params.l0, &spec.params);
                assert_eq!(fp, 0.0, "{name} {} at {q:?}", spec.name);
            }
        }
    }
}
