use qeopt::benchmark::{run_experiment, ExperimentSpec};
use qeopt::params::Tables;

fn line_spec(ps: &str, restarts: usize) -> ExperimentSpec {
    ExperimentSpec::from_json(&format!(
        r#"{{
            "id": "line12",
            "instances": [{{"name": "line", "source": {{"from": "generate", "kind": "line", "n": 12, "seed": 3}}}}],
            "ps": {ps},
            "shots": 500,
            "restarts": {restarts},
            "heuristic": {{"max_iters": 60}},
            "seed": 11
        }}"#
    ))
    .unwrap()
}

#[test]
fn one_row_per_depth_and_deterministic() {
    let tables = Tables::bundled().unwrap();
    let spec = line_spec("[1, 2, 3]", 40);
    let a = run_experiment(&spec, &tables).unwrap();
    let csv = a.qfactor_csv();
    assert_eq!(csv.lines().count(), 4, "{csv}");
    assert!(a.cells.iter().all(|c| c.report.error.is_none()));
    let b = run_experiment(&spec, &tables).unwrap();
    assert_eq!(a.files(), b.files());

    let dir = tempfile::tempdir().unwrap();
    a.write(dir.path()).unwrap();
    let on_disk = std::fs::read_to_string(dir.path().join("qfactor.csv")).unwrap();
    assert_eq!(on_disk, csv);
    assert!(dir.path().join("fopt_line_p2_none.csv").exists());
    assert!(dir.path().join("ar_line_p3_none.csv").exists());
}

#[test]
fn approximation_ratio_curves_are_monotone() {
    let tables = Tables::bundled().unwrap();
    let report = run_experiment(&line_spec("[1]", 20), &tables).unwrap();
    for c in &report.cells {
        for curve in [c.ar_cold.as_ref().unwrap(), c.ar_warm.as_ref().unwrap()] {
            assert!(curve.windows(2).all(|w| w[1] >= w[0]));
            assert!(curve.iter().all(|&v| v <= 1.0 + 1e-12));
        }
    }
}

#[test]
fn failing_cells_are_recorded() {
    let tables = Tables::bundled().unwrap();
    let mut spec = line_spec("[1]", 5);
    spec.cap = 10;
    let report = run_experiment(&spec, &tables).unwrap();
    assert_eq!(report.cells.len(), 1);
    assert!(report.cells[0].report.error.is_some());
    assert!(report.qfactor_csv().contains("undefined"));
}
