use std::fs;

use destress_core::data::generate_synthetic;
use destress_core::topology::{build_topology, GraphKind, TopologyParams};
use destress_sim::config::{BudgetSpec, ExperimentConfig, HyperparamSpec, TopologySpec};
use destress_sim::io::{load_csv, read_edge_list, read_mixing_csv, write_csv, write_edge_list, CsvOptions};
use destress_sim::trace::{RunTrace, TraceRow};
use destress_sim::SimError;

#[test]
fn two_row_file_with_trailing_label() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    fs::write(&path, "1,0,1\n0,1,0").unwrap();
    let ds = load_csv(&path, CsvOptions::new(2)).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.feature_dim(), 2);
    assert_eq!(ds.get(0).features, vec![1.0, 0.0]);
    assert_eq!(ds.get(0).label, 1.0);
    assert_eq!(ds.get(1).label, 0.0);
}

#[test]
fn header_and_label_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    fs::write(&path, "y,a,b\n1,3,4\n0,6,8\n").unwrap();
    let ds = load_csv(&path, CsvOptions { label_column: 0, header: true, normalize: true }).unwrap();
    assert_eq!(ds.get(0).label, 1.0);
    assert_eq!(ds.get(0).features, vec![0.6, 0.8]);
    assert!(matches!(load_csv(&path, CsvOptions::new(0)), Err(SimError::Parse { line: 1, .. })));
}

#[test]
fn csv_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_csv(dir.path().join("missing.csv"), CsvOptions::new(0)), Err(SimError::Io { .. })));

    let path = dir.path().join("bad.csv");
    fs::write(&path, "1,2,0\n3,four,1\n").unwrap();
    match load_csv(&path, CsvOptions::new(2)) {
        Err(SimError::Parse { line, token }) => {
            assert_eq!(line, 2);
            assert_eq!(token, "four");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }

    fs::write(&path, "1,2,0\n3,1\n").unwrap();
    assert!(matches!(load_csv(&path, CsvOptions::new(2)), Err(SimError::RaggedRow { line: 2, expected: 3, found: 2 })));
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("syn.csv");
    let ds = generate_synthetic(50, 7, 3).unwrap();
    write_csv(&path, &ds).unwrap();
    assert_eq!(load_csv(&path, CsvOptions::new(7)).unwrap(), ds);
}

#[test]
fn edge_list_and_mixing_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = build_topology(GraphKind::ErdosRenyi, 9, TopologyParams::Probability(0.4), 2).unwrap();
    let path = dir.path().join("g.txt");
    write_edge_list(&path, &g).unwrap();
    assert_eq!(read_edge_list(&path).unwrap().edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());

    let w = dir.path().join("w.csv");
    fs::write(&w, "0.5,0.5,0\n0.5,0,0.5\n0,0.5,0.5\n").unwrap();
    let m = read_mixing_csv(&w).unwrap();
    assert_eq!((m.rows(), m.cols()), (3, 3));
    assert_eq!(m[(1, 2)], 0.5);
}

fn sample_config() -> &'static str {
    r#"{
        "algorithm": "destress",
        "agents": 4,
        "topology": { "kind": "grid" },
        "model": { "type": "reg_logistic", "lambda": 0.01 },
        "data": { "type": "synthetic", "samples": 80, "dim": 3, "seed": 1 },
        "hyperparams": "auto",
        "budget": { "max_comm": 100 },
        "seed": 3
    }"#
}

#[test]
fn config_round_trip_is_idempotent() {
    let cfg = ExperimentConfig::from_json(sample_config()).unwrap();
    assert!(cfg.hyperparams.is_auto());
    let once = cfg.to_json();
    let twice = ExperimentConfig::from_json(&once).unwrap().to_json();
    assert_eq!(once, twice);
    assert!(once.contains("\"hyperparams\": \"auto\""));

    let mut explicit = cfg.clone();
    explicit.hyperparams = HyperparamSpec { eta: Some(0.5), k_in: Some(3), ..Default::default() };
    let text = explicit.to_json();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), explicit);
}

#[test]
fn config_validation() {
    let mut cfg = ExperimentConfig::from_json(sample_config()).unwrap();
    cfg.validate().unwrap();

    cfg.budget = BudgetSpec { max_comm: Some(10), max_outer: Some(2), ..Default::default() };
    assert!(matches!(cfg.validate(), Err(SimError::ConfigInvalid(_))));
    cfg.budget = BudgetSpec::default();
    assert!(matches!(cfg.validate(), Err(SimError::ConfigInvalid(_))));
    cfg.budget = BudgetSpec::comm(10);

    cfg.topology = TopologySpec::Grid { rows: Some(2), cols: None };
    cfg.agents = 5;
    assert!(matches!(cfg.validate(), Err(SimError::ConfigInvalid(_))));
    cfg.topology = TopologySpec::Grid { rows: None, cols: None };
    cfg.validate().unwrap();

    let missing = sample_config().replace(
        r#""type": "synthetic", "samples": 80, "dim": 3, "seed": 1"#,
        r#""type": "csv", "path": "/nonexistent/data.csv", "label_col": 0"#,
    );
    let cfg = ExperimentConfig::from_json(&missing).unwrap();
    assert!(matches!(cfg.validate(), Err(SimError::ConfigInvalid(m)) if m.contains("not found")));

    let unknown = sample_config().replace(r#""seed": 3"#, r#""seed": 3, "sede": 4"#);
    assert!(matches!(ExperimentConfig::from_json(&unknown), Err(SimError::ConfigInvalid(_))));
    let keyword = sample_config().replace(r#""auto""#, r#""automatic""#);
    assert!(matches!(ExperimentConfig::from_json(&keyword), Err(SimError::ConfigInvalid(_))));
}

#[test]
fn config_paths_resolve_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "0,1\n1,0\n0,1\n1,1\n").unwrap();
    let text = sample_config().replace(
        r#""type": "synthetic", "samples": 80, "dim": 3, "seed": 1"#,
        r#""type": "csv", "path": "d.csv", "label_col": 1"#,
    );
    let path = dir.path().join("cfg.json");
    fs::write(&path, text).unwrap();
    ExperimentConfig::load(&path).unwrap().validate().unwrap();
}

#[test]
fn trace_csv_round_trip() {
    let trace = RunTrace {
        rows: vec![
            TraceRow {
                outer_t: 0,
                inner_s: 0,
                comm_rounds: 0,
                ifo_strict: 10,
                ifo_paper: 10,
                train_loss: std::f64::consts::LN_2,
                grad_norm_sq: 1.25e-7,
                consensus_err: 0.0,
                test_acc: None,
            },
            TraceRow {
                outer_t: 1,
                inner_s: 4,
                comm_rounds: 9,
                ifo_strict: 46,
                ifo_paper: 38,
                train_loss: 0.5,
                grad_norm_sq: 3.0e-21,
                consensus_err: 1e20,
                test_acc: Some(0.75),
            },
        ],
    };
    let text = trace.to_csv();
    assert!(text.starts_with("# schema=1\nouter_t,inner_s,comm_rounds,ifo_strict,ifo_paper,train_loss,grad_norm_sq,consensus_err,test_acc\n"));
    assert!(text.lines().nth(2).unwrap().ends_with(','));
    assert_eq!(RunTrace::parse_csv(&text).unwrap(), trace);
}
