use std::fs;
use std::process::Command;

use destress_sim::config::{
    Algorithm, BudgetSpec, DataSpec, EvalSpec, ExperimentConfig, HyperparamSpec, InitSpec, MixingSource, MixingSpec,
    ModelSpec, TopologySpec,
};
use destress_sim::harness::{check_mixing, compare_suite, AlgorithmParams, MatchedBudget, Setup};
use destress_sim::{run_experiment, RunTrace, SimError};

fn config(algorithm: Algorithm, topology: TopologySpec, budget: BudgetSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: None,
        algorithm,
        agents: 20,
        topology,
        mixing: MixingSpec::default(),
        model: ModelSpec::RegLogistic { lambda: 0.01 },
        data: DataSpec::Synthetic { samples: 1000, dim: 10, seed: 1 },
        hyperparams: HyperparamSpec::default(),
        budget,
        seed: 9,
        trace: None,
        eval: EvalSpec::default(),
        init: InitSpec::Zero,
    }
}

#[test]
fn destress_trace_counters_follow_closed_form() {
    let cfg = config(Algorithm::Destress, TopologySpec::Path, BudgetSpec::outer(5));
    let setup = Setup::new(&cfg).unwrap();
    let AlgorithmParams::Destress(h) = setup.params() else { panic!() };
    let trace = setup.run().unwrap().trace;
    let outer: Vec<usize> = trace.rows.iter().map(|r| r.outer_t).collect();
    assert_eq!(outer, vec![0, 1, 2, 3, 4, 5]);
    let last = trace.last().unwrap();
    assert_eq!(last.comm_rounds, 5 * (h.s_inner * h.k_in + h.k_out) as u64);
    let (m, b, s) = (50u64, h.batch as u64, h.s_inner as u64);
    assert_eq!(last.ifo_strict, m + 5 * (m + 2 * s * b));
    assert_eq!(last.ifo_paper, m + 5 * (s * b + 2 * m));
    for w in trace.rows.windows(2) {
        assert!(w[1].comm_rounds >= w[0].comm_rounds && w[1].ifo_strict >= w[0].ifo_strict);
    }
    assert!(trace.rows.iter().all(|r| r.train_loss.is_finite() && r.grad_norm_sq.is_finite() && r.test_acc.is_none()));
}

#[test]
fn dsgd_comm_budget_is_exact() {
    let mut cfg = config(Algorithm::Dsgd, TopologySpec::ErdosRenyi { p: 0.3, seed: None }, BudgetSpec::comm(100));
    cfg.eval.eval_every = Some(7);
    let trace = run_experiment(&cfg).unwrap();
    assert_eq!(trace.last().unwrap().comm_rounds, 100);
    assert_eq!(trace.rows.len(), 1 + 14 + 1);
}

#[test]
fn gtsarah_rounds_and_accuracy_column() {
    let mut cfg = config(Algorithm::GtSarah, TopologySpec::Complete, BudgetSpec::outer(12));
    cfg.hyperparams = HyperparamSpec { eta: Some(0.5), batch: Some(4), q: Some(3), ..Default::default() };
    cfg.eval.holdout_frac = 0.2;
    let trace = run_experiment(&cfg).unwrap();
    let last = trace.last().unwrap();
    assert_eq!(last.comm_rounds, 24);
    // 40 samples per agent after the holdout: the initial gradient, refreshes at t = 3, 6, 9, 12, and 8 mini-batch pairs
    assert_eq!(last.ifo_strict, 5 * 40 + 8 * 8);
    assert!(trace.rows.iter().all(|r| r.test_acc.is_some_and(|a| (0.0..=1.0).contains(&a))));
}

#[test]
fn identical_configs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Algorithm::Destress, TopologySpec::Grid { rows: None, cols: None }, BudgetSpec::outer(3));
    cfg.init = InitSpec::Gaussian { scale: 0.1 };
    let mut files = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("t{k}.csv"));
        cfg.trace = Some(path.clone());
        run_experiment(&cfg).unwrap();
        files.push(fs::read(path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    // the temporary file is renamed away
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn trace_write_into_missing_directory_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Algorithm::Dsgd, TopologySpec::Path, BudgetSpec::comm(5));
    cfg.trace = Some(dir.path().join("missing").join("t.csv"));
    assert!(matches!(run_experiment(&cfg), Err(SimError::Io { .. })));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn compare_suite_reports_last_row_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs: Vec<_> = [Algorithm::Destress, Algorithm::GtSarah, Algorithm::Dsgd]
        .into_iter()
        .map(|a| {
            let mut c = config(a, TopologySpec::Grid { rows: None, cols: None }, BudgetSpec::outer(1));
            c.hyperparams.eta = Some(0.5);
            c.trace = Some(dir.path().join(format!("{}.csv", a.name())));
            c
        })
        .collect();
    let rows = compare_suite(&cfgs, MatchedBudget::Comm(1000)).unwrap();
    assert_eq!(rows.len(), 3);
    for (row, cfg) in rows.iter().zip(&cfgs) {
        let trace = RunTrace::parse_csv(&fs::read_to_string(cfg.trace.as_ref().unwrap()).unwrap()).unwrap();
        let expected = trace.rows.iter().rfind(|r| r.comm_rounds <= 1000).unwrap();
        assert_eq!(row.grad_norm_sq, expected.grad_norm_sq);
        assert_eq!(row.comm_rounds, expected.comm_rounds);
        assert!(row.comm_rounds <= 1000);
    }
    assert_eq!(MatchedBudget::parse("ifo=20").unwrap(), MatchedBudget::Ifo(20));
    assert!(MatchedBudget::parse("rounds=20").is_err());
}

#[test]
fn mixing_reports() {
    let complete = check_mixing(&TopologySpec::Complete, 20, &MixingSource::Metropolis, 0).unwrap();
    assert!(complete.alpha.abs() <= 1e-12);
    let path3 = check_mixing(&TopologySpec::Path, 3, &MixingSource::Metropolis, 0).unwrap();
    assert!((path3.alpha - 2.0 / 3.0).abs() <= 1e-10);
    assert_eq!(path3.table2_class, "1/n^2");
    let gaps: Vec<f64> =
        [10, 20, 40].iter().map(|&n| check_mixing(&TopologySpec::Path, n, &MixingSource::Metropolis, 0).unwrap().spectral_gap).collect();
    for r in [gaps[1] / gaps[0], gaps[2] / gaps[1]] {
        assert!((0.15..=0.40).contains(&r), "{r}");
    }
}

#[test]
fn external_mixing_must_conform_to_graph() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.csv");
    // complete-graph weights on a path with 3 nodes: entry (0, 2) has no edge
    fs::write(&w, "0.34,0.33,0.33\n0.33,0.34,0.33\n0.33,0.33,0.34\n").unwrap();
    let source = MixingSource::Csv { path: w };
    assert!(matches!(check_mixing(&TopologySpec::Path, 3, &source, 0), Err(SimError::Core(_))));
    check_mixing(&TopologySpec::Complete, 3, &source, 0).unwrap();
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_destress-sim"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let mut cfg = config(Algorithm::Dsgd, TopologySpec::Path, BudgetSpec::comm(20));
    cfg.agents = 4;
    cfg.data = DataSpec::Synthetic { samples: 40, dim: 3, seed: 1 };
    fs::write(&good, cfg.to_json()).unwrap();
    let out = cli().args(["run", "--config"]).arg(&good).arg("--print-config").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = ExperimentConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(printed.hyperparams.eta, Some(1.0));
    assert_eq!(printed.eval.eval_every, Some(10));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{ "algorithm": "destress" }"#).unwrap();
    assert_eq!(cli().args(["run", "--config"]).arg(&bad).output().unwrap().status.code(), Some(2));

    let mut diverging = config(Algorithm::GtSarah, TopologySpec::Path, BudgetSpec::outer(200));
    diverging.agents = 4;
    diverging.model = ModelSpec::Mlp { hidden: 4, classes: 2, smoothness: None };
    diverging.data = DataSpec::Synthetic { samples: 200, dim: 5, seed: 1 };
    diverging.hyperparams = HyperparamSpec { eta: Some(1e308), batch: Some(2), q: Some(5), ..Default::default() };
    diverging.init = InitSpec::Gaussian { scale: 1.0 };
    let path = dir.path().join("diverge.json");
    fs::write(&path, diverging.to_json()).unwrap();
    assert_eq!(cli().args(["run", "--config"]).arg(&path).output().unwrap().status.code(), Some(3));

    let threads = cli().args(["run", "--config"]).arg(&good).env("DESTRESS_SIM_THREADS", "zero").output().unwrap().status;
    assert_eq!(threads.code(), Some(2));
}

#[test]
fn cli_diagnostics() {
    let out = cli().args(["check-mixing", "--topology", "path", "--n", "3"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("alpha = 0.666666666666"));
    assert!(text.contains("gap_class = 1/n^2"));

    let out = cli().args(["gradcheck", "--model", "mlp:hidden=6,classes=3", "--dim", "4"]).output().unwrap();
    assert!(out.status.success());
    let out = cli().args(["gradcheck", "--model", "svm"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
