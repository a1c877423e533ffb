//! Wires topology, mixing, data and model into a run and records its trace.

use std::path::Path;

use destress_core::algorithms::{
    derive_hyperparams, destress_run, dsgd_run, global_grad_norm_sq, gt_sarah_run, validate_step_size, Counters,
    GtSarahParams, Hyperparams, Phase, Problem, RunOptions, RunOutput, StepEvent, StepSchedule,
};
use destress_core::data::{generate_synthetic, partition_uniform, Dataset, Partition};
use destress_core::mixing::{metropolis_weights, Construction, MixingMatrix};
use destress_core::model::{max_gradient_error, LossModel, MlpModel, RegLogisticModel, Sample};
use destress_core::rng::gaussian_vector;
use destress_core::topology::{build_topology, squarest_grid, Graph, GraphKind, TopologyParams};
use destress_core::Mat;

use crate::config::{
    Algorithm, BudgetSpec, DataSpec, ExperimentConfig, HyperparamSpec, InitSpec, MixingSource, ModelSpec,
    TopologySpec,
};
use crate::error::{Result, SimError};
use crate::io::{load_csv, read_edge_list, read_mixing_csv, write_atomic, CsvOptions};
use crate::trace::{fmt_float, RunTrace, TraceRow};

/// Trace-row spacing for DSGD when the config leaves it out.
pub const DSGD_EVAL_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlgorithmParams {
    Destress(Hyperparams),
    GtSarah(GtSarahParams),
    Dsgd(StepSchedule),
}

/// Everything a run needs, built from a validated config.
pub struct Setup {
    cfg: ExperimentConfig,
    model: Box<dyn LossModel>,
    train: Dataset,
    test: Option<Dataset>,
    partition: Partition,
    graph: Graph,
    mixing: MixingMatrix,
    params: AlgorithmParams,
    x0: Vec<f64>,
    eval_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trace: RunTrace,
    pub output: Vec<f64>,
    pub counters: Counters,
    pub outer_iterations: usize,
}

pub fn build_graph(spec: &TopologySpec, n: usize, default_seed: u64) -> Result<Graph> {
    let g = match spec {
        TopologySpec::Complete => build_topology(GraphKind::Complete, n, TopologyParams::None, 0)?,
        TopologySpec::Path => build_topology(GraphKind::Path, n, TopologyParams::None, 0)?,
        TopologySpec::Grid { .. } => {
            let (rows, cols) = grid_shape(spec, n);
            build_topology(GraphKind::Grid2D, n, TopologyParams::Grid { rows, cols }, 0)?
        }
        TopologySpec::ErdosRenyi { p, seed } => {
            build_topology(GraphKind::ErdosRenyi, n, TopologyParams::Probability(*p), seed.unwrap_or(default_seed))?
        }
        TopologySpec::EdgeList { path } => {
            let g = read_edge_list(path)?;
            if g.n() != n {
                return Err(SimError::ConfigInvalid(format!("edge list has {} nodes, config has {n} agents", g.n())));
            }
            if !destress_core::topology::is_connected(&g) {
                return Err(destress_core::Error::NotConnected.into());
            }
            g
        }
    };
    Ok(g)
}

fn grid_shape(spec: &TopologySpec, n: usize) -> (usize, usize) {
    match spec {
        TopologySpec::Grid { rows: Some(r), cols: Some(c) } => (*r, *c),
        TopologySpec::Grid { rows: Some(r), cols: None } => (*r, n / r),
        TopologySpec::Grid { rows: None, cols: Some(c) } => (n / c, *c),
        _ => squarest_grid(n),
    }
}

pub fn build_mixing(source: &MixingSource, graph: &Graph) -> Result<MixingMatrix> {
    match source {
        MixingSource::Metropolis => Ok(metropolis_weights(graph)?),
        MixingSource::Csv { path } => Ok(MixingMatrix::from_dense(read_mixing_csv(path)?, Some(graph), Construction::External)?),
    }
}

fn load_data(spec: &DataSpec) -> Result<Dataset> {
    match spec {
        DataSpec::Synthetic { samples, dim, seed } => Ok(generate_synthetic(*samples, *dim, *seed)?),
        DataSpec::Csv { path, label_col, header, normalize } => {
            load_csv(path, CsvOptions { label_column: *label_col, header: *header, normalize: *normalize })
        }
    }
}

fn build_model(spec: &ModelSpec, train: &Dataset) -> Result<Box<dyn LossModel>> {
    let d = train.feature_dim();
    match *spec {
        ModelSpec::RegLogistic { lambda } => {
            if let Some(s) = train.samples().iter().find(|s| s.label != 0.0 && s.label != 1.0) {
                return Err(SimError::ConfigInvalid(format!("logistic labels must be 0 or 1, found {}", s.label)));
            }
            Ok(Box::new(RegLogisticModel::new(d, lambda)?.with_max_feature_norm_sq(train.max_feature_norm_sq())))
        }
        ModelSpec::Mlp { hidden, classes, smoothness } => {
            if let Some(s) = train.samples().iter().find(|s| s.label.fract() != 0.0 || s.label < 0.0 || s.label >= classes as f64) {
                return Err(SimError::ConfigInvalid(format!("mlp labels must be class indices below {classes}, found {}", s.label)));
            }
            let mut m = MlpModel::new(d, hidden, classes)?;
            if let Some(l) = smoothness {
                m = m.with_smoothness(l);
            }
            Ok(Box::new(m))
        }
    }
}

fn resolve_params(
    cfg: &ExperimentConfig,
    m: usize,
    n: usize,
    alpha: f64,
    smoothness: f64,
) -> Result<(AlgorithmParams, HyperparamSpec)> {
    let h = cfg.hyperparams;
    let derived = derive_hyperparams(m, n, alpha, smoothness)?;
    let sampling = h.sampling.unwrap_or_default();
    let params = match cfg.algorithm {
        Algorithm::Destress => AlgorithmParams::Destress(Hyperparams {
            eta: h.eta.unwrap_or(derived.eta),
            s_inner: h.s_inner.unwrap_or(derived.s_inner),
            batch: h.batch.unwrap_or(derived.batch),
            k_in: h.k_in.unwrap_or(derived.k_in),
            k_out: h.k_out.unwrap_or(derived.k_out),
            accelerated: cfg.mixing.accelerated,
            sampling: sampling.into(),
        }),
        Algorithm::GtSarah => AlgorithmParams::GtSarah(GtSarahParams {
            eta: h.eta.unwrap_or(derived.eta),
            batch: h.batch.unwrap_or(derived.batch),
            q: h.q.unwrap_or(derived.s_inner),
            sampling: sampling.into(),
        }),
        Algorithm::Dsgd => AlgorithmParams::Dsgd(StepSchedule { eta0: h.eta.unwrap_or(1.0), tau: h.tau }),
    };
    let resolved = match params {
        AlgorithmParams::Destress(p) => HyperparamSpec {
            eta: Some(p.eta),
            s_inner: Some(p.s_inner),
            batch: Some(p.batch),
            k_in: Some(p.k_in),
            k_out: Some(p.k_out),
            sampling: Some(sampling),
            ..HyperparamSpec::default()
        },
        AlgorithmParams::GtSarah(p) => HyperparamSpec {
            eta: Some(p.eta),
            batch: Some(p.batch),
            q: Some(p.q),
            sampling: Some(sampling),
            ..HyperparamSpec::default()
        },
        AlgorithmParams::Dsgd(s) => HyperparamSpec { eta: Some(s.eta0), tau: s.tau, ..HyperparamSpec::default() },
    };
    Ok((params, resolved))
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.agents;
        let graph = build_graph(&cfg.topology, n, cfg.seed)?;
        let mixing = build_mixing(&cfg.mixing.source, &graph)?;
        if cfg.algorithm == Algorithm::Destress && cfg.mixing.accelerated && !mixing.is_symmetric() {
            return Err(SimError::ConfigInvalid("accelerated mixing needs a symmetric mixing matrix".into()));
        }

        let data = load_data(&cfg.data)?;
        let (train, test) = if cfg.eval.holdout_frac > 0.0 {
            let (tr, te) = data.split_holdout(cfg.eval.holdout_frac, cfg.seed)?;
            (tr, Some(te))
        } else {
            (data, None)
        };
        let partition = partition_uniform(&train, n, cfg.seed)?;
        let model = build_model(&cfg.model, &train)?;
        let (params, resolved_h) = resolve_params(cfg, partition.m(), n, mixing.alpha(), model.smoothness_hint())?;
        let eval_every = cfg.eval.eval_every.unwrap_or(match params {
            AlgorithmParams::Destress(h) => h.s_inner,
            AlgorithmParams::GtSarah(p) => p.q,
            AlgorithmParams::Dsgd(_) => DSGD_EVAL_EVERY,
        });
        let x0 = match cfg.init {
            InitSpec::Zero => vec![0.0; model.dim()],
            InitSpec::Gaussian { scale } => gaussian_vector(cfg.seed, model.dim(), scale),
        };

        let mut resolved = cfg.clone();
        resolved.hyperparams = resolved_h;
        resolved.eval.eval_every = Some(eval_every);
        match &mut resolved.topology {
            TopologySpec::Grid { rows, cols } => {
                let (r, c) = grid_shape(&cfg.topology, n);
                (*rows, *cols) = (Some(r), Some(c));
            }
            TopologySpec::ErdosRenyi { seed, .. } => *seed = Some(seed.unwrap_or(cfg.seed)),
            _ => {}
        }
        if let ModelSpec::Mlp { smoothness, .. } = &mut resolved.model {
            *smoothness = Some(model.smoothness_hint());
        }

        Ok(Self { cfg: resolved, model, train, test, partition, graph, mixing, params, x0, eval_every })
    }

    /// The config with every derived value written out.
    pub fn resolved_config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn params(&self) -> AlgorithmParams {
        self.params
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.mixing
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn problem(&self) -> Problem<'_, dyn LossModel> {
        Problem::new(self.model.as_ref(), &self.train, &self.partition)
    }

    /// Whether DESTRESS's step size is within the theoretical bound; `None`
    /// for the baselines.
    pub fn step_size_within_theory(&self) -> Option<bool> {
        match self.params {
            AlgorithmParams::Destress(h) => {
                Some(validate_step_size(&h, self.mixing.alpha(), self.model.smoothness_hint(), self.partition.n_agents()))
            }
            _ => None,
        }
    }

    pub fn run(&self) -> Result<RunResult> {
        let problem = self.problem();
        let opts = RunOptions::new(self.cfg.seed, self.cfg.budget.resolve()?);
        let inner_phase = match self.params {
            AlgorithmParams::Destress(_) => Phase::Inner,
            _ => Phase::Outer,
        };
        let evaluator = Evaluator { problem: &problem, test: self.test.as_ref() };
        let mut rows = Vec::new();
        let mut pending: Option<(usize, usize, Counters, Mat)> = None;
        let every = self.eval_every;
        let mut sink = |e: &StepEvent<'_>| {
            if e.phase == Phase::Init || (e.phase == inner_phase && e.step.is_multiple_of(every)) {
                rows.push(evaluator.row(e.outer_t, e.inner_s, e.counters, e.iterate));
                pending = None;
            } else if e.phase == inner_phase {
                pending = Some((e.outer_t, e.inner_s, e.counters, e.iterate.clone()));
            }
        };
        let out: RunOutput = match &self.params {
            AlgorithmParams::Destress(h) => destress_run(&problem, &self.mixing, h, &self.x0, &opts, &mut sink)?,
            AlgorithmParams::GtSarah(p) => gt_sarah_run(&problem, &self.mixing, p, &self.x0, &opts, &mut sink)?,
            AlgorithmParams::Dsgd(s) => dsgd_run(&problem, &self.mixing, s, &self.x0, &opts, &mut sink)?,
        };
        if let Some((t, s, c, x)) = pending {
            rows.push(evaluator.row(t, s, c, &x));
        }
        Ok(RunResult {
            trace: RunTrace { rows },
            output: out.output,
            counters: out.counters,
            outer_iterations: out.outer_iterations,
        })
    }
}

struct Evaluator<'a, 'p> {
    problem: &'a Problem<'p, dyn LossModel>,
    test: Option<&'a Dataset>,
}

impl Evaluator<'_, '_> {
    /// Diagnostics at the network average; not charged to the counters.
    fn row(&self, outer_t: usize, inner_s: usize, c: Counters, iterate: &Mat) -> TraceRow {
        let x_bar = iterate.col_means();
        TraceRow {
            outer_t,
            inner_s,
            comm_rounds: c.comm_rounds,
            ifo_strict: c.ifo_per_agent,
            ifo_paper: c.ifo_paper,
            train_loss: self.problem.global_loss(&x_bar),
            grad_norm_sq: global_grad_norm_sq(self.problem, &x_bar),
            consensus_err: iterate.consensus_error_sq(),
            test_acc: self.test.map(|ds| accuracy(self.problem.model, &x_bar, ds)),
        }
    }
}

pub fn accuracy(model: &dyn LossModel, x: &[f64], ds: &Dataset) -> f64 {
    let hits = ds.samples().iter().filter(|s| model.predict(x, &s.features) == s.label).count();
    hits as f64 / ds.len() as f64
}

/// Runs one experiment and, when the config names a trace path, writes the
/// trace there atomically.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunTrace> {
    let result = Setup::new(cfg)?.run()?;
    if let Some(path) = &cfg.trace {
        result.trace.write(path)?;
    }
    Ok(result.trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchedBudget {
    Comm(u64),
    Ifo(u64),
}

impl MatchedBudget {
    /// Parses `comm=<k>` or `ifo=<k>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || SimError::ConfigInvalid(format!("budget must be comm=<k> or ifo=<k>, got {s:?}"));
        let (kind, value) = s.split_once('=').ok_or_else(bad)?;
        let k: u64 = value.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "comm" => Ok(Self::Comm(k)),
            "ifo" => Ok(Self::Ifo(k)),
            _ => Err(bad()),
        }
    }

    fn spec(self) -> BudgetSpec {
        match self {
            Self::Comm(k) => BudgetSpec::comm(k),
            Self::Ifo(k) => BudgetSpec::ifo(k),
        }
    }

    fn value(self) -> u64 {
        match self {
            Self::Comm(k) | Self::Ifo(k) => k,
        }
    }

    fn counter(self, row: &TraceRow) -> u64 {
        match self {
            Self::Comm(_) => row.comm_rounds,
            Self::Ifo(_) => row.ifo_strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub algorithm: Algorithm,
    pub budget: u64,
    pub comm_rounds: u64,
    pub ifo_strict: u64,
    pub train_loss: f64,
    pub grad_norm_sq: f64,
}

/// Runs every config under the same budget and reports each one's last
/// trace row within it. Per-config trace paths are honoured.
pub fn compare_suite(cfgs: &[ExperimentConfig], budget: MatchedBudget) -> Result<Vec<SummaryRow>> {
    cfgs.iter()
        .map(|cfg| {
            let cfg = ExperimentConfig { budget: budget.spec(), ..cfg.clone() };
            let trace = run_experiment(&cfg)?;
            let row = trace.at_budget(budget.value(), |r| budget.counter(r)).expect("initial row is always within budget");
            Ok(SummaryRow {
                label: cfg.label().to_string(),
                algorithm: cfg.algorithm,
                budget: budget.value(),
                comm_rounds: row.comm_rounds,
                ifo_strict: row.ifo_strict,
                train_loss: row.train_loss,
                grad_norm_sq: row.grad_norm_sq,
            })
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("label,algorithm,budget,comm_rounds,ifo_strict,train_loss,grad_norm_sq\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.label,
            r.algorithm.name(),
            r.budget,
            r.comm_rounds,
            r.ifo_strict,
            fmt_float(r.train_loss),
            fmt_float(r.grad_norm_sq)
        ));
    }
    out
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    write_atomic(path, summary_csv(rows).as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    pub n: usize,
    pub alpha: f64,
    pub spectral_gap: f64,
    /// Asymptotic order of the spectral gap for the graph family.
    pub table2_class: &'static str,
}

pub fn check_mixing(topology: &TopologySpec, n: usize, source: &MixingSource, seed: u64) -> Result<MixingReport> {
    let g = build_graph(topology, n, seed)?;
    let w = build_mixing(source, &g)?;
    let class = match topology {
        TopologySpec::Path => "1/n^2",
        TopologySpec::Grid { .. } => "1/(n log n)",
        TopologySpec::ErdosRenyi { .. } | TopologySpec::Complete => "1",
        TopologySpec::EdgeList { .. } => "unknown",
    };
    Ok(MixingReport { n, alpha: w.alpha(), spectral_gap: w.spectral_gap(), table2_class: class })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub points: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const GRADCHECK_STEP: f64 = 1e-6;

/// Central-difference check of the model gradient at `points` seeded
/// parameter vectors with unit-norm features.
pub fn gradcheck(spec: &ModelSpec, input_dim: usize, points: usize, seed: u64) -> Result<GradcheckReport> {
    let data = generate_synthetic(points.max(1), input_dim, seed)?;
    let (model, tolerance, classes): (Box<dyn LossModel>, f64, usize) = match *spec {
        ModelSpec::RegLogistic { lambda } => (Box::new(RegLogisticModel::new(input_dim, lambda)?), 1e-5, 2),
        ModelSpec::Mlp { hidden, classes, .. } => (Box::new(MlpModel::new(input_dim, hidden, classes)?), 1e-4, classes),
    };
    let mut max_error: f64 = 0.0;
    for (k, s) in data.samples().iter().take(points).enumerate() {
        let x = gaussian_vector(seed.wrapping_add(k as u64 + 1), model.dim(), 1.0);
        let label = ((s.label as usize) + k) % classes;
        let z = Sample::new(s.features.clone(), label as f64);
        max_error = max_error.max(max_gradient_error(model.as_ref(), &x, &z, GRADCHECK_STEP));
    }
    Ok(GradcheckReport { points, max_error, tolerance, passed: max_error <= tolerance })
}

/// Parses `reg_logistic:lambda=0.01` or `mlp:hidden=64,classes=10`.
pub fn parse_model_spec(s: &str) -> Result<ModelSpec> {
    let bad = |msg: String| SimError::ConfigInvalid(format!("model spec {s:?}: {msg}"));
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut lambda = None;
    let mut hidden = None;
    let mut classes = None;
    for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {kv:?}")))?;
        match k.trim() {
            "lambda" => lambda = Some(v.trim().parse::<f64>().map_err(|_| bad(format!("bad lambda {v:?}")))?),
            "hidden" => hidden = Some(v.trim().parse::<usize>().map_err(|_| bad(format!("bad hidden {v:?}")))?),
            "classes" => classes = Some(v.trim().parse::<usize>().map_err(|_| bad(format!("bad classes {v:?}")))?),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    match kind.trim() {
        "reg_logistic" | "logistic" => Ok(ModelSpec::RegLogistic { lambda: lambda.unwrap_or(0.01) }),
        "mlp" => Ok(ModelSpec::Mlp {
            hidden: hidden.unwrap_or(MlpModel::DEFAULT_HIDDEN),
            classes: classes.unwrap_or(10),
            smoothness: None,
        }),
        other => Err(bad(format!("unknown model {other:?}"))),
    }
}
