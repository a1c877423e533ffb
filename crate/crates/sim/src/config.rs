//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "algorithm": "destress",
//!   "agents": 20,
//!   "topology": { "kind": "erdos_renyi", "p": 0.3 },
//!   "model": { "type": "reg_logistic", "lambda": 0.01 },
//!   "data": { "type": "synthetic", "samples": 1000, "dim": 10, "seed": 1 },
//!   "hyperparams": "auto",
//!   "budget": { "max_comm": 5000 },
//!   "seed": 7,
//!   "trace": "trace.csv"
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Destress,
    #[serde(rename = "gtsarah")]
    GtSarah,
    Dsgd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Destress => "destress",
            Algorithm::GtSarah => "gtsarah",
            Algorithm::Dsgd => "dsgd",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Complete,
    Path,
    /// Rows and columns default to the squarest factorization of `agents`.
    Grid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cols: Option<usize>,
    },
    ErdosRenyi {
        p: f64,
        /// Graph seed; the experiment seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    EdgeList { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixingSource {
    Metropolis,
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSpec {
    #[serde(default = "metropolis")]
    pub source: MixingSource,
    /// Chebyshev-accelerated extra mixing in DESTRESS.
    #[serde(default = "yes")]
    pub accelerated: bool,
}

fn metropolis() -> MixingSource {
    MixingSource::Metropolis
}

fn yes() -> bool {
    true
}

impl Default for MixingSpec {
    fn default() -> Self {
        Self { source: MixingSource::Metropolis, accelerated: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    RegLogistic {
        lambda: f64,
    },
    Mlp {
        hidden: usize,
        classes: usize,
        /// Smoothness constant used by `auto` step sizes.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smoothness: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Synthetic {
        samples: usize,
        dim: usize,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        label_col: usize,
        #[serde(default)]
        header: bool,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingSpec {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

impl From<SamplingSpec> for destress_core::algorithms::Sampling {
    fn from(s: SamplingSpec) -> Self {
        match s {
            SamplingSpec::WithReplacement => Self::WithReplacement,
            SamplingSpec::WithoutReplacement => Self::WithoutReplacement,
        }
    }
}

/// Algorithm parameters. Fields left out are derived from the problem; the
/// string `"auto"` leaves out all of them.
///
/// DESTRESS uses `eta`, `s_inner`, `batch`, `k_in`, `k_out`, `sampling`;
/// GT-SARAH uses `eta`, `batch`, `q`, `sampling`; DSGD uses `eta` (as `η₀`)
/// and `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "HyperparamRepr", into = "HyperparamRepr")]
pub struct HyperparamSpec {
    pub eta: Option<f64>,
    pub s_inner: Option<usize>,
    pub batch: Option<usize>,
    pub k_in: Option<usize>,
    pub k_out: Option<usize>,
    pub q: Option<usize>,
    pub tau: Option<f64>,
    pub sampling: Option<SamplingSpec>,
}

impl HyperparamSpec {
    pub fn is_auto(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum HyperparamRepr {
    Keyword(String),
    Fields(HyperparamFields),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperparamFields {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s_inner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_out: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sampling: Option<SamplingSpec>,
}

impl TryFrom<HyperparamRepr> for HyperparamSpec {
    type Error = String;

    fn try_from(r: HyperparamRepr) -> Result<Self, String> {
        match r {
            HyperparamRepr::Keyword(k) if k == "auto" => Ok(Self::default()),
            HyperparamRepr::Keyword(k) => Err(format!("unknown hyperparams keyword {k:?}, expected \"auto\" or an object")),
            HyperparamRepr::Fields(f) => Ok(Self {
                eta: f.eta,
                s_inner: f.s_inner,
                batch: f.batch,
                k_in: f.k_in,
                k_out: f.k_out,
                q: f.q,
                tau: f.tau,
                sampling: f.sampling,
            }),
        }
    }
}

impl From<HyperparamSpec> for HyperparamRepr {
    fn from(h: HyperparamSpec) -> Self {
        if h.is_auto() {
            return HyperparamRepr::Keyword("auto".into());
        }
        HyperparamRepr::Fields(HyperparamFields {
            eta: h.eta,
            s_inner: h.s_inner,
            batch: h.batch,
            k_in: h.k_in,
            k_out: h.k_out,
            q: h.q,
            tau: h.tau,
            sampling: h.sampling,
        })
    }
}

/// Exactly one bound must be set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_comm: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ifo: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
}

impl BudgetSpec {
    pub fn comm(k: u64) -> Self {
        Self { max_comm: Some(k), ..Self::default() }
    }

    pub fn ifo(k: u64) -> Self {
        Self { max_ifo: Some(k), ..Self::default() }
    }

    pub fn outer(t: usize) -> Self {
        Self { max_outer: Some(t), ..Self::default() }
    }

    pub fn resolve(&self) -> Result<destress_core::algorithms::Budget> {
        use destress_core::algorithms::Budget;
        match (self.max_comm, self.max_ifo, self.max_outer) {
            (Some(c), None, None) => Ok(Budget::MaxComm(c)),
            (None, Some(i), None) => Ok(Budget::MaxIfo(i)),
            (None, None, Some(t)) => Ok(Budget::MaxOuter(t)),
            _ => Err(SimError::ConfigInvalid("budget must set exactly one of max_comm, max_ifo, max_outer".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    /// Fraction of the data held out for test accuracy; 0 disables it.
    #[serde(default)]
    pub holdout_frac: f64,
    /// Steps between trace rows: inner steps for DESTRESS, iterations for
    /// the baselines. Defaults to `S`, `q` and 10 respectively.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    #[default]
    Zero,
    Gaussian { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in comparison summaries; the algorithm name when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub algorithm: Algorithm,
    pub agents: usize,
    pub topology: TopologySpec,
    #[serde(default)]
    pub mixing: MixingSpec,
    pub model: ModelSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub hyperparams: HyperparamSpec,
    pub budget: BudgetSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub init: InitSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SimError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.rebase_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.algorithm.name())
    }

    /// Resolves relative input paths against the config file's directory.
    fn rebase_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !base.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        if let TopologySpec::EdgeList { path } = &mut self.topology {
            fix(path);
        }
        if let MixingSource::Csv { path } = &mut self.mixing.source {
            fix(path);
        }
        if let DataSpec::Csv { path, .. } = &mut self.data {
            fix(path);
        }
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::ConfigInvalid(msg));
        self.budget.resolve()?;
        if self.agents == 0 {
            return bad("agents must be at least 1".into());
        }
        match &self.topology {
            TopologySpec::Grid { rows, cols } => {
                let (r, c) = match (rows, cols) {
                    (Some(r), Some(c)) => (*r, *c),
                    (Some(r), None) if *r > 0 => (*r, self.agents / r),
                    (None, Some(c)) if *c > 0 => (self.agents / c, *c),
                    (None, None) => destress_core::topology::squarest_grid(self.agents),
                    _ => return bad("grid rows and cols must be positive".into()),
                };
                if r * c != self.agents {
                    return bad(format!("grid {r}x{c} does not have {} nodes", self.agents));
                }
            }
            TopologySpec::ErdosRenyi { p, .. } if !(*p > 0.0 && *p <= 1.0) => {
                return bad(format!("edge probability must be in (0, 1], got {p}"));
            }
            TopologySpec::EdgeList { path } => require_file(path)?,
            _ => {}
        }
        if let MixingSource::Csv { path } = &self.mixing.source {
            require_file(path)?;
        }
        match self.model {
            ModelSpec::RegLogistic { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                return bad(format!("lambda must be nonnegative, got {lambda}"));
            }
            ModelSpec::Mlp { hidden, classes, smoothness } => {
                if hidden == 0 || classes < 2 {
                    return bad("mlp needs hidden >= 1 and classes >= 2".into());
                }
                if smoothness.is_some_and(|l| l.is_nan() || l <= 0.0) {
                    return bad("mlp smoothness must be positive".into());
                }
            }
            _ => {}
        }
        match &self.data {
            DataSpec::Synthetic { samples, dim, .. } if *samples == 0 || *dim == 0 => {
                return bad("synthetic data needs samples >= 1 and dim >= 1".into());
            }
            DataSpec::Csv { path, .. } => require_file(path)?,
            _ => {}
        }
        let h = &self.hyperparams;
        if h.eta.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return bad("eta must be positive".into());
        }
        if h.tau.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return bad("tau must be positive".into());
        }
        for (name, v) in [("s_inner", h.s_inner), ("batch", h.batch), ("k_in", h.k_in), ("k_out", h.k_out), ("q", h.q)] {
            if v == Some(0) {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !(0.0..1.0).contains(&self.eval.holdout_frac) {
            return bad(format!("holdout_frac must be in [0, 1), got {}", self.eval.holdout_frac));
        }
        if self.eval.eval_every == Some(0) {
            return bad("eval_every must be at least 1".into());
        }
        if let InitSpec::Gaussian { scale } = self.init {
            if !(scale >= 0.0 && scale.is_finite()) {
                return bad("init scale must be nonnegative".into());
            }
        }
        Ok(())
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(SimError::ConfigInvalid(format!("file not found: {}", path.display())))
    }
}
