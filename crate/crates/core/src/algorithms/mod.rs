//! Decentralized optimizers over a [`MixingMatrix`]: DESTRESS, GT-SARAH and
//! DSGD, with exact communication and IFO accounting.
//!
//! Agent states are stacked row-wise into `n x d` matrices. Every run is
//! deterministic given its seed; agent `i` draws its mini-batches from its
//! own ChaCha stream (see [`crate::rng::agent_stream`]).

mod destress;
mod dsgd;
mod gt_sarah;
mod hyperparams;

pub use destress::destress_run;
pub use dsgd::dsgd_run;
pub use gt_sarah::gt_sarah_run;
pub use hyperparams::{derive_hyperparams, step_size_bound, validate_step_size, GtSarahParams, Hyperparams, Sampling, StepSchedule};

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::matrix::{norm_sq, Mat};
use crate::mixing::MixingMatrix;
use crate::model::{mean_grad, LossModel, Sample};
use crate::rng::SimRng;

/// A model, its training data, and the split of that data across agents.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a, M: ?Sized> {
    pub model: &'a M,
    pub dataset: &'a Dataset,
    pub partition: &'a Partition,
}

impl<'a, M: LossModel + ?Sized> Problem<'a, M> {
    pub fn new(model: &'a M, dataset: &'a Dataset, partition: &'a Partition) -> Self {
        Self { model, dataset, partition }
    }

    pub fn n_agents(&self) -> usize {
        self.partition.n_agents()
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn shard_sample(&self, agent: usize, k: usize) -> &'a Sample {
        self.dataset.get(self.partition.shard(agent)[k])
    }

    /// `∇f_i(x)` of agent `i`.
    pub fn local_grad(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        let shard = self.partition.shard(agent);
        mean_grad(self.model, x, shard.iter().map(|&k| self.dataset.get(k)))
    }

    /// `∇F(X)`: row `i` holds `∇f_i(X_i)`.
    pub fn stacked_local_grads(&self, x: &Mat) -> Mat {
        let mut out = Mat::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let g = self.local_grad(i, x.row(i));
            out.row_mut(i).copy_from_slice(&g);
        }
        out
    }

    /// `∇f(x)` over all partitioned samples. Not counted as oracle calls.
    pub fn global_grad(&self, x: &[f64]) -> Vec<f64> {
        let n_used = self.n_agents() * self.m();
        struct Exact<I>(I, usize);
        impl<I: Iterator> Iterator for Exact<I> {
            type Item = I::Item;
            fn next(&mut self) -> Option<I::Item> {
                self.0.next()
            }
            fn size_hint(&self) -> (usize, Option<usize>) {
                (self.1, Some(self.1))
            }
        }
        impl<I: Iterator> ExactSizeIterator for Exact<I> {}
        mean_grad(self.model, x, Exact(self.partition.all_indices().map(|k| self.dataset.get(k)), n_used))
    }

    /// `f(x)` over all partitioned samples.
    pub fn global_loss(&self, x: &[f64]) -> f64 {
        let n_used = (self.n_agents() * self.m()) as f64;
        self.partition.all_indices().map(|k| self.model.value(x, self.dataset.get(k))).sum::<f64>() / n_used
    }

    fn check_against(&self, w: &MixingMatrix, x0: &[f64]) -> Result<()> {
        if self.n_agents() != w.n() {
            return Err(Error::ShardMismatch { shards: self.n_agents(), agents: w.n() });
        }
        if x0.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x0.len() });
        }
        Ok(())
    }
}

/// `‖∇f(x)‖²` over all partitioned samples (diagnostic, uncounted).
pub fn global_grad_norm_sq<M: LossModel + ?Sized>(problem: &Problem<'_, M>, x: &[f64]) -> f64 {
    norm_sq(&problem.global_grad(x))
}

/// Communication rounds and per-agent oracle calls so far.
///
/// `ifo_per_agent` counts one unit per sample gradient at one point.
/// `ifo_paper` follows the complexity accounting of the DESTRESS analysis:
/// a mini-batch difference costs `b` and an outer refresh costs `2m`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub comm_rounds: u64,
    pub ifo_per_agent: u64,
    pub ifo_paper: u64,
}

impl Counters {
    fn add(&mut self, comm: usize, ifo: usize, ifo_paper: usize) {
        self.comm_rounds += comm as u64;
        self.ifo_per_agent += ifo as u64;
        self.ifo_paper += ifo_paper as u64;
    }
}

/// When to stop a run. Runs stop at the first outer-iteration boundary where
/// the bound is reached, so counter budgets may be overshot by at most one
/// outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    MaxOuter(usize),
    MaxComm(u64),
    MaxIfo(u64),
}

impl Budget {
    pub fn reached(&self, counters: &Counters, outer_done: usize) -> bool {
        match *self {
            Budget::MaxOuter(t) => outer_done >= t,
            Budget::MaxComm(c) => counters.comm_rounds >= c,
            Budget::MaxIfo(c) => counters.ifo_per_agent >= c,
        }
    }
}

/// Stacked per-agent vectors.
///
/// DESTRESS uses every field as named. GT-SARAH stores its tracker `y` in
/// `s` and the previous iterate in `u`. DSGD only uses `x`; the other fields
/// are empty there.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Mat,
    pub s: Mat,
    pub u: Mat,
    pub v: Mat,
    /// `∇F(x^{(t−1)})`, cached between outer iterations.
    pub prev_local_grad: Mat,
}

impl NetworkState {
    fn empty() -> Mat {
        Mat::zeros(0, 0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.all_finite() && self.s.all_finite() && self.u.all_finite() && self.v.all_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// State right after initialization (`t = 0`).
    Init,
    /// After an outer update (DESTRESS) or one full iteration (baselines).
    Outer,
    /// After one DESTRESS inner step.
    Inner,
}

/// What a [`TraceSink`] sees after each step.
#[derive(Debug, Clone, Copy)]
pub struct StepEvent<'a> {
    pub phase: Phase,
    pub outer_t: usize,
    pub inner_s: usize,
    /// Steps taken so far: inner steps for DESTRESS, iterations otherwise.
    pub step: usize,
    pub counters: Counters,
    /// The current parameter estimates, one row per agent.
    pub iterate: &'a Mat,
    pub state: &'a NetworkState,
}

pub trait TraceSink {
    fn record(&mut self, event: &StepEvent<'_>);
}

impl TraceSink for () {
    fn record(&mut self, _: &StepEvent<'_>) {}
}

impl<F: FnMut(&StepEvent<'_>)> TraceSink for F {
    fn record(&mut self, event: &StepEvent<'_>) {
        self(event)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub budget: Budget,
    /// Store every DESTRESS output candidate (small runs only).
    pub keep_output_pool: bool,
}

impl RunOptions {
    pub fn new(seed: u64, budget: Budget) -> Self {
        Self { seed, budget, keep_output_pool: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub output: Vec<f64>,
    pub counters: Counters,
    pub outer_iterations: usize,
    pub final_state: NetworkState,
    /// DESTRESS: `(t, s, i)` of the sampled output `u_i^{(t),s−1}`.
    pub output_index: Option<(usize, usize, usize)>,
    /// DESTRESS with `keep_output_pool`: every candidate in draw order.
    pub output_pool: Option<Vec<Vec<f64>>>,
}

/// Indices into agent `agent`'s shard for one mini-batch.
pub(crate) fn draw_batch(rng: &mut SimRng, m: usize, b: usize, sampling: Sampling) -> Vec<usize> {
    match sampling {
        Sampling::WithReplacement => (0..b).map(|_| rng.random_range(0..m)).collect(),
        Sampling::WithoutReplacement => {
            let mut v = index::sample(rng, m, b.min(m)).into_vec();
            // draw order is irrelevant to the mean; sorting keeps the reduction order fixed
            v.sort_unstable();
            v
        }
    }
}

pub(crate) fn ensure_finite(state: &NetworkState, outer: usize, inner: usize) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { outer, inner })
    }
}
