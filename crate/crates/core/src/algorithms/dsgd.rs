//! Decentralized SGD: one sample per agent, one gossip round per iteration,
//! diminishing step sizes.

use alloc::vec::Vec;

use rand::Rng;

use super::{ensure_finite, Budget, Counters, NetworkState, Phase, Problem, RunOptions, RunOutput, StepEvent, StepSchedule, TraceSink};
use crate::error::Result;
use crate::matrix::Mat;
use crate::mixing::{gossip, MixingMatrix};
use crate::model::LossModel;
use crate::rng;

pub fn dsgd_run<M: LossModel + ?Sized>(
    problem: &Problem<'_, M>,
    w: &MixingMatrix,
    sched: &StepSchedule,
    x0: &[f64],
    opts: &RunOptions,
    sink: &mut dyn TraceSink,
) -> Result<RunOutput> {
    problem.check_against(w, x0)?;
    let n = problem.n_agents();
    let m = problem.m();
    // every iteration costs one round and one oracle call, so all budgets give T directly
    let total = match opts.budget {
        Budget::MaxOuter(t) => t,
        Budget::MaxComm(c) | Budget::MaxIfo(c) => c as usize,
    };

    let mut agent_rngs: Vec<_> = (0..n).map(|i| rng::agent_stream(opts.seed, i)).collect();
    let mut state = NetworkState {
        x: Mat::from_repeated_row(n, x0),
        s: NetworkState::empty(),
        u: NetworkState::empty(),
        v: NetworkState::empty(),
        prev_local_grad: NetworkState::empty(),
    };
    let mut counters = Counters::default();
    sink.record(&StepEvent { phase: Phase::Init, outer_t: 0, inner_s: 0, step: 0, counters, iterate: &state.x, state: &state });

    let mut t = 0;
    while !opts.budget.reached(&counters, t) {
        let eta = sched.eta(t, total);
        let mut stepped = state.x.clone();
        for (i, agent_rng) in agent_rngs.iter_mut().enumerate() {
            let k = agent_rng.random_range(0..m);
            let z = problem.shard_sample(i, k);
            problem.model.add_grad(state.x.row(i), z, -eta, stepped.row_mut(i));
        }
        state.x = gossip(w, &stepped, 1);
        t += 1;
        counters.add(1, 1, 1);
        ensure_finite(&state, t, 0)?;
        sink.record(&StepEvent { phase: Phase::Outer, outer_t: t, inner_s: 0, step: t, counters, iterate: &state.x, state: &state });
    }

    Ok(RunOutput {
        output: state.x.col_means(),
        counters,
        outer_iterations: t,
        final_state: state,
        output_index: None,
        output_pool: None,
    })
}
