//! GT-SARAH baseline: one gossip round for `x` and one for the tracker `y`
//! per iteration, full local gradients every `q` iterations.

use alloc::vec::Vec;

use super::{
    draw_batch, ensure_finite, Counters, GtSarahParams, NetworkState, Phase, Problem, RunOptions, RunOutput, StepEvent,
    TraceSink,
};
use crate::error::Result;
use crate::matrix::Mat;
use crate::mixing::{gossip, MixingMatrix};
use crate::model::LossModel;
use crate::rng;

/// Runs GT-SARAH. In the reported state `s` holds the tracker `y` and `u`
/// the previous iterate `x⁽ᵗ⁻¹⁾`.
pub fn gt_sarah_run<M: LossModel + ?Sized>(
    problem: &Problem<'_, M>,
    w: &MixingMatrix,
    h: &GtSarahParams,
    x0: &[f64],
    opts: &RunOptions,
    sink: &mut dyn TraceSink,
) -> Result<RunOutput> {
    problem.check_against(w, x0)?;
    h.validate()?;
    let n = problem.n_agents();
    let m = problem.m();

    let mut agent_rngs: Vec<_> = (0..n).map(|i| rng::agent_stream(opts.seed, i)).collect();
    let x = Mat::from_repeated_row(n, x0);
    let v = problem.stacked_local_grads(&x);
    let mut state = NetworkState { u: x.clone(), s: v.clone(), v, x, prev_local_grad: NetworkState::empty() };
    let mut counters = Counters::default();
    counters.add(0, m, m);
    sink.record(&StepEvent { phase: Phase::Init, outer_t: 0, inner_s: 0, step: 0, counters, iterate: &state.x, state: &state });

    let mut t = 0;
    while !opts.budget.reached(&counters, t) {
        t += 1;
        let mut x_next = gossip(w, &state.x, 1);
        x_next.axpy(-h.eta, &state.s);
        let x_prev = core::mem::replace(&mut state.x, x_next);

        let v_next = if t % h.q == 0 {
            counters.add(0, m, m);
            problem.stacked_local_grads(&state.x)
        } else {
            let mut v_next = state.v.clone();
            for (i, agent_rng) in agent_rngs.iter_mut().enumerate() {
                let batch = draw_batch(agent_rng, m, h.batch, h.sampling);
                let scale = 1.0 / batch.len() as f64;
                let row = v_next.row_mut(i);
                for &k in &batch {
                    let z = problem.shard_sample(i, k);
                    problem.model.add_grad(state.x.row(i), z, scale, row);
                    problem.model.add_grad(x_prev.row(i), z, -scale, row);
                }
            }
            counters.add(0, 2 * h.batch, h.batch);
            v_next
        };

        let mut y_next = gossip(w, &state.s, 1);
        y_next.axpy(1.0, &v_next);
        y_next.axpy(-1.0, &state.v);
        state.s = y_next;
        state.v = v_next;
        state.u = x_prev;
        counters.add(2, 0, 0);
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
