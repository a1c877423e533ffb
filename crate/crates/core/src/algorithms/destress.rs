//! DESTRESS: gradient tracking in the outer loop, stochastic recursive
//! gradients in the inner loop, `K_out` / `K_in` gossip rounds per
//! communication step.
//!
//! ```text
//! init:  x_i = x̄⁰,  s_i = ∇f(x̄⁰)
//! outer: x⁽ᵗ⁾ = u⁽ᵗ⁻¹⁾'ˢ
//!        s⁽ᵗ⁾ = W_out (s⁽ᵗ⁻¹⁾ + ∇F(x⁽ᵗ⁾) − ∇F(x⁽ᵗ⁻¹⁾))
//!        u⁰ = x⁽ᵗ⁾,  v⁰ = s⁽ᵗ⁾
//! inner: uˢ = W_in (uˢ⁻¹ − η vˢ⁻¹)
//!        gᵢˢ = (1/b) Σ_z (∇ℓ(uᵢˢ; z) − ∇ℓ(uᵢˢ⁻¹; z)) + vᵢˢ⁻¹
//!        vˢ = W_in gˢ
//! ```
//!
//! The output is drawn uniformly from `{uᵢ⁽ᵗ⁾'ˢ⁻¹}` by reservoir sampling.

use alloc::vec::Vec;

use rand::Rng;

use super::{
    draw_batch, ensure_finite, Counters, Hyperparams, NetworkState, Phase, Problem, RunOptions, RunOutput, StepEvent,
    TraceSink,
};
use crate::error::Result;
use crate::matrix::Mat;
use crate::mixing::MixingMatrix;
use crate::model::LossModel;
use crate::rng;

pub fn destress_run<M: LossModel + ?Sized>(
    problem: &Problem<'_, M>,
    w: &MixingMatrix,
    h: &Hyperparams,
    x0: &[f64],
    opts: &RunOptions,
    sink: &mut dyn TraceSink,
) -> Result<RunOutput> {
    problem.check_against(w, x0)?;
    h.validate()?;
    let n = problem.n_agents();
    let m = problem.m();
    let d = problem.dim();

    let mut agent_rngs: Vec<_> = (0..n).map(|i| rng::agent_stream(opts.seed, i)).collect();
    let mut output_rng = rng::stream(opts.seed, rng::OUTPUT_STREAM);

    let x = Mat::from_repeated_row(n, x0);
    let local = problem.stacked_local_grads(&x);
    // s_i = ∇f(x̄⁰), the mean of the local gradients at the common start
    let s = Mat::from_repeated_row(n, &local.col_means());
    let mut state = NetworkState { u: x.clone(), v: s.clone(), x, s, prev_local_grad: local };
    let mut counters = Counters::default();
    counters.add(0, m, m);
    sink.record(&StepEvent { phase: Phase::Init, outer_t: 0, inner_s: 0, step: 0, counters, iterate: &state.x, state: &state });

    let mut reservoir = Reservoir::new(opts.keep_output_pool);
    let mut step = 0;
    let mut t = 0;
    let mut scratch = Mat::zeros(n, d);
    while !opts.budget.reached(&counters, t) {
        t += 1;
        // outer loop: new reference point and gradient tracking
        state.x = state.u.clone();
        let local = problem.stacked_local_grads(&state.x);
        let mut tracked = state.s.clone();
        tracked.axpy(1.0, &local);
        tracked.axpy(-1.0, &state.prev_local_grad);
        state.s = w.mix(&tracked, h.k_out, h.accelerated)?;
        state.prev_local_grad = local;
        counters.add(h.k_out, m, 2 * m);
        ensure_finite(&state, t, 0)?;
        sink.record(&StepEvent { phase: Phase::Outer, outer_t: t, inner_s: 0, step, counters, iterate: &state.x, state: &state });

        state.u = state.x.clone();
        state.v = state.s.clone();
        for s_idx in 1..=h.s_inner {
            for i in 0..n {
                reservoir.offer(&mut output_rng, state.u.row(i), (t, s_idx, i));
            }
            let mut stepped = state.u.clone();
            stepped.axpy(-h.eta, &state.v);
            let u_next = w.mix(&stepped, h.k_in, h.accelerated)?;

            // g = minibatch difference + v, built in scratch
            for (i, agent_rng) in agent_rngs.iter_mut().enumerate() {
                let batch = draw_batch(agent_rng, m, h.batch, h.sampling);
                let scale = 1.0 / batch.len() as f64;
                let g = scratch.row_mut(i);
                g.copy_from_slice(state.v.row(i));
                for &k in &batch {
                    let z = problem.shard_sample(i, k);
                    problem.model.add_grad(u_next.row(i), z, scale, g);
                    problem.model.add_grad(state.u.row(i), z, -scale, g);
                }
            }
            state.v = w.mix(&scratch, h.k_in, h.accelerated)?;
            state.u = u_next;
            step += 1;
            counters.add(h.k_in, 2 * h.batch, h.batch);
            ensure_finite(&state, t, s_idx)?;
            sink.record(&StepEvent {
                phase: Phase::Inner,
                outer_t: t,
                inner_s: s_idx,
                step,
                counters,
                iterate: &state.u,
                state: &state,
            });
        }
    }

    let (output, output_index) = match reservoir.chosen {
        Some((vec, idx)) => (vec, Some(idx)),
        None => (x0.to_vec(), None),
    };
    Ok(RunOutput {
        output,
        counters,
        outer_iterations: t,
        final_state: state,
        output_index,
        output_pool: reservoir.pool,
    })
}

/// Uniform sample of one candidate from a stream of unknown length.
struct Reservoir {
    seen: u64,
    chosen: Option<(Vec<f64>, (usize, usize, usize))>,
    pool: Option<Vec<Vec<f64>>>,
}

impl Reservoir {
    fn new(keep_pool: bool) -> Self {
        Self { seen: 0, chosen: None, pool: keep_pool.then(Vec::new) }
    }

    fn offer(&mut self, rng: &mut rng::SimRng, candidate: &[f64], index: (usize, usize, usize)) {
        self.seen += 1;
        if rng.random_range(0..self.seen) == 0 {
            self.chosen = Some((candidate.to_vec(), index));
        }
        if let Some(pool) = &mut self.pool {
            pool.push(candidate.to_vec());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Budget, Sampling};
    use super::*;
    use crate::data::{generate_synthetic, partition_uniform};
    use crate::mixing::{metropolis_weights, Construction};
    use crate::model::RegLogisticModel;
    use crate::topology::{build_topology, GraphKind, TopologyParams};

    fn setup(n: usize, kind: GraphKind) -> (RegLogisticModel, crate::data::Dataset, crate::data::Partition, MixingMatrix) {
        let ds = generate_synthetic(40 * n, 4, 5).unwrap();
        let part = partition_uniform(&ds, n, 6).unwrap();
        let g = build_topology(kind, n, TopologyParams::None, 0).unwrap();
        (RegLogisticModel::new(4, 0.01).unwrap(), ds, part, metropolis_weights(&g).unwrap())
    }

    fn hp(s: usize, b: usize, k_in: usize, k_out: usize) -> Hyperparams {
        Hyperparams { eta: 0.5, s_inner: s, batch: b, k_in, k_out, accelerated: false, sampling: Sampling::WithReplacement }
    }

    #[test]
    fn counters_follow_closed_form() {
        let (model, ds, part, w) = setup(5, GraphKind::Path);
        let p = Problem::new(&model, &ds, &part);
        let h = hp(3, 4, 2, 5);
        let out = destress_run(&p, &w, &h, &[0.0; 4], &RunOptions::new(1, Budget::MaxOuter(4)), &mut ()).unwrap();
        let (t, s, b, m) = (4u64, 3u64, 4u64, part.m() as u64);
        assert_eq!(out.counters.comm_rounds, t * (s * 2 + 5));
        assert_eq!(out.counters.ifo_per_agent, m + t * (m + 2 * s * b));
        assert_eq!(out.counters.ifo_paper, m + t * (s * b + 2 * m));
        assert_eq!(out.outer_iterations, 4);
    }

    #[test]
    fn complete_graph_rows_agree_after_mixing() {
        let (model, ds, part, _) = setup(4, GraphKind::Path);
        let j = MixingMatrix::from_dense(Mat::from_vec(4, 4, alloc::vec![0.25; 16]), None, Construction::External).unwrap();
        let p = Problem::new(&model, &ds, &part);
        let mut max_spread: f64 = 0.0;
        let mut sink = |e: &StepEvent<'_>| {
            for mat in [&e.state.u, &e.state.v, &e.state.s] {
                let first = mat.row(0).to_vec();
                for r in mat.row_iter() {
                    for (a, b) in r.iter().zip(&first) {
                        max_spread = max_spread.max((a - b).abs());
                    }
                }
            }
        };
        destress_run(&p, &j, &hp(4, 3, 1, 1), &[0.0; 4], &RunOptions::new(2, Budget::MaxOuter(3)), &mut sink).unwrap();
        assert!(max_spread <= 1e-12, "{max_spread}");
    }

    #[test]
    fn reservoir_output_is_from_pool() {
        let (model, ds, part, w) = setup(3, GraphKind::Path);
        let p = Problem::new(&model, &ds, &part);
        let h = hp(4, 2, 1, 1);
        let opts = RunOptions { seed: 3, budget: Budget::MaxOuter(2), keep_output_pool: true };
        let out = destress_run(&p, &w, &h, &[0.0; 4], &opts, &mut ()).unwrap();
        let pool = out.output_pool.unwrap();
        assert_eq!(pool.len(), 2 * 4 * 3);
        let (t, s, i) = out.output_index.unwrap();
        let flat = ((t - 1) * 4 + (s - 1)) * 3 + i;
        assert_eq!(pool[flat], out.output);
    }

    #[test]
    fn reservoir_is_uniform() {
        // 12 candidates, 12000 draws: each index should get about 1000
        let mut counts = [0u32; 12];
        let mut rng = rng::seeded(9);
        for _ in 0..12_000 {
            let mut r = Reservoir::new(false);
            for c in 0..12 {
                r.offer(&mut rng, &[c as f64], (0, 0, c));
            }
            counts[r.chosen.unwrap().1 .2] += 1;
        }
        assert!(counts.iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");
    }

    #[test]
    fn zero_outer_budget_returns_start() {
        let (model, ds, part, w) = setup(3, GraphKind::Path);
        let p = Problem::new(&model, &ds, &part);
        let out = destress_run(&p, &w, &hp(2, 1, 1, 1), &[0.5; 4], &RunOptions::new(0, Budget::MaxOuter(0)), &mut ()).unwrap();
        assert_eq!(out.output, [0.5; 4]);
        assert_eq!(out.counters.ifo_per_agent, part.m() as u64);
    }

    struct SteepQuadratic;

    impl LossModel for SteepQuadratic {
        fn dim(&self) -> usize {
            4
        }
        fn smoothness_hint(&self) -> f64 {
            10.0
        }
        fn value(&self, x: &[f64], _: &crate::model::Sample) -> f64 {
            5.0 * crate::matrix::norm_sq(x)
        }
        fn add_grad(&self, x: &[f64], _: &crate::model::Sample, scale: f64, out: &mut [f64]) {
            for (o, v) in out.iter_mut().zip(x) {
                *o += scale * 10.0 * v;
            }
        }
        fn predict(&self, _: &[f64], _: &[f64]) -> f64 {
            0.0
        }
    }

    #[test]
    fn divergence_is_reported() {
        let (_, ds, part, w) = setup(3, GraphKind::Path);
        let p = Problem::new(&SteepQuadratic, &ds, &part);
        let mut h = hp(5, 1, 1, 1);
        h.eta = 1.0;
        let err = destress_run(&p, &w, &h, &[1.0; 4], &RunOptions::new(0, Budget::MaxOuter(1000)), &mut ()).unwrap_err();
        assert!(matches!(err, crate::Error::NonFinite { .. }), "{err:?}");
    }

    #[test]
    fn shard_mismatch() {
        let (model, ds, part, _) = setup(3, GraphKind::Path);
        let g = build_topology(GraphKind::Path, 4, TopologyParams::None, 0).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let p = Problem::new(&model, &ds, &part);
        let err = destress_run(&p, &w, &hp(2, 1, 1, 1), &[0.0; 4], &RunOptions::new(0, Budget::MaxOuter(1)), &mut ()).unwrap_err();
        assert_eq!(err, crate::Error::ShardMismatch { shards: 3, agents: 4 });
    }
}
