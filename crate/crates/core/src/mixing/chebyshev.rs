//! Chebyshev-accelerated gossip.
//!
//! For symmetric `W` whose non-consensus eigenvalues lie in `[lo, hi]`, the
//! degree-`k` polynomial
//!
//! ```text
//! P_k(t) = T_k((t − c)/h) / T_k((1 − c)/h),   c = (hi + lo)/2,  h = (hi − lo)/2
//! ```
//!
//! has `P_k(1) = 1` (so the agent average is an exact fixed point) and the
//! smallest sup-norm on `[lo, hi]` among such polynomials. It is applied with
//! the three-term recurrence, written in ratios `r_j = T_{j−1}(z)/T_j(z)` so
//! nothing overflows when the interval is narrow.
//!
//! A single round (`k = 1`) is the plain gossip step `W·x`.

use super::{gossip, means_preserved, MixingMatrix, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::matrix::Mat;

pub fn chebyshev_gossip(w: &MixingMatrix, state: &Mat, k: usize) -> Result<Mat> {
    let (lo, hi) = w.spectrum().ok_or_else(|| Error::NotSymmetric { asymmetry: super::asymmetry(w.weights()).max(SYMMETRY_TOL) })?;
    assert_eq!(state.rows(), w.n(), "state must have one row per agent");
    if k <= 1 {
        return Ok(gossip(w, state, k));
    }
    let c = 0.5 * (hi + lo);
    let h = 0.5 * (hi - lo);
    let gap = 1.0 - c;
    let weights = w.weights();

    // y_1 = (W − cI) x / (1 − c)
    let mut prev = state.clone();
    let mut cur = Mat::zeros(state.rows(), state.cols());
    weights.matmul_into(state, &mut cur);
    for (y, &x) in cur.as_mut_slice().iter_mut().zip(state.as_slice()) {
        *y = (*y - c * x) / gap;
    }
    let mut ratio = h / gap;
    let mut wy = Mat::zeros(state.rows(), state.cols());
    for _ in 1..k {
        let denom = 2.0 * gap - h * ratio;
        let a = 2.0 / denom;
        let b = h * ratio / denom;
        weights.matmul_into(&cur, &mut wy);
        // y_{j+1} = a (W y_j − c y_j) − b y_{j−1}; reuse prev as output
        for ((p, &wv), &y) in prev.as_mut_slice().iter_mut().zip(wy.as_slice()).zip(cur.as_slice()) {
            *p = a * (wv - c * y) - b * *p;
        }
        core::mem::swap(&mut prev, &mut cur);
        ratio = h / denom;
    }
    debug_assert!(means_preserved(state, &cur), "chebyshev gossip changed the agent average");
    Ok(cur)
}

/// Contraction factor of `k` mixing rounds for a matrix with mixing rate
/// `alpha`: `α^k` for plain powering, and the Chebyshev bound
/// `2cᵏ/(1 + c²ᵏ)` with `c = (1 − √(1 − α²))/α` when accelerated.
pub fn effective_alpha(alpha: f64, k: usize, accelerated: bool) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    let k = k as i32;
    if !accelerated {
        return libm::pow(alpha, k as f64);
    }
    let c = (1.0 - libm::sqrt(1.0 - alpha * alpha)) / alpha;
    let ck = libm::pow(c, k as f64);
    2.0 * ck / (1.0 + ck * ck)
}
