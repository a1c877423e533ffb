//! Mixing matrices, the mixing rate `α = ‖W − J‖_op` with `J = (1/n)·11ᵀ`,
//! and K-round gossip on stacked agent states.
//!
//! One multiplication by `W` is one communication round. Neither gossip
//! routine ever forms `W^k`; both apply `W` `k` times to the state.

mod chebyshev;

pub use chebyshev::{chebyshev_gossip, effective_alpha};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{norm, Mat};
use crate::topology::{is_connected, Graph};

/// Row/column sums must match 1 this closely for a matrix to be accepted.
pub const STOCHASTIC_TOL: f64 = 1e-9;
/// `‖W − Wᵀ‖_max` below this counts as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Residual tolerance of the power iterations.
pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    Metropolis,
    /// Loaded from an external source, e.g. an FDLA matrix in CSV.
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: Mat,
    alpha: f64,
    construction: Construction,
    /// Extreme eigenvalues of `W` on the subspace orthogonal to `1`
    /// (`None` unless `W` is symmetric).
    spectrum: Option<(f64, f64)>,
}

impl MixingMatrix {
    /// Validates `w` (square, doubly stochastic, conforming to `graph` when
    /// given) and caches its mixing rate.
    pub fn from_dense(w: Mat, graph: Option<&Graph>, construction: Construction) -> Result<Self> {
        let n = w.rows();
        if n == 0 || w.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.cols() });
        }
        if let Some(g) = graph {
            if g.n() != n {
                return Err(Error::DimensionMismatch { expected: g.n(), got: n });
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j && w[(i, j)] != 0.0 && !g.has_edge(i, j) {
                        return Err(Error::NotConforming { i, j });
                    }
                }
            }
        }
        if !w.all_finite() {
            return Err(Error::InvalidParameter("mixing matrix has non-finite entries".into()));
        }
        let alpha = mixing_rate(&w)?;
        let spectrum = if asymmetry(&w) <= SYMMETRY_TOL { Some(symmetric_spectrum(&w, alpha)) } else { None };
        Ok(Self { w, alpha, construction, spectrum })
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn weights(&self) -> &Mat {
        &self.w
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn is_symmetric(&self) -> bool {
        self.spectrum.is_some()
    }

    /// `(λ_min, λ_max)` of `W` restricted to `1^⊥`, for symmetric `W`.
    pub fn spectrum(&self) -> Option<(f64, f64)> {
        self.spectrum
    }

    /// `k` rounds of gossip, accelerated or plain.
    pub fn mix(&self, state: &Mat, k: usize, accelerated: bool) -> Result<Mat> {
        if accelerated {
            chebyshev_gossip(self, state, k)
        } else {
            Ok(gossip(self, state, k))
        }
    }
}

/// Metropolis–Hastings weights: `w_ij = 1/(1 + max(deg_i, deg_j))` on edges,
/// diagonal takes the remainder of the row.
pub fn metropolis_weights(g: &Graph) -> Result<MixingMatrix> {
    if !is_connected(g) {
        return Err(Error::NotConnected);
    }
    let n = g.n();
    let deg = g.degrees();
    let mut w = Mat::zeros(n, n);
    for (i, j) in g.edges() {
        let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::from_dense(w, Some(g), Construction::Metropolis)
}

/// Largest deviation of any row or column sum from 1.
pub fn stochastic_deviation(w: &Mat) -> f64 {
    let n = w.rows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        let row: f64 = w.row(i).iter().sum();
        let col: f64 = (0..n).map(|r| w[(r, i)]).sum();
        dev = dev.max(libm::fabs(row - 1.0)).max(libm::fabs(col - 1.0));
    }
    dev
}

pub fn asymmetry(w: &Mat) -> f64 {
    let n = w.rows();
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            m = m.max(libm::fabs(w[(i, j)] - w[(j, i)]));
        }
    }
    m
}

/// `α = ‖W − J‖_op`, by power iteration on `(W − J)ᵀ(W − J)`.
///
/// The start vector is `1/√n` everywhere plus `1e-3` on coordinate 0.
pub fn mixing_rate(w: &Mat) -> Result<f64> {
    let n = w.rows();
    if w.cols() != n || n == 0 {
        return Err(Error::DimensionMismatch { expected: n, got: w.cols() });
    }
    let deviation = stochastic_deviation(w);
    if deviation > STOCHASTIC_TOL {
        return Err(Error::NotStochastic { deviation });
    }
    let wt = w.transpose();
    let centered = |m: &Mat, v: &[f64]| -> Vec<f64> {
        let mut y = m.matvec(v);
        let mean = v.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|x| *x -= mean);
        y
    };
    let mut v = vec![1.0 / libm::sqrt(n as f64); n];
    v[0] += 1e-3;
    normalize(&mut v);
    let mut theta = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let y = centered(&wt, &centered(w, &v));
        theta = crate::matrix::dot(&v, &y);
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        let residual = libm::sqrt(y.iter().zip(&v).map(|(a, b)| (a - theta * b) * (a - theta * b)).sum::<f64>());
        v = y;
        v.iter_mut().for_each(|x| *x /= ny);
        if residual <= POWER_TOL {
            break;
        }
    }
    Ok(libm::sqrt(theta.max(0.0)))
}

/// Extreme eigenvalues of a symmetric `W` on `1^⊥`, via shifted power
/// iteration with the consensus direction projected out.
fn symmetric_spectrum(w: &Mat, alpha: f64) -> (f64, f64) {
    let n = w.rows();
    if n == 1 || alpha == 0.0 {
        return (0.0, 0.0);
    }
    // eigenvalues of W on 1^⊥ lie in [-α, α], so both shifted operators are PSD there
    let hi = top_eigen_on_complement(w, alpha, 1.0) - alpha;
    let lo = alpha - top_eigen_on_complement(w, alpha, -1.0);
    (lo.max(-alpha), hi.min(alpha))
}

/// Top eigenvalue of `shift·I + sign·W` restricted to `1^⊥`.
fn top_eigen_on_complement(w: &Mat, shift: f64, sign: f64) -> f64 {
    let n = w.rows();
    let project = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    // deterministic start with nonzero weight on every non-consensus mode of a path
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / n as f64 + if i == 0 { 1.0 } else { 0.0 }).collect();
    project(&mut v);
    normalize(&mut v);
    let mut theta = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let mut y = w.matvec(&v);
        for (yi, vi) in y.iter_mut().zip(&v) {
            *yi = shift * vi + sign * *yi;
        }
        project(&mut y);
        theta = crate::matrix::dot(&v, &y);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        let residual = libm::sqrt(y.iter().zip(&v).map(|(a, b)| (a - theta * b) * (a - theta * b)).sum::<f64>());
        v = y;
        v.iter_mut().for_each(|x| *x /= ny);
        if residual <= POWER_TOL {
            break;
        }
    }
    theta
}

fn normalize(v: &mut [f64]) {
    let nv = norm(v);
    if nv > 0.0 {
        v.iter_mut().for_each(|x| *x /= nv);
    }
}

/// `W^k · state`, as `k` successive multiplications.
pub fn gossip(w: &MixingMatrix, state: &Mat, k: usize) -> Mat {
    assert_eq!(state.rows(), w.n(), "state must have one row per agent");
    let mut cur = state.clone();
    let mut next = Mat::zeros(state.rows(), state.cols());
    for _ in 0..k {
        w.w.matmul_into(&cur, &mut next);
        core::mem::swap(&mut cur, &mut next);
    }
    debug_assert!(means_preserved(state, &cur), "gossip changed the agent average");
    cur
}

pub(crate) fn means_preserved(before: &Mat, after: &Mat) -> bool {
    // divergence is reported by the callers
    if !before.all_finite() || !after.all_finite() {
        return true;
    }
    let a = before.col_means();
    let b = after.col_means();
    if !a.iter().chain(&b).all(|v| v.is_finite()) {
        return true;
    }
    let scale = before.as_slice().iter().fold(1.0f64, |m, v| m.max(libm::fabs(*v)));
    a.iter().zip(&b).all(|(x, y)| libm::fabs(x - y) <= 1e-9 * scale)
}

/// Square matrix from comma-separated text, one row per non-empty line.
pub fn parse_dense_csv(text: &str) -> Result<Mat> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<core::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse(format!("line {}: not a numeric row", no + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!("line {}: expected {} columns, got {}", no + 1, first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix".into()));
    }
    if rows[0].len() != rows.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), got: rows[0].len() });
    }
    Ok(Mat::from_rows(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_topology, GraphKind, TopologyParams};

    fn path(n: usize) -> Graph {
        build_topology(GraphKind::Path, n, TopologyParams::None, 0).unwrap()
    }

    #[test]
    fn path3_metropolis_entries() {
        let m = metropolis_weights(&path(3)).unwrap();
        let expected = Mat::from_rows(&[[2.0 / 3.0, 1.0 / 3.0, 0.0], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [0.0, 1.0 / 3.0, 2.0 / 3.0]]);
        assert!(m.weights().max_abs_diff(&expected) < 1e-15);
        assert!((m.alpha() - 2.0 / 3.0).abs() < 1e-10);
        assert!(m.is_symmetric());
    }

    #[test]
    fn complete_graph_is_averaging() {
        let g = build_topology(GraphKind::Complete, 7, TopologyParams::None, 0).unwrap();
        let m = metropolis_weights(&g).unwrap();
        for v in m.weights().as_slice() {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
        assert!(m.alpha() < 1e-12);
    }

    #[test]
    fn identity_has_rate_one() {
        assert!((mixing_rate(&Mat::identity(2)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_has_rate_zero() {
        let n = 5;
        let j = Mat::from_vec(n, n, vec![1.0 / n as f64; n * n]);
        assert_eq!(mixing_rate(&j).unwrap(), 0.0);
    }

    #[test]
    fn not_stochastic_rejected() {
        let w = Mat::from_rows(&[[0.9, 0.0], [0.0, 1.0]]);
        assert!(matches!(mixing_rate(&w), Err(Error::NotStochastic { .. })));
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = Graph::from_edges(3, GraphKind::Custom, [(0, 1)]).unwrap();
        assert_eq!(metropolis_weights(&g).unwrap_err(), Error::NotConnected);
    }

    #[test]
    fn non_conforming_weight_rejected() {
        let g = path(3);
        let w = Mat::from_vec(3, 3, vec![1.0 / 3.0; 9]);
        assert!(matches!(MixingMatrix::from_dense(w, Some(&g), Construction::External), Err(Error::NotConforming { .. })));
    }

    #[test]
    fn gossip_path3_first_column() {
        let m = metropolis_weights(&path(3)).unwrap();
        let e1 = Mat::from_rows(&[[1.0], [0.0], [0.0]]);
        let out = gossip(&m, &e1, 1);
        for (got, want) in out.as_slice().iter().zip([2.0 / 3.0, 1.0 / 3.0, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn gossip_consensus_is_fixed_point() {
        let m = metropolis_weights(&path(6)).unwrap();
        let x = Mat::from_repeated_row(6, &[1.0, -2.5, 4.0]);
        assert!(gossip(&m, &x, 5).max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn averaging_gossip_hits_the_mean() {
        let n = 4;
        let j = MixingMatrix::from_dense(Mat::from_vec(n, n, vec![0.25; 16]), None, Construction::External).unwrap();
        let x = Mat::from_rows(&[[1.0, 0.0], [2.0, 0.0], [3.0, 4.0], [6.0, 0.0]]);
        let out = gossip(&j, &x, 1);
        for r in out.row_iter() {
            assert!((r[0] - 3.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dense_csv_parsing() {
        let w = parse_dense_csv("0.5,0.5\n0.5, 0.5\n").unwrap();
        assert_eq!(w.rows(), 2);
        assert!(parse_dense_csv("0.5,0.5\n0.5\n").is_err());
        assert!(parse_dense_csv("0.5,a\n0.5,0.5\n").is_err());
        assert!(parse_dense_csv("1,0,0\n0,1,0\n").is_err());
    }

    #[test]
    fn spectrum_of_path3() {
        // eigenvalues of the path-3 Metropolis matrix are {1, 2/3, 0}
        let m = metropolis_weights(&path(3)).unwrap();
        let (lo, hi) = m.spectrum().unwrap();
        assert!(lo.abs() < 1e-9, "{lo}");
        assert!((hi - 2.0 / 3.0).abs() < 1e-9, "{hi}");
    }
}
