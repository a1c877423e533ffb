//! Sample losses `ℓ(x; z)` with exact gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// 0/1 for binary models, class index for multiclass ones.
    pub label: f64,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Self { features, label }
    }
}

/// A per-sample loss over a parameter vector of length [`LossModel::dim`].
///
/// The `*_unchecked` style methods assume `x.len() == dim()`; use
/// [`loss_value`] / [`loss_grad`] for checked access.
pub trait LossModel {
    fn dim(&self) -> usize;

    /// Upper estimate of the gradient Lipschitz constant `L`.
    fn smoothness_hint(&self) -> f64;

    fn value(&self, x: &[f64], z: &Sample) -> f64;

    /// `out += scale · ∇ℓ(x; z)`.
    fn add_grad(&self, x: &[f64], z: &Sample, scale: f64, out: &mut [f64]);

    /// Predicted label for `features`.
    fn predict(&self, x: &[f64], features: &[f64]) -> f64;

    fn grad(&self, x: &[f64], z: &Sample) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.add_grad(x, z, 1.0, &mut g);
        g
    }
}

impl<M: LossModel + ?Sized> LossModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn smoothness_hint(&self) -> f64 {
        (**self).smoothness_hint()
    }
    fn value(&self, x: &[f64], z: &Sample) -> f64 {
        (**self).value(x, z)
    }
    fn add_grad(&self, x: &[f64], z: &Sample, scale: f64, out: &mut [f64]) {
        (**self).add_grad(x, z, scale, out)
    }
    fn predict(&self, x: &[f64], features: &[f64]) -> f64 {
        (**self).predict(x, features)
    }
}

fn check_dim<M: LossModel + ?Sized>(model: &M, x: &[f64]) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    Ok(())
}

pub fn loss_value<M: LossModel + ?Sized>(model: &M, x: &[f64], z: &Sample) -> Result<f64> {
    check_dim(model, x)?;
    Ok(model.value(x, z))
}

pub fn loss_grad<M: LossModel + ?Sized>(model: &M, x: &[f64], z: &Sample) -> Result<Vec<f64>> {
    check_dim(model, x)?;
    Ok(model.grad(x, z))
}

/// Mean of per-sample gradients over `shard`, i.e. `∇f_i(x)`.
pub fn local_full_grad<M: LossModel + ?Sized>(model: &M, x: &[f64], shard: &[Sample]) -> Result<Vec<f64>> {
    check_dim(model, x)?;
    if shard.is_empty() {
        return Err(Error::EmptyShard);
    }
    Ok(mean_grad(model, x, shard.iter()))
}

/// Mean gradient over an iterator of samples. Returns zeros when empty.
pub fn mean_grad<'a, M: LossModel + ?Sized>(model: &M, x: &[f64], samples: impl ExactSizeIterator<Item = &'a Sample>) -> Vec<f64> {
    let mut g = vec![0.0; model.dim()];
    let count = samples.len();
    if count == 0 {
        return g;
    }
    let scale = 1.0 / count as f64;
    for z in samples {
        model.add_grad(x, z, scale, &mut g);
    }
    g
}

/// Compares the analytic gradient against central differences with the given
/// `step`. The per-coordinate error is `|g − g_fd| / max(1, |g|, |g_fd|)`;
/// returns true iff the largest one is within `tol`.
pub fn check_gradient<M: LossModel + ?Sized>(model: &M, x: &[f64], z: &Sample, step: f64, tol: f64) -> bool {
    assert!(step > 0.0, "finite-difference step must be positive");
    max_gradient_error(model, x, z, step) <= tol
}

pub fn max_gradient_error<M: LossModel + ?Sized>(model: &M, x: &[f64], z: &Sample, step: f64) -> f64 {
    let analytic = model.grad(x, z);
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = model.value(&probe, z);
        probe[i] = x[i] - step;
        let down = model.value(&probe, z);
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * step);
        let denom = 1.0f64.max(libm::fabs(analytic[i])).max(libm::fabs(fd));
        let err = libm::fabs(analytic[i] - fd) / denom;
        // NaN must fail the check
        if !(err <= worst) {
            worst = if err.is_nan() { f64::INFINITY } else { err };
        }
    }
    worst
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + libm::exp(-a))
    } else {
        let e = libm::exp(a);
        e / (1.0 + e)
    }
}

/// `log(1 + e^a)` without overflow.
#[inline]
fn softplus(a: f64) -> f64 {
    a.max(0.0) + libm::log1p(libm::exp(-libm::fabs(a)))
}

/// Binary logistic loss with the nonconvex regularizer `λ Σ x_i²/(1 + x_i²)`.
///
/// With `a = xᵀf` the data term is `l·log(1 + e^a) + (1 − l)·log(1 + e^{−a})`,
/// so label 1 is predicted when `a < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegLogisticModel {
    d: usize,
    lambda: f64,
    max_feature_norm_sq: f64,
}

impl RegLogisticModel {
    /// Assumes unit-norm features for the smoothness hint.
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(Self { d, lambda, max_feature_norm_sq: 1.0 })
    }

    pub fn with_max_feature_norm_sq(mut self, v: f64) -> Self {
        self.max_feature_norm_sq = v;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn regularizer(&self, x: &[f64]) -> f64 {
        self.lambda * x.iter().map(|v| v * v / (1.0 + v * v)).sum::<f64>()
    }
}

impl LossModel for RegLogisticModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn smoothness_hint(&self) -> f64 {
        0.25 * self.max_feature_norm_sq + 2.0 * self.lambda
    }

    fn value(&self, x: &[f64], z: &Sample) -> f64 {
        let a = dot(x, &z.features);
        let l = z.label;
        l * softplus(a) + (1.0 - l) * softplus(-a) + self.regularizer(x)
    }

    fn add_grad(&self, x: &[f64], z: &Sample, scale: f64, out: &mut [f64]) {
        let a = dot(x, &z.features);
        let coeff = scale * (sigmoid(a) - 1.0 + z.label);
        for ((o, &f), &xi) in out.iter_mut().zip(&z.features).zip(x) {
            let q = 1.0 + xi * xi;
            *o += coeff * f + scale * 2.0 * self.lambda * xi / (q * q);
        }
    }

    fn predict(&self, x: &[f64], features: &[f64]) -> f64 {
        if dot(x, features) < 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// One hidden sigmoid layer followed by a softmax cross-entropy output.
///
/// Parameters are flattened as `[W1 | b1 | W2 | b2]` with `W1` of shape
/// `hidden x input` and `W2` of shape `classes x hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    hidden_dim: usize,
    n_classes: usize,
    smoothness: f64,
}

impl MlpModel {
    pub const DEFAULT_HIDDEN: usize = 64;

    pub fn new(input_dim: usize, hidden_dim: usize, n_classes: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || n_classes < 2 {
            return Err(Error::InvalidParameter("mlp needs input >= 1, hidden >= 1, classes >= 2".into()));
        }
        Ok(Self { input_dim, hidden_dim, n_classes, smoothness: 1.0 })
    }

    /// No closed-form `L` is known for this model; the caller supplies one.
    pub fn with_smoothness(mut self, l: f64) -> Self {
        self.smoothness = l;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (w1, rest) = x.split_at(self.hidden_dim * self.input_dim);
        let (b1, rest) = rest.split_at(self.hidden_dim);
        let (w2, b2) = rest.split_at(self.n_classes * self.hidden_dim);
        (w1, b1, w2, b2)
    }

    /// Hidden activations and output logits.
    fn forward(&self, x: &[f64], features: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (w1, b1, w2, b2) = self.split(x);
        let hidden: Vec<f64> = w1
            .chunks_exact(self.input_dim)
            .zip(b1)
            .map(|(row, b)| sigmoid(dot(row, features) + b))
            .collect();
        let logits = w2.chunks_exact(self.hidden_dim).zip(b2).map(|(row, b)| dot(row, &hidden) + b).collect();
        (hidden, logits)
    }

    fn class_of(&self, label: f64) -> usize {
        let c = label as usize;
        assert!(c < self.n_classes && label >= 0.0, "label {label} out of range");
        c
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + libm::log(v.iter().map(|x| libm::exp(x - m)).sum::<f64>())
}

impl LossModel for MlpModel {
    fn dim(&self) -> usize {
        self.hidden_dim * (self.input_dim + 1) + self.n_classes * (self.hidden_dim + 1)
    }

    fn smoothness_hint(&self) -> f64 {
        self.smoothness
    }

    fn value(&self, x: &[f64], z: &Sample) -> f64 {
        let (_, logits) = self.forward(x, &z.features);
        log_sum_exp(&logits) - logits[self.class_of(z.label)]
    }

    fn add_grad(&self, x: &[f64], z: &Sample, scale: f64, out: &mut [f64]) {
        let y = self.class_of(z.label);
        let (hidden, logits) = self.forward(x, &z.features);
        let lse = log_sum_exp(&logits);
        let delta_out: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(c, &l)| libm::exp(l - lse) - if c == y { 1.0 } else { 0.0 })
            .collect();
        let (_, _, w2, _) = self.split(x);
        let mut delta_hidden = vec![0.0; self.hidden_dim];
        for (c, row) in w2.chunks_exact(self.hidden_dim).enumerate() {
            for (dh, &w) in delta_hidden.iter_mut().zip(row) {
                *dh += w * delta_out[c];
            }
        }
        for (dh, &h) in delta_hidden.iter_mut().zip(&hidden) {
            *dh *= h * (1.0 - h);
        }

        let (gw1, rest) = out.split_at_mut(self.hidden_dim * self.input_dim);
        let (gb1, rest) = rest.split_at_mut(self.hidden_dim);
        let (gw2, gb2) = rest.split_at_mut(self.n_classes * self.hidden_dim);
        for (j, row) in gw1.chunks_exact_mut(self.input_dim).enumerate() {
            let s = scale * delta_hidden[j];
            for (g, &f) in row.iter_mut().zip(&z.features) {
                *g += s * f;
            }
            gb1[j] += s;
        }
        for (c, row) in gw2.chunks_exact_mut(self.hidden_dim).enumerate() {
            let s = scale * delta_out[c];
            for (g, &h) in row.iter_mut().zip(&hidden) {
                *g += s * h;
            }
            gb2[c] += s;
        }
    }

    fn predict(&self, x: &[f64], features: &[f64]) -> f64 {
        let (_, logits) = self.forward(x, features);
        let mut best = 0;
        for (c, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = c;
            }
        }
        best as f64
    }
}
