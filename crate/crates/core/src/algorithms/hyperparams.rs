use alloc::format;

use crate::error::{Error, Result};
use crate::mixing::effective_alpha;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Independent uniform draws; the default.
    #[default]
    WithReplacement,
    /// `b` distinct shard samples; `b = m` uses the whole shard.
    WithoutReplacement,
}

/// DESTRESS parameters. The number of outer iterations comes from the
/// run's [`super::Budget`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub eta: f64,
    pub s_inner: usize,
    pub batch: usize,
    pub k_in: usize,
    pub k_out: usize,
    pub accelerated: bool,
    pub sampling: Sampling,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", self.eta)));
        }
        if self.s_inner == 0 || self.batch == 0 || self.k_in == 0 || self.k_out == 0 {
            return Err(Error::InvalidParameter("S, b, K_in and K_out must all be at least 1".into()));
        }
        Ok(())
    }
}

/// GT-SARAH parameters: full local gradients every `q` iterations,
/// mini-batches of `batch` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtSarahParams {
    pub eta: f64,
    pub batch: usize,
    pub q: usize,
    pub sampling: Sampling,
}

impl GtSarahParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", self.eta)));
        }
        if self.batch == 0 || self.q == 0 {
            return Err(Error::InvalidParameter("batch and q must be at least 1".into()));
        }
        Ok(())
    }
}

/// DSGD step sizes `η_t = η₀ / (1 + t/τ)`; `tau = None` means `T/10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub eta0: f64,
    pub tau: Option<f64>,
}

impl StepSchedule {
    pub fn eta(&self, t: usize, total: usize) -> f64 {
        let tau = self.tau.unwrap_or_else(|| (total as f64 / 10.0).max(1.0));
        self.eta0 / (1.0 + t as f64 / tau)
    }
}

/// The parameter choices that give DESTRESS its optimal IFO complexity:
///
/// ```text
/// S = ⌈√(mn)⌉   b = ⌈√(m/n)⌉   K_out = ⌈log(√(nb) + 1)/√(1 − α)⌉
/// K_in = ⌈log 2/√(1 − α)⌉   η = 1/(160 L)
/// ```
///
/// with Chebyshev-accelerated mixing.
pub fn derive_hyperparams(m: usize, n: usize, alpha: f64, smoothness: f64) -> Result<Hyperparams> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("m and n must be positive".into()));
    }
    if !(alpha < 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("mixing rate must be nonnegative, got {alpha}")));
    }
    if !(smoothness > 0.0) {
        return Err(Error::InvalidParameter(format!("smoothness must be positive, got {smoothness}")));
    }
    let (mf, nf) = (m as f64, n as f64);
    let s_inner = libm::ceil(libm::sqrt(mf * nf)) as usize;
    let batch = libm::ceil(libm::sqrt(mf / nf)) as usize;
    let root_gap = libm::sqrt(1.0 - alpha);
    let k_out = libm::ceil(libm::log(libm::sqrt(nf * batch as f64) + 1.0) / root_gap) as usize;
    let k_in = libm::ceil(core::f64::consts::LN_2 / root_gap) as usize;
    Ok(Hyperparams {
        eta: 1.0 / (160.0 * smoothness),
        s_inner,
        batch,
        k_in: k_in.max(1),
        k_out: k_out.max(1),
        accelerated: true,
        sampling: Sampling::WithReplacement,
    })
}

/// The largest step size allowed by the DESTRESS convergence theorem:
///
/// ```text
/// (1/L) · min{ (1−a_in)(1−a_out) / (10 (1 + a_in a_out √(nb)) (√(S/(nb)) + 1)),
///              (1−a_in)³ / (10 a_in),
///              (1−a_in)^{3/2} (1−a_out) / (4√6 a_in a_out) }
/// ```
///
/// where `a_in`, `a_out` are the contraction factors of the inner and outer
/// mixing steps. Terms whose denominators vanish are unbounded.
pub fn step_size_bound(h: &Hyperparams, alpha: f64, smoothness: f64, n: usize) -> f64 {
    let a_in = effective_alpha(alpha, h.k_in, h.accelerated);
    let a_out = effective_alpha(alpha, h.k_out, h.accelerated);
    let nb = (n * h.batch) as f64;
    let first = (1.0 - a_in) * (1.0 - a_out)
        / (10.0 * (1.0 + a_in * a_out * libm::sqrt(nb)) * (libm::sqrt(h.s_inner as f64 / nb) + 1.0));
    let second = if a_in > 0.0 { libm::pow(1.0 - a_in, 3.0) / (10.0 * a_in) } else { f64::INFINITY };
    let third = if a_in * a_out > 0.0 {
        libm::pow(1.0 - a_in, 1.5) * (1.0 - a_out) / (4.0 * libm::sqrt(6.0) * a_in * a_out)
    } else {
        f64::INFINITY
    };
    first.min(second).min(third) / smoothness
}

/// Advisory check of `η` against [`step_size_bound`].
pub fn validate_step_size(h: &Hyperparams, alpha: f64, smoothness: f64, n: usize) -> bool {
    h.eta <= step_size_bound(h, alpha, smoothness, n)
}
