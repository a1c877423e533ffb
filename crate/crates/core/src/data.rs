//! Datasets and their split across agents.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm};
use crate::model::Sample;
use crate::rng;

/// Fraction of synthetic labels flipped after the planted model assigns them.
pub const SYNTHETIC_LABEL_NOISE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    d_f: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let d_f = samples.first().map(|s| s.features.len()).ok_or_else(|| Error::InvalidParameter("dataset is empty".into()))?;
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != d_f {
                return Err(Error::InvalidParameter(format!("sample {i} has {} features, expected {d_f}", s.features.len())));
            }
            if !s.features.iter().all(|v| v.is_finite()) || !s.label.is_finite() {
                return Err(Error::InvalidParameter(format!("sample {i} is not finite")));
            }
        }
        Ok(Self { samples, d_f })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.d_f
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn max_feature_norm_sq(&self) -> f64 {
        self.samples.iter().map(|s| dot(&s.features, &s.features)).fold(0.0, f64::max)
    }

    /// Number of classes implied by the largest label (`max + 1`).
    pub fn num_classes(&self) -> usize {
        self.samples.iter().map(|s| s.label).fold(0.0, f64::max) as usize + 1
    }

    /// Scales every feature vector to unit Euclidean norm (zero vectors stay zero).
    pub fn normalize_features(&mut self) {
        for s in &mut self.samples {
            let nf = norm(&s.features);
            if nf > 0.0 {
                s.features.iter_mut().for_each(|v| *v /= nf);
            }
        }
    }

    /// Seeded split into `(train, holdout)` with `round(frac·N)` holdout samples.
    pub fn split_holdout(&self, frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::InvalidParameter(format!("holdout fraction must be in (0, 1), got {frac}")));
        }
        let n_test = libm::round(frac * self.len() as f64) as usize;
        if n_test == 0 || n_test >= self.len() {
            return Err(Error::TooFewSamples { samples: self.len(), agents: 1 });
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng::stream(seed, 0x686f_6c64));
        let pick = |ids: &[usize]| Dataset { samples: ids.iter().map(|&i| self.samples[i].clone()).collect(), d_f: self.d_f };
        Ok((pick(&idx[n_test..]), pick(&idx[..n_test])))
    }
}

/// Unit-norm Gaussian features labelled by a planted logistic model, with
/// a `SYNTHETIC_LABEL_NOISE` fraction of labels flipped.
///
/// Label 1 is assigned when the planted score `w*ᵀf` is negative, matching
/// the prediction rule of [`crate::model::RegLogisticModel`].
pub fn generate_synthetic(n_samples: usize, d_f: usize, seed: u64) -> Result<Dataset> {
    if n_samples == 0 || d_f == 0 {
        return Err(Error::InvalidParameter("synthetic data needs n_samples >= 1 and d >= 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut planted: Vec<f64> = (0..d_f).map(|_| rng.sample(StandardNormal)).collect();
    let pn = norm(&planted);
    planted.iter_mut().for_each(|v| *v *= 4.0 / pn);
    let samples = (0..n_samples)
        .map(|_| {
            let mut f: Vec<f64> = (0..d_f).map(|_| rng.sample(StandardNormal)).collect();
            let nf = norm(&f);
            f.iter_mut().for_each(|v| *v /= nf);
            let mut label = if dot(&planted, &f) < 0.0 { 1.0 } else { 0.0 };
            if rng.random::<f64>() < SYNTHETIC_LABEL_NOISE {
                label = 1.0 - label;
            }
            Sample::new(f, label)
        })
        .collect();
    Ok(Dataset { samples, d_f })
}

/// `n` disjoint index shards of equal size `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    shards: Vec<Vec<usize>>,
    m: usize,
}

impl Partition {
    /// Validates disjointness and equal shard sizes.
    pub fn from_shards(shards: Vec<Vec<usize>>) -> Result<Self> {
        let m = shards.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(Error::EmptyShard);
        }
        let mut seen = alloc::collections::BTreeSet::new();
        for s in &shards {
            if s.len() != m {
                return Err(Error::InvalidParameter("shards must have equal size".into()));
            }
            for &i in s {
                if !seen.insert(i) {
                    return Err(Error::InvalidParameter(format!("sample {i} appears in two shards")));
                }
            }
        }
        Ok(Self { shards, m })
    }

    pub fn n_agents(&self) -> usize {
        self.shards.len()
    }

    /// Per-agent sample count.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn shard(&self, agent: usize) -> &[usize] {
        &self.shards[agent]
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    /// All partitioned indices, agent by agent.
    pub fn all_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.shards.iter().flatten().copied()
    }
}

/// Seeded permutation of `0..N`, truncated to `n·⌊N/n⌋` and cut into `n`
/// consecutive blocks.
pub fn partition_uniform(ds: &Dataset, n: usize, seed: u64) -> Result<Partition> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one agent".into()));
    }
    if ds.len() < n {
        return Err(Error::TooFewSamples { samples: ds.len(), agents: n });
    }
    let m = ds.len() / n;
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut rng::seeded(seed));
    idx.truncate(n * m);
    let shards = idx.chunks_exact(m).map(<[usize]>::to_vec).collect();
    Ok(Partition { shards, m })
}
