//! Generator objective terms and the level-mixed training buffer, as plain
//! functions over precomputed discriminator scores and features.

use ndarray::ArrayView3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest probability fed to the log in [`cgan_generator_loss`].
pub const D_FAKE_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the adversarial term.
    pub gamma: f64,
    /// Weight of the artifacts penalty.
    pub lambda: f64,
}

impl LossWeights {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        let w = LossWeights { gamma, lambda };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Positive part of how much more artifact-like the generated image scores
/// than the sharp one.
pub fn artifacts_penalty(d_generated: f64, d_sharp: f64) -> f64 {
    (d_generated - d_sharp).max(0.0)
}

fn mean(xs: &[f64], what: &str) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Parameter(format!("{what} scores are empty")));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Empirical critic gap: mean score on corrupted inputs minus mean score on
/// observed blurred images.
pub fn wasserstein_estimate(scores_corrupted: &[f64], scores_observed: &[f64]) -> Result<f64> {
    Ok(mean(scores_corrupted, "corrupted")? - mean(scores_observed, "observed")?)
}

/// `log(1 − d_fake)`, with `d_fake` clamped below 1.
pub fn cgan_generator_loss(d_fake: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d_fake) {
        return Err(Error::Parameter(format!("discriminator output {d_fake} is not in [0, 1]")));
    }
    Ok((1.0 - d_fake.min(D_FAKE_CLAMP)).ln())
}

/// Mean squared difference of two (C, H, W) feature tensors.
pub fn content_loss(a: ArrayView3<'_, f64>, b: ArrayView3<'_, f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "feature shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.is_empty() {
        return Err(Error::Shape("empty feature tensors".into()));
    }
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

pub fn total_loss(content: f64, adversarial: f64, penalty: f64, w: LossWeights) -> f64 {
    content + w.gamma * adversarial + w.lambda * penalty
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferPolicy {
    /// Share of the buffer drawn from each level's outputs.
    pub proportions: Vec<f64>,
    pub capacity: usize,
}

impl Default for BufferPolicy {
    fn default() -> Self {
        BufferPolicy {
            proportions: vec![0.5, 0.3, 0.2],
            capacity: 1000,
        }
    }
}

impl BufferPolicy {
    pub fn with_capacity(capacity: usize) -> Self {
        BufferPolicy {
            capacity,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::Parameter("buffer capacity must be > 0".into()));
        }
        if self.proportions.is_empty() || self.proportions.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Parameter(format!("bad proportions {:?}", self.proportions)));
        }
        let total: f64 = self.proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("proportions sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Per-level counts by largest-remainder rounding. Ties go to the earlier
/// level, and the counts always sum to the capacity.
pub fn buffer_counts(policy: &BufferPolicy) -> Result<Vec<usize>> {
    policy.validate()?;
    let quotas: Vec<f64> = policy.proportions.iter().map(|p| p * policy.capacity as f64).collect();
    // the epsilon keeps 1000 × 0.3 from flooring to 299
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // quantised so rounding noise cannot split an exact tie
    let remainder = |i: usize| ((quotas[i] - counts[i] as f64) * 1e9).round() as i64;
    order.sort_by(|&i, &j| remainder(j).cmp(&remainder(i)).then(i.cmp(&j)));
    for &i in order.iter().take(policy.capacity.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

/// Draws `capacity` items, `buffer_counts` of them from each level in level
/// order. Within a level items are taken from reshuffled passes, so repeats
/// only occur once a level is exhausted.
pub fn buffer_sample<T: Clone>(items_by_level: &[Vec<T>], policy: &BufferPolicy, seed: u64) -> Result<Vec<T>> {
    let counts = buffer_counts(policy)?;
    if items_by_level.len() != counts.len() {
        return Err(Error::Parameter(format!(
            "{} item lists for {} proportions",
            items_by_level.len(),
            counts.len()
        )));
    }
    if let Some(i) = items_by_level.iter().position(Vec::is_empty) {
        return Err(Error::Parameter(format!("level {} has no items", i + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(policy.capacity);
    for (items, &count) in items_by_level.iter().zip(&counts) {
        let mut order: Vec<usize> = (0..items.len()).collect();
        for k in 0..count {
            if k % items.len() == 0 {
                order.shuffle(&mut rng);
            }
            out.push(items[order[k % items.len()]].clone());
        }
    }
    Ok(out)
}
