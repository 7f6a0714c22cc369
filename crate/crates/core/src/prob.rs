//! Logit and probability vectors, temperature softmax and top-N lookup.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math;

/// Tolerance on `|Σp − 1|` accepted by [`ProbVector::new`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Unnormalized scores over `K ≥ 2` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("logit {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A distribution over `K` classes: entries in `[0, 1]`, summing to 1 within
/// [`SIMPLEX_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        let mut sum = 0.0;
        for (i, &p) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!(
                    "probability {i} = {p} outside [0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self(values))
    }

    /// Caller guarantees the simplex invariant.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(
            (values.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL,
            "raw vector off the simplex"
        );
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Shannon entropy in nats; zero entries contribute zero.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * math::ln(p.max(math::LOG_FLOOR)))
            .sum::<f64>()
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "temperature must be positive and finite, got {t}"
        )))
    }
}

/// `log softmax(x / t)` on a raw slice. No validation.
pub(crate) fn log_softmax_raw(x: &[f64], t: f64) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = x.iter().map(|&v| (v - max) / t).collect();
    let log_z = math::ln(shifted.iter().map(|&s| math::exp(s)).sum::<f64>());
    shifted.into_iter().map(|s| s - log_z).collect()
}

/// `softmax(x / t)` on a raw slice. No validation.
pub(crate) fn softmax_raw(x: &[f64], t: f64) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|&v| math::exp((v - max) / t)).collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    out
}

/// Temperature softmax `exp(x_i / t) / Σ_j exp(x_j / t)`, stabilized by
/// subtracting the maximum logit.
pub fn softmax_t(logits: &LogitVector, t: f64) -> Result<ProbVector> {
    check_temperature(t)?;
    Ok(ProbVector::from_raw(softmax_raw(logits.as_slice(), t)))
}

/// Natural log of [`softmax_t`], computed without forming the exponentials
/// of unshifted logits.
pub fn log_softmax_t(logits: &LogitVector, t: f64) -> Result<Vec<f64>> {
    check_temperature(t)?;
    Ok(log_softmax_raw(logits.as_slice(), t))
}

pub(crate) fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate().skip(1) {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Class indices ordered by decreasing probability, lower index first on ties.
pub fn ranked_classes(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// The `n`-th best class (1-based) and its probability.
pub fn top_n(probs: &ProbVector, n: usize) -> Result<(usize, f64)> {
    top_n_raw(probs.as_slice(), n)
}

pub(crate) fn top_n_raw(probs: &[f64], n: usize) -> Result<(usize, f64)> {
    if n == 0 || n > probs.len() {
        return Err(Error::InvalidParameter(format!(
            "rank {n} outside 1..={}",
            probs.len()
        )));
    }
    if n == 1 {
        let i = argmax(probs);
        return Ok((i, probs[i]));
    }
    let order = ranked_classes(probs);
    let i = order[n - 1];
    Ok((i, probs[i]))
}
