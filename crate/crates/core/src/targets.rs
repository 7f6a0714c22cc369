//! Supervision distributions: one-hot, label-smoothed, temperature-softened
//! teacher labels and their convex interpolation.

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::prob::{softmax_t, LogitVector, ProbVector};

/// A true class among `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HardLabel {
    class_index: usize,
    k: usize,
}

impl HardLabel {
    pub fn new(class_index: usize, k: usize) -> Result<Self> {
        if k == 0 || class_index >= k {
            return Err(Error::InvalidInput(format!(
                "class {class_index} outside 0..{k}"
            )));
        }
        Ok(Self { class_index, k })
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }
}

fn unit_interval(name: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    epsilon: f64,
}

impl SmoothingConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(Self {
            epsilon: unit_interval("epsilon", epsilon)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Interpolation weight on the hard label and teacher temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationConfig {
    lambda: f64,
    temperature: f64,
}

impl InterpolationConfig {
    pub fn new(lambda: f64, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self {
            lambda: unit_interval("lambda", lambda)?,
            temperature,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

pub fn one_hot(label: HardLabel) -> ProbVector {
    let mut v = vec![0.0; label.k];
    v[label.class_index] = 1.0;
    ProbVector::from_raw(v)
}

/// `y − ε (y − 1/k)`: the true class keeps `1 − ε + ε/k`, every other class
/// gets `ε/k`.
pub fn smooth_label(label: HardLabel, cfg: SmoothingConfig) -> ProbVector {
    let uniform = 1.0 / label.k as f64;
    let eps = cfg.epsilon;
    let v = (0..label.k)
        .map(|i| {
            let y = if i == label.class_index { 1.0 } else { 0.0 };
            y - eps * (y - uniform)
        })
        .collect();
    ProbVector::from_raw(v)
}

/// Teacher distribution `softmax(v / T)`.
pub fn soft_label(teacher_logits: &LogitVector, temperature: f64) -> Result<ProbVector> {
    softmax_t(teacher_logits, temperature)
}

/// `λ · one_hot(hard) + (1 − λ) · soft`.
pub fn interpolate_target(hard: HardLabel, soft: &ProbVector, lambda: f64) -> Result<ProbVector> {
    let lambda = unit_interval("lambda", lambda)?;
    if soft.len() != hard.k {
        return Err(Error::DimensionMismatch {
            expected: hard.k,
            found: soft.len(),
        });
    }
    let v = soft
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let y = if i == hard.class_index { 1.0 } else { 0.0 };
            lambda * y + (1.0 - lambda) * s
        })
        .collect();
    Ok(ProbVector::from_raw(v))
}
