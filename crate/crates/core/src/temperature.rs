//! Post-hoc temperature scaling and two-stream score combination.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::prob::{log_softmax_raw, LogitVector};

pub const DEFAULT_T_MIN: f64 = 0.05;
pub const DEFAULT_T_MAX: f64 = 20.0;
const GRID_POINTS: usize = 64;
const GOLDEN_TOL: f64 = 1e-4;

/// A validation sample: fixed network logits and the true class.
pub type LabeledLogits = (LogitVector, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureFit {
    pub t_star: f64,
    pub nll_at_t_star: f64,
    pub nll_at_unit: f64,
    pub search_bounds: (f64, f64),
}

/// Mean negative log-likelihood of the true labels under `softmax(logits / t)`.
pub fn mean_nll(validation: &[LabeledLogits], t: f64) -> f64 {
    let total: f64 = validation
        .iter()
        .map(|(logits, y)| -log_softmax_raw(logits.as_slice(), t)[*y])
        .sum();
    total / validation.len() as f64
}

fn validate(validation: &[LabeledLogits], bounds: (f64, f64)) -> Result<()> {
    if validation.is_empty() {
        return Err(Error::InvalidInput("empty validation set".into()));
    }
    let (lo, hi) = bounds;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "temperature bounds must satisfy 0 < t_min < t_max, got ({lo}, {hi})"
        )));
    }
    if let Some((i, (l, y))) = validation
        .iter()
        .enumerate()
        .find(|(_, (l, y))| *y >= l.len())
    {
        return Err(Error::InvalidInput(format!(
            "sample {i}: label {y} outside 0..{}",
            l.len()
        )));
    }
    Ok(())
}

/// `count` points log-spaced over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (math::ln(lo), math::ln(hi));
    let mut grid: Vec<f64> = (0..count)
        .map(|i| math::exp(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    grid
}

/// Golden-section minimization of `f` on `[lo, hi]` until the bracket is
/// narrower than `tol`. Returns the midpoint of the final bracket.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Fits a single temperature on fixed validation logits by minimizing
/// [`mean_nll`]: a 64-point log grid (containing `t = 1` whenever it lies
/// inside `bounds`) locates the best cell, then golden-section search refines
/// within its neighbours. The returned point is never worse than any grid
/// point.
pub fn fit_temperature(validation: &[LabeledLogits], bounds: (f64, f64)) -> Result<TemperatureFit> {
    validate(validation, bounds)?;
    let (lo, hi) = bounds;
    let nll = |t: f64| mean_nll(validation, t);

    let mut grid = if lo < 1.0 && 1.0 < hi {
        let mut g = log_grid(lo, hi, GRID_POINTS - 1);
        g.push(1.0);
        g.sort_by(f64::total_cmp);
        g
    } else {
        log_grid(lo, hi, GRID_POINTS)
    };
    grid.dedup();

    let values: Vec<f64> = grid.iter().map(|&t| nll(t)).collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    let left = grid[best.saturating_sub(1)];
    let right = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_section(nll, left, right, GOLDEN_TOL);
    let refined_nll = nll(refined);

    let (t_star, nll_at_t_star) = if refined_nll < values[best] {
        (refined, refined_nll)
    } else {
        (grid[best], values[best])
    };
    Ok(TemperatureFit {
        t_star,
        nll_at_t_star,
        nll_at_unit: nll(1.0),
        search_bounds: bounds,
    })
}

/// One n-best entry with its acoustic and language-model log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHypothesis {
    pub id: String,
    pub am_logp: f64,
    pub lm_logp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedHypothesis {
    pub id: String,
    pub score: f64,
    /// Position in the input list.
    pub input_index: usize,
}

/// Scores `am_logp / t1 + lm_logp / t2` for every hypothesis and ranks them
/// best first; equal scores keep input order. The winner is element 0.
pub fn combine_scores(
    hyps: &[ScoredHypothesis],
    t1: f64,
    t2: f64,
) -> Result<Vec<RankedHypothesis>> {
    if hyps.is_empty() {
        return Err(Error::InvalidInput("no hypotheses to combine".into()));
    }
    for (name, t) in [("t1", t1), ("t2", t2)] {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {t}"
            )));
        }
    }
    if let Some(h) = hyps
        .iter()
        .find(|h| !h.am_logp.is_finite() || !h.lm_logp.is_finite())
    {
        return Err(Error::InvalidInput(format!(
            "hypothesis `{}` has a non-finite score",
            h.id
        )));
    }
    let mut ranked: Vec<RankedHypothesis> = hyps
        .iter()
        .enumerate()
        .map(|(i, h)| RankedHypothesis {
            id: h.id.clone(),
            score: h.am_logp / t1 + h.lm_logp / t2,
            input_index: i,
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(ranked)
}
