//! Top-N expected calibration error with equal-count, confidence-sorted bins.
//!
//! For rank `N`, each record contributes the probability of its `N`-th best
//! class as confidence and a 0/1 indicator of whether that class is the true
//! label as accuracy. Records are sorted by confidence (ascending) and cut
//! into `b` contiguous groups whose sizes differ by at most one, the larger
//! groups coming first. Empty groups are never emitted.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::math::fixed6;
use crate::prob::{top_n_raw, ProbVector};

/// One sample's predicted distribution and its true class.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub probs: ProbVector,
    pub true_label: usize,
}

impl PredictionRecord {
    pub fn new(probs: ProbVector, true_label: usize) -> Result<Self> {
        if true_label >= probs.len() {
            return Err(Error::InvalidInput(format!(
                "label {true_label} outside 0..{}",
                probs.len()
            )));
        }
        Ok(Self { probs, true_label })
    }

    /// Confidence and correctness for the `rank`-th best class.
    pub fn at_rank(&self, rank: usize) -> Result<(f64, bool)> {
        let (class, conf) = top_n_raw(self.probs.as_slice(), rank)?;
        Ok((conf, class == self.true_label))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStats {
    pub count: usize,
    pub mean_conf: f64,
    pub mean_acc: f64,
    /// `mean_acc − mean_conf`; negative means over-confident.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    /// 1-based rank the report describes.
    pub rank: usize,
    /// Non-empty bins in ascending confidence order.
    pub bins: Vec<BinStats>,
    pub ece: f64,
    pub n_total: usize,
}

impl ReliabilityReport {
    /// Overall `mean_conf − mean_acc` across every record.
    pub fn pooled_overconfidence(&self) -> f64 {
        let n = self.n_total as f64;
        self.bins
            .iter()
            .map(|b| b.count as f64 / n * (b.mean_conf - b.mean_acc))
            .sum()
    }

    /// Fraction of records whose rank-N class is the true label.
    pub fn accuracy(&self) -> f64 {
        let n = self.n_total as f64;
        self.bins
            .iter()
            .map(|b| b.count as f64 * b.mean_acc)
            .sum::<f64>()
            / n
    }
}

fn check_bins(num_bins: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("no prediction records".into()));
    }
    if num_bins == 0 {
        return Err(Error::InvalidParameter(
            "number of bins must be at least 1".into(),
        ));
    }
    Ok(())
}

fn scored(records: &[PredictionRecord], rank: usize) -> Result<Vec<(f64, bool)>> {
    records.iter().map(|r| r.at_rank(rank)).collect()
}

/// Sorted positions split into `num_bins` contiguous groups; see module docs.
fn split_sorted(scores: &[(f64, bool)], num_bins: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Correctness is the secondary key so that records with equal confidence
    // land in bins independently of input order.
    order.sort_by(|&a, &b| {
        scores[a]
            .0
            .total_cmp(&scores[b].0)
            .then(scores[a].1.cmp(&scores[b].1))
    });
    let n = order.len();
    let base = n / num_bins;
    let extra = n % num_bins;
    let mut bins = Vec::with_capacity(num_bins.min(n));
    let mut start = 0;
    for i in 0..num_bins {
        let size = base + usize::from(i < extra);
        if size == 0 {
            continue;
        }
        bins.push(order[start..start + size].to_vec());
        start += size;
    }
    bins
}

/// Groups record indices into confidence-sorted, equal-count bins for `rank`.
pub fn bin_by_confidence(
    records: &[PredictionRecord],
    rank: usize,
    num_bins: usize,
) -> Result<Vec<Vec<usize>>> {
    check_bins(num_bins, records.len())?;
    let scores = scored(records, rank)?;
    Ok(split_sorted(&scores, num_bins))
}

fn bin_stats(scores: &[(f64, bool)], members: &[usize]) -> BinStats {
    let count = members.len();
    let (conf_sum, hits) = members.iter().fold((0.0, 0usize), |(c, h), &i| {
        (c + scores[i].0, h + usize::from(scores[i].1))
    });
    let mean_conf = conf_sum / count as f64;
    let mean_acc = hits as f64 / count as f64;
    BinStats {
        count,
        mean_conf,
        mean_acc,
        gap: mean_acc - mean_conf,
    }
}

fn weighted_ece(bins: &[BinStats], n: usize) -> f64 {
    bins.iter()
        .map(|b| b.count as f64 / n as f64 * b.gap.abs())
        .sum()
}

/// Expected calibration error for the `rank`-th best class.
pub fn ece(
    records: &[PredictionRecord],
    rank: usize,
    num_bins: usize,
) -> Result<ReliabilityReport> {
    check_bins(num_bins, records.len())?;
    let scores = scored(records, rank)?;
    let bins: Vec<BinStats> = split_sorted(&scores, num_bins)
        .iter()
        .map(|m| bin_stats(&scores, m))
        .collect();
    Ok(ReliabilityReport {
        rank,
        ece: weighted_ece(&bins, records.len()),
        bins,
        n_total: records.len(),
    })
}

/// ECE with binning done separately inside consecutive mini-batches of
/// `batch_size` records. Bins from all batches are pooled, re-ordered by mean
/// confidence (stable), and weighted by their share of the whole set.
pub fn ece_per_batch(
    records: &[PredictionRecord],
    rank: usize,
    num_bins: usize,
    batch_size: usize,
) -> Result<ReliabilityReport> {
    check_bins(num_bins, records.len())?;
    if batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch size must be at least 1".into(),
        ));
    }
    let mut bins = Vec::new();
    for chunk in records.chunks(batch_size) {
        let scores = scored(chunk, rank)?;
        bins.extend(
            split_sorted(&scores, num_bins)
                .iter()
                .map(|m| bin_stats(&scores, m)),
        );
    }
    bins.sort_by(|a, b| a.mean_conf.total_cmp(&b.mean_conf));
    Ok(ReliabilityReport {
        rank,
        ece: weighted_ece(&bins, records.len()),
        bins,
        n_total: records.len(),
    })
}

/// Reliability-diagram data as CSV: header
/// `rank,bin,count,mean_conf,mean_acc,gap`, one row per bin, six decimals.
pub fn reliability_csv(report: &ReliabilityReport) -> String {
    let mut out = String::from("rank,bin,count,mean_conf,mean_acc,gap\n");
    for (i, b) in report.bins.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            report.rank,
            i,
            b.count,
            fixed6(b.mean_conf),
            fixed6(b.mean_acc),
            fixed6(b.gap)
        );
    }
    out
}
