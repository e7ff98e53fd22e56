//! Evaluation metrics and rank statistics. The positive class is the
//! minority class throughout.

mod gamma;
mod ranks;

pub use gamma::{chi2_survival, ln_gamma, regularized_upper_gamma};
pub use ranks::{friedman, mean_ranks, nemenyi_cd, FriedmanResult, RankTable, NEMENYI_Q05};

use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

pub fn confusion(y_true: &[bool], y_pred: &[bool]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape("confusion", y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::Dataset("confusion matrix of an empty prediction".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Harmonic mean of precision and recall; 0 when there are no true positives.
pub fn f1(cm: &ConfusionMatrix) -> f64 {
    if cm.tp == 0 {
        return 0.0;
    }
    let p = cm.tp as f64 / (cm.tp + cm.fp) as f64;
    let r = cm.tp as f64 / (cm.tp + cm.fn_) as f64;
    2.0 * p * r / (p + r)
}

/// `sqrt(TPR · TNR)`; a class with no members contributes a rate of 0.
pub fn g_mean(cm: &ConfusionMatrix) -> f64 {
    let rate = |hit: usize, miss: usize| if hit + miss == 0 { 0.0 } else { hit as f64 / (hit + miss) as f64 };
    (rate(cm.tp, cm.fn_) * rate(cm.tn, cm.fp)).sqrt()
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc", labels.len(), scores.len()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Dataset("AUC needs both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("AUC scores".into()));
    }
    Ok((pos, neg))
}

/// Mann-Whitney AUC via the rank-sum formula, ties counted as ½.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// AUC by enumerating every positive/negative pair.
pub fn auc_pairwise(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut wins = 0.0;
    for (sp, _) in scores.iter().zip(labels).filter(|(_, &l)| l) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, &l)| !l) {
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos * neg) as f64)
}

/// Ascending 1-based ranks with ties averaged.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `10 · log10(1 / MSE)` for data on `[0, 1]`; `+∞` when the inputs agree.
pub fn psnr(reference: &Matrix, test: &Matrix) -> Result<f64> {
    if reference.shape() != test.shape() {
        return Err(Error::shape("psnr", format!("{:?}", reference.shape()), format!("{:?}", test.shape())));
    }
    if reference.is_empty() {
        return Err(Error::Dataset("PSNR of an empty matrix".into()));
    }
    let mse = reference.data().iter().zip(test.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("pearson", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::Dataset("Pearson correlation needs at least 2 points".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Dataset("Pearson correlation of a constant sequence".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Sorted values linearly resampled to `len` evenly spaced quantile levels.
pub fn resample_quantiles(values: &[f64], len: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if len == 1 || sorted.len() == 1 {
        return vec![sorted[0]; len];
    }
    (0..len)
        .map(|i| {
            let pos = i as f64 / (len - 1) as f64 * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(sorted.len() - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect()
}

/// Pearson correlation between the quantile functions of two samples, both
/// resampled to the longer sample's length. 1 means identical shape up to a
/// positive affine map.
pub fn quantile_pearson(real: &[f64], synthetic: &[f64]) -> Result<f64> {
    if real.is_empty() || synthetic.is_empty() {
        return Err(Error::Dataset("quantile correlation of an empty sample".into()));
    }
    let len = real.len().max(synthetic.len());
    pearson(&resample_quantiles(real, len), &resample_quantiles(synthetic, len))
}

/// Counts of `values` in `bins` equal-width bins over `[0, 1]`; values
/// outside the range land in the end bins.
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Empirical CDF of `values` evaluated at each of `points`.
pub fn ecdf(values: &[f64], points: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    points
        .iter()
        .map(|p| sorted.partition_point(|v| v <= p) as f64 / sorted.len() as f64)
        .collect()
}

/// Mean absolute gap between two empirical CDFs on a 101-point grid over
/// `[0, 1]`.
pub fn mean_ecdf_distance(a: &[f64], b: &[f64]) -> f64 {
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let fa = ecdf(a, &grid);
    let fb = ecdf(b, &grid);
    fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).sum::<f64>() / grid.len() as f64
}
