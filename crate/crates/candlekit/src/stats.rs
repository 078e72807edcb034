//! Nonparametric evaluation: two-sample Kolmogorov-Smirnov test,
//! conditional-distribution summaries with boxplot notches, and
//! Mann-Whitney/AUC significance for classifiers.
//!
//! Conventions: distribution summaries report basis points (1 bp = 1e-4 as
//! a fraction) with the sample (n-1) standard deviation; quartiles use
//! linear interpolation on the sorted sample; Mann-Whitney uses midranks,
//! so tied pairs contribute one half.

use thiserror::Error;

use crate::market::Class;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample must be non-empty")]
    EmptySample,
    #[error("both classes must be present")]
    SingleClass,
    #[error("length mismatch: {left} labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
}

/// Two-sample K-S statistic and its asymptotic p-value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    /// gamma = sqrt(n1 n2 / (n1 + n2)) * sup |F1 - F2|.
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    v
}

/// Supremum distance between the empirical cdfs of two sorted samples.
fn ecdf_sup_distance(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut sup = 0.0f64;
    while i < a.len() || j < b.len() {
        let z = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= z {
            i += 1;
        }
        while j < b.len() && b[j] <= z {
            j += 1;
        }
        let diff = (i as f64 / n1 - j as f64 / n2).abs();
        if diff > sup {
            sup = diff;
        }
    }
    sup
}

/// Asymptotic Kolmogorov survival function
/// Q(gamma) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 gamma^2),
/// truncated once terms fall below 1e-12.
pub fn kolmogorov_q(gamma: f64) -> f64 {
    // Below ~0.04 the survival function is 1 to far beyond double
    // precision and the series needs hundreds of terms; short-circuit.
    if gamma < 0.04 {
        return 1.0;
    }
    let mut sum = 0.0f64;
    for k in 1..=200u32 {
        let term = 2.0 * (-2.0 * (k as f64) * (k as f64) * gamma * gamma).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test against the null of identical cdfs.
pub fn ks_two_sample(s1: &[f64], s2: &[f64]) -> Result<KsResult, StatsError> {
    if s1.is_empty() || s2.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let a = sorted(s1);
    let b = sorted(s2);
    let sup = ecdf_sup_distance(&a, &b);
    let (n1, n2) = (s1.len(), s2.len());
    let scale = ((n1 as f64 * n2 as f64) / (n1 as f64 + n2 as f64)).sqrt();
    let statistic = scale * sup;
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_q(statistic),
        n1,
        n2,
    })
}

/// Summary of a return sample, reported in basis points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistributionSummary {
    pub mean_bp: f64,
    /// Sample (n-1) standard deviation; absent for singleton samples.
    pub std_bp: Option<f64>,
    pub median_bp: f64,
    pub q1_bp: f64,
    pub q3_bp: f64,
    /// McGill notch half-width 1.57 * IQR / sqrt(n); absent for n < 2.
    pub notch_bp: Option<f64>,
    pub n: usize,
}

/// Fraction-to-basis-point scale.
pub const BP: f64 = 1e4;

/// Linear-interpolation quantile of a sorted sample.
fn quantile_sorted(xs: &[f64], p: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return xs[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    xs[lo] + frac * (xs[hi] - xs[lo])
}

/// Summarize a sample of return fractions in basis points.
pub fn summarize(sample: &[f64]) -> Result<DistributionSummary, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = sample.len();
    let xs = sorted(sample);
    let constant = xs.iter().all(|&x| x == xs[0]);
    let mean = if constant {
        xs[0]
    } else {
        xs.iter().sum::<f64>() / n as f64
    };
    let std = if n < 2 {
        None
    } else if constant {
        Some(0.0)
    } else {
        let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        Some((ss / (n - 1) as f64).sqrt())
    };
    let q1 = quantile_sorted(&xs, 0.25);
    let median = quantile_sorted(&xs, 0.5);
    let q3 = quantile_sorted(&xs, 0.75);
    let notch = if n >= 2 {
        Some(1.57 * (q3 - q1) / (n as f64).sqrt())
    } else {
        None
    };
    Ok(DistributionSummary {
        mean_bp: mean * BP,
        std_bp: std.map(|s| s * BP),
        median_bp: median * BP,
        q1_bp: q1 * BP,
        q3_bp: q3 * BP,
        notch_bp: notch.map(|v| v * BP),
        n,
    })
}

/// AUC with its Mann-Whitney-Wilcoxon normal approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AucResult {
    pub auc: f64,
    /// Mann-Whitney U of the positive class, midrank convention.
    pub u: f64,
    pub z: f64,
    /// Area of the standard normal below Z; reported only for Z >= 0,
    /// negative scores imply a classifier worse than chance.
    pub significance: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Midranks (1-based) of a score vector; ties share the average rank.
fn midranks(scores: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// AUC via the rank formulation of the Mann-Whitney U statistic, with the
/// Gaussian Z approximation (mean n_P n_N / 2, variance
/// n_P n_N (n_P + n_N + 1) / 12).
pub fn mww_auc(scores: &[f64], labels: &[Class]) -> Result<AucResult, StatsError> {
    if scores.len() != labels.len() {
        return Err(StatsError::LengthMismatch {
            left: labels.len(),
            right: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n_pos = labels.iter().filter(|c| **c == Class::Positive).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(StatsError::SingleClass);
    }
    let ranks = midranks(scores);
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, c)| **c == Class::Positive)
        .map(|(r, _)| *r)
        .sum();
    let np = n_pos as f64;
    let nn = n_neg as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    let auc = u / (np * nn);
    let mu = np * nn / 2.0;
    let sigma = (np * nn * (np + nn + 1.0) / 12.0).sqrt();
    let z = (u - mu) / sigma;
    let significance = if z >= 0.0 { Some(normal_cdf(z)) } else { None };
    Ok(AucResult {
        auc,
        u,
        z,
        significance,
        n_pos,
        n_neg,
    })
}

/// Fraction of matching positions.
pub fn accuracy(labels: &[Class], predictions: &[Class]) -> Result<f64, StatsError> {
    if labels.len() != predictions.len() {
        return Err(StatsError::LengthMismatch {
            left: labels.len(),
            right: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let hits = labels
        .iter()
        .zip(predictions)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
