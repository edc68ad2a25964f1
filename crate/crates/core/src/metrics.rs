//! Position error, error histograms and relative entropy.

use std::io::Write;

use statrs::function::erf::erfc;
use thiserror::Error;

use crate::models::EstimatedPositions;
use crate::netgen::{NetworkTruth, Point2};

/// Floor applied to reference probabilities before taking logarithms.
pub const Q_FLOOR: f64 = 1e-12;
/// Tolerance on `sum = 1` accepted by [`relative_entropy`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

pub const DEFAULT_BIN_WIDTH: f64 = 0.0049;
pub const DEFAULT_SIGMA_REF: f64 = 0.008;
pub const DEFAULT_TAIL_THRESHOLD: f64 = 0.022;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input is empty")]
    EmptyInput,
    #[error("distribution sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("non-finite value in input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub pe: f64,
    pub per_sensor_errors: Vec<f64>,
    /// Mean and variance of signed edge errors (zero when none are given).
    pub f1: f64,
    pub f2: f64,
    /// Mean and variance of absolute edge errors.
    pub f1_abs: f64,
    pub f2_abs: f64,
}

/// Mean and population variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

pub fn position_error_points(
    truth: &[Point2],
    est: &[Point2],
) -> Result<(f64, Vec<f64>), MetricsError> {
    if truth.len() != est.len() {
        return Err(MetricsError::LengthMismatch(truth.len(), est.len()));
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let per: Vec<f64> = truth.iter().zip(est).map(|(a, b)| a.dist(b)).collect();
    let pe = per.iter().sum::<f64>() / per.len() as f64;
    Ok((pe, per))
}

/// PE plus signed and absolute error moments of `edge_errors`.
pub fn position_error(
    truth: &NetworkTruth,
    est: &EstimatedPositions,
    edge_errors: &[f64],
) -> Result<AccuracyReport, MetricsError> {
    let (pe, per_sensor_errors) = position_error_points(&truth.sensors, &est.x_hat)?;
    let (f1, f2) = mean_var(edge_errors);
    let abs: Vec<f64> = edge_errors.iter().map(|e| e.abs()).collect();
    let (f1_abs, f2_abs) = mean_var(&abs);
    Ok(AccuracyReport {
        pe,
        per_sensor_errors,
        f1,
        f2,
        f1_abs,
        f2_abs,
    })
}

/// Zero-centred histogram with bins `[(k - 1/2) w, (k + 1/2) w)` for
/// `k = -K..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorHistogram {
    pub bin_width: f64,
    /// Largest bin index `K`; there are `2K + 1` bins.
    pub half_bins: usize,
    pub counts: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl ErrorHistogram {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Signed index of bin `b`.
    pub fn bin_index(&self, b: usize) -> i64 {
        b as i64 - self.half_bins as i64
    }

    pub fn bounds(&self, b: usize) -> (f64, f64) {
        let k = self.bin_index(b) as f64;
        ((k - 0.5) * self.bin_width, (k + 0.5) * self.bin_width)
    }

    pub fn bin_edges(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|b| self.bounds(b)).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn bin_of(e: f64, w: f64) -> i64 {
    (e / w + 0.5).floor() as i64
}

pub fn histogram(errors: &[f64], bin_width: f64) -> Result<ErrorHistogram, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(MetricsError::NonPositive("bin_width"));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let ks: Vec<i64> = errors.iter().map(|&e| bin_of(e, bin_width)).collect();
    let half_bins = ks.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0) as usize;
    let mut counts = vec![0usize; 2 * half_bins + 1];
    for k in ks {
        counts[(k + half_bins as i64) as usize] += 1;
    }
    let v = errors.len() as f64;
    let probabilities = counts.iter().map(|&c| c as f64 / v).collect();
    Ok(ErrorHistogram {
        bin_width,
        half_bins,
        counts,
        probabilities,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Zero-mean Gaussian mass of each bin, renormalized over the bins given.
pub fn discretized_gaussian(bins: &[(f64, f64)], sigma: f64) -> Result<Vec<f64>, MetricsError> {
    if bins.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MetricsError::NonPositive("sigma"));
    }
    // Upper tail mass for the positive side avoids cancellation.
    let mass = |lo: f64, hi: f64| {
        if lo >= 0.0 {
            normal_cdf(-lo / sigma) - normal_cdf(-hi / sigma)
        } else {
            normal_cdf(hi / sigma) - normal_cdf(lo / sigma)
        }
    };
    let raw: Vec<f64> = bins.iter().map(|&(lo, hi)| mass(lo, hi).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        Ok(raw.into_iter().map(|q| q / total).collect())
    } else {
        // bins far in the tails: fall back to uniform
        Ok(vec![1.0 / bins.len() as f64; bins.len()])
    }
}

/// `D(p || q)` in bits, with `q` floored at [`Q_FLOOR`].
pub fn relative_entropy(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::LengthMismatch(p.len(), q.len()));
    }
    if p.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for dist in [p, q] {
        if dist.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(MetricsError::NonFinite);
        }
        let s: f64 = dist.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MetricsError::NotNormalized(s));
        }
    }
    let floored: Vec<f64> = q.iter().map(|&x| x.max(Q_FLOOR)).collect();
    let qs: f64 = floored.iter().sum();
    let d: f64 = p
        .iter()
        .zip(&floored)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / (qi / qs)).log2())
        .sum();
    // rounding can leave a tiny negative value when p == q
    Ok(d.max(0.0))
}

/// Fraction of errors with `|e| > threshold`.
pub fn tail_fraction(errors: &[f64], threshold: f64) -> Result<f64, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(threshold > 0.0) {
        return Err(MetricsError::NonPositive("threshold"));
    }
    let c = errors.iter().filter(|e| e.abs() > threshold).count();
    Ok(c as f64 / errors.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeEntropyReport {
    pub d_bits: f64,
    pub histogram: ErrorHistogram,
    pub q: Vec<f64>,
    pub sigma_ref: f64,
}

/// Histogram of `errors`, its Gaussian reference and their divergence.
pub fn error_entropy(
    errors: &[f64],
    bin_width: f64,
    sigma_ref: f64,
) -> Result<RelativeEntropyReport, MetricsError> {
    let histogram = histogram(errors, bin_width)?;
    let q = discretized_gaussian(&histogram.bin_edges(), sigma_ref)?;
    let d_bits = relative_entropy(&histogram.probabilities, &q)?;
    Ok(RelativeEntropyReport {
        d_bits,
        histogram,
        q,
        sigma_ref,
    })
}

/// Writes `bin_lo,bin_hi,count,p,q` rows.
pub fn write_histogram_csv<W: Write>(out: W, report: &RelativeEntropyReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count", "p", "q"])?;
    let h = &report.histogram;
    for b in 0..h.len() {
        let (lo, hi) = h.bounds(b);
        w.write_record([
            format!("{lo:.9e}"),
            format!("{hi:.9e}"),
            h.counts[b].to_string(),
            format!("{:.9e}", h.probabilities[b]),
            format!("{:.9e}", report.q[b]),
        ])?;
    }
    w.flush()?;
    Ok(())
}
