//! Two-branch Bernstein tail for ball counts, the deviation threshold that
//! turns it into a discrepancy certificate, and a simulation check of the
//! tail against replicates.

use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleKernel;
use crate::error::{Error, Result};
use crate::spaces::Ball;
use crate::variance::{replicate_counts, summarize_counts};

/// `P(|N_A - E N_A| >= t)` bound: `2 exp(-t/4)` for `t >= Var`, else
/// `2 exp(-t^2 / (4 Var))`, capped at 1.
pub fn bernstein_tail(variance: f64, t: f64) -> Result<f64> {
    if !(variance >= 0.0 && t >= 0.0) || !variance.is_finite() {
        return Err(Error::Validation(format!(
            "tail bound needs variance >= 0 and t >= 0 (got {variance}, {t})"
        )));
    }
    let raw = if t >= variance {
        2.0 * (-t / 4.0).exp()
    } else {
        2.0 * (-t * t / (4.0 * variance)).exp()
    };
    Ok(raw.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdBranch {
    /// `var_sup > 4X`: `t = 2 sqrt(var_sup X)`, and `t < var_sup`.
    SubGaussian,
    /// `var_sup <= 4X`: `t = 4X`, and `t >= var_sup`.
    SubExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub t: f64,
    pub branch: ThresholdBranch,
    /// `X = (M + c) log N + log 4c`.
    pub log_term: f64,
}

/// Per-ball deviation that holds simultaneously over a collection of about
/// `N^c` balls with probability at least `1 - N^{-M}`.
pub fn maintool_threshold(n: u64, m: f64, c: f64, var_sup: f64) -> Result<Threshold> {
    if n < 2 || !(m > 0.0) || !(c >= 1.0) || !(var_sup >= 0.0) || !var_sup.is_finite() {
        return Err(Error::Validation(format!(
            "threshold needs N >= 2, M > 0, c >= 1, var >= 0 (got {n}, {m}, {c}, {var_sup})"
        )));
    }
    let x = (m + c) * (n as f64).ln() + (4.0 * c).ln();
    Ok(if var_sup > 4.0 * x {
        Threshold {
            t: 2.0 * var_sup.sqrt() * x.sqrt(),
            branch: ThresholdBranch::SubGaussian,
            log_term: x,
        }
    } else {
        Threshold {
            t: 4.0 * x,
            branch: ThresholdBranch::SubExponential,
            log_term: x,
        }
    })
}

/// `c = max(log |A'| / log n, D + 1)` over nets with `n >= 2`, where
/// `|A'|` is the number of balls of the net with parameter `n`.
pub fn net_exponent(cardinalities: &[(u32, u64)], dim: u32) -> f64 {
    cardinalities
        .iter()
        .filter(|&&(n, _)| n >= 2)
        .map(|&(n, size)| (size as f64).ln() / (n as f64).ln())
        .fold(dim as f64 + 1.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub freq: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub replicates: usize,
    /// Centering value `N vol(A)`, the exact mean of `N_A`.
    pub mean: f64,
    pub variance: f64,
    pub rows: Vec<TailRow>,
}

impl TailTable {
    /// Binomial standard error of a frequency whose true value is at most `bound`.
    pub fn se(&self, row: &TailRow) -> f64 {
        let p = row.bound.min(1.0);
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }
}

/// `t_k = k * 4 sqrt(Var) / (points - 1)` for `k = 0..points`.
pub fn default_t_grid(variance: f64, points: usize) -> Vec<f64> {
    let top = 4.0 * variance.sqrt();
    let last = points.saturating_sub(1).max(1) as f64;
    (0..points).map(|k| top * k as f64 / last).collect()
}

/// Frequencies of `|N_A - N vol(A)| >= t` over replicates next to the
/// bound evaluated at the empirical variance. An empty grid selects
/// [`default_t_grid`] with 10 points.
pub fn empirical_tail_check(
    kernel: &EnsembleKernel,
    ball: &Ball,
    reps: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<TailTable> {
    if reps < 1000 {
        return Err(Error::Validation(format!(
            "tail check needs at least 1000 replicates (got {reps})"
        )));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Validation(
            "t-grid values must be nonnegative".into(),
        ));
    }
    let counts = replicate_counts(kernel, ball, reps, seed)?;
    let variance = summarize_counts(&counts)?.variance;
    let mean = kernel.trace() as f64 * kernel.space().ball_volume(ball.radius)?;
    let grid = if t_grid.is_empty() {
        default_t_grid(variance, 10)
    } else {
        t_grid.to_vec()
    };
    let rows = grid
        .iter()
        .map(|&t| {
            let hits = counts
                .iter()
                .filter(|&&c| (c as f64 - mean).abs() >= t)
                .count();
            Ok(TailRow {
                t,
                freq: hits as f64 / reps as f64,
                bound: bernstein_tail(variance, t)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TailTable {
        replicates: reps,
        mean,
        variance,
        rows,
    })
}
