//! Exact sampling of projection DPPs by sequential conditioning.
//!
//! With `k` points already drawn, the next point has density
//! `(K(x,x) - v(x)^* G^{-1} v(x)) / (N - k)` with respect to the uniform
//! measure, where `v(x)_j = K(y_j, x)` and `G` is the Gram matrix of the
//! drawn points. The numerator never exceeds `K(x,x) = N`, so uniform
//! proposals accepted with probability `numerator / N` are exact.
//!
//! `G` is held as a lower Cholesky factor `G = L L^*`. Accepting `x` appends
//! the row `conj(w)` with `w = L^{-1} v(x)` and pivot `sqrt(N - |w|^2)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleKernel, KernelSpec};
use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::spaces::Point;

/// Proposal budget for a single point.
pub const MAX_PROPOSALS_PER_POINT: u64 = 1_000_000;
/// Pivots below `SINGULAR_TOL * N` are treated as a singular extension.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Factor residual above which the Cholesky factor is rebuilt.
pub const REFACTOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub proposals: u64,
    pub rejections: u64,
    /// Proposals discarded because the extension would be singular.
    pub degenerate: u64,
    pub refactorizations: u64,
}

/// One draw of the point process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub kernel: KernelSpec,
    pub master_seed: u64,
    /// Replicate index within the master seed, if drawn from a substream.
    pub replicate: Option<u64>,
    pub points: Vec<Point>,
    pub stats: SamplerStats,
}

impl SampleSet {
    /// Draw with a stream seeded directly by `seed`.
    pub fn draw(kernel: &EnsembleKernel, seed: u64) -> Result<Self> {
        let (points, stats) = sample_dpp(kernel, &mut rng::stream(seed))?;
        Ok(SampleSet {
            kernel: kernel.spec(),
            master_seed: seed,
            replicate: None,
            points,
            stats,
        })
    }

    /// Draw replicate `index` from the substream of `master_seed`.
    pub fn draw_replicate(kernel: &EnsembleKernel, master_seed: u64, index: u64) -> Result<Self> {
        let mut r = rng::substream(master_seed, domain::SAMPLE, index);
        let (points, stats) = sample_dpp(kernel, &mut r)?;
        Ok(SampleSet {
            kernel: kernel.spec(),
            master_seed,
            replicate: Some(index),
            points,
            stats,
        })
    }
}

/// Lower-triangular Cholesky factor of a Gram matrix, stored row by row.
#[derive(Debug, Clone, Default)]
pub struct GramFactor {
    rows: Vec<Vec<Complex64>>,
}

impl GramFactor {
    /// Factor the Gram matrix of `pts` from scratch.
    pub fn new(kernel: &EnsembleKernel, pts: &[Point]) -> Result<Self> {
        let n = kernel.trace() as f64;
        let mut f = GramFactor {
            rows: Vec::with_capacity(pts.len()),
        };
        for (i, x) in pts.iter().enumerate() {
            let (w, residual) = f.solve(kernel, &pts[..i], x);
            if residual <= SINGULAR_TOL * n {
                return Err(Error::Numerical(format!(
                    "Gram matrix is singular at point {i} (pivot^2 = {residual:e})"
                )));
            }
            f.push(w, residual);
        }
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `w = L^{-1} v(x)` and the Schur complement `N - |w|^2`.
    fn solve(&self, kernel: &EnsembleKernel, drawn: &[Point], x: &Point) -> (Vec<Complex64>, f64) {
        let mut w = Vec::with_capacity(drawn.len());
        let mut acc = 0.0;
        for (row, y) in self.rows.iter().zip(drawn) {
            let wi = self.solve_entry(row, &w, kernel.eval_unchecked(y, x));
            acc += wi.norm_sqr();
            w.push(wi);
        }
        (w, kernel.trace() as f64 - acc)
    }

    #[inline]
    fn solve_entry(&self, row: &[Complex64], w: &[Complex64], v: Complex64) -> Complex64 {
        let (diag, off) = row.split_last().expect("rows are nonempty");
        let mut s = v;
        for (l, wk) in off.iter().zip(w) {
            s -= l * wk;
        }
        s / diag.re
    }

    fn push(&mut self, w: Vec<Complex64>, residual: f64) {
        let mut row: Vec<Complex64> = w.into_iter().map(|z| z.conj()).collect();
        row.push(Complex64::new(residual.sqrt(), 0.0));
        self.rows.push(row);
    }

    /// Largest entry of `|L conj(row_k) - v|` over the last row, relative to `N`.
    fn last_row_residual(&self, kernel: &EnsembleKernel, drawn: &[Point]) -> f64 {
        let k = self.rows.len() - 1;
        let last = &self.rows[k];
        let x = &drawn[k];
        let n = kernel.trace() as f64;
        let mut worst = 0.0f64;
        for (j, row) in self.rows.iter().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (m, l) in row.iter().enumerate().take(j.min(k) + 1) {
                s += l * last[m].conj();
            }
            let want = kernel.eval_unchecked(&drawn[j], x);
            worst = worst.max((s - want).norm() / n);
        }
        worst
    }
}

/// Schur complement `K(x,x) - v(x)^* G^{-1} v(x)` of the drawn points at `x`.
///
/// Lies in `[0, N]`; dividing by `N - drawn.len()` gives the conditional
/// density of the next point.
pub fn conditional_density(
    kernel: &EnsembleKernel,
    drawn: &[Point],
    factor: &GramFactor,
    x: &Point,
) -> Result<f64> {
    if factor.len() != drawn.len() {
        return Err(Error::Validation(
            "factor does not match the drawn points".into(),
        ));
    }
    kernel.space().distance(x, x)?;
    let n = kernel.trace() as f64;
    let (_, residual) = factor.solve(kernel, drawn, x);
    if residual < -1e-8 * n {
        return Err(Error::Numerical(format!(
            "negative conditional density {residual:e}"
        )));
    }
    Ok(residual.clamp(0.0, n))
}

/// Draw the `N` points of the process.
pub fn sample_dpp<R: Rng + ?Sized>(
    kernel: &EnsembleKernel,
    rng: &mut R,
) -> Result<(Vec<Point>, SamplerStats)> {
    let space = *kernel.space();
    if !space.supports_points() {
        return Err(Error::Unsupported(format!(
            "cannot sample points on {space}"
        )));
    }
    let n_points = kernel.trace() as usize;
    let n = kernel.trace() as f64;
    let mut drawn: Vec<Point> = Vec::with_capacity(n_points);
    let mut factor = GramFactor {
        rows: Vec::with_capacity(n_points),
    };
    let mut stats = SamplerStats::default();
    let mut w: Vec<Complex64> = Vec::with_capacity(n_points);

    while drawn.len() < n_points {
        let mut attempts = 0u64;
        loop {
            if attempts >= MAX_PROPOSALS_PER_POINT {
                return Err(Error::Numerical(format!(
                    "proposal budget exhausted at point {} of {n_points} ({} proposals, {} degenerate)",
                    drawn.len() + 1,
                    stats.proposals,
                    stats.degenerate
                )));
            }
            attempts += 1;
            stats.proposals += 1;
            let x = space.sample_uniform(rng)?;
            let threshold = rng.random::<f64>() * n;
            // The Schur complement only decreases as terms of |w|^2 accumulate,
            // so a proposal can be rejected as soon as it falls below the threshold.
            w.clear();
            let mut residual = n;
            for (row, y) in factor.rows.iter().zip(&drawn) {
                let wi = factor.solve_entry(row, &w, kernel.eval_unchecked(y, &x));
                residual -= wi.norm_sqr();
                w.push(wi);
                if residual <= threshold {
                    break;
                }
            }
            if residual <= threshold {
                stats.rejections += 1;
                continue;
            }
            if residual <= SINGULAR_TOL * n {
                stats.degenerate += 1;
                stats.rejections += 1;
                continue;
            }
            factor.push(w.clone(), residual);
            drawn.push(x);
            if factor.last_row_residual(kernel, &drawn) > REFACTOR_TOL {
                factor = GramFactor::new(kernel, &drawn)?;
                stats.refactorizations += 1;
            }
            break;
        }
    }
    Ok((drawn, stats))
}
