//! Three views of `Var(N_A)` for a ball `A`: sample variance over DPP
//! replicates, Monte Carlo of `∫_A ∫_{A^c} |K|^2`, and the radial quadrature
//! upper bounds, together with the four-region split of the harmonic integral.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::count_in_ball;
use crate::ensembles::{projective_count, Ensemble, EnsembleKernel, KernelSpec};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_2d, QuadOptions};
use crate::rng::{self, domain};
use crate::sampler::SampleSet;
use crate::spaces::{Ball, Point, Space, SpaceKind};
use crate::special::{jacobi, pochhammer_ratio};

const PAIR_BLOCK: usize = 4096;
const MAX_REJECTIONS: u64 = 100_000_000;

fn inner_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-11,
        max_intervals: 4000,
    }
}

fn outer_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-9,
        max_intervals: 4000,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariance {
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `variance` from the fourth central moment.
    pub se: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McVariance {
    pub estimate: f64,
    pub se: f64,
    pub pairs: usize,
}

/// Integral of the harmonic radial integrand over the four regions of the
/// `(phi, theta)` triangle, or only the undivided integral when `1/L` is
/// too coarse for the split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionIntegrals {
    pub subdivided: bool,
    pub regions: Option<[f64; 4]>,
    pub undivided: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub kernel: KernelSpec,
    pub n: u64,
    pub ball: Ball,
    pub volume: f64,
    /// `N vol (1 - vol)`, the variance of independent points.
    pub binomial: f64,
    pub empirical: EmpiricalVariance,
    pub exact_mc: McVariance,
    pub quadrature_bound: f64,
    pub region_integrals: Option<RegionIntegrals>,
}

/// `N_A` for replicates `0..reps` drawn from the substreams of `master_seed`.
pub fn replicate_counts(
    kernel: &EnsembleKernel,
    ball: &Ball,
    reps: usize,
    master_seed: u64,
) -> Result<Vec<usize>> {
    kernel.space().check_ball(ball)?;
    (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let s = SampleSet::draw_replicate(kernel, master_seed, i)?;
            Ok(count_in_ball(kernel.space(), &s.points, ball))
        })
        .collect()
}

/// Mean, unbiased variance and its standard error.
///
/// The standard error uses `Var(s^2) ≈ (m4 - (n-3)/(n-1) s^4) / n`, which
/// does not assume normal counts.
pub fn summarize_counts(counts: &[usize]) -> Result<EmpiricalVariance> {
    let n = counts.len();
    if n < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 replicates (got {n})"
        )));
    }
    let nf = n as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &c in counts {
        let d = c as f64 - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    let variance = m2 / (nf - 1.0);
    m4 /= nf;
    let var_s2 = if n > 3 {
        (m4 - (nf - 3.0) / (nf - 1.0) * variance * variance) / nf
    } else {
        f64::NAN
    };
    Ok(EmpiricalVariance {
        mean,
        variance,
        se: var_s2.max(0.0).sqrt(),
        replicates: n,
    })
}

/// Sample variance of `N_A` over `reps` independent DPP draws.
pub fn variance_empirical(
    kernel: &EnsembleKernel,
    ball: &Ball,
    reps: usize,
    seed: u64,
) -> Result<EmpiricalVariance> {
    if reps < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 replicates (got {reps})"
        )));
    }
    summarize_counts(&replicate_counts(kernel, ball, reps, seed)?)
}

fn sample_side<R: rand::Rng + ?Sized>(
    space: &Space,
    ball: &Ball,
    inside: bool,
    rng: &mut R,
) -> Result<Point> {
    for _ in 0..MAX_REJECTIONS {
        let p = space.sample_uniform(rng)?;
        if (space.dist(&ball.center, &p) < ball.radius) == inside {
            return Ok(p);
        }
    }
    Err(Error::Numerical(
        "rejection sampling of the ball side did not terminate".into(),
    ))
}

/// `vol(A)(1 - vol(A)) E|K(p, q)|^2` with `p` uniform in `A`, `q` uniform in `A^c`.
pub fn variance_exact_mc(
    kernel: &EnsembleKernel,
    ball: &Ball,
    pairs: usize,
    seed: u64,
) -> Result<McVariance> {
    let space = *kernel.space();
    space.check_ball(ball)?;
    let vol = space.ball_volume(ball.radius)?;
    if !(vol > 0.0 && vol < 1.0) {
        return Err(Error::Domain(format!(
            "ball volume {vol} leaves no room for pairs across its boundary"
        )));
    }
    if pairs < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 pairs (got {pairs})"
        )));
    }
    let blocks = pairs.div_ceil(PAIR_BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::substream(seed, domain::PAIRS, b as u64);
            let len = PAIR_BLOCK.min(pairs - b * PAIR_BLOCK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let p = sample_side(&space, ball, true, &mut r)?;
                let q = sample_side(&space, ball, false, &mut r)?;
                let k2 = kernel.abs_sqr(&p, &q);
                s += k2;
                s2 += k2 * k2;
            }
            Ok((s, s2))
        })
        .collect::<Result<_>>()?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = pairs as f64;
    let mean = s / m;
    let sd2 = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
    let w = vol * (1.0 - vol);
    Ok(McVariance {
        estimate: w * mean,
        se: w * (sd2 / m).sqrt(),
        pairs,
    })
}

/// `|P_L^{(a+1,b)}(cos 2 theta)|^2 sin^{2a+1} theta cos^{2b+1} theta`.
fn harmonic_integrand(space: &Space, level: u32, theta: f64) -> f64 {
    let (a, b) = (space.alpha, space.beta);
    let (s, c) = theta.sin_cos();
    let p = jacobi(a + 1.0, b, level, (2.0 * theta).cos().clamp(-1.0, 1.0));
    p * p * s.max(0.0).powf(2.0 * a + 1.0) * c.max(0.0).powf(2.0 * b + 1.0)
}

fn check_open_radius(space: &Space, r: f64) -> Result<()> {
    if !(r > 0.0 && r < space.diameter) {
        return Err(Error::Domain(format!(
            "radius {r} outside (0, {}) on {}",
            space.diameter,
            space.id()
        )));
    }
    Ok(())
}

/// Radial upper bound on `Var(N_A)` for the harmonic ensemble: the
/// complement of `A` seen from `p` is replaced by the complement of
/// `B(p, r - dist(p, a))`.
pub fn variance_bound_harmonic(space: &Space, level: u32, r: f64) -> Result<f64> {
    check_open_radius(space, r)?;
    let (a, b) = (space.alpha, space.beta);
    let ar = space.kappa * r;
    let pref =
        pochhammer_ratio(a + b + 2.0, b + 1.0, level) * space.radial_constant() / space.kappa;
    let weight = |phi: f64| {
        let (s, c) = phi.sin_cos();
        s.max(0.0).powf(2.0 * a + 1.0) * c.max(0.0).powf(2.0 * b + 1.0)
    };
    let res = integrate_2d(
        |phi, theta| weight(phi) * harmonic_integrand(space, level, theta),
        0.0,
        ar,
        |phi| ar - phi,
        |_| FRAC_PI_2,
        outer_opts(),
        inner_opts(),
    )?;
    Ok(pref * pref * res.value)
}

/// `∫_0^{kr} ∫_{kr-phi}^{pi/2} g(theta) dtheta dphi`, reduced to one
/// dimension by exchanging the order: the `phi`-section at `theta` has
/// length `min(theta, kr)`.
pub fn undivided_integral(space: &Space, level: u32, r: f64) -> Result<f64> {
    check_open_radius(space, r)?;
    let ar = space.kappa * r;
    let g = |t: f64| harmonic_integrand(space, level, t);
    let lo = integrate(|t| t * g(t), 0.0, ar, inner_opts())?;
    let hi = integrate(|t| ar * g(t), ar, FRAC_PI_2, inner_opts())?;
    Ok(lo.value + hi.value)
}

/// The four-region split at scale `1/L`. Valid when `1/L < kr < pi/2 - 1/L`;
/// otherwise only the undivided integral is returned, flagged.
pub fn region_integrals(space: &Space, level: u32, r: f64) -> Result<RegionIntegrals> {
    let undivided = undivided_integral(space, level, r)?;
    let ar = space.kappa * r;
    let h = if level == 0 {
        f64::INFINITY
    } else {
        1.0 / level as f64
    };
    if !(ar > h && ar < FRAC_PI_2 - h) {
        return Ok(RegionIntegrals {
            subdivided: false,
            regions: None,
            undivided,
        });
    }
    let g = |t: f64| harmonic_integrand(space, level, t);
    let over = |a: f64, b: f64, lo: &dyn Fn(f64) -> f64, hi: &dyn Fn(f64) -> f64| -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        Ok(integrate_2d(|_, t| g(t), a, b, lo, hi, outer_opts(), inner_opts())?.value)
    };
    let top = FRAC_PI_2 - h;
    // R1 changes shape where ar - phi crosses pi/2 - h
    let kink = (ar - top).max(0.0);
    let r1 =
        over(0.0, kink, &|p| ar - p, &|_| FRAC_PI_2)? + over(kink, ar, &|_| top, &|_| FRAC_PI_2)?;
    let r2 = over(kink, ar - h, &|p| ar - p, &|_| top)?;
    let r3 = h * integrate(g, h, top, inner_opts())?.value;
    let r4 = over(ar - h, ar, &|p| ar - p, &|_| h)?;
    Ok(RegionIntegrals {
        subdivided: true,
        regions: Some([r1, r2, r3, r4]),
        undivided,
    })
}

/// Radial upper bound on `Var(N_A)` for the projective ensemble on `CP^d`.
pub fn variance_bound_projective(d: u32, level: u32, r: f64) -> Result<f64> {
    if level == 0 {
        return Err(Error::Validation("projective bound needs L >= 1".into()));
    }
    let space = Space::new(SpaceKind::ComplexProjective(d))?;
    check_open_radius(&space, r)?;
    let n = projective_count(d, level)? as f64;
    let e = 2 * d as i32 - 1;
    let res = integrate_2d(
        |phi, theta| {
            let (sp, cp) = phi.sin_cos();
            let (st, ct) = theta.sin_cos();
            sp.powi(e) * cp * st.powi(e) * ct.max(0.0).powi(2 * level as i32 + 1)
        },
        0.0,
        r,
        |phi| r - phi,
        |_| FRAC_PI_2,
        outer_opts(),
        inner_opts(),
    )?;
    let df = d as f64;
    Ok(4.0 * df * df * n * n * res.value)
}

/// Quadrature bound matching the kernel's ensemble.
pub fn variance_bound(kernel: &EnsembleKernel, r: f64) -> Result<f64> {
    match (kernel.ensemble(), kernel.space().kind) {
        (Ensemble::Harmonic, _) => variance_bound_harmonic(kernel.space(), kernel.level(), r),
        (Ensemble::Projective, SpaceKind::ComplexProjective(d)) => {
            variance_bound_projective(d, kernel.level(), r)
        }
        (Ensemble::Projective, _) => Err(Error::Unsupported(
            "projective ensemble lives on CP^d".into(),
        )),
    }
}

/// All three estimates for one kernel and ball.
pub fn variance_report(
    kernel: &EnsembleKernel,
    ball: &Ball,
    reps: usize,
    pairs: usize,
    seed: u64,
) -> Result<VarianceReport> {
    let space = kernel.space();
    let volume = space.ball_volume(ball.radius)?;
    let n = kernel.trace();
    let empirical = variance_empirical(
        kernel,
        ball,
        reps,
        rng::substream_seed(seed, domain::SAMPLE, 0),
    )?;
    let exact_mc = variance_exact_mc(
        kernel,
        ball,
        pairs,
        rng::substream_seed(seed, domain::PAIRS, 0),
    )?;
    let quadrature_bound = variance_bound(kernel, ball.radius)?;
    let region_integrals = match kernel.ensemble() {
        Ensemble::Harmonic => Some(region_integrals(space, kernel.level(), ball.radius)?),
        Ensemble::Projective => None,
    };
    Ok(VarianceReport {
        kernel: kernel.spec(),
        n,
        ball: ball.clone(),
        volume,
        binomial: n as f64 * volume * (1.0 - volume),
        empirical,
        exact_mc,
        quadrature_bound,
        region_integrals,
    })
}
