//! Homogeneous projection kernels: the harmonic ensemble on any space and
//! the projective ensemble on `CP^d`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{Point, Space, SpaceKind};
use crate::special::{jacobi, pi_l, pochhammer_ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Harmonic,
    Projective,
}

impl FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "harmonic" => Ok(Ensemble::Harmonic),
            "projective" => Ok(Ensemble::Projective),
            other => Err(Error::Validation(format!("unknown ensemble '{other}'"))),
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::Harmonic => "harmonic",
            Ensemble::Projective => "projective",
        })
    }
}

/// Serializable description of a kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub ensemble: Ensemble,
    pub space: String,
    pub level: u32,
}

impl KernelSpec {
    pub fn build(&self) -> Result<EnsembleKernel> {
        let space = Space::parse(&self.space)?;
        match self.ensemble {
            Ensemble::Harmonic => EnsembleKernel::harmonic(space, self.level),
            Ensemble::Projective => match space.kind {
                SpaceKind::ComplexProjective(d) => EnsembleKernel::projective(d, self.level),
                _ => Err(Error::Validation(format!(
                    "the projective ensemble lives on CP^d, not {space}"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelVariant {
    Harmonic { space: Space, level: u32 },
    Projective { d: u32, level: u32 },
}

/// Projection kernel of trace `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleKernel {
    pub variant: KernelVariant,
    space: Space,
    trace: u64,
    /// `(alpha+beta+2)_L / (beta+1)_L` for the harmonic kernel, `N` for the projective one.
    scale: f64,
}

/// `N = C(d+L, d)`.
pub fn projective_count(d: u32, level: u32) -> Result<u64> {
    if d == 0 {
        return Err(Error::Validation("projective ensemble needs d >= 1".into()));
    }
    let mut n: u128 = 1;
    for k in 1..=d as u128 {
        n = n * (level as u128 + k) / k;
        if n > u64::MAX as u128 {
            return Err(Error::Numerical(format!("C({}, {d}) overflows", d + level)));
        }
    }
    Ok(n as u64)
}

impl EnsembleKernel {
    pub fn harmonic(space: Space, level: u32) -> Result<Self> {
        let trace = pi_l(&space, level)?;
        Ok(EnsembleKernel {
            variant: KernelVariant::Harmonic { space, level },
            space,
            trace,
            scale: pochhammer_ratio(space.alpha + space.beta + 2.0, space.beta + 1.0, level),
        })
    }

    pub fn projective(d: u32, level: u32) -> Result<Self> {
        let space = Space::new(SpaceKind::ComplexProjective(d))?;
        let trace = projective_count(d, level)?;
        Ok(EnsembleKernel {
            variant: KernelVariant::Projective { d, level },
            space,
            trace,
            scale: trace as f64,
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// Number of points `N`.
    pub fn trace(&self) -> u64 {
        self.trace
    }

    pub fn level(&self) -> u32 {
        match self.variant {
            KernelVariant::Harmonic { level, .. } | KernelVariant::Projective { level, .. } => {
                level
            }
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        match self.variant {
            KernelVariant::Harmonic { .. } => Ensemble::Harmonic,
            KernelVariant::Projective { .. } => Ensemble::Projective,
        }
    }

    pub fn spec(&self) -> KernelSpec {
        KernelSpec {
            ensemble: self.ensemble(),
            space: self.space.id(),
            level: self.level(),
        }
    }

    /// Harmonic kernel as a function of `t = cos(2 kappa dist)`.
    fn harmonic_profile(&self, t: f64) -> f64 {
        let s = &self.space;
        self.scale * jacobi(s.alpha + 1.0, s.beta, self.level(), t)
    }

    /// `|K|` as a function of the geodesic distance. Available on every
    /// space, including those without point support.
    pub fn modulus_at_distance(&self, theta: f64) -> f64 {
        match self.variant {
            KernelVariant::Harmonic { .. } => self
                .harmonic_profile((2.0 * self.space.kappa * theta).cos())
                .abs(),
            KernelVariant::Projective { level, .. } => {
                self.scale * theta.cos().abs().powi(level as i32)
            }
        }
    }

    /// Kernel value with validation of both points.
    pub fn eval(&self, p: &Point, q: &Point) -> Result<Complex64> {
        self.space.distance(p, q)?;
        Ok(self.eval_unchecked(p, q))
    }

    pub fn eval_unchecked(&self, p: &Point, q: &Point) -> Complex64 {
        match self.variant {
            KernelVariant::Harmonic { .. } => Complex64::new(
                self.harmonic_profile(self.space.cos_two_kappa_dist(p, q)),
                0.0,
            ),
            KernelVariant::Projective { level, .. } => p.inner(q).powu(level) * self.scale,
        }
    }

    /// `|K(p, q)|^2`.
    pub fn abs_sqr(&self, p: &Point, q: &Point) -> f64 {
        match self.variant {
            KernelVariant::Harmonic { .. } => self
                .harmonic_profile(self.space.cos_two_kappa_dist(p, q))
                .powi(2),
            KernelVariant::Projective { level, .. } => {
                self.scale * self.scale * p.inner(q).norm_sqr().min(1.0).powi(level as i32)
            }
        }
    }

    /// Second joint intensity `N^2 - |K(p, q)|^2`, clamped at zero.
    pub fn joint_intensity_2(&self, p: &Point, q: &Point) -> f64 {
        let n = self.trace as f64;
        (n * n - self.abs_sqr(p, q)).max(0.0)
    }

    /// Gram matrix `G_ij = K(p_i, p_j)`.
    pub fn gram(&self, pts: &[Point]) -> Result<DMatrix<Complex64>> {
        if pts.len() as u64 > self.trace {
            return Err(Error::Validation(format!(
                "gram of {} points exceeds kernel trace {}",
                pts.len(),
                self.trace
            )));
        }
        for p in pts {
            self.space.distance(p, p)?;
        }
        let n = pts.len();
        let mut g = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            g[(i, i)] = Complex64::new(self.trace as f64, 0.0);
            for j in 0..i {
                let k = self.eval_unchecked(&pts[i], &pts[j]);
                g[(i, j)] = k;
                g[(j, i)] = k.conj();
            }
        }
        Ok(g)
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(g: &DMatrix<Complex64>) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    g.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

impl fmt::Display for EnsembleKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} L={} (N={})",
            self.ensemble(),
            self.space,
            self.level(),
            self.trace
        )
    }
}
