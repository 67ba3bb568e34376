//! Compact, connected two-point homogeneous spaces.
//!
//! Every space carries its Jacobi parameters `(alpha, beta)`, the distance
//! scaling `kappa` and its real dimension `D = 2 alpha + 2`. The invariant
//! measure is normalized to total volume one, and distances are geodesic
//! distances in `[0, pi / (2 kappa)]`.
//!
//! Points are stored as unit vectors over the base field: real for `S^d` and
//! `RP^d`, complex for `CP^d`. Projective points carry no canonical gauge;
//! everything exposed here is invariant under unimodular rescaling of a
//! representative. `HP^d` and `OP^2` only carry their radial data.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};

/// Inputs whose norm is this close to one are accepted untouched.
pub const UNIT_TOL: f64 = 1e-12;
/// Inputs within this distance of unit norm are renormalized; others rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    Sphere(u32),
    RealProjective(u32),
    ComplexProjective(u32),
    QuaternionicProjective(u32),
    OctonionicPlane,
}

/// Base field of the homogeneous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Space {
    pub kind: SpaceKind,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub dim_real: u32,
    pub diameter: f64,
}

/// Unit representative of a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Point {
    pub fn len(&self) -> usize {
        match self {
            Point::Real(v) => v.len(),
            Point::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn norm_sqr(&self) -> f64 {
        match self {
            Point::Real(v) => v.iter().map(|x| x * x).sum(),
            Point::Complex(v) => v.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Hermitian inner product `sum conj(self_i) other_i`.
    pub fn inner(&self, other: &Point) -> Complex64 {
        match (self, other) {
            (Point::Real(a), Point::Real(b)) => Complex64::new(dot(a, b), 0.0),
            (Point::Complex(a), Point::Complex(b)) => cdot(a, b),
            (Point::Real(a), Point::Complex(b)) => a.iter().zip(b).map(|(x, z)| z * *x).sum(),
            (Point::Complex(a), Point::Real(b)) => {
                a.iter().zip(b).map(|(z, x)| z.conj() * *x).sum()
            }
        }
    }

    /// Multiply the representative by a scalar of the base field.
    pub fn scaled(&self, factor: Complex64) -> Point {
        match self {
            Point::Real(v) => Point::Real(v.iter().map(|x| x * factor.re).collect()),
            Point::Complex(v) => Point::Complex(v.iter().map(|z| z * factor).collect()),
        }
    }

    /// Real coordinates: `x` itself, or interleaved `(re, im)` pairs.
    pub fn to_real_vec(&self) -> Vec<f64> {
        match self {
            Point::Real(v) => v.clone(),
            Point::Complex(v) => v.iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

/// `2 asin(chord / 2)`, the arc length subtended by a unit-sphere chord.
#[inline]
fn arc_from_chord(chord: f64) -> f64 {
    2.0 * (0.5 * chord).min(1.0).asin()
}

/// Open metric ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Space {
    pub fn new(kind: SpaceKind) -> Result<Self> {
        let (alpha, beta, kappa) = match kind {
            SpaceKind::Sphere(d) => {
                check_dim(d, "sphere")?;
                let a = (d as f64 - 2.0) / 2.0;
                (a, a, 0.5)
            }
            SpaceKind::RealProjective(d) => {
                check_dim(d, "real projective space")?;
                ((d as f64 - 2.0) / 2.0, -0.5, 1.0)
            }
            SpaceKind::ComplexProjective(d) => {
                check_dim(d, "complex projective space")?;
                (d as f64 - 1.0, 0.0, 1.0)
            }
            SpaceKind::QuaternionicProjective(d) => {
                check_dim(d, "quaternionic projective space")?;
                (2.0 * d as f64 - 1.0, 1.0, 1.0)
            }
            SpaceKind::OctonionicPlane => (7.0, 3.0, 1.0),
        };
        let dim_real = match kind {
            SpaceKind::Sphere(d) | SpaceKind::RealProjective(d) => d,
            SpaceKind::ComplexProjective(d) => 2 * d,
            SpaceKind::QuaternionicProjective(d) => 4 * d,
            SpaceKind::OctonionicPlane => 16,
        };
        Ok(Space {
            kind,
            alpha,
            beta,
            kappa,
            dim_real,
            diameter: PI / (2.0 * kappa),
        })
    }

    /// Parse ids such as `s2`, `rp3`, `cp1`, `hp1`, `op2`.
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim().to_ascii_lowercase();
        let bad = || Error::Validation(format!("unknown space id '{id}'"));
        if id == "op2" {
            return Space::new(SpaceKind::OctonionicPlane);
        }
        let (prefix, digits) = id
            .find(|c: char| c.is_ascii_digit())
            .map(|i| id.split_at(i))
            .ok_or_else(bad)?;
        let d: u32 = digits.parse().map_err(|_| bad())?;
        let kind = match prefix {
            "s" => SpaceKind::Sphere(d),
            "rp" => SpaceKind::RealProjective(d),
            "cp" => SpaceKind::ComplexProjective(d),
            "hp" => SpaceKind::QuaternionicProjective(d),
            _ => return Err(bad()),
        };
        Space::new(kind)
    }

    pub fn id(&self) -> String {
        match self.kind {
            SpaceKind::Sphere(d) => format!("s{d}"),
            SpaceKind::RealProjective(d) => format!("rp{d}"),
            SpaceKind::ComplexProjective(d) => format!("cp{d}"),
            SpaceKind::QuaternionicProjective(d) => format!("hp{d}"),
            SpaceKind::OctonionicPlane => "op2".to_string(),
        }
    }

    pub fn is_projective(&self) -> bool {
        !matches!(self.kind, SpaceKind::Sphere(_))
    }

    /// Base field and number of homogeneous coordinates, if points are supported.
    pub fn coordinates(&self) -> Option<(Field, usize)> {
        match self.kind {
            SpaceKind::Sphere(d) | SpaceKind::RealProjective(d) => {
                Some((Field::Real, d as usize + 1))
            }
            SpaceKind::ComplexProjective(d) => Some((Field::Complex, d as usize + 1)),
            _ => None,
        }
    }

    pub fn supports_points(&self) -> bool {
        self.coordinates().is_some()
    }

    fn require_points(&self) -> Result<(Field, usize)> {
        self.coordinates().ok_or_else(|| {
            Error::Unsupported(format!(
                "points on {} are not supported (radial data only)",
                self.id()
            ))
        })
    }

    /// Validate a representative, renormalizing it if it is nearly unit.
    pub fn point(&self, p: Point) -> Result<Point> {
        let (field, n) = self.require_points()?;
        match (&p, field) {
            (Point::Real(_), Field::Real) | (Point::Complex(_), Field::Complex) => {}
            (Point::Real(v), Field::Complex) => {
                return self.point(Point::Complex(
                    v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                ));
            }
            (Point::Complex(_), Field::Real) => {
                return Err(Error::Validation(format!(
                    "{} expects real coordinates",
                    self.id()
                )));
            }
        }
        if p.len() != n {
            return Err(Error::Validation(format!(
                "{} expects {n} coordinates, got {}",
                self.id(),
                p.len()
            )));
        }
        let norm = p.norm_sqr().sqrt();
        if !norm.is_finite() {
            return Err(Error::Validation("non-finite coordinates".into()));
        }
        if (norm - 1.0).abs() <= UNIT_TOL {
            Ok(p)
        } else if (norm - 1.0).abs() <= RENORMALIZE_TOL {
            Ok(p.scaled(Complex64::new(1.0 / norm, 0.0)))
        } else {
            Err(Error::Validation(format!(
                "point is not unit norm (|p| = {norm})"
            )))
        }
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        let (field, n) = self.require_points()?;
        let field_ok = matches!(
            (p, field),
            (Point::Real(_), Field::Real) | (Point::Complex(_), Field::Complex)
        );
        if !field_ok || p.len() != n {
            return Err(Error::Validation(format!(
                "point does not live on {}",
                self.id()
            )));
        }
        if (p.norm_sqr().sqrt() - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::Validation("point is not unit norm".into()));
        }
        Ok(())
    }

    /// Geodesic distance with input validation.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.dist(p, q))
    }

    /// Geodesic distance of two points already known to live on this space.
    ///
    /// Computed from the minimal chord between representatives, which keeps
    /// full relative precision near zero.
    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        match (self.kind, p, q) {
            (SpaceKind::Sphere(_), Point::Real(a), Point::Real(b)) => {
                let chord = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                arc_from_chord(chord)
            }
            (SpaceKind::RealProjective(_), Point::Real(a), Point::Real(b)) => {
                let (mut m, mut s) = (0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    m += (x - y) * (x - y);
                    s += (x + y) * (x + y);
                }
                arc_from_chord(m.min(s).sqrt()).min(FRAC_PI_2)
            }
            (SpaceKind::ComplexProjective(_), Point::Complex(a), Point::Complex(b)) => {
                // evaluate in a fixed argument order so the result is exactly symmetric
                let (u, v) = if lex_le(a, b) { (a, b) } else { (b, a) };
                let s = cdot(u, v);
                let m = s.norm();
                if m == 0.0 {
                    return FRAC_PI_2;
                }
                let phase = s.conj() / m;
                let chord = u
                    .iter()
                    .zip(v)
                    .map(|(x, y)| (x - phase * y).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                arc_from_chord(chord).min(FRAC_PI_2)
            }
            _ => f64::NAN,
        }
    }

    /// `cos(2 kappa dist(p, q))`, computed directly from the inner product.
    pub fn cos_two_kappa_dist(&self, p: &Point, q: &Point) -> f64 {
        let c = match self.kind {
            SpaceKind::Sphere(_) => p.inner(q).re,
            _ => 2.0 * p.inner(q).norm_sqr() - 1.0,
        };
        c.clamp(-1.0, 1.0)
    }

    /// Whether two representatives describe the same point.
    pub fn coincide(&self, p: &Point, q: &Point) -> bool {
        self.dist(p, q) <= 1e-12
    }

    fn check_radius(&self, r: f64, what: &str) -> Result<()> {
        if !(0.0..=self.diameter).contains(&r) {
            return Err(Error::Domain(format!(
                "{what} {r} outside [0, {}] on {}",
                self.diameter,
                self.id()
            )));
        }
        Ok(())
    }

    /// Normalizing constant `2 kappa Gamma(a+b+2) / (Gamma(a+1) Gamma(b+1))`.
    pub fn radial_constant(&self) -> f64 {
        2.0 * self.kappa * (-ln_beta(self.alpha + 1.0, self.beta + 1.0)).exp()
    }

    /// Density of the distance to a fixed point under the uniform measure.
    pub fn radial_density(&self, theta: f64) -> Result<f64> {
        self.check_radius(theta, "angle")?;
        Ok(self.radial_density_unchecked(theta))
    }

    pub(crate) fn radial_density_unchecked(&self, theta: f64) -> f64 {
        let (s, c) = (self.kappa * theta).sin_cos();
        self.radial_constant()
            * s.max(0.0).powf(2.0 * self.alpha + 1.0)
            * c.max(0.0).powf(2.0 * self.beta + 1.0)
    }

    /// Normalized volume of an open ball of radius `r`.
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        self.check_radius(r, "radius")?;
        Ok(self.ball_volume_unchecked(r))
    }

    /// Ball volume for any `r >= 0`; radii beyond the diameter give 1.
    pub(crate) fn ball_volume_unchecked(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.diameter {
            return 1.0;
        }
        match self.kind {
            SpaceKind::Sphere(1) => r / PI,
            SpaceKind::Sphere(2) => 0.5 * (1.0 - r.cos()),
            SpaceKind::RealProjective(1) => 2.0 * r / PI,
            SpaceKind::ComplexProjective(d) => r.sin().powi(2 * d as i32),
            _ => {
                let u = (self.kappa * r).sin().powi(2);
                beta_reg(self.alpha + 1.0, self.beta + 1.0, u)
            }
        }
    }

    /// Smallest radius whose ball has the given volume (bisection).
    pub fn radius_for_volume(&self, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("volume {v} outside [0, 1]")));
        }
        let (mut lo, mut hi) = (0.0, self.diameter);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ball_volume_unchecked(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * self.diameter {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Ahlfors constants `(c1, c2)`: min and max of `vol(B_r) / r^D` over
    /// a 1000-point radius grid on `(0, diameter]`.
    pub fn ahlfors_constants(&self) -> (f64, f64) {
        let d = self.dim_real as i32;
        (1..=1000)
            .map(|j| {
                let r = self.diameter * j as f64 / 1000.0;
                self.ball_volume_unchecked(r) / r.powi(d)
            })
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
    }

    /// Draw a point from the normalized invariant measure.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        let (field, n) = self.coordinates().ok_or_else(|| {
            Error::Unsupported(format!("uniform sampling unsupported on {}", self.id()))
        })?;
        Ok(sample_unit(field, n, rng))
    }

    pub fn check_ball(&self, ball: &Ball) -> Result<()> {
        self.check_point(&ball.center)?;
        self.check_radius(ball.radius, "radius")
    }

    /// A fixed reference point `e_0`.
    pub fn base_point(&self) -> Result<Point> {
        let (field, n) = self.require_points()?;
        Ok(match field {
            Field::Real => {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                Point::Real(v)
            }
            Field::Complex => {
                let mut v = vec![Complex64::new(0.0, 0.0); n];
                v[0] = Complex64::new(1.0, 0.0);
                Point::Complex(v)
            }
        })
    }
}

fn check_dim(d: u32, what: &str) -> Result<()> {
    if d == 0 {
        return Err(Error::Validation(format!("{what} needs dimension >= 1")));
    }
    Ok(())
}

fn lex_le(a: &[Complex64], b: &[Complex64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        for (s, t) in [(x.re, y.re), (x.im, y.im)] {
            if s < t {
                return true;
            }
            if s > t {
                return false;
            }
        }
    }
    true
}

pub(crate) fn sample_unit<R: Rng + ?Sized>(field: Field, n: usize, rng: &mut R) -> Point {
    loop {
        let p = match field {
            Field::Real => Point::Real(
                (0..n)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            ),
            Field::Complex => Point::Complex(
                (0..n)
                    .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect(),
            ),
        };
        let norm = p.norm_sqr().sqrt();
        if norm > 1e-150 {
            return p.scaled(Complex64::new(1.0 / norm, 0.0));
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}
