//! Cube-map cells on `S^d` and `RP^d` for certifying maximality of a
//! separated set.
//!
//! The sphere is the radial projection of the faces of `[-1, 1]^{d+1}`.
//! Face cells are axis-aligned boxes in face coordinates. Radial projection
//! maps segments to great-circle arcs, so a cell lies inside an open cap of
//! radius `eps <= pi/2` as soon as all its corners do. Points are drawn
//! uniformly from a union of cells by picking a cell in proportion to an
//! upper bound on its spherical area and thinning by the exact area density
//! `|Y|^{-(d+1)}`.
//!
//! On `RP^d` only the `+` faces are used: every line through the origin
//! meets exactly one of them (up to a null set).

use rand::Rng;

use super::index::CenterIndex;
use crate::spaces::{Point, Space, SpaceKind};

pub(crate) const MAX_FACE_DIM: usize = 8;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    face: u16,
    level: u16,
    idx: [u32; MAX_FACE_DIM],
}

pub(crate) struct CubeCells {
    space: Space,
    dim: usize,
    faces: Vec<(usize, f64)>,
    eps: f64,
    chord_eps: f64,
}

impl CubeCells {
    /// `None` when the space or radius is outside what the corner test certifies.
    pub(crate) fn new(space: Space, eps: f64) -> Option<Self> {
        let (dim, faces): (usize, Vec<(usize, f64)>) = match space.kind {
            SpaceKind::Sphere(d) => {
                let d = d as usize;
                (d, (0..=d).flat_map(|a| [(a, 1.0), (a, -1.0)]).collect())
            }
            SpaceKind::RealProjective(d) => {
                let d = d as usize;
                (d, (0..=d).map(|a| (a, 1.0)).collect())
            }
            _ => return None,
        };
        if dim > MAX_FACE_DIM || !(eps > 0.0 && eps <= std::f64::consts::FRAC_PI_2) {
            return None;
        }
        Some(CubeCells {
            space,
            dim,
            faces,
            eps,
            chord_eps: 2.0 * (0.5 * eps).sin(),
        })
    }

    fn side(level: u16) -> f64 {
        2.0 / (1u64 << level) as f64
    }

    fn lower(&self, c: &Cell, j: usize) -> f64 {
        -1.0 + c.idx[j] as f64 * Self::side(c.level)
    }

    /// Unnormalized ambient vector for face coordinates `y`.
    fn lift(&self, face: u16, y: &[f64]) -> Vec<f64> {
        let (axis, sign) = self.faces[face as usize];
        let mut v = Vec::with_capacity(self.dim + 1);
        let mut it = y.iter();
        for a in 0..=self.dim {
            v.push(if a == axis {
                sign
            } else {
                *it.next().expect("face coordinate")
            });
        }
        v
    }

    fn to_point(v: Vec<f64>) -> Point {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Point::Real(v.into_iter().map(|x| x / n).collect())
    }

    fn corner(&self, c: &Cell, mask: usize) -> Point {
        let s = Self::side(c.level);
        let y: Vec<f64> = (0..self.dim)
            .map(|j| self.lower(c, j) + if mask >> j & 1 == 1 { s } else { 0.0 })
            .collect();
        Self::to_point(self.lift(c.face, &y))
    }

    fn middle(&self, c: &Cell) -> Point {
        let s = Self::side(c.level);
        let y: Vec<f64> = (0..self.dim).map(|j| self.lower(c, j) + 0.5 * s).collect();
        Self::to_point(self.lift(c.face, &y))
    }

    /// Upper bound on the geodesic distance from the middle to any point of
    /// the cell (radial projection from a face is 1-Lipschitz).
    fn radius_bound(&self, c: &Cell) -> f64 {
        0.5 * Self::side(c.level) * (self.dim as f64).sqrt()
    }

    /// Squared norm of the lifted vector at the point of the box closest to the face center.
    fn min_lift_norm_sqr(&self, c: &Cell) -> f64 {
        let s = Self::side(c.level);
        1.0 + (0..self.dim)
            .map(|j| {
                let lo = self.lower(c, j);
                let hi = lo + s;
                if lo <= 0.0 && hi >= 0.0 {
                    0.0
                } else {
                    (lo * lo).min(hi * hi)
                }
            })
            .sum::<f64>()
    }

    /// Upper bound on the (unnormalized) spherical area of the cell.
    pub(crate) fn weight(&self, c: &Cell) -> f64 {
        Self::side(c.level).powi(self.dim as i32)
            * self
                .min_lift_norm_sqr(c)
                .powf(-0.5 * (self.dim as f64 + 1.0))
    }

    /// Uniform point of the spherical image of `c`.
    pub(crate) fn sample_in<R: Rng + ?Sized>(&self, c: &Cell, rng: &mut R) -> Point {
        let s = Self::side(c.level);
        let min_sq = self.min_lift_norm_sqr(c);
        let expo = 0.5 * (self.dim as f64 + 1.0);
        loop {
            let y: Vec<f64> = (0..self.dim)
                .map(|j| self.lower(c, j) + s * rng.random::<f64>())
                .collect();
            let v = self.lift(c.face, &y);
            let norm_sq: f64 = v.iter().map(|x| x * x).sum();
            if rng.random::<f64>() < (min_sq / norm_sq).powf(expo) {
                return Self::to_point(v);
            }
        }
    }

    fn children(&self, c: &Cell) -> impl Iterator<Item = Cell> + '_ {
        let c = *c;
        (0..1usize << self.dim).map(move |mask| {
            let mut idx = [0u32; MAX_FACE_DIM];
            for (j, slot) in idx.iter_mut().enumerate().take(self.dim) {
                *slot = 2 * c.idx[j] + (mask >> j & 1) as u32;
            }
            Cell {
                face: c.face,
                level: c.level + 1,
                idx,
            }
        })
    }

    /// Whether one stored center covers the whole cell.
    pub(crate) fn covered(&self, c: &Cell, centers: &[Point], index: &CenterIndex) -> bool {
        let corners: Vec<Vec<f64>> = (0..1usize << self.dim)
            .map(|m| match self.corner(c, m) {
                Point::Real(v) => v,
                Point::Complex(_) => unreachable!(),
            })
            .collect();
        let projective = matches!(self.space.kind, SpaceKind::RealProjective(_));
        let within = |x: &[f64], s: &[f64], sign: f64| {
            x.iter()
                .zip(s)
                .map(|(a, b)| (a - sign * b) * (a - sign * b))
                .sum::<f64>()
                .sqrt()
                < self.chord_eps
        };
        let mut found = false;
        index.visit_near(&self.middle(c), self.eps + self.radius_bound(c), |id| {
            let Point::Real(s) = &centers[id as usize] else {
                return true;
            };
            let signs: &[f64] = if projective { &[1.0, -1.0] } else { &[1.0] };
            for &sign in signs {
                if corners.iter().all(|x| within(x, s, sign)) {
                    found = true;
                    return false;
                }
            }
            true
        });
        found
    }

    /// All cells of side small enough to be tested that are not covered by a single center.
    pub(crate) fn initial_cells(&self, centers: &[Point], index: &CenterIndex) -> Vec<Cell> {
        let mut out = Vec::new();
        let mut stack: Vec<Cell> = (0..self.faces.len())
            .map(|f| Cell {
                face: f as u16,
                level: 0,
                idx: [0; MAX_FACE_DIM],
            })
            .collect();
        while let Some(c) = stack.pop() {
            if self.radius_bound(&c) > 0.25 * self.eps {
                stack.extend(self.children(&c));
            } else if !self.covered(&c, centers, index) {
                out.push(c);
            }
        }
        out
    }

    /// Split every remaining cell and drop covered pieces. Cells at
    /// `max_level` are kept whole.
    pub(crate) fn refine(
        &self,
        cells: &[Cell],
        centers: &[Point],
        index: &CenterIndex,
        max_level: u16,
    ) -> Vec<Cell> {
        let mut out = Vec::new();
        for c in cells {
            if self.covered(c, centers, index) {
                continue;
            }
            if c.level >= max_level {
                out.push(*c);
                continue;
            }
            out.extend(
                self.children(c)
                    .filter(|ch| !self.covered(ch, centers, index)),
            );
        }
        out
    }

    pub(crate) fn level_of(&self, c: &Cell) -> u16 {
        c.level
    }
}
