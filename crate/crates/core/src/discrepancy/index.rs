//! Uniform hash grid over a three-dimensional, 1-Lipschitz feature map of
//! the space, used to find net centers near a query point.
//!
//! Features: the first three ambient coordinates on `S^d` and `RP^d` (both
//! representatives are queried on `RP^d`), and the Bloch-type coordinates
//! `(|u0|^2 - |u1|^2, 2 Re u0 conj(u1), 2 Im u0 conj(u1))` on `CP^d`, which
//! are gauge invariant and move by at most `2 sin(dist)`.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use crate::spaces::{Point, Space, SpaceKind};

type Key = [i32; 3];

#[derive(Debug, Clone)]
pub(crate) struct CenterIndex {
    space: Space,
    cell: f64,
    buckets: HashMap<Key, Vec<u32>>,
}

fn features(p: &Point, sign: f64) -> [f64; 3] {
    match p {
        Point::Real(v) => {
            let mut f = [0.0; 3];
            for (fi, x) in f.iter_mut().zip(v) {
                *fi = sign * x;
            }
            f
        }
        Point::Complex(v) => {
            let (a, b) = (v[0], v[1]);
            let c = a * b.conj();
            [a.norm_sqr() - b.norm_sqr(), 2.0 * c.re, 2.0 * c.im]
        }
    }
}

impl CenterIndex {
    /// `scale` is the geodesic radius the grid is tuned for.
    pub(crate) fn new(space: Space, scale: f64) -> Self {
        let cell = feature_bound(&space, scale).max(1e-9);
        CenterIndex {
            space,
            cell,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, f: &[f64; 3]) -> Key {
        [
            (f[0] / self.cell).floor() as i32,
            (f[1] / self.cell).floor() as i32,
            (f[2] / self.cell).floor() as i32,
        ]
    }

    pub(crate) fn insert(&mut self, id: u32, p: &Point) {
        let k = self.key(&features(p, 1.0));
        self.buckets.entry(k).or_default().push(id);
    }

    /// Visit every stored id whose point may lie within geodesic distance
    /// `radius` of `p`. Stops early when `visit` returns `false`.
    pub(crate) fn visit_near(&self, p: &Point, radius: f64, mut visit: impl FnMut(u32) -> bool) {
        let reach = (feature_bound(&self.space, radius) / self.cell).ceil() as i32;
        let signs: &[f64] = match self.space.kind {
            SpaceKind::RealProjective(_) => &[1.0, -1.0],
            _ => &[1.0],
        };
        for &sign in signs {
            let k = self.key(&features(p, sign));
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        if let Some(ids) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &id in ids {
                                if !visit(id) {
                                    return;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Upper bound on the feature displacement between points at geodesic distance `radius`.
pub(crate) fn feature_bound(space: &Space, radius: f64) -> f64 {
    match space.kind {
        SpaceKind::ComplexProjective(_) => 2.0 * radius.min(FRAC_PI_2).sin(),
        _ => 2.0 * (0.5 * radius.min(std::f64::consts::PI)).sin(),
    }
}
