//! Ball counts, exact-in-radius discrepancy over net centers, and the
//! certified correction from the net sandwich.

mod cells;
mod index;
mod net;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spaces::{Ball, Point, Space};

pub use net::{build_net, BallNet, Maximality, NetMeta, NetSummary, Sandwich};

/// Number of points strictly inside the open ball.
pub fn count_in_ball(space: &Space, points: &[Point], ball: &Ball) -> usize {
    points
        .iter()
        .filter(|p| space.dist(&ball.center, p) < ball.radius)
        .count()
}

/// Ball attaining the net supremum, approached from the side given by `limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxBall {
    pub center_index: usize,
    pub center: Point,
    pub radius: f64,
    /// `"above"`: supremum approached as `r` decreases to `radius`
    /// (count exceeds mass). `"at"`: attained at `radius` (mass exceeds count).
    pub limit: String,
    pub count: usize,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyResult {
    pub n_points: usize,
    pub net_sup: f64,
    pub slack: f64,
    pub certified_upper: f64,
    pub argmax: Option<ArgmaxBall>,
}

/// Exact supremum over all radii of `|count(B(c, r)) - N vol(B(c, r))|`
/// for one center, with the radius and side where it is approached.
///
/// With sorted distances `d_(1) <= ... <= d_(N)`, `d_(0) = 0` and
/// `d_(N+1) = diameter`, the count equals `k` on `(d_(k), d_(k+1)]`, so the
/// supremum is the largest of `k - N vol(d_(k))` and `N vol(d_(k+1)) - k`.
pub(crate) fn center_sup(
    space: &Space,
    points: &[Point],
    center: &Point,
) -> (f64, f64, bool, usize) {
    let n = points.len();
    let mut d: Vec<f64> = points.iter().map(|p| space.dist(center, p)).collect();
    d.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut best = (0.0, 0.0, false, 0usize);
    let mut vol_k = 0.0;
    for k in 0..=n {
        let r_next = if k < n { d[k] } else { space.diameter };
        let vol_next = space.ball_volume_unchecked(r_next);
        let r_k = if k == 0 { 0.0 } else { d[k - 1] };
        let over = k as f64 - nf * vol_k;
        if over > best.0 {
            best = (over, r_k, true, k);
        }
        let under = nf * vol_next - k as f64;
        if under > best.0 {
            best = (under, r_next, false, k);
        }
        vol_k = vol_next;
    }
    best
}

/// Discrepancy of `points` over every ball centered at a net center, plus
/// the slack `N c2 D diameter^{D-1} / n` covering all other balls.
pub fn discrepancy_sup(
    points: &[Point],
    space: &Space,
    net: &BallNet,
) -> Result<DiscrepancyResult> {
    for p in points {
        space.point(p.clone())?;
    }
    let n_points = points.len();
    let dim = space.dim_real as f64;
    let slack = n_points as f64 * net.meta().ahlfors_c2 * dim * space.diameter.powf(dim - 1.0)
        / net.n() as f64;
    if n_points == 0 {
        return Ok(DiscrepancyResult {
            n_points,
            net_sup: 0.0,
            slack,
            certified_upper: slack,
            argmax: None,
        });
    }
    let per_center: Vec<(f64, f64, bool, usize)> = net
        .centers()
        .par_iter()
        .map(|c| center_sup(space, points, c))
        .collect();
    // first index wins ties, independent of scheduling
    let (ci, &(value, radius, above, count)) = per_center
        .iter()
        .enumerate()
        .fold(
            None,
            |acc: Option<(usize, &(f64, f64, bool, usize))>, (i, v)| match acc {
                Some((_, b)) if b.0 >= v.0 => acc,
                _ => Some((i, v)),
            },
        )
        .expect("net has at least one center");
    let argmax = ArgmaxBall {
        center_index: ci,
        center: net.centers()[ci].clone(),
        radius,
        limit: if above { "above" } else { "at" }.to_string(),
        count,
        expected: n_points as f64 * space.ball_volume_unchecked(radius),
    };
    Ok(DiscrepancyResult {
        n_points,
        net_sup: value,
        slack,
        certified_upper: value + slack,
        argmax: Some(argmax),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::seq::SliceRandom;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn circle(t: f64) -> Point {
        Point::Real(vec![t.cos(), t.sin()])
    }

    #[test]
    fn count_examples() {
        let sp = Space::parse("s1").unwrap();
        let quarter: Vec<Point> = (0..4).map(|k| circle(k as f64 * FRAC_PI_2)).collect();
        let ball = |r| Ball {
            center: quarter[0].clone(),
            radius: r,
        };
        assert_eq!(count_in_ball(&sp, &[], &ball(1.0)), 0);
        assert_eq!(count_in_ball(&sp, &quarter, &ball(0.0)), 0);
        assert_eq!(count_in_ball(&sp, &quarter, &ball(FRAC_PI_2 + 0.01)), 3);
    }

    #[test]
    fn count_monotone_in_radius() {
        let sp = Space::parse("cp1").unwrap();
        let mut r = rng::stream(2);
        let pts: Vec<Point> = (0..200)
            .map(|_| sp.sample_uniform(&mut r).unwrap())
            .collect();
        let c = sp.sample_uniform(&mut r).unwrap();
        let mut last = 0;
        for j in 0..=200 {
            let b = Ball {
                center: c.clone(),
                radius: sp.diameter * j as f64 / 200.0,
            };
            let k = count_in_ball(&sp, &pts, &b);
            assert!(k >= last);
            last = k;
        }
    }

    #[test]
    fn empty_and_single_point() {
        let sp = Space::parse("s2").unwrap();
        let net = build_net(&sp, 1, &mut rng::stream(1)).unwrap();
        let res = discrepancy_sup(&[], &sp, &net).unwrap();
        assert_eq!(res.net_sup, 0.0);
        let x = net.centers()[0].clone();
        let res = discrepancy_sup(&[x], &sp, &net).unwrap();
        assert_eq!(res.net_sup, 1.0);
        assert!(res.certified_upper >= res.net_sup);
    }

    #[test]
    fn per_center_matches_radius_scan() {
        let sp = Space::parse("s2").unwrap();
        let mut r = rng::stream(7);
        let pts: Vec<Point> = (0..60)
            .map(|_| sp.sample_uniform(&mut r).unwrap())
            .collect();
        for _ in 0..5 {
            let c = sp.sample_uniform(&mut r).unwrap();
            let (exact, _, _, _) = center_sup(&sp, &pts, &c);
            let mut scan: f64 = 0.0;
            let m = 10_000;
            for j in 0..=m {
                let radius = PI * j as f64 / m as f64;
                let b = Ball {
                    center: c.clone(),
                    radius,
                };
                let k = count_in_ball(&sp, &pts, &b) as f64;
                scan = scan.max((k - 60.0 * sp.ball_volume(radius).unwrap()).abs());
            }
            // a grid misses the one-sided limits by at most N * (max density) * step
            let slop = 60.0 * 0.5 * PI / m as f64;
            assert!(scan <= exact + 1e-12, "{scan} > {exact}");
            assert!(exact <= scan + slop, "{exact} vs {scan}");
        }
    }

    #[test]
    fn relabeling_invariance() {
        let sp = Space::parse("rp2").unwrap();
        let net = build_net(&sp, 2, &mut rng::stream(4)).unwrap();
        let mut r = rng::stream(5);
        let mut pts: Vec<Point> = (0..80)
            .map(|_| sp.sample_uniform(&mut r).unwrap())
            .collect();
        let a = discrepancy_sup(&pts, &sp, &net).unwrap();
        pts.shuffle(&mut r);
        let b = discrepancy_sup(&pts, &sp, &net).unwrap();
        assert_eq!(a.net_sup, b.net_sup);
    }

    #[test]
    fn iid_baseline_range() {
        let sp = Space::parse("s2").unwrap();
        let net = build_net(&sp, 4, &mut rng::stream(8)).unwrap();
        for seed in 0..20 {
            let mut r = rng::stream(100 + seed);
            let pts: Vec<Point> = (0..100)
                .map(|_| sp.sample_uniform(&mut r).unwrap())
                .collect();
            let res = discrepancy_sup(&pts, &sp, &net).unwrap();
            assert!(
                (5.0..=50.0).contains(&res.net_sup),
                "seed {seed}: {}",
                res.net_sup
            );
        }
    }

    #[test]
    fn argmax_reproduces_value() {
        let sp = Space::parse("s2").unwrap();
        let net = build_net(&sp, 2, &mut rng::stream(9)).unwrap();
        let mut r = rng::stream(10);
        let pts: Vec<Point> = (0..50)
            .map(|_| sp.sample_uniform(&mut r).unwrap())
            .collect();
        let res = discrepancy_sup(&pts, &sp, &net).unwrap();
        let a = res.argmax.unwrap();
        assert!(((a.count as f64 - a.expected).abs() - res.net_sup).abs() < 1e-9);
    }
}
