//! Maximal separated nets and the ball sandwiches they provide.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cells::CubeCells;
use super::index::CenterIndex;
use crate::error::{Error, Result};
use crate::spaces::{Ball, Point, Space};

/// Consecutive rejections after which plain proposals hand over to cell refinement.
const PLAIN_PHASE_REJECTIONS: u64 = 100;
/// Hard cap on proposals when falling back to the rejection-count rule.
const MAX_TOTAL_PROPOSALS: u64 = 200_000_000;
const MAX_REFINE_ROUNDS: u32 = 48;
const MAX_CELL_LEVEL: u16 = 30;

/// How maximality of the center set was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maximality {
    /// A single center and a separation at least the diameter.
    Trivial,
    /// No uncovered cell remains: every point is within the separation of a center.
    Certified,
    /// `200 |S| + 10^4` consecutive rejected uniform proposals.
    RejectionRule,
    /// The proposal budget ran out first.
    BudgetExhausted,
}

/// Provenance and bookkeeping of a net build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetMeta {
    pub maximality: Maximality,
    pub proposals: u64,
    pub refine_rounds: u32,
    pub warnings: Vec<String>,
    pub ahlfors_c1: f64,
    pub ahlfors_c2: f64,
    /// `|centers| / n^D`, the empirical constant of the cardinality bound.
    pub density_constant: f64,
}

/// Maximal `eps`-separated centers and the radius grid `{0, delta, ..., K delta}`.
#[derive(Debug, Clone)]
pub struct BallNet {
    space: Space,
    n: u32,
    eps: f64,
    delta: f64,
    radii: Vec<f64>,
    centers: Vec<Point>,
    index: CenterIndex,
    meta: NetMeta,
}

/// Inner and outer net balls around an arbitrary ball. `inner == None` is the empty ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    pub center: usize,
    pub inner: Option<f64>,
    pub outer: f64,
}

/// Serializable digest of a net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSummary {
    pub space: String,
    pub n: u32,
    pub eps: f64,
    pub delta: f64,
    pub centers: usize,
    pub radii: usize,
    pub balls: u64,
    pub meta: NetMeta,
}

/// Net with `eps = 1/(4n)` and `delta = 1/(2n)`.
pub fn build_net<R: Rng + ?Sized>(space: &Space, n: u32, rng: &mut R) -> Result<BallNet> {
    if n == 0 {
        return Err(Error::Validation(
            "net parameter n must be at least 1".into(),
        ));
    }
    BallNet::build(space, n, 0.25 / n as f64, rng)
}

impl BallNet {
    /// Net of separation `eps` with the radius grid of parameter `n`.
    pub fn build<R: Rng + ?Sized>(space: &Space, n: u32, eps: f64, rng: &mut R) -> Result<BallNet> {
        if n == 0 {
            return Err(Error::Validation(
                "net parameter n must be at least 1".into(),
            ));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Validation(format!(
                "separation must be positive (got {eps})"
            )));
        }
        if !space.supports_points() {
            return Err(Error::Unsupported(format!(
                "nets need point sampling, unavailable on {}",
                space.id()
            )));
        }
        let delta = 0.5 / n as f64;
        let k = ((space.diameter + 1.0 / n as f64) / delta).ceil() as usize;
        let radii: Vec<f64> = (0..=k).map(|j| j as f64 * delta).collect();
        let (c1, c2) = space.ahlfors_constants();

        let mut net = BallNet {
            space: *space,
            n,
            eps,
            delta,
            radii,
            centers: Vec::new(),
            index: CenterIndex::new(*space, eps),
            meta: NetMeta {
                maximality: Maximality::Trivial,
                proposals: 1,
                refine_rounds: 0,
                warnings: Vec::new(),
                ahlfors_c1: c1,
                ahlfors_c2: c2,
                density_constant: 0.0,
            },
        };
        net.push(space.sample_uniform(rng)?);
        if eps < space.diameter {
            net.grow(rng)?;
        }
        net.meta.density_constant =
            net.centers.len() as f64 / (n as f64).powi(space.dim_real as i32);
        Ok(net)
    }

    fn push(&mut self, p: Point) {
        self.index.insert(self.centers.len() as u32, &p);
        self.centers.push(p);
    }

    fn is_separated(&self, p: &Point) -> bool {
        let mut ok = true;
        self.index.visit_near(p, self.eps, |id| {
            if self.space.dist(&self.centers[id as usize], p) < self.eps {
                ok = false;
            }
            ok
        });
        ok
    }

    fn propose(&mut self, p: Point) -> bool {
        self.meta.proposals += 1;
        if self.is_separated(&p) {
            self.push(p);
            true
        } else {
            false
        }
    }

    fn grow<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let cells = CubeCells::new(self.space, self.eps);
        let mut streak = 0u64;
        loop {
            let limit = match cells {
                Some(_) => PLAIN_PHASE_REJECTIONS,
                None => 200 * self.centers.len() as u64 + 10_000,
            };
            if streak >= limit {
                break;
            }
            if self.meta.proposals >= MAX_TOTAL_PROPOSALS {
                self.meta.maximality = Maximality::BudgetExhausted;
                self.meta.warnings.push(format!(
                    "proposal budget of {MAX_TOTAL_PROPOSALS} exhausted after a streak of {streak} rejections"
                ));
                return Ok(());
            }
            let p = self.space.sample_uniform(rng)?;
            streak = if self.propose(p) { 0 } else { streak + 1 };
        }
        match cells {
            Some(cells) => self.refine_phase(&cells, rng),
            None => {
                self.meta.maximality = Maximality::RejectionRule;
                Ok(())
            }
        }
    }

    fn refine_phase<R: Rng + ?Sized>(&mut self, cells: &CubeCells, rng: &mut R) -> Result<()> {
        let mut active = cells.initial_cells(&self.centers, &self.index);
        while !active.is_empty() {
            if self.meta.refine_rounds >= MAX_REFINE_ROUNDS {
                self.meta.maximality = Maximality::BudgetExhausted;
                self.meta.warnings.push(format!(
                    "{} cells still uncovered after {MAX_REFINE_ROUNDS} refinement rounds",
                    active.len()
                ));
                return Ok(());
            }
            self.meta.refine_rounds += 1;
            let mut cumulative = Vec::with_capacity(active.len());
            let mut total = 0.0;
            for c in &active {
                total += cells.weight(c);
                cumulative.push(total);
            }
            for _ in 0..active.len() {
                let u = rng.random::<f64>() * total;
                let k = cumulative
                    .partition_point(|&w| w <= u)
                    .min(active.len() - 1);
                let p = cells.sample_in(&active[k], rng);
                self.propose(p);
            }
            active = cells.refine(&active, &self.centers, &self.index, MAX_CELL_LEVEL);
            if active.iter().all(|c| cells.level_of(c) >= MAX_CELL_LEVEL) && !active.is_empty() {
                self.meta.maximality = Maximality::BudgetExhausted;
                self.meta.warnings.push(format!(
                    "{} cells reached the finest level uncovered",
                    active.len()
                ));
                return Ok(());
            }
        }
        self.meta.maximality = Maximality::Certified;
        Ok(())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn meta(&self) -> &NetMeta {
        &self.meta
    }

    /// Number of balls in the collection, the empty ball included.
    pub fn cardinality(&self) -> u64 {
        self.centers.len() as u64 * self.radii.len() as u64 + 1
    }

    pub fn summary(&self) -> NetSummary {
        NetSummary {
            space: self.space.id(),
            n: self.n,
            eps: self.eps,
            delta: self.delta,
            centers: self.centers.len(),
            radii: self.radii.len(),
            balls: self.cardinality(),
            meta: self.meta.clone(),
        }
    }

    /// Closest center and its distance.
    pub fn nearest_center(&self, x: &Point) -> (usize, f64) {
        let mut reach = self.eps;
        loop {
            let mut best = (usize::MAX, f64::INFINITY);
            self.index.visit_near(x, reach, |id| {
                let d = self.space.dist(&self.centers[id as usize], x);
                if d < best.1 {
                    best = (id as usize, d);
                }
                true
            });
            // a hit within `reach` is the true nearest: every closer center was visited
            if best.1 < reach || reach >= self.space.diameter {
                return best;
            }
            reach = (2.0 * reach).min(self.space.diameter);
        }
    }

    /// Net balls `A1 ⊆ ball ⊆ A2` whose radii differ by `1/n`.
    pub fn sandwich(&self, ball: &Ball) -> Result<Sandwich> {
        self.space.check_ball(ball)?;
        let (s, d) = self.nearest_center(&ball.center);
        if d >= self.eps {
            return Err(Error::Numerical(format!(
                "net does not cover the ball center (nearest center at {d}, separation {})",
                self.eps
            )));
        }
        let last = self.radii.len() - 1;
        let t = (ball.radius - self.eps).max(0.0);
        let j = ((t / self.delta).floor() as usize).min(last - 2);
        let inner = if j == 0 { None } else { Some(self.radii[j]) };
        Ok(Sandwich {
            center: s,
            inner,
            outer: self.radii[j + 2],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn large_separation_gives_one_center() {
        for id in ["s2", "rp2", "cp1"] {
            let sp = Space::parse(id).unwrap();
            let net = BallNet::build(&sp, 1, sp.diameter, &mut rng::stream(3)).unwrap();
            assert_eq!(net.centers().len(), 1);
            assert_eq!(net.meta().maximality, Maximality::Trivial);
        }
    }

    #[test]
    fn circle_quarter_separation() {
        // greedy on the circle with eps = pi/2 stops at 3 or 4 centers
        let sp = Space::parse("s1").unwrap();
        for seed in 0..40 {
            let net = BallNet::build(&sp, 1, FRAC_PI_2, &mut rng::stream(seed)).unwrap();
            let m = net.centers().len();
            assert!(m == 3 || m == 4, "seed {seed}: {m}");
            assert_eq!(net.meta().maximality, Maximality::Certified);
        }
    }

    fn check_net(net: &BallNet, probes: usize, seed: u64) {
        let sp = *net.space();
        let c = net.centers();
        for i in 0..c.len() {
            for j in 0..i {
                assert!(sp.dist(&c[i], &c[j]) >= net.eps());
            }
        }
        let mut r = rng::stream(seed);
        for _ in 0..probes {
            let p = sp.sample_uniform(&mut r).unwrap();
            assert!(
                c.iter().any(|q| sp.dist(q, &p) < net.eps()),
                "uncovered probe"
            );
        }
    }

    #[test]
    fn separated_and_covering() {
        for (id, n) in [("s2", 2), ("rp2", 2), ("s3", 1), ("cp1", 1)] {
            let sp = Space::parse(id).unwrap();
            let net = build_net(&sp, n, &mut rng::stream(11)).unwrap();
            check_net(&net, 2000, 12);
            assert!(
                net.meta().warnings.is_empty(),
                "{id}: {:?}",
                net.meta().warnings
            );
        }
    }

    #[test]
    fn sphere_n8_covers_probes() {
        let sp = Space::parse("s2").unwrap();
        let net = build_net(&sp, 8, &mut rng::stream(21)).unwrap();
        assert_eq!(net.meta().maximality, Maximality::Certified);
        check_net(&net, 1000, 22);
        let k = net.radii().len() as f64;
        assert!(k * net.delta() >= PI + 1.0 / 8.0 - 1e-12);
        assert_eq!(
            net.cardinality(),
            net.centers().len() as u64 * net.radii().len() as u64 + 1
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let sp = Space::parse("rp2").unwrap();
        let a = build_net(&sp, 2, &mut rng::stream(5)).unwrap();
        let b = build_net(&sp, 2, &mut rng::stream(5)).unwrap();
        assert_eq!(a.centers(), b.centers());
        assert_eq!(a.meta(), b.meta());
    }

    #[test]
    fn sandwich_soundness() {
        for (id, n) in [("s2", 4), ("rp2", 3), ("cp1", 2)] {
            let sp = Space::parse(id).unwrap();
            let net = build_net(&sp, n, &mut rng::stream(31)).unwrap();
            let mut r = rng::stream(32);
            for _ in 0..100 {
                let x = sp.sample_uniform(&mut r).unwrap();
                let radius = r.random::<f64>() * sp.diameter;
                let ball = Ball {
                    center: x.clone(),
                    radius,
                };
                let sw = net.sandwich(&ball).unwrap();
                assert!(sw.outer - sw.inner.unwrap_or(0.0) <= 1.0 / n as f64 + 1e-12);
                let s = &net.centers()[sw.center];
                for _ in 0..300 {
                    let y = sp.sample_uniform(&mut r).unwrap();
                    let in_b = sp.dist(&x, &y) < radius;
                    let ds = sp.dist(s, &y);
                    if sw.inner.is_some_and(|r1| ds < r1) {
                        assert!(in_b);
                    }
                    if in_b {
                        assert!(ds < sw.outer);
                    }
                }
            }
        }
    }
}
