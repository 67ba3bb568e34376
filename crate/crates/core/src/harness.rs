//! Scaling experiments over a level grid, log-log fits, and the row formats
//! written by the command line tool.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{build_net, discrepancy_sup, BallNet};
use crate::ensembles::{Ensemble, EnsembleKernel, KernelSpec};
use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::sampler::SampleSet;
use crate::spaces::{Ball, Space};
use crate::tails::{maintool_threshold, net_exponent};
use crate::variance::{variance_bound, variance_empirical, variance_exact_mc};

fn default_workers() -> usize {
    1
}

fn default_m() -> f64 {
    1.0
}

/// Flat experiment description; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: Ensemble,
    pub space: String,
    pub levels: Vec<u32>,
    pub radii: Vec<f64>,
    pub net_n: u32,
    pub reps: usize,
    pub pairs: usize,
    /// Samples whose median net discrepancy fills `disc_net`.
    pub disc_reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Confidence exponent `M` of the threshold (`1 - N^{-M}`).
    #[serde(default = "default_m")]
    pub m: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.levels.is_empty() {
            return bad("levels must be nonempty".into());
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("levels must be strictly ascending".into());
        }
        if self.radii.is_empty() {
            return bad("radii must be nonempty".into());
        }
        if self.net_n == 0
            || self.reps < 2
            || self.pairs < 2
            || self.disc_reps == 0
            || self.workers == 0
        {
            return bad("net_n, disc_reps and workers must be >= 1; reps and pairs >= 2".into());
        }
        if !(self.m > 0.0) {
            return bad("m must be positive".into());
        }
        let space = Space::parse(&self.space)?;
        if !space.supports_points() {
            return Err(Error::Unsupported(format!(
                "scans need point sampling, unavailable on {}",
                space.id()
            )));
        }
        if let Some(r) = self
            .radii
            .iter()
            .find(|r| !(**r > 0.0 && **r < space.diameter))
        {
            return bad(format!(
                "radius {r} outside (0, {}) on {}",
                space.diameter,
                space.id()
            ));
        }
        for &l in &self.levels {
            self.kernel(l)?;
        }
        Ok(())
    }

    pub fn kernel(&self, level: u32) -> Result<EnsembleKernel> {
        KernelSpec {
            ensemble: self.ensemble,
            space: self.space.clone(),
            level,
        }
        .build()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One `(L, radius)` row. Column order is the on-disk format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub space: String,
    pub ensemble: Ensemble,
    #[serde(rename = "L")]
    pub level: u32,
    #[serde(rename = "N")]
    pub n: u64,
    pub radius: f64,
    pub var_emp: f64,
    pub var_emp_se: f64,
    pub var_mc: f64,
    pub var_mc_se: f64,
    pub var_bound: f64,
    pub disc_net: f64,
    pub disc_slack: f64,
    pub threshold_t: f64,
    pub seed: u64,
}

pub const SCAN_COLUMNS: [&str; 14] = [
    "space",
    "ensemble",
    "L",
    "N",
    "radius",
    "var_emp",
    "var_emp_se",
    "var_mc",
    "var_mc_se",
    "var_bound",
    "disc_net",
    "disc_slack",
    "threshold_t",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    #[serde(rename = "L")]
    pub level: u32,
    pub radius: f64,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub rows: Vec<ScanRow>,
    pub errors: Vec<RowError>,
    pub net_centers: usize,
    pub net_exponent: f64,
}

/// Seed of the row for level `level` and radius index `ri`.
pub fn row_seed(master: u64, level: u32, ri: usize) -> u64 {
    rng::substream_seed(master, domain::ROW, ((level as u64) << 32) | ri as u64)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct LevelDisc {
    median: f64,
    slack: f64,
}

fn level_discrepancy(
    cfg: &ExperimentConfig,
    kernel: &EnsembleKernel,
    net: &BallNet,
) -> Result<LevelDisc> {
    let master = rng::substream_seed(cfg.seed, domain::SAMPLE, kernel.level() as u64);
    let sups = (0..cfg.disc_reps as u64)
        .map(|i| {
            let s = SampleSet::draw_replicate(kernel, master, i)?;
            discrepancy_sup(&s.points, kernel.space(), net)
        })
        .collect::<Result<Vec<_>>>()?;
    let slack = sups[0].slack;
    Ok(LevelDisc {
        median: median(sups.iter().map(|d| d.net_sup).collect()),
        slack,
    })
}

/// One row per `(L, radius)`, in grid order. Stage failures leave `NaN`
/// in the affected columns and are listed in `errors`; the run continues.
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ScanOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<ScanOutcome> {
    let space = Space::parse(&cfg.space)?;
    let net = build_net(
        &space,
        cfg.net_n,
        &mut rng::substream(cfg.seed, domain::NET, cfg.net_n as u64),
    )?;
    let c = net_exponent(&[(cfg.net_n, net.cardinality())], space.dim_real);

    let discs: Vec<Result<LevelDisc>> = cfg
        .levels
        .par_iter()
        .map(|&l| level_discrepancy(cfg, &cfg.kernel(l)?, &net))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..cfg.levels.len())
        .flat_map(|li| (0..cfg.radii.len()).map(move |ri| (li, ri)))
        .collect();
    let results: Vec<(ScanRow, Vec<RowError>)> = jobs
        .par_iter()
        .map(|&(li, ri)| {
            let level = cfg.levels[li];
            let radius = cfg.radii[ri];
            let seed = row_seed(cfg.seed, level, ri);
            let mut errors = Vec::new();
            let mut record = |stage: &str, e: Error| {
                errors.push(RowError {
                    level,
                    radius,
                    stage: stage.into(),
                    message: e.to_string(),
                });
                f64::NAN
            };
            let kernel = cfg.kernel(level).expect("validated");
            let ball = Ball {
                center: space.base_point().expect("validated"),
                radius,
            };
            let (var_emp, var_emp_se) = match variance_empirical(&kernel, &ball, cfg.reps, seed) {
                Ok(v) => (v.variance, v.se),
                Err(e) => (record("var_emp", e), f64::NAN),
            };
            let pair_seed = rng::substream_seed(seed, domain::PAIRS, 0);
            let (var_mc, var_mc_se) = match variance_exact_mc(&kernel, &ball, cfg.pairs, pair_seed)
            {
                Ok(v) => (v.estimate, v.se),
                Err(e) => (record("var_mc", e), f64::NAN),
            };
            let var_bound =
                variance_bound(&kernel, radius).unwrap_or_else(|e| record("var_bound", e));
            let (disc_net, disc_slack) = match &discs[li] {
                Ok(d) => (d.median, d.slack),
                Err(e) => (
                    record("discrepancy", Error::Numerical(e.to_string())),
                    f64::NAN,
                ),
            };
            let threshold_t = if var_emp.is_nan() {
                f64::NAN
            } else {
                maintool_threshold(kernel.trace().max(2), cfg.m, c, var_emp)
                    .map(|t| t.t)
                    .unwrap_or_else(|e| record("threshold", e))
            };
            let row = ScanRow {
                space: space.id(),
                ensemble: cfg.ensemble,
                level,
                n: kernel.trace(),
                radius,
                var_emp,
                var_emp_se,
                var_mc,
                var_mc_se,
                var_bound,
                disc_net,
                disc_slack,
                threshold_t,
                seed,
            };
            (row, errors)
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (row, errs) in results {
        rows.push(row);
        errors.extend(errs);
    }
    Ok(ScanOutcome {
        rows,
        errors,
        net_centers: net.centers().len(),
        net_exponent: c,
    })
}

/// Least-squares fit of `log y` against `log N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub rows: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn fit_exponent(rows: &[(f64, f64)], target: f64, tolerance: f64) -> Result<ScalingFit> {
    if rows.len() < 3 {
        return Err(Error::Validation(format!(
            "fit needs at least 3 rows (got {})",
            rows.len()
        )));
    }
    if let Some(&(n, y)) = rows.iter().find(|&&(n, y)| !(n > 0.0 && y > 0.0)) {
        return Err(Error::Domain(format!(
            "log-log fit needs positive N and y (got N={n}, y={y})"
        )));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, y)| (n.ln(), y.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("fit needs at least two distinct N".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(ScalingFit {
        rows: rows.to_vec(),
        slope,
        intercept,
        r2,
        target,
        tolerance,
        pass: (slope - target).abs() <= tolerance,
    })
}

pub fn write_rows_csv<W: Write>(out: W, rows: &[ScanRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(SCAN_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ScanRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(SCAN_COLUMNS.iter().copied()) {
        return Err(Error::Validation(format!(
            "unexpected scan columns: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_rows_json<W: Write>(mut out: W, rows: &[ScanRow]) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_rows_json<R: Read>(input: R) -> Result<Vec<ScanRow>> {
    Ok(serde_json::from_reader(input)?)
}
