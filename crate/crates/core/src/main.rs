use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dppdisc::discrepancy::{build_net, discrepancy_sup, DiscrepancyResult, NetSummary};
use dppdisc::ensembles::{Ensemble, KernelSpec};
use dppdisc::harness::{self, ExperimentConfig, ScanRow};
use dppdisc::rng::{self, domain};
use dppdisc::sampler::SampleSet;
use dppdisc::spaces::{Ball, Space};
use dppdisc::tails::{empirical_tail_check, TailRow};
use dppdisc::variance::variance_report;
use dppdisc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dppdisc",
    version,
    about = "Sampling, ball discrepancy and variance scaling for determinantal point processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(clap::Args)]
struct KernelArgs {
    #[arg(long)]
    ensemble: Ensemble,
    /// Space id such as s2, rp3, cp1, hp1, op2.
    #[arg(long)]
    space: String,
    #[arg(long)]
    level: u32,
}

impl KernelArgs {
    fn spec(&self) -> KernelSpec {
        KernelSpec {
            ensemble: self.ensemble,
            space: self.space.clone(),
            level: self.level,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parameters of the supported spaces.
    Spaces {
        #[command(flatten)]
        output: Output,
    },
    /// Draw one DPP sample.
    Sample {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        seed: u64,
        /// Draw replicate `i` of the seed's substreams instead of the seed's own stream.
        #[arg(long)]
        replicate: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Net discrepancy of a saved sample.
    Discrepancy {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "net-n")]
        net_n: u32,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Empirical, Monte Carlo and quadrature variance of a ball count.
    Variance {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        pairs: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Empirical tail frequencies of a ball count against the Bernstein bound.
    Tails {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        /// Comma-separated deviations; defaults to 10 points on [0, 4 sd].
        #[arg(long = "t-grid", value_delimiter = ',')]
        t_grid: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Scaling experiment from a JSON config.
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Log-log fit of a scan column against N.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "var_emp")]
        column: String,
        /// Keep only rows at this radius.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        target: f64,
        #[arg(long)]
        tolerance: f64,
        #[command(flatten)]
        output: Output,
    },
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_table<T: Serialize>(output: &Output, rows: &[T]) -> Result<()> {
    match output.format {
        Format::Json => write_json(&output.out, &rows),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(&output.out)?);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn json_only(output: &Output, what: &str) -> Result<()> {
    if output.format == Format::Csv {
        return Err(Error::Validation(format!("{what} output is JSON only")));
    }
    Ok(())
}

fn set_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Error::Validation("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::Validation(format!("cannot start {workers} workers: {e}")))
}

fn base_ball(space: &Space, radius: f64) -> Result<Ball> {
    let ball = Ball {
        center: space.base_point()?,
        radius,
    };
    space.check_ball(&ball)?;
    Ok(ball)
}

#[derive(Serialize)]
struct SpaceRow {
    id: String,
    alpha: f64,
    beta: f64,
    kappa: f64,
    dim: u32,
    diameter: f64,
    points: bool,
}

#[derive(Serialize)]
struct DiscrepancyOutput {
    kernel: KernelSpec,
    sample_seed: u64,
    replicate: Option<u64>,
    net_seed: u64,
    net: NetSummary,
    result: DiscrepancyResult,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spaces { output } => {
            let ids = [
                "s1", "s2", "s3", "s4", "rp1", "rp2", "rp3", "cp1", "cp2", "cp3", "hp1", "hp2",
                "op2",
            ];
            let rows = ids
                .iter()
                .map(|id| {
                    let s = Space::parse(id)?;
                    Ok(SpaceRow {
                        id: s.id(),
                        alpha: s.alpha,
                        beta: s.beta,
                        kappa: s.kappa,
                        dim: s.dim_real,
                        diameter: s.diameter,
                        points: s.supports_points(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_table(&output, &rows)
        }
        Command::Sample {
            kernel,
            seed,
            replicate,
            output,
        } => {
            json_only(&output, "sample")?;
            set_workers(output.workers)?;
            let k = kernel.spec().build()?;
            let s = match replicate {
                Some(i) => SampleSet::draw_replicate(&k, seed, i)?,
                None => SampleSet::draw(&k, seed)?,
            };
            eprintln!(
                "drew {} points ({} proposals)",
                s.points.len(),
                s.stats.proposals
            );
            write_json(&output.out, &s)
        }
        Command::Discrepancy {
            input,
            net_n,
            seed,
            output,
        } => {
            json_only(&output, "discrepancy")?;
            set_workers(output.workers)?;
            let sample: SampleSet =
                serde_json::from_reader(io::BufReader::new(File::open(&input)?))?;
            let space = Space::parse(&sample.kernel.space)?;
            let points = sample
                .points
                .iter()
                .map(|p| space.point(p.clone()))
                .collect::<Result<Vec<_>>>()?;
            let net = build_net(
                &space,
                net_n,
                &mut rng::substream(seed, domain::NET, net_n as u64),
            )?;
            for w in &net.meta().warnings {
                eprintln!("net warning: {w}");
            }
            eprintln!(
                "net: {} centers, {} radii",
                net.centers().len(),
                net.radii().len()
            );
            let result = discrepancy_sup(&points, &space, &net)?;
            write_json(
                &output.out,
                &DiscrepancyOutput {
                    kernel: sample.kernel,
                    sample_seed: sample.master_seed,
                    replicate: sample.replicate,
                    net_seed: seed,
                    net: net.summary(),
                    result,
                },
            )
        }
        Command::Variance {
            kernel,
            radius,
            reps,
            pairs,
            seed,
            output,
        } => {
            json_only(&output, "variance")?;
            set_workers(output.workers)?;
            let k = kernel.spec().build()?;
            let ball = base_ball(k.space(), radius)?;
            let report = variance_report(&k, &ball, reps, pairs, seed)?;
            write_json(&output.out, &report)
        }
        Command::Tails {
            kernel,
            radius,
            reps,
            seed,
            t_grid,
            output,
        } => {
            set_workers(output.workers)?;
            let k = kernel.spec().build()?;
            let ball = base_ball(k.space(), radius)?;
            let table = empirical_tail_check(&k, &ball, reps, &t_grid, seed)?;
            eprintln!(
                "mean {} variance {} over {} replicates",
                table.mean, table.variance, table.replicates
            );
            match output.format {
                Format::Csv => write_table::<TailRow>(&output, &table.rows),
                Format::Json => write_json(&output.out, &table),
            }
        }
        Command::Scan {
            config,
            seed,
            out,
            format,
            workers,
        } => {
            let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&config)?)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let out = out.or_else(|| cfg.out.clone().map(PathBuf::from));
            let outcome = harness::run_scaling(&cfg)?;
            for e in &outcome.errors {
                eprintln!(
                    "row L={} r={} failed at {}: {}",
                    e.level, e.radius, e.stage, e.message
                );
            }
            eprintln!(
                "{} rows; net of {} centers, c = {}",
                outcome.rows.len(),
                outcome.net_centers,
                outcome.net_exponent
            );
            let w = sink(&out)?;
            match format {
                Format::Csv => harness::write_rows_csv(w, &outcome.rows),
                Format::Json => harness::write_rows_json(w, &outcome.rows),
            }
        }
        Command::Fit {
            input,
            column,
            radius,
            target,
            tolerance,
            output,
        } => {
            json_only(&output, "fit")?;
            let file = File::open(&input)?;
            let rows: Vec<ScanRow> = if input.extension().is_some_and(|e| e == "json") {
                harness::read_rows_json(file)?
            } else {
                harness::read_rows_csv(file)?
            };
            let pick = |r: &ScanRow| -> Result<f64> {
                Ok(match column.as_str() {
                    "var_emp" => r.var_emp,
                    "var_mc" => r.var_mc,
                    "var_bound" => r.var_bound,
                    "disc_net" => r.disc_net,
                    "disc_slack" => r.disc_slack,
                    "threshold_t" => r.threshold_t,
                    other => return Err(Error::Validation(format!("cannot fit column '{other}'"))),
                })
            };
            let pts = rows
                .iter()
                .filter(|r| radius.is_none_or(|x| (r.radius - x).abs() <= 1e-12 * x.abs().max(1.0)))
                .map(|r| Ok((r.n as f64, pick(r)?)))
                .collect::<Result<Vec<_>>>()?;
            let fit = harness::fit_exponent(&pts, target, tolerance)?;
            write_json(&output.out, &fit)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
