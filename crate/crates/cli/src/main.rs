use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use metricspace::field::{self, frames_to_path};
use metricspace::io;
use metricspace::random::{
    random_chart, random_density, random_metric_field, random_path, trial_rng,
};
use metricspace::suites::{aggregate, run_suite, run_trial};
use metricspace::{
    field_distance, Constraint, Error, ErrorClass, Init, MetricField, OptimizerOptions, Region,
    Result, Suite,
};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_STRUCTURAL: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_OPTIMIZER: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "metricspace",
    version,
    about = "L2 geometry of metric fields on quadrature charts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// L2 inner product of two tangent fields at a metric field.
    Inner {
        metric: PathBuf,
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L2 norm of a tangent field at a metric field.
    Norm {
        metric: PathBuf,
        tangent: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Total volume of a metric field, optionally over a region.
    Vol {
        metric: PathBuf,
        #[command(flatten)]
        region: RegionArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper bound on the L2 distance by minimizing a discrete path energy.
    Dist {
        start: PathBuf,
        end: PathBuf,
        #[command(flatten)]
        opts: OptArgs,
        #[arg(long, default_value = "best")]
        init: Init,
        /// Keep the volume form of the endpoints fixed along the path.
        #[arg(long)]
        within_volume: bool,
        /// Path file to write (the best path seen, also on failure).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON-lines file of accepted iterates.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Integrated pointwise distance against a reference field.
    Theta {
        reference: PathBuf,
        start: PathBuf,
        end: PathBuf,
        #[command(flatten)]
        region: RegionArg,
        #[command(flatten)]
        opts: OptArgs,
        /// JSON report with per-point values.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a bound along a given path; exits 1 if it fails.
    Verify {
        bound: Bound,
        path: PathBuf,
        /// Reference field, required by `theta-bound`.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArg,
        #[command(flatten)]
        opts: OptArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a randomized property suite.
    Check {
        suite: Suite,
        /// Comma-separated base seeds.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        /// Replay only this trial index for each seed.
        #[arg(long)]
        trial: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a reproducible random instance.
    Gen {
        kind: GenKind,
        #[arg(long, default_value_t = 4)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seed of the chart weights; files sharing it (and `--points`, `--n`) share a chart.
        #[arg(long, default_value_t = 0)]
        chart_seed: u64,
        /// Eigenvalues (or densities) lie in [1/spread, spread].
        #[arg(long, default_value_t = 2.0)]
        spread: f64,
        /// Segments of a generated path.
        #[arg(long = "K", default_value_t = 8)]
        segments: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenKind {
    MetricField,
    Density,
    Path,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Bound {
    /// Change of the square-root volume against path length.
    LemmaSqrtvol,
    /// Integrated pointwise distance between the endpoints against path length.
    ThetaBound,
}

#[derive(Args, Debug)]
struct RegionArg {
    /// Comma-separated point ids; defaults to the whole chart.
    #[arg(long, value_delimiter = ',')]
    region: Option<Vec<String>>,
}

impl RegionArg {
    fn resolve(&self, g: &MetricField) -> Result<Region> {
        match &self.region {
            None => Ok(Region::all(g.chart())),
            Some(ids) => Region::from_ids(g.chart(), ids),
        }
    }
}

#[derive(Args, Debug)]
struct OptArgs {
    #[arg(long = "K", default_value_t = 32)]
    segments: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    eig_floor: f64,
}

impl OptArgs {
    fn options(&self) -> OptimizerOptions {
        OptimizerOptions {
            segments: self.segments,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            eig_floor: self.eig_floor,
            seed: self.seed,
            ..OptimizerOptions::default()
        }
    }
}

/// Result of a command that ran to completion but should not exit 0.
enum Outcome {
    Ok,
    CheckFailed,
    OptimizerFailed,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s
}

fn scalar(command: &str, value: f64, out: Option<&Path>) -> Result<Outcome> {
    println!("{value}");
    if let Some(p) = out {
        write(p, &to_json(&json!({ "command": command, "value": value })))?;
    }
    Ok(Outcome::Ok)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Inner {
            metric,
            left,
            right,
            out,
        } => {
            let g = io::read_metric_field(&read(&metric)?)?;
            let h = io::read_tangent_field(&read(&left)?)?;
            let k = io::read_tangent_field(&read(&right)?)?;
            scalar("inner", field::l2_inner(&g, &h, &k)?, out.as_deref())
        }
        Command::Norm {
            metric,
            tangent,
            out,
        } => {
            let g = io::read_metric_field(&read(&metric)?)?;
            let h = io::read_tangent_field(&read(&tangent)?)?;
            scalar("norm", field::l2_norm(&g, &h)?, out.as_deref())
        }
        Command::Vol {
            metric,
            region,
            out,
        } => {
            let g = io::read_metric_field(&read(&metric)?)?;
            let y = region.resolve(&g)?;
            scalar("vol", field::volume(&g, &y)?, out.as_deref())
        }
        Command::Dist {
            start,
            end,
            opts,
            init,
            within_volume,
            out,
            trace,
        } => {
            let g0 = io::read_metric_field(&read(&start)?)?;
            let g1 = io::read_metric_field(&read(&end)?)?;
            let constraint = if within_volume {
                Constraint::FixedVolume
            } else {
                Constraint::Free
            };
            match field_distance(&g0, &g1, init, constraint, &opts.options()) {
                Ok(geo) => {
                    if let Some(p) = &out {
                        write(p, &io::write_path(&geo.path))?;
                    }
                    if let Some(p) = &trace {
                        let lines: String = geo
                            .diagnostics
                            .trace
                            .iter()
                            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
                            .collect();
                        write(p, &lines)?;
                    }
                    println!("{}", geo.length);
                    if geo.diagnostics.converged {
                        Ok(Outcome::Ok)
                    } else {
                        eprintln!(
                            "error: optimizer did not converge after {} iterations (best length {})",
                            geo.diagnostics.iterations, geo.length
                        );
                        Ok(Outcome::OptimizerFailed)
                    }
                }
                Err(Error::Optimizer {
                    kind,
                    iterations,
                    best_length,
                    best_frames,
                }) => {
                    if let (Some(p), false) = (&out, best_frames.is_empty()) {
                        write(
                            p,
                            &io::write_path(&frames_to_path(g0.chart(), &best_frames)?),
                        )?;
                    }
                    Err(Error::Optimizer {
                        kind,
                        iterations,
                        best_length,
                        best_frames: Vec::new(),
                    })
                }
                Err(e) => Err(e),
            }
        }
        Command::Theta {
            reference,
            start,
            end,
            region,
            opts,
            out,
        } => {
            let g_ref = io::read_metric_field(&read(&reference)?)?;
            let g0 = io::read_metric_field(&read(&start)?)?;
            let g1 = io::read_metric_field(&read(&end)?)?;
            let y = region.resolve(&g0)?;
            let breakdown = field::theta_y_breakdown(&g_ref, &g0, &g1, &y, &opts.options())?;
            println!("{}", breakdown.total);
            if let Some(p) = &out {
                let lower = field::theta_y_lower_bound(&g0, &g1, &y)?;
                let report = json!({
                    "check": "theta",
                    "value": breakdown.total,
                    "lower_bound": lower,
                    "region": y.ids(),
                    "details": breakdown.points,
                });
                write(p, &to_json(&report))?;
            }
            let unconverged = breakdown.points.iter().filter(|p| !p.converged).count();
            if unconverged > 0 {
                eprintln!("error: {unconverged} pointwise solves did not converge");
                return Ok(Outcome::OptimizerFailed);
            }
            Ok(Outcome::Ok)
        }
        Command::Verify {
            bound,
            path,
            reference,
            region,
            opts,
            out,
        } => {
            let path = io::read_path(&read(&path)?)?;
            let report = match bound {
                Bound::LemmaSqrtvol => {
                    field::check_lipschitz_sqrtvol(&path, &region.resolve(path.start())?)?
                }
                Bound::ThetaBound => {
                    let reference = reference.ok_or_else(|| {
                        Error::InvalidArgument("theta-bound needs --reference".into())
                    })?;
                    let g_ref = io::read_metric_field(&read(&reference)?)?;
                    field::check_theta_bound(&path, &g_ref, &opts.options())?
                }
            };
            emit(
                out.as_deref(),
                &to_json(&serde_json::to_value(&report).expect("reports serialize")),
            )?;
            Ok(if report.pass {
                Outcome::Ok
            } else {
                Outcome::CheckFailed
            })
        }
        Command::Check {
            suite,
            seeds,
            trials,
            trial,
            out,
        } => {
            let outcome = match trial {
                None => run_suite(suite, &seeds, trials),
                Some(t) => aggregate(
                    suite,
                    seeds.iter().map(|&s| run_trial(suite, s, t)).collect(),
                ),
            };
            emit(
                out.as_deref(),
                &to_json(&serde_json::to_value(&outcome).expect("reports serialize")),
            )?;
            for f in outcome.failures() {
                eprintln!(
                    "FAIL {suite} seed={} trial={} instance={} {}; replay with: metricspace check {suite} --seeds {} --trial {}",
                    f.seed,
                    f.trial,
                    f.instance,
                    f.error.clone().unwrap_or_else(|| {
                        let failed: Vec<_> = f.reports.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
                        format!("failed checks: {}", failed.join(", "))
                    }),
                    f.seed,
                    f.trial,
                );
            }
            eprintln!(
                "{suite}: {} of {} trials passed",
                outcome.trials.iter().filter(|t| t.pass).count(),
                outcome.trials.len()
            );
            Ok(if outcome.report.pass {
                Outcome::Ok
            } else {
                Outcome::CheckFailed
            })
        }
        Command::Gen {
            kind,
            points,
            n,
            seed,
            chart_seed,
            spread,
            segments,
            out,
        } => {
            let chart = random_chart(&mut trial_rng(chart_seed, 0), n, points)?;
            let mut rng = trial_rng(seed, 1);
            let text = match kind {
                GenKind::MetricField => {
                    io::write_metric_field(&random_metric_field(&mut rng, &chart, spread)?)
                }
                GenKind::Density => io::write_density(&random_density(&mut rng, &chart, spread)?),
                GenKind::Path => {
                    io::write_path(&random_path(&mut rng, &chart, segments, spread, 0.5)?)
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(Outcome::Ok)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("METRICSPACE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "METRICSPACE_THREADS must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(EXIT_CHECK_FAILED),
        Ok(Outcome::OptimizerFailed) => ExitCode::from(EXIT_OPTIMIZER),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Structural => EXIT_STRUCTURAL,
                ErrorClass::Domain => EXIT_DOMAIN,
                ErrorClass::Optimizer => EXIT_OPTIMIZER,
            })
        }
    }
}
