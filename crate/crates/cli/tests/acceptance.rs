//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`cargo test -p metricspace-cli --test acceptance`)
//! so the PASS/FAIL lines are always shown.

mod common;

use std::f64::consts::{E, SQRT_2};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use metricspace::field::{
    check_lipschitz_sqrtvol, disc_tolerance, l2_norm, path_length, path_to_frames, theta_y,
    REFERENCE_GAP_TOL,
};
use metricspace::io;
use metricspace::optimizer::projected_gradient_norm;
use metricspace::pointwise::{conformal_theta_oracle, theta_geodesic};
use metricspace::product::{density_path_length, mu_exp, vol_exp, vol_norm, FixedVolumeSetting};
use metricspace::random::{
    random_chart, random_density, random_density_tangent, random_metric_field, random_spd,
    random_traceless_field, trial_rng,
};
use metricspace::suites::{run_suite, SuiteOutcome, RADIAL_LENGTH_TOL};
use metricspace::{
    field_distance, Constraint, DensityTangent, DiscretePath, Init, MetricField, OptimizerOptions,
    QuadChart, Region, SpdMatrix, Suite,
};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn suite_ok(out: &SuiteOutcome) -> Result<(), String> {
    match out.failures().next() {
        None => Ok(()),
        Some(f) => Err(format!(
            "{} failed at seed {} trial {}: {:?} {:?}",
            out.report.check,
            f.seed,
            f.trial,
            f.error,
            f.reports
                .iter()
                .filter(|r| !r.pass)
                .map(|r| (&r.check, r.slack, r.tolerance))
                .collect::<Vec<_>>()
        )),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

fn one_point(n: usize) -> std::sync::Arc<QuadChart> {
    QuadChart::uniform(n, 1, 1.0).unwrap()
}

fn scaled_identity(n: usize, s: f64) -> SpdMatrix {
    SpdMatrix::from_diagonal(&vec![s; n]).unwrap()
}

fn radial_lengths() -> Verdict {
    const K: usize = 1000;
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let mut rng = trial_rng(1, trial);
        let n = 1 + (trial % 3) as usize;
        let points = 1 + (trial as usize * 37) % 64;
        let chart = random_chart(&mut rng, n, points).unwrap();

        let nu0 = random_density(&mut rng, &chart, 3.0).unwrap();
        let z = random_density_tangent(&mut rng, &chart, 1.0).unwrap();
        // keeps 1 + α/(2ν) away from zero on [0, 1]
        let alpha = DensityTangent::new(
            chart.clone(),
            nu0.values()
                .iter()
                .zip(z.values())
                .map(|(v, z)| 1.5 * v * z.tanh())
                .collect(),
        )
        .unwrap();
        let frames: Vec<_> = (0..=K)
            .map(|k| vol_exp(&nu0, &alpha, k as f64 / K as f64).unwrap())
            .collect();
        let gap = rel(
            density_path_length(&frames).unwrap(),
            vol_norm(&nu0, &alpha).unwrap(),
        );
        ensure(gap <= RADIAL_LENGTH_TOL, || {
            format!("volume ray trial {trial}: relative gap {gap:e}")
        })?;
        worst = worst.max(gap);

        let g0 = random_metric_field(&mut rng, &chart, 2.0).unwrap();
        let h = random_traceless_field(&mut rng, &g0, 0.5).unwrap();
        let path = DiscretePath::new(
            (0..=K)
                .map(|k| mu_exp(&g0, &h, k as f64 / K as f64).unwrap())
                .collect(),
        )
        .unwrap();
        let gap = rel(path_length(&path).unwrap(), l2_norm(&g0, &h).unwrap());
        ensure(gap <= RADIAL_LENGTH_TOL, || {
            format!("fixed-volume ray trial {trial}: relative gap {gap:e}")
        })?;
        worst = worst.max(gap);
    }
    Ok(format!("200 rays, worst relative gap {worst:.2e}"))
}

fn sqrtvol_lemma() -> Verdict {
    let out = run_suite(Suite::LemmaSqrtvol, &[0], 200);
    suite_ok(&out)?;
    let c = one_point(2);
    const K: usize = 1000;
    let frames = (0..=K)
        .map(|k| {
            MetricField::constant(c.clone(), scaled_identity(2, 1.0 + k as f64 / K as f64)).unwrap()
        })
        .collect();
    let r = check_lipschitz_sqrtvol(&DiscretePath::new(frames).unwrap(), &Region::all(&c)).unwrap();
    ensure((r.lhs - (SQRT_2 - 1.0)).abs() <= 1e-12, || {
        format!("equality case lhs {}", r.lhs)
    })?;
    ensure(r.slack.abs() <= 1e-6, || {
        format!("equality case slack {:e}", r.slack)
    })?;
    Ok(format!(
        "200 random paths pass; equality case slack {:.1e}",
        r.slack
    ))
}

fn reference_independence() -> Verdict {
    let out = run_suite(Suite::ThetaRefindep, &[0], 50);
    suite_ok(&out)?;
    let worst = out
        .trials
        .iter()
        .map(|t| -t.reports[0].slack)
        .fold(0.0, f64::max);
    ensure(worst <= REFERENCE_GAP_TOL, || {
        format!("relative gap {worst:e}")
    })?;

    // conformal pair: both references and the closed form
    let c = one_point(2);
    let opts = OptimizerOptions::default();
    let g0 = MetricField::constant(c.clone(), scaled_identity(2, 1.0)).unwrap();
    let g1 = MetricField::constant(c.clone(), scaled_identity(2, 2.0)).unwrap();
    let all = Region::all(&c);
    let mut gaps = Vec::new();
    for s in [1.0, 4.0] {
        let r = MetricField::constant(c.clone(), scaled_identity(2, s)).unwrap();
        let t = theta_y(&r, &g0, &g1, &all, &opts).unwrap();
        let exact =
            conformal_theta_oracle(r.get(0), g0.get(0), 1.0, 2.0).unwrap() * r.get(0).sqrt_det();
        gaps.push(rel(t, exact));
    }
    let conformal = gaps.iter().copied().fold(0.0, f64::max);
    ensure(conformal <= 1e-6, || {
        format!("conformal cross-check gap {conformal:e}")
    })?;
    Ok(format!(
        "50 instances, worst gap {worst:.2e}; conformal gap {conformal:.1e}"
    ))
}

fn pseudometric_axioms() -> Verdict {
    let out = run_suite(Suite::Pseudometric, &[0], 50);
    suite_ok(&out)?;
    let positive = out
        .trials
        .iter()
        .flat_map(|t| t.reports.iter().filter(|r| r.check == "positive"))
        .map(|r| r.rhs)
        .fold(f64::INFINITY, f64::min);

    // pointwise distances against the exact cone distance
    let opts = OptimizerOptions::default();
    let mut worst: f64 = 0.0;
    for trial in 0..30u64 {
        let mut rng = trial_rng(2, trial);
        let n = 1 + (trial % 3) as usize;
        let r = random_spd(&mut rng, n, 2.0).unwrap();
        let a = random_spd(&mut rng, n, 2.0).unwrap();
        let b = random_spd(&mut rng, n, 2.0).unwrap();
        let d = theta_geodesic(&r, &a, &b, &opts)
            .map_err(|e| e.to_string())?
            .length;
        worst = worst.max(rel(d, cone_theta(&r, &a, &b)));
    }
    ensure(worst <= 1e-3, || {
        format!("pointwise distance off the exact value by {worst:e}")
    })?;
    Ok(format!(
        "50 triples pass; smallest distinct distance {positive:.3}; exact-distance gap {worst:.1e}"
    ))
}

fn main_inequality() -> Verdict {
    let out = run_suite(Suite::ThetaBound, &[0], 100);
    suite_ok(&out)?;
    Ok(format!(
        "100 paths, tightest slack {:.3e}",
        out.report.slack
    ))
}

fn product_structure() -> Verdict {
    let out = run_suite(Suite::ExpInvariants, &[0], 100);
    suite_ok(&out)?;
    let worst = |name: &str| {
        out.trials
            .iter()
            .flat_map(|t| t.reports.iter().filter(|r| r.check == name))
            .map(|r| r.lhs.abs().max(-r.slack))
            .fold(0.0, f64::max)
    };
    Ok(format!(
        "100 instances; round trips {:.1e}/{:.1e}, volume {:.1e}",
        worst("split-after-i-mu"),
        worst("i-mu-after-split"),
        worst("induced-volume"),
    ))
}

fn pointwise_oracle() -> Verdict {
    let opts = OptimizerOptions::default();
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let g0 = scaled_identity(n, 1.0);
        for f in [0.25, 0.5, 2.0, 4.0] {
            let g1 = scaled_identity(n, f);
            let d = theta_geodesic(&g0, &g0, &g1, &opts)
                .map_err(|e| e.to_string())?
                .length;
            let exact = conformal_theta_oracle(&g0, &g0, 1.0, f).unwrap();
            let gap = rel(d, exact);
            ensure(gap <= 1e-2, || format!("n = {n}, f = {f}: {d} vs {exact}"))?;
            worst = worst.max(gap);
        }
    }

    const K: usize = 32;
    let mut grad: f64 = 0.0;
    for trial in 0..10u64 {
        let mut rng = trial_rng(3, trial);
        let chart = random_chart(&mut rng, 2 + (trial % 2) as usize, 4).unwrap();
        let g0 = random_metric_field(&mut rng, &chart, 2.0).unwrap();
        let h = random_traceless_field(&mut rng, &g0, 0.5).unwrap();
        let path = DiscretePath::new(
            (0..=K)
                .map(|k| mu_exp(&g0, &h, k as f64 / K as f64).unwrap())
                .collect(),
        )
        .unwrap();
        let setting = FixedVolumeSetting::new(path.start(), path.end()).unwrap();
        grad = grad.max(projected_gradient_norm(&setting, &path_to_frames(&path)).unwrap());
    }
    ensure(grad <= disc_tolerance(K), || {
        format!("gradient norm {grad:e} at a closed-form geodesic")
    })?;
    Ok(format!(
        "12 conformal pairs, worst gap {worst:.1e}; geodesic gradient norm {grad:.1e}"
    ))
}

fn optimizer_contracts() -> Verdict {
    let mut runs = 0;
    let mut worst_growth = f64::NEG_INFINITY;
    for trial in 0..6u64 {
        let mut rng = trial_rng(4, trial);
        let chart = random_chart(&mut rng, 1 + (trial % 3) as usize, 3).unwrap();
        let g0 = random_metric_field(&mut rng, &chart, 2.0).unwrap();
        let g1 = random_metric_field(&mut rng, &chart, 2.0).unwrap();
        let mut lengths = Vec::new();
        for k in [16, 32] {
            let opts = OptimizerOptions::default().with_segments(k);
            let geo = field_distance(&g0, &g1, Init::Best, Constraint::Free, &opts)
                .map_err(|e| e.to_string())?;
            let energies: Vec<f64> = geo.diagnostics.trace.iter().map(|r| r.energy).collect();
            ensure(energies.windows(2).all(|w| w[1] <= w[0]), || {
                format!("energy increased in trial {trial}, K = {k}")
            })?;
            ensure(geo.diagnostics.converged, || {
                format!("trial {trial}, K = {k} did not converge")
            })?;
            runs += 1;
            lengths.push(geo.length);

            let p = theta_geodesic(g0.get(0), g0.get(0), g1.get(0), &opts)
                .map_err(|e| e.to_string())?;
            let energies: Vec<f64> = p.diagnostics.trace.iter().map(|r| r.energy).collect();
            ensure(energies.windows(2).all(|w| w[1] <= w[0]), || {
                format!("pointwise energy increased in trial {trial}")
            })?;
            runs += 1;
        }
        let growth = lengths[1] - lengths[0];
        ensure(growth <= disc_tolerance(16), || {
            format!("doubling K grew the length by {growth:e} in trial {trial}")
        })?;
        worst_growth = worst_growth.max(growth);
    }

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    run(&[
        "gen",
        "metric-field",
        "--points",
        "6",
        "--n",
        "3",
        "--seed",
        "5",
        "--out",
        path_str(&a),
    ]);
    run(&[
        "gen",
        "metric-field",
        "--points",
        "6",
        "--n",
        "3",
        "--seed",
        "6",
        "--out",
        path_str(&b),
    ]);
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        let p = dir.path().join(format!("path{threads}.json"));
        let dist = run_threads(
            threads,
            &[
                "dist",
                path_str(&a),
                path_str(&b),
                "--seed",
                "7",
                "--out",
                path_str(&p),
            ],
        );
        let theta = run_threads(
            threads,
            &["theta", path_str(&a), path_str(&a), path_str(&b)],
        );
        let check = run_threads(
            threads,
            &["check", "pseudometric", "--trials", "4", "--seeds", "1,2"],
        );
        ensure(
            code(&dist) == 0 && code(&theta) == 0 && code(&check) == 0,
            || "a run failed".into(),
        )?;
        outputs.push((
            dist.stdout,
            std::fs::read(&p).unwrap(),
            theta.stdout,
            check.stdout,
        ));
    }
    ensure(outputs[0] == outputs[1], || {
        "outputs differ between 1 and 4 worker threads".into()
    })?;
    Ok(format!("{runs} runs with monotone energy; worst doubling growth {worst_growth:.1e}; 1 vs 4 threads identical"))
}

fn cli_contracts() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let file = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };

    for (kind, name) in [
        ("metric-field", "g.json"),
        ("density", "nu.json"),
        ("path", "p.json"),
    ] {
        let p = dir.path().join(name);
        run(&[
            "gen",
            kind,
            "--points",
            "5",
            "--n",
            "3",
            "--seed",
            "11",
            "--spread",
            "3",
            "--out",
            path_str(&p),
        ]);
        let text = std::fs::read_to_string(&p).unwrap();
        let again = match kind {
            "metric-field" => io::write_metric_field(&io::read_metric_field(&text).unwrap()),
            "density" => io::write_density(&io::read_density(&text).unwrap()),
            _ => io::write_path(&io::read_path(&text).unwrap()),
        };
        ensure(again == text, || format!("{kind} file did not round-trip"))?;
    }

    let ok = file(
        "ok.json",
        &field_json(2, "g", &[("a", 1.0, vec![4.0, 0.0, 4.0])]),
    );
    let other = file(
        "other.json",
        &field_json(2, "g", &[("b", 1.0, vec![4.0, 0.0, 4.0])]),
    );
    let not_spd = file(
        "bad.json",
        &field_json(2, "g", &[("a", 1.0, vec![1.0, 3.0, 1.0])]),
    );
    let wide = file(
        "wide.json",
        &field_json(2, "g", &[("a", 1.0, vec![E, 0.0, 1.0 / E])]),
    );
    let coarse = file(
        "coarse.json",
        &format!(
            r#"{{ "K": 1, "frames": [{}, {}] }}"#,
            field_json(1, "g", &[("a", 1.0, vec![1.0])]),
            field_json(1, "g", &[("a", 1.0, vec![100.0])])
        ),
    );
    let traced = dir.path().join("best.json");
    let cases: [(i32, Vec<&str>); 6] = [
        (0, vec!["vol", path_str(&ok)]),
        (1, vec!["verify", "lemma-sqrtvol", path_str(&coarse)]),
        (2, vec!["dist", path_str(&ok), path_str(&other)]),
        (3, vec!["vol", path_str(&not_spd)]),
        (
            3,
            vec!["dist", path_str(&ok), path_str(&wide), "--within-volume"],
        ),
        (
            4,
            vec![
                "dist",
                path_str(&ok),
                path_str(&wide),
                "--max-iters",
                "1",
                "--out",
                path_str(&traced),
            ],
        ),
    ];
    for (expected, args) in &cases {
        let o = run(args);
        ensure(code(&o) == *expected, || {
            format!("{args:?} exited {} ({})", code(&o), stderr(&o).trim())
        })?;
    }
    ensure(traced.exists(), || {
        "best-so-far path missing after optimizer failure".into()
    })?;

    let start = Instant::now();
    for suite in Suite::ALL {
        let o = run(&["check", suite.name(), "--trials", "12"]);
        ensure(code(&o) == 0, || {
            format!("check {suite} exited {}: {}", code(&o), stderr(&o))
        })?;
    }
    Ok(format!(
        "3 file kinds round-trip; exit codes 0-4 reached; 5 suites clean in {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("closed-form geodesic lengths", radial_lengths),
        ("square-root volume lemma", sqrtvol_lemma),
        ("reference independence", reference_independence),
        ("pseudometric axioms", pseudometric_axioms),
        ("main inequality", main_inequality),
        ("product structure", product_structure),
        ("pointwise oracle and geodesic gradient", pointwise_oracle),
        ("optimizer contracts", optimizer_contracts),
        ("command line", cli_contracts),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
