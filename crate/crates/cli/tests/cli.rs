mod common;

use std::f64::consts::{E, SQRT_2};
use std::path::PathBuf;

use common::*;
use tempfile::TempDir;

struct Files(TempDir);

impl Files {
    fn new() -> Self {
        Files(tempfile::tempdir().unwrap())
    }

    fn put(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn gen(&self, name: &str, args: &[&str]) -> PathBuf {
        let p = self.path(name);
        let mut all = vec!["gen"];
        all.extend_from_slice(args);
        all.extend_from_slice(&["--out", path_str(&p)]);
        let o = run(&all);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        p
    }
}

fn one_point(files: &Files, name: &str, diag: [f64; 2]) -> PathBuf {
    files.put(
        name,
        &field_json(2, "g", &[("x", 1.0, vec![diag[0], 0.0, diag[1]])]),
    )
}

#[test]
fn vol_of_four_identity_is_four() {
    let f = Files::new();
    let g = one_point(&f, "g.json", [4.0, 4.0]);
    let o = run(&["vol", path_str(&g)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "4\n");
}

#[test]
fn norm_of_zero_tangent_is_zero() {
    let f = Files::new();
    let g = one_point(&f, "g.json", [2.0, 3.0]);
    let h = f.put(
        "h.json",
        &field_json(2, "h", &[("x", 1.0, vec![0.0, 0.0, 0.0])]),
    );
    assert_eq!(stdout(&run(&["norm", path_str(&g), path_str(&h)])), "0\n");
}

#[test]
fn inner_matches_a_hand_computation() {
    let f = Files::new();
    let g = one_point(&f, "g.json", [4.0, 4.0]);
    let h = f.put(
        "h.json",
        &field_json(2, "h", &[("x", 1.0, vec![1.0, 0.0, 0.0])]),
    );
    let out = f.path("inner.json");
    let o = run(&[
        "inner",
        path_str(&g),
        path_str(&h),
        path_str(&h),
        "--out",
        path_str(&out),
    ]);
    // tr(g⁻¹hg⁻¹h) √det g = (1/16) · 4
    assert_eq!(scalar(&o), 0.25);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["value"], 0.25);
}

#[test]
fn chart_mismatch_names_both_fingerprints() {
    let f = Files::new();
    let a = f.gen("a.json", &["metric-field", "--points", "3"]);
    let b = f.gen(
        "b.json",
        &["metric-field", "--points", "3", "--chart-seed", "1"],
    );
    let o = run(&["dist", path_str(&a), path_str(&b)]);
    assert_eq!(code(&o), 2);
    let msg = stderr(&o);
    assert!(msg.contains("chart mismatch"), "{msg}");
    let fingerprints: Vec<_> = msg
        .split_whitespace()
        .filter(|w| w.trim_matches(|c: char| !c.is_ascii_hexdigit()).len() == 16)
        .collect();
    assert_eq!(fingerprints.len(), 2, "{msg}");
}

#[test]
fn parse_and_validation_errors_exit_two_with_locations() {
    let f = Files::new();
    let broken = f.put("broken.json", "{\n \"n\": 2,\n \"points\": [ nope ]\n}");
    let o = run(&["vol", path_str(&broken)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let short = f.put(
        "short.json",
        &field_json(2, "g", &[("p7", 1.0, vec![1.0, 0.0])]),
    );
    let o = run(&["vol", path_str(&short)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("p7"), "{}", stderr(&o));

    let missing = f.path("missing.json");
    assert_eq!(code(&run(&["vol", path_str(&missing)])), 2);
    assert_eq!(code(&run(&["gen", "metric-field", "--n", "0"])), 2);
    assert_eq!(code(&run(&["gen", "density", "--spread", "0.5"])), 2);
    assert_eq!(code(&run(&["check", "no-such-suite"])), 2);
}

#[test]
fn domain_errors_exit_three_and_name_the_point() {
    let f = Files::new();
    let bad = f.put(
        "bad.json",
        &field_json(
            2,
            "g",
            &[
                ("ok", 0.5, vec![1.0, 0.0, 1.0]),
                ("q3", 0.5, vec![1.0, 2.0, 1.0]),
            ],
        ),
    );
    let o = run(&["vol", path_str(&bad)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("q3"), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_rejected() {
    let f = Files::new();
    let g = one_point(&f, "g.json", [1.0, 1.0]);
    let o = bin()
        .env("METRICSPACE_THREADS", "zero")
        .args(["vol", path_str(&g)])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn dist_of_identical_fields_is_zero() {
    let f = Files::new();
    let a = f.gen("a.json", &["metric-field", "--points", "4", "--n", "3"]);
    let out = f.path("p.json");
    let o = run(&["dist", path_str(&a), path_str(&a), "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(scalar(&o), 0.0);
    assert!(out.exists());
}

#[test]
fn dist_within_a_volume_class_matches_the_closed_form() {
    let f = Files::new();
    let a = one_point(&f, "a.json", [1.0, 1.0]);
    let b = one_point(&f, "b.json", [E, 1.0 / E]);
    let o = run(&["dist", path_str(&a), path_str(&b), "--within-volume"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let d = scalar(&o);
    assert!((d - SQRT_2).abs() <= 1e-2 * SQRT_2, "{d}");
}

#[test]
fn best_initializer_is_never_worse() {
    let f = Files::new();
    let a = f.gen(
        "a.json",
        &[
            "metric-field",
            "--points",
            "3",
            "--seed",
            "3",
            "--spread",
            "3",
        ],
    );
    let b = f.gen(
        "b.json",
        &[
            "metric-field",
            "--points",
            "3",
            "--seed",
            "4",
            "--spread",
            "3",
        ],
    );
    let length = |init: &str| {
        scalar(&run(&[
            "dist",
            path_str(&a),
            path_str(&b),
            "--init",
            init,
            "--K",
            "16",
        ]))
    };
    let best = length("best");
    for init in ["linear", "fiber", "product"] {
        assert!(best <= length(init) * (1.0 + 1e-9), "{init}");
    }
}

#[test]
fn dist_writes_path_and_trace() {
    let f = Files::new();
    let a = f.gen("a.json", &["metric-field", "--points", "3", "--seed", "1"]);
    let b = f.gen("b.json", &["metric-field", "--points", "3", "--seed", "2"]);
    let (p, t) = (f.path("p.json"), f.path("t.jsonl"));
    let o = run(&[
        "dist",
        path_str(&a),
        path_str(&b),
        "--K",
        "12",
        "--out",
        path_str(&p),
        "--trace",
        path_str(&t),
    ]);
    assert_eq!(code(&o), 0);
    let path = metricspace::io::read_path(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(path.segments(), 12);
    assert_eq!(metricspace::field::path_length(&path).unwrap(), scalar(&o));
    let energies: Vec<f64> = std::fs::read_to_string(&t)
        .unwrap()
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["energy"]
                .as_f64()
                .unwrap()
        })
        .collect();
    assert!(energies.len() > 1);
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn optimizer_failure_exits_four_and_keeps_the_best_path() {
    let f = Files::new();
    let a = one_point(&f, "a.json", [1.0, 1.0]);
    let b = one_point(&f, "b.json", [5.0, 0.2]);
    let p = f.path("best.json");
    let o = run(&[
        "dist",
        path_str(&a),
        path_str(&b),
        "--max-iters",
        "1",
        "--out",
        path_str(&p),
    ]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("converge"));
    let path = metricspace::io::read_path(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(metricspace::field::path_length(&path).unwrap(), scalar(&o));
}

#[test]
fn theta_examples() {
    let f = Files::new();
    let one = one_point(&f, "one.json", [1.0, 1.0]);
    let two = one_point(&f, "two.json", [2.0, 2.0]);
    assert_eq!(
        scalar(&run(&[
            "theta",
            path_str(&one),
            path_str(&two),
            path_str(&two)
        ])),
        0.0
    );
    let t = scalar(&run(&[
        "theta",
        path_str(&one),
        path_str(&one),
        path_str(&two),
    ]));
    assert!((t - SQRT_2).abs() <= 1e-2 * SQRT_2, "{t}");
}

#[test]
fn theta_region_details_are_monotone() {
    let f = Files::new();
    let r = f.gen("r.json", &["metric-field", "--points", "5", "--seed", "1"]);
    let a = f.gen("a.json", &["metric-field", "--points", "5", "--seed", "2"]);
    let b = f.gen("b.json", &["metric-field", "--points", "5", "--seed", "3"]);
    let (all, part) = (f.path("all.json"), f.path("part.json"));
    let o = run(&[
        "theta",
        path_str(&r),
        path_str(&a),
        path_str(&b),
        "--out",
        path_str(&all),
    ]);
    assert_eq!(code(&o), 0);
    run(&[
        "theta",
        path_str(&r),
        path_str(&a),
        path_str(&b),
        "--region",
        "p1,p3",
        "--out",
        path_str(&part),
    ]);
    let read = |p: &PathBuf| {
        serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(p).unwrap()).unwrap()
    };
    let (all, part) = (read(&all), read(&part));
    assert_eq!(all["details"].as_array().unwrap().len(), 5);
    assert_eq!(part["details"].as_array().unwrap().len(), 2);
    assert!(part["value"].as_f64().unwrap() <= all["value"].as_f64().unwrap());
    assert!(all["details"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["theta"].as_f64().unwrap() > 0.0));
    assert!(all["lower_bound"].as_f64().unwrap() <= all["value"].as_f64().unwrap());
}

#[test]
fn check_with_no_trials_passes() {
    let o = run(&["check", "theta-refindep", "--trials", "0"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["pass"], true);
}

#[test]
fn check_replays_a_single_trial() {
    let full = run(&["check", "lemma-sqrtvol", "--trials", "5", "--seeds", "9"]);
    let one = run(&["check", "lemma-sqrtvol", "--seeds", "9", "--trial", "3"]);
    let full: serde_json::Value = serde_json::from_str(&stdout(&full)).unwrap();
    let one: serde_json::Value = serde_json::from_str(&stdout(&one)).unwrap();
    assert_eq!(full["trials"][3], one["trials"][0]);
}

#[test]
fn verify_reports_failures_with_exit_one() {
    let f = Files::new();
    let frame = |v: f64| field_json(1, "g", &[("a", 1.0, vec![v])]);
    let coarse = f.put(
        "coarse.json",
        &format!(
            r#"{{ "K": 1, "frames": [{}, {}] }}"#,
            frame(1.0),
            frame(100.0)
        ),
    );
    let o = run(&["verify", "lemma-sqrtvol", path_str(&coarse)]);
    assert_eq!(code(&o), 1);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["pass"], false);

    let smooth = f.gen("p.json", &["path", "--points", "3", "--K", "32"]);
    let reference = f.gen("r.json", &["metric-field", "--points", "3"]);
    assert_eq!(
        code(&run(&["verify", "lemma-sqrtvol", path_str(&smooth)])),
        0
    );
    let o = run(&[
        "verify",
        "theta-bound",
        path_str(&smooth),
        "--reference",
        path_str(&reference),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&run(&["verify", "theta-bound", path_str(&smooth)])), 2);
}

#[test]
fn gen_is_byte_reproducible_and_valid() {
    for kind in ["metric-field", "density", "path"] {
        let args = ["gen", kind, "--points", "4", "--n", "3", "--seed", "42"];
        let (a, b) = (run(&args), run(&args));
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout);
        assert_ne!(
            a.stdout,
            run(&["gen", kind, "--points", "4", "--n", "3", "--seed", "43"]).stdout
        );
    }
    let text = stdout(&run(&[
        "gen",
        "metric-field",
        "--points",
        "6",
        "--n",
        "4",
        "--spread",
        "5",
    ]));
    let g = metricspace::io::read_metric_field(&text).unwrap();
    for v in g.values() {
        let eig = v.as_sym().eigenvalues();
        assert!(eig[0] >= 0.2 - 1e-12 && eig[3] <= 5.0 + 1e-12, "{eig:?}");
    }
}

#[test]
fn gen_with_unit_spread_gives_identities() {
    let text = stdout(&run(&[
        "gen",
        "metric-field",
        "--points",
        "3",
        "--n",
        "3",
        "--spread",
        "1",
    ]));
    let g = metricspace::io::read_metric_field(&text).unwrap();
    assert!(g
        .values()
        .iter()
        .all(|v| *v == metricspace::SpdMatrix::identity(3)));
}
