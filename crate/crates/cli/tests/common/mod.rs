#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

#[path = "../../../core/tests/common/cone.rs"]
mod cone;
#[allow(unused_imports)]
pub use cone::cone_theta;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_metricspace"));
    c.env_remove("METRICSPACE_THREADS");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_threads(threads: usize, args: &[&str]) -> Output {
    bin()
        .env("METRICSPACE_THREADS", threads.to_string())
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn scalar(o: &Output) -> f64 {
    stdout(o)
        .trim()
        .parse()
        .unwrap_or_else(|_| panic!("not a scalar: {:?} / {}", stdout(o), stderr(o)))
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One-point-per-entry field file from `(id, weight, packed upper triangle)`.
pub fn field_json(n: usize, key: &str, points: &[(&str, f64, Vec<f64>)]) -> String {
    let pts: Vec<_> = points
        .iter()
        .map(|(id, w, v)| serde_json::json!({ "id": id, "weight": w, key: v }))
        .collect();
    serde_json::to_string(&serde_json::json!({ "n": n, "points": pts })).unwrap()
}
