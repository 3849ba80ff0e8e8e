use metricspace::SpdMatrix;
use nalgebra::{DMatrix, SymmetricEigen};

fn dense(g: &SpdMatrix) -> DMatrix<f64> {
    let n = g.dim();
    DMatrix::from_fn(n, n, |i, j| g.as_sym().get(i, j))
}

/// Exact pointwise distance, from the observation that the reference-weighted
/// metric is a flat cone: radius `(2/√n) √det(g_ref⁻¹ g)`, and angle
/// `(√n/2)` times the norm of the traceless part of `log(a⁻¹ b)`'s spectrum.
/// The chord is taken along the cone, whose total angle is capped at `π`.
pub fn cone_theta(g_ref: &SpdMatrix, a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    let n = a.dim() as f64;
    let radius = |g: &SpdMatrix| 2.0 / n.sqrt() * (g.sqrt_det() / g_ref.sqrt_det());
    let l = dense(a).cholesky().expect("spd").l();
    let li = l.clone().try_inverse().unwrap();
    let m = &li * dense(b) * li.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let logs: Vec<f64> = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|v| v.ln())
        .collect();
    let mean = logs.iter().sum::<f64>() / n;
    let sigma = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    let phi = (n.sqrt() / 2.0 * sigma).min(std::f64::consts::PI);
    let (r0, r1) = (radius(a), radius(b));
    (r0 * r0 + r1 * r1 - 2.0 * r0 * r1 * phi.cos())
        .max(0.0)
        .sqrt()
}
