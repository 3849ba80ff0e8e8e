//! Reproducible random instances.
//!
//! Every draw goes through a ChaCha8 stream selected by `(seed, trial)`, so
//! any single trial of a randomized suite can be replayed on its own.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::chart::{
    ChartPoint, DensityTangent, DiscretePath, MetricField, QuadChart, TangentField, VolumeDensity,
};
use crate::error::{Error, Result};
use crate::tensor::{spd_exp_from, traceless_part, SpdMatrix, SymMatrix, MAX_DIM};

/// The generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn check_spread(spread: f64) -> Result<()> {
    if spread >= 1.0 && spread.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "spread must be a finite number >= 1, got {spread}"
        )))
    }
}

fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "fiber dimension {n} outside 1..={MAX_DIM}"
        )))
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Symmetric matrix with independent `N(0, scale²)` upper-triangle entries.
pub fn random_sym<R: Rng>(rng: &mut R, n: usize, scale: f64) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| scale * normal(rng))
}

/// `Q diag(λ) Qᵀ` with `Q` Haar-orthogonal and `log λ` uniform on
/// `[-log spread, log spread]`. `spread = 1` gives the identity exactly.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, spread: f64) -> Result<SpdMatrix> {
    check_dim(n)?;
    check_spread(spread)?;
    if spread == 1.0 {
        return Ok(SpdMatrix::identity(n));
    }
    let z = DMatrix::from_fn(n, n, |_, _| normal(rng));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let ln = spread.ln();
    let lambdas: Vec<f64> = (0..n).map(|_| (rng.random_range(-ln..=ln)).exp()).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambdas));
    let m = &q * d * q.transpose();
    SpdMatrix::new(SymMatrix::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
}

/// Chart with ids `p0 …`, weights uniform on `[0.5, 1.5] / points`.
pub fn random_chart<R: Rng>(rng: &mut R, n: usize, points: usize) -> Result<Arc<QuadChart>> {
    check_dim(n)?;
    if points == 0 {
        return Err(Error::InvalidArgument(
            "a chart needs at least one point".into(),
        ));
    }
    let pts = (0..points)
        .map(|i| ChartPoint::new(format!("p{i}"), rng.random_range(0.5..1.5) / points as f64))
        .collect();
    QuadChart::new(n, pts)
}

pub fn random_metric_field<R: Rng>(
    rng: &mut R,
    chart: &Arc<QuadChart>,
    spread: f64,
) -> Result<MetricField> {
    let values = (0..chart.len())
        .map(|_| random_spd(rng, chart.dim(), spread))
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(chart.clone(), values)
}

pub fn random_tangent_field<R: Rng>(
    rng: &mut R,
    chart: &Arc<QuadChart>,
    scale: f64,
) -> Result<TangentField> {
    let values = (0..chart.len())
        .map(|_| random_sym(rng, chart.dim(), scale))
        .collect();
    TangentField::new(chart.clone(), values)
}

/// Tangent field with `tr_{g_i} h_i = 0` at every point.
pub fn random_traceless_field<R: Rng>(
    rng: &mut R,
    g: &MetricField,
    scale: f64,
) -> Result<TangentField> {
    let values = g
        .values()
        .iter()
        .map(|gi| traceless_part(gi, &random_sym(rng, gi.dim(), scale)))
        .collect::<Result<Vec<_>>>()?;
    TangentField::new(g.chart().clone(), values)
}

/// Densities with `log ν` uniform on `[-log spread, log spread]`.
pub fn random_density<R: Rng>(
    rng: &mut R,
    chart: &Arc<QuadChart>,
    spread: f64,
) -> Result<VolumeDensity> {
    check_spread(spread)?;
    let ln = spread.ln();
    let values = (0..chart.len())
        .map(|_| {
            if ln == 0.0 {
                1.0
            } else {
                rng.random_range(-ln..=ln).exp()
            }
        })
        .collect();
    VolumeDensity::new(chart.clone(), values)
}

pub fn random_density_tangent<R: Rng>(
    rng: &mut R,
    chart: &Arc<QuadChart>,
    scale: f64,
) -> Result<DensityTangent> {
    let values = (0..chart.len()).map(|_| scale * normal(rng)).collect();
    DensityTangent::new(chart.clone(), values)
}

/// Smooth path `g0_i exp(g0_i⁻¹ (t a_i + sin(πt) b_i))` on `segments` segments,
/// with `g0` drawn at `spread` and `a`, `b` of entry scale `step`. Every frame is SPD.
pub fn random_path<R: Rng>(
    rng: &mut R,
    chart: &Arc<QuadChart>,
    segments: usize,
    spread: f64,
    step: f64,
) -> Result<DiscretePath> {
    if segments == 0 {
        return Err(Error::InvalidArgument(
            "segment count must be at least 1".into(),
        ));
    }
    let g0 = random_metric_field(rng, chart, spread)?;
    let n = chart.dim();
    let dirs: Vec<(SymMatrix, SymMatrix)> = (0..chart.len())
        .map(|_| (random_sym(rng, n, step), random_sym(rng, n, step)))
        .collect();
    let frames = (0..=segments)
        .map(|k| {
            if k == 0 {
                return Ok(g0.clone());
            }
            let t = k as f64 / segments as f64;
            let bump = if k == segments { 0.0 } else { (PI * t).sin() };
            let values = g0
                .values()
                .iter()
                .zip(&dirs)
                .map(|(g, (a, b))| spd_exp_from(g, &(*a * t + *b * bump)))
                .collect::<Result<Vec<_>>>()?;
            MetricField::new(chart.clone(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    DiscretePath::new(frames)
}
