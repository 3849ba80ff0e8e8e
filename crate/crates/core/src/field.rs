//! Integrals over a quadrature chart: the L² metric, volumes, path lengths,
//! the integrated pointwise distance and the inequality checkers.

use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use crate::chart::{same_chart, DiscretePath, MetricField, QuadChart, Region, TangentField};
use crate::error::Result;
use crate::optimizer::{self, Frame, GeodesicSetting, OptimizerOptions};
use crate::pointwise::{theta_geodesic, theta_lower_bound};
use crate::reduce::pairwise_sum;
use crate::report::CheckReport;
use crate::tensor::{packed_len, trace_pair, SpdMatrix, SymMatrix};

/// Constant `C` of the discretization tolerance `ε_disc = C / K²`.
///
/// The midpoint-rule length of the conformal path `(1 + t) I₂` on a one-point
/// chart is off by about `0.019 / K²`; `C` leaves a factor of 25 for paths
/// with more curvature.
pub const DISC_CONSTANT: f64 = 0.5;

/// Relative gap allowed between two integrated distances computed with different references.
pub const REFERENCE_GAP_TOL: f64 = 1e-3;

/// `ε_disc = C / K²` for a path with `segments` segments.
pub fn disc_tolerance(segments: usize) -> f64 {
    DISC_CONSTANT / (segments * segments) as f64
}

fn check_tangent(g: &MetricField, h: &TangentField) -> Result<()> {
    same_chart(g.chart(), h.chart())
}

/// `Σ_i w_i tr_{g_i}(h_i k_i) √det g_i`.
pub fn l2_inner(g: &MetricField, h: &TangentField, k: &TangentField) -> Result<f64> {
    check_tangent(g, h)?;
    check_tangent(g, k)?;
    let chart = g.chart();
    let terms = (0..chart.len())
        .into_par_iter()
        .map(|i| {
            let gi = g.get(i);
            trace_pair(gi, h.get(i), k.get(i))
                .map(|t| chart.weight(i) * t * gi.sqrt_det())
                .map_err(|e| e.at_point(chart.id(i)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms))
}

pub fn l2_norm(g: &MetricField, h: &TangentField) -> Result<f64> {
    Ok(l2_inner(g, h, h)?.sqrt())
}

/// `Σ_{i∈Y} w_i √det g_i`.
pub fn volume(g: &MetricField, region: &Region) -> Result<f64> {
    same_chart(g.chart(), region.chart())?;
    let terms: Vec<f64> = region
        .indices()
        .iter()
        .map(|&i| g.chart().weight(i) * g.get(i).sqrt_det())
        .collect();
    Ok(pairwise_sum(&terms))
}

pub(crate) fn field_to_frame(g: &MetricField) -> Frame {
    g.values()
        .iter()
        .flat_map(|v| v.as_sym().packed().iter().copied())
        .collect()
}

pub(crate) fn frame_to_field(chart: &Arc<QuadChart>, frame: &[f64]) -> Result<MetricField> {
    let len = packed_len(chart.dim());
    let values = frame
        .chunks(len)
        .map(|c| SymMatrix::from_packed(chart.dim(), c))
        .collect::<Result<Vec<_>>>()?;
    MetricField::from_sym(chart.clone(), values)
}

/// Flattens a path into optimizer frames, one block per chart point.
pub fn path_to_frames(path: &DiscretePath) -> Vec<Frame> {
    path.frames().iter().map(field_to_frame).collect()
}

/// Rebuilds a path from flattened optimizer frames.
pub fn frames_to_path(chart: &Arc<QuadChart>, frames: &[Frame]) -> Result<DiscretePath> {
    DiscretePath::new(
        frames
            .iter()
            .map(|f| frame_to_field(chart, f))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// The L² metric on flattened metric fields: one block per chart point.
pub struct FieldSetting {
    chart: Arc<QuadChart>,
    start: Frame,
    end: Frame,
    scales: Vec<f64>,
}

impl FieldSetting {
    pub fn new(g0: &MetricField, g1: &MetricField) -> Result<Self> {
        same_chart(g0.chart(), g1.chart())?;
        let top = |m: &SpdMatrix| *m.as_sym().eigenvalues().last().expect("n >= 1");
        let scales = g0
            .values()
            .iter()
            .zip(g1.values())
            .map(|(a, b)| top(a).max(top(b)))
            .collect();
        Ok(FieldSetting {
            chart: g0.chart().clone(),
            start: field_to_frame(g0),
            end: field_to_frame(g1),
            scales,
        })
    }

    pub fn chart(&self) -> &Arc<QuadChart> {
        &self.chart
    }

    fn point(&self, at: &[f64]) -> Result<SpdMatrix> {
        SpdMatrix::new(SymMatrix::from_packed(self.chart.dim(), at)?)
    }
}

impl GeodesicSetting for FieldSetting {
    fn block_count(&self) -> usize {
        self.chart.len()
    }

    fn block_len(&self) -> usize {
        packed_len(self.chart.dim())
    }

    fn start(&self) -> &[f64] {
        &self.start
    }

    fn end(&self) -> &[f64] {
        &self.end
    }

    fn block_inner(&self, block: usize, at: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let n = self.chart.dim();
        let inner = || -> Result<f64> {
            let g = self.point(at)?;
            let t = trace_pair(
                &g,
                &SymMatrix::from_packed(n, u)?,
                &SymMatrix::from_packed(n, v)?,
            )?;
            Ok(self.chart.weight(block) * t * g.sqrt_det())
        };
        inner().map_err(|e| e.at_point(self.chart.id(block)))
    }

    fn block_margin(&self, block: usize, at: &[f64]) -> f64 {
        match SymMatrix::from_packed(self.chart.dim(), at) {
            Ok(s) if s.is_finite() => s.eigenvalues()[0] / self.scales[block],
            _ => f64::NEG_INFINITY,
        }
    }
}

/// `Σ_k ‖g_{k+1} - g_k‖` with each norm taken at the entrywise midframe.
pub fn path_length(path: &DiscretePath) -> Result<f64> {
    let setting = FieldSetting::new(path.start(), path.end())?;
    optimizer::discrete_length(&setting, &path_to_frames(path))
}

/// `K Σ_k ‖g_{k+1} - g_k‖²` at the midframes.
pub fn path_energy(path: &DiscretePath) -> Result<f64> {
    let setting = FieldSetting::new(path.start(), path.end())?;
    optimizer::discrete_energy(&setting, &path_to_frames(path))
}

/// One chart point's share of the integrated distance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointTheta {
    pub id: String,
    pub weight: f64,
    /// Upper bound on the pointwise weighted distance.
    pub theta: f64,
    /// `√det g_ref` at the point.
    pub reference_density: f64,
    /// `weight · theta · reference_density`.
    pub contribution: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThetaBreakdown {
    pub total: f64,
    pub points: Vec<PointTheta>,
}

/// `Σ_{i∈Y} w_i θ_i(g0_i, g1_i) √det g_ref_i`, with the per-point terms.
///
/// Points are solved in parallel; the sum is taken in a fixed order. A
/// pointwise optimizer failure is returned wrapped with the point id.
pub fn theta_y_breakdown(
    g_ref: &MetricField,
    g0: &MetricField,
    g1: &MetricField,
    region: &Region,
    opts: &OptimizerOptions,
) -> Result<ThetaBreakdown> {
    opts.validate()?;
    same_chart(g_ref.chart(), g0.chart())?;
    same_chart(g_ref.chart(), g1.chart())?;
    same_chart(g_ref.chart(), region.chart())?;
    let chart = g0.chart();
    let points = region
        .indices()
        .par_iter()
        .map(|&i| {
            let r = g_ref.get(i);
            let geo = theta_geodesic(r, g0.get(i), g1.get(i), opts)
                .map_err(|e| e.at_point(chart.id(i)))?;
            let w = chart.weight(i);
            Ok(PointTheta {
                id: chart.id(i).to_string(),
                weight: w,
                theta: geo.length,
                reference_density: r.sqrt_det(),
                contribution: w * geo.length * r.sqrt_det(),
                iterations: geo.diagnostics.iterations,
                converged: geo.diagnostics.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<f64> = points.iter().map(|p| p.contribution).collect();
    Ok(ThetaBreakdown {
        total: pairwise_sum(&terms),
        points,
    })
}

pub fn theta_y(
    g_ref: &MetricField,
    g0: &MetricField,
    g1: &MetricField,
    region: &Region,
    opts: &OptimizerOptions,
) -> Result<f64> {
    Ok(theta_y_breakdown(g_ref, g0, g1, region, opts)?.total)
}

/// Certified lower bound on the integrated distance over `region`,
/// `(2/√n) Σ w_i |√det g1_i - √det g0_i|`; it does not depend on the reference.
pub fn theta_y_lower_bound(g0: &MetricField, g1: &MetricField, region: &Region) -> Result<f64> {
    same_chart(g0.chart(), g1.chart())?;
    same_chart(g0.chart(), region.chart())?;
    let chart = g0.chart();
    let one = SpdMatrix::identity(chart.dim());
    let terms: Vec<f64> = region
        .indices()
        .iter()
        .map(|&i| chart.weight(i) * theta_lower_bound(&one, g0.get(i), g1.get(i)))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `|√Vol(Y, g_K) - √Vol(Y, g_0)| ≤ (√n / 4) L(path)`, within `ε_disc`.
pub fn check_lipschitz_sqrtvol(path: &DiscretePath, region: &Region) -> Result<CheckReport> {
    let v0 = volume(path.start(), region)?;
    let v1 = volume(path.end(), region)?;
    let len = path_length(path)?;
    let n = path.chart().dim() as f64;
    let lhs = (v1.sqrt() - v0.sqrt()).abs();
    let rhs = n.sqrt() / 4.0 * len;
    Ok(CheckReport::upper_bound(
        "lemma-sqrtvol",
        lhs,
        rhs,
        disc_tolerance(path.segments()),
        json!({
            "volume_start": v0,
            "volume_end": v1,
            "path_length": len,
            "segments": path.segments(),
            "region": region.ids(),
        }),
    ))
}

/// `Θ_M(g_0, g_K) ≤ L (√Vol(M, g_0) + (√n / 4) L)` with `L` the length of `path`.
pub fn check_theta_bound(
    path: &DiscretePath,
    g_ref: &MetricField,
    opts: &OptimizerOptions,
) -> Result<CheckReport> {
    let all = Region::all(path.chart());
    let theta = theta_y_breakdown(g_ref, path.start(), path.end(), &all, opts)?;
    let len = path_length(path)?;
    let vol = volume(path.start(), &all)?;
    let n = path.chart().dim() as f64;
    let rhs = len * (vol.sqrt() + n.sqrt() / 4.0 * len);
    let tol = disc_tolerance(path.segments()) * (1.0 + rhs);
    Ok(CheckReport::upper_bound(
        "theta-bound",
        theta.total,
        rhs,
        tol,
        json!({
            "path_length": len,
            "volume_start": vol,
            "segments": path.segments(),
            "points": theta.points,
        }),
    ))
}

/// Integrated distance computed against two references; passes when the
/// relative gap is at most [`REFERENCE_GAP_TOL`]. `lhs` and `rhs` are the two
/// values and `slack` is minus the relative gap.
pub fn check_theta_reference_independence(
    g0: &MetricField,
    g1: &MetricField,
    g_ref_a: &MetricField,
    g_ref_b: &MetricField,
    region: &Region,
    opts: &OptimizerOptions,
) -> Result<CheckReport> {
    let a = theta_y_breakdown(g_ref_a, g0, g1, region, opts)?;
    let b = if g_ref_a == g_ref_b {
        a.clone()
    } else {
        theta_y_breakdown(g_ref_b, g0, g1, region, opts)?
    };
    let scale = a.total.abs().max(b.total.abs());
    let gap = if scale > 0.0 {
        (a.total - b.total).abs() / scale
    } else {
        0.0
    };
    Ok(CheckReport::new(
        "theta-refindep",
        a.total,
        b.total,
        -gap,
        REFERENCE_GAP_TOL,
        json!({
            "relative_gap": gap,
            "reference_a": a.points,
            "reference_b": b.points,
        }),
    ))
}
