//! The splitting of metrics into a volume form and a metric of fixed volume.
//!
//! Volume forms are positive coordinate densities on the chart. Both factors
//! have closed-form geodesics: the volume factor is flat after the square
//! root substitution, and the fixed-volume factor is a symmetric space whose
//! geodesics are `g₀ exp(t g₀⁻¹ h)` pointwise.

use std::sync::Arc;

use crate::chart::{
    same_chart, DensityTangent, DiscretePath, MetricField, QuadChart, TangentField, VolumeDensity,
};
use crate::error::{Error, Result};
use crate::field::FieldSetting;
use crate::optimizer::{self, Frame, GeodesicSetting};
use crate::reduce::pairwise_sum;
use crate::tensor::{
    packed_len, spd_exp_from, spd_log_from, trace_g, trace_pair, traceless_part, SpdMatrix,
    SymMatrix,
};

/// Tolerance on `tr_g h` for tangent vectors of the fixed-volume factor.
pub const TRACE_TOL: f64 = 1e-10;
/// Relative tolerance for "induces the same volume form".
pub const VOLUME_MATCH_TOL: f64 = 1e-8;

/// `(4/n) Σ_i w_i (α_i/ν_i)(β_i/ν_i) ν_i`.
pub fn vol_inner(nu: &VolumeDensity, alpha: &DensityTangent, beta: &DensityTangent) -> Result<f64> {
    same_chart(nu.chart(), alpha.chart())?;
    same_chart(nu.chart(), beta.chart())?;
    let chart = nu.chart();
    let n = chart.dim() as f64;
    let terms: Vec<f64> = (0..chart.len())
        .map(|i| chart.weight(i) * alpha.get(i) * beta.get(i) / nu.get(i))
        .collect();
    Ok(4.0 / n * pairwise_sum(&terms))
}

pub fn vol_norm(nu: &VolumeDensity, alpha: &DensityTangent) -> Result<f64> {
    Ok(vol_inner(nu, alpha, alpha)?.sqrt())
}

/// `ν_t = (1 + (t/2) α/ν₀)² ν₀`; an error names the first point where the factor is not positive.
pub fn vol_exp(nu0: &VolumeDensity, alpha: &DensityTangent, t: f64) -> Result<VolumeDensity> {
    same_chart(nu0.chart(), alpha.chart())?;
    let chart = nu0.chart();
    let mut out = Vec::with_capacity(chart.len());
    for i in 0..chart.len() {
        let factor = 1.0 + 0.5 * t * alpha.get(i) / nu0.get(i);
        if !(factor > 0.0) {
            return Err(Error::Boundary {
                point: chart.id(i).to_string(),
                factor,
            });
        }
        out.push(factor * factor * nu0.get(i));
    }
    VolumeDensity::new(chart.clone(), out)
}

/// `α = 2 (√(ν₁/ν₀) - 1) ν₀`, the inverse of [`vol_exp`] at `t = 1`.
pub fn vol_log(nu0: &VolumeDensity, nu1: &VolumeDensity) -> Result<DensityTangent> {
    same_chart(nu0.chart(), nu1.chart())?;
    let values = nu0
        .values()
        .iter()
        .zip(nu1.values())
        .map(|(&a, &b)| 2.0 * ((b / a).sqrt() - 1.0) * a)
        .collect();
    DensityTangent::new(nu0.chart().clone(), values)
}

/// The coordinate density `√det g_i` of the volume form a metric induces.
pub fn induced_density(g: &MetricField) -> VolumeDensity {
    VolumeDensity::new(
        g.chart().clone(),
        g.values().iter().map(SpdMatrix::sqrt_det).collect(),
    )
    .expect("SPD matrices have positive determinant")
}

/// Pointwise `g₀ exp(t g₀⁻¹ h)` for traceless `h`; preserves the induced volume.
pub fn mu_exp(g0: &MetricField, h: &TangentField, t: f64) -> Result<MetricField> {
    same_chart(g0.chart(), h.chart())?;
    let chart = g0.chart();
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..chart.len() {
        let tr = trace_g(g0.get(i), h.get(i))?;
        let size = trace_pair(g0.get(i), h.get(i), h.get(i))?.sqrt();
        let excess = tr.abs() / (1.0 + size);
        if excess > TRACE_TOL && worst.is_none_or(|(_, w)| excess > w) {
            worst = Some((i, excess));
        }
    }
    if let Some((i, excess)) = worst {
        return Err(Error::Precondition {
            point: chart.id(i).to_string(),
            what: format!("tangent is not traceless (relative trace {excess:e})"),
        });
    }
    let values = (0..chart.len())
        .map(|i| spd_exp_from(g0.get(i), &(*h.get(i) * t)).map_err(|e| e.at_point(chart.id(i))))
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(chart.clone(), values)
}

fn check_volume_match(
    chart: &QuadChart,
    a: impl Fn(usize) -> f64,
    b: impl Fn(usize) -> f64,
    what: &str,
) -> Result<()> {
    for i in 0..chart.len() {
        let (x, y) = (a(i), b(i));
        if (x - y).abs() > VOLUME_MATCH_TOL * x.abs().max(y.abs()) {
            return Err(Error::Precondition {
                point: chart.id(i).to_string(),
                what: format!("{what}: {x} vs {y}"),
            });
        }
    }
    Ok(())
}

/// Inverse of [`mu_exp`] at `t = 1` between metrics inducing the same volume.
///
/// The trace left over from round-off in the volume match is projected out,
/// so the result always satisfies the [`mu_exp`] precondition.
pub fn mu_log(g0: &MetricField, g1: &MetricField) -> Result<TangentField> {
    same_chart(g0.chart(), g1.chart())?;
    let chart = g0.chart();
    check_volume_match(
        chart,
        |i| g0.get(i).sqrt_det(),
        |i| g1.get(i).sqrt_det(),
        "induced volumes differ",
    )?;
    let values = (0..chart.len())
        .map(|i| {
            let log = spd_log_from(g0.get(i), g1.get(i))?;
            traceless_part(g0.get(i), &log)
        })
        .collect::<Result<Vec<_>>>()?;
    TangentField::new(chart.clone(), values)
}

/// `(ν/μ)^{2/n} ḡ` pointwise, for `ḡ` inducing `μ`.
pub fn i_mu(mu: &VolumeDensity, nu: &VolumeDensity, gbar: &MetricField) -> Result<MetricField> {
    same_chart(mu.chart(), nu.chart())?;
    same_chart(mu.chart(), gbar.chart())?;
    let chart = mu.chart();
    check_volume_match(
        chart,
        |i| gbar.get(i).sqrt_det(),
        |i| mu.get(i),
        "metric does not induce the base volume",
    )?;
    let p = 2.0 / chart.dim() as f64;
    let values = (0..chart.len())
        .map(|i| {
            SpdMatrix::new(*gbar.get(i).as_sym() * (nu.get(i) / mu.get(i)).powf(p))
                .map_err(|e| e.at_point(chart.id(i)))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricField::new(chart.clone(), values)
}

/// Inverse of [`i_mu`]: the induced density `ν` of `g` and the rescaled `ḡ = (ν/μ)^{-2/n} g`.
pub fn split(mu: &VolumeDensity, g: &MetricField) -> Result<(VolumeDensity, MetricField)> {
    same_chart(mu.chart(), g.chart())?;
    let chart = g.chart();
    let nu = induced_density(g);
    let p = -2.0 / chart.dim() as f64;
    let values = (0..chart.len())
        .map(|i| {
            SpdMatrix::new(*g.get(i).as_sym() * (nu.get(i) / mu.get(i)).powf(p))
                .map_err(|e| e.at_point(chart.id(i)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((nu, MetricField::new(chart.clone(), values)?))
}

/// Image of a density tangent `β` at `ν` under the differential of `ν ↦ i_μ(ν, ḡ)`:
/// `(2/n) (ν/μ)^{2/n} (β/ν) ḡ`.
pub fn pushforward_density_tangent(
    mu: &VolumeDensity,
    nu: &VolumeDensity,
    gbar: &MetricField,
    beta: &DensityTangent,
) -> Result<TangentField> {
    same_chart(mu.chart(), nu.chart())?;
    same_chart(mu.chart(), gbar.chart())?;
    same_chart(mu.chart(), beta.chart())?;
    let chart = mu.chart();
    let n = chart.dim() as f64;
    let values = (0..chart.len())
        .map(|i| {
            *gbar.get(i).as_sym()
                * (2.0 / n * (nu.get(i) / mu.get(i)).powf(2.0 / n) * beta.get(i) / nu.get(i))
        })
        .collect();
    TangentField::new(chart.clone(), values)
}

/// Frames `i_μ(vol_exp(ν₀, α, t_k), mu_exp(ḡ₀, h, t_k))` joining the
/// splittings of `g0` and `g1`. An initializer, not a geodesic of the full space.
pub fn product_path(
    g0: &MetricField,
    g1: &MetricField,
    mu: &VolumeDensity,
    segments: usize,
) -> Result<DiscretePath> {
    if segments == 0 {
        return Err(Error::InvalidArgument(
            "segment count must be at least 1".into(),
        ));
    }
    same_chart(g0.chart(), g1.chart())?;
    if g0 == g1 {
        return DiscretePath::new(vec![g0.clone(); segments + 1]);
    }
    let (nu0, gbar0) = split(mu, g0)?;
    let (nu1, gbar1) = split(mu, g1)?;
    let alpha = vol_log(&nu0, &nu1)?;
    let h = mu_log(&gbar0, &gbar1)?;
    let frames = (0..=segments)
        .map(|k| {
            let t = k as f64 / segments as f64;
            i_mu(mu, &vol_exp(&nu0, &alpha, t)?, &mu_exp(&gbar0, &h, t)?)
        })
        .collect::<Result<Vec<_>>>()?;
    DiscretePath::new(frames)
}

/// The volume-form metric on densities: one coordinate per chart point.
pub struct DensitySetting {
    chart: Arc<QuadChart>,
    start: Frame,
    end: Frame,
    scales: Vec<f64>,
}

impl DensitySetting {
    pub fn new(nu0: &VolumeDensity, nu1: &VolumeDensity) -> Result<Self> {
        same_chart(nu0.chart(), nu1.chart())?;
        Ok(DensitySetting {
            chart: nu0.chart().clone(),
            start: nu0.values().to_vec(),
            end: nu1.values().to_vec(),
            scales: nu0
                .values()
                .iter()
                .zip(nu1.values())
                .map(|(a, b)| a.max(*b))
                .collect(),
        })
    }
}

impl GeodesicSetting for DensitySetting {
    fn block_count(&self) -> usize {
        self.chart.len()
    }

    fn block_len(&self) -> usize {
        1
    }

    fn start(&self) -> &[f64] {
        &self.start
    }

    fn end(&self) -> &[f64] {
        &self.end
    }

    fn block_inner(&self, block: usize, at: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        if !(at[0] > 0.0) {
            return Err(Error::Domain(format!("density {} is not positive", at[0]))
                .at_point(self.chart.id(block)));
        }
        Ok(4.0 / self.chart.dim() as f64 * self.chart.weight(block) * u[0] * v[0] / at[0])
    }

    fn block_margin(&self, block: usize, at: &[f64]) -> f64 {
        at[0] / self.scales[block]
    }
}

/// Midpoint-rule length of a sequence of densities under the volume-form metric.
pub fn density_path_length(frames: &[VolumeDensity]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::InvalidArgument(
            "a path needs at least two frames".into(),
        ));
    }
    for f in &frames[1..] {
        same_chart(frames[0].chart(), f.chart())?;
    }
    let setting = DensitySetting::new(&frames[0], &frames[frames.len() - 1])?;
    let flat: Vec<Frame> = frames.iter().map(|f| f.values().to_vec()).collect();
    optimizer::discrete_length(&setting, &flat)
}

/// The L² metric restricted to metrics inducing a fixed volume form.
///
/// Search directions are projected onto traceless tensors and every step is
/// rescaled pointwise back onto the prescribed determinant.
pub struct FixedVolumeSetting {
    inner: FieldSetting,
    target: Vec<f64>,
}

impl FixedVolumeSetting {
    pub fn new(g0: &MetricField, g1: &MetricField) -> Result<Self> {
        same_chart(g0.chart(), g1.chart())?;
        check_volume_match(
            g0.chart(),
            |i| g0.get(i).sqrt_det(),
            |i| g1.get(i).sqrt_det(),
            "endpoints induce different volumes",
        )?;
        Ok(FixedVolumeSetting {
            inner: FieldSetting::new(g0, g1)?,
            target: induced_density(g0).values().to_vec(),
        })
    }

    fn n(&self) -> usize {
        self.inner.chart().dim()
    }
}

impl GeodesicSetting for FixedVolumeSetting {
    fn block_count(&self) -> usize {
        self.inner.block_count()
    }

    fn block_len(&self) -> usize {
        self.inner.block_len()
    }

    fn start(&self) -> &[f64] {
        self.inner.start()
    }

    fn end(&self) -> &[f64] {
        self.inner.end()
    }

    fn block_inner(&self, block: usize, at: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        self.inner.block_inner(block, at, u, v)
    }

    fn block_margin(&self, block: usize, at: &[f64]) -> f64 {
        self.inner.block_margin(block, at)
    }

    fn project(&self, _block: usize, at: &[f64], v: &mut [f64]) {
        let n = self.n();
        let (Ok(g), Ok(h)) = (SymMatrix::from_packed(n, at), SymMatrix::from_packed(n, v)) else {
            return;
        };
        let Ok(g) = SpdMatrix::new(g) else { return };
        if let Ok(p) = traceless_part(&g, &h) {
            v.copy_from_slice(&p.packed()[..packed_len(n)]);
        }
    }

    fn retract(&self, block: usize, x: &mut [f64]) {
        let n = self.n();
        let Ok(Ok(g)) = SymMatrix::from_packed(n, x).map(SpdMatrix::new) else {
            return;
        };
        let s = (self.target[block] / g.sqrt_det()).powf(2.0 / n as f64);
        for v in x.iter_mut() {
            *v *= s;
        }
    }
}
