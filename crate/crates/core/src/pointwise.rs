//! The cone of metrics at a single point.
//!
//! Two inner products live on SPD matrices: the plain trace pairing
//! `tr_g̃(hk)` and the reference-weighted one `tr_g̃(hk) · det(g_ref⁻¹ g̃)`.
//! The distance of the weighted metric has no closed form here; it is
//! bounded from above by minimizing the discrete path energy.

use crate::error::{Error, OptimizerFailure, Result};
use crate::optimizer::{self, Candidate, Diagnostics, Frame, GeodesicSetting, OptimizerOptions};
use crate::reduce::mirror_sum;
use crate::tensor::{packed_len, spd_exp_from, spd_log_from, trace_pair, SpdMatrix, SymMatrix};

/// Samples `s_0 … s_K` of a path in the cone on the grid `t_k = k / K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPath {
    samples: Vec<SpdMatrix>,
}

impl PointPath {
    pub fn new(samples: Vec<SpdMatrix>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(
                "a path needs at least two samples (K >= 1)".into(),
            ));
        }
        let n = samples[0].dim();
        if let Some(s) = samples.iter().find(|s| s.dim() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: s.dim(),
            });
        }
        Ok(PointPath { samples })
    }

    /// `t ↦ (1 - t) a + t b`.
    pub fn linear(a: &SpdMatrix, b: &SpdMatrix, segments: usize) -> Result<Self> {
        let frames = optimizer::linear_frames(a.as_sym().packed(), b.as_sym().packed(), segments);
        Self::from_frames(a.dim(), &frames)
    }

    /// `t ↦ a exp(t a⁻¹ log)`, the affine-invariant geodesic from `a` to `b`.
    pub fn fiber(a: &SpdMatrix, b: &SpdMatrix, segments: usize) -> Result<Self> {
        let log = spd_log_from(a, b)?;
        let mut samples = Vec::with_capacity(segments + 1);
        samples.push(*a);
        for k in 1..segments {
            samples.push(spd_exp_from(a, &(log * (k as f64 / segments as f64)))?);
        }
        samples.push(*b);
        Self::new(samples)
    }

    /// `t ↦ f(t) g0` with `f` linear from `f0` to `f1`.
    pub fn conformal(g0: &SpdMatrix, f0: f64, f1: f64, segments: usize) -> Result<Self> {
        let samples = (0..=segments)
            .map(|k| {
                let t = k as f64 / segments as f64;
                SpdMatrix::new(*g0.as_sym() * (f0 + t * (f1 - f0)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub(crate) fn from_frames(n: usize, frames: &[Frame]) -> Result<Self> {
        let samples = frames
            .iter()
            .map(|f| SpdMatrix::new(SymMatrix::from_packed(n, f)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub(crate) fn to_frames(&self) -> Vec<Frame> {
        self.samples
            .iter()
            .map(|s| s.as_sym().packed().to_vec())
            .collect()
    }

    pub fn samples(&self) -> &[SpdMatrix] {
        &self.samples
    }

    pub fn segments(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn start(&self) -> &SpdMatrix {
        &self.samples[0]
    }

    pub fn end(&self) -> &SpdMatrix {
        &self.samples[self.samples.len() - 1]
    }

    pub fn reversed(&self) -> PointPath {
        let mut samples = self.samples.clone();
        samples.reverse();
        PointPath { samples }
    }

    /// `self` then `other`; they must share the junction sample exactly.
    pub fn concat(&self, other: &PointPath) -> Result<PointPath> {
        if self.end() != other.start() {
            return Err(Error::InvalidArgument(
                "paths do not share an endpoint".into(),
            ));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples[1..]);
        Ok(PointPath { samples })
    }
}

/// `tr_g̃(hk)`.
pub fn inner_point(g: &SpdMatrix, h: &SymMatrix, k: &SymMatrix) -> Result<f64> {
    trace_pair(g, h, k)
}

/// `tr_g̃(hk) · det(g_ref⁻¹ g̃)`.
pub fn inner0_point(g_ref: &SpdMatrix, g: &SpdMatrix, h: &SymMatrix, k: &SymMatrix) -> Result<f64> {
    if g_ref.dim() != g.dim() {
        return Err(Error::Dimension {
            expected: g_ref.dim(),
            found: g.dim(),
        });
    }
    Ok(trace_pair(g, h, k)? * density_ratio(g_ref, g))
}

// det(g_ref⁻¹ g), as a ratio of Cholesky diagonals
fn density_ratio(g_ref: &SpdMatrix, g: &SpdMatrix) -> f64 {
    let r = g.sqrt_det() / g_ref.sqrt_det();
    r * r
}

/// Midpoint-rule length of `path` under the reference-weighted metric.
pub fn point_path_length(g_ref: &SpdMatrix, path: &PointPath) -> Result<f64> {
    let norms = path
        .samples
        .windows(2)
        .map(|w| {
            let mid = SpdMatrix::new(w[0].as_sym().midpoint(w[1].as_sym()))?;
            let delta = *w[1].as_sym() - *w[0].as_sym();
            Ok(inner0_point(g_ref, &mid, &delta, &delta)?.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mirror_sum(&norms))
}

/// Closed-form weighted length of the conformal segment `t ↦ f(t) g0`,
/// `(2/√n) √det(g_ref⁻¹ g0) |f1^{n/2} - f0^{n/2}|`.
pub fn conformal_theta_oracle(g_ref: &SpdMatrix, g0: &SpdMatrix, f0: f64, f1: f64) -> Result<f64> {
    if !(f0 > 0.0 && f1 > 0.0) {
        return Err(Error::Domain(format!(
            "conformal factors must be positive, got {f0} and {f1}"
        )));
    }
    let n = g0.dim() as f64;
    let scale = 2.0 / n.sqrt() * (g0.sqrt_det() / g_ref.sqrt_det());
    Ok(scale * (f1.powf(n / 2.0) - f0.powf(n / 2.0)).abs())
}

/// Radial coordinate `(2/√n) √det(g_ref⁻¹ g)`; the weighted metric is a cone over this radius.
pub fn radial_coordinate(g_ref: &SpdMatrix, g: &SpdMatrix) -> f64 {
    2.0 / (g.dim() as f64).sqrt() * (g.sqrt_det() / g_ref.sqrt_det())
}

/// Certified lower bound `|r(b) - r(a)| ≤ θ(a, b)`.
///
/// Any path's speed dominates the speed of its radial coordinate, by the
/// trace Cauchy–Schwarz inequality. Zero when `a` and `b` have equal determinant.
pub fn theta_lower_bound(g_ref: &SpdMatrix, a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    (radial_coordinate(g_ref, b) - radial_coordinate(g_ref, a)).abs()
}

/// The reference-weighted metric on packed upper-triangle coordinates.
pub struct PointSetting {
    n: usize,
    ref_sqrt_det: f64,
    start: Frame,
    end: Frame,
    // largest eigenvalue over both endpoints; margins are relative to it
    scale: f64,
}

impl PointSetting {
    pub fn new(g_ref: &SpdMatrix, a: &SpdMatrix, b: &SpdMatrix) -> Result<Self> {
        let n = g_ref.dim();
        for m in [a, b] {
            if m.dim() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: m.dim(),
                });
            }
        }
        let top = |m: &SpdMatrix| *m.as_sym().eigenvalues().last().expect("n >= 1");
        Ok(PointSetting {
            n,
            ref_sqrt_det: g_ref.sqrt_det(),
            start: a.as_sym().packed().to_vec(),
            end: b.as_sym().packed().to_vec(),
            scale: top(a).max(top(b)),
        })
    }
}

impl GeodesicSetting for PointSetting {
    fn block_count(&self) -> usize {
        1
    }

    fn block_len(&self) -> usize {
        packed_len(self.n)
    }

    fn start(&self) -> &[f64] {
        &self.start
    }

    fn end(&self) -> &[f64] {
        &self.end
    }

    fn block_inner(&self, _block: usize, at: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let g = SpdMatrix::new(SymMatrix::from_packed(self.n, at)?)?;
        let u = SymMatrix::from_packed(self.n, u)?;
        let v = SymMatrix::from_packed(self.n, v)?;
        let r = g.sqrt_det() / self.ref_sqrt_det;
        Ok(trace_pair(&g, &u, &v)? * r * r)
    }

    fn block_margin(&self, _block: usize, at: &[f64]) -> f64 {
        match SymMatrix::from_packed(self.n, at) {
            Ok(s) if s.is_finite() => s.eigenvalues()[0] / self.scale,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Result of a pointwise distance computation.
#[derive(Debug, Clone)]
pub struct PointGeodesic {
    /// Upper bound on the weighted distance: the discrete length of `path`.
    pub length: f64,
    pub energy: f64,
    pub path: PointPath,
    pub diagnostics: Diagnostics,
}

/// Minimizes the weighted path energy from `a` to `b`, starting from the
/// better of the linear and fiber-exponential paths.
///
/// An optimizer that runs out of iterations is reported as an error carrying
/// the best length found.
pub fn theta_geodesic(
    g_ref: &SpdMatrix,
    a: &SpdMatrix,
    b: &SpdMatrix,
    opts: &OptimizerOptions,
) -> Result<PointGeodesic> {
    opts.validate()?;
    let setting = PointSetting::new(g_ref, a, b)?;
    let k = opts.segments;
    let mut candidates = vec![Candidate {
        label: "linear".into(),
        frames: PointPath::linear(a, b, k)?.to_frames(),
    }];
    if let Ok(fiber) = PointPath::fiber(a, b, k) {
        candidates.push(Candidate {
            label: "fiber".into(),
            frames: fiber.to_frames(),
        });
    }
    let out = optimizer::minimize(&setting, opts, &candidates)?;
    if !out.diagnostics.converged {
        return Err(Error::Optimizer {
            kind: OptimizerFailure::NotConverged,
            iterations: out.diagnostics.iterations,
            best_length: out.length,
            best_frames: out.frames,
        });
    }
    Ok(PointGeodesic {
        length: out.length,
        energy: out.energy,
        path: PointPath::from_frames(a.dim(), &out.frames)?,
        diagnostics: out.diagnostics,
    })
}

/// Upper bound on the weighted distance `θ(a, b)` and the path attaining it.
pub fn theta_distance(
    g_ref: &SpdMatrix,
    a: &SpdMatrix,
    b: &SpdMatrix,
    opts: &OptimizerOptions,
) -> Result<(f64, PointPath)> {
    let g = theta_geodesic(g_ref, a, b, opts)?;
    Ok((g.length, g.path))
}
