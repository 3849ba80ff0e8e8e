//! Discrete path-energy minimization.
//!
//! A path is a sequence of `K + 1` frames on the uniform grid `t_k = k / K`.
//! Each frame is a flat coordinate vector split into equally sized blocks (one
//! block per chart point for metric fields, a single block for the pointwise
//! cone). A [`GeodesicSetting`] supplies the Riemannian metric block by block;
//! the discrete energy is
//!
//! ```text
//! E = K · Σ_k Σ_b ‖x_{k+1} - x_k‖²_{b, (x_k + x_{k+1}) / 2}
//! ```
//!
//! and the discrete length replaces the squared segment norm by its square
//! root summed without the factor `K`. Interior frames are updated by
//! gradient descent with a backtracking (Armijo) line search. Gradients are
//! central finite differences; the search direction is the gradient
//! preconditioned by the frame metric and the inverse second-difference
//! operator along the path, which is exact for flat metrics and keeps the
//! iteration count roughly independent of `K`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, OptimizerFailure, Result};
use crate::reduce::{mirror_sum, pairwise_sum};

/// Flattened coordinates of one frame, `block_count * block_len` values.
pub type Frame = Vec<f64>;

const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: i32 = 30;
const FD_RELATIVE_STEP: f64 = 1e-6;
/// Final iterates with a block margin below this multiple of `eig_floor` count as boundary contact.
const BOUNDARY_CONTACT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Segment count `K`.
    pub segments: usize,
    pub max_iters: usize,
    /// Stop once an accepted step lowers the energy by less than this fraction.
    pub grad_tol: f64,
    pub step0: f64,
    /// Admissibility margin required of every block of every accepted frame.
    pub eig_floor: f64,
    /// Carried for replay; the optimizer itself draws no random numbers.
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            segments: 32,
            max_iters: 2000,
            grad_tol: 1e-10,
            step0: 1.0,
            eig_floor: 1e-6,
            seed: 0,
        }
    }
}

impl OptimizerOptions {
    pub fn with_segments(mut self, segments: usize) -> Self {
        self.segments = segments;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments < 2 {
            return Err(Error::InvalidArgument(format!(
                "segment count K = {} must be at least 2",
                self.segments
            )));
        }
        let positive = [
            ("grad_tol", self.grad_tol),
            ("step0", self.step0),
            ("eig_floor", self.eig_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A Riemannian metric on a product of coordinate blocks, plus the endpoints to join.
pub trait GeodesicSetting: Sync {
    fn block_count(&self) -> usize;
    fn block_len(&self) -> usize;
    fn start(&self) -> &[f64];
    fn end(&self) -> &[f64];

    /// The metric of block `block` at coordinates `at`, applied to `u` and `v`.
    fn block_inner(&self, block: usize, at: &[f64], u: &[f64], v: &[f64]) -> Result<f64>;

    /// Admissibility margin of one block; a frame is admissible when every
    /// block margin is at least `eig_floor`. Non-finite or negative values
    /// mean the coordinates are outside the domain.
    fn block_margin(&self, block: usize, at: &[f64]) -> f64;

    /// Projects a tangent vector at `at` onto the constraint tangent space
    /// (metric-orthogonally). Unconstrained settings leave it unchanged.
    fn project(&self, _block: usize, _at: &[f64], _v: &mut [f64]) {}

    /// Maps coordinates back onto the constraint set after a step.
    fn retract(&self, _block: usize, _x: &mut [f64]) {}

    fn frame_len(&self) -> usize {
        self.block_count() * self.block_len()
    }
}

/// An initial path offered to [`minimize`].
#[derive(Debug, Clone)]
pub struct Candidate {
    pub label: String,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub length: f64,
    pub step: f64,
    pub directional_derivative: f64,
    pub preconditioned: bool,
    pub fd_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Label of the candidate the descent started from.
    pub initializer: String,
    /// `(label, length, energy)` of every admissible candidate.
    pub candidates: Vec<(String, f64, f64)>,
    /// Energies of accepted iterates, starting with the initializer.
    pub trace: Vec<IterationRecord>,
    pub fd_fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct Minimized {
    pub frames: Vec<Frame>,
    pub length: f64,
    pub energy: f64,
    pub diagnostics: Diagnostics,
}

fn block(frame: &[f64], b: usize, len: usize) -> &[f64] {
    &frame[b * len..(b + 1) * len]
}

/// Squared norm of `b - a` at the midpoint, for one block.
fn block_segment<S: GeodesicSetting + ?Sized>(
    setting: &S,
    bi: usize,
    a: &[f64],
    b: &[f64],
) -> Result<f64> {
    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    let delta: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    setting.block_inner(bi, &mid, &delta, &delta)
}

fn segment_sq_norm<S: GeodesicSetting + ?Sized>(setting: &S, a: &[f64], b: &[f64]) -> Result<f64> {
    let len = setting.block_len();
    let terms = (0..setting.block_count())
        .map(|bi| block_segment(setting, bi, block(a, bi, len), block(b, bi, len)))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms))
}

fn segment_sq_norms<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
) -> Result<Vec<f64>> {
    if frames.len() < 2 {
        return Err(Error::InvalidArgument(
            "a path needs at least two frames".into(),
        ));
    }
    frames
        .par_windows(2)
        .map(|w| segment_sq_norm(setting, &w[0], &w[1]))
        .collect()
}

/// `K · Σ_k ‖Δ_k‖²` with midpoint metric evaluation.
pub fn discrete_energy<S: GeodesicSetting + ?Sized>(setting: &S, frames: &[Frame]) -> Result<f64> {
    let k = (frames.len() - 1) as f64;
    Ok(k * mirror_sum(&segment_sq_norms(setting, frames)?))
}

/// `Σ_k ‖Δ_k‖` with midpoint metric evaluation; exactly invariant under reversal.
pub fn discrete_length<S: GeodesicSetting + ?Sized>(setting: &S, frames: &[Frame]) -> Result<f64> {
    let norms: Vec<f64> = segment_sq_norms(setting, frames)?
        .into_iter()
        .map(f64::sqrt)
        .collect();
    Ok(mirror_sum(&norms))
}

fn length_and_energy<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
) -> Result<(f64, f64)> {
    let sq = segment_sq_norms(setting, frames)?;
    let k = (frames.len() - 1) as f64;
    let norms: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
    Ok((mirror_sum(&norms), k * mirror_sum(&sq)))
}

fn frame_margin<S: GeodesicSetting + ?Sized>(setting: &S, frame: &[f64]) -> f64 {
    let len = setting.block_len();
    (0..setting.block_count())
        .map(|bi| setting.block_margin(bi, block(frame, bi, len)))
        .fold(f64::INFINITY, |m, v| {
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                m.min(v)
            }
        })
}

fn admissible<S: GeodesicSetting + ?Sized>(setting: &S, frames: &[Frame], floor: f64) -> bool {
    frames.par_iter().all(|f| frame_margin(setting, f) >= floor)
}

/// Straight-line interpolation `(1 - t) start + t end` on `segments + 1` frames.
pub fn linear_frames(start: &[f64], end: &[f64], segments: usize) -> Vec<Frame> {
    (0..=segments)
        .map(|k| {
            let t = k as f64 / segments as f64;
            if k == segments {
                return end.to_vec();
            }
            start
                .iter()
                .zip(end)
                .map(|(a, b)| a + t * (b - a))
                .collect()
        })
        .collect()
}

/// Finite-difference gradient of the discrete energy with respect to the interior frames.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// One entry per interior frame `1..K`.
    pub frames: Vec<Frame>,
    /// Number of entries that fell back to a one-sided difference.
    pub fallbacks: usize,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Difference {
    Central,
    Forward,
}

// energy terms touching interior frame k, block bi, with the block replaced by `x`
fn local_energy<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
    k: usize,
    bi: usize,
    x: &[f64],
) -> Result<f64> {
    let len = setting.block_len();
    let prev = block(&frames[k - 1], bi, len);
    let next = block(&frames[k + 1], bi, len);
    Ok(block_segment(setting, bi, prev, x)? + block_segment(setting, bi, x, next)?)
}

fn frame_gradient<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
    k: usize,
    mode: Difference,
) -> Result<(Frame, usize)> {
    let len = setting.block_len();
    let kf = (frames.len() - 1) as f64;
    let mut grad = vec![0.0; setting.frame_len()];
    let mut fallbacks = 0;
    for bi in 0..setting.block_count() {
        let base = block(&frames[k], bi, len);
        let scale = base.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let h = FD_RELATIVE_STEP * if scale > 0.0 { scale } else { 1.0 };
        let mut probe = base.to_vec();
        let mut center: Option<Result<f64>> = None;
        for c in 0..len {
            probe[c] = base[c] + h;
            let plus = local_energy(setting, frames, k, bi, &probe);
            let d = if mode == Difference::Central {
                probe[c] = base[c] - h;
                let minus = local_energy(setting, frames, k, bi, &probe);
                match (plus, minus) {
                    (Ok(p), Ok(m)) => (p - m) / (2.0 * h),
                    (p, m) => {
                        fallbacks += 1;
                        let f0 = center
                            .get_or_insert_with(|| local_energy(setting, frames, k, bi, base))
                            .clone()?;
                        match (p, m) {
                            (Ok(p), _) => (p - f0) / h,
                            (_, Ok(m)) => (f0 - m) / h,
                            (Err(e), _) => return Err(e),
                        }
                    }
                }
            } else {
                let f0 = center
                    .get_or_insert_with(|| local_energy(setting, frames, k, bi, base))
                    .clone()?;
                (plus? - f0) / h
            };
            probe[c] = base[c];
            grad[bi * len + c] = kf * d;
        }
    }
    Ok((grad, fallbacks))
}

fn gradient_with<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
    mode: Difference,
) -> Result<Gradient> {
    let k = frames.len() - 1;
    let parts = (1..k)
        .into_par_iter()
        .map(|i| frame_gradient(setting, frames, i, mode))
        .collect::<Result<Vec<_>>>()?;
    let fallbacks = parts.iter().map(|p| p.1).sum();
    Ok(Gradient {
        frames: parts.into_iter().map(|p| p.0).collect(),
        fallbacks,
    })
}

/// Central finite-difference gradient of [`discrete_energy`] in every interior frame entry.
///
/// Probes that leave the domain fall back to a one-sided difference and are
/// counted in [`Gradient::fallbacks`].
pub fn gradient<S: GeodesicSetting + ?Sized>(setting: &S, frames: &[Frame]) -> Result<Gradient> {
    gradient_with(setting, frames, Difference::Central)
}

/// Relative discrepancy `‖g_central - g_forward‖ / ‖g_central‖` between the
/// central gradient and a forward-difference recomputation.
pub fn gradient_cross_check<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
) -> Result<f64> {
    let c = gradient_with(setting, frames, Difference::Central)?;
    let f = gradient_with(setting, frames, Difference::Forward)?;
    let mut diff = 0.0;
    for (a, b) in c.frames.iter().flatten().zip(f.frames.iter().flatten()) {
        diff += (a - b) * (a - b);
    }
    let norm = c.norm();
    Ok(if norm > 0.0 {
        diff.sqrt() / norm
    } else {
        diff.sqrt()
    })
}

// G^{-1/2} of the block metric at `at`, or None if the metric is not positive definite
fn inverse_sqrt_metric<S: GeodesicSetting + ?Sized>(
    setting: &S,
    bi: usize,
    at: &[f64],
) -> Option<DMatrix<f64>> {
    let len = setting.block_len();
    let mut g = DMatrix::zeros(len, len);
    let mut ei = vec![0.0; len];
    let mut ej = vec![0.0; len];
    for i in 0..len {
        ei[i] = 1.0;
        for j in i..len {
            ej[j] = 1.0;
            let v = setting.block_inner(bi, at, &ei, &ej).ok()?;
            g[(i, j)] = v;
            g[(j, i)] = v;
            ej[j] = 0.0;
        }
        ei[i] = 0.0;
    }
    let eig = SymmetricEigen::new(g);
    let max = eig.eigenvalues.max();
    if !(max > 0.0) || eig.eigenvalues.iter().any(|&l| !(l > max * 1e-14)) {
        return None;
    }
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Some(v * d * v.transpose())
}

// in place solve of tridiag(-1, 2, -1) x = rhs, applied coordinate-wise across frames
fn solve_second_difference(rows: &mut [Frame]) {
    let m = rows.len();
    if m == 0 {
        return;
    }
    let mut cp = vec![0.0; m];
    cp[0] = -0.5;
    for v in rows[0].iter_mut() {
        *v *= 0.5;
    }
    for i in 1..m {
        let denom = 2.0 + cp[i - 1];
        cp[i] = -1.0 / denom;
        let (head, tail) = rows.split_at_mut(i);
        for (v, p) in tail[0].iter_mut().zip(&head[i - 1]) {
            *v = (*v + p) / denom;
        }
    }
    for i in (0..m - 1).rev() {
        let (head, tail) = rows.split_at_mut(i + 1);
        for (v, n) in head[i].iter_mut().zip(&tail[0]) {
            *v -= cp[i] * n;
        }
    }
}

fn apply_block_matrix(mats: &[Vec<DMatrix<f64>>], v: &mut [Frame], len: usize) {
    for (frame, blocks) in v.iter_mut().zip(mats) {
        for (bi, s) in blocks.iter().enumerate() {
            let x = nalgebra::DVector::from_column_slice(&frame[bi * len..(bi + 1) * len]);
            let y = s * x;
            frame[bi * len..(bi + 1) * len].copy_from_slice(y.as_slice());
        }
    }
}

fn project_frames<S: GeodesicSetting + ?Sized>(setting: &S, frames: &[Frame], dir: &mut [Frame]) {
    let len = setting.block_len();
    for (k, d) in dir.iter_mut().enumerate() {
        let at = &frames[k + 1];
        for bi in 0..setting.block_count() {
            setting.project(bi, block(at, bi, len), &mut d[bi * len..(bi + 1) * len]);
        }
    }
}

struct Direction {
    dir: Vec<Frame>,
    slope: f64,
    preconditioned: bool,
}

fn dot(a: &[Frame], b: &[Frame]) -> f64 {
    let parts: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| pairwise_sum(&x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>()))
        .collect();
    pairwise_sum(&parts)
}

/// Descent direction `-S (L⁻¹ ⊗ I) S g / 2K`, `S` the per-block inverse square
/// root of the metric; falls back to the frame-wise Riemannian gradient.
fn descent_direction<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
    grad: &Gradient,
) -> Option<Direction> {
    let len = setting.block_len();
    let kf = (frames.len() - 1) as f64;
    let mats: Option<Vec<Vec<DMatrix<f64>>>> = frames[1..frames.len() - 1]
        .par_iter()
        .map(|f| {
            (0..setting.block_count())
                .map(|bi| inverse_sqrt_metric(setting, bi, block(f, bi, len)))
                .collect::<Option<Vec<_>>>()
        })
        .collect();
    let mats = mats?;

    let mut dir = grad.frames.clone();
    apply_block_matrix(&mats, &mut dir, len);
    solve_second_difference(&mut dir);
    apply_block_matrix(&mats, &mut dir, len);
    for v in dir.iter_mut().flatten() {
        *v *= -1.0 / (2.0 * kf);
    }
    project_frames(setting, frames, &mut dir);
    let slope = dot(&grad.frames, &dir);
    if slope < 0.0 {
        return Some(Direction {
            dir,
            slope,
            preconditioned: true,
        });
    }

    let mut dir = grad.frames.clone();
    apply_block_matrix(&mats, &mut dir, len);
    apply_block_matrix(&mats, &mut dir, len);
    for v in dir.iter_mut().flatten() {
        *v *= -1.0 / (2.0 * kf);
    }
    project_frames(setting, frames, &mut dir);
    let slope = dot(&grad.frames, &dir);
    (slope < 0.0).then_some(Direction {
        dir,
        slope,
        preconditioned: false,
    })
}

/// Dimensionless stationarity measure `√(gᵀ P⁻¹ g / E)`, where `P⁻¹ g` is the
/// preconditioned (and projected) descent direction. Zero at a critical point
/// of the discrete energy; scale invariant in the metric.
pub fn stationarity<S: GeodesicSetting + ?Sized>(setting: &S, frames: &[Frame]) -> Result<f64> {
    let energy = discrete_energy(setting, frames)?;
    let grad = gradient(setting, frames)?;
    if energy == 0.0 {
        return Ok(0.0);
    }
    Ok(match descent_direction(setting, frames, &grad) {
        Some(d) => (-d.slope / energy).sqrt(),
        None => 0.0,
    })
}

/// Norm of the Riemannian gradient after projection onto the constraint,
/// `√(Σ_k Σ_b gᵀ P G⁻¹ g)` over interior frames `k` and blocks `b`.
///
/// The discrete counterpart of the covariant acceleration: it vanishes on a
/// discrete geodesic and is of order `K⁻²` on samples of a smooth one.
pub fn projected_gradient_norm<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
) -> Result<f64> {
    let grad = gradient(setting, frames)?;
    let len = setting.block_len();
    let mut terms = Vec::with_capacity(grad.frames.len() * setting.block_count());
    for (k, g) in grad.frames.iter().enumerate() {
        let at = &frames[k + 1];
        for bi in 0..setting.block_count() {
            let s = inverse_sqrt_metric(setting, bi, block(at, bi, len)).ok_or_else(|| {
                Error::Domain("metric is not positive definite on an interior frame".into())
            })?;
            let gb = nalgebra::DVector::from_column_slice(block(g, bi, len));
            let mut v = (&s * (&s * &gb)).as_slice().to_vec();
            setting.project(bi, block(at, bi, len), &mut v);
            terms.push(gb.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    Ok(pairwise_sum(&terms).max(0.0).sqrt())
}

fn step_frames<S: GeodesicSetting + ?Sized>(
    setting: &S,
    frames: &[Frame],
    dir: &[Frame],
    alpha: f64,
) -> Vec<Frame> {
    let len = setting.block_len();
    let mut out = frames.to_vec();
    for (k, d) in dir.iter().enumerate() {
        let f = &mut out[k + 1];
        for (x, v) in f.iter_mut().zip(d) {
            *x += alpha * v;
        }
        for bi in 0..setting.block_count() {
            setting.retract(bi, &mut f[bi * len..(bi + 1) * len]);
        }
    }
    out
}

fn check_candidate<S: GeodesicSetting + ?Sized>(
    setting: &S,
    c: &Candidate,
    segments: usize,
) -> Result<()> {
    if c.frames.len() != segments + 1 {
        return Err(Error::InvalidArgument(format!(
            "candidate `{}` has {} frames, expected {}",
            c.label,
            c.frames.len(),
            segments + 1
        )));
    }
    if let Some(f) = c.frames.iter().find(|f| f.len() != setting.frame_len()) {
        return Err(Error::Dimension {
            expected: setting.frame_len(),
            found: f.len(),
        });
    }
    Ok(())
}

/// Minimizes the discrete energy starting from the lowest-energy admissible candidate.
///
/// Returns the shortest admissible path seen (candidates included), so the
/// reported length never exceeds that of any initializer. Running out of
/// iterations is not an error: the result carries `converged = false`.
pub fn minimize<S: GeodesicSetting + ?Sized>(
    setting: &S,
    opts: &OptimizerOptions,
    candidates: &[Candidate],
) -> Result<Minimized> {
    opts.validate()?;
    let k = opts.segments;
    if setting.start().len() != setting.frame_len() || setting.end().len() != setting.frame_len() {
        return Err(Error::Dimension {
            expected: setting.frame_len(),
            found: setting.start().len(),
        });
    }

    if setting.start() == setting.end() {
        let frames = vec![setting.start().to_vec(); k + 1];
        return Ok(Minimized {
            frames,
            length: 0.0,
            energy: 0.0,
            diagnostics: Diagnostics {
                converged: true,
                initializer: "constant".into(),
                ..Diagnostics::default()
            },
        });
    }

    let mut diagnostics = Diagnostics::default();
    let mut start: Option<(usize, f64)> = None;
    let mut best: Option<(Vec<Frame>, f64, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        check_candidate(setting, c, k)?;
        if !admissible(setting, &c.frames, opts.eig_floor) {
            continue;
        }
        let Ok((len, energy)) = length_and_energy(setting, &c.frames) else {
            continue;
        };
        diagnostics.candidates.push((c.label.clone(), len, energy));
        if start.is_none_or(|(_, e)| energy < e) {
            start = Some((i, energy));
        }
        if best.as_ref().is_none_or(|b| len < b.1) {
            best = Some((c.frames.clone(), len, energy));
        }
    }
    let Some((start_idx, mut energy)) = start else {
        return Err(Error::Precondition {
            point: "path".into(),
            what: "no admissible initial path".into(),
        });
    };
    let mut best = best.expect("an admissible candidate exists");
    diagnostics.initializer = candidates[start_idx].label.clone();
    let mut frames = candidates[start_idx].frames.clone();
    let mut length = discrete_length(setting, &frames)?;
    diagnostics.trace.push(IterationRecord {
        iteration: 0,
        energy,
        length,
        step: 0.0,
        directional_derivative: 0.0,
        preconditioned: false,
        fd_fallbacks: 0,
    });

    let min_step = opts.step0 * 2f64.powi(-MAX_HALVINGS);
    let mut alpha0 = opts.step0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let grad = gradient(setting, &frames)?;
        diagnostics.fd_fallbacks += grad.fallbacks;
        let Some(direction) = descent_direction(setting, &frames, &grad) else {
            converged = true;
            break;
        };

        let mut alpha = alpha0;
        let mut any_admissible = false;
        let mut accepted = None;
        while alpha >= min_step {
            let trial = step_frames(setting, &frames, &direction.dir, alpha);
            if admissible(setting, &trial, opts.eig_floor) {
                if let Ok((l, e)) = length_and_energy(setting, &trial) {
                    any_admissible = true;
                    if e <= energy + ARMIJO_C1 * alpha * direction.slope {
                        accepted = Some((trial, l, e));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        let Some((trial, l, e)) = accepted else {
            if any_admissible {
                // no sufficient decrease at any admissible step: stationary to FD accuracy
                converged = true;
                break;
            }
            return Err(Error::Optimizer {
                kind: OptimizerFailure::BoundaryStall,
                iterations,
                best_length: best.1,
                best_frames: best.0,
            });
        };

        iterations += 1;
        let decrease = (energy - e) / energy;
        frames = trial;
        energy = e;
        length = l;
        alpha0 = (2.0 * alpha).min(opts.step0);
        diagnostics.trace.push(IterationRecord {
            iteration: iterations,
            energy,
            length,
            step: alpha,
            directional_derivative: direction.slope,
            preconditioned: direction.preconditioned,
            fd_fallbacks: grad.fallbacks,
        });
        if length < best.1 {
            best = (frames.clone(), length, energy);
        }
        if decrease < opts.grad_tol {
            converged = true;
            break;
        }
    }

    diagnostics.iterations = iterations;
    diagnostics.converged = converged;

    // A limit pressed against the admissibility floor is a boundary approach,
    // not a minimizer inside the domain.
    let pressed = frames[1..k]
        .iter()
        .map(|f| frame_margin(setting, f))
        .fold(f64::INFINITY, f64::min);
    if pressed < BOUNDARY_CONTACT * opts.eig_floor {
        return Err(Error::Optimizer {
            kind: OptimizerFailure::BoundaryStall,
            iterations,
            best_length: best.1,
            best_frames: best.0,
        });
    }

    Ok(Minimized {
        frames: best.0,
        length: best.1,
        energy: best.2,
        diagnostics,
    })
}
