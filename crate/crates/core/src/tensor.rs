//! Dense symmetric and symmetric positive-definite matrices of order `n <= 8`.
//!
//! Every pointwise formula in the crate reduces to a handful of operations on
//! these: the trace pairing `tr(g⁻¹ h g⁻¹ k)`, `√det g`, the traceless part of a
//! tangent tensor, and the exponential/logarithm of the fiber geodesic
//! `g₀ exp(g₀⁻¹ a)`.
//!
//! Storage is the packed upper triangle in row-major order, so symmetry is
//! structural. An [`SpdMatrix`] carries its Cholesky factor, which is computed
//! once at construction and reused by the trace pairing and determinant.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest supported fiber dimension.
pub const MAX_DIM: usize = 8;
const MAX_PACKED: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Relative SPD floor: the smallest eigenvalue must exceed this multiple of the largest.
pub const SPD_FLOOR: f64 = 1e-10;

type Dense = [[f64; MAX_DIM]; MAX_DIM];

/// Number of packed entries of an `n × n` symmetric matrix.
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i + 1) / 2 + (j - i)
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

#[derive(Clone, Copy, PartialEq)]
pub struct SymMatrix {
    n: usize,
    packed: [f64; MAX_PACKED],
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymMatrix")
            .field("n", &self.n)
            .field("upper", &self.packed())
            .finish()
    }
}

impl SymMatrix {
    /// # Panics
    /// If `n` is outside `1..=MAX_DIM`.
    pub fn zeros(n: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&n),
            "fiber dimension {n} out of range"
        );
        SymMatrix {
            n,
            packed: [0.0; MAX_PACKED],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, value: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, value);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from its packed upper triangle (row-major).
    pub fn from_packed(n: usize, upper: &[f64]) -> Result<Self> {
        check_dim(n)?;
        if upper.len() != packed_len(n) {
            return Err(Error::Dimension {
                expected: packed_len(n),
                found: upper.len(),
            });
        }
        let mut m = Self::zeros(n);
        m.packed[..upper.len()].copy_from_slice(upper);
        Ok(m)
    }

    /// Builds a matrix from the upper triangle of `f(i, j)`, `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed[..packed_len(self.n)]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.packed[packed_index(self.n, i, j)] = value;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                s += v * v;
            }
        }
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.packed().iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.packed().iter().all(|&v| v == 0.0)
    }

    /// Entrywise average `(self + other) / 2`.
    pub fn midpoint(&self, other: &SymMatrix) -> SymMatrix {
        let mut m = Self::zeros(self.n);
        for (out, (a, b)) in m.packed[..packed_len(self.n)]
            .iter_mut()
            .zip(self.packed().iter().zip(other.packed()))
        {
            *out = 0.5 * (a + b);
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Symmetrizes an arbitrary square matrix by averaging with its transpose.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        check_dim(m.nrows())?;
        Ok(Self::from_fn(m.nrows(), |i, j| {
            0.5 * (m[(i, j)] + m[(j, i)])
        }))
    }

    fn zip_with(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> SymMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut m = Self::zeros(self.n);
        let len = packed_len(self.n);
        for k in 0..len {
            m.packed[k] = f(self.packed[k], other.packed[k]);
        }
        m
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut m = *self;
        for v in m.packed[..packed_len(self.n)].iter_mut() {
            *v = f(*v);
        }
        m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.to_dense());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// `V f(Λ) Vᵀ` for the eigendecomposition `self = V Λ Vᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let eig = SymmetricEigen::new(self.to_dense());
        let n = self.n;
        let vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l)).collect();
        let v = &eig.eigenvectors;
        SymMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| vals[k] * v[(i, k)] * v[(j, k)]).sum()
        })
    }
}

impl Add for SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: SymMatrix) -> SymMatrix {
        self.zip_with(&rhs, |a, b| a + b)
    }
}

impl Sub for SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: SymMatrix) -> SymMatrix {
        self.zip_with(&rhs, |a, b| a - b)
    }
}

impl Neg for SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.map(|a| -a)
    }
}

impl Mul<f64> for SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.map(|a| a * rhs)
    }
}

impl Mul<SymMatrix> for f64 {
    type Output = SymMatrix;
    fn mul(self, rhs: SymMatrix) -> SymMatrix {
        rhs * self
    }
}

/// A symmetric matrix whose smallest eigenvalue exceeds [`SPD_FLOOR`] times its largest.
#[derive(Clone, Copy)]
pub struct SpdMatrix {
    sym: SymMatrix,
    // lower Cholesky factor, row-major
    chol: Dense,
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpdMatrix").field(&self.sym).finish()
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.sym == other.sym
    }
}

fn cholesky(s: &SymMatrix) -> Option<Dense> {
    let n = s.n;
    let mut l = [[0.0; MAX_DIM]; MAX_DIM];
    for j in 0..n {
        let mut d = s.get(j, j);
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in (j + 1)..n {
            let mut v = s.get(i, j);
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            l[i][j] = v / djj;
        }
    }
    Some(l)
}

impl SpdMatrix {
    pub fn new(sym: SymMatrix) -> Result<Self> {
        if !sym.is_finite() {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        let Some(chol) = cholesky(&sym) else {
            return Err(Self::floor_error(&sym));
        };
        let spd = SpdMatrix { sym, chol };
        // λ_max ≤ tr g and λ_min ≥ 1 / tr g⁻¹; only fall back to a full
        // eigendecomposition when this cheap bound is inconclusive.
        let tr = sym.trace();
        let tr_inv = spd.inverse_trace();
        if 1.0 / tr_inv > SPD_FLOOR * tr {
            return Ok(spd);
        }
        let eig = sym.eigenvalues();
        let (min, max) = (eig[0], eig[eig.len() - 1]);
        if min > SPD_FLOOR * max {
            Ok(spd)
        } else {
            Err(Error::NotSpd {
                min_eig: min,
                floor: SPD_FLOOR * max,
            })
        }
    }

    fn floor_error(sym: &SymMatrix) -> Error {
        let eig = sym.eigenvalues();
        let max = eig[eig.len() - 1].abs();
        Error::NotSpd {
            min_eig: eig[0],
            floor: SPD_FLOOR * max,
        }
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix::new(SymMatrix::identity(n)).expect("identity is SPD")
    }

    /// `value · I`; `value` must be positive.
    pub fn scaled_identity(n: usize, value: f64) -> Result<Self> {
        SpdMatrix::new(SymMatrix::scaled_identity(n, value))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        SpdMatrix::new(SymMatrix::from_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.sym.n
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.sym
    }

    pub fn det(&self) -> f64 {
        let s = self.sqrt_det();
        s * s
    }

    pub fn sqrt_det(&self) -> f64 {
        (0..self.sym.n).map(|i| self.chol[i][i]).product()
    }

    /// Smallest-to-largest eigenvalue ratio.
    pub fn condition_margin(&self) -> f64 {
        let eig = self.sym.eigenvalues();
        eig[0] / eig[eig.len() - 1]
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.sym.eigenvalues()[0]
    }

    // y = L⁻¹ x in place, for one column
    fn forward(&self, x: &mut [f64; MAX_DIM]) {
        let n = self.sym.n;
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.chol[i][k] * x[k];
            }
            x[i] = v / self.chol[i][i];
        }
    }

    fn inverse_trace(&self) -> f64 {
        // tr g⁻¹ = ‖L⁻¹‖_F²
        let n = self.sym.n;
        let mut s = 0.0;
        for j in 0..n {
            let mut e = [0.0; MAX_DIM];
            e[j] = 1.0;
            self.forward(&mut e);
            s += e[..n].iter().map(|v| v * v).sum::<f64>();
        }
        s
    }

    /// `L⁻¹ h L⁻ᵀ` for the Cholesky factor `g = L Lᵀ`.
    fn whiten(&self, h: &SymMatrix) -> Dense {
        let n = self.sym.n;
        // Y = L⁻¹ h, column by column; store Yᵀ = h L⁻ᵀ row by row
        let mut yt = [[0.0; MAX_DIM]; MAX_DIM];
        for j in 0..n {
            let mut col = [0.0; MAX_DIM];
            for (i, c) in col.iter_mut().enumerate().take(n) {
                *c = h.get(i, j);
            }
            self.forward(&mut col);
            yt[j] = col;
        }
        // W = L⁻¹ (h L⁻ᵀ) = L⁻¹ Yᵀ
        let mut w = [[0.0; MAX_DIM]; MAX_DIM];
        for j in 0..n {
            let mut col = [0.0; MAX_DIM];
            for (i, c) in col.iter_mut().enumerate().take(n) {
                *c = yt[i][j];
            }
            self.forward(&mut col);
            for i in 0..n {
                w[i][j] = col[i];
            }
        }
        w
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.sym.n;
        // g⁻¹ = L⁻ᵀ L⁻¹
        let mut linv = [[0.0; MAX_DIM]; MAX_DIM];
        for j in 0..n {
            let mut e = [0.0; MAX_DIM];
            e[j] = 1.0;
            self.forward(&mut e);
            for i in 0..n {
                linv[i][j] = e[i];
            }
        }
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| linv[k][i] * linv[k][j]).sum())
    }

    /// `L X Lᵀ` for a symmetric `x`, where `self = L Lᵀ`.
    fn congruence(&self, x: &SymMatrix) -> SymMatrix {
        let n = self.sym.n;
        let l = &self.chol;
        let mut lx = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                lx[i][j] = (0..=i).map(|k| l[i][k] * x.get(k, j)).sum();
            }
        }
        SymMatrix::from_fn(n, |i, j| (0..=j).map(|k| lx[i][k] * l[j][k]).sum())
    }

    fn whiten_sym(&self, h: &SymMatrix) -> SymMatrix {
        let w = self.whiten(h);
        SymMatrix::from_fn(self.sym.n, |i, j| 0.5 * (w[i][j] + w[j][i]))
    }
}

fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// `tr(g⁻¹ h g⁻¹ k)`, the pointwise trace pairing `tr_g(hk)`.
///
/// Evaluated as the Frobenius product of the whitened tensors
/// `L⁻¹ h L⁻ᵀ` and `L⁻¹ k L⁻ᵀ`, which makes it exactly symmetric in `(h, k)`
/// and exactly nonnegative on the diagonal.
pub fn trace_pair(g: &SpdMatrix, h: &SymMatrix, k: &SymMatrix) -> Result<f64> {
    let n = g.dim();
    same_dim(n, h.dim())?;
    same_dim(n, k.dim())?;
    let wh = g.whiten(h);
    if std::ptr::eq(h, k) || h == k {
        let mut s = 0.0;
        for row in wh.iter().take(n) {
            for v in row.iter().take(n) {
                s += v * v;
            }
        }
        return Ok(s);
    }
    let wk = g.whiten(k);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += wh[i][j] * wk[i][j];
        }
    }
    Ok(s)
}

/// `tr_g(h) = tr(g⁻¹ h)`.
pub fn trace_g(g: &SpdMatrix, h: &SymMatrix) -> Result<f64> {
    same_dim(g.dim(), h.dim())?;
    let w = g.whiten(h);
    Ok((0..g.dim()).map(|i| w[i][i]).sum())
}

pub fn sqrt_det(g: &SpdMatrix) -> f64 {
    g.sqrt_det()
}

/// `g₀ exp(g₀⁻¹ a)`, evaluated as `L exp(L⁻¹ a L⁻ᵀ) Lᵀ` with `g₀ = L Lᵀ`.
pub fn spd_exp_from(g0: &SpdMatrix, a: &SymMatrix) -> Result<SpdMatrix> {
    same_dim(g0.dim(), a.dim())?;
    if !a.is_finite() {
        return Err(Error::NonFinite("tangent entry".into()));
    }
    let m = g0.whiten_sym(a);
    let e = m.map_spectrum(f64::exp);
    SpdMatrix::new(g0.congruence(&e))
}

/// The unique symmetric `a` with `spd_exp_from(g0, a) == g1`.
pub fn spd_log_from(g0: &SpdMatrix, g1: &SpdMatrix) -> Result<SymMatrix> {
    same_dim(g0.dim(), g1.dim())?;
    let m = g0.whiten_sym(g1.as_sym());
    let eig = m.eigenvalues();
    if !(eig[0] > 0.0) {
        return Err(Error::NotSpd {
            min_eig: eig[0],
            floor: 0.0,
        });
    }
    let l = m.map_spectrum(f64::ln);
    Ok(g0.congruence(&l))
}

/// `h - (tr_g h / n) g`, the component of `h` orthogonal to the conformal direction `g`.
pub fn traceless_part(g: &SpdMatrix, h: &SymMatrix) -> Result<SymMatrix> {
    let tr = trace_g(g, h)?;
    if g.dim() == 1 {
        return Ok(SymMatrix::zeros(1));
    }
    Ok(*h - *g.as_sym() * (tr / g.dim() as f64))
}
