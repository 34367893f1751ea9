//! Dense complex linear algebra, tensor-factor bookkeeping and matrix-free
//! linear maps.
//!
//! Composite indices are factor-0-major: factor 0 is the most significant
//! digit of a composite basis index. Every module relies on this single
//! convention.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative stopping tolerance for power iteration.
pub const NORM_TOL: f64 = 1e-12;
/// Iteration cap for power iteration.
pub const NORM_MAX_ITER: usize = 10_000;

/// Threshold under which a state vector counts as normalized.
pub const NORMALIZED_TOL: f64 = 1e-12;

/// A dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator({}x{})", self.rows(), self.cols())?;
        if self.rows() * self.cols() <= 64 {
            write!(f, " {}", self.0)?;
        }
        Ok(())
    }
}

impl Operator {
    /// Builds an operator from entries listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyDimension);
        }
        if entries.len() != rows * cols {
            return Err(Error::BadShape {
                rows,
                cols,
                found: entries.len(),
            });
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    /// Builds an operator from a list of rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::BadShape {
                rows: rows.len(),
                cols,
                found: rows.iter().map(Vec::len).sum(),
            });
        }
        let flat: Vec<C64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, &flat)
    }

    /// Builds an operator from real rows (test and fixture convenience).
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn diagonal(values: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn real_diagonal(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diagonal(&v)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.0[(i, j)] = value;
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Spectral norm (largest singular value) by power iteration.
    pub fn norm(&self) -> f64 {
        spectral_norm(self)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ‖A − A†‖ for square operators.
    pub fn hermiticity_residual(&self) -> Result<f64> {
        self.require_square()?;
        Ok((self - &self.adjoint()).norm())
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.rows()).all(|i| (0..self.cols()).all(|j| i == j || self.0[(i, j)].norm() <= tol))
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.cols() {
            return Err(Error::DimensionMismatch {
                context: "operator application",
                expected: self.cols(),
                found: v.dim(),
            });
        }
        Ok(StateVector(&self.0 * &v.0))
    }

    /// Matrix product with a dimension check.
    pub fn try_mul(&self, rhs: &Operator) -> Result<Operator> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch {
                context: "matrix product",
                expected: self.cols(),
                found: rhs.rows(),
            });
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    /// Sub-matrix whose entry (i, j) is `self[index_row(i), index_col(j)]`.
    pub fn select(
        &self,
        rows: usize,
        cols: usize,
        index_row: impl Fn(usize) -> usize,
        index_col: impl Fn(usize) -> usize,
    ) -> Operator {
        Operator::from_fn(rows, cols, |i, j| self.0[(index_row(i), index_col(j))])
    }
}

impl From<DMatrix<C64>> for Operator {
    fn from(m: DMatrix<C64>) -> Self {
        Self(m)
    }
}

impl Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

/// Pauli matrices.
pub mod pauli {
    use super::*;

    pub fn x() -> Operator {
        Operator::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()
    }

    pub fn y() -> Operator {
        Operator::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]).unwrap()
    }

    pub fn z() -> Operator {
        Operator::real_diagonal(&[1.0, -1.0])
    }
}

/// A complex state vector (probability amplitude).
#[derive(Clone, PartialEq)]
pub struct StateVector(DVector<C64>);

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("StateVector")
            .field(&self.0.as_slice())
            .finish()
    }
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::EmptyDimension);
        }
        Ok(Self(DVector::from_vec(amplitudes)))
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = ONE;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORMALIZED_TOL
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized { norm: self.norm() })
        }
    }

    /// Returns `self / ‖self‖`; zero vectors are rejected.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(Self(&self.0 / C64::new(n, 0.0)))
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        Self(self.0.kronecker(&other.0))
    }

    /// The rank-one operator |ψ⟩⟨ψ|.
    pub fn projector(&self) -> Operator {
        Operator(&self.0 * self.0.adjoint())
    }

    pub fn scale(&self, c: C64) -> StateVector {
        Self(&self.0 * c)
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        Self(&self.0 + &other.0)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.0 - &other.0).norm()
    }

    /// 1 − |⟨a|b⟩| for normalized vectors: zero iff they agree up to a phase.
    pub fn phase_infidelity(&self, other: &StateVector) -> f64 {
        1.0 - self.inner(other).norm()
    }
}

impl From<DVector<C64>> for StateVector {
    fn from(v: DVector<C64>) -> Self {
        Self(v)
    }
}

/// Tensor factorization of a composite space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorSpace {
    dims: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl FactorSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::EmptyDimension);
        }
        let mut strides = vec![1; dims.len()];
        for f in (0..dims.len().saturating_sub(1)).rev() {
            strides[f] = strides[f + 1] * dims[f + 1];
        }
        let dim = dims.iter().product();
        Ok(Self { dims, strides, dim })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, factor: usize) -> usize {
        self.strides[factor]
    }

    /// Digit of composite `index` on `factor`.
    pub fn digit(&self, index: usize, factor: usize) -> usize {
        (index / self.strides[factor]) % self.dims[factor]
    }

    pub fn compose(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.strides).map(|(d, s)| d * s).sum()
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.dims.len() {
                return Err(Error::FactorOutOfRange {
                    index: t,
                    factors: self.dims.len(),
                });
            }
            if targets[..i].contains(&t) {
                return Err(Error::DuplicateFactor(t));
            }
        }
        Ok(())
    }
}

/// A linear map known only through its action on vectors.
pub trait LinearMap {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64>;

    /// Dense materialization, one basis column at a time.
    fn to_operator(&self) -> Operator {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        let mut e = vec![ZERO; self.ncols()];
        for j in 0..self.ncols() {
            e[j] = ONE;
            let col = self.apply(&e);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = ZERO;
        }
        Operator(m)
    }
}

impl LinearMap for Operator {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let v = DVector::from_column_slice(x);
        (&self.0 * v).data.into()
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let v = DVector::from_column_slice(y);
        self.0.ad_mul(&v).data.into()
    }
    fn to_operator(&self) -> Operator {
        self.clone()
    }
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        (**self).apply_adjoint(y)
    }
}

/// Diagonal operator stored by its diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMap(pub Vec<C64>);

impl LinearMap for DiagonalMap {
    fn nrows(&self) -> usize {
        self.0.len()
    }
    fn ncols(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        x.iter().zip(&self.0).map(|(a, d)| a * d).collect()
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        y.iter().zip(&self.0).map(|(a, d)| a * d.conj()).collect()
    }
    fn to_operator(&self) -> Operator {
        Operator::diagonal(&self.0)
    }
}

/// An operator acting on a subset of tensor factors, identity elsewhere.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    op: Operator,
    forward: Vec<C64>,
    backward: Vec<C64>,
    local_offsets: Vec<usize>,
    rest_offsets: Vec<usize>,
    dim: usize,
}

impl LocalOperator {
    /// `op` acts on `targets`, listed in the order `op`'s own tensor
    /// structure expects (first target most significant).
    pub fn new(op: &Operator, space: &FactorSpace, targets: &[usize]) -> Result<Self> {
        space.check_targets(targets)?;
        let k: usize = targets.iter().map(|&t| space.dims()[t]).product();
        op.require_square()?;
        if op.rows() != k {
            return Err(Error::DimensionMismatch {
                context: "embedding on factors",
                expected: k,
                found: op.rows(),
            });
        }
        let local_offsets: Vec<usize> = (0..k)
            .map(|l| {
                let mut rem = l;
                let mut off = 0;
                for &t in targets.iter().rev() {
                    let d = space.dims()[t];
                    off += (rem % d) * space.stride(t);
                    rem /= d;
                }
                off
            })
            .collect();
        let rest_offsets: Vec<usize> = (0..space.dim())
            .filter(|&i| targets.iter().all(|&t| space.digit(i, t) == 0))
            .collect();
        Ok(Self {
            forward: op.row_major(),
            backward: op.adjoint().row_major(),
            op: op.clone(),
            local_offsets,
            rest_offsets,
            dim: space.dim(),
        })
    }

    pub fn local(&self) -> &Operator {
        &self.op
    }

    fn apply_with(&self, m: &[C64], x: &[C64]) -> Vec<C64> {
        let k = self.local_offsets.len();
        let mut out = vec![ZERO; self.dim];
        let mut gathered = vec![ZERO; k];
        for &r in &self.rest_offsets {
            for (g, &lo) in gathered.iter_mut().zip(&self.local_offsets) {
                *g = x[r + lo];
            }
            for (row, &lo) in self.local_offsets.iter().enumerate() {
                let coeffs = &m[row * k..(row + 1) * k];
                let mut acc = ZERO;
                for (c, g) in coeffs.iter().zip(&gathered) {
                    acc += c * g;
                }
                out[r + lo] = acc;
            }
        }
        out
    }
}

impl LinearMap for LocalOperator {
    fn nrows(&self) -> usize {
        self.dim
    }
    fn ncols(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.apply_with(&self.forward, x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.apply_with(&self.backward, y)
    }
    fn to_operator(&self) -> Operator {
        let k = self.local_offsets.len();
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &r in &self.rest_offsets {
            for (row, &lr) in self.local_offsets.iter().enumerate() {
                for (col, &lc) in self.local_offsets.iter().enumerate() {
                    m[(r + lr, r + lc)] = self.forward[row * k + col];
                }
            }
        }
        Operator(m)
    }
}

/// A permutation of tensor factors of equal dimension, stored as a basis
/// index map: `apply` sends basis vector `i` to basis vector `map[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorPermutation {
    map: Vec<usize>,
}

impl FactorPermutation {
    /// The content of factor `f` moves to factor `destination[f]`.
    pub fn new(space: &FactorSpace, destination: &[usize]) -> Result<Self> {
        let n = space.num_factors();
        if destination.len() != n {
            return Err(Error::DimensionMismatch {
                context: "factor permutation",
                expected: n,
                found: destination.len(),
            });
        }
        space.check_targets(destination)?;
        for (f, &d) in destination.iter().enumerate() {
            if space.dims()[f] != space.dims()[d] {
                return Err(Error::DimensionMismatch {
                    context: "factor permutation target",
                    expected: space.dims()[f],
                    found: space.dims()[d],
                });
            }
        }
        let mut digits = vec![0; n];
        let map = (0..space.dim())
            .map(|i| {
                for (f, &d) in destination.iter().enumerate() {
                    digits[d] = space.digit(i, f);
                }
                space.compose(&digits)
            })
            .collect();
        Ok(Self { map })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            map: (0..dim).collect(),
        }
    }

    pub fn index_map(&self) -> &[usize] {
        &self.map
    }
}

impl LinearMap for FactorPermutation {
    fn nrows(&self) -> usize {
        self.map.len()
    }
    fn ncols(&self) -> usize {
        self.map.len()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; x.len()];
        for (i, &j) in self.map.iter().enumerate() {
            out[j] = x[i];
        }
        out
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.map.iter().map(|&j| y[j]).collect()
    }
    fn to_operator(&self) -> Operator {
        let n = self.map.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &j) in self.map.iter().enumerate() {
            m[(j, i)] = ONE;
        }
        Operator(m)
    }
}

/// Product `maps[0] · maps[1] · … · maps[n-1]` (the last map acts first).
pub struct Product<'a>(pub Vec<&'a dyn LinearMap>);

impl LinearMap for Product<'_> {
    fn nrows(&self) -> usize {
        self.0.first().map_or(0, |m| m.nrows())
    }
    fn ncols(&self) -> usize {
        self.0.last().map_or(0, |m| m.ncols())
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.0.iter().rev().fold(x.to_vec(), |v, m| m.apply(&v))
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.0.iter().fold(y.to_vec(), |v, m| m.apply_adjoint(&v))
    }
}

/// `a − b`.
pub struct Difference<'a>(pub &'a dyn LinearMap, pub &'a dyn LinearMap);

impl LinearMap for Difference<'_> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        sub_vec(self.0.apply(x), &self.1.apply(x))
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        sub_vec(self.0.apply_adjoint(y), &self.1.apply_adjoint(y))
    }
}

/// `[a, b] = ab − ba`.
pub struct Commutator<'a>(pub &'a dyn LinearMap, pub &'a dyn LinearMap);

impl LinearMap for Commutator<'_> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let ab = self.0.apply(&self.1.apply(x));
        let ba = self.1.apply(&self.0.apply(x));
        sub_vec(ab, &ba)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        // [a,b]† = b†a† − a†b†
        let ba = self.1.apply_adjoint(&self.0.apply_adjoint(y));
        let ab = self.0.apply_adjoint(&self.1.apply_adjoint(y));
        sub_vec(ba, &ab)
    }
}

/// `a − I` for square maps.
pub struct MinusIdentity<'a>(pub &'a dyn LinearMap);

impl LinearMap for MinusIdentity<'_> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        sub_vec(self.0.apply(x), x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        sub_vec(self.0.apply_adjoint(y), y)
    }
}

fn sub_vec(mut a: Vec<C64>, b: &[C64]) -> Vec<C64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= y;
    }
    a
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral norm with the default tolerance and iteration cap.
pub fn spectral_norm(map: &dyn LinearMap) -> f64 {
    spectral_norm_with(map, NORM_TOL, NORM_MAX_ITER)
}

/// Largest singular value by power iteration on A†A.
///
/// Stops once successive estimates differ by at most `tol · max(σ, 1)`.
/// The start vector is a fixed pseudo-random vector, so results are
/// reproducible.
pub fn spectral_norm_with(map: &dyn LinearMap, tol: f64, max_iter: usize) -> f64 {
    let n = map.ncols();
    if n == 0 || map.nrows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_9a11);
    let mut x: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let nx = vec_norm(&x);
    x.iter_mut().for_each(|z| *z /= nx);

    let mut estimate: f64 = 0.0;
    for _ in 0..max_iter {
        let y = map.apply(&x);
        let z = map.apply_adjoint(&y);
        let nz = vec_norm(&z);
        if nz == 0.0 {
            // x lies in the kernel of A†A; fall back to ‖Ax‖ which is zero too.
            return estimate.max(vec_norm(&y));
        }
        let next = nz.sqrt();
        x = z.into_iter().map(|c| c / nz).collect();
        let done = (next - estimate).abs() <= tol * next.max(1.0);
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Kronecker product, factor-0-major.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    Operator(a.0.kronecker(&b.0))
}

/// Embeds `a` on `targets` of `space`, identity on all other factors.
pub fn embed_on_factors(a: &Operator, space: &FactorSpace, targets: &[usize]) -> Result<Operator> {
    Ok(LocalOperator::new(a, space, targets)?.to_operator())
}

/// ‖AB − BA‖ in the spectral norm.
pub fn commutator_norm(a: &Operator, b: &Operator) -> Result<f64> {
    a.require_square()?;
    b.require_square()?;
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            context: "commutator",
            expected: a.rows(),
            found: b.rows(),
        });
    }
    Ok((&(a * b) - &(b * a)).norm())
}

/// ‖A†A − I‖; zero iff `a` is an isometry.
pub fn check_isometry(a: &Operator) -> f64 {
    (&(&a.adjoint() * a) - &Operator::identity(a.cols())).norm()
}

/// Eigen-decomposition of a Hermitian operator: eigenvalues in increasing
/// order and the matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(a: &Operator) -> Result<(Vec<f64>, Operator)> {
    hermitian_eigen_with_tol(a, 1e-10)
}

pub fn hermitian_eigen_with_tol(a: &Operator, tol: f64) -> Result<(Vec<f64>, Operator)> {
    a.require_square()?;
    let residual = (&a.0 - a.0.adjoint()).norm();
    if residual > tol * a.0.norm().max(1.0) {
        return Err(Error::NotHermitian { residual });
    }
    let sym = (&a.0 + a.0.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..a.rows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Operator::from_fn(a.rows(), a.rows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// f(A) for Hermitian A via its spectral decomposition.
pub fn hermitian_function(a: &Operator, f: impl Fn(f64) -> C64) -> Result<Operator> {
    let (values, vectors) = hermitian_eigen(a)?;
    let d: Vec<C64> = values.into_iter().map(f).collect();
    Ok(&(&vectors * &Operator::diagonal(&d)) * &vectors.adjoint())
}

/// e^{iθE} for Hermitian E (ħ = 1). The zero operator maps exactly to I.
pub fn exp_i(e: &Operator, theta: f64) -> Result<Operator> {
    e.require_square()?;
    if e.max_abs() == 0.0 || theta == 0.0 {
        return Ok(Operator::identity(e.rows()));
    }
    hermitian_function(e, |lambda| C64::from_polar(1.0, theta * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_op(rng: &mut ChaCha8Rng, r: usize, k: usize) -> Operator {
        Operator::from_fn(r, k, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn identity_kronecker() {
        let i6 = tensor_product(&Operator::identity(2), &Operator::identity(3));
        assert_eq!(i6, Operator::identity(6));
    }

    #[test]
    fn kronecker_acts_factorwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_op(&mut rng, 2, 2);
        let b = random_op(&mut rng, 2, 2);
        let u = StateVector::new(vec![c(0.3, 0.1), c(-0.2, 0.7)]).unwrap();
        let v = StateVector::new(vec![c(1.0, -0.5), c(0.25, 0.0)]).unwrap();
        let lhs = tensor_product(&a, &b).apply(&u.tensor(&v)).unwrap();
        let rhs = a.apply(&u).unwrap().tensor(&b.apply(&v).unwrap());
        assert!(lhs.distance(&rhs) < 1e-14);
    }

    #[test]
    fn xx_flips_both_bits() {
        let xx = tensor_product(&pauli::x(), &pauli::x());
        let out = xx.apply(&StateVector::basis(4, 0)).unwrap();
        assert_eq!(out, StateVector::basis(4, 3));
    }

    #[test]
    fn embed_z_on_second_factor() {
        let space = FactorSpace::new(vec![2, 2]).unwrap();
        let z1 = embed_on_factors(&pauli::z(), &space, &[1]).unwrap();
        assert_eq!(z1, Operator::real_diagonal(&[1.0, -1.0, 1.0, -1.0]));
    }

    #[test]
    fn embed_identity_is_identity() {
        let space = FactorSpace::new(vec![2, 3, 2]).unwrap();
        let id = embed_on_factors(&Operator::identity(3), &space, &[1]).unwrap();
        assert_eq!(id, Operator::identity(12));
    }

    #[test]
    fn embed_disjoint_supports_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let space = FactorSpace::new(vec![2, 2]).unwrap();
        let a = embed_on_factors(&random_op(&mut rng, 2, 2), &space, &[0]).unwrap();
        let b = embed_on_factors(&random_op(&mut rng, 2, 2), &space, &[1]).unwrap();
        assert!(commutator_norm(&a, &b).unwrap() <= 1e-12);
    }

    #[test]
    fn embed_respects_target_order() {
        // A CNOT with control on factor 2 and target on factor 0.
        let cnot = Operator::from_real_rows(&[
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let space = FactorSpace::new(vec![2, 3, 2]).unwrap();
        let op = embed_on_factors(&cnot, &space, &[2, 0]).unwrap();
        // |0,1,1⟩ -> |1,1,1⟩
        let src = space.compose(&[0, 1, 1]);
        let dst = space.compose(&[1, 1, 1]);
        let out = op.apply(&StateVector::basis(12, src)).unwrap();
        assert_eq!(out, StateVector::basis(12, dst));
    }

    #[test]
    fn embed_errors() {
        let space = FactorSpace::new(vec![2, 2]).unwrap();
        assert!(matches!(
            embed_on_factors(&pauli::z(), &space, &[2]),
            Err(Error::FactorOutOfRange { .. })
        ));
        assert!(matches!(
            embed_on_factors(&Operator::identity(3), &space, &[0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            embed_on_factors(&Operator::identity(4), &space, &[0, 0]),
            Err(Error::DuplicateFactor(0))
        ));
    }

    #[test]
    fn commutator_norms() {
        let x = pauli::x();
        assert_eq!(commutator_norm(&x, &x).unwrap(), 0.0);
        // [X, Z] = -2iY has spectral norm 2
        assert!((commutator_norm(&x, &pauli::z()).unwrap() - 2.0).abs() < 1e-12);
        let d1 = Operator::real_diagonal(&[1.0, 2.0, 3.0]);
        let d2 = Operator::real_diagonal(&[-1.0, 0.5, 7.0]);
        assert_eq!(commutator_norm(&d1, &d2).unwrap(), 0.0);
        assert!(commutator_norm(&x, &Operator::identity(3)).is_err());
    }

    #[test]
    fn isometry_residuals() {
        let h = Operator::from_real_rows(&[[1.0, 1.0], [1.0, -1.0]])
            .unwrap()
            .scale_real(std::f64::consts::FRAC_1_SQRT_2);
        assert!(check_isometry(&h) <= 1e-12);
        // ψ ↦ ψ ⊗ χ with ‖χ‖ = 1
        let chi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let chi_col = Operator::from_fn(2, 1, |i, _| chi.amplitudes()[i]);
        let embed = tensor_product(&Operator::identity(3), &chi_col);
        assert!(check_isometry(&embed) <= 1e-12);
        let a = Operator::real_diagonal(&[1.0, 0.5]);
        assert!((check_isometry(&a) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=16 {
            let a = random_op(&mut rng, n, n);
            let svd = a.matrix().clone().singular_values();
            let expected = svd.iter().cloned().fold(0.0, f64::max);
            let got = a.norm();
            assert!((got - expected).abs() <= 1e-9, "n={n}: {got} vs {expected}");
            // rectangular
            let b = random_op(&mut rng, n, n + 3);
            let expected = b.matrix().clone().singular_values().max();
            assert!((b.norm() - expected).abs() <= 1e-9);
        }
    }

    #[test]
    fn spectral_norm_bounds_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_op(&mut rng, 6, 6);
        let n = a.norm();
        for _ in 0..20 {
            let v =
                StateVector::new((0..6).map(|_| c(rng.random(), rng.random())).collect()).unwrap();
            let av = a.apply(&v).unwrap();
            assert!(av.norm() / v.norm() <= n * (1.0 + 1e-12));
        }
    }

    #[test]
    fn matrix_free_maps_agree_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let space = FactorSpace::new(vec![2, 3, 3]).unwrap();
        let w = random_op(&mut rng, 6, 6);
        let local = LocalOperator::new(&w, &space, &[0, 2]).unwrap();
        let perm = FactorPermutation::new(&space, &[0, 2, 1]).unwrap();
        let x: Vec<C64> = (0..18).map(|_| c(rng.random(), rng.random())).collect();
        let dense_local = local.to_operator();
        let dense_perm = perm.to_operator();
        let prod = Product(vec![&perm, &local]);
        let dense_prod = &dense_perm * &dense_local;
        let a = prod.apply(&x);
        let b = dense_prod
            .apply(&StateVector::new(x.clone()).unwrap())
            .unwrap();
        assert!(StateVector::new(a).unwrap().distance(&b) < 1e-13);
        let a = prod.apply_adjoint(&x);
        let b = dense_prod
            .adjoint()
            .apply(&StateVector::new(x.clone()).unwrap())
            .unwrap();
        assert!(StateVector::new(a).unwrap().distance(&b) < 1e-13);
        assert!(check_isometry(&dense_perm) == 0.0);
    }

    #[test]
    fn exponential_is_unitary() {
        let e = pauli::x().scale_real(0.7);
        let u = exp_i(&e, -1.0).unwrap();
        assert!(check_isometry(&u) < 1e-12);
        // e^{-iθX} = cos θ I − i sin θ X
        let expected = &Operator::identity(2).scale_real(0.7f64.cos())
            - &pauli::x().scale(c(0.0, 0.7f64.sin()));
        assert!((&u - &expected).max_abs() < 1e-14);
        assert_eq!(
            exp_i(&Operator::zeros(3, 3), 1.0).unwrap(),
            Operator::identity(3)
        );
    }

    #[test]
    fn eigen_sorted_and_hermitian_checked() {
        let (vals, vecs) = hermitian_eigen(&pauli::x()).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        assert!(check_isometry(&vecs) < 1e-12);
        let bad = Operator::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            hermitian_eigen(&bad),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn bad_shapes_rejected() {
        assert!(Operator::from_row_major(2, 2, &[ONE; 3]).is_err());
        assert!(Operator::from_row_major(0, 2, &[]).is_err());
        assert!(StateVector::new(vec![]).is_err());
        assert!(FactorSpace::new(vec![2, 0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn op_strategy(r: usize, k: usize) -> impl Strategy<Value = Operator> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * k).prop_map(move |v| {
                let e: Vec<C64> = v.into_iter().map(|(a, b)| c(a, b)).collect();
                Operator::from_row_major(r, k, &e).unwrap()
            })
        }

        proptest! {
            #[test]
            fn adjoint_is_involution(a in op_strategy(3, 4)) {
                prop_assert_eq!(a.adjoint().adjoint(), a);
            }

            #[test]
            fn kronecker_is_associative(
                a in op_strategy(2, 2), b in op_strategy(3, 1), cc in op_strategy(1, 2)
            ) {
                let left = tensor_product(&tensor_product(&a, &b), &cc);
                let right = tensor_product(&a, &tensor_product(&b, &cc));
                prop_assert!((&left - &right).max_abs() <= 1e-15);
            }

            #[test]
            fn kronecker_is_bilinear(
                a in op_strategy(2, 2), a2 in op_strategy(2, 2), b in op_strategy(2, 3),
                s in -2.0f64..2.0
            ) {
                let lhs = tensor_product(&(&a + &a2.scale_real(s)), &b);
                let rhs = &tensor_product(&a, &b) + &tensor_product(&a2, &b).scale_real(s);
                prop_assert!((&lhs - &rhs).max_abs() < 1e-12);
            }

            #[test]
            fn row_major_roundtrip(a in op_strategy(3, 5)) {
                let again = Operator::from_row_major(3, 5, &a.row_major()).unwrap();
                prop_assert_eq!(again, a);
            }
        }
    }
}
