//! Random instances: states, Hermitian operators, Haar isometries and
//! complete reduction families.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Operator, StateVector, C64};
use crate::reduction::{DensityOperator, ReductionFamily};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniformly distributed unit vector in ℂ^dim.
pub fn state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    let v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
    StateVector::new(v)
        .and_then(|s| s.normalized())
        .expect("gaussian vector is nonzero")
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Operator {
    Operator::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Random Hermitian operator (GUE-like).
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
    let g = ginibre(rng, dim, dim);
    (&g + &g.adjoint()).scale_real(0.5)
}

/// Random full-rank density operator GG†/tr(GG†).
pub fn density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    let g = ginibre(rng, dim, dim);
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    DensityOperator::new(gg.scale_real(1.0 / tr)).expect("GG† is a density operator")
}

/// Haar-random isometry ℂ^cols → ℂ^rows (rows ≥ cols), obtained by
/// Gram–Schmidt on the columns of a Ginibre matrix.
pub fn haar_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Operator {
    assert!(rows >= cols, "an isometry needs rows >= cols");
    let g = ginibre(rng, rows, cols);
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut v: Vec<C64> = (0..rows).map(|i| g.get(i, j)).collect();
        // two passes of modified Gram–Schmidt for stability
        for _ in 0..2 {
            for q in &columns {
                let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, qa) in v.iter_mut().zip(q) {
                    *x -= proj * qa;
                }
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= n);
        columns.push(v);
    }
    let mut out = Operator::zeros(rows, cols);
    for (j, col) in columns.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            out.set(i, j, z);
        }
    }
    out
}

/// Random complete family with `m` outcomes on ℂ^d: the blocks of a
/// Haar-random isometry ℂ^d → ℂ^d ⊗ ℂ^m.
pub fn complete_family<R: Rng + ?Sized>(rng: &mut R, d: usize, m: usize) -> ReductionFamily {
    let iso = haar_isometry(rng, d * m, d);
    let ops = (0..m)
        .map(|y| iso.select(d, d, |i| y * d + i, |j| j))
        .collect();
    ReductionFamily::from_operators(ops).expect("blocks share the system dimension")
}
