//! Unitary dilations of reduction families on system ⊗ pointer.
//!
//! The pointer is the second tensor factor. Pointer index 0 is the vacuum
//! ("no result yet") and index y ≥ 1 holds outcome y, so the reduction
//! operator V(y) is literally the (y, 0) block of W.

use crate::error::{Error, Result};
use crate::linalg::{check_isometry, exp_i, tensor_product, Operator, StateVector, ONE, ZERO};
use crate::reduction::{
    check_system_operator, integer_spectral_projectors, require_valid, ReductionFamily,
};

/// Residual above which the vacuum block of W† counts as a leak.
pub const VACUUM_LEAK_TOL: f64 = 1e-9;

/// A unitary W on system ⊗ pointer together with the system action E it was
/// built with. `weights[y - 1]` is the base-measure weight absorbed into the
/// (y, 0) block.
#[derive(Clone, Debug, PartialEq)]
pub struct Dilation {
    system_dim: usize,
    pointer_dim: usize,
    unitary: Operator,
    hamiltonian: Operator,
    weights: Vec<f64>,
}

impl Dilation {
    /// Wraps a unitary under the counting measure. Only shapes are checked;
    /// use [`verify_dilation`] for the algebraic invariants.
    pub fn new(
        system_dim: usize,
        pointer_dim: usize,
        unitary: Operator,
        hamiltonian: Operator,
    ) -> Result<Self> {
        if system_dim == 0 || pointer_dim == 0 {
            return Err(Error::EmptyDimension);
        }
        let n = system_dim * pointer_dim;
        if unitary.rows() != n || unitary.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "dilation unitary",
                expected: n,
                found: unitary.rows(),
            });
        }
        check_system_operator(&hamiltonian, system_dim, "hamiltonian")?;
        Ok(Self {
            system_dim,
            pointer_dim,
            unitary,
            hamiltonian,
            weights: vec![1.0; pointer_dim - 1],
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.pointer_dim - 1 || weights.iter().any(|&w| w.is_nan() || w <= 0.0)
        {
            return Err(Error::InvalidWeights);
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn pointer_dim(&self) -> usize {
        self.pointer_dim
    }

    pub fn unitary(&self) -> &Operator {
        &self.unitary
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// (I ⊗ ⟨y|) W (I ⊗ |y'⟩).
    pub fn block(&self, y: usize, y_prime: usize) -> Operator {
        block_of(&self.unitary, self.system_dim, self.pointer_dim, y, y_prime)
    }

    /// (I ⊗ ⟨y|) W† (I ⊗ |y'⟩).
    pub fn inverse_block(&self, y: usize, y_prime: usize) -> Operator {
        block_of(
            &self.unitary.adjoint(),
            self.system_dim,
            self.pointer_dim,
            y,
            y_prime,
        )
    }

    /// The reduction operator read off the (y, 0) block, with the absorbed
    /// weight divided back out.
    pub fn extracted(&self, y: usize) -> Result<Operator> {
        if y == 0 || y >= self.pointer_dim {
            return Err(Error::UnknownLabel(y));
        }
        Ok(self
            .block(y, 0)
            .scale_real(1.0 / self.weights[y - 1].sqrt()))
    }
}

fn block_of(w: &Operator, d: usize, p: usize, y: usize, y_prime: usize) -> Operator {
    w.select(d, d, |i| i * p + y, |j| j * p + y_prime)
}

/// The canonical block dilation
///
/// ```text
/// W = (e^{−iE} ⊗ 1) · [ 0   F†        ]
///                     [ F   I⊗1 − FF† ]
/// ```
///
/// where F is the column of blocks F(y) = e^{iE}·√μ_y·V(y).
pub fn canonical_dilation(fam: &ReductionFamily, hamiltonian: &Operator) -> Result<Dilation> {
    fam.require_complete_observation()?;
    require_valid(fam)?;
    let d = fam.system_dim();
    check_system_operator(hamiltonian, d, "hamiltonian")?;
    let m = fam.num_outcomes();
    let p = m + 1;

    let forward = exp_i(hamiltonian, 1.0)?;
    let backward = exp_i(hamiltonian, -1.0)?;
    let column: Vec<Operator> = fam
        .absorbed_operators()?
        .iter()
        .map(|v| &forward * v)
        .collect();

    let mut bare = Operator::zeros(d * p, d * p);
    let mut put = |y: usize, yp: usize, blk: &Operator| {
        for i in 0..d {
            for j in 0..d {
                bare.set(i * p + y, j * p + yp, blk.get(i, j));
            }
        }
    };
    for (k, f) in column.iter().enumerate() {
        put(k + 1, 0, f);
        put(0, k + 1, &f.adjoint());
    }
    for (k, fk) in column.iter().enumerate() {
        for (l, fl) in column.iter().enumerate() {
            let mut blk = -(&(fk * &fl.adjoint()));
            if k == l {
                blk = &blk + &Operator::identity(d);
            }
            put(k + 1, l + 1, &blk);
        }
    }
    let w = &tensor_product(&backward, &Operator::identity(p)) * &bare;
    Dilation::new(d, p, w, hamiltonian.clone())?.with_weights(fam.outcomes().weights().to_vec())
}

/// A dilation by the controlled cyclic shift together with the pointer
/// state it must start in.
#[derive(Clone, Debug)]
pub struct ShiftDilation {
    pub dilation: Dilation,
    pub initial_pointer: StateVector,
}

impl ShiftDilation {
    /// (I ⊗ ⟨v|) W (I ⊗ |φ⟩) for pointer value `v`; equals e^{−iE}φ(v − X).
    pub fn reduction_operator(&self, v: usize) -> Result<Operator> {
        let d = self.dilation.system_dim;
        let n = self.dilation.pointer_dim;
        if v >= n {
            return Err(Error::UnknownLabel(v));
        }
        let phi = self.initial_pointer.amplitudes();
        let mut acc = Operator::zeros(d, d);
        for (yp, &amp) in phi.iter().enumerate() {
            if amp != ZERO {
                acc = &acc + &self.dilation.block(v, yp).scale(amp);
            }
        }
        Ok(acc)
    }

    /// The family induced on the system, pointer value `v` labelled `v + 1`.
    pub fn family(&self) -> Result<ReductionFamily> {
        let ops = (0..self.dilation.pointer_dim)
            .map(|v| self.reduction_operator(v))
            .collect::<Result<Vec<_>>>()?;
        ReductionFamily::from_operators(ops)
    }
}

/// W = (e^{−iE} ⊗ I)·S with S|x⟩⊗|y⟩ = |x⟩⊗|y + x mod n⟩ in the eigenbasis
/// of X, so that W(ψ ⊗ φ) = e^{−iE} Σ_y φ(y − X)ψ ⊗ |y⟩.
pub fn pointer_shift_dilation(
    observable: &Operator,
    phi: &StateVector,
    hamiltonian: &Operator,
) -> Result<ShiftDilation> {
    let n = phi.dim();
    let projectors = integer_spectral_projectors(observable, n)?;
    phi.require_normalized()?;
    let d = observable.rows();
    check_system_operator(hamiltonian, d, "hamiltonian")?;

    let mut shift = Operator::zeros(n, n);
    for y in 0..n {
        shift.set((y + 1) % n, y, ONE);
    }
    let mut power = Operator::identity(n);
    let mut s = Operator::zeros(d * n, d * n);
    for proj in &projectors {
        if let Some(p) = proj {
            s = &s + &tensor_product(p, &power);
        }
        power = &shift * &power;
    }
    let w = &tensor_product(&exp_i(hamiltonian, -1.0)?, &Operator::identity(n)) * &s;
    Ok(ShiftDilation {
        dilation: Dilation::new(d, n, w, hamiltonian.clone())?,
        initial_pointer: phi.clone(),
    })
}

/// Residuals of the dilation invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct DilationReport {
    /// ‖W†W − I‖
    pub unitarity: f64,
    /// ‖WW† − I‖
    pub co_unitarity: f64,
    /// ‖(I⊗⟨0|)W(I⊗|0⟩)‖
    pub vacuum_block: f64,
    /// max_y ‖(I⊗⟨y|)W(I⊗|0⟩) − √μ_y V(y)‖; infinite when the family does
    /// not fit the dilation's shape.
    pub extraction: f64,
}

impl DilationReport {
    pub fn max_residual(&self) -> f64 {
        self.unitarity
            .max(self.co_unitarity)
            .max(self.vacuum_block)
            .max(self.extraction)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

pub fn verify_dilation(dil: &Dilation, fam: &ReductionFamily) -> DilationReport {
    let w = dil.unitary();
    let unitarity = check_isometry(w);
    let co_unitarity = check_isometry(&w.adjoint());
    let vacuum_block = dil.block(0, 0).norm();
    let fits = fam.system_dim() == dil.system_dim()
        && fam.num_outcomes() + 1 == dil.pointer_dim()
        && fam.is_complete_observation();
    let extraction = if fits {
        fam.labels()
            .map(|y| {
                let v = fam.operator(y).expect("complete observation");
                let target = v.scale_real(fam.weight(y).expect("label in range").sqrt());
                (&dil.block(y, 0) - &target).norm()
            })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    DilationReport {
        unitarity,
        co_unitarity,
        vacuum_block,
        extraction,
    }
}

/// The time-reversed family V*(y) = (I⊗⟨y|)W⁻¹(I⊗|0⟩), with the absorbed
/// weights divided back out. For the canonical dilation V*(y) = F(y)e^{iE}.
pub fn reversed_family(dil: &Dilation) -> Result<ReductionFamily> {
    let residual = dil.inverse_block(0, 0).norm();
    if residual > VACUUM_LEAK_TOL {
        return Err(Error::VacuumLeak { residual });
    }
    let ops = (1..dil.pointer_dim())
        .map(|y| {
            dil.inverse_block(y, 0)
                .scale_real(1.0 / dil.weights()[y - 1].sqrt())
        })
        .collect();
    ReductionFamily::weighted(ops, dil.weights().to_vec())
}
