//! Generalized reduction families: Kraus-type operators V(z, y) labelled by
//! a measured value y (and an optional hidden index z), the projection
//! postulate, decoherence, operations and instruments.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::linalg::{exp_i, hermitian_eigen_with_tol, Operator, StateVector, C64, ONE};

/// Outcome label. Labels run over `1..=m`; 0 is the pointer vacuum.
pub type Label = usize;

/// Completeness residual above which a family is rejected.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Probabilities at or below this are treated as impossible branches.
pub const ZERO_PROBABILITY: f64 = 1e-14;
/// Default eigenvalue clustering tolerance, relative to the spectral diameter.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

/// The measured values 1..=m and their base-measure weights μ_y.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeSet {
    weights: Vec<f64>,
}

impl OutcomeSet {
    /// `m` outcomes under the counting measure.
    pub fn counting(m: usize) -> Result<Self> {
        Self::weighted(vec![1.0; m])
    }

    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidWeights);
        }
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn labels(&self) -> RangeInclusive<Label> {
        1..=self.weights.len()
    }

    pub fn contains(&self, y: Label) -> bool {
        y >= 1 && y <= self.weights.len()
    }

    pub fn weight(&self, y: Label) -> Result<f64> {
        if self.contains(y) {
            Ok(self.weights[y - 1])
        } else {
            Err(Error::UnknownLabel(y))
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_counting(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }
}

/// A family {V(z, y)} of d×d operators, normalized (when valid) as
/// Σ_{y,z} μ_y V(z,y)†V(z,y) = I.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionFamily {
    system_dim: usize,
    outcomes: OutcomeSet,
    kraus: Vec<Vec<Operator>>,
}

impl ReductionFamily {
    /// `kraus[y - 1]` lists the operators V(z, y) over the hidden index z.
    /// Only shapes are checked here; completeness is reported by
    /// [`validate_completeness`].
    pub fn new(system_dim: usize, outcomes: OutcomeSet, kraus: Vec<Vec<Operator>>) -> Result<Self> {
        if system_dim == 0 {
            return Err(Error::EmptyDimension);
        }
        if kraus.len() != outcomes.len() {
            return Err(Error::DimensionMismatch {
                context: "operators per outcome set",
                expected: outcomes.len(),
                found: kraus.len(),
            });
        }
        for ops in &kraus {
            if ops.is_empty() {
                return Err(Error::InvalidParameter(
                    "every outcome needs at least one operator".into(),
                ));
            }
            for op in ops {
                if op.rows() != system_dim || op.cols() != system_dim {
                    return Err(Error::DimensionMismatch {
                        context: "reduction operator",
                        expected: system_dim,
                        found: if op.rows() != system_dim {
                            op.rows()
                        } else {
                            op.cols()
                        },
                    });
                }
            }
        }
        Ok(Self {
            system_dim,
            outcomes,
            kraus,
        })
    }

    /// Complete observation under the counting measure: `ops[y - 1] = V(y)`.
    pub fn from_operators(ops: Vec<Operator>) -> Result<Self> {
        let m = ops.len();
        Self::weighted(ops, vec![1.0; m])
    }

    /// Complete observation with base-measure weights.
    pub fn weighted(ops: Vec<Operator>, weights: Vec<f64>) -> Result<Self> {
        let d = ops
            .first()
            .map(Operator::rows)
            .ok_or(Error::InvalidWeights)?;
        let outcomes = OutcomeSet::weighted(weights)?;
        Self::new(d, outcomes, ops.into_iter().map(|op| vec![op]).collect())
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn outcomes(&self) -> &OutcomeSet {
        &self.outcomes
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn labels(&self) -> RangeInclusive<Label> {
        self.outcomes.labels()
    }

    pub fn weight(&self, y: Label) -> Result<f64> {
        self.outcomes.weight(y)
    }

    /// All operators V(z, y) for outcome `y`.
    pub fn kraus(&self, y: Label) -> Result<&[Operator]> {
        if !self.outcomes.contains(y) {
            return Err(Error::UnknownLabel(y));
        }
        Ok(&self.kraus[y - 1])
    }

    pub fn is_complete_observation(&self) -> bool {
        self.kraus.iter().all(|ops| ops.len() == 1)
    }

    pub fn require_complete_observation(&self) -> Result<()> {
        if self.is_complete_observation() {
            Ok(())
        } else {
            Err(Error::IncompleteObservation)
        }
    }

    /// V(y) of a completely observed family.
    pub fn operator(&self, y: Label) -> Result<&Operator> {
        self.require_complete_observation()?;
        Ok(&self.kraus(y)?[0])
    }

    /// Σ_{y,z} μ_y V(z,y)†V(z,y).
    pub fn completeness_operator(&self) -> Operator {
        let mut acc = Operator::zeros(self.system_dim, self.system_dim);
        for (ops, &w) in self.kraus.iter().zip(self.outcomes.weights()) {
            for v in ops {
                acc = &acc + &(&v.adjoint() * v).scale_real(w);
            }
        }
        acc
    }

    /// The operators √μ_y·V(y) of a completely observed family, which
    /// resolve the identity under the counting measure.
    pub fn absorbed_operators(&self) -> Result<Vec<Operator>> {
        self.require_complete_observation()?;
        Ok(self
            .kraus
            .iter()
            .zip(self.outcomes.weights())
            .map(|(ops, &w)| ops[0].scale_real(w.sqrt()))
            .collect())
    }
}

/// ‖Σ μ_y V†V − I‖ in the spectral norm; the family is valid iff this is at
/// most [`COMPLETENESS_TOL`].
pub fn validate_completeness(fam: &ReductionFamily) -> f64 {
    (&fam.completeness_operator() - &Operator::identity(fam.system_dim())).norm()
}

/// Errors unless the family resolves the identity.
pub fn require_valid(fam: &ReductionFamily) -> Result<()> {
    let residual = validate_completeness(fam);
    if residual <= COMPLETENESS_TOL {
        Ok(())
    } else {
        Err(Error::IncompleteFamily { residual })
    }
}

/// A density operator ρ: Hermitian, unit trace, positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(Operator);

impl DensityOperator {
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;
    pub const POSITIVITY_TOL: f64 = 1e-10;

    pub fn new(op: Operator) -> Result<Self> {
        op.require_square()?;
        let herm = op.hermiticity_residual()?;
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (residual {herm:e})"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} is not 1")));
        }
        let rho = Self(op);
        let min = rho.min_eigenvalue()?;
        if min < -Self::POSITIVITY_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// |ψ⟩⟨ψ| for a normalized ψ.
    pub fn pure(psi: &StateVector) -> Result<Self> {
        psi.require_normalized()?;
        Ok(Self(psi.projector()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(Operator::identity(d).scale_real(1.0 / d as f64))
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (values, _) = hermitian_eigen_with_tol(&self.0, 1e-8)?;
        Ok(values[0])
    }

    fn unchecked(op: Operator) -> Self {
        Self(op)
    }
}

/// A spectral family of an observable: orthoprojectors F(y) with the
/// eigenvalue `values[y - 1]` each one projects onto.
#[derive(Clone, Debug)]
pub struct SpectralResolution {
    pub values: Vec<f64>,
    pub family: ReductionFamily,
}

impl SpectralResolution {
    /// Σ_y value_y · F(y).
    pub fn reconstruct(&self) -> Operator {
        let d = self.family.system_dim();
        self.family.labels().fold(Operator::zeros(d, d), |acc, y| {
            let f = &self.family.kraus[y - 1][0];
            &acc + &f.scale_real(self.values[y - 1])
        })
    }
}

/// Orthoprojectors onto the eigenspaces of a Hermitian observable, labelled
/// 1..=m in increasing eigenvalue order. Eigenvalues closer than
/// `cluster_tol · max(diameter, 1)` to their neighbour share a projector.
pub fn projection_family(observable: &Operator, cluster_tol: f64) -> Result<SpectralResolution> {
    observable.require_square()?;
    let residual = observable.hermiticity_residual()?;
    if residual > 1e-10 {
        return Err(Error::NotHermitian { residual });
    }
    let (values, vectors) = hermitian_eigen_with_tol(observable, 1e-10)?;
    let d = observable.rows();
    let diameter = values[d - 1] - values[0];
    let threshold = cluster_tol * diameter.max(1.0);

    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..d {
        if values[k] - values[k - 1] > threshold {
            clusters.push(vec![k]);
        } else {
            clusters.last_mut().expect("nonempty").push(k);
        }
    }

    let mut cluster_values = Vec::with_capacity(clusters.len());
    let mut projectors = Vec::with_capacity(clusters.len());
    for members in &clusters {
        let mean = members.iter().map(|&k| values[k]).sum::<f64>() / members.len() as f64;
        cluster_values.push(mean);
        let basis = vectors.select(d, members.len(), |i| i, |j| members[j]);
        projectors.push(&basis * &basis.adjoint());
    }
    Ok(SpectralResolution {
        values: cluster_values,
        family: ReductionFamily::from_operators(projectors)?,
    })
}

/// Pointer-model family V(y) = e^{−iE}·φ(y − X mod n) for a Hermitian X with
/// spectrum in {0, …, n−1}. Pointer value `v` carries label `v + 1`.
pub fn pointer_family(
    observable: &Operator,
    phi: &StateVector,
    hamiltonian: &Operator,
) -> Result<ReductionFamily> {
    let projectors = integer_spectral_projectors(observable, phi.dim())?;
    phi.require_normalized()?;
    let d = observable.rows();
    check_system_operator(hamiltonian, d, "hamiltonian")?;
    let evolution = exp_i(hamiltonian, -1.0)?;
    let n = phi.dim();
    let amp = phi.amplitudes();
    let ops = (0..n)
        .map(|y| {
            let shifted =
                projectors
                    .iter()
                    .enumerate()
                    .fold(Operator::zeros(d, d), |acc, (x, proj)| match proj {
                        Some(p) => &acc + &p.scale(amp[(y + n - x) % n]),
                        None => acc,
                    });
            &evolution * &shifted
        })
        .collect();
    ReductionFamily::from_operators(ops)
}

/// Eigenprojectors of an observable whose spectrum lies in {0, …, n−1};
/// `result[x]` is `None` when x is not an eigenvalue.
pub(crate) fn integer_spectral_projectors(
    observable: &Operator,
    n: usize,
) -> Result<Vec<Option<Operator>>> {
    observable.require_square()?;
    let (values, vectors) = hermitian_eigen_with_tol(observable, 1e-10)?;
    let d = observable.rows();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &v) in values.iter().enumerate() {
        let r = v.round();
        if (v - r).abs() > 1e-9 || r < 0.0 || r >= n as f64 {
            return Err(Error::NonIntegerSpectrum {
                value: v,
                modulus: n,
            });
        }
        members[r as usize].push(k);
    }
    Ok(members
        .into_iter()
        .map(|ks| {
            (!ks.is_empty()).then(|| {
                let basis = vectors.select(d, ks.len(), |i| i, |j| ks[j]);
                &basis * &basis.adjoint()
            })
        })
        .collect())
}

pub(crate) fn check_system_operator(op: &Operator, d: usize, context: &'static str) -> Result<()> {
    if op.rows() != d || op.cols() != d {
        return Err(Error::DimensionMismatch {
            context,
            expected: d,
            found: if op.rows() != d { op.rows() } else { op.cols() },
        });
    }
    Ok(())
}

/// Projection postulate for a completely observed family: returns the
/// posterior V(y)ψ/‖V(y)ψ‖ and the probability μ_y‖V(y)ψ‖².
pub fn apply_reduction(
    fam: &ReductionFamily,
    psi: &StateVector,
    y: Label,
) -> Result<(StateVector, f64)> {
    psi.require_normalized()?;
    let v = fam.operator(y)?;
    let out = v.apply(psi)?;
    let prob = fam.weight(y)? * out.norm_sqr();
    if prob <= ZERO_PROBABILITY {
        return Err(Error::ZeroProbability { probability: prob });
    }
    Ok((out.normalized()?, prob))
}

/// Non-selective reduction ρ ↦ Σ_{y,z} μ_y V ρ V†.
pub fn decohere(rho: &DensityOperator, fam: &ReductionFamily) -> Result<DensityOperator> {
    check_system_operator(rho.operator(), fam.system_dim(), "density operator")?;
    let d = fam.system_dim();
    let mut acc = Operator::zeros(d, d);
    for y in fam.labels() {
        let w = fam.weight(y)?;
        for v in fam.kraus(y)? {
            acc = &acc + &(&(v * rho.operator()) * &v.adjoint()).scale_real(w);
        }
    }
    Ok(DensityOperator::unchecked(acc))
}

/// The operation π(y, B) = Σ_z V(z,y)† B V(z,y).
pub fn operation_map(fam: &ReductionFamily, y: Label, b: &Operator) -> Result<Operator> {
    check_system_operator(b, fam.system_dim(), "observable")?;
    let d = fam.system_dim();
    Ok(fam.kraus(y)?.iter().fold(Operator::zeros(d, d), |acc, v| {
        &acc + &(&(&v.adjoint() * b) * v)
    }))
}

/// The instrument π*(y, σ) = Σ_z V(z,y) σ V(z,y)†: an unnormalized
/// post-measurement state whose trace times μ_y is the probability of y.
pub fn instrument_map(
    fam: &ReductionFamily,
    y: Label,
    sigma: &DensityOperator,
) -> Result<Operator> {
    instrument_map_raw(fam, y, sigma.operator())
}

pub(crate) fn instrument_map_raw(
    fam: &ReductionFamily,
    y: Label,
    sigma: &Operator,
) -> Result<Operator> {
    check_system_operator(sigma, fam.system_dim(), "density operator")?;
    let d = fam.system_dim();
    Ok(fam.kraus(y)?.iter().fold(Operator::zeros(d, d), |acc, v| {
        &acc + &(&(v * sigma) * &v.adjoint())
    }))
}

/// ⟨ψ|A|ψ⟩.
pub fn expectation(psi: &StateVector, a: &Operator) -> Result<C64> {
    Ok(psi.inner(&a.apply(psi)?))
}

/// Pr{F|E}Pr{E} + Pr{F|E⊥}Pr{E⊥} − Pr{F} in the state ψ for orthoprojectors
/// E and F, with conditioning by the projection postulate. It vanishes for
/// every ψ exactly when E and F commute.
pub fn total_probability_defect(e: &Operator, f: &Operator, psi: &StateVector) -> Result<f64> {
    check_system_operator(e, psi.dim(), "event projector")?;
    check_system_operator(f, psi.dim(), "event projector")?;
    let e_psi = e.apply(psi)?;
    let rest = psi.add(&e_psi.scale(-ONE));
    let joint = f.apply(&e_psi)?.norm_sqr();
    let complement = f.apply(&rest)?.norm_sqr();
    Ok(joint + complement - f.apply(psi)?.norm_sqr())
}

/// The two-outcome projective family onto |0⟩ and |1⟩ of a qubit.
pub fn cat_projectors() -> ReductionFamily {
    ReductionFamily::from_operators(vec![
        Operator::real_diagonal(&[1.0, 0.0]),
        Operator::real_diagonal(&[0.0, 1.0]),
    ])
    .expect("2x2 projectors")
}

/// Weak qubit measurement V(1) = diag(cos θ, 1), V(2) = diag(sin θ, 0).
pub fn weak_qubit(theta: f64) -> ReductionFamily {
    ReductionFamily::from_operators(vec![
        Operator::real_diagonal(&[theta.cos(), 1.0]),
        Operator::real_diagonal(&[theta.sin(), 0.0]),
    ])
    .expect("2x2 operators")
}
