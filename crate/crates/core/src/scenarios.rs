//! Named experiment configurations.
//!
//! Parameters use the same JSON schema as the `params` block of a CLI
//! config: complex numbers are `[re, im]` pairs, matrices are lists of rows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dilation::{canonical_dilation, pointer_shift_dilation, Dilation, ShiftDilation};
use crate::error::{Error, Result};
use crate::linalg::{exp_i, pauli, Operator, StateVector, C64};
use crate::reduction::{
    cat_projectors, pointer_family, projection_family, require_valid, weak_qubit, ReductionFamily,
    DEFAULT_CLUSTER_TOL,
};
use crate::string::{StringModel, DEFAULT_DIM_CAP};

pub const SCENARIO_NAMES: [&str; 5] = [
    "cat",
    "weak-qubit",
    "pointer-Zn",
    "sequential-observable",
    "explicit",
];

pub const DEFAULT_HORIZON: usize = 3;
pub const DEFAULT_STEPS: usize = 3;

/// A complex number as `[re, im]`.
pub type ComplexEntry = [f64; 2];
pub type ComplexVector = Vec<ComplexEntry>;
pub type ComplexMatrix = Vec<Vec<ComplexEntry>>;

/// Scenario parameters; every field is optional and defaults per scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Weak-qubit angle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Initial system state; normalized on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<ComplexVector>,
    /// Free evolution E applied after each reduction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<ComplexMatrix>,
    /// Measured observable: X for `pointer-Zn`, B₀ for `sequential-observable`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ComplexMatrix>,
    /// Pointer wave function φ for `pointer-Zn`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<ComplexVector>,
    /// Reduction operators V(1), …, V(m) for `explicit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operators: Option<Vec<ComplexMatrix>>,
    /// Base-measure weights μ for `explicit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub family: ReductionFamily,
    pub hamiltonian: Option<Operator>,
    pub psi: StateVector,
    pub horizon: usize,
    pub steps: usize,
    /// (X, φ) for pointer models, which also admit the shift dilation.
    pub pointer: Option<(Operator, StateVector)>,
}

impl Scenario {
    pub fn system_dim(&self) -> usize {
        self.family.system_dim()
    }

    /// E, or zero when the scenario has no free evolution.
    pub fn evolution(&self) -> Operator {
        self.hamiltonian
            .clone()
            .unwrap_or_else(|| Operator::zeros(self.system_dim(), self.system_dim()))
    }

    pub fn dilation(&self) -> Result<Dilation> {
        canonical_dilation(&self.family, &self.evolution())
    }

    pub fn shift_dilation(&self) -> Option<Result<ShiftDilation>> {
        self.pointer
            .as_ref()
            .map(|(x, phi)| pointer_shift_dilation(x, phi, &self.evolution()))
    }

    pub fn string_model(&self, horizon: usize) -> Result<StringModel> {
        self.string_model_with_cap(horizon, DEFAULT_DIM_CAP)
    }

    pub fn string_model_with_cap(&self, horizon: usize, cap: usize) -> Result<StringModel> {
        StringModel::build_with_cap(self.dilation()?, horizon, cap)
    }
}

/// Builds a scenario and checks that its family is complete.
pub fn build_scenario(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    let s = build_scenario_unchecked(name, params)?;
    require_valid(&s.family)?;
    Ok(s)
}

/// Builds a scenario without the completeness check, for validation runs.
pub fn build_scenario_unchecked(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    let allowed: &[&str] = match name {
        "cat" => &["psi"],
        "weak-qubit" => &["psi", "theta"],
        "pointer-Zn" => &["psi", "observable", "phi", "hamiltonian"],
        "sequential-observable" => &["psi", "observable", "hamiltonian"],
        "explicit" => &["psi", "operators", "weights", "hamiltonian"],
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    for field in params.present_fields() {
        if !allowed.contains(&field) {
            return Err(Error::InvalidParameter(format!(
                "{field} does not apply to scenario {name}"
            )));
        }
    }
    let hamiltonian = params
        .hamiltonian
        .as_ref()
        .map(matrix_from_json)
        .transpose()?;
    let mut pointer = None;
    let (family, hamiltonian) = match name {
        "cat" => (cat_projectors(), None),
        "weak-qubit" => {
            let theta = params.theta.unwrap_or(PI / 6.0);
            if !theta.is_finite() {
                return Err(Error::InvalidParameter("theta must be finite".into()));
            }
            (weak_qubit(theta), None)
        }
        "pointer-Zn" => {
            let x = match &params.observable {
                Some(m) => matrix_from_json(m)?,
                None => Operator::real_diagonal(&[0.0, 1.0]),
            };
            let phi = match &params.phi {
                Some(v) => vector_from_json(v)?.normalized()?,
                None => StateVector::from_real(&[(PI / 8.0).cos(), (PI / 8.0).sin()])?,
            };
            let e = match hamiltonian {
                Some(e) => e,
                None if x.rows() == 2 => pauli::y().scale_real(0.3),
                None => Operator::zeros(x.rows(), x.rows()),
            };
            let fam = pointer_family(&x, &phi, &e)?;
            pointer = Some((x, phi));
            (fam, Some(e))
        }
        "sequential-observable" => {
            let b0 = match &params.observable {
                Some(m) => matrix_from_json(m)?,
                None => pauli::z(),
            };
            let e = match hamiltonian {
                Some(e) => e,
                None if b0.rows() == 2 => pauli::x().scale_real(PI / 4.0),
                None => Operator::zeros(b0.rows(), b0.rows()),
            };
            (sequential_family(&b0, &e)?, Some(e))
        }
        _ => {
            let ops = params
                .operators
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("explicit scenario needs operators".into()))?
                .iter()
                .map(matrix_from_json)
                .collect::<Result<Vec<_>>>()?;
            if ops.is_empty() {
                return Err(Error::InvalidParameter(
                    "operators must not be empty".into(),
                ));
            }
            let fam = match &params.weights {
                Some(w) => ReductionFamily::weighted(ops, w.clone())?,
                None => ReductionFamily::from_operators(ops)?,
            };
            (fam, hamiltonian)
        }
    };
    let d = family.system_dim();
    if let Some(e) = &hamiltonian {
        if e.rows() != d || e.cols() != d {
            return Err(Error::DimensionMismatch {
                context: "hamiltonian",
                expected: d,
                found: e.rows(),
            });
        }
        e.hermiticity_residual().and_then(|r| {
            if r > 1e-10 {
                Err(Error::NotHermitian { residual: r })
            } else {
                Ok(())
            }
        })?;
    }
    let psi = match &params.psi {
        Some(v) => vector_from_json(v)?.normalized()?,
        None if d == 2 => StateVector::from_real(&[0.6, 0.8])?,
        None => StateVector::basis(d, 0),
    };
    if psi.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: d,
            found: psi.dim(),
        });
    }
    Ok(Scenario {
        name: name.to_string(),
        family,
        hamiltonian,
        psi,
        horizon: DEFAULT_HORIZON,
        steps: DEFAULT_STEPS,
        pointer,
    })
}

/// V(y) = Π_y e^{−iE} with Π_y the eigenprojectors of B₀ in ascending
/// eigenvalue order.
pub fn sequential_family(b0: &Operator, e: &Operator) -> Result<ReductionFamily> {
    let resolution = projection_family(b0, DEFAULT_CLUSTER_TOL)?;
    let evolution = exp_i(e, -1.0)?;
    let ops = resolution
        .family
        .labels()
        .map(|y| Ok(resolution.family.operator(y)? * &evolution))
        .collect::<Result<Vec<_>>>()?;
    ReductionFamily::from_operators(ops)
}

impl ScenarioParams {
    fn present_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.theta.is_some() {
            out.push("theta");
        }
        if self.psi.is_some() {
            out.push("psi");
        }
        if self.hamiltonian.is_some() {
            out.push("hamiltonian");
        }
        if self.observable.is_some() {
            out.push("observable");
        }
        if self.phi.is_some() {
            out.push("phi");
        }
        if self.operators.is_some() {
            out.push("operators");
        }
        if self.weights.is_some() {
            out.push("weights");
        }
        out
    }
}

pub fn complex_from_json(c: &ComplexEntry) -> C64 {
    C64::new(c[0], c[1])
}

pub fn complex_to_json(c: C64) -> ComplexEntry {
    [c.re, c.im]
}

pub fn matrix_from_json(m: &ComplexMatrix) -> Result<Operator> {
    let rows: Vec<Vec<C64>> = m
        .iter()
        .map(|r| r.iter().map(complex_from_json).collect())
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyDimension);
    }
    Operator::from_rows(&rows)
}

pub fn matrix_to_json(op: &Operator) -> ComplexMatrix {
    (0..op.rows())
        .map(|i| {
            (0..op.cols())
                .map(|j| complex_to_json(op.get(i, j)))
                .collect()
        })
        .collect()
}

pub fn vector_from_json(v: &ComplexVector) -> Result<StateVector> {
    StateVector::new(v.iter().map(complex_from_json).collect())
}

pub fn vector_to_json(v: &StateVector) -> ComplexVector {
    v.amplitudes().iter().map(|&c| complex_to_json(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::verify_dilation;
    use crate::linalg::commutator_norm;
    use crate::reduction::validate_completeness;

    #[test]
    fn cat_defaults() {
        let s = build_scenario("cat", &ScenarioParams::default()).unwrap();
        assert_eq!(s.family, cat_projectors());
        assert_eq!(s.horizon, 3);
        assert_eq!(s.psi, StateVector::from_real(&[0.6, 0.8]).unwrap());
    }

    #[test]
    fn weak_qubit_is_complete() {
        let params = ScenarioParams {
            theta: Some(PI / 6.0),
            ..Default::default()
        };
        let s = build_scenario("weak-qubit", &params).unwrap();
        assert!(validate_completeness(&s.family) <= 1e-12);
    }

    #[test]
    fn sequential_observable_does_not_commute_across_steps() {
        let s = build_scenario("sequential-observable", &ScenarioParams::default()).unwrap();
        assert!(validate_completeness(&s.family) <= 1e-12);
        let v1 = s.family.operator(1).unwrap();
        let v2 = s.family.operator(2).unwrap();
        assert!(commutator_norm(v1, v2).unwrap() > 0.1);
        // Π_y e^{−iE} with Π_1 = |1⟩⟨1| (eigenvalue −1 first)
        let e = exp_i(&pauli::x().scale_real(PI / 4.0), -1.0).unwrap();
        let expected = &Operator::real_diagonal(&[0.0, 1.0]) * &e;
        assert!((v1 - &expected).max_abs() < 1e-12);
    }

    #[test]
    fn pointer_scenario_has_both_dilations() {
        let s = build_scenario("pointer-Zn", &ScenarioParams::default()).unwrap();
        assert_eq!(s.family.num_outcomes(), 2);
        let canon = s.dilation().unwrap();
        assert!(verify_dilation(&canon, &s.family).passes(1e-12));
        let shift = s.shift_dilation().unwrap().unwrap();
        let induced = shift.family().unwrap();
        for y in s.family.labels() {
            let diff = induced.operator(y).unwrap() - s.family.operator(y).unwrap();
            assert!(diff.max_abs() < 1e-12);
        }
    }

    #[test]
    fn every_scenario_builds_a_string() {
        for name in &SCENARIO_NAMES[..4] {
            let s = build_scenario(name, &ScenarioParams::default()).unwrap();
            let model = s.string_model(s.horizon).unwrap();
            assert_eq!(model.dim(), 1458);
        }
    }

    #[test]
    fn explicit_invalid_family_needs_unchecked_build() {
        let half = vec![vec![[0.5, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [0.5, 0.0]]];
        let params = ScenarioParams {
            operators: Some(vec![half.clone(), half]),
            ..Default::default()
        };
        assert!(matches!(
            build_scenario("explicit", &params),
            Err(Error::IncompleteFamily { .. })
        ));
        let s = build_scenario_unchecked("explicit", &params).unwrap();
        assert!((validate_completeness(&s.family) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            build_scenario("dog", &ScenarioParams::default()),
            Err(Error::UnknownScenario(_))
        ));
        let theta = ScenarioParams {
            theta: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            build_scenario("cat", &theta),
            Err(Error::InvalidParameter(_))
        ));
        let bad_psi = ScenarioParams {
            psi: Some(vec![[1.0, 0.0]; 3]),
            ..Default::default()
        };
        assert!(build_scenario("cat", &bad_psi).is_err());
        let zero_psi = ScenarioParams {
            psi: Some(vec![[0.0, 0.0]; 2]),
            ..Default::default()
        };
        assert!(build_scenario("cat", &zero_psi).is_err());
        let bad_x = ScenarioParams {
            observable: Some(vec![
                vec![[0.5, 0.0], [0.0, 0.0]],
                vec![[0.0, 0.0], [1.0, 0.0]],
            ]),
            ..Default::default()
        };
        assert!(matches!(
            build_scenario("pointer-Zn", &bad_x),
            Err(Error::NonIntegerSpectrum { .. })
        ));
        assert!(build_scenario("explicit", &ScenarioParams::default()).is_err());
    }

    #[test]
    fn params_json_roundtrip() {
        let params = ScenarioParams {
            theta: Some(0.25),
            psi: Some(vec![[0.6, 0.0], [0.0, 0.8]]),
            ..Default::default()
        };
        let json = serde_json::to_string(&params).unwrap();
        assert_eq!(json, r#"{"theta":0.25,"psi":[[0.6,0.0],[0.0,0.8]]}"#);
        let back: ScenarioParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, params);
        assert!(serde_json::from_str::<ScenarioParams>(r#"{"thetaa":1}"#).is_err());
    }

    #[test]
    fn matrix_json_roundtrip() {
        let y = pauli::y();
        assert_eq!(matrix_from_json(&matrix_to_json(&y)).unwrap(), y);
        assert!(matrix_from_json(&vec![vec![[1.0, 0.0]], vec![]]).is_err());
    }
}
