//! The truncated past/future pointer string.
//!
//! Tensor factors are ordered `[system, −0, +0, −1, +1, …, −(T−1), +(T−1)]`.
//! One step U scatters the system against site +0 with the dilation W and
//! then shifts the string: the scattered pointer becomes −0, every past
//! record moves one site further into the past, every future site moves one
//! site closer, and the oldest past slot is recycled into +(T−1). Within
//! T steps the recycled slot is still vacuum, so nothing observable depends
//! on the recycling.
//!
//! U is never stored densely. It is applied as a local operator followed by
//! a basis permutation, and Heisenberg operators are composed lazily; dense
//! matrices are produced only on request.

use std::collections::BTreeMap;
use std::fmt;

use crate::dilation::Dilation;
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::linalg::{
    spectral_norm, Commutator, DiagonalMap, Difference, FactorPermutation, FactorSpace, LinearMap,
    LocalOperator, MinusIdentity, Operator, Product, StateVector, C64, ONE, ZERO,
};
use crate::reduction::{check_system_operator, Label, ZERO_PROBABILITY};

/// Largest string-space dimension built unless overridden.
pub const DEFAULT_DIM_CAP: usize = 8192;

/// A site of the string: `Past(k)` is −k, `Future(k)` is +k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Past(usize),
    Future(usize),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Past(k) => write!(f, "-{k}"),
            Site::Future(k) => write!(f, "+{k}"),
        }
    }
}

/// A system operator times one operator per listed site, identity elsewhere.
#[derive(Clone, Debug)]
pub struct Decomposable {
    pub system: Operator,
    pub sites: Vec<(Site, Operator)>,
}

impl Decomposable {
    pub fn system_only(b: Operator) -> Self {
        Self {
            system: b,
            sites: Vec::new(),
        }
    }

    pub fn with_site(mut self, site: Site, op: Operator) -> Self {
        self.sites.push((site, op));
        self
    }
}

#[derive(Clone, Debug)]
pub struct StringModel {
    dilation: Dilation,
    horizon: usize,
    space: FactorSpace,
    interaction: LocalOperator,
    shift: FactorPermutation,
}

impl StringModel {
    pub fn build(dilation: Dilation, horizon: usize) -> Result<Self> {
        Self::build_with_cap(dilation, horizon, DEFAULT_DIM_CAP)
    }

    pub fn build_with_cap(dilation: Dilation, horizon: usize, cap: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let d = dilation.system_dim();
        let p = dilation.pointer_dim();
        let dim = u32::try_from(2 * horizon)
            .ok()
            .and_then(|e| p.checked_pow(e))
            .and_then(|x| x.checked_mul(d));
        match dim {
            Some(n) if n <= cap => {}
            _ => {
                return Err(Error::DimensionCapExceeded {
                    dim: dim.unwrap_or(usize::MAX),
                    cap,
                })
            }
        }
        let mut dims = vec![d];
        dims.extend(std::iter::repeat_n(p, 2 * horizon));
        let space = FactorSpace::new(dims)?;
        let interaction = LocalOperator::new(dilation.unitary(), &space, &[0, future_factor(0)])?;
        let shift = FactorPermutation::new(&space, &shift_destinations(horizon))?;
        Ok(Self {
            dilation,
            horizon,
            space,
            interaction,
            shift,
        })
    }

    pub fn dilation(&self) -> &Dilation {
        &self.dilation
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn system_dim(&self) -> usize {
        self.dilation.system_dim()
    }

    pub fn pointer_dim(&self) -> usize {
        self.dilation.pointer_dim()
    }

    /// Tensor factor holding `site`.
    pub fn factor(&self, site: Site) -> Result<usize> {
        match site {
            Site::Past(k) if k < self.horizon => Ok(past_factor(k)),
            Site::Future(k) if k < self.horizon => Ok(future_factor(k)),
            _ => Err(Error::SiteOutOfRange(site.to_string())),
        }
    }

    pub fn apply_step(&self, x: &[C64]) -> Vec<C64> {
        self.shift.apply(&self.interaction.apply(x))
    }

    pub fn apply_step_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.interaction.apply_adjoint(&self.shift.apply_adjoint(x))
    }

    /// U as a linear map.
    pub fn step(&self) -> Step<'_> {
        Step(self)
    }

    /// The free shift T, which is U with W replaced by the identity.
    pub fn free_shift(&self) -> &FactorPermutation {
        &self.shift
    }

    pub fn step_unitary_matrix(&self) -> Operator {
        self.step().to_operator()
    }

    pub fn free_shift_matrix(&self) -> Operator {
        self.shift.to_operator()
    }

    /// ‖U†U − I‖ and ‖UU† − I‖ estimated by power iteration.
    pub fn unitarity_residual(&self) -> f64 {
        let u = self.step();
        let adj = Adjoint(&u);
        let left = Product(vec![&adj, &u]);
        let right = Product(vec![&u, &adj]);
        spectral_norm(&MinusIdentity(&left)).max(spectral_norm(&MinusIdentity(&right)))
    }

    /// ψ ⊗ Φ° with every site in the vacuum.
    pub fn vacuum_state(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim(psi.dim(), self.system_dim(), "system state")?;
        let mut amps = vec![ZERO; self.dim()];
        let stride = self.space.stride(0);
        for (i, &a) in psi.amplitudes().iter().enumerate() {
            amps[i * stride] = a;
        }
        StateVector::new(amps)
    }

    /// U^t (ψ ⊗ Φ°).
    pub fn evolve(&self, psi: &StateVector, t: usize) -> Result<StateVector> {
        self.check_horizon(t)?;
        let start = self.vacuum_state(psi)?;
        let out = power(&self.step(), start.amplitudes().to_vec(), t as i64);
        StateVector::new(out)
    }

    /// Multiplication by the pointer label stored at `site`.
    pub fn pointer_observable(&self, site: Site) -> Result<DiagonalMap> {
        let f = self.factor(site)?;
        Ok(DiagonalMap(
            (0..self.dim())
                .map(|i| C64::new(self.space.digit(i, f) as f64, 0.0))
                .collect(),
        ))
    }

    /// |v⟩⟨v| at `site`.
    pub fn site_projector(&self, site: Site, v: usize) -> Result<DiagonalMap> {
        let f = self.factor(site)?;
        if v >= self.pointer_dim() {
            return Err(Error::UnknownLabel(v));
        }
        Ok(DiagonalMap(
            (0..self.dim())
                .map(|i| {
                    if self.space.digit(i, f) == v {
                        ONE
                    } else {
                        ZERO
                    }
                })
                .collect(),
        ))
    }

    /// B ⊗ I.
    pub fn system_operator(&self, b: &Operator) -> Result<LocalOperator> {
        check_system_operator(b, self.system_dim(), "system operator")?;
        LocalOperator::new(b, &self.space, &[0])
    }

    /// Embeds a decomposable operator on the string space.
    pub fn embed(&self, op: &Decomposable) -> Result<LocalOperator> {
        check_system_operator(&op.system, self.system_dim(), "system operator")?;
        let mut targets = vec![0];
        let mut local = op.system.clone();
        for (site, x) in &op.sites {
            targets.push(self.factor(*site)?);
            check_system_operator(x, self.pointer_dim(), "site operator")?;
            local = crate::linalg::tensor_product(&local, x);
        }
        LocalOperator::new(&local, &self.space, &targets)
    }

    /// U^{−t} A U^t as a lazy map; negative `t` runs the dynamics backwards.
    pub fn heisenberg<'a>(&'a self, a: &'a dyn LinearMap, t: i64) -> Result<Conjugation<'a>> {
        self.check_horizon(t.unsigned_abs() as usize)?;
        check_dim(a.nrows(), self.dim(), "string operator")?;
        Ok(Conjugation {
            unitary: Box::new(self.step()),
            op: a,
            power: t,
        })
    }

    /// U^{−t} A U^t as a dense matrix.
    pub fn heisenberg_transform(&self, a: &Operator, t: usize) -> Result<Operator> {
        self.check_horizon(t)?;
        check_dim(a.rows(), self.dim(), "string operator")?;
        a.require_square()?;
        let mut m = a.clone();
        for _ in 0..t {
            let x = map_columns(&m, |c| self.apply_step_adjoint(c));
            m = map_columns(&x.adjoint(), |c| self.apply_step_adjoint(c)).adjoint();
        }
        Ok(m)
    }

    /// ‖[A(t), B(r)]‖ for Heisenberg operators at (possibly negative) times.
    pub fn heisenberg_commutator(
        &self,
        a: &dyn LinearMap,
        t: i64,
        b: &dyn LinearMap,
        r: i64,
    ) -> Result<f64> {
        let at = self.heisenberg(a, t)?;
        let br = self.heisenberg(b, r)?;
        Ok(spectral_norm(&Commutator(&at, &br)))
    }

    /// ‖T^t Y_{−k} T^{−t} − U^t Y_{−k} U^{−t}‖: after t steps the record at
    /// −k has moved to −(k+t) whether or not the system scatters.
    pub fn check_shift_reversal(&self, t: usize, k: usize) -> Result<f64> {
        self.check_horizon(t)?;
        let y = self.pointer_observable(Site::Past(k))?;
        let free = Conjugation {
            unitary: Box::new(&self.shift),
            op: &y,
            power: -(t as i64),
        };
        let full = self.heisenberg(&y, -(t as i64))?;
        Ok(spectral_norm(&Difference(&free, &full)))
    }

    /// (‖[B(t), Y₋(r)]‖, ‖[Y₋(t), Y₋(r)]‖) for 0 ≤ r ≤ t ≤ T.
    pub fn check_nondemolition(&self, b: &Operator, t: usize, r: usize) -> Result<(f64, f64)> {
        if r > t {
            return Err(Error::InvalidParameter(format!(
                "nondemolition needs r <= t (r = {r}, t = {t})"
            )));
        }
        self.check_horizon(t)?;
        let bl = self.system_operator(b)?;
        let y = self.pointer_observable(Site::Past(0))?;
        let by = self.heisenberg_commutator(&bl, t as i64, &y, r as i64)?;
        let yy = self.heisenberg_commutator(&y, t as i64, &y, r as i64)?;
        Ok((by, yy))
    }

    /// Forward residual max ‖[U†AU, P]‖ and inverse violation
    /// max ‖[UAU†, P]‖ over generators A and past-site projectors P.
    ///
    /// Generators must be diagonal on past sites and on the recycled slot
    /// +(T−1), which becomes −(T−1) under U†·U.
    pub fn check_algebra_invariance(&self, generators: &[Decomposable]) -> Result<AlgebraReport> {
        let last = Site::Future(self.horizon - 1);
        for g in generators {
            for (site, x) in &g.sites {
                let needs_diagonal = matches!(site, Site::Past(_)) || *site == last;
                if needs_diagonal && !x.is_diagonal(1e-12) {
                    return Err(Error::InvalidParameter(format!(
                        "generator must be diagonal at site {site}"
                    )));
                }
            }
        }
        let projectors = (0..self.horizon)
            .flat_map(|k| (0..self.pointer_dim()).map(move |v| (k, v)))
            .map(|(k, v)| self.site_projector(Site::Past(k), v))
            .collect::<Result<Vec<_>>>()?;
        let mut report = AlgebraReport {
            forward_residual: 0.0,
            inverse_violation: 0.0,
        };
        for g in generators {
            let a = self.embed(g)?;
            let forward = self.heisenberg(&a, 1)?;
            let inverse = self.heisenberg(&a, -1)?;
            for p in &projectors {
                report.forward_residual = report
                    .forward_residual
                    .max(spectral_norm(&Commutator(&forward, p)));
                report.inverse_violation = report
                    .inverse_violation
                    .max(spectral_norm(&Commutator(&inverse, p)));
            }
        }
        Ok(report)
    }

    /// Joint distribution of the records (Y₋(1), …, Y₋(t)) in U^t(ψ⊗Φ°),
    /// read at sites −(t−1), …, −0, together with the conditional system
    /// states.
    pub fn joint_outcome_distribution(&self, psi: &StateVector, t: usize) -> Result<JointOutcomes> {
        psi.require_normalized()?;
        let state = self.evolve(psi, t)?;
        let d = self.system_dim();
        let read: Vec<usize> = (0..t).map(|r| past_factor(t - 1 - r)).collect();
        let mut distribution = Distribution::new();
        let mut off_configuration_mass = 0.0;
        let mut conditional: BTreeMap<Vec<Label>, Vec<C64>> = BTreeMap::new();
        for (i, a) in state.amplitudes().iter().enumerate() {
            let mass = a.norm_sqr();
            if mass == 0.0 {
                continue;
            }
            let seq: Vec<Label> = read.iter().map(|&f| self.space.digit(i, f)).collect();
            distribution.add(seq.clone(), mass);
            let outside_vacuum = (1..self.space.num_factors())
                .filter(|f| !read.contains(f))
                .all(|f| self.space.digit(i, f) == 0);
            if outside_vacuum {
                let sys = self.space.digit(i, 0);
                conditional.entry(seq).or_insert_with(|| vec![ZERO; d])[sys] = *a;
            } else {
                off_configuration_mass += mass;
            }
        }
        let vacuum_mass = distribution.mass_where(|s| s.contains(&0));
        let mut posteriors = BTreeMap::new();
        for (seq, amps) in conditional {
            if seq.contains(&0) {
                continue;
            }
            let v = StateVector::new(amps)?;
            if v.norm_sqr() > ZERO_PROBABILITY {
                posteriors.insert(seq, v.normalized()?);
            }
        }
        Ok(JointOutcomes {
            steps: t,
            distribution,
            vacuum_mass,
            off_configuration_mass,
            posteriors,
        })
    }

    /// The flip R exchanging sites −k ↔ +k.
    pub fn reflection(&self) -> Result<FactorPermutation> {
        let mut dest = vec![0];
        for k in 0..self.horizon {
            dest.push(future_factor(k));
            dest.push(past_factor(k));
        }
        FactorPermutation::new(&self.space, &dest)
    }

    /// Checks the flip R and the reversed causality condition
    /// [B(t), Y₊(r)] = 0 for −T ≤ t ≤ r ≤ 0 over all system matrix units B.
    pub fn reflect_and_reverse(&self) -> Result<ReflectionReport> {
        let r = self.reflection()?;
        let rr = Product(vec![&r, &r]);
        let involution = spectral_norm(&MinusIdentity(&rr));

        let mut vacuum_invariance: f64 = 0.0;
        for i in 0..self.system_dim() {
            let basis = StateVector::basis(self.system_dim(), i);
            let phi = self.vacuum_state(&basis)?;
            let out = StateVector::new(r.apply(phi.amplitudes()))?;
            vacuum_invariance = vacuum_invariance.max(out.distance(&phi));
        }

        let mut mirror: f64 = 0.0;
        for k in 0..self.horizon {
            let plus = self.pointer_observable(Site::Future(k))?;
            let minus = self.pointer_observable(Site::Past(k))?;
            let reflected = Product(vec![&r, &minus, &r]);
            mirror = mirror.max(spectral_norm(&Difference(&plus, &reflected)));
        }

        let y_plus = self.pointer_observable(Site::Future(0))?;
        let h = self.horizon as i64;
        let mut reversed_causality: f64 = 0.0;
        for b in matrix_units(self.system_dim()) {
            let bl = self.system_operator(&b)?;
            for t in -h..=0 {
                for rr in t..=0 {
                    let c = self.heisenberg_commutator(&bl, t, &y_plus, rr)?;
                    reversed_causality = reversed_causality.max(c);
                }
            }
        }
        Ok(ReflectionReport {
            involution,
            vacuum_invariance,
            mirror,
            reversed_causality,
        })
    }

    fn check_horizon(&self, t: usize) -> Result<()> {
        if t > self.horizon {
            return Err(Error::HorizonExceeded {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraReport {
    pub forward_residual: f64,
    pub inverse_violation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionReport {
    /// ‖R² − I‖
    pub involution: f64,
    /// max over system basis states of ‖R(e_i⊗Φ°) − e_i⊗Φ°‖
    pub vacuum_invariance: f64,
    /// max_k ‖Y₊ₖ − R Y₋ₖ R‖
    pub mirror: f64,
    /// max ‖[B(t), Y₊(r)]‖ over −T ≤ t ≤ r ≤ 0
    pub reversed_causality: f64,
}

/// Records read from the string after `steps` steps.
#[derive(Clone, Debug)]
pub struct JointOutcomes {
    pub steps: usize,
    /// Masses of all record sequences, vacuum entries included.
    pub distribution: Distribution,
    /// Mass on sequences containing the vacuum label 0.
    pub vacuum_mass: f64,
    /// Mass on configurations with a non-vacuum site outside the records.
    pub off_configuration_mass: f64,
    /// Normalized system state conditioned on each non-vacuum record with
    /// every other site in the vacuum.
    pub posteriors: BTreeMap<Vec<Label>, StateVector>,
}

/// U as a [`LinearMap`].
#[derive(Clone, Copy)]
pub struct Step<'a>(&'a StringModel);

impl LinearMap for Step<'_> {
    fn nrows(&self) -> usize {
        self.0.dim()
    }
    fn ncols(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.0.apply_step(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.0.apply_step_adjoint(y)
    }
}

struct Adjoint<'a>(&'a dyn LinearMap);

impl LinearMap for Adjoint<'_> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.0.apply_adjoint(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.0.apply(y)
    }
}

/// V^{−power} A V^{power} for a unitary V.
pub struct Conjugation<'a> {
    unitary: Box<dyn LinearMap + 'a>,
    op: &'a dyn LinearMap,
    power: i64,
}

impl LinearMap for Conjugation<'_> {
    fn nrows(&self) -> usize {
        self.op.nrows()
    }
    fn ncols(&self) -> usize {
        self.op.ncols()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let v = power(self.unitary.as_ref(), x.to_vec(), self.power);
        power(self.unitary.as_ref(), self.op.apply(&v), -self.power)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let v = power(self.unitary.as_ref(), y.to_vec(), self.power);
        power(
            self.unitary.as_ref(),
            self.op.apply_adjoint(&v),
            -self.power,
        )
    }
}

/// V^n x, with V^{−1} = V†.
fn power(v: &dyn LinearMap, mut x: Vec<C64>, n: i64) -> Vec<C64> {
    for _ in 0..n.unsigned_abs() {
        x = if n > 0 {
            v.apply(&x)
        } else {
            v.apply_adjoint(&x)
        };
    }
    x
}

fn map_columns(m: &Operator, f: impl Fn(&[C64]) -> Vec<C64>) -> Operator {
    let n = m.rows();
    let data = m.matrix().as_slice();
    let cols: Vec<C64> = (0..m.cols())
        .flat_map(|j| f(&data[j * n..(j + 1) * n]))
        .collect();
    Operator::from(nalgebra::DMatrix::from_column_slice(n, m.cols(), &cols))
}

fn check_dim(found: usize, expected: usize, context: &'static str) -> Result<()> {
    if found != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

fn past_factor(k: usize) -> usize {
    1 + 2 * k
}

fn future_factor(k: usize) -> usize {
    2 + 2 * k
}

fn shift_destinations(horizon: usize) -> Vec<usize> {
    let mut dest = vec![0; 1 + 2 * horizon];
    dest[future_factor(0)] = past_factor(0);
    for k in 0..horizon {
        dest[past_factor(k)] = if k + 1 < horizon {
            past_factor(k + 1)
        } else {
            future_factor(horizon - 1)
        };
        if k > 0 {
            dest[future_factor(k)] = future_factor(k - 1);
        }
    }
    dest
}

/// The d² matrix units |i⟩⟨j|.
pub fn matrix_units(d: usize) -> Vec<Operator> {
    (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| {
            let mut e = Operator::zeros(d, d);
            e.set(i, j, ONE);
            e
        })
        .collect()
}
