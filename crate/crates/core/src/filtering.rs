//! Sequential measurement on the system space alone.
//!
//! The filtered state ψ(t) = V(yᵗ)···V(y¹)ψ is linear in ψ; its squared norm
//! times Πμ is the prior probability of the record. Normalizing each step
//! gives the posterior recursion with its conditional probabilities.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::linalg::{Operator, StateVector, C64};
use crate::reduction::{
    apply_reduction, check_system_operator, operation_map, Label, ReductionFamily, ZERO_PROBABILITY,
};

/// Default limit on the number of enumerated sequences.
pub const DEFAULT_ENUMERATION_CAP: usize = 4096;

/// Trajectories drawn per generator stream.
pub const SAMPLE_BATCH: usize = 4096;

/// Name of the pseudo-random generator behind [`sample_trajectories`].
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha), stream = batch index";

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub outcomes: Vec<Label>,
    /// V(yᵗ)···V(y¹)ψ, unnormalized.
    pub filtered: StateVector,
    /// ‖filtered‖²·Π μ_{yᵏ}.
    pub weight: f64,
    /// filtered/‖filtered‖; the zero vector when the weight vanishes.
    pub posterior: StateVector,
}

impl Trajectory {
    fn start(psi: &StateVector) -> Self {
        Self {
            outcomes: Vec::new(),
            filtered: psi.clone(),
            weight: 1.0,
            posterior: psi.clone(),
        }
    }

    fn extend(&self, fam: &ReductionFamily, y: Label) -> Result<Self> {
        let filtered = filter_step(fam, &self.filtered, y)?;
        let weight = filtered.norm_sqr() * prefix_weight(fam, &self.outcomes)? * fam.weight(y)?;
        let posterior = if filtered.norm_sqr() > 0.0 {
            filtered.normalized()?
        } else {
            StateVector::zeros(filtered.dim())
        };
        let mut outcomes = self.outcomes.clone();
        outcomes.push(y);
        Ok(Self {
            outcomes,
            filtered,
            weight,
            posterior,
        })
    }
}

fn prefix_weight(fam: &ReductionFamily, outcomes: &[Label]) -> Result<f64> {
    outcomes.iter().map(|&y| fam.weight(y)).product()
}

/// ψ ↦ V(y)ψ.
pub fn filter_step(fam: &ReductionFamily, psi_prev: &StateVector, y: Label) -> Result<StateVector> {
    fam.require_complete_observation()?;
    fam.operator(y)?.apply(psi_prev)
}

/// One step of the normalized recursion: the posterior V(y)ψ/‖V(y)ψ‖ and the
/// conditional probability μ_y‖V(y)ψ‖².
pub fn posterior_step(
    fam: &ReductionFamily,
    post_prev: &StateVector,
    y: Label,
) -> Result<(StateVector, f64)> {
    fam.require_complete_observation()?;
    apply_reduction(fam, post_prev, y)
}

/// V(yᵗ)···V(y¹)ψ computed in one pass.
pub fn filtered_state(
    fam: &ReductionFamily,
    psi: &StateVector,
    outcomes: &[Label],
) -> Result<StateVector> {
    outcomes
        .iter()
        .try_fold(psi.clone(), |v, &y| filter_step(fam, &v, y))
}

/// Every record of length t with its trajectory.
#[derive(Clone, Debug)]
pub struct Prior {
    pub distribution: Distribution,
    /// Trajectories that survived pruning, in lexicographic order.
    pub trajectories: Vec<Trajectory>,
    /// Mass of branches cut at a prefix with weight ≤ 1e-14.
    pub pruned_mass: f64,
}

pub fn prior_distribution(fam: &ReductionFamily, psi: &StateVector, t: usize) -> Result<Prior> {
    prior_distribution_with_cap(fam, psi, t, DEFAULT_ENUMERATION_CAP)
}

pub fn prior_distribution_with_cap(
    fam: &ReductionFamily,
    psi: &StateVector,
    t: usize,
    cap: usize,
) -> Result<Prior> {
    fam.require_complete_observation()?;
    psi.require_normalized()?;
    check_system_operator_dim(fam, psi)?;
    let m = fam.num_outcomes();
    let count = u32::try_from(t).ok().and_then(|e| m.checked_pow(e));
    match count {
        Some(c) if c <= cap => {}
        _ => {
            return Err(Error::EnumerationCapExceeded {
                count: count.unwrap_or(usize::MAX),
                cap,
            })
        }
    }
    let mut level = vec![Trajectory::start(psi)];
    let mut pruned_mass = 0.0;
    for _ in 0..t {
        let mut next = Vec::with_capacity(level.len() * m);
        for traj in &level {
            for y in fam.labels() {
                let child = traj.extend(fam, y)?;
                if child.weight <= ZERO_PROBABILITY {
                    pruned_mass += child.weight;
                } else {
                    next.push(child);
                }
            }
        }
        level = next;
    }
    let distribution = level
        .iter()
        .map(|tr| (tr.outcomes.clone(), tr.weight))
        .collect();
    Ok(Prior {
        distribution,
        trajectories: level,
        pruned_mass,
    })
}

fn check_system_operator_dim(fam: &ReductionFamily, psi: &StateVector) -> Result<()> {
    if psi.dim() != fam.system_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: fam.system_dim(),
            found: psi.dim(),
        });
    }
    Ok(())
}

/// A sampled trajectory together with the conditional probabilities drawn
/// along it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub trajectory: Trajectory,
    pub conditional_probabilities: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Samples {
    pub samples: Vec<Sample>,
    /// Counts divided by the number of samples.
    pub frequencies: Distribution,
}

/// Draws `n` records of length `t` by the chain rule, each step picking y
/// with its exact conditional probability. Batches of [`SAMPLE_BATCH`] run
/// in parallel on independent streams of one seeded generator, so the
/// result depends only on `seed`.
pub fn sample_trajectories(
    fam: &ReductionFamily,
    psi: &StateVector,
    t: usize,
    n: usize,
    seed: u64,
) -> Result<Samples> {
    fam.require_complete_observation()?;
    psi.require_normalized()?;
    check_system_operator_dim(fam, psi)?;
    let batches = n.div_ceil(SAMPLE_BATCH);
    let samples: Vec<Sample> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let size = SAMPLE_BATCH.min(n - b * SAMPLE_BATCH);
            (0..size)
                .map(|_| sample_one(fam, psi, t, &mut rng))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut counts: BTreeMap<&[Label], usize> = BTreeMap::new();
    for s in &samples {
        *counts.entry(&s.trajectory.outcomes).or_default() += 1;
    }
    let frequencies = counts
        .into_iter()
        .map(|(k, c)| (k.to_vec(), c as f64 / n as f64))
        .collect();
    Ok(Samples {
        samples,
        frequencies,
    })
}

fn sample_one<R: Rng>(
    fam: &ReductionFamily,
    psi: &StateVector,
    t: usize,
    rng: &mut R,
) -> Result<Sample> {
    let mut traj = Trajectory::start(psi);
    let mut probs = Vec::with_capacity(t);
    for _ in 0..t {
        let candidates: Vec<(Label, f64)> = fam
            .labels()
            .map(|y| {
                let v = fam.operator(y)?.apply(&traj.posterior)?;
                Ok((y, fam.weight(y)? * v.norm_sqr()))
            })
            .collect::<Result<_>>()?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = None;
        for &(y, p) in &candidates {
            if p <= ZERO_PROBABILITY {
                continue;
            }
            acc += p;
            chosen = Some((y, p));
            if u < acc {
                break;
            }
        }
        let (y, p) = chosen.ok_or(Error::ZeroProbability { probability: 0.0 })?;
        traj = traj.extend(fam, y)?;
        probs.push(p);
    }
    Ok(Sample {
        trajectory: traj,
        conditional_probabilities: probs,
    })
}

/// Empirical against exact probability for one record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyRow {
    pub sequence: Vec<Label>,
    pub exact: f64,
    pub empirical: f64,
    /// Binomial standard deviation √(p(1−p)/n).
    pub sigma: f64,
    /// (empirical − exact)/σ; zero when both σ and the deviation vanish.
    pub z_score: f64,
}

/// Rows for the union of supports, in sequence order.
pub fn frequency_table(
    exact: &Distribution,
    empirical: &Distribution,
    n: usize,
) -> Vec<FrequencyRow> {
    let mut keys: Vec<Vec<Label>> = exact.iter().map(|(k, _)| k.clone()).collect();
    keys.extend(empirical.iter().map(|(k, _)| k.clone()));
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|k| {
            let p = exact.get(&k).clamp(0.0, 1.0);
            let f = empirical.get(&k);
            let sigma = (p * (1.0 - p) / n.max(1) as f64).sqrt();
            let dev = f - p;
            let z_score = if sigma > 0.0 {
                dev / sigma
            } else if dev.abs() <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            FrequencyRow {
                sequence: k,
                exact: p,
                empirical: f,
                sigma,
                z_score,
            }
        })
        .collect()
}

/// ⟨B⟩ at time t given the first r = `observed.len()` outcomes:
/// ψ†π(t, y, B)ψ / ψ†π(t, y, I)ψ, where π composes the operations of the
/// observed steps and sums the unobserved ones over all outcomes.
pub fn conditional_expectation(
    fam: &ReductionFamily,
    psi: &StateVector,
    b: &Operator,
    t: usize,
    observed: &[Label],
) -> Result<C64> {
    if observed.len() > t {
        return Err(Error::InvalidParameter(format!(
            "{} observed outcomes exceed {t} steps",
            observed.len()
        )));
    }
    check_system_operator(b, fam.system_dim(), "observable")?;
    check_system_operator_dim(fam, psi)?;
    let d = fam.system_dim();
    let mut num = b.clone();
    let mut den = Operator::identity(d);
    for k in (1..=t).rev() {
        if let Some(&y) = observed.get(k - 1) {
            let w = fam.weight(y)?;
            num = operation_map(fam, y, &num)?.scale_real(w);
            den = operation_map(fam, y, &den)?.scale_real(w);
        } else {
            let mut n_acc = Operator::zeros(d, d);
            let mut d_acc = Operator::zeros(d, d);
            for y in fam.labels() {
                let w = fam.weight(y)?;
                n_acc = &n_acc + &operation_map(fam, y, &num)?.scale_real(w);
                d_acc = &d_acc + &operation_map(fam, y, &den)?.scale_real(w);
            }
            num = n_acc;
            den = d_acc;
        }
    }
    let p = psi.inner(&den.apply(psi)?).re;
    if p <= ZERO_PROBABILITY {
        return Err(Error::ZeroProbability { probability: p });
    }
    Ok(psi.inner(&num.apply(psi)?) / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli, ONE};
    use crate::random;
    use crate::reduction::{cat_projectors, weak_qubit};
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cat_psi() -> StateVector {
        StateVector::from_real(&[0.6, 0.8]).unwrap()
    }

    #[test]
    fn filter_step_examples() {
        let cat = cat_projectors();
        let out = filter_step(&cat, &cat_psi(), 1).unwrap();
        assert_eq!(out, StateVector::from_real(&[0.6, 0.0]).unwrap());
        let two = filter_step(&cat, &out, 2).unwrap();
        assert_eq!(two.norm(), 0.0);
        let id = ReductionFamily::from_operators(vec![Operator::identity(2)]).unwrap();
        assert_eq!(filter_step(&id, &cat_psi(), 1).unwrap(), cat_psi());
        assert!(matches!(
            filter_step(&cat, &cat_psi(), 3),
            Err(Error::UnknownLabel(3))
        ));
    }

    #[test]
    fn posterior_step_examples() {
        let cat = cat_projectors();
        let (post, p) = posterior_step(&cat, &cat_psi(), 2).unwrap();
        assert!((p - 16.0 / 25.0).abs() < 1e-15);
        assert!(post.distance(&StateVector::basis(2, 1)) < 1e-15);
        let (_, again) = posterior_step(&cat, &post, 2).unwrap();
        assert!((again - 1.0).abs() < 1e-15);
        assert!(matches!(
            posterior_step(&cat, &post, 1),
            Err(Error::ZeroProbability { .. })
        ));
        let weak = weak_qubit(PI / 6.0);
        let (post, p) = posterior_step(&weak, &StateVector::basis(2, 0), 1).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        assert!(post.distance(&StateVector::basis(2, 0)) < 1e-15);
    }

    #[test]
    fn conditional_probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let fam = random::complete_family(&mut rng, 3, 4);
        let psi = random::state(&mut rng, 3);
        let total: f64 = fam
            .labels()
            .map(|y| posterior_step(&fam, &psi, y).map_or(0.0, |(_, p)| p))
            .sum();
        assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn prior_examples() {
        let cat = cat_projectors();
        let prior = prior_distribution(&cat, &cat_psi(), 2).unwrap();
        assert!((prior.distribution.get(&[1, 1]) - 9.0 / 25.0).abs() < 1e-15);
        assert!((prior.distribution.get(&[2, 2]) - 16.0 / 25.0).abs() < 1e-15);
        assert_eq!(prior.distribution.get(&[1, 2]), 0.0);
        assert_eq!(prior.distribution.len(), 2);
        assert_eq!(prior.pruned_mass, 0.0);

        let id = ReductionFamily::from_operators(vec![Operator::identity(2)]).unwrap();
        let prior = prior_distribution(&id, &cat_psi(), 4).unwrap();
        assert_eq!(prior.distribution.len(), 1);
        assert!((prior.distribution.get(&[1, 1, 1, 1]) - 1.0).abs() < 1e-15);

        let weak = weak_qubit(PI / 4.0);
        let prior = prior_distribution(&weak, &StateVector::basis(2, 0), 1).unwrap();
        assert!((prior.distribution.get(&[1]) - 0.5).abs() < 1e-15);
        assert!((prior.distribution.get(&[2]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prior_cap() {
        let cat = cat_projectors();
        assert!(matches!(
            prior_distribution(&cat, &cat_psi(), 13),
            Err(Error::EnumerationCapExceeded {
                count: 8192,
                cap: 4096
            })
        ));
        assert!(prior_distribution_with_cap(&cat, &cat_psi(), 13, 10_000).is_ok());
    }

    #[test]
    fn trajectories_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let fam = random::complete_family(&mut rng, 2, 3);
        let psi = random::state(&mut rng, 2);
        let prior = prior_distribution(&fam, &psi, 4).unwrap();
        assert!((prior.distribution.total() + prior.pruned_mass - 1.0).abs() <= 1e-10);
        for tr in &prior.trajectories {
            let direct = filtered_state(&fam, &psi, &tr.outcomes).unwrap();
            assert!(direct.distance(&tr.filtered) <= 1e-12);
            assert!((tr.posterior.norm() - 1.0).abs() <= 1e-12);
            assert!(tr.weight >= 0.0 && tr.weight <= 1.0 + 1e-10);
            // chain rule
            let mut post = psi.clone();
            let mut product = 1.0;
            for &y in &tr.outcomes {
                let (next, p) = posterior_step(&fam, &post, y).unwrap();
                product *= p;
                post = next;
            }
            assert!((product - tr.weight).abs() <= 1e-12);
            assert!(post.phase_infidelity(&tr.posterior) <= 1e-12);
        }
    }

    #[test]
    fn weighted_prior_is_normalized() {
        let cat = cat_projectors();
        let ops = cat
            .labels()
            .map(|y| cat.operator(y).unwrap().scale_real(0.5))
            .collect();
        let fam = ReductionFamily::weighted(ops, vec![4.0, 4.0]).unwrap();
        let prior = prior_distribution(&fam, &cat_psi(), 2).unwrap();
        assert!((prior.distribution.get(&[2, 2]) - 16.0 / 25.0).abs() < 1e-14);
        assert!((prior.distribution.total() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sampling_is_deterministic() {
        let weak = weak_qubit(PI / 6.0);
        let a = sample_trajectories(&weak, &cat_psi(), 3, 5000, 9).unwrap();
        let b = sample_trajectories(&weak, &cat_psi(), 3, 5000, 9).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.frequencies, b.frequencies);
        let c = sample_trajectories(&weak, &cat_psi(), 3, 5000, 10).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(sample_trajectories(&weak, &cat_psi(), 3, 0, 9)
            .unwrap()
            .samples
            .is_empty());
    }

    #[test]
    fn sampled_weights_follow_the_chain_rule() {
        let weak = weak_qubit(PI / 5.0);
        let s = sample_trajectories(&weak, &cat_psi(), 3, 200, 1).unwrap();
        for sample in &s.samples {
            let product: f64 = sample.conditional_probabilities.iter().product();
            assert!((product - sample.trajectory.weight).abs() <= 1e-12);
        }
    }

    #[test]
    fn deterministic_family_samples_identically() {
        let id = ReductionFamily::from_operators(vec![Operator::identity(2)]).unwrap();
        let s = sample_trajectories(&id, &cat_psi(), 3, 50, 2).unwrap();
        assert!(s
            .samples
            .iter()
            .all(|x| x.trajectory.outcomes == vec![1, 1, 1]));
        assert_eq!(s.frequencies.len(), 1);
    }

    #[test]
    fn cat_sampling_matches_binomial() {
        let n = 100_000;
        let s = sample_trajectories(&cat_projectors(), &cat_psi(), 1, n, 42).unwrap();
        let f = s.frequencies.get(&[1]);
        let sigma = (0.36f64 * 0.64 / n as f64).sqrt();
        assert!((f - 0.36).abs() <= 4.0 * sigma, "{f}");
        let exact = prior_distribution(&cat_projectors(), &cat_psi(), 1).unwrap();
        let table = frequency_table(&exact.distribution, &s.frequencies, n);
        assert_eq!(table.len(), 2);
        assert!(table.iter().all(|r| r.z_score.abs() <= 4.0));
    }

    #[test]
    fn frequency_table_degenerate_sigma() {
        let exact: Distribution = [(vec![1], 1.0)].into_iter().collect();
        let emp: Distribution = [(vec![1], 1.0)].into_iter().collect();
        let rows = frequency_table(&exact, &emp, 10);
        assert_eq!(rows[0].z_score, 0.0);
        let emp: Distribution = [(vec![2], 1.0)].into_iter().collect();
        let rows = frequency_table(&exact, &emp, 10);
        assert_eq!(rows.len(), 2);
        assert!(rows[1].z_score.is_infinite());
    }

    #[test]
    fn conditional_expectation_examples() {
        let weak = weak_qubit(PI / 6.0);
        let e0 = StateVector::basis(2, 0);
        let z = conditional_expectation(&weak, &e0, &pauli::z(), 1, &[]).unwrap();
        assert!((z - ONE).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let fam = random::complete_family(&mut rng, 3, 2);
        let psi = random::state(&mut rng, 3);
        let id = Operator::identity(3);
        for obs in [&[][..], &[1], &[2, 1]] {
            let v = conditional_expectation(&fam, &psi, &id, 3, obs).unwrap();
            assert!((v - ONE).norm() < 1e-12);
        }

        let cat = cat_projectors();
        let b = random::hermitian(&mut rng, 2);
        for y in cat.labels() {
            let (post, _) = apply_reduction(&cat, &cat_psi(), y).unwrap();
            let expected = post.inner(&b.apply(&post).unwrap());
            let got = conditional_expectation(&cat, &cat_psi(), &b, 1, &[y]).unwrap();
            assert!((got - expected).norm() < 1e-12);
        }
        assert!(conditional_expectation(&cat, &cat_psi(), &b, 1, &[1, 2]).is_err());
        let post = StateVector::basis(2, 0);
        assert!(matches!(
            conditional_expectation(&cat, &post, &b, 2, &[2]),
            Err(Error::ZeroProbability { .. })
        ));
    }

    #[test]
    fn tower_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let fam = random::complete_family(&mut rng, 2, 3);
        let psi = random::state(&mut rng, 2);
        let b = random::hermitian(&mut rng, 2);
        for t in 1..=3 {
            let prior = prior_distribution(&fam, &psi, t).unwrap();
            let mixed: C64 = prior
                .trajectories
                .iter()
                .map(|tr| tr.posterior.inner(&b.apply(&tr.posterior).unwrap()) * tr.weight)
                .sum();
            let direct = conditional_expectation(&fam, &psi, &b, t, &[]).unwrap();
            assert!((mixed - direct).norm() <= 1e-10);
            // partially observed prefix against the restricted mixture
            let prefix = [2];
            let restricted: Vec<_> = prior
                .trajectories
                .iter()
                .filter(|tr| tr.outcomes.starts_with(&prefix))
                .collect();
            let mass: f64 = restricted.iter().map(|tr| tr.weight).sum();
            let mixed: C64 = restricted
                .iter()
                .map(|tr| tr.posterior.inner(&b.apply(&tr.posterior).unwrap()) * tr.weight)
                .sum::<C64>()
                / mass;
            let direct = conditional_expectation(&fam, &psi, &b, t, &prefix).unwrap();
            assert!((mixed - direct).norm() <= 1e-10);
        }
    }

    #[test]
    fn hidden_index_conditional_expectation() {
        // y=1 hides two projectors; conditioning on it sums them
        let p0 = Operator::real_diagonal(&[1.0, 0.0, 0.0]);
        let p1 = Operator::real_diagonal(&[0.0, 1.0, 0.0]);
        let p2 = Operator::real_diagonal(&[0.0, 0.0, 1.0]);
        let fam = ReductionFamily::new(
            3,
            crate::reduction::OutcomeSet::counting(2).unwrap(),
            vec![vec![p0, p1], vec![p2]],
        )
        .unwrap();
        let psi = StateVector::from_real(&[0.6, 0.0, 0.8]).unwrap();
        let b = Operator::real_diagonal(&[1.0, 2.0, 3.0]);
        let got = conditional_expectation(&fam, &psi, &b, 1, &[1]).unwrap();
        assert!((got - ONE).norm() < 1e-14);
        let all = conditional_expectation(&fam, &psi, &b, 1, &[]).unwrap();
        assert!((all.re - (0.36 + 3.0 * 0.64)).abs() < 1e-14);
        assert!(filter_step(&fam, &psi, 1).is_err());
    }

    fn state_strategy(d: usize) -> impl Strategy<Value = StateVector> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d).prop_map(|v| {
            StateVector::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn filter_step_is_linear(
            a in state_strategy(3),
            b in state_strategy(3),
            alpha in (-2.0f64..2.0, -2.0f64..2.0),
            beta in (-2.0f64..2.0, -2.0f64..2.0),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fam = random::complete_family(&mut rng, 3, 3);
            let alpha = C64::new(alpha.0, alpha.1);
            let beta = C64::new(beta.0, beta.1);
            for y in fam.labels() {
                let combined = filter_step(&fam, &a.scale(alpha).add(&b.scale(beta)), y).unwrap();
                let separate = filter_step(&fam, &a, y).unwrap().scale(alpha)
                    .add(&filter_step(&fam, &b, y).unwrap().scale(beta));
                prop_assert!(combined.distance(&separate) <= 1e-12);
            }
        }

        #[test]
        fn prior_mass_is_one(seed in 0u64..1000, t in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fam = random::complete_family(&mut rng, 2, 2);
            let psi = random::state(&mut rng, 2);
            let prior = prior_distribution(&fam, &psi, t).unwrap();
            prop_assert!((prior.distribution.total() + prior.pruned_mass - 1.0).abs() <= 1e-10);
            prop_assert!(prior.pruned_mass <= 4096.0 * ZERO_PROBABILITY);
        }
    }
}
