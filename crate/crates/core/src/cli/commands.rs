use std::fs;
use std::io::Write;

use serde::Serialize;

use super::config::{Format, RunConfig, Tolerances};
use crate::dilation::{reversed_family, verify_dilation};
use crate::distribution::{format_sequence, Distribution};
use crate::error::Error;
use crate::filtering::{
    frequency_table, prior_distribution, sample_trajectories, FrequencyRow, RNG_NAME,
};
use crate::linalg::{check_isometry, exp_i, Operator};
use crate::reduction::{validate_completeness, Label, ReductionFamily};
use crate::scenarios::{
    build_scenario, build_scenario_unchecked, vector_to_json, ComplexVector, Scenario,
};
use crate::string::{matrix_units, Decomposable, Site, StringModel};

const TOOL: &str = "eventum";
const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Probability above which a record's posterior is compared across pictures.
const POSTERIOR_MIN_PROBABILITY: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Simulate,
    Filter,
    Compare,
    Sample,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Simulate => "simulate",
            CommandKind::Filter => "filter",
            CommandKind::Compare => "compare",
            CommandKind::Sample => "sample",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error(transparent)]
pub struct CommandError(#[from] Error);

impl CommandError {
    /// Incomplete families and leaky reversals are failed checks; anything
    /// else means the input could not be run.
    pub fn exit_code(&self) -> i32 {
        match self.0 {
            Error::IncompleteFamily { .. } | Error::VacuumLeak { .. } => 1,
            _ => 2,
        }
    }
}

/// One thresholded residual.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn at_most(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.0.push(Check {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        });
    }

    fn failures(&self) -> Vec<String> {
        self.0
            .iter()
            .filter(|c| !c.passed)
            .map(|c| {
                format!(
                    "{} = {:e} exceeds tolerance {:e}",
                    c.name, c.value, c.tolerance
                )
            })
            .collect()
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    seed: u64,
    rng: &'static str,
    tolerances: &'a Tolerances,
    config: RunConfig,
    passed: bool,
    failures: &'a [String],
    checks: &'a [Check],
    result: T,
}

/// A finished command: the JSON report, an optional CSV table, and the
/// verdict.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub json: String,
    pub csv: String,
    pub passed: bool,
    pub failures: Vec<String>,
}

impl CommandOutput {
    /// Writes the report. With `--format csv` the table goes to the output
    /// path and the JSON report to the same path with `.json` appended.
    pub fn write(&self, config: &RunConfig) -> std::io::Result<()> {
        let path = config.output.path.as_deref();
        match (config.output.format, path) {
            (Format::Json, Some(p)) => fs::write(p, &self.json),
            (Format::Json, None) => std::io::stdout().write_all(self.json.as_bytes()),
            (Format::Csv, Some(p)) => {
                fs::write(p, &self.csv)?;
                fs::write(format!("{p}.json"), &self.json)
            }
            (Format::Csv, None) => std::io::stdout().write_all(self.csv.as_bytes()),
        }
    }
}

fn finish<T: Serialize>(
    kind: CommandKind,
    config: &RunConfig,
    checks: Checks,
    result: T,
    csv: String,
) -> CommandOutput {
    let failures = checks.failures();
    let passed = failures.is_empty();
    let mut embedded = config.clone();
    embedded.output = Default::default();
    let report = Report {
        tool: TOOL,
        version: VERSION,
        command: kind.name(),
        config_hash: config.hash(),
        seed: config.seed,
        rng: RNG_NAME,
        tolerances: &config.tolerances,
        config: embedded,
        passed,
        failures: &failures,
        checks: &checks.0,
        result,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    CommandOutput {
        json,
        csv,
        passed,
        failures,
    }
}

pub fn execute(
    kind: CommandKind,
    config: &RunConfig,
    cap: usize,
) -> Result<CommandOutput, CommandError> {
    match kind {
        CommandKind::Validate => validate(config, cap),
        CommandKind::Simulate => simulate(config, cap),
        CommandKind::Filter => filter(config),
        CommandKind::Compare => compare(config, cap),
        CommandKind::Sample => sample(config),
    }
}

fn scenario(config: &RunConfig) -> Result<Scenario, CommandError> {
    Ok(build_scenario(&config.scenario, &config.params)?)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_table(header: &[String], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn checks_csv(checks: &Checks) -> String {
    let header = ["check", "value", "tolerance", "passed"].map(String::from);
    let rows = checks
        .0
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                fmt(c.value),
                fmt(c.tolerance),
                c.passed.to_string(),
            ]
        })
        .collect();
    csv_table(&header, rows)
}

#[derive(Serialize)]
struct ValidateResult {
    scenario: String,
    system_dim: usize,
    outcomes: usize,
    dilation_error: Option<String>,
}

fn validate(config: &RunConfig, cap: usize) -> Result<CommandOutput, CommandError> {
    let s = build_scenario_unchecked(&config.scenario, &config.params)?;
    let tol = &config.tolerances;
    let mut checks = Checks::default();
    checks.at_most(
        "completeness",
        validate_completeness(&s.family),
        tol.completeness,
    );
    let mut dilation_error = None;
    match s.dilation() {
        Ok(dil) => {
            let report = verify_dilation(&dil, &s.family);
            checks.at_most("dilation.unitarity", report.unitarity, tol.unitarity);
            checks.at_most("dilation.co_unitarity", report.co_unitarity, tol.unitarity);
            checks.at_most("dilation.vacuum_block", report.vacuum_block, tol.extraction);
            checks.at_most("dilation.extraction", report.extraction, tol.extraction);
            let rev = reversed_family(&dil)?;
            checks.at_most(
                "reversal.completeness",
                validate_completeness(&rev),
                tol.completeness,
            );
            checks.at_most(
                "reversal.identity",
                reversal_residual(&s.family, &rev, &s.evolution())?,
                tol.extraction,
            );
            match StringModel::build_with_cap(dil, config.horizon, cap) {
                Ok(model) => checks.at_most(
                    "string.unitarity",
                    model.unitarity_residual(),
                    tol.unitarity,
                ),
                Err(e) => dilation_error = Some(e.to_string()),
            }
        }
        Err(e) => dilation_error = Some(e.to_string()),
    }
    if let Some(shift) = s.shift_dilation() {
        let shift = shift?;
        checks.at_most(
            "shift_dilation.unitarity",
            check_isometry(shift.dilation.unitary()),
            tol.unitarity,
        );
        let induced = shift.family()?;
        let mut diff: f64 = 0.0;
        for y in s.family.labels() {
            diff = diff.max((induced.operator(y)? - s.family.operator(y)?).norm());
        }
        checks.at_most("shift_dilation.extraction", diff, tol.extraction);
    }
    let csv = checks_csv(&checks);
    let result = ValidateResult {
        scenario: s.name.clone(),
        system_dim: s.system_dim(),
        outcomes: s.family.num_outcomes(),
        dilation_error,
    };
    Ok(finish(CommandKind::Validate, config, checks, result, csv))
}

/// max_y ‖V*(y) − e^{iE}V(y)e^{iE}‖.
pub fn reversal_residual(
    fam: &ReductionFamily,
    rev: &ReductionFamily,
    e: &Operator,
) -> crate::Result<f64> {
    let u = exp_i(e, 1.0)?;
    let mut worst: f64 = 0.0;
    for y in fam.labels() {
        let expected = &(&u * fam.operator(y)?) * &u;
        worst = worst.max((rev.operator(y)? - &expected).norm());
    }
    Ok(worst)
}

#[derive(Serialize)]
struct PosteriorEntry {
    sequence: Vec<Label>,
    probability: f64,
    posterior: ComplexVector,
}

#[derive(Serialize)]
struct SimulateResult {
    scenario: String,
    steps: usize,
    horizon: usize,
    dimension: usize,
    total_mass: f64,
    vacuum_mass: f64,
    off_configuration_mass: f64,
    distribution: Distribution,
    posteriors: Vec<PosteriorEntry>,
}

fn simulate(config: &RunConfig, cap: usize) -> Result<CommandOutput, CommandError> {
    let s = scenario(config)?;
    let model = s.string_model_with_cap(config.horizon, cap)?;
    let joint = model.joint_outcome_distribution(&s.psi, config.steps)?;
    let tol = &config.tolerances;
    let mut checks = Checks::default();
    let total = joint.distribution.total();
    checks.at_most("normalization", (total - 1.0).abs(), tol.normalization);
    checks.at_most("vacuum_mass", joint.vacuum_mass, tol.vacuum);
    checks.at_most(
        "off_configuration_mass",
        joint.off_configuration_mass,
        tol.vacuum,
    );
    let posteriors = joint
        .posteriors
        .iter()
        .map(|(seq, v)| PosteriorEntry {
            sequence: seq.clone(),
            probability: joint.distribution.get(seq),
            posterior: vector_to_json(v),
        })
        .collect();
    let csv = distribution_csv(&joint.distribution);
    let result = SimulateResult {
        scenario: s.name.clone(),
        steps: config.steps,
        horizon: config.horizon,
        dimension: model.dim(),
        total_mass: total,
        vacuum_mass: joint.vacuum_mass,
        off_configuration_mass: joint.off_configuration_mass,
        distribution: joint.distribution,
        posteriors,
    };
    Ok(finish(CommandKind::Simulate, config, checks, result, csv))
}

fn distribution_csv(d: &Distribution) -> String {
    let header = ["sequence", "probability"].map(String::from);
    let rows = d
        .iter()
        .map(|(k, p)| vec![format_sequence(k), fmt(p)])
        .collect();
    csv_table(&header, rows)
}

#[derive(Serialize)]
struct FilterResult {
    scenario: String,
    steps: usize,
    total_mass: f64,
    pruned_mass: f64,
    distribution: Distribution,
    posteriors: Vec<PosteriorEntry>,
}

fn filter(config: &RunConfig) -> Result<CommandOutput, CommandError> {
    let s = scenario(config)?;
    let prior = prior_distribution(&s.family, &s.psi, config.steps)?;
    let tol = &config.tolerances;
    let mut checks = Checks::default();
    let total = prior.distribution.total();
    checks.at_most(
        "normalization",
        (total + prior.pruned_mass - 1.0).abs(),
        tol.normalization,
    );
    let norm_err = prior
        .trajectories
        .iter()
        .map(|t| (t.posterior.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    checks.at_most("posterior_norm", norm_err, tol.normalization);

    let d = s.system_dim();
    let mut header = vec!["sequence".to_string(), "probability".to_string()];
    for i in 0..d {
        header.push(format!("posterior_re_{i}"));
        header.push(format!("posterior_im_{i}"));
    }
    let rows = prior
        .trajectories
        .iter()
        .map(|t| {
            let mut row = vec![format_sequence(&t.outcomes), fmt(t.weight)];
            for a in t.posterior.amplitudes() {
                row.push(fmt(a.re));
                row.push(fmt(a.im));
            }
            row
        })
        .collect();
    let csv = csv_table(&header, rows);
    let posteriors = prior
        .trajectories
        .iter()
        .map(|t| PosteriorEntry {
            sequence: t.outcomes.clone(),
            probability: t.weight,
            posterior: vector_to_json(&t.posterior),
        })
        .collect();
    let result = FilterResult {
        scenario: s.name.clone(),
        steps: config.steps,
        total_mass: total,
        pruned_mass: prior.pruned_mass,
        distribution: prior.distribution,
        posteriors,
    };
    Ok(finish(CommandKind::Filter, config, checks, result, csv))
}

#[derive(Serialize)]
struct SequenceComparison {
    sequence: Vec<Label>,
    string_probability: f64,
    filter_probability: f64,
    /// 1 − |⟨a|b⟩|, absent below the comparison threshold.
    posterior_infidelity: Option<f64>,
}

#[derive(Serialize)]
struct NondemolitionRow {
    t: usize,
    r: usize,
    system_record: f64,
    record_record: f64,
}

#[derive(Serialize)]
struct ShiftRow {
    site: String,
    t: usize,
    residual: f64,
}

#[derive(Serialize)]
struct CompareResult {
    scenario: String,
    steps: usize,
    horizon: usize,
    tv_distance: f64,
    sequences: Vec<SequenceComparison>,
    nondemolition: Vec<NondemolitionRow>,
    shift_reversal: Vec<ShiftRow>,
    algebra_forward_residual: f64,
    algebra_inverse_violation: f64,
    reflection_involution: f64,
    reflection_vacuum: f64,
    reflection_mirror: f64,
    reversed_causality: f64,
}

/// X on pointer levels {0, 1}, identity above.
pub fn pointer_flip(p: usize) -> Operator {
    Operator::from_fn(p, p, |i, j| {
        let hit = match (i, j) {
            (0, 1) | (1, 0) => true,
            (i, j) => i == j && i >= 2,
        };
        if hit {
            crate::linalg::ONE
        } else {
            crate::linalg::ZERO
        }
    })
}

/// Decomposable generators used by `compare`: every system matrix unit
/// times the record at −0, and a pointer flip on +0 when +0 is not the
/// recycled slot.
pub fn default_generators(model: &StringModel) -> Vec<Decomposable> {
    let p = model.pointer_dim();
    let labels = Operator::real_diagonal(&(0..p).map(|v| v as f64).collect::<Vec<_>>());
    let mut gens: Vec<Decomposable> = matrix_units(model.system_dim())
        .into_iter()
        .map(|b| Decomposable::system_only(b).with_site(Site::Past(0), labels.clone()))
        .collect();
    if model.horizon() >= 2 {
        gens.push(
            Decomposable::system_only(Operator::identity(model.system_dim()))
                .with_site(Site::Future(0), pointer_flip(p)),
        );
    }
    gens
}

fn compare(config: &RunConfig, cap: usize) -> Result<CommandOutput, CommandError> {
    let s = scenario(config)?;
    let model = s.string_model_with_cap(config.horizon, cap)?;
    let t_steps = config.steps;
    let joint = model.joint_outcome_distribution(&s.psi, t_steps)?;
    let prior = prior_distribution(&s.family, &s.psi, t_steps)?;
    let tol = &config.tolerances;
    let mut checks = Checks::default();

    let tv = joint.distribution.tv_distance(&prior.distribution);
    checks.at_most("tv_distance", tv, tol.tv_distance);
    checks.at_most("vacuum_mass", joint.vacuum_mass, tol.vacuum);

    let mut sequences = Vec::new();
    let mut worst_posterior: f64 = 0.0;
    let mut keys: Vec<Vec<Label>> = joint
        .distribution
        .iter()
        .map(|(k, _)| k.clone())
        .filter(|k| !k.contains(&0))
        .collect();
    keys.extend(prior.distribution.iter().map(|(k, _)| k.clone()));
    keys.sort();
    keys.dedup();
    for k in keys {
        let ps = joint.distribution.get(&k);
        let pf = prior.distribution.get(&k);
        let infidelity = if pf > POSTERIOR_MIN_PROBABILITY {
            let filtered = prior
                .trajectories
                .iter()
                .find(|t| t.outcomes == k)
                .map(|t| &t.posterior);
            match (joint.posteriors.get(&k), filtered) {
                (Some(a), Some(b)) => Some(a.phase_infidelity(b)),
                _ => Some(1.0),
            }
        } else {
            None
        };
        if let Some(x) = infidelity {
            worst_posterior = worst_posterior.max(x);
        }
        sequences.push(SequenceComparison {
            sequence: k,
            string_probability: ps,
            filter_probability: pf,
            posterior_infidelity: infidelity,
        });
    }
    checks.at_most("posterior_infidelity", worst_posterior, tol.posterior);

    let horizon = model.horizon();
    let mut nondemolition = Vec::new();
    let units = matrix_units(s.system_dim());
    for t in 0..=horizon {
        for r in 0..=t {
            let mut by: f64 = 0.0;
            let mut yy: f64 = 0.0;
            for b in &units {
                let (x, y) = model.check_nondemolition(b, t, r)?;
                by = by.max(x);
                yy = yy.max(y);
            }
            nondemolition.push(NondemolitionRow {
                t,
                r,
                system_record: by,
                record_record: yy,
            });
        }
    }
    let worst_nd = nondemolition
        .iter()
        .map(|r| r.system_record.max(r.record_record))
        .fold(0.0, f64::max);
    checks.at_most("nondemolition", worst_nd, tol.commutator);

    let mut shift_reversal = Vec::new();
    for k in 0..horizon {
        for t in 0..=horizon {
            shift_reversal.push(ShiftRow {
                site: Site::Past(k).to_string(),
                t,
                residual: model.check_shift_reversal(t, k)?,
            });
        }
    }
    let worst_shift = shift_reversal
        .iter()
        .map(|r| r.residual)
        .fold(0.0, f64::max);
    checks.at_most("shift_reversal", worst_shift, tol.commutator);

    let algebra = model.check_algebra_invariance(&default_generators(&model))?;
    checks.at_most("algebra_forward", algebra.forward_residual, tol.commutator);

    let reflection = model.reflect_and_reverse()?;
    checks.at_most(
        "reflection_involution",
        reflection.involution,
        tol.commutator,
    );
    checks.at_most(
        "reflection_vacuum",
        reflection.vacuum_invariance,
        tol.commutator,
    );
    checks.at_most("reflection_mirror", reflection.mirror, tol.commutator);
    checks.at_most(
        "reversed_causality",
        reflection.reversed_causality,
        tol.commutator,
    );

    let header = [
        "sequence",
        "string_probability",
        "filter_probability",
        "posterior_infidelity",
    ]
    .map(String::from);
    let rows = sequences
        .iter()
        .map(|c| {
            vec![
                format_sequence(&c.sequence),
                fmt(c.string_probability),
                fmt(c.filter_probability),
                c.posterior_infidelity.map(fmt).unwrap_or_default(),
            ]
        })
        .collect();
    let csv = csv_table(&header, rows);
    let result = CompareResult {
        scenario: s.name.clone(),
        steps: t_steps,
        horizon,
        tv_distance: tv,
        sequences,
        nondemolition,
        shift_reversal,
        algebra_forward_residual: algebra.forward_residual,
        algebra_inverse_violation: algebra.inverse_violation,
        reflection_involution: reflection.involution,
        reflection_vacuum: reflection.vacuum_invariance,
        reflection_mirror: reflection.mirror,
        reversed_causality: reflection.reversed_causality,
    };
    Ok(finish(CommandKind::Compare, config, checks, result, csv))
}

#[derive(Serialize)]
struct SampleResult {
    scenario: String,
    steps: usize,
    samples: usize,
    max_abs_z: f64,
    table: Vec<FrequencyRow>,
}

fn sample(config: &RunConfig) -> Result<CommandOutput, CommandError> {
    let s = scenario(config)?;
    let exact = prior_distribution(&s.family, &s.psi, config.steps)?;
    let drawn = sample_trajectories(&s.family, &s.psi, config.steps, config.samples, config.seed)?;
    let table = frequency_table(&exact.distribution, &drawn.frequencies, config.samples);
    let max_abs_z = table.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    let mut checks = Checks::default();
    if config.samples > 0 {
        checks.at_most("max_abs_z_score", max_abs_z, config.tolerances.z_score);
    }
    let header = ["sequence", "exact", "empirical", "sigma", "z_score"].map(String::from);
    let rows = table
        .iter()
        .map(|r| {
            vec![
                format_sequence(&r.sequence),
                fmt(r.exact),
                fmt(r.empirical),
                fmt(r.sigma),
                fmt(r.z_score),
            ]
        })
        .collect();
    let csv = csv_table(&header, rows);
    let result = SampleResult {
        scenario: s.name.clone(),
        steps: config.steps,
        samples: config.samples,
        max_abs_z,
        table,
    };
    Ok(finish(CommandKind::Sample, config, checks, result, csv))
}
