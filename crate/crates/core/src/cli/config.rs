//! Run configuration: JSON file plus command-line overrides, resolved to a
//! canonical form that is hashed into every report.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scenarios::{ScenarioParams, DEFAULT_HORIZON, DEFAULT_STEPS};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 0;

/// Pass/fail thresholds. `--tol` replaces every residual threshold at once;
/// the z-score bound is separate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub completeness: f64,
    pub unitarity: f64,
    pub extraction: f64,
    pub normalization: f64,
    pub vacuum: f64,
    pub tv_distance: f64,
    pub posterior: f64,
    pub commutator: f64,
    pub z_score: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            completeness: 1e-9,
            unitarity: 1e-9,
            extraction: 1e-12,
            normalization: 1e-10,
            vacuum: 1e-12,
            tv_distance: 1e-9,
            posterior: 1e-9,
            commutator: 1e-9,
            z_score: 4.0,
        }
    }
}

impl Tolerances {
    pub fn uniform(&mut self, tol: f64) {
        let z = self.z_score;
        *self = Self {
            completeness: tol,
            unitarity: tol,
            extraction: tol,
            normalization: tol,
            vacuum: tol,
            tv_distance: tol,
            posterior: tol,
            commutator: tol,
            z_score: z,
        };
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// The file schema. Every field is optional; [`RunConfig::resolve`] fills
/// in defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

/// Values given on the command line, which win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub steps: Option<usize>,
    pub horizon: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<String>,
    pub format: Option<Format>,
}

/// A fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub params: ScenarioParams,
    pub steps: usize,
    pub horizon: usize,
    pub samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("no scenario given (use --scenario or a config file)")]
    MissingScenario,
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

impl RunConfig {
    pub fn resolve(file: ConfigFile, ov: &Overrides) -> Result<Self, ConfigError> {
        let scenario = ov
            .scenario
            .clone()
            .or(file.scenario)
            .ok_or(ConfigError::MissingScenario)?;
        let mut tolerances = file.tolerances.unwrap_or_default();
        if let Some(tol) = ov.tol {
            tolerances.uniform(tol);
        }
        let all = [
            ("tolerances.completeness", tolerances.completeness),
            ("tolerances.unitarity", tolerances.unitarity),
            ("tolerances.extraction", tolerances.extraction),
            ("tolerances.normalization", tolerances.normalization),
            ("tolerances.vacuum", tolerances.vacuum),
            ("tolerances.tv_distance", tolerances.tv_distance),
            ("tolerances.posterior", tolerances.posterior),
            ("tolerances.commutator", tolerances.commutator),
            ("tolerances.z_score", tolerances.z_score),
        ];
        for (field, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid {
                    field,
                    reason: format!("{v} is not a finite nonnegative number"),
                });
            }
        }
        let file_output = file.output.unwrap_or_default();
        let output = OutputSpec {
            path: ov.out.clone().or(file_output.path),
            format: ov.format.unwrap_or(file_output.format),
        };
        let horizon = ov.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON);
        if horizon == 0 {
            return Err(ConfigError::Invalid {
                field: "horizon",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self {
            scenario,
            params: file.params,
            steps: ov.steps.or(file.steps).unwrap_or(DEFAULT_STEPS),
            horizon,
            samples: ov.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES),
            seed: ov.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            tolerances,
            output,
        })
    }

    /// Canonical JSON: fixed field order, defaults filled in, compact.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON of everything except the output
    /// destination, which does not affect results.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.output = OutputSpec::default();
        hex::encode(Sha256::digest(hashed.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::resolve(
            ConfigFile::parse(r#"{"scenario":"cat"}"#).unwrap(),
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(cfg.steps, 3);
        assert_eq!(cfg.horizon, 3);
        assert_eq!(cfg.samples, DEFAULT_SAMPLES);
        assert_eq!(cfg.tolerances, Tolerances::default());
    }

    #[test]
    fn canonical_form_roundtrips() {
        let text = r#"{
            "scenario": "weak-qubit",
            "params": {"theta": 0.3, "psi": [[1, 0], [0, 1]]},
            "seed": 7,
            "tolerances": {"extraction": 1e-11},
            "output": {"format": "csv"}
        }"#;
        let cfg =
            RunConfig::resolve(ConfigFile::parse(text).unwrap(), &Overrides::default()).unwrap();
        let canon = cfg.canonical_json();
        let again: RunConfig = serde_json::from_str(&canon).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.canonical_json(), canon);
        // a canonical config is itself a valid config file
        let via_file =
            RunConfig::resolve(ConfigFile::parse(&canon).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(via_file, cfg);
        assert_eq!(cfg.tolerances.extraction, 1e-11);
        assert_eq!(cfg.tolerances.unitarity, 1e-9);
    }

    #[test]
    fn overrides_win() {
        let file = ConfigFile::parse(r#"{"scenario":"cat","steps":1,"seed":3}"#).unwrap();
        let ov = Overrides {
            scenario: Some("weak-qubit".into()),
            steps: Some(2),
            tol: Some(1e-6),
            out: Some("x.json".into()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(file, &ov).unwrap();
        assert_eq!(cfg.scenario, "weak-qubit");
        assert_eq!(cfg.steps, 2);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.tolerances.tv_distance, 1e-6);
        assert_eq!(cfg.tolerances.z_score, 4.0);
        assert_eq!(cfg.output.path.as_deref(), Some("x.json"));
    }

    #[test]
    fn hash_ignores_output_only() {
        let base = RunConfig::resolve(
            ConfigFile::parse(r#"{"scenario":"cat"}"#).unwrap(),
            &Overrides::default(),
        )
        .unwrap();
        let mut moved = base.clone();
        moved.output.path = Some("elsewhere.json".into());
        assert_eq!(base.hash(), moved.hash());
        let mut reseeded = base.clone();
        reseeded.seed = 1;
        assert_ne!(base.hash(), reseeded.hash());
        assert_eq!(base.hash().len(), 64);
    }

    #[test]
    fn parse_errors() {
        assert!(ConfigFile::parse("{").is_err());
        assert!(ConfigFile::parse(r#"{"scenari":"cat"}"#).is_err());
        assert!(ConfigFile::parse(r#"{"params":{"psi":[[1,0,0]]}}"#).is_err());
        assert!(matches!(
            RunConfig::resolve(ConfigFile::default(), &Overrides::default()),
            Err(ConfigError::MissingScenario)
        ));
        let ov = Overrides {
            scenario: Some("cat".into()),
            tol: Some(-1.0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(ConfigFile::default(), &ov).is_err());
    }
}
