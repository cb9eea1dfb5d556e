//! Run configuration, read from a TOML file whose keys mirror [`RunConfig`].

use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stdlm_core::model::{Gamma, InitialState, InverseGamma, ModelConfig, PhasePrior, StationSet};
use stdlm_core::synthetic::coherent_initial_state;
use stdlm_core::DlmError;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Model settings shared by every chain of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub gamma: Gamma,
    pub prior_lambda: InverseGamma,
    pub prior_sigma2: InverseGamma,
    pub prior_a_mean: [f64; 2],
    /// Row-major 2 x 2.
    pub prior_a_cov: [[f64; 2]; 2],
    /// Block means of `x_0`: level, 24 h and 12 h coefficients.
    pub init_means: [f64; 3],
    pub init_variances: [f64; 3],
    /// Correlate the harmonic blocks of `C0` across sites with the state
    /// ranges instead of keeping them diagonal.
    pub spatial_prior: bool,
    pub mh_tuning: f64,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let r = ModelConfig::reference(1);
        ModelSection {
            gamma: r.gamma,
            prior_lambda: r.prior_lambda,
            prior_sigma2: r.prior_sigma2,
            prior_a_mean: [r.prior_a.mean[0], r.prior_a.mean[1]],
            prior_a_cov: [
                [r.prior_a.cov[(0, 0)], r.prior_a.cov[(0, 1)]],
                [r.prior_a.cov[(1, 0)], r.prior_a.cov[(1, 1)]],
            ],
            init_means: [2.85, -0.75, -0.08],
            init_variances: [1.0, 0.01, 0.01],
            spatial_prior: false,
            mh_tuning: r.mh_tuning,
            seed: r.seed,
            iterations: r.iterations,
            burn_in: r.burn_in,
        }
    }
}

impl ModelSection {
    /// Core configuration for the gauged `stations`.
    pub fn to_model_config(
        &self,
        stations: &StationSet,
        gamma: Gamma,
        thinning: usize,
    ) -> stdlm_core::Result<ModelConfig> {
        let c = self.prior_a_cov;
        let [v0, v1, v2] = self.init_variances;
        let init = if self.spatial_prior {
            if v1 != v2 {
                return Err(DlmError::Configuration(
                    "spatial_prior needs equal 24 h and 12 h initial variances".into(),
                ));
            }
            coherent_initial_state(stations.distances(), &gamma, self.init_means, v0, v1)?
        } else {
            InitialState::block_constant(stations.len(), self.init_means, self.init_variances)
        };
        Ok(ModelConfig {
            gamma,
            prior_lambda: self.prior_lambda,
            prior_sigma2: self.prior_sigma2,
            prior_a: PhasePrior {
                mean: Vector2::new(self.prior_a_mean[0], self.prior_a_mean[1]),
                cov: Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]),
            },
            init,
            mh_tuning: self.mh_tuning,
            seed: self.seed,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thinning,
        })
    }
}

/// How the panel is split into chains and how `lambda` is treated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Study {
    /// One chain over the whole panel; pooled coverage only.
    #[default]
    Single,
    /// One chain per block of `weeks` consecutive weeks.
    Weekly {
        #[serde(default = "one")]
        weeks: usize,
    },
    /// One chain over the whole panel; pooled and per-week coverage.
    FullSpan,
    /// One chain over the whole panel with `lambda` fixed per week.
    FixedLambda { lambdas: Vec<f64> },
    /// The evolution variances divided by `t_weeks` (the panel's week count
    /// when absent); `lambda` fixed per week when `lambdas` is given and
    /// sampled otherwise.
    TauScaled {
        #[serde(default)]
        t_weeks: Option<u32>,
        #[serde(default)]
        lambdas: Option<Vec<f64>>,
    },
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Single => "single",
            Study::Weekly { .. } => "weekly",
            Study::FullSpan => "full-span",
            Study::FixedLambda { .. } => "fixed-lambda",
            Study::TauScaled { .. } => "tau-scaled",
        }
    }

    fn lambdas(&self) -> Option<&Vec<f64>> {
        match self {
            Study::FixedLambda { lambdas } => Some(lambdas),
            Study::TauScaled { lambdas, .. } => lambdas.as_ref(),
            _ => None,
        }
    }

    /// Switches the study kind, keeping whatever settings carry over.
    pub fn with_mode(&self, mode: &str) -> Result<Study, ConfigError> {
        let lambdas = self.lambdas().cloned();
        Ok(match mode {
            "single" => Study::Single,
            "weekly" => match self {
                Study::Weekly { weeks } => Study::Weekly { weeks: *weeks },
                _ => Study::Weekly { weeks: 1 },
            },
            "full-span" => Study::FullSpan,
            "fixed-lambda" => Study::FixedLambda {
                lambdas: lambdas.ok_or_else(|| {
                    ConfigError::Invalid("fixed-lambda mode needs `study.lambdas` in the config".into())
                })?,
            },
            "tau-scaled" => match self {
                Study::TauScaled { .. } => self.clone(),
                _ => Study::TauScaled {
                    t_weeks: None,
                    lambdas,
                },
            },
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown mode `{other}` (expected single, weekly, full-span, fixed-lambda or tau-scaled)"
                )))
            }
        })
    }
}

/// A prediction site: a held-out station from the stations file when
/// `coord` is absent, otherwise a new location without truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UngaugedSpec {
    pub id: String,
    #[serde(default)]
    pub coord: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub stations: PathBuf,
    pub observations: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub study: Study,
    #[serde(default)]
    pub ungauged: Vec<UngaugedSpec>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Keep every `thinning`-th retained iteration for trajectories and
    /// predictive paths.
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

fn one() -> usize {
    1
}

fn default_levels() -> Vec<f64> {
    vec![0.8, 0.95]
}

fn default_thinning() -> usize {
    10
}

fn default_max_lag() -> usize {
    40
}

impl RunConfig {
    /// Reads a config; relative data paths are taken relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            for p in [
                &mut cfg.stations,
                &mut cfg.observations,
                &mut cfg.output_dir,
            ] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Command-line overrides of `--seed`, `--out` and `--mode`.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        out: Option<PathBuf>,
        mode: Option<&str>,
    ) -> Result<(), ConfigError> {
        if let Some(s) = seed {
            self.model.seed = s;
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        if let Some(m) = mode {
            self.study = self.study.with_mode(m)?;
        }
        Ok(())
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (what, p) in [
            ("stations", &self.stations),
            ("observations", &self.observations),
        ] {
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!(
                    "{what} file `{}` does not exist",
                    p.display()
                )));
            }
        }
        if self.levels.is_empty() {
            return Err(ConfigError::Invalid(
                "at least one nominal level is needed".into(),
            ));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(ConfigError::Invalid(format!(
                "nominal level {l} is outside (0, 1)"
            )));
        }
        if self.chains == 0 || self.thinning == 0 {
            return Err(ConfigError::Invalid(
                "chains and thinning must be at least 1".into(),
            ));
        }
        if self.model.iterations == 0 || self.model.burn_in >= self.model.iterations {
            return Err(ConfigError::Invalid(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.model.burn_in, self.model.iterations
            )));
        }
        let retained = self.model.iterations - self.model.burn_in;
        if !self.ungauged.is_empty() && retained < self.thinning {
            return Err(ConfigError::Invalid(format!(
                "{retained} retained iterations leave no predictive draw at thinning {}",
                self.thinning
            )));
        }
        match &self.study {
            Study::Weekly { weeks: 0 } => {
                return Err(ConfigError::Invalid(
                    "weekly blocks need at least one week".into(),
                ))
            }
            Study::TauScaled {
                t_weeks: Some(0), ..
            } => return Err(ConfigError::Invalid("t_weeks must be at least 1".into())),
            _ => {}
        }
        if let Some(ls) = self.study.lambdas() {
            if ls.is_empty() || ls.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(ConfigError::Invalid(
                    "fixed lambdas must be a non-empty list of positive values".into(),
                ));
            }
        }
        let mut ids: Vec<&str> = self.ungauged.iter().map(|u| u.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError::Invalid(format!(
                "ungauged site `{}` listed twice",
                w[0]
            )));
        }
        Ok(())
    }

    /// SHA-256 over every field except the output directory.
    pub fn semantic_hash(&self) -> String {
        let mut view = self.clone();
        view.output_dir = PathBuf::new();
        let json = serde_json::to_string(&view).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
stations = "s.csv"
observations = "o.csv"
output_dir = "out"
"#;

    #[test]
    fn defaults_fill_everything_but_paths() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.study, Study::Single);
        assert_eq!(c.levels, vec![0.8, 0.95]);
        assert_eq!(c.model.gamma, Gamma::reference());
        assert_eq!(c.model.prior_lambda.scale, 5.0);
        assert_eq!(c.chains, 1);
    }

    #[test]
    fn study_tables_parse() {
        let c = RunConfig::parse(&format!(
            "{MINIMAL}\n[study]\nkind = \"fixed-lambda\"\nlambdas = [20.0, 30.0]\n"
        ))
        .unwrap();
        assert_eq!(
            c.study,
            Study::FixedLambda {
                lambdas: vec![20.0, 30.0]
            }
        );
        let c = RunConfig::parse(&format!("{MINIMAL}\n[study]\nkind = \"weekly\"\n")).unwrap();
        assert_eq!(c.study, Study::Weekly { weeks: 1 });
        assert!(RunConfig::parse(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let a = RunConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.semantic_hash(), b.semantic_hash());
        b.model.seed = 2;
        assert_ne!(a.semantic_hash(), b.semantic_hash());
        let mut c = a.clone();
        c.levels = vec![0.8];
        assert_ne!(a.semantic_hash(), c.semantic_hash());
        let mut d = a.clone();
        d.model.gamma.tau_y2 *= 2.0;
        assert_ne!(a.semantic_hash(), d.semantic_hash());
    }

    #[test]
    fn mode_override_needs_lambdas_for_fixed_mode() {
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        assert!(c.apply_overrides(None, None, Some("fixed-lambda")).is_err());
        c.apply_overrides(Some(9), Some("x".into()), Some("tau-scaled"))
            .unwrap();
        assert_eq!(c.model.seed, 9);
        assert_eq!(
            c.study,
            Study::TauScaled {
                t_weeks: None,
                lambdas: None
            }
        );
        assert!(c.apply_overrides(None, None, Some("hourly")).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.study = Study::TauScaled {
            t_weeks: Some(17),
            lambdas: Some(vec![25.0; 17]),
        };
        c.ungauged = vec![
            UngaugedSpec {
                id: "s9".into(),
                coord: None,
            },
            UngaugedSpec {
                id: "new".into(),
                coord: Some([3.0, 4.0]),
            },
        ];
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }
}
