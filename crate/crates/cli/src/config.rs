//! Experiment configuration: TOML in, validated and defaults resolved.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use nlprec::kernels::{Kernel, ReferenceFunction, Shape};
use nlprec::optimizers::{Method, RunConfig};
use nlprec::problems::{
    load_movielens, MatrixFactorization, Noiseless, PhaseRetrieval, Quadratic,
    SelfCalibratedCosh, StochasticOracle, TwoAtomQuadratic,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-run certificates that can be requested from a config.
pub const RUN_CERTIFICATES: [&str; 2] = ["momentum-sublinear", "momentum-linear"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    SelfcalCosh {
        dim: usize,
    },
    Quadratic {
        dim: usize,
    },
    TwoAtomQuadratic,
    MatrixFactorization {
        rank: usize,
        /// MovieLens `u.data`; a seeded Gaussian target is used when absent
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<PathBuf>,
        #[serde(default = "default_mf_rows")]
        rows: usize,
        #[serde(default = "default_mf_cols")]
        cols: usize,
        #[serde(default)]
        data_seed: u64,
    },
    PhaseRetrieval {
        n: usize,
        m: usize,
        #[serde(default)]
        data_seed: u64,
    },
}

fn default_mf_rows() -> usize {
    100
}

fn default_mf_cols() -> usize {
    80
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    pub gamma: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "one")]
    pub batch: usize,
    pub iterations: usize,
    /// defaults to 1 for deterministic methods and 10 for stochastic ones
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "unit")]
    pub init_scale: f64,
    #[serde(default)]
    pub record_time: bool,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_eta() -> f64 {
    0.000023
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub kernel: String,
    #[serde(default = "default_shape")]
    pub shape: String,
    #[serde(default = "unit")]
    pub scale: f64,
    #[serde(default = "unit")]
    pub eps: f64,
}

fn default_shape() -> String {
    "isotropic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certify: Vec<String>,
    pub problem: ProblemSpec,
    pub method: MethodSpec,
    pub reference: ReferenceSpec,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Parses and validates, resolving defaults.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Canonical TOML form; `from_toml(to_toml())` reproduces `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn method(&self) -> Method {
        self.method.name.parse().expect("validated")
    }

    /// Fills defaults and checks every constraint, naming the offending key.
    pub fn resolve(&mut self) -> Result<(), ConfigError> {
        let method: Method = self
            .method
            .name
            .parse()
            .map_err(|e: String| invalid("method.name", e))?;
        let m = &self.method;
        if !(m.gamma > 0.0 && m.gamma.is_finite()) {
            return Err(invalid("method.gamma", format!("must be positive, got {}", m.gamma)));
        }
        if !(0.0..1.0).contains(&m.beta) {
            return Err(invalid("method.beta", format!("must lie in [0, 1), got {}", m.beta)));
        }
        if m.batch == 0 {
            return Err(invalid("method.batch", "must be at least 1"));
        }
        if m.iterations == 0 {
            return Err(invalid("method.iterations", "must be at least 1"));
        }
        if m.eval_every == Some(0) {
            return Err(invalid("method.eval_every", "must be at least 1"));
        }
        if !(m.eta > 0.0 && m.eta.is_finite()) {
            return Err(invalid("method.eta", format!("must be positive, got {}", m.eta)));
        }
        if !(m.init_scale >= 0.0 && m.init_scale.is_finite()) {
            return Err(invalid("method.init_scale", "must be finite and non-negative"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        self.reference()?;
        self.validate_problem()?;
        for c in &self.certify {
            if !RUN_CERTIFICATES.contains(&c.as_str()) {
                return Err(invalid(
                    "certify",
                    format!("unknown certificate `{c}` (expected one of {RUN_CERTIFICATES:?})"),
                ));
            }
        }
        if self.certify.iter().any(|c| c == "momentum-sublinear") {
            if !matches!(method, Method::Npgm | Method::Mnpgm) {
                return Err(invalid("certify", "momentum-sublinear applies to npgm and mnpgm"));
            }
            if self.method.beta >= 0.5 {
                return Err(invalid(
                    "method.beta",
                    format!("momentum-sublinear needs beta < 0.5, got {}", self.method.beta),
                ));
            }
        }
        if self.certify.iter().any(|c| c == "momentum-linear") {
            if method != Method::Mnpgm {
                return Err(invalid("certify", "momentum-linear applies to mnpgm"));
            }
            if !(self.method.beta > 0.0 && self.method.beta < 0.5) {
                return Err(invalid(
                    "method.beta",
                    format!("momentum-linear needs beta in (0, 0.5), got {}", self.method.beta),
                ));
            }
        }
        if self.method.eval_every.is_none() {
            self.method.eval_every = Some(if method.is_stochastic() { 10 } else { 1 });
        }
        Ok(())
    }

    fn validate_problem(&self) -> Result<(), ConfigError> {
        match &self.problem {
            ProblemSpec::SelfcalCosh { dim } | ProblemSpec::Quadratic { dim } if *dim == 0 => {
                Err(invalid("problem.dim", "must be at least 1"))
            }
            ProblemSpec::MatrixFactorization { rank, data, rows, cols, .. } => {
                if data.is_none() && (*rank == 0 || *rank > (*rows).min(*cols)) {
                    return Err(invalid(
                        "problem.rank",
                        format!("must satisfy 1 <= rank <= min(rows, cols) = {}", rows.min(cols)),
                    ));
                }
                if *rank == 0 {
                    return Err(invalid("problem.rank", "must be at least 1"));
                }
                Ok(())
            }
            ProblemSpec::PhaseRetrieval { n, m, .. } if *n == 0 || *m == 0 => {
                Err(invalid("problem.n", "n and m must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn reference(&self) -> Result<ReferenceFunction, ConfigError> {
        let r = &self.reference;
        let params: Vec<f64> = if r.kernel == "log_barrier" { vec![r.eps] } else { vec![] };
        let kernel = Kernel::from_name(&r.kernel, &params).map_err(|e| {
            if r.kernel == "log_barrier" {
                invalid("reference.eps", e.to_string())
            } else {
                invalid("reference.kernel", e.to_string())
            }
        })?;
        let shape: Shape = r
            .shape
            .parse()
            .map_err(|e: nlprec::kernels::KernelError| invalid("reference.shape", e.to_string()))?;
        ReferenceFunction::new(kernel, shape, r.scale)
            .map_err(|e| invalid("reference.scale", e.to_string()))
    }

    pub fn run_config(&self) -> RunConfig {
        let m = &self.method;
        let method = self.method();
        RunConfig {
            method,
            gamma: m.gamma,
            beta: m.beta,
            batch: m.batch,
            iterations: m.iterations,
            eval_every: m.eval_every.unwrap_or(if method.is_stochastic() { 10 } else { 1 }),
            eta: m.eta,
            record_time: m.record_time,
        }
    }

    /// Instantiates the problem; data files are read here.
    pub fn build_problem(&self) -> Result<Box<dyn StochasticOracle>, anyhow::Error> {
        let problem: Box<dyn StochasticOracle> = match &self.problem {
            ProblemSpec::SelfcalCosh { dim } => Box::new(Noiseless(SelfCalibratedCosh::new(*dim)?)),
            ProblemSpec::Quadratic { dim } => Box::new(Noiseless(Quadratic::new(*dim)?)),
            ProblemSpec::TwoAtomQuadratic => Box::new(TwoAtomQuadratic::new()),
            ProblemSpec::MatrixFactorization {
                rank,
                data,
                rows,
                cols,
                data_seed,
            } => {
                let target = match data {
                    Some(path) => load_movielens(path)?,
                    None => MatrixFactorization::gaussian_target(*rows, *cols, 1.0, *data_seed),
                };
                Box::new(Noiseless(MatrixFactorization::new(target, *rank)?))
            }
            ProblemSpec::PhaseRetrieval { n, m, data_seed } => {
                Box::new(PhaseRetrieval::generate(*n, *m, *data_seed)?)
            }
        };
        if let Some(x0) = &self.method.x0 {
            if x0.len() != problem.dim() {
                return Err(invalid(
                    "method.x0",
                    format!("has length {}, problem dimension is {}", x0.len(), problem.dim()),
                )
                .into());
            }
        }
        Ok(problem)
    }

    /// Starting point: the configured `x0`, or the problem's seeded default.
    pub fn initial_point(&self, problem: &dyn StochasticOracle, seed: u64) -> Array1<f64> {
        match &self.method.x0 {
            Some(x0) => Array1::from(x0.clone()),
            None => nlprec::optimizers::seeded_initial_point(problem, seed, self.method.init_scale),
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seeds = [0]

[problem]
name = "selfcal_cosh"
dim = 2

[method]
name = "npgm"
gamma = 1.0
iterations = 100

[reference]
kernel = "cosh"
shape = "isotropic"
"#;

    #[test]
    fn minimal_config_is_valid() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.method(), Method::Npgm);
        assert_eq!(cfg.method.eval_every, Some(1));
        assert_eq!(cfg.run_config().iterations, 100);
        assert_eq!(cfg.problem, ProblemSpec::SelfcalCosh { dim: 2 });
        assert_eq!(cfg.reference().unwrap(), ReferenceFunction::isotropic(Kernel::Cosh));
    }

    #[test]
    fn movielens_style_config_is_valid() {
        let text = r#"
seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
output_dir = "out/movielens"

[problem]
name = "matrix_factorization"
rank = 10
data = "data/ml-100k/u.data"

[method]
name = "mnpgm"
gamma = 2.0
beta = 0.9
iterations = 1000

[reference]
kernel = "cosh"
shape = "isotropic"
scale = 100.0
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.reference().unwrap().scale(), 100.0);
        assert_eq!(cfg.method.beta, 0.9);
    }

    #[test]
    fn out_of_range_beta_names_the_key() {
        let text = MINIMAL.replace("gamma = 1.0", "gamma = 1.0\nbeta = 1.2");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
    }

    #[test]
    fn sublinear_certificate_needs_small_beta() {
        let text = MINIMAL
            .replace("\"npgm\"", "\"mnpgm\"")
            .replace("gamma = 1.0", "gamma = 1.0\nbeta = 0.6")
            .replace("seeds = [0]", "seeds = [0]\ncertify = [\"momentum-sublinear\"]");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
        assert!(ExperimentConfig::from_toml(&text.replace("beta = 0.6", "beta = 0.4")).is_ok());
        assert!(ExperimentConfig::from_toml(&text.replace("certify = [\"momentum-sublinear\"]", "")).is_ok());
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        let extra = MINIMAL.replace("dim = 2", "dim = 2\nsize = 3");
        assert!(ExperimentConfig::from_toml(&extra).unwrap_err().to_string().contains("size"));
        let missing = MINIMAL.replace("gamma = 1.0\n", "");
        assert!(ExperimentConfig::from_toml(&missing).unwrap_err().to_string().contains("gamma"));
        let mistyped = MINIMAL.replace("gamma = 1.0", "gamma = \"fast\"");
        assert!(ExperimentConfig::from_toml(&mistyped).is_err());
        let kernel = MINIMAL.replace("\"cosh\"", "\"sinh\"");
        assert!(ExperimentConfig::from_toml(&kernel).unwrap_err().to_string().contains("reference.kernel"));
        let eps = MINIMAL.replace("\"cosh\"", "\"log_barrier\"\neps = -1.0");
        assert!(ExperimentConfig::from_toml(&eps).unwrap_err().to_string().contains("reference.eps"));
        let seeds = MINIMAL.replace("seeds = [0]", "seeds = []");
        assert!(ExperimentConfig::from_toml(&seeds).unwrap_err().to_string().contains("seeds"));
    }

    #[test]
    fn emit_then_parse_round_trips() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.method.x0 = Some(vec![3.0, 0.0]);
        cfg.certify = vec!["momentum-sublinear".into()];
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let pr = ExperimentConfig::from_toml(
            &MINIMAL
                .replace("name = \"selfcal_cosh\"\ndim = 2", "name = \"phase_retrieval\"\nn = 20\nm = 6\ndata_seed = 3")
                .replace("\"npgm\"", "\"snpgm\""),
        )
        .unwrap();
        assert_eq!(pr.method.eval_every, Some(10));
        assert_eq!(ExperimentConfig::from_toml(&pr.to_toml()).unwrap(), pr);
    }

    #[test]
    fn x0_length_is_checked_against_problem() {
        let text = MINIMAL.replace("iterations = 100", "iterations = 100\nx0 = [1.0]");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let err = cfg.build_problem().err().expect("length mismatch");
        assert!(err.to_string().contains("method.x0"));
    }
}
