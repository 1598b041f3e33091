//! The experiment document: one nested TOML file holding every module's
//! configuration. Missing keys fall back to the defaults below.
//!
//! ```toml
//! seed = 7
//! folds = 2
//!
//! [synth]
//! n_flows = 2000
//!
//! [hyper]
//! embed_dim = 32
//!
//! [federation]
//! rounds = 2
//! ```
//!
//! The top-level `seed` is propagated into the generator, training and
//! client-selection seeds; `hyper.extract_depth` is the depth cap of the
//! trainer; `synth.n_clients` fixes the client population.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{self, read_flows, DataError, FlowRecord, SynthSpec};
use crate::federation::{split_public, FederationConfig, FederationData};
use crate::dataio::flows::read_jsonl;
use crate::pipeline::{Featurizer, HyperParams, PipelineError};
use crate::seed;
use crate::trainer::{ModelSpec, TrainConfig, TrainContext};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Data { path: PathBuf, source: DataError },
    #[error(transparent)]
    Synth(#[from] DataError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Values swept along each harness axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepValues {
    pub embed_dim: Vec<usize>,
    pub extract_depth: Vec<usize>,
    pub support_size: Vec<usize>,
}

impl Default for SweepValues {
    fn default() -> Self {
        SweepValues { embed_dim: vec![16, 32, 64], extract_depth: vec![3, 5, 7], support_size: vec![100, 200, 300] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Cross-validation folds of the sweep harness.
    pub folds: usize,
    /// Share of `D_g` held out as the test split in single training runs.
    pub test_fraction: f64,
    /// Share of the remaining `D_g` used for validation.
    pub validation_fraction: f64,
    /// Directory with `d_g.jsonl`, `d_ps_<i>.jsonl`, `d_a.jsonl`,
    /// `d_r.jsonl`; synthesized from `[synth]` when absent.
    pub data_dir: Option<PathBuf>,
    /// Encoded parameter file replacing the seeded initial model.
    pub init_params: Option<PathBuf>,
    pub synth: SynthSpec,
    pub hyper: HyperParams,
    pub train: TrainConfig,
    pub model: ModelSpec,
    pub federation: FederationConfig,
    pub sweep: SweepValues,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            folds: 10,
            test_fraction: 0.2,
            validation_fraction: 0.2,
            data_dir: None,
            init_params: None,
            synth: SynthSpec::default(),
            hyper: HyperParams::default(),
            train: TrainConfig::default(),
            model: ModelSpec::default(),
            federation: FederationConfig::default(),
            sweep: SweepValues::default(),
        }
    }
}

/// The four dataset files of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Datasets {
    pub public: Vec<FlowRecord>,
    pub private: Vec<Vec<FlowRecord>>,
    pub actions: Vec<dataio::ActionRecord>,
    pub relations: Vec<dataio::RelationRecord>,
}

pub const PUBLIC_FILE: &str = "d_g.jsonl";
pub const ACTIONS_FILE: &str = "d_a.jsonl";
pub const RELATIONS_FILE: &str = "d_r.jsonl";

pub fn private_file(client: usize) -> String {
    format!("d_ps_{client}.jsonl")
}

fn open(path: &Path) -> Result<fs::File, ConfigError> {
    fs::File::open(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })
}

fn data_err(path: &Path) -> impl FnOnce(DataError) -> ConfigError + '_ {
    move |source| ConfigError::Data { path: path.to_path_buf(), source }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        Ok(cfg.resolved())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text, path)?;
        // relative paths are taken from the config's directory
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data_dir = cfg.data_dir.map(|d| base.join(d));
        cfg.init_params = cfg.init_params.map(|p| base.join(p));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Propagates the shared settings into the sub-configs.
    pub fn resolved(mut self) -> Self {
        self.synth.seed = self.seed;
        self.train.seed = self.seed;
        self.federation.selection_seed = self.seed;
        self.federation.n_clients = self.synth.n_clients;
        self.train.depth_cap = self.hyper.extract_depth;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.resolved()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(0.0..1.0).contains(&self.test_fraction) || !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("test_fraction and validation_fraction must lie in [0, 1)".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        self.synth.validate()?;
        self.hyper.validate()?;
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.model.error.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.federation.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn train_context(&self) -> TrainContext {
        TrainContext { cfg: self.train.clone(), model: self.model.clone() }
    }

    pub fn featurizer(&self) -> Result<Featurizer, ConfigError> {
        Ok(Featurizer::new(self.hyper, seed::derive(self.seed, seed::stream::EMBEDDING, 0))?)
    }

    /// Reads `data_dir`, or synthesizes from `[synth]`.
    pub fn datasets(&self) -> Result<Datasets, ConfigError> {
        match &self.data_dir {
            Some(dir) => read_datasets(dir, self.synth.n_clients),
            None => {
                let d = dataio::synthesize(&self.synth)?;
                Ok(Datasets { public: d.public, private: d.private, actions: d.actions, relations: d.relations })
            }
        }
    }

    /// Datasets with `D_g` split into train, validation and test.
    pub fn federation_data(&self, datasets: Datasets) -> Result<FederationData, ConfigError> {
        let graph = dataio::graph_from_records(&datasets.actions, &datasets.relations)?;
        Ok(FederationData {
            graph,
            public: split_public(&datasets.public, self.test_fraction, self.validation_fraction, self.seed),
            private: datasets.private,
            actions: datasets.actions,
            relations: datasets.relations,
        })
    }
}

pub fn read_datasets(dir: &Path, n_clients: usize) -> Result<Datasets, ConfigError> {
    let flows = |name: &str| {
        let path = dir.join(name);
        read_flows(open(&path)?).map_err(data_err(&path))
    };
    let public = flows(PUBLIC_FILE)?;
    let private = (0..n_clients).map(|c| flows(&private_file(c))).collect::<Result<_, _>>()?;
    let path = dir.join(ACTIONS_FILE);
    let actions = read_jsonl(open(&path)?).map_err(data_err(&path))?.into_iter().map(|(_, a)| a).collect();
    let path = dir.join(RELATIONS_FILE);
    let relations = read_jsonl(open(&path)?).map_err(data_err(&path))?.into_iter().map(|(_, r)| r).collect();
    Ok(Datasets { public, private, actions, relations })
}
