//! Meta-generalization sweeps.
//!
//! A sweep varies one hyperparameter, and for every value runs k-fold
//! cross-validation over `D_g`: each fold is the test split of one
//! federation run, scored by `G_E`. Each fold also scores the untrained
//! initial model as a control. Tables carry the mean and standard deviation
//! over folds as percentages.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Datasets, ExperimentConfig};
use crate::dataio::FlowRecord;
use crate::federation::{
    audit_privacy, evaluate, initial_model, run_federation_with, split_train_validation, FederationData,
    FederationError, PrivacyAudit, RoundLog,
};
use crate::metrics::{kfold_split, MetricsError};
use crate::nn::NetworkParams;
use crate::trainer::TrainReport;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("unknown axis {0:?}; valid axes: embed_dim, extract_depth, support_size")]
    UnknownAxis(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    EmbedDim,
    ExtractDepth,
    SupportSize,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::EmbedDim, Axis::ExtractDepth, Axis::SupportSize];

    pub fn name(self) -> &'static str {
        match self {
            Axis::EmbedDim => "embed_dim",
            Axis::ExtractDepth => "extract_depth",
            Axis::SupportSize => "support_size",
        }
    }

    /// Sets this axis to `value` in `cfg`.
    pub fn apply(self, cfg: &ExperimentConfig, value: usize) -> ExperimentConfig {
        let mut c = cfg.clone();
        match self {
            Axis::EmbedDim => c.hyper.embed_dim = value,
            Axis::ExtractDepth => c.hyper.extract_depth = value,
            Axis::SupportSize => c.hyper.support_size = value,
        }
        c.resolved()
    }

    /// Values configured for this axis in `cfg.sweep`.
    pub fn values(self, cfg: &ExperimentConfig) -> Vec<usize> {
        match self {
            Axis::EmbedDim => cfg.sweep.embed_dim.clone(),
            Axis::ExtractDepth => cfg.sweep.extract_depth.clone(),
            Axis::SupportSize => cfg.sweep.support_size.clone(),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| HarnessError::UnknownAxis(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    /// Strictly increasing.
    pub values: Vec<usize>,
    pub base: ExperimentConfig,
    pub folds: usize,
}

impl SweepSpec {
    /// The sweep configured in `cfg` for `axis`.
    pub fn from_config(cfg: &ExperimentConfig, axis: Axis) -> Self {
        SweepSpec { axis, values: axis.values(cfg), base: cfg.clone(), folds: cfg.folds }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::InvalidSpec("values must be nonempty".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::InvalidSpec("values must be strictly increasing".into()));
        }
        if self.folds < 2 {
            return Err(HarnessError::InvalidSpec(format!("folds must be at least 2, got {}", self.folds)));
        }
        Ok(())
    }
}

/// One federation run on one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRun {
    pub fold: usize,
    pub g_error: f64,
    /// `G_E` of the untrained initial model on the same fold.
    pub control: f64,
    pub depth_final: usize,
    pub depth_cap: usize,
    /// Depth-adaptation reports of every server.
    pub depth_reports: Vec<TrainReport>,
    pub rounds: Vec<RoundLog>,
    /// Scan of every message of the run for private payload bytes.
    pub audit: PrivacyAudit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub mean: f64,
    pub sd: f64,
    pub control_mean: f64,
    pub runtime_secs: f64,
    pub runs: Vec<FoldRun>,
}

impl SweepRow {
    pub fn federation_runs(&self) -> usize {
        self.runs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn pick(flows: &[FlowRecord], idx: &[usize]) -> Vec<FlowRecord> {
    idx.iter().map(|&i| flows[i].clone()).collect()
}

/// Fold `fold` of a k-fold run: that fold is the test split; the rest of
/// `D_g` is split into train and validation.
pub fn run_fold(
    cfg: &ExperimentConfig,
    datasets: &Datasets,
    folds: &[Vec<usize>],
    fold: usize,
    initial: Option<&NetworkParams>,
) -> Result<FoldRun, HarnessError> {
    let rest: Vec<usize> = folds.iter().enumerate().filter(|(f, _)| *f != fold).flat_map(|(_, i)| i).copied().collect();
    let mut public = split_train_validation(&pick(&datasets.public, &rest), cfg.validation_fraction, cfg.seed);
    public.test = pick(&datasets.public, &folds[fold]);
    let data = FederationData {
        graph: crate::dataio::graph_from_records(&datasets.actions, &datasets.relations).map_err(ConfigError::from)?,
        public,
        private: datasets.private.clone(),
        actions: datasets.actions.clone(),
        relations: datasets.relations.clone(),
    };
    let ctx = cfg.train_context();
    let featurizer = cfg.featurizer()?;
    let start = initial.cloned().unwrap_or_else(|| initial_model(&ctx, featurizer.input_width()));
    let (_, control) = evaluate(&ctx, &start, &featurizer, &data.public.test, cfg.federation.xi)?;
    let out = run_federation_with(&data, &cfg.federation, &ctx, &featurizer, Some(&start))?;
    let audit = audit_privacy(&out.transport, &data.private).map_err(FederationError::from)?;
    Ok(FoldRun {
        fold,
        g_error: out.e_star,
        control,
        depth_final: out.params.h_max(),
        depth_cap: ctx.cfg.depth_cap,
        depth_reports: out.servers.into_iter().map(|s| s.depth).collect(),
        rounds: out.rounds,
        audit,
    })
}

/// Runs every value × fold. Data are regenerated (or reloaded) per value,
/// so axes that change the generator are honored.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, HarnessError> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let started = Instant::now();
        let mut cfg = spec.axis.apply(&spec.base, value);
        cfg.folds = spec.folds;
        cfg.validate()?;
        let datasets = cfg.datasets()?;
        let folds = kfold_split(datasets.public.len(), spec.folds, cfg.seed)?;
        let runs = (0..spec.folds)
            .into_par_iter()
            .map(|f| run_fold(&cfg, &datasets, &folds, f, None))
            .collect::<Result<Vec<_>, _>>()?;
        let (mean, sd) = mean_sd(&runs.iter().map(|r| r.g_error).collect::<Vec<_>>());
        let (control_mean, _) = mean_sd(&runs.iter().map(|r| r.control).collect::<Vec<_>>());
        rows.push(SweepRow { value, mean, sd, control_mean, runtime_secs: started.elapsed().as_secs_f64(), runs });
    }
    Ok(SweepResult { axis: spec.axis, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// `0.00063` → `"0.063%"`.
pub fn percent(x: f64) -> String {
    format!("{:.3}%", x * 100.0)
}

fn table_cells(result: &SweepResult, runtime: bool) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec![result.axis.name().to_string(), "mean_g_e".into(), "sd_g_e".into(), "control_g_e".into()];
    if runtime {
        header.push("runtime_s".into());
    }
    let rows = result
        .rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.value.to_string(), percent(r.mean), percent(r.sd), percent(r.control_mean)];
            if runtime {
                cells.push(format!("{:.3}", r.runtime_secs));
            }
            cells
        })
        .collect();
    (header, rows)
}

/// Renders one row per sweep value. Runtime is wall-clock and therefore
/// only included on request, keeping the default tables reproducible.
pub fn emit_table(result: &SweepResult, format: TableFormat, runtime: bool) -> String {
    let (header, rows) = table_cells(result, runtime);
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).expect("in-memory write");
            for r in &rows {
                w.write_record(r).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            out.push_str(&line(&header));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for r in &rows {
                out.push_str(&line(r));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(values: &[(usize, f64)]) -> SweepResult {
        SweepResult {
            axis: Axis::EmbedDim,
            rows: values
                .iter()
                .map(|&(value, mean)| SweepRow {
                    value,
                    mean,
                    sd: 0.0,
                    control_mean: 0.5,
                    runtime_secs: 1.25,
                    runs: Vec::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(percent(0.00063), "0.063%");
        assert_eq!(percent(0.0), "0.000%");
        assert_eq!(percent(1.0), "100.000%");
    }

    #[test]
    fn csv_and_markdown_agree() {
        let r = result(&[(16, 0.00063), (32, 0.1)]);
        let csv = emit_table(&r, TableFormat::Csv, false);
        assert_eq!(csv, "embed_dim,mean_g_e,sd_g_e,control_g_e\n16,0.063%,0.000%,50.000%\n32,10.000%,0.000%,50.000%\n");
        let md = emit_table(&r, TableFormat::Markdown, false);
        let md_cells: Vec<Vec<String>> = md
            .lines()
            .filter(|l| !l.starts_with("|-"))
            .map(|l| l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
            .collect();
        let csv_cells: Vec<Vec<String>> = csv.lines().map(|l| l.split(',').map(String::from).collect()).collect();
        assert_eq!(md_cells, csv_cells);
        assert!(emit_table(&r, TableFormat::Csv, true).contains("runtime_s"));
    }

    #[test]
    fn axis_names() {
        for a in Axis::ALL {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert!(matches!("depth".parse::<Axis>(), Err(HarnessError::UnknownAxis(_))));
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec::from_config(&ExperimentConfig::default(), Axis::SupportSize);
        spec.validate().unwrap();
        spec.values = vec![3, 3];
        assert!(spec.validate().is_err());
        spec.values = vec![];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn mean_and_sd() {
        assert_eq!(mean_sd(&[0.2]), (0.2, 0.0));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
