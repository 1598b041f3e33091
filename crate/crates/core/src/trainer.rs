//! Server- and client-side optimization.
//!
//! All training is plain mini-batch gradient descent on `E(Θ)`. A
//! "saturating" run stops once the monitored error has not improved by more
//! than `min_delta` for `patience` epochs and returns the best parameters
//! seen. Randomness (batch order, grown layers) comes from streams derived
//! from `TrainConfig::seed`, so every run is reproducible.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{ActionRecord, FlowRecord, RelationRecord};
use crate::nn::{self, grow_depth, ActivationSpec, ErrorConfig, NetworkParams, NnError, Objective, Role, Sample};
use crate::pipeline::{Featurizer, PipelineError};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("EmptyDataset: {0}")]
    EmptyDataset(&'static str),
    #[error("H_max {h_max} already exceeds depth cap {cap}")]
    DepthExceedsCap { h_max: usize, cap: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    /// `H_pl`: the largest `H_max` depth adaptation may reach.
    pub depth_cap: usize,
    pub seed: u64,
    /// Passes over `D_ps` per client round.
    pub local_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            min_delta: 1e-4,
            depth_cap: 3,
            seed: 0,
            local_epochs: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(TrainError::InvalidConfig("learning_rate must be finite and nonnegative".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.local_epochs == 0 {
            return Err(TrainError::InvalidConfig("batch_size, max_epochs, patience, local_epochs must be positive".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(TrainError::InvalidConfig("min_delta must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Network shape and objective shared by every party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub activation: ActivationSpec,
    pub hidden_width: usize,
    /// `H_max` of the freshly created global model.
    pub initial_hidden: usize,
    pub init_scale: f64,
    pub error: ErrorConfig,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            activation: ActivationSpec::default(),
            hidden_width: 16,
            initial_hidden: 0,
            init_scale: 0.05,
            error: ErrorConfig::default(),
        }
    }
}

impl ModelSpec {
    /// Objective of the unconstrained layer-wise and depth stages.
    pub fn plain_objective(&self) -> Objective {
        Objective { lambda: self.error.lambda.clone(), output_support: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainContext {
    pub cfg: TrainConfig,
    pub model: ModelSpec,
}

/// Training data with a held-out validation part.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub error: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthStep {
    pub h_max: usize,
    pub saturated_error: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Monitored error at stop.
    pub final_error: f64,
    /// Epochs of the longest single saturating run; never above `max_epochs`.
    pub epochs_run: usize,
    pub total_epochs: usize,
    pub depth_final: usize,
    pub phase_errors: Vec<StageError>,
    pub depth_trace: Vec<DepthStep>,
}

impl TrainReport {
    fn record(&mut self, stage: String, run: &SaturationRun) {
        self.final_error = run.best_error;
        self.epochs_run = self.epochs_run.max(run.epochs);
        self.total_epochs += run.epochs;
        self.phase_errors.push(StageError { stage, error: run.best_error, epochs: run.epochs });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationRun {
    pub initial_error: f64,
    pub best_error: f64,
    pub epochs: usize,
}

fn zero(grad: &mut NetworkParams) {
    grad.values_mut().for_each(|v| *v = 0.0);
}

/// One pass over `samples` in the given order.
fn epoch(
    ctx: &TrainContext,
    params: &mut NetworkParams,
    obj: &Objective,
    samples: &[Sample],
    order: &[usize],
    trainable: &[bool],
    grad: &mut NetworkParams,
) -> Result<(), TrainError> {
    let mut batch = Vec::with_capacity(ctx.cfg.batch_size);
    for chunk in order.chunks(ctx.cfg.batch_size) {
        batch.clear();
        batch.extend(chunk.iter().map(|&i| &samples[i]));
        zero(grad);
        nn::accumulate(params, ctx.model.activation, obj, &batch, trainable, grad)?;
        params.descend(grad, ctx.cfg.learning_rate / batch.len() as f64, trainable);
    }
    Ok(())
}

/// Mini-batch descent until the monitored error saturates. The monitor is
/// the validation error when `validation` is nonempty, else the training
/// error. Returns the best parameters seen, including the starting point.
pub fn saturate(
    ctx: &TrainContext,
    params: &NetworkParams,
    obj: &Objective,
    train: &[Sample],
    validation: &[Sample],
    trainable: &[bool],
    stream: u64,
) -> Result<(NetworkParams, SaturationRun), TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyDataset("training split"));
    }
    let monitor = if validation.is_empty() { train } else { validation };
    let act = ctx.model.activation;
    let mut current = params.clone();
    let mut best = params.clone();
    let initial_error = nn::mean_error(&current, act, obj, monitor)?;
    let mut best_error = initial_error;
    let mut reference = initial_error;
    let mut stale = 0;
    let mut epochs = 0;
    let mut rng = seed::rng(ctx.cfg.seed, seed::stream::SHUFFLE, stream);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grad = current.zeros_like();
    while epochs < ctx.cfg.max_epochs {
        order.shuffle(&mut rng);
        epoch(ctx, &mut current, obj, train, &order, trainable, &mut grad)?;
        epochs += 1;
        let err = nn::mean_error(&current, act, obj, monitor)?;
        if err < best_error {
            best_error = err;
            best = current.clone();
        }
        if err < reference - ctx.cfg.min_delta {
            reference = err;
            stale = 0;
        } else {
            stale += 1;
            if stale >= ctx.cfg.patience {
                break;
            }
        }
    }
    Ok((best, SaturationRun { initial_error, best_error, epochs }))
}

/// Greedy layer-wise training: stage `h` updates layer `h` only, for
/// `h = 0 ..= H_max + 1`.
pub fn layerwise_train(
    ctx: &TrainContext,
    params: &NetworkParams,
    d_g: &Split,
) -> Result<(NetworkParams, TrainReport), TrainError> {
    ctx.cfg.validate()?;
    if d_g.train.is_empty() {
        return Err(TrainError::EmptyDataset("D_g"));
    }
    let obj = ctx.model.plain_objective();
    let mut current = params.clone();
    let mut report = TrainReport::default();
    for h in 0..current.layers.len() {
        let mut trainable = vec![false; current.layers.len()];
        trainable[h] = true;
        let (next, run) = saturate(ctx, &current, &obj, &d_g.train, &d_g.validation, &trainable, 100 + h as u64)?;
        current = next;
        report.record(format!("layer {h}"), &run);
    }
    report.depth_final = current.h_max();
    Ok((current, report))
}

/// Growth rule: keep a deeper net only if its saturated error is strictly
/// lower and the current depth is still below the cap.
pub fn accept_growth(candidate_error: f64, best_error: f64, h_max: usize, depth_cap: usize) -> bool {
    candidate_error < best_error && h_max < depth_cap
}

/// Trains to saturation, then keeps adding hidden layers while each addition
/// strictly lowers the saturated validation error and `H_max` stays below
/// `depth_cap`.
pub fn adapt_depth(
    ctx: &TrainContext,
    params: &NetworkParams,
    d_g: &Split,
) -> Result<(NetworkParams, TrainReport), TrainError> {
    ctx.cfg.validate()?;
    if d_g.train.is_empty() {
        return Err(TrainError::EmptyDataset("D_g"));
    }
    let cap = ctx.cfg.depth_cap;
    if params.h_max() > cap {
        return Err(TrainError::DepthExceedsCap { h_max: params.h_max(), cap });
    }
    let obj = ctx.model.plain_objective();
    let all = |p: &NetworkParams| vec![true; p.layers.len()];
    let mut report = TrainReport::default();
    let (mut best, run) = saturate(ctx, params, &obj, &d_g.train, &d_g.validation, &all(params), 200)?;
    report.record(format!("depth {}", best.h_max()), &run);
    report.depth_trace.push(DepthStep { h_max: best.h_max(), saturated_error: run.best_error, accepted: true });
    let mut best_error = run.best_error;
    let mut rng = seed::rng(ctx.cfg.seed, seed::stream::GROW, 0);

    while best.h_max() < cap {
        let grown = grow_depth(&best, ctx.model.hidden_width, ctx.model.init_scale, &mut rng);
        let stream = 200 + grown.h_max() as u64;
        let (candidate, run) = saturate(ctx, &grown, &obj, &d_g.train, &d_g.validation, &all(&grown), stream)?;
        let accepted = accept_growth(run.best_error, best_error, best.h_max(), cap);
        report.epochs_run = report.epochs_run.max(run.epochs);
        report.total_epochs += run.epochs;
        report.phase_errors.push(StageError {
            stage: format!("depth {}", candidate.h_max()),
            error: run.best_error,
            epochs: run.epochs,
        });
        report.depth_trace.push(DepthStep { h_max: candidate.h_max(), saturated_error: run.best_error, accepted });
        if !accepted {
            break;
        }
        best = candidate;
        best_error = run.best_error;
    }
    report.final_error = best_error;
    report.depth_final = best.h_max();
    Ok((best, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Over `D_a`, support `⌈β·k⌉`.
    Actional,
    /// Over `D_r`, support `⌈β1·k⌉`.
    Relational,
    /// Over `D_g`, support `⌈β2·k⌉`.
    Global,
}

impl Phase {
    pub fn beta(self, err: &ErrorConfig) -> f64 {
        match self {
            Phase::Actional => err.beta_a,
            Phase::Relational => err.beta_r,
            Phase::Global => err.beta_g,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseDatasets {
    pub d_g: Split,
    pub d_a: Vec<Sample>,
    pub d_r: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub phase: Phase,
    pub support: usize,
    pub error: f64,
    pub epochs: usize,
    /// Parameters at the end of the phase.
    pub params: NetworkParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasesOutcome {
    pub params: NetworkParams,
    pub phases: Vec<PhaseRecord>,
}

/// `Θ → Θ^{a*} → Θ^{r*} → Θ*`: three saturating runs, each with the network
/// output projected onto its phase's support so the complement stays zero
/// at every step. Empty datasets skip their phase.
pub fn constrained_phases(
    ctx: &TrainContext,
    params: &NetworkParams,
    phases: &PhaseDatasets,
) -> Result<PhasesOutcome, TrainError> {
    ctx.cfg.validate()?;
    ctx.model.error.validate()?;
    if phases.d_a.is_empty() && phases.d_r.is_empty() && phases.d_g.train.is_empty() {
        return Err(TrainError::EmptyDataset("D_a, D_r and D_g"));
    }
    let all = vec![true; params.layers.len()];
    let mut current = params.clone();
    let mut records = Vec::new();
    let plan: [(Phase, &[Sample], &[Sample]); 3] = [
        (Phase::Actional, &phases.d_a, &[]),
        (Phase::Relational, &phases.d_r, &[]),
        (Phase::Global, &phases.d_g.train, &phases.d_g.validation),
    ];
    for (i, (phase, train, validation)) in plan.into_iter().enumerate() {
        if train.is_empty() {
            continue;
        }
        let obj = ctx.model.error.objective(phase.beta(&ctx.model.error));
        let support = obj.output_support.expect("phase objectives carry a support");
        let (next, run) = saturate(ctx, &current, &obj, train, validation, &all, 300 + i as u64)?;
        current = next;
        records.push(PhaseRecord { phase, support, error: run.best_error, epochs: run.epochs, params: current.clone() });
    }
    Ok(PhasesOutcome { params: current, phases: records })
}

/// What a client returns: parameters and a sample count, nothing else.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub params: NetworkParams,
    pub n_samples: usize,
}

/// Client procedure: analyze and segment the private flows, embed, normalize
/// and sparse-encode them, then run `local_epochs` of mini-batch descent on
/// the deployed objective. The flows never leave this call.
pub fn client_local_train(
    ctx: &TrainContext,
    params: &NetworkParams,
    featurizer: &Featurizer,
    d_ps: &[FlowRecord],
    stream: u64,
) -> Result<ClientUpdate, TrainError> {
    ctx.cfg.validate()?;
    if d_ps.is_empty() {
        return Err(TrainError::EmptyDataset("D_ps"));
    }
    let samples = featurizer.samples(d_ps)?;
    let obj = ctx.model.error.global_objective();
    let all = vec![true; params.layers.len()];
    let mut current = params.clone().with_role(Role::Federated);
    let mut grad = current.zeros_like();
    let mut rng = seed::rng(ctx.cfg.seed, seed::stream::CLIENT, stream);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..ctx.cfg.local_epochs {
        order.shuffle(&mut rng);
        epoch(ctx, &mut current, &obj, &samples, &order, &all, &mut grad)?;
    }
    Ok(ClientUpdate { params: current, n_samples: samples.len() })
}

fn squash(v: f64) -> f64 {
    let v = v.max(0.0);
    v / (1.0 + v)
}

fn place(features: [[f64; 2]; 2], targets: [f64; 2], input_width: usize, output_width: usize) -> Sample {
    let mut input = vec![0.0; input_width];
    for (slot, v) in input.iter_mut().zip(features.iter().flatten()) {
        *slot = *v;
    }
    let mut target = vec![0.0; output_width];
    for (slot, v) in target.iter_mut().zip(targets) {
        *slot = v;
    }
    Sample { input, target: Some(target) }
}

/// Actional samples: endpoint features in, `(1/(1+d), d/(1+d))` for
/// duration `d` out.
pub fn encode_actions(records: &[ActionRecord], input_width: usize, output_width: usize) -> Vec<Sample> {
    records
        .iter()
        .map(|a| {
            let d = a.duration().max(0.0);
            place([a.from.features, a.to.features], [1.0 - squash(d), squash(d)], input_width, output_width)
        })
        .collect()
}

/// Relational samples: endpoint features in, squashed forward and backward
/// weights out.
pub fn encode_relations(records: &[RelationRecord], input_width: usize, output_width: usize) -> Vec<Sample> {
    records
        .iter()
        .map(|r| {
            place([r.a.features, r.b.features], [squash(r.w_forward), squash(r.w_backward)], input_width, output_width)
        })
        .collect()
}
