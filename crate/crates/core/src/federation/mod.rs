//! Broker orchestration.
//!
//! The broker creates the global model, granularizes the graph, partitions
//! model layers and the public data `D_g` over servers, gates the merged
//! server results on validation error, then runs synchronous rounds in which
//! a seeded random subset of clients trains locally and the broker averages
//! their returned parameters. Everything runs in-process; all cross-role
//! traffic goes through a logged [`Transport`].

pub mod transport;

use std::ops::Range;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataio::{ActionRecord, FlowRecord, Label, RelationRecord, SynthSpec};
use crate::graph::{granularize, ActionRelationalGraph, GraphError, Graynet};
use crate::metrics::{self, Class, MetricsError, Prediction};
use crate::nn::{self, encode_params, InitConfig, NetworkParams, NnError, Role, Sample};
use crate::pipeline::{Featurizer, PipelineError, OUTPUT_WIDTH};
use crate::seed;
use crate::trainer::{
    self, adapt_depth, client_local_train, constrained_phases, layerwise_train, PhaseDatasets, PhaseRecord,
    Split, TrainContext, TrainError, TrainReport,
};

pub use transport::{audit_privacy, Envelope, Message, PrivacyAudit, Transport};

#[derive(Debug, Error, PartialEq)]
pub enum FederationError {
    #[error("TooManyServers: {servers} servers for {layers} layers")]
    TooManyServers { servers: usize, layers: usize },
    #[error("ShapeMismatch: update {0} differs in shape from the first update")]
    ShapeMismatch(usize),
    #[error("EmptyUpdateSet")]
    EmptyUpdateSet,
    #[error("update {0} reports zero samples")]
    ZeroSamples(usize),
    #[error("InvalidCount: {k} clients per round out of {n}")]
    InvalidCount { k: usize, n: usize },
    #[error("invalid federation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    WeightedAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FederationConfig {
    pub n_clients: usize,
    pub n_servers: usize,
    pub rounds: usize,
    pub clients_per_round: usize,
    pub selection_seed: u64,
    pub aggregation: Aggregation,
    /// Granularity threshold `T_g`.
    pub t_g: f64,
    /// Balance coefficient `ξ` of `E* = G_E`.
    pub xi: f64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            n_clients: 4,
            n_servers: 1,
            rounds: 2,
            clients_per_round: 1,
            selection_seed: 0,
            aggregation: Aggregation::WeightedAverage,
            t_g: 1.0,
            xi: metrics::DEFAULT_XI,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<(), FederationError> {
        if self.n_clients == 0 || self.n_servers == 0 {
            return Err(FederationError::InvalidConfig("n_clients and n_servers must be positive".into()));
        }
        if self.clients_per_round == 0 || self.clients_per_round > self.n_clients {
            return Err(FederationError::InvalidCount { k: self.clients_per_round, n: self.n_clients });
        }
        if !(self.t_g > 0.0) || !self.t_g.is_finite() {
            return Err(FederationError::InvalidConfig("t_g must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(FederationError::InvalidConfig("xi must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Layer ranges and `D_g` shards per server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub servers: Vec<String>,
    pub layer_ranges: Vec<Range<usize>>,
    /// Sample indices into the training part of `D_g`.
    pub shards: Vec<Vec<usize>>,
}

/// Contiguous layer ranges as equal as possible, earlier ranges taking the
/// remainder; samples dealt round-robin.
pub fn partition_model(global: &NetworkParams, n_samples: usize, n_servers: usize) -> Result<Partition, FederationError> {
    let layers = global.layers.len();
    if n_servers == 0 || n_servers > layers {
        return Err(FederationError::TooManyServers { servers: n_servers, layers });
    }
    let base = layers / n_servers;
    let extra = layers % n_servers;
    let mut layer_ranges = Vec::with_capacity(n_servers);
    let mut start = 0;
    for s in 0..n_servers {
        let len = base + usize::from(s < extra);
        layer_ranges.push(start..start + len);
        start += len;
    }
    let shards = (0..n_servers).map(|s| (s..n_samples).step_by(n_servers).collect()).collect();
    Ok(Partition { servers: (0..n_servers).map(SynthSpec::server_id).collect(), layer_ranges, shards })
}

/// One client contribution to [`aggregate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub client: String,
    pub params: NetworkParams,
    pub n_samples: usize,
}

/// Elementwise average weighted by `n_samples`, accumulated as a running
/// mean so a single update, or identical updates, come back bit-for-bit.
/// Each step is clamped to its two operands, keeping the result inside the
/// inputs' elementwise range.
pub fn aggregate(updates: &[Update]) -> Result<NetworkParams, FederationError> {
    let first = updates.first().ok_or(FederationError::EmptyUpdateSet)?;
    for (i, u) in updates.iter().enumerate() {
        if !u.params.same_shape(&first.params) {
            return Err(FederationError::ShapeMismatch(i));
        }
        if u.n_samples == 0 {
            return Err(FederationError::ZeroSamples(i));
        }
    }
    let mut acc = first.params.clone().with_role(Role::Congruity);
    let mut total = first.n_samples as f64;
    for u in &updates[1..] {
        total += u.n_samples as f64;
        let t = u.n_samples as f64 / total;
        for (a, &v) in acc.values_mut().zip(u.params.values()) {
            let (lo, hi) = if *a <= v { (*a, v) } else { (v, *a) };
            *a = (*a + (v - *a) * t).clamp(lo, hi);
        }
    }
    Ok(acc)
}

/// Seeded uniform sample without replacement, ascending; depends only on
/// `(seed, round)`.
pub fn select_clients(n_clients: usize, k: usize, round: usize, seed: u64) -> Result<Vec<usize>, FederationError> {
    if k == 0 || k > n_clients {
        return Err(FederationError::InvalidCount { k, n: n_clients });
    }
    let mut rng = seed::rng(seed, seed::stream::SELECT, round as u64);
    let mut picked = rand::seq::index::sample(&mut rng, n_clients, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Shuffle stream of client `client`'s local training in `round`.
pub fn client_stream(round: usize, client: usize) -> u64 {
    ((round as u64) << 32) | client as u64
}

/// Training context of server `index`: the base config with a derived seed.
pub fn server_context(ctx: &TrainContext, index: usize) -> TrainContext {
    let mut c = ctx.clone();
    c.cfg.seed = seed::derive(ctx.cfg.seed, seed::stream::SERVER, index as u64);
    c
}

/// Hex SHA-256 of the parameter encoding.
pub fn checksum(params: &NetworkParams) -> Result<String, FederationError> {
    Ok(hex::encode(Sha256::digest(encode_params(params)?)))
}

/// `D_g` divided into disjoint train, validation and test parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PublicSplit {
    pub train: Vec<FlowRecord>,
    pub validation: Vec<FlowRecord>,
    pub test: Vec<FlowRecord>,
}

fn stratified_take(flows: &[FlowRecord], fraction: f64, seed: u64, index: u64) -> (Vec<FlowRecord>, Vec<FlowRecord>) {
    let mut taken = Vec::new();
    let mut rest = Vec::new();
    for (c, label) in [Label::Anomaly, Label::Normal, Label::Unlabeled].into_iter().enumerate() {
        let mut group: Vec<&FlowRecord> = flows.iter().filter(|f| f.label == label).collect();
        group.shuffle(&mut seed::rng(seed, seed::stream::SPLIT, index * 3 + c as u64));
        let mut n = (group.len() as f64 * fraction).round() as usize;
        if n == 0 && fraction > 0.0 && group.len() >= 3 {
            n = 1;
        }
        taken.extend(group[..n].iter().map(|f| (*f).clone()));
        rest.extend(group[n..].iter().map(|f| (*f).clone()));
    }
    (taken, rest)
}

/// Class-stratified split: `test_fraction` of `D_g` becomes the test split,
/// then `validation_fraction` of the remainder becomes validation.
pub fn split_public(flows: &[FlowRecord], test_fraction: f64, validation_fraction: f64, seed: u64) -> PublicSplit {
    let (test, rest) = stratified_take(flows, test_fraction, seed, 0);
    let mut split = split_train_validation(&rest, validation_fraction, seed);
    split.test = test;
    split
}

/// Class-stratified train/validation split; the test part is left empty.
pub fn split_train_validation(flows: &[FlowRecord], validation_fraction: f64, seed: u64) -> PublicSplit {
    let (validation, train) = stratified_take(flows, validation_fraction, seed, 1);
    PublicSplit { train, validation, test: Vec::new() }
}

/// Everything the broker and its parties start from. `private[c]` is only
/// ever handed to client `c`'s local training.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationData {
    pub graph: ActionRelationalGraph,
    pub public: PublicSplit,
    pub private: Vec<Vec<FlowRecord>>,
    pub actions: Vec<ActionRecord>,
    pub relations: Vec<RelationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub selected_clients: Vec<String>,
    pub pre_error: f64,
    pub post_error: f64,
    pub pre_checksum: String,
    pub post_checksum: String,
    pub messages: usize,
    pub bytes: usize,
}

/// Outcome of the validation gate on one server's result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeLog {
    pub server: String,
    pub layers: [usize; 2],
    /// False when the server changed the architecture and its whole model
    /// was the candidate.
    pub range_merge: bool,
    pub error_before: f64,
    pub error_candidate: f64,
    pub accepted: bool,
}

/// Server-side training record kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerLog {
    pub server: String,
    pub layerwise: TrainReport,
    pub depth: TrainReport,
    pub phases: Vec<PhaseRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationOutcome {
    pub params: NetworkParams,
    /// `E* = G_E` on the test split.
    pub e_star: f64,
    pub predictions: Vec<Prediction>,
    /// `G_N` after step (2).
    pub initial_graynet: Graynet,
    /// `G_N` after the post-server update.
    pub graynet: Graynet,
    pub servers: Vec<ServerLog>,
    pub merges: Vec<MergeLog>,
    pub rounds: Vec<RoundLog>,
    pub transport: Transport,
}

/// Anomaly iff its projected output is strictly the larger; ties go to the
/// lower index (anomaly).
pub fn classify(output: &[f64]) -> Class {
    if output.get(1).copied().unwrap_or(f64::NEG_INFINITY) > output[0] {
        Class::Normal
    } else {
        Class::Anomaly
    }
}

/// Scores `params` on labeled flows: predictions and `G_E`.
pub fn evaluate(
    ctx: &TrainContext,
    params: &NetworkParams,
    featurizer: &Featurizer,
    flows: &[FlowRecord],
    xi: f64,
) -> Result<(Vec<Prediction>, f64), FederationError> {
    let k = ctx.model.error.global_objective().output_support;
    let labeled: Vec<&FlowRecord> = flows.iter().filter(|f| f.label.class().is_some()).collect();
    let predictions = labeled
        .par_iter()
        .map(|f| {
            let s = featurizer.sample(f)?;
            let y = nn::predict(params, ctx.model.activation, &s.input, k)?;
            Ok(Prediction {
                flow_id: f.flow_id.clone(),
                predicted: classify(&y),
                actual: f.label.class().expect("filtered to labeled"),
            })
        })
        .collect::<Result<Vec<_>, FederationError>>()?;
    let rates = metrics::confusion(&predictions, xi)?;
    Ok((predictions, metrics::g_error(&rates)?))
}

/// Seeded initial global model `Θ`.
pub fn initial_model(ctx: &TrainContext, input_width: usize) -> NetworkParams {
    let cfg = InitConfig {
        input_width,
        hidden_width: ctx.model.hidden_width,
        output_width: OUTPUT_WIDTH,
        hidden_layers: ctx.model.initial_hidden,
        scale: ctx.model.init_scale,
    };
    NetworkParams::init(Role::Congruity, &cfg, &mut seed::rng(ctx.cfg.seed, seed::stream::INIT, 0))
}

fn seeds(graph: &ActionRelationalGraph) -> (Vec<String>, Vec<String>) {
    (
        graph.subjects().iter().map(|s| s.id.clone()).collect(),
        graph.objects().iter().map(|o| o.id.clone()).collect(),
    )
}

fn monitor(split: &Split) -> &[Sample] {
    if split.validation.is_empty() {
        &split.train
    } else {
        &split.validation
    }
}

/// One server's work on its shard: layer-wise training, depth adaptation,
/// then the three constrained phases.
pub fn serve(
    ctx: &TrainContext,
    params: &NetworkParams,
    shard: Split,
    d_a: Vec<Sample>,
    d_r: Vec<Sample>,
) -> Result<(NetworkParams, TrainReport, TrainReport, Vec<PhaseRecord>), FederationError> {
    let (p, layerwise) = layerwise_train(ctx, params, &shard)?;
    let (p, depth) = adapt_depth(ctx, &p, &shard)?;
    let out = constrained_phases(ctx, &p, &PhaseDatasets { d_g: shard, d_a, d_r })?;
    Ok((out.params, layerwise, depth, out.phases))
}

/// Validation-gated merge: replace `range` of `current` with the server's
/// layers (or take the server's whole model if shapes differ) and keep the
/// candidate iff the validation error did not get worse.
pub fn gated_merge(
    ctx: &TrainContext,
    current: &NetworkParams,
    server: &NetworkParams,
    range: Range<usize>,
    validation: &[Sample],
) -> Result<(NetworkParams, bool, f64, f64), FederationError> {
    let obj = ctx.model.error.global_objective();
    let range_merge = server.same_shape(current);
    let mut candidate = if range_merge { current.clone() } else { server.clone() };
    if range_merge {
        candidate.layers[range.clone()].clone_from_slice(&server.layers[range]);
    }
    candidate.role = Role::Congruity;
    let before = nn::mean_error(current, ctx.model.activation, &obj, validation)?;
    let after = nn::mean_error(&candidate, ctx.model.activation, &obj, validation)?;
    let accepted = after <= before;
    Ok((if accepted { candidate } else { current.clone() }, range_merge, before, after))
}

/// The broker procedure from global initialization to `E*`.
pub fn run_federation(
    data: &FederationData,
    cfg: &FederationConfig,
    ctx: &TrainContext,
    featurizer: &Featurizer,
) -> Result<FederationOutcome, FederationError> {
    run_federation_with(data, cfg, ctx, featurizer, None)
}

/// [`run_federation`] starting from `initial` instead of the seeded model.
pub fn run_federation_with(
    data: &FederationData,
    cfg: &FederationConfig,
    ctx: &TrainContext,
    featurizer: &Featurizer,
    initial: Option<&NetworkParams>,
) -> Result<FederationOutcome, FederationError> {
    cfg.validate()?;
    ctx.cfg.validate()?;
    if data.private.len() != cfg.n_clients {
        return Err(FederationError::InvalidConfig(format!(
            "{} private datasets for {} clients",
            data.private.len(),
            cfg.n_clients
        )));
    }
    let act = ctx.model.activation;
    let obj_g = ctx.model.error.global_objective();
    let mut transport = Transport::default();

    // (1) globally shared model
    let mut global = match initial {
        Some(p) if p.input_width() != featurizer.input_width() || p.output_width() != OUTPUT_WIDTH => {
            return Err(NnError::DimensionMismatch {
                expected: featurizer.input_width(),
                got: p.input_width(),
                context: "initial model input width",
            }
            .into());
        }
        Some(p) => p.clone().with_role(Role::Congruity),
        None => initial_model(ctx, featurizer.input_width()),
    };

    // (2) graynet
    let (subject_seeds, object_seeds) = seeds(&data.graph);
    let initial_graynet = granularize(&data.graph, cfg.t_g, &subject_seeds, &object_seeds)?;

    // (3) partition
    let train = featurizer.samples(&data.public.train)?;
    let validation = featurizer.samples(&data.public.validation)?;
    let partition = partition_model(&global, train.len(), cfg.n_servers)?;
    let width = featurizer.input_width();
    let d_a = trainer::encode_actions(&data.actions, width, OUTPUT_WIDTH);
    let d_r = trainer::encode_relations(&data.relations, width, OUTPUT_WIDTH);

    // (4) servers, then the validation-gated merge
    let mut assigned = Vec::with_capacity(cfg.n_servers);
    for (s, server) in partition.servers.iter().enumerate() {
        let range = &partition.layer_ranges[s];
        assigned.push(transport.send(
            None,
            Message::AssignServer {
                server: server.clone(),
                layer_start: range.start,
                layer_end: range.end,
                params: global.clone(),
                n_samples: partition.shards[s].len(),
            },
        )?);
    }
    let results: Vec<_> = assigned
        .par_iter()
        .enumerate()
        .map(|(s, message)| {
            let params = message.params();
            let shard = Split {
                train: partition.shards[s].iter().map(|&i| train[i].clone()).collect(),
                validation: validation.clone(),
            };
            let n = shard.train.len();
            serve(&server_context(ctx, s), params, shard, d_a.clone(), d_r.clone()).map(|r| (r, n))
        })
        .collect::<Result<_, _>>()?;

    let public_monitor = Split { train: train.clone(), validation: validation.clone() };
    let mut servers = Vec::new();
    let mut merges = Vec::new();
    for (s, ((params, layerwise, depth, phases), n)) in results.into_iter().enumerate() {
        let server = partition.servers[s].clone();
        let reply = transport.send(None, Message::ServerResult { server: server.clone(), params, n_samples: n })?;
        let range = partition.layer_ranges[s].clone();
        let (merged, range_merge, before, after) =
            gated_merge(ctx, &global, reply.params(), range.clone(), monitor(&public_monitor))?;
        merges.push(MergeLog {
            server: server.clone(),
            layers: [range.start, range.end],
            range_merge,
            error_before: before,
            error_candidate: after,
            accepted: after <= before,
        });
        global = merged;
        servers.push(ServerLog { server, layerwise, depth, phases });
    }

    // (5) update the graynet and partitioning
    let graynet = granularize(&data.graph.with_actions([])?, cfg.t_g, &subject_seeds, &object_seeds)?;
    partition_model(&global, train.len(), cfg.n_servers.min(global.layers.len()))?;

    // (6) synchronous rounds
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let selected = select_clients(cfg.n_clients, cfg.clients_per_round, round, cfg.selection_seed)?;
        let pre_error = nn::mean_error(&global, act, &obj_g, monitor(&public_monitor))?;
        let pre_checksum = checksum(&global)?;
        let mut placed = Vec::with_capacity(selected.len());
        for &c in &selected {
            let client = SynthSpec::client_id(c);
            placed.push((c, transport.send(Some(round), Message::PlaceClient { client, round, params: global.clone() })?));
        }
        let replies: Vec<_> = placed
            .par_iter()
            .map(|(c, message)| {
                client_local_train(ctx, message.params(), featurizer, &data.private[*c], client_stream(round, *c))
                    .map(|u| (*c, u))
            })
            .collect::<Result<_, _>>()?;
        // barrier: every selected client has returned
        let mut updates = Vec::with_capacity(replies.len());
        for (c, u) in replies {
            let client = SynthSpec::client_id(c);
            let reply = transport.send(
                Some(round),
                Message::ClientUpdate { client: client.clone(), round, params: u.params, n_samples: u.n_samples },
            )?;
            let Message::ClientUpdate { params, n_samples, .. } = reply else { unreachable!("client reply") };
            updates.push(Update { client, params, n_samples });
        }
        global = aggregate(&updates)?;
        let post_error = nn::mean_error(&global, act, &obj_g, monitor(&public_monitor))?;
        let (messages, bytes) = transport.totals(Some(round));
        rounds.push(RoundLog {
            round,
            selected_clients: selected.iter().map(|&c| SynthSpec::client_id(c)).collect(),
            pre_error,
            post_error,
            pre_checksum,
            post_checksum: checksum(&global)?,
            messages,
            bytes,
        });
    }

    // (7) E* on the held-out test split
    let (predictions, e_star) = evaluate(ctx, &global, featurizer, &data.public.test, cfg.xi)?;
    Ok(FederationOutcome {
        params: global,
        e_star,
        predictions,
        initial_graynet,
        graynet,
        servers,
        merges,
        rounds,
        transport,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerParams;

    fn constant(v: f64) -> NetworkParams {
        let mut p = NetworkParams::from_layers(Role::Federated, vec![LayerParams::zeros(3, 2), LayerParams::zeros(2, 2)])
            .unwrap();
        p.values_mut().for_each(|x| *x = v);
        p
    }

    fn upd(v: f64, n: usize) -> Update {
        Update { client: "c".into(), params: constant(v), n_samples: n }
    }

    fn layers(n: usize) -> NetworkParams {
        NetworkParams::from_layers(Role::Congruity, (0..n).map(|_| LayerParams::zeros(2, 2)).collect()).unwrap()
    }

    #[test]
    fn partition_rules() {
        let p = partition_model(&layers(4), 10, 1).unwrap();
        assert_eq!(p.layer_ranges, vec![0..4]);
        assert_eq!(p.shards, vec![(0..10).collect::<Vec<_>>()]);
        assert_eq!(partition_model(&layers(4), 10, 2).unwrap().layer_ranges, vec![0..2, 2..4]);
        assert_eq!(partition_model(&layers(5), 10, 2).unwrap().layer_ranges, vec![0..3, 3..5]);
        let p = partition_model(&layers(3), 7, 3).unwrap();
        assert_eq!(p.shards, vec![vec![0, 3, 6], vec![1, 4], vec![2, 5]]);
        assert_eq!(
            partition_model(&layers(3), 7, 4),
            Err(FederationError::TooManyServers { servers: 4, layers: 3 })
        );
    }

    #[test]
    fn aggregate_examples() {
        let single = aggregate(&[upd(0.3, 5)]).unwrap();
        assert!(single.values().all(|&v| v == 0.3));
        let same = aggregate(&[upd(0.7, 2), upd(0.7, 9)]).unwrap();
        assert!(same.values().all(|&v| v == 0.7));
        let mixed = aggregate(&[upd(0.0, 1), upd(1.0, 3)]).unwrap();
        assert!(mixed.values().all(|&v| v == 0.75));
        assert_eq!(aggregate(&[]), Err(FederationError::EmptyUpdateSet));
        let odd = Update { client: "x".into(), params: layers(2), n_samples: 1 };
        assert_eq!(aggregate(&[upd(0.0, 1), odd]), Err(FederationError::ShapeMismatch(1)));
        assert_eq!(aggregate(&[upd(0.0, 0)]), Err(FederationError::ZeroSamples(0)));
    }

    #[test]
    fn selection_examples() {
        for round in 0..20 {
            assert_eq!(select_clients(1, 1, round, 9).unwrap(), vec![0]);
        }
        assert_eq!(select_clients(10, 3, 4, 1).unwrap(), select_clients(10, 3, 4, 1).unwrap());
        assert!(select_clients(3, 4, 0, 0).is_err());
        let mut counts = [0usize; 10];
        for round in 0..10_000 {
            counts[select_clients(10, 1, round, 7).unwrap()[0]] += 1;
        }
        assert!(counts.iter().all(|&c| (900..=1100).contains(&c)), "{counts:?}");
    }

    #[test]
    fn stratified_split_is_disjoint_and_covering() {
        let flows: Vec<FlowRecord> = (0..50)
            .map(|i| {
                let label = if i % 5 == 0 { Label::Anomaly } else { Label::Normal };
                FlowRecord::new(format!("f{i}"), vec![vec![1, 2]], label)
            })
            .collect();
        let s = split_public(&flows, 0.2, 0.25, 3);
        let mut ids: Vec<&str> =
            s.train.iter().chain(&s.validation).chain(&s.test).map(|f| f.flow_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 50);
        assert_eq!(s.test.len(), 10);
        assert_eq!(s.test.iter().filter(|f| f.label == Label::Anomaly).count(), 2);
    }

    #[test]
    fn tie_goes_to_anomaly() {
        assert_eq!(classify(&[0.0, 0.0]), Class::Anomaly);
        assert_eq!(classify(&[0.1, 0.2]), Class::Normal);
        assert_eq!(classify(&[0.3, -0.2]), Class::Anomaly);
    }
}
