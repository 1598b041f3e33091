//! Client-side data path: traffic → packets → bytes → embedded, normalized,
//! sparse feature vectors.
//!
//! The three meta-generalization knobs live in [`HyperParams`]:
//! `embed_dim` (byte-level embedding dimension), `extract_depth` (cap on the
//! dense depth used for packet-level extraction) and `support_size`
//! (support-set size of the traffic-level sparse layer).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{FlowRecord, Label};
use crate::nn::{project_support_in_place, NnError, Sample};
use crate::seed;

/// Two output units: anomaly, normal.
pub const OUTPUT_WIDTH: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("EmptyFlow: {0:?}")]
    EmptyFlow(String),
    #[error("NonFiniteValue at flat index {0}")]
    NonFiniteValue(usize),
    #[error("NonpositiveK")]
    NonpositiveK,
    #[error("invalid hyperparameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// `H_bl`
    pub embed_dim: usize,
    /// `H_pl`
    pub extract_depth: usize,
    /// `H_fl`
    pub support_size: usize,
    /// Bytes kept per packet.
    pub packet_len: usize,
    pub max_packets: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams { embed_dim: 32, extract_depth: 3, support_size: 200, packet_len: 256, max_packets: 8 }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let fields = [
            ("embed_dim", self.embed_dim),
            ("extract_depth", self.extract_depth),
            ("support_size", self.support_size),
            ("packet_len", self.packet_len),
            ("max_packets", self.max_packets),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(PipelineError::Invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Length of the traffic-level vector fed to the network.
    pub fn input_width(&self) -> usize {
        self.max_packets * self.packet_len * self.embed_dim
    }
}

/// `256 × embed_dim` lookup table, one row per byte value.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub seed: u64,
    table: Vec<f64>,
}

impl EmbeddingTable {
    /// Entries uniform in `[-1, 1]`.
    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed, seed::stream::EMBEDDING, dim as u64);
        let table = (0..256 * dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        EmbeddingTable { dim, seed, table }
    }

    pub fn row(&self, byte: u8) -> &[f64] {
        let b = byte as usize;
        &self.table[b * self.dim..(b + 1) * self.dim]
    }
}

/// `packets × packet_len × dim`, flattened in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub packets: usize,
    pub packet_len: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl RawTensor {
    pub fn at(&self, packet: usize, pos: usize) -> &[f64] {
        let start = (packet * self.packet_len + pos) * self.dim;
        &self.data[start..start + self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub flow_id: String,
    pub label: Label,
    pub packets: usize,
    pub packet_len: usize,
    pub dim: usize,
    /// Values in `[0, 1]`, absent packets zero.
    pub data: Vec<f64>,
}

/// First `max_packets` packets, each truncated or zero-padded to
/// `packet_len` bytes.
pub fn segment_flow(flow: &FlowRecord, hp: &HyperParams) -> Result<Vec<Vec<u8>>, PipelineError> {
    if flow.packets.is_empty() {
        return Err(PipelineError::EmptyFlow(flow.flow_id.clone()));
    }
    Ok(flow
        .packets
        .iter()
        .take(hp.max_packets)
        .map(|p| {
            let mut v = p[..p.len().min(hp.packet_len)].to_vec();
            v.resize(hp.packet_len, 0);
            v
        })
        .collect())
}

/// Row gather: position `(i, j)` becomes the table row of byte
/// `packets[i][j]`.
pub fn embed_bytes(packets: &[Vec<u8>], table: &EmbeddingTable) -> RawTensor {
    let packet_len = packets.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(packets.len() * packet_len * table.dim);
    for p in packets {
        debug_assert_eq!(p.len(), packet_len, "segmented packets share one length");
        for &b in p {
            data.extend_from_slice(table.row(b));
        }
    }
    RawTensor { packets: packets.len(), packet_len, dim: table.dim, data }
}

/// Per-channel min-max rescale to `[0, 1]` over the present packets;
/// constant channels map to 0.5. The tensor is then zero-padded to
/// `max_packets` packets.
pub fn normalize_features(
    raw: &RawTensor,
    max_packets: usize,
    flow_id: &str,
    label: Label,
) -> Result<FeatureTensor, PipelineError> {
    if let Some(i) = raw.data.iter().position(|v| !v.is_finite()) {
        return Err(PipelineError::NonFiniteValue(i));
    }
    let dim = raw.dim;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for chunk in raw.data.chunks_exact(dim.max(1)) {
        for c in 0..dim {
            lo[c] = lo[c].min(chunk[c]);
            hi[c] = hi[c].max(chunk[c]);
        }
    }
    let kept = raw.packets.min(max_packets);
    let mut data = vec![0.0; max_packets * raw.packet_len * dim];
    for (out, chunk) in data.chunks_exact_mut(dim.max(1)).zip(raw.data.chunks_exact(dim.max(1))).take(kept * raw.packet_len) {
        for c in 0..dim {
            let span = hi[c] - lo[c];
            out[c] = if span > 0.0 { (chunk[c] - lo[c]) / span } else { 0.5 };
        }
    }
    Ok(FeatureTensor { flow_id: flow_id.to_string(), label, packets: max_packets, packet_len: raw.packet_len, dim, data })
}

/// Flattens and keeps the `support_size` largest-magnitude entries.
pub fn sparse_encode(features: &FeatureTensor, hp: &HyperParams) -> Result<Vec<f64>, PipelineError> {
    let mut v = features.data.clone();
    project_support_in_place(&mut v, hp.support_size).map_err(|e| match e {
        NnError::NonpositiveK => PipelineError::NonpositiveK,
        other => PipelineError::Invalid(other.to_string()),
    })?;
    Ok(v)
}

/// One-hot targets: anomaly `(1, 0)`, normal `(0, 1)`.
pub fn target_for(label: Label) -> Option<Vec<f64>> {
    match label {
        Label::Anomaly => Some(vec![1.0, 0.0]),
        Label::Normal => Some(vec![0.0, 1.0]),
        Label::Unlabeled => None,
    }
}

/// The full per-flow path with a frozen table.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pub hp: HyperParams,
    pub table: EmbeddingTable,
}

impl Featurizer {
    pub fn new(hp: HyperParams, embedding_seed: u64) -> Result<Self, PipelineError> {
        hp.validate()?;
        Ok(Featurizer { hp, table: EmbeddingTable::seeded(hp.embed_dim, embedding_seed) })
    }

    pub fn input_width(&self) -> usize {
        self.hp.input_width()
    }

    pub fn features(&self, flow: &FlowRecord) -> Result<FeatureTensor, PipelineError> {
        let packets = segment_flow(flow, &self.hp)?;
        let raw = embed_bytes(&packets, &self.table);
        normalize_features(&raw, self.hp.max_packets, &flow.flow_id, flow.label)
    }

    pub fn sample(&self, flow: &FlowRecord) -> Result<Sample, PipelineError> {
        let input = sparse_encode(&self.features(flow)?, &self.hp)?;
        Ok(Sample { input, target: target_for(flow.label) })
    }

    /// Flows are independent; the table is shared read-only.
    pub fn samples(&self, flows: &[FlowRecord]) -> Result<Vec<Sample>, PipelineError> {
        flows.par_iter().map(|f| self.sample(f)).collect()
    }
}
