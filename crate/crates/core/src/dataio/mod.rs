//! Traffic ingestion and synthesis.
//!
//! * [`capture`]: the classic fixed-layout capture container.
//! * [`flows`]: line-oriented flow-record files.
//! * [`records`]: actional (`D_a`) and relational (`D_r`) record files.
//! * [`synth`]: labeled non-IID synthetic traffic.

pub mod capture;
pub mod flows;
pub mod records;
pub mod synth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Class;

pub use capture::{capture_to_flows, read_capture, write_capture, CaptureFile, CapturedPacket};
pub use flows::{read_flows, write_flows};
pub use records::{graph_from_records, ActionRecord, Endpoint, EndpointRole, RelationRecord};
pub use synth::{synthesize, SynthData, SynthSpec, MOTIF};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("BadMagic: 0x{0:08x}")]
    BadMagic(u32),
    #[error("TruncatedRecord: {0}")]
    TruncatedRecord(String),
    #[error("LengthOverflow: record {index} has incl_len {incl_len} > orig_len {orig_len}")]
    LengthOverflow { index: usize, incl_len: u32, orig_len: u32 },
    #[error("ParseError at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("invalid flow {flow_id:?}: {reason}")]
    InvalidFlow { flow_id: String, reason: String },
    #[error("window_seconds must be positive, got {0}")]
    InvalidWindow(f64),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Anomaly,
    Normal,
    Unlabeled,
}

impl Label {
    pub fn class(self) -> Option<Class> {
        match self {
            Label::Anomaly => Some(Class::Anomaly),
            Label::Normal => Some(Class::Normal),
            Label::Unlabeled => None,
        }
    }
}

/// One traffic flow: ordered packets of raw bytes, a label, and private
/// attributes that never leave the owning client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub flow_id: String,
    pub packets: Vec<Vec<u8>>,
    pub label: Label,
    pub attributes: BTreeMap<String, String>,
}

impl FlowRecord {
    pub fn new(flow_id: impl Into<String>, packets: Vec<Vec<u8>>, label: Label) -> Self {
        FlowRecord { flow_id: flow_id.into(), packets, label, attributes: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.packets.is_empty() {
            return Err(DataError::InvalidFlow { flow_id: self.flow_id.clone(), reason: "no packets".into() });
        }
        if let Some(i) = self.packets.iter().position(|p| p.is_empty()) {
            return Err(DataError::InvalidFlow {
                flow_id: self.flow_id.clone(),
                reason: format!("packet {i} is empty"),
            });
        }
        Ok(())
    }

    pub fn payload_bytes(&self) -> usize {
        self.packets.iter().map(Vec::len).sum()
    }
}
