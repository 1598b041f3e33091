//! Simulated transport between broker, servers and clients.
//!
//! Every cross-role exchange is a [`Message`] value pushed through a
//! [`Transport`], which keeps the full message log for byte accounting and
//! for the privacy audit. Messages carry routing ids, layer ranges,
//! parameters and sample counts — there is no variant that can hold a flow.

use std::collections::HashSet;

use crate::dataio::FlowRecord;
use crate::nn::{encode_params, NetworkParams, NnError};

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Broker → server: the layer range `[layer_start, layer_end)` to own and
    /// the size of its public shard.
    AssignServer { server: String, layer_start: usize, layer_end: usize, params: NetworkParams, n_samples: usize },
    /// Server → broker.
    ServerResult { server: String, params: NetworkParams, n_samples: usize },
    /// Broker → client: the current global model.
    PlaceClient { client: String, round: usize, params: NetworkParams },
    /// Client → broker.
    ClientUpdate { client: String, round: usize, params: NetworkParams, n_samples: usize },
}

const TAG_ASSIGN: u8 = 1;
const TAG_RESULT: u8 = 2;
const TAG_PLACE: u8 = 3;
const TAG_UPDATE: u8 = 4;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_count(out: &mut Vec<u8>, n: usize) {
    out.extend_from_slice(&(n as u64).to_le_bytes());
}

fn put_params(out: &mut Vec<u8>, p: &NetworkParams) -> Result<(), NnError> {
    let bytes = encode_params(p)?;
    put_count(out, bytes.len());
    out.extend_from_slice(&bytes);
    Ok(())
}

impl Message {
    pub fn params(&self) -> &NetworkParams {
        match self {
            Message::AssignServer { params, .. }
            | Message::ServerResult { params, .. }
            | Message::PlaceClient { params, .. }
            | Message::ClientUpdate { params, .. } => params,
        }
    }

    /// Wire form: tag byte, length-prefixed ids, `u64` counts, then the
    /// length-prefixed parameter encoding.
    pub fn encode(&self) -> Result<Vec<u8>, NnError> {
        let mut out = Vec::new();
        match self {
            Message::AssignServer { server, layer_start, layer_end, params, n_samples } => {
                out.push(TAG_ASSIGN);
                put_str(&mut out, server);
                put_count(&mut out, *layer_start);
                put_count(&mut out, *layer_end);
                put_count(&mut out, *n_samples);
                put_params(&mut out, params)?;
            }
            Message::ServerResult { server, params, n_samples } => {
                out.push(TAG_RESULT);
                put_str(&mut out, server);
                put_count(&mut out, *n_samples);
                put_params(&mut out, params)?;
            }
            Message::PlaceClient { client, round, params } => {
                out.push(TAG_PLACE);
                put_str(&mut out, client);
                put_count(&mut out, *round);
                put_params(&mut out, params)?;
            }
            Message::ClientUpdate { client, round, params, n_samples } => {
                out.push(TAG_UPDATE);
                put_str(&mut out, client);
                put_count(&mut out, *round);
                put_count(&mut out, *n_samples);
                put_params(&mut out, params)?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    /// Federation round, or `None` for the server phase.
    pub round: Option<usize>,
    pub message: Message,
    pub bytes: usize,
}

/// In-process message log with byte and message counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transport {
    envelopes: Vec<Envelope>,
}

impl Transport {
    /// Records `message` and hands back the receiver's copy.
    pub fn send(&mut self, round: Option<usize>, message: Message) -> Result<Message, NnError> {
        let bytes = message.encode()?.len();
        self.envelopes.push(Envelope { round, message: message.clone(), bytes });
        Ok(message)
    }

    pub fn envelopes(&self) -> &[Envelope] {
        &self.envelopes
    }

    /// `(messages, bytes)` sent during `round`.
    pub fn totals(&self, round: Option<usize>) -> (usize, usize) {
        self.envelopes
            .iter()
            .filter(|e| e.round == round)
            .fold((0, 0), |(m, b), e| (m + 1, b + e.bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrivacyAudit {
    pub messages: usize,
    pub bytes: usize,
    /// Private 8-byte payload windows found in any message.
    pub leaked_windows: usize,
}

pub const AUDIT_WINDOW: usize = 8;

/// Scans every logged message for any 8-byte window of private payload.
/// Windows made of one repeated byte are skipped: they also arise from
/// ordinary numeric encodings (e.g. zeros) and carry no flow content.
pub fn audit_privacy(transport: &Transport, private: &[Vec<FlowRecord>]) -> Result<PrivacyAudit, NnError> {
    let mut windows: HashSet<[u8; AUDIT_WINDOW]> = HashSet::new();
    for packet in private.iter().flatten().flat_map(|f| &f.packets) {
        for w in packet.windows(AUDIT_WINDOW) {
            if w.iter().any(|&b| b != w[0]) {
                windows.insert(w.try_into().expect("window width"));
            }
        }
    }
    let mut audit = PrivacyAudit { messages: 0, bytes: 0, leaked_windows: 0 };
    for e in transport.envelopes() {
        let bytes = e.message.encode()?;
        audit.messages += 1;
        audit.bytes += bytes.len();
        audit.leaked_windows += bytes
            .windows(AUDIT_WINDOW)
            .filter(|w| windows.contains(<&[u8; AUDIT_WINDOW]>::try_from(*w).expect("window width")))
            .count();
    }
    Ok(audit)
}
