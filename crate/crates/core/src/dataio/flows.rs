//! Flow files: one JSON object per line with `flow_id`, `label`, hex-encoded
//! `packets` and string `attributes`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{DataError, FlowRecord, Label};

#[derive(Serialize, Deserialize)]
struct FlowLine {
    flow_id: String,
    label: Label,
    packets: Vec<String>,
    #[serde(default)]
    attributes: BTreeMap<String, String>,
}

pub fn write_flows<W: Write>(mut writer: W, flows: &[FlowRecord]) -> Result<(), DataError> {
    for f in flows {
        let line = FlowLine {
            flow_id: f.flow_id.clone(),
            label: f.label,
            packets: f.packets.iter().map(hex::encode).collect(),
            attributes: f.attributes.clone(),
        };
        serde_json::to_writer(&mut writer, &line).map_err(std::io::Error::other)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_flows<R: Read>(reader: R) -> Result<Vec<FlowRecord>, DataError> {
    read_jsonl::<FlowLine, _>(reader)?
        .into_iter()
        .map(|(line_no, line)| {
            let packets = line
                .packets
                .iter()
                .map(hex::decode)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DataError::Parse { line: line_no, message: format!("packet hex: {e}") })?;
            let flow = FlowRecord { flow_id: line.flow_id, packets, label: line.label, attributes: line.attributes };
            flow.validate().map_err(|e| DataError::Parse { line: line_no, message: e.to_string() })?;
            Ok(flow)
        })
        .collect()
}

/// Serializes one value per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut writer: W, items: &[T]) -> Result<(), DataError> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(std::io::Error::other)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses one value per nonblank line, keeping 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<(usize, T)>, DataError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| DataError::Parse { line: i + 1, message: e.to_string() })?;
        out.push((i + 1, value));
    }
    Ok(out)
}
