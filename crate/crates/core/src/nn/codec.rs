//! Versioned binary layout for [`NetworkParams`].
//!
//! ```text
//! magic    4 bytes  "GNPM"
//! version  u16 LE
//! role     u8       0 = congruity, 1 = federated
//! reserved u8       0
//! h_max    u32 LE
//! widths   (h_max + 3) × u32 LE   input width, then each layer's output width
//! layers   per layer: weights row-major, then biases, as f64 LE
//! ```

use super::{LayerParams, NetworkParams, NnError, Role};

pub const MAGIC: [u8; 4] = *b"GNPM";
pub const VERSION: u16 = 1;

pub fn encode_params(params: &NetworkParams) -> Result<Vec<u8>, NnError> {
    if params.layers.len() < 2 {
        return Err(NnError::Decode("serialized networks need input and output layers".into()));
    }
    let widths = params.widths();
    let mut out = Vec::with_capacity(12 + 4 * widths.len() + 8 * params.num_values());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match params.role {
        Role::Congruity => 0,
        Role::Federated => 1,
    });
    out.push(0);
    out.extend_from_slice(&(params.h_max() as u32).to_le_bytes());
    for w in widths {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or_else(|| {
            NnError::Decode(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_params(bytes: &[u8]) -> Result<NetworkParams, NnError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(NnError::Decode("bad magic".into()));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(NnError::Decode(format!("unsupported version {version}")));
    }
    let role = match c.take(1)?[0] {
        0 => Role::Congruity,
        1 => Role::Federated,
        r => return Err(NnError::Decode(format!("unknown role tag {r}"))),
    };
    c.take(1)?;
    let h_max = c.u32()? as usize;
    let widths = (0..h_max + 3).map(|_| c.u32().map(|w| w as usize)).collect::<Result<Vec<_>, _>>()?;
    let mut layers = Vec::with_capacity(h_max + 2);
    for w in widths.windows(2) {
        let (units_in, units_out) = (w[0], w[1]);
        let weights = (0..units_in * units_out).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
        let biases = (0..units_out).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
        layers.push(LayerParams { units_in, units_out, weights, biases });
    }
    if c.pos != bytes.len() {
        return Err(NnError::Decode(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    NetworkParams::from_layers(role, layers)
}
