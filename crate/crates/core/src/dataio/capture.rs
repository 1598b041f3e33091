//! Classic capture container: a 24-byte global header followed by records of
//! a 16-byte header (`ts_sec`, `ts_usec`, `incl_len`, `orig_len`, all u32 in
//! file byte order) and `incl_len` payload bytes.

use super::{DataError, FlowRecord, Label};

const MAGIC: u32 = 0xA1B2_C3D4;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Big,
    Little,
}

impl ByteOrder {
    fn u32(self, b: &[u8]) -> u32 {
        let b: [u8; 4] = b.try_into().expect("4 bytes");
        match self {
            ByteOrder::Big => u32::from_be_bytes(b),
            ByteOrder::Little => u32::from_le_bytes(b),
        }
    }

    fn u16(self, b: &[u8]) -> u16 {
        let b: [u8; 2] = b.try_into().expect("2 bytes");
        match self {
            ByteOrder::Big => u16::from_be_bytes(b),
            ByteOrder::Little => u16::from_le_bytes(b),
        }
    }

    fn put_u32(self, out: &mut Vec<u8>, v: u32) {
        match self {
            ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
            ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
        }
    }

    fn put_u16(self, out: &mut Vec<u8>, v: u16) {
        match self {
            ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
            ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapturedPacket {
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

impl CapturedPacket {
    pub fn timestamp(&self) -> f64 {
        self.ts_sec as f64 + self.ts_usec as f64 * 1e-6
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureFile {
    pub byte_order: ByteOrder,
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub linktype: u32,
    pub packets: Vec<CapturedPacket>,
}

impl CaptureFile {
    pub fn new(byte_order: ByteOrder, packets: Vec<CapturedPacket>) -> Self {
        CaptureFile { byte_order, version_major: 2, version_minor: 4, snaplen: 65_535, linktype: 1, packets }
    }
}

pub fn read_capture(bytes: &[u8]) -> Result<CaptureFile, DataError> {
    if bytes.len() < 4 {
        return Err(DataError::TruncatedRecord(format!("{} bytes cannot hold the magic number", bytes.len())));
    }
    let raw = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
    let order = if raw == MAGIC {
        ByteOrder::Big
    } else if raw == MAGIC.swap_bytes() {
        ByteOrder::Little
    } else {
        return Err(DataError::BadMagic(raw));
    };
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(DataError::TruncatedRecord(format!("global header is {} of 24 bytes", bytes.len())));
    }
    let version_major = order.u16(&bytes[4..6]);
    let version_minor = order.u16(&bytes[6..8]);
    let snaplen = order.u32(&bytes[16..20]);
    let linktype = order.u32(&bytes[20..24]);

    let mut packets = Vec::new();
    let mut pos = GLOBAL_HEADER_LEN;
    while pos < bytes.len() {
        let index = packets.len();
        if bytes.len() - pos < RECORD_HEADER_LEN {
            return Err(DataError::TruncatedRecord(format!(
                "record {index} header at offset {pos} has {} of 16 bytes",
                bytes.len() - pos
            )));
        }
        let h = &bytes[pos..pos + RECORD_HEADER_LEN];
        let ts_sec = order.u32(&h[0..4]);
        let ts_usec = order.u32(&h[4..8]);
        let incl_len = order.u32(&h[8..12]);
        let orig_len = order.u32(&h[12..16]);
        if incl_len > orig_len {
            return Err(DataError::LengthOverflow { index, incl_len, orig_len });
        }
        pos += RECORD_HEADER_LEN;
        let len = incl_len as usize;
        if bytes.len() - pos < len {
            return Err(DataError::TruncatedRecord(format!(
                "record {index} payload has {} of {len} bytes",
                bytes.len() - pos
            )));
        }
        packets.push(CapturedPacket { ts_sec, ts_usec, orig_len, data: bytes[pos..pos + len].to_vec() });
        pos += len;
    }
    Ok(CaptureFile { byte_order: order, version_major, version_minor, snaplen, linktype, packets })
}

pub fn write_capture(capture: &CaptureFile) -> Vec<u8> {
    let o = capture.byte_order;
    let mut out = Vec::with_capacity(GLOBAL_HEADER_LEN + capture.packets.iter().map(|p| 16 + p.data.len()).sum::<usize>());
    o.put_u32(&mut out, MAGIC);
    o.put_u16(&mut out, capture.version_major);
    o.put_u16(&mut out, capture.version_minor);
    o.put_u32(&mut out, 0); // thiszone
    o.put_u32(&mut out, 0); // sigfigs
    o.put_u32(&mut out, capture.snaplen);
    o.put_u32(&mut out, capture.linktype);
    for p in &capture.packets {
        o.put_u32(&mut out, p.ts_sec);
        o.put_u32(&mut out, p.ts_usec);
        o.put_u32(&mut out, p.data.len() as u32);
        o.put_u32(&mut out, p.orig_len);
        out.extend_from_slice(&p.data);
    }
    out
}

/// Starts a new flow whenever the gap to the previous packet exceeds
/// `window_seconds`. Zero-length records are skipped.
pub fn capture_to_flows(capture: &CaptureFile, window_seconds: f64) -> Result<Vec<FlowRecord>, DataError> {
    if !(window_seconds > 0.0) {
        return Err(DataError::InvalidWindow(window_seconds));
    }
    let mut flows: Vec<FlowRecord> = Vec::new();
    let mut last_ts: Option<f64> = None;
    for p in capture.packets.iter().filter(|p| !p.data.is_empty()) {
        let ts = p.timestamp();
        let split = last_ts.is_none_or(|prev| ts - prev > window_seconds);
        if split {
            flows.push(FlowRecord::new(format!("flow-{:06}", flows.len()), Vec::new(), Label::Unlabeled));
        }
        flows.last_mut().expect("pushed above").packets.push(p.data.clone());
        last_ts = Some(ts);
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le_header() -> Vec<u8> {
        let mut v = vec![0xD4, 0xC3, 0xB2, 0xA1, 0x02, 0x00, 0x04, 0x00];
        v.extend_from_slice(&[0; 8]);
        v.extend_from_slice(&65_535u32.to_le_bytes());
        v.extend_from_slice(&1u32.to_le_bytes());
        v
    }

    #[test]
    fn header_only() {
        let cap = read_capture(&le_header()).unwrap();
        assert_eq!(cap.byte_order, ByteOrder::Little);
        assert!(cap.packets.is_empty());
        assert_eq!((cap.version_major, cap.version_minor, cap.snaplen), (2, 4, 65_535));
    }

    #[test]
    fn hand_assembled_record() {
        let mut bytes = le_header();
        bytes.extend_from_slice(&10u32.to_le_bytes());
        bytes.extend_from_slice(&500u32.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&60u32.to_le_bytes());
        bytes.extend_from_slice(b"ABCD");
        let cap = read_capture(&bytes).unwrap();
        assert_eq!(cap.packets.len(), 1);
        assert_eq!(cap.packets[0].data, b"ABCD");
        assert_eq!(cap.packets[0].orig_len, 60);
        assert_eq!(write_capture(&cap), bytes);

        assert!(matches!(read_capture(&bytes[..bytes.len() - 2]), Err(DataError::TruncatedRecord(_))));
        assert!(matches!(read_capture(&bytes[..30]), Err(DataError::TruncatedRecord(_))));
    }

    #[test]
    fn error_paths() {
        let mut bad = le_header();
        bad[0] = 0;
        assert!(matches!(read_capture(&bad), Err(DataError::BadMagic(_))));
        let mut over = le_header();
        for v in [0u32, 0, 8, 4] {
            over.extend_from_slice(&v.to_le_bytes());
        }
        over.extend_from_slice(&[0; 8]);
        assert!(matches!(read_capture(&over), Err(DataError::LengthOverflow { incl_len: 8, orig_len: 4, .. })));
    }

    #[test]
    fn big_endian_round_trip() {
        let cap = CaptureFile::new(
            ByteOrder::Big,
            vec![
                CapturedPacket { ts_sec: 1, ts_usec: 2, orig_len: 3, data: vec![1, 2, 3] },
                CapturedPacket { ts_sec: 5, ts_usec: 0, orig_len: 9, data: vec![0xFF] },
            ],
        );
        let bytes = write_capture(&cap);
        assert_eq!(&bytes[..4], &[0xA1, 0xB2, 0xC3, 0xD4]);
        assert_eq!(read_capture(&bytes).unwrap(), cap);
    }

    fn at(ts_sec: u32) -> CapturedPacket {
        CapturedPacket { ts_sec, ts_usec: 0, orig_len: 1, data: vec![ts_sec as u8 + 1] }
    }

    #[test]
    fn flow_assembly() {
        let cap = CaptureFile::new(ByteOrder::Little, vec![at(0), at(1), at(2)]);
        let flows = capture_to_flows(&cap, 5.0).unwrap();
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].packets.len(), 3);
        assert_eq!(flows[0].label, Label::Unlabeled);

        let cap = CaptureFile::new(ByteOrder::Little, vec![at(0), at(10)]);
        assert_eq!(capture_to_flows(&cap, 5.0).unwrap().len(), 2);

        let cap = CaptureFile::new(ByteOrder::Little, vec![]);
        assert!(capture_to_flows(&cap, 5.0).unwrap().is_empty());
        assert!(capture_to_flows(&cap, 0.0).is_err());
    }
}
