//! Probe packet layout, big-endian:
//!
//! ```text
//! 0  magic u32 = 0x4D485052
//! 4  version u8 = 1
//! 5  flags u8 (bits 0-1: BERT type)
//! 6  vlan u16
//! 8  train_id u32
//! 12 seq u32
//! 16 count u32
//! 20 tx_timestamp_ns u64
//! 28 payload
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::BertType;

pub const MAGIC: u32 = 0x4D48_5052;
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 28;
pub const MAX_VLAN: u16 = 4095;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeHeader {
    pub vlan_id: u16,
    pub bert_type: BertType,
    pub train_id: u32,
    pub seq: u32,
    pub count: u32,
    pub tx_timestamp_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbePacket {
    pub header: ProbeHeader,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("datagram of {0} bytes is shorter than the probe header")]
    TooShort(usize),
    #[error("bad magic {0:#010x}")]
    BadMagic(u32),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown BERT type code {0}")]
    BadBertType(u8),
    #[error("reserved flag bits set: {0:#04x}")]
    ReservedFlags(u8),
    #[error("VLAN id {0} exceeds 4095")]
    BadVlan(u16),
}

pub fn encode_into(p: &ProbePacket, out: &mut Vec<u8>) {
    let h = &p.header;
    out.clear();
    out.reserve(HEADER_LEN + p.payload.len());
    out.extend_from_slice(&MAGIC.to_be_bytes());
    out.push(VERSION);
    out.push(h.bert_type.code());
    out.extend_from_slice(&h.vlan_id.to_be_bytes());
    out.extend_from_slice(&h.train_id.to_be_bytes());
    out.extend_from_slice(&h.seq.to_be_bytes());
    out.extend_from_slice(&h.count.to_be_bytes());
    out.extend_from_slice(&h.tx_timestamp_ns.to_be_bytes());
    out.extend_from_slice(&p.payload);
}

pub fn encode(p: &ProbePacket) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(p, &mut out);
    out
}

fn be<const N: usize>(b: &[u8], at: usize) -> [u8; N] {
    b[at..at + N].try_into().expect("length checked")
}

pub fn decode_header(b: &[u8]) -> Result<ProbeHeader, WireError> {
    if b.len() < HEADER_LEN {
        return Err(WireError::TooShort(b.len()));
    }
    let magic = u32::from_be_bytes(be(b, 0));
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    if b[4] != VERSION {
        return Err(WireError::BadVersion(b[4]));
    }
    let flags = b[5];
    if flags & !0b11 != 0 {
        return Err(WireError::ReservedFlags(flags));
    }
    let bert_type = BertType::from_code(flags).ok_or(WireError::BadBertType(flags))?;
    let vlan_id = u16::from_be_bytes(be(b, 6));
    if vlan_id > MAX_VLAN {
        return Err(WireError::BadVlan(vlan_id));
    }
    Ok(ProbeHeader {
        vlan_id,
        bert_type,
        train_id: u32::from_be_bytes(be(b, 8)),
        seq: u32::from_be_bytes(be(b, 12)),
        count: u32::from_be_bytes(be(b, 16)),
        tx_timestamp_ns: u64::from_be_bytes(be(b, 20)),
    })
}

pub fn decode(b: &[u8]) -> Result<ProbePacket, WireError> {
    Ok(ProbePacket {
        header: decode_header(b)?,
        payload: b[HEADER_LEN..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bert() -> impl Strategy<Value = BertType> {
        prop_oneof![
            Just(BertType::Zeros),
            Just(BertType::Incrementing),
            Just(BertType::Prbs31)
        ]
    }

    prop_compose! {
        fn packet()(
            vlan_id in 0u16..=MAX_VLAN,
            bert_type in bert(),
            train_id in any::<u32>(),
            seq in any::<u32>(),
            count in any::<u32>(),
            tx_timestamp_ns in any::<u64>(),
            payload in prop::collection::vec(any::<u8>(), 0..256),
        ) -> ProbePacket {
            ProbePacket {
                header: ProbeHeader { vlan_id, bert_type, train_id, seq, count, tx_timestamp_ns },
                payload,
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(p in packet()) {
            let bytes = encode(&p);
            prop_assert_eq!(bytes.len(), HEADER_LEN + p.payload.len());
            prop_assert_eq!(decode(&bytes).unwrap(), p);
        }
    }

    #[test]
    fn extremes_round_trip() {
        let p = ProbePacket {
            header: ProbeHeader {
                vlan_id: MAX_VLAN,
                bert_type: BertType::Prbs31,
                train_id: u32::MAX,
                seq: u32::MAX,
                count: u32::MAX,
                tx_timestamp_ns: u64::MAX,
            },
            payload: vec![0xFF; 9],
        };
        assert_eq!(decode(&encode(&p)).unwrap(), p);
    }

    #[test]
    fn layout_is_fixed() {
        let p = ProbePacket {
            header: ProbeHeader {
                vlan_id: 0x0123,
                bert_type: BertType::Incrementing,
                train_id: 0x0A0B0C0D,
                seq: 2,
                count: 3,
                tx_timestamp_ns: 0x0102030405060708,
            },
            payload: vec![0xAA],
        };
        assert_eq!(
            encode(&p),
            [
                0x4D, 0x48, 0x50, 0x52, 1, 1, 0x01, 0x23, 0x0A, 0x0B, 0x0C, 0x0D, 0, 0, 0, 2, 0, 0,
                0, 3, 1, 2, 3, 4, 5, 6, 7, 8, 0xAA
            ]
        );
    }

    #[test]
    fn rejects_foreign_datagrams() {
        assert_eq!(decode(b"hello"), Err(WireError::TooShort(5)));
        assert!(matches!(decode(&[0u8; 40]), Err(WireError::BadMagic(0))));
        let mut b = encode(&ProbePacket {
            header: ProbeHeader {
                vlan_id: 1,
                bert_type: BertType::Zeros,
                train_id: 0,
                seq: 0,
                count: 1,
                tx_timestamp_ns: 0,
            },
            payload: vec![],
        });
        b[6] = 0x10;
        assert_eq!(decode(&b), Err(WireError::BadVlan(0x1001)));
        b[6] = 0;
        b[5] = 3;
        assert_eq!(decode(&b), Err(WireError::BadBertType(3)));
        b[5] = 0x80;
        assert_eq!(decode(&b), Err(WireError::ReservedFlags(0x80)));
        b[5] = 0;
        b[4] = 2;
        assert_eq!(decode(&b), Err(WireError::BadVersion(2)));
    }
}
