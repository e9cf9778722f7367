//! Active probe: packet-train generation, wire codec, train statistics,
//! latency-budget decomposition, and two backends (simulated data plane and
//! live UDP sender/reflector).

mod live;
mod prbs;
mod sim;
mod stats;
pub mod wire;

use std::net::Ipv4Addr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataplane::TrainSchedule;

pub use live::{live_measure, LiveProbe, Reflector, DEFAULT_WINDOW};
pub use prbs::{Prbs31, PRBS31_SEED};
pub use sim::{simulate_echoes, simulate_train, train_seed, SimulatedProbe};
pub use stats::{
    compute_stats, latency_budget, latency_budget_from_deltas, theoretical_ceiling_mbps,
    BudgetError, CalibrationRun, Echo, LatencyBudget, StatsAccumulator, TrainStats,
};
pub use wire::{ProbeHeader, ProbePacket, WireError};

/// IPv4 20 + UDP 8 + probe header 28.
pub const PACKET_OVERHEAD_BYTES: u32 = 20 + 8 + wire::HEADER_LEN as u32;
pub const MIN_PACKET_BYTES: u32 = 64;
pub const MAX_PACKET_BYTES: u32 = 9000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BertType {
    #[default]
    Zeros,
    Incrementing,
    Prbs31,
}

impl BertType {
    pub fn code(self) -> u8 {
        match self {
            BertType::Zeros => 0,
            BertType::Incrementing => 1,
            BertType::Prbs31 => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(BertType::Zeros),
            1 => Some(BertType::Incrementing),
            2 => Some(BertType::Prbs31),
            _ => None,
        }
    }

    /// Payload bytes for one packet. Every packet carries the same pattern,
    /// restarted from the beginning.
    pub fn payload(self, len: usize) -> Vec<u8> {
        match self {
            BertType::Zeros => vec![0; len],
            BertType::Incrementing => (0..len).map(|i| i as u8).collect(),
            BertType::Prbs31 => {
                let mut v = vec![0; len];
                Prbs31::default().fill(&mut v);
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub train_id: u32,
    pub count: u32,
    /// Size of each IP packet, headers included.
    pub ip_payload_bytes: u32,
    pub vlan_id: u16,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub bert_type: BertType,
    pub timeout_ms: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            train_id: 1,
            count: 1_000_000,
            ip_payload_bytes: 1456,
            vlan_id: 100,
            src_ip: Ipv4Addr::new(10, 0, 0, 1),
            dst_ip: Ipv4Addr::new(10, 0, 0, 2),
            src_port: 0,
            dst_port: 7878,
            bert_type: BertType::Prbs31,
            timeout_ms: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        let bad = |m: String| Err(ProbeError::InvalidConfig(m));
        if self.count == 0 {
            return bad("count must be at least 1".into());
        }
        if !(MIN_PACKET_BYTES..=MAX_PACKET_BYTES).contains(&self.ip_payload_bytes) {
            return bad(format!(
                "packet size {} outside [{MIN_PACKET_BYTES}, {MAX_PACKET_BYTES}]",
                self.ip_payload_bytes
            ));
        }
        if self.vlan_id > wire::MAX_VLAN {
            return bad(format!("VLAN id {} exceeds 4095", self.vlan_id));
        }
        Ok(())
    }

    /// BERT bytes carried after the probe header.
    pub fn bert_len(&self) -> usize {
        self.ip_payload_bytes.saturating_sub(PACKET_OVERHEAD_BYTES) as usize
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule::new(self.count, self.ip_payload_bytes)
    }
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid train configuration: {0}")]
    InvalidConfig(String),
    #[error("train timed out after {timeout_ms} ms with {} of {} packets back", partial.received, partial.sent)]
    Timeout { timeout_ms: u64, partial: TrainStats },
    #[error("cannot bind {addr}: {source}")]
    PortBindFailure {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no circuit configured for VLAN {0}")]
    UnknownCircuit(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that can run a train and summarise it.
pub trait ProbeBackend {
    fn run_train(&mut self, cfg: &TrainConfig) -> Result<TrainStats, ProbeError>;
}

/// Source of transmit timestamps, in picoseconds.
pub trait TxClock {
    fn now_ps(&mut self) -> u64;
}

/// Back-to-back transmission at line rate: each reading advances by one
/// frame time, quantized to the probe clock tick.
#[derive(Debug, Clone)]
pub struct LineRateClock {
    schedule: TrainSchedule,
    next: u32,
}

impl LineRateClock {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            schedule: cfg.schedule(),
            next: 0,
        }
    }
}

impl TxClock for LineRateClock {
    fn now_ps(&mut self) -> u64 {
        let t = self.schedule.tx_ps(self.next);
        self.next = self.next.saturating_add(1);
        t
    }
}

/// Host monotonic clock; nanosecond resolution at best.
#[derive(Debug, Clone)]
pub struct MonotonicClock {
    start: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl TxClock for MonotonicClock {
    fn now_ps(&mut self) -> u64 {
        self.start.elapsed().as_nanos() as u64 * 1000
    }
}

/// Lazily yields the packets of a train, timestamped by `clock` as each is
/// produced.
pub struct TrainGenerator<'c, C: TxClock> {
    cfg: TrainConfig,
    payload: Vec<u8>,
    clock: &'c mut C,
    next: u64,
}

pub fn generate_train<'c, C: TxClock>(cfg: &TrainConfig, clock: &'c mut C) -> TrainGenerator<'c, C> {
    TrainGenerator {
        payload: cfg.bert_type.payload(cfg.bert_len()),
        cfg: cfg.clone(),
        clock,
        next: 0,
    }
}

impl<C: TxClock> Iterator for TrainGenerator<'_, C> {
    type Item = ProbePacket;

    fn next(&mut self) -> Option<ProbePacket> {
        if self.next >= self.cfg.count as u64 {
            return None;
        }
        let seq = self.next as u32;
        self.next += 1;
        Some(ProbePacket {
            header: ProbeHeader {
                vlan_id: self.cfg.vlan_id,
                bert_type: self.cfg.bert_type,
                train_id: self.cfg.train_id,
                seq,
                count: self.cfg.count,
                tx_timestamp_ns: self.clock.now_ps() / 1000,
            },
            payload: self.payload.clone(),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.cfg.count as u64 - self.next) as usize;
        (n, Some(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(count: u32, bert_type: BertType) -> TrainConfig {
        TrainConfig {
            count,
            bert_type,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn three_zero_packets() {
        let c = cfg(3, BertType::Zeros);
        let pkts: Vec<_> = generate_train(&c, &mut LineRateClock::new(&c)).collect();
        assert_eq!(pkts.iter().map(|p| p.header.seq).collect::<Vec<_>>(), [0, 1, 2]);
        assert!(pkts.iter().all(|p| p.payload.iter().all(|&b| b == 0)));
        assert_eq!(pkts[0].payload.len(), 1456 - 56);
    }

    #[test]
    fn timestamps_strictly_increase() {
        let c = cfg(1000, BertType::Incrementing);
        let ts: Vec<_> = generate_train(&c, &mut LineRateClock::new(&c))
            .map(|p| p.header.tx_timestamp_ns)
            .collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn prbs_payload_starts_with_reference_bits() {
        let c = cfg(1, BertType::Prbs31);
        let p = generate_train(&c, &mut LineRateClock::new(&c)).next().unwrap();
        // 28 zeros, then three ones, from the all-ones register.
        assert_eq!(&p.payload[..4], &[0x00, 0x00, 0x00, 0x0E]);
    }

    #[test]
    fn deterministic_byte_stream() {
        let c = cfg(50, BertType::Prbs31);
        let a: Vec<_> = generate_train(&c, &mut LineRateClock::new(&c))
            .map(|p| wire::encode(&p))
            .collect();
        let b: Vec<_> = generate_train(&c, &mut LineRateClock::new(&c))
            .map(|p| wire::encode(&p))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn million_packet_train_is_lazy() {
        let c = cfg(1_000_000, BertType::Zeros);
        let mut clock = LineRateClock::new(&c);
        let g = generate_train(&c, &mut clock);
        assert_eq!(g.size_hint(), (1_000_000, Some(1_000_000)));
        assert_eq!(g.last().unwrap().header.seq, 999_999);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(cfg(0, BertType::Zeros).validate().is_err());
        let mut c = TrainConfig::default();
        c.ip_payload_bytes = 63;
        assert!(c.validate().is_err());
        c.ip_payload_bytes = 9001;
        assert!(c.validate().is_err());
        c.ip_payload_bytes = 64;
        c.vlan_id = 4096;
        assert!(c.validate().is_err());
        assert!(cfg(u32::MAX, BertType::Zeros).validate().is_ok());
    }
}
