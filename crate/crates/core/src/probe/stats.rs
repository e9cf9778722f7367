use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TrainConfig;

/// One packet of a train: when it left and, unless lost, when its echo came back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Echo {
    pub seq: u32,
    pub tx_ps: u64,
    pub rx_ps: Option<u64>,
}

/// Summary of one train. RTT fields are `None` when nothing came back;
/// throughput also needs two distinct receive times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub sent: u32,
    pub received: u32,
    pub lost: u32,
    pub loss_rate: f64,
    pub rtt_us: Option<f64>,
    pub rtt_mean_us: Option<f64>,
    pub jitter_ns: Option<f64>,
    pub throughput_mbps: Option<f64>,
}

impl TrainStats {
    pub fn is_empty(&self) -> bool {
        self.received == 0
    }
}

/// Order-independent running sums over (tx, rx) pairs, kept as exact
/// integers in picoseconds.
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    received: u64,
    min_rtt: u64,
    sum: u128,
    sum_sq: Option<u128>,
    sum_sq_f: f64,
    first_rx: u64,
    last_rx: u64,
}

impl Default for StatsAccumulator {
    fn default() -> Self {
        Self {
            received: 0,
            min_rtt: u64::MAX,
            sum: 0,
            sum_sq: Some(0),
            sum_sq_f: 0.0,
            first_rx: u64::MAX,
            last_rx: 0,
        }
    }
}

impl StatsAccumulator {
    pub fn push(&mut self, tx_ps: u64, rx_ps: u64) {
        let rtt = rx_ps.saturating_sub(tx_ps);
        self.received += 1;
        self.min_rtt = self.min_rtt.min(rtt);
        self.sum += rtt as u128;
        let sq = (rtt as u128) * (rtt as u128);
        self.sum_sq = self.sum_sq.and_then(|s| s.checked_add(sq));
        self.sum_sq_f += (rtt as f64) * (rtt as f64);
        self.first_rx = self.first_rx.min(rx_ps);
        self.last_rx = self.last_rx.max(rx_ps);
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    fn variance_ps2(&self) -> f64 {
        let n = self.received as u128;
        let exact = self.sum_sq.and_then(|sq| {
            let a = sq.checked_mul(n)?;
            let b = self.sum.checked_mul(self.sum)?;
            Some(a.saturating_sub(b) as f64 / (n * n) as f64)
        });
        exact.unwrap_or_else(|| {
            let mean = self.sum as f64 / n as f64;
            (self.sum_sq_f / n as f64 - mean * mean).max(0.0)
        })
    }

    /// `count` packets were sent, each `ip_packet_bytes` long at the IP layer.
    pub fn finish(&self, count: u32, ip_packet_bytes: u32) -> TrainStats {
        let received = self.received.min(count as u64) as u32;
        let lost = count - received;
        let loss_rate = if count == 0 {
            0.0
        } else {
            lost as f64 / count as f64
        };
        let mut s = TrainStats {
            sent: count,
            received,
            lost,
            loss_rate,
            rtt_us: None,
            rtt_mean_us: None,
            jitter_ns: None,
            throughput_mbps: None,
        };
        if self.received == 0 {
            return s;
        }
        s.rtt_us = Some(self.min_rtt as f64 / 1e6);
        s.rtt_mean_us = Some(self.sum as f64 / self.received as f64 / 1e6);
        s.jitter_ns = Some(self.variance_ps2().sqrt() / 1e3);
        if self.last_rx > self.first_rx {
            let bits = 8.0 * ip_packet_bytes as f64 * self.received as f64;
            // bits per picosecond -> Mb/s
            s.throughput_mbps = Some(bits / (self.last_rx - self.first_rx) as f64 * 1e6);
        }
        s
    }
}

/// Summarises the echoes of one train. Each sequence number is expected at
/// most once; packets with no echo entry count as lost.
pub fn compute_stats(cfg: &TrainConfig, echoes: &[Echo]) -> TrainStats {
    let mut acc = StatsAccumulator::default();
    for e in echoes {
        if let Some(rx) = e.rx_ps {
            acc.push(e.tx_ps, rx);
        }
    }
    acc.finish(cfg.count, cfg.ip_payload_bytes)
}

/// IP-layer ceiling at 100 Gb/s for `L`-byte packets with 42 bytes of
/// Ethernet framing, preamble and gap.
pub fn theoretical_ceiling_mbps(ip_payload_bytes: u32) -> f64 {
    let l = ip_payload_bytes as f64;
    100_000.0 * l / (l + crate::dataplane::FRAMING_OVERHEAD_BYTES as f64)
}

/// A calibration measurement and the two-way propagation of its fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRun {
    pub stats: TrainStats,
    pub two_way_propagation_us: f64,
}

impl CalibrationRun {
    /// Fixed latency added by the equipment. Uses the mean RTT: the minimum
    /// of a long train sits several jitter deviations below the true delay.
    pub fn delta_us(&self) -> Option<f64> {
        self.stats
            .rtt_mean_us
            .map(|rtt| rtt - self.two_way_propagation_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBudget {
    pub probe_us: f64,
    pub switches_us: f64,
    pub optical_us: f64,
}

impl LatencyBudget {
    pub fn total_us(&self) -> f64 {
        self.probe_us + self.switches_us + self.optical_us
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("calibration run `{0}` received no packets")]
    NoEchoes(&'static str),
    #[error("{component} latency came out negative ({value_us} us); calibration inputs are inconsistent")]
    NegativeBudget { component: &'static str, value_us: f64 },
}

/// Splits the fixed delay between probe, aggregation switches and optical
/// equipment from three nested calibration set-ups: probe looped on itself,
/// looped through the switches, and through the full optical path.
pub fn latency_budget(
    loopback: &CalibrationRun,
    switch: &CalibrationRun,
    fiber: &CalibrationRun,
) -> Result<LatencyBudget, BudgetError> {
    let d = |r: &CalibrationRun, name| r.delta_us().ok_or(BudgetError::NoEchoes(name));
    latency_budget_from_deltas(d(loopback, "loopback")?, d(switch, "switch")?, d(fiber, "fiber")?)
}

pub fn latency_budget_from_deltas(
    loopback_us: f64,
    switch_us: f64,
    fiber_us: f64,
) -> Result<LatencyBudget, BudgetError> {
    let b = LatencyBudget {
        probe_us: loopback_us,
        switches_us: switch_us - loopback_us,
        optical_us: fiber_us - switch_us,
    };
    for (component, value_us) in [
        ("probe", b.probe_us),
        ("switches", b.switches_us),
        ("optical", b.optical_us),
    ] {
        if value_us < 0.0 {
            return Err(BudgetError::NegativeBudget {
                component,
                value_us,
            });
        }
    }
    Ok(b)
}
