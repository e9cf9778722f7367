//! Simulated data plane: latency/loss/jitter composition along a circuit,
//! per-packet timing of a probe train, and SNR / pre-FEC BER evolution of
//! an optical channel under an attenuation ramp.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LatencyPath, NodeKind, Topology};

/// Probe clock: 322 MHz, one tick every 3.1 ns.
pub const CLOCK_TICK_PS: u64 = 3_100;
pub const LINE_RATE_BPS: f64 = 100e9;
/// Preamble 8 + Ethernet header 14 + VLAN tag 4 + FCS 4 + inter-frame gap 12.
pub const FRAMING_OVERHEAD_BYTES: u32 = 42;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("element `{id}`: loss probability {p} outside [0, 1]")]
    LossOutOfRange { id: String, p: f64 },
    #[error("element `{id}`: negative {what} {value}")]
    Negative {
        id: String,
        what: &'static str,
        value: f64,
    },
    #[error("path length must be non-negative, got {0} km")]
    NegativeLength(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathElement {
    pub id: String,
    pub fixed_latency_us: f64,
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default)]
    pub jitter_std_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathModel {
    pub elements: Vec<PathElement>,
    pub total_length_km: f64,
    pub prop_const_us_per_km: f64,
}

/// Loss and jitter attributed to one kind of network element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ElementProfile {
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default)]
    pub jitter_std_ns: f64,
}

pub type ElementProfiles = BTreeMap<NodeKind, ElementProfile>;

impl PathModel {
    pub fn validate(&self) -> Result<(), PathError> {
        if !(self.total_length_km >= 0.0) {
            return Err(PathError::NegativeLength(self.total_length_km));
        }
        for e in &self.elements {
            if !(0.0..=1.0).contains(&e.loss_prob) {
                return Err(PathError::LossOutOfRange {
                    id: e.id.clone(),
                    p: e.loss_prob,
                });
            }
            for (what, value) in [
                ("latency", e.fixed_latency_us),
                ("jitter", e.jitter_std_ns),
            ] {
                if !(value >= 0.0) {
                    return Err(PathError::Negative {
                        id: e.id.clone(),
                        what,
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    /// Builds the path a packet takes along `route`, every node on it
    /// (endpoints included) contributing its fixed latency and the loss and
    /// jitter profile of its kind.
    pub fn from_route(t: &Topology, route: &LatencyPath, profiles: &ElementProfiles) -> Self {
        let elements = route
            .nodes
            .iter()
            .filter_map(|id| t.node(id))
            .map(|n| {
                let p = profiles.get(&n.kind).copied().unwrap_or_default();
                PathElement {
                    id: n.id.clone(),
                    fixed_latency_us: n.fixed_latency_us,
                    loss_prob: p.loss_prob,
                    jitter_std_ns: p.jitter_std_ns,
                }
            })
            .collect();
        Self {
            elements,
            total_length_km: route.length_km,
            prop_const_us_per_km: t.prop_const_us_per_km,
        }
    }

    /// Appends `other`. Its fiber is re-expressed with this path's
    /// propagation constant when the two differ.
    pub fn concat(&self, other: &PathModel) -> PathModel {
        let mut elements = self.elements.clone();
        elements.extend(other.elements.iter().cloned());
        let other_km = if other.prop_const_us_per_km == self.prop_const_us_per_km {
            other.total_length_km
        } else {
            other.total_length_km * other.prop_const_us_per_km / self.prop_const_us_per_km
        };
        PathModel {
            elements,
            total_length_km: self.total_length_km + other_km,
            prop_const_us_per_km: self.prop_const_us_per_km,
        }
    }

    /// Out-and-back path as seen by a looped-back probe.
    pub fn round_trip(&self) -> PathModel {
        let mut back = self.clone();
        back.elements.reverse();
        self.concat(&back)
    }

    pub fn propagation_us(&self) -> f64 {
        self.total_length_km * self.prop_const_us_per_km
    }

    pub fn fixed_latency_us(&self) -> f64 {
        self.elements.iter().map(|e| e.fixed_latency_us).sum()
    }

    pub fn aggregate_loss(&self) -> f64 {
        1.0 - self
            .elements
            .iter()
            .map(|e| 1.0 - e.loss_prob)
            .product::<f64>()
    }

    /// Root-sum-square of the element jitters.
    pub fn jitter_std_ns(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.jitter_std_ns * e.jitter_std_ns)
            .sum::<f64>()
            .sqrt()
    }
}

/// Deterministic part of the one-way delay (jitter excluded).
pub fn one_way_delay_us(p: &PathModel) -> f64 {
    p.fixed_latency_us() + p.propagation_us()
}

pub fn quantize_ps(t_ps: u64) -> u64 {
    (t_ps + CLOCK_TICK_PS / 2) / CLOCK_TICK_PS * CLOCK_TICK_PS
}

/// Back-to-back transmit schedule of a train at line rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub count: u32,
    /// Bytes of IP packet (header included).
    pub ip_packet_bytes: u32,
    pub line_rate_bps: f64,
    pub start_ps: u64,
}

impl TrainSchedule {
    pub fn new(count: u32, ip_packet_bytes: u32) -> Self {
        Self {
            count,
            ip_packet_bytes,
            line_rate_bps: LINE_RATE_BPS,
            start_ps: 0,
        }
    }

    /// Serialization time of one frame, framing overhead included.
    pub fn frame_time_ps(&self) -> f64 {
        (self.ip_packet_bytes + FRAMING_OVERHEAD_BYTES) as f64 * 8.0 / self.line_rate_bps * 1e12
    }

    /// Tick-quantized transmit timestamp of packet `seq`.
    pub fn tx_ps(&self, seq: u32) -> u64 {
        quantize_ps(self.start_ps + (seq as f64 * self.frame_time_ps()).round() as u64)
    }

    /// Time from first transmission until the last frame has left.
    pub fn duration_ps(&self) -> u64 {
        (self.count as f64 * self.frame_time_ps()).round() as u64
    }
}

/// Pushes every packet of `schedule` through `p`, calling `sink(seq, tx_ps,
/// rx_ps)` in sequence order; `rx_ps` is `None` for lost packets.
///
/// Each packet is dropped with probability `1 − Π(1 − loss_i)`; survivors
/// arrive after the deterministic delay plus Gaussian jitter with the
/// path's root-sum-square deviation, quantized to the clock tick. Packets in
/// `forced_loss` are always dropped.
pub fn transmit_train_with<F>(
    p: &PathModel,
    schedule: &TrainSchedule,
    seed: u64,
    forced_loss: &BTreeSet<u32>,
    mut sink: F,
) where
    F: FnMut(u32, u64, Option<u64>),
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loss = p.aggregate_loss();
    let sigma_ps = p.jitter_std_ns() * 1e3;
    let delay_ps = one_way_delay_us(p) * 1e6;
    for seq in 0..schedule.count {
        let tx = schedule.tx_ps(seq);
        // Draw order is fixed so the loss pattern does not depend on jitter.
        let lost = loss > 0.0 && rng.random::<f64>() < loss;
        let jitter = if sigma_ps > 0.0 {
            sigma_ps * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        if lost || forced_loss.contains(&seq) {
            sink(seq, tx, None);
            continue;
        }
        let arrival = (tx as f64 + delay_ps + jitter).max(tx as f64);
        sink(seq, tx, Some(quantize_ps(arrival.round() as u64)));
    }
}

/// Collecting form of [`transmit_train_with`]: entry `i` is the receive
/// timestamp of packet `i`, or `None` if it was lost.
pub fn transmit_train(p: &PathModel, schedule: &TrainSchedule, seed: u64) -> Vec<Option<u64>> {
    let mut out = Vec::with_capacity(schedule.count as usize);
    transmit_train_with(p, schedule, seed, &BTreeSet::new(), |_, _, rx| out.push(rx));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelQuality {
    pub t_s: f64,
    pub snr_db: f64,
    pub prefec_ber: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationScenario {
    pub snr0_db: f64,
    pub ramp_db_per_s: f64,
    pub sample_period_s: f64,
    pub duration_s: f64,
    /// Steady period before the attenuator starts ramping.
    pub onset_s: f64,
}

impl Default for DegradationScenario {
    fn default() -> Self {
        Self {
            snr0_db: 23.0,
            ramp_db_per_s: 0.25,
            sample_period_s: 1.0,
            duration_s: 900.0,
            onset_s: 10.0,
        }
    }
}

impl DegradationScenario {
    pub fn with_ramp(ramp_db_per_s: f64) -> Self {
        Self {
            ramp_db_per_s,
            ..Default::default()
        }
    }

    pub fn snr_at(&self, t_s: f64) -> f64 {
        self.snr0_db - self.ramp_db_per_s * (t_s - self.onset_s).max(0.0)
    }
}

/// Maps SNR to pre-FEC bit error rate.
pub trait BerModel {
    fn ber(&self, snr_db: f64) -> f64;
}

/// Coherent QPSK: BER = ½·erfc(√(SNR/2)), SNR linear.
#[derive(Debug, Clone, Copy, Default)]
pub struct QpskBer;

impl BerModel for QpskBer {
    fn ber(&self, snr_db: f64) -> f64 {
        qpsk_ber(snr_db)
    }
}

pub fn qpsk_ber(snr_db: f64) -> f64 {
    let snr_lin = 10f64.powf(snr_db / 10.0);
    0.5 * statrs::function::erf::erfc((snr_lin / 2.0).sqrt())
}

pub fn evolve_quality(s: &DegradationScenario) -> Vec<ChannelQuality> {
    evolve_quality_with(s, &QpskBer)
}

/// Samples SNR and BER every `sample_period_s` from 0 to `duration_s`.
pub fn evolve_quality_with(s: &DegradationScenario, model: &dyn BerModel) -> Vec<ChannelQuality> {
    assert!(s.sample_period_s > 0.0, "sample period must be positive");
    assert!(s.ramp_db_per_s >= 0.0, "ramp must be non-negative");
    let samples = (s.duration_s / s.sample_period_s + 1e-9).floor() as u64;
    (0..=samples)
        .map(|k| {
            let t_s = k as f64 * s.sample_period_s;
            let snr_db = s.snr_at(t_s);
            ChannelQuality {
                t_s,
                snr_db,
                prefec_ber: model.ber(snr_db),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn element(id: &str, lat: f64, loss: f64, jitter: f64) -> PathElement {
        PathElement {
            id: id.into(),
            fixed_latency_us: lat,
            loss_prob: loss,
            jitter_std_ns: jitter,
        }
    }

    fn path(elements: Vec<PathElement>, km: f64) -> PathModel {
        PathModel {
            elements,
            total_length_km: km,
            prop_const_us_per_km: 4.899,
        }
    }

    #[test]
    fn one_way_delay_examples() {
        let p = path(vec![], 80.0);
        assert!((one_way_delay_us(&p) - 391.92).abs() < 1e-9);
        assert!((2.0 * one_way_delay_us(&p) - 783.84).abs() < 1e-9);
        assert_eq!(one_way_delay_us(&path(vec![], 0.0)), 0.0);
        // Half of the calibration deltas 0.84 / 1.26 / 13.1.
        let calib = path(
            vec![
                element("probe", 0.42, 0.0, 0.0),
                element("switches", 0.63, 0.0, 0.0),
                element("optics", 6.55, 0.0, 0.0),
            ],
            0.0,
        );
        assert!((2.0 * one_way_delay_us(&calib) - 15.2).abs() < 1e-9);
    }

    #[test]
    fn validate_rejects_bad_elements() {
        assert!(path(vec![element("x", 1.0, 1.5, 0.0)], 0.0).validate().is_err());
        assert!(path(vec![element("x", -1.0, 0.0, 0.0)], 0.0).validate().is_err());
        assert!(path(vec![], -1.0).validate().is_err());
        assert!(path(vec![element("x", 1.0, 1.0, 2.0)], 1.0).validate().is_ok());
    }

    #[test]
    fn round_trip_doubles_delay() {
        let p = path(vec![element("a", 0.3, 0.1, 2.0), element("b", 1.0, 0.2, 0.0)], 12.0);
        let rt = p.round_trip();
        assert!((one_way_delay_us(&rt) - 2.0 * one_way_delay_us(&p)).abs() < 1e-9);
        assert_eq!(rt.elements.len(), 4);
        assert_eq!(rt.elements[2].id, "b");
    }

    #[test]
    fn lossless_train_loses_nothing() {
        let p = path(vec![element("probe", 0.42, 0.0, 2.0)], 0.002);
        let rx = transmit_train(&p, &TrainSchedule::new(1_000_000, 1456), 1);
        assert_eq!(rx.iter().filter(|r| r.is_none()).count(), 0);
    }

    #[test]
    fn certain_loss_drops_everything() {
        let p = path(vec![element("cut", 0.0, 1.0, 0.0)], 0.0);
        let rx = transmit_train(&p, &TrainSchedule::new(1000, 1456), 1);
        assert!(rx.iter().all(|r| r.is_none()));
    }

    #[test]
    fn loss_count_follows_binomial_law() {
        // N = 1e7, p = 1e-6: mean 10, sigma = sqrt(N p (1 - p)) ~ 3.16.
        let n = 10_000_000u32;
        let p_loss = 1e-6;
        let mean = n as f64 * p_loss;
        let sigma = (n as f64 * p_loss * (1.0 - p_loss)).sqrt();
        let p = path(vec![element("lossy", 0.0, p_loss, 0.0)], 0.0);
        let mut lost = 0u64;
        transmit_train_with(&p, &TrainSchedule::new(n, 1456), 2024, &BTreeSet::new(), |_, _, rx| {
            lost += rx.is_none() as u64
        });
        assert!(
            (lost as f64 - mean).abs() <= 3.0 * sigma,
            "lost {lost}, expected {mean} ± {}",
            3.0 * sigma
        );
    }

    #[test]
    fn forced_loss_is_honoured() {
        let p = path(vec![], 1.0);
        let mut lost = Vec::new();
        transmit_train_with(&p, &TrainSchedule::new(100, 1456), 0, &BTreeSet::from([7, 42]), |seq, _, rx| {
            if rx.is_none() {
                lost.push(seq)
            }
        });
        assert_eq!(lost, [7, 42]);
    }

    #[test]
    fn schedule_spacing_matches_frame_time() {
        let s = TrainSchedule::new(10, 1456);
        // (1456 + 42) bytes * 8 bit / 100 Gb/s = 119.84 ns
        assert!((s.frame_time_ps() - 119_840.0).abs() < 1e-6);
        assert_eq!(s.tx_ps(0), 0);
        assert!(s.tx_ps(1) % CLOCK_TICK_PS == 0);
        assert!((s.tx_ps(1000) as f64 - 119_840_000.0).abs() <= CLOCK_TICK_PS as f64 / 2.0);
    }

    #[test]
    fn qpsk_ber_near_fec_limit() {
        // Oracle: BER = Q(sqrt(snr_lin)), Q evaluated by Simpson quadrature
        // of the Gaussian density over [x, x + 12].
        fn q_quadrature(x: f64) -> f64 {
            let n = 20_000;
            let h = 12.0 / n as f64;
            let f = |u: f64| (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut s = f(x) + f(x + 12.0);
            for i in 1..n {
                let u = x + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
            }
            s * h / 3.0
        }
        for snr_db in [0.0, 3.0, 6.25, 9.0, 12.0] {
            let oracle = q_quadrature(10f64.powf(snr_db / 10.0).sqrt());
            let got = qpsk_ber(snr_db);
            assert!(((got - oracle) / oracle).abs() < 1e-8, "{snr_db}: {got} vs {oracle}");
        }
        let at_limit = qpsk_ber(6.25);
        assert!((at_limit - 2.0e-2).abs() < 0.05e-2, "{at_limit}");
    }

    #[test]
    fn ber_limits() {
        assert_eq!(qpsk_ber(f64::INFINITY), 0.0);
        assert!((qpsk_ber(f64::NEG_INFINITY) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn evolve_examples() {
        let flat = evolve_quality(&DegradationScenario::with_ramp(0.0));
        assert!(flat.windows(2).all(|w| w[0].snr_db == w[1].snr_db));
        assert_eq!(flat.len(), 901);

        let s = DegradationScenario {
            onset_s: 0.0,
            ..DegradationScenario::with_ramp(0.25)
        };
        let series = evolve_quality(&s);
        let at40 = series.iter().find(|q| q.t_s == 40.0).unwrap();
        assert!((at40.snr_db - 13.0).abs() < 1e-12);
        assert!(series.iter().all(|q| (0.0..=0.5).contains(&q.prefec_ber)));
    }

    proptest! {
        #[test]
        fn delay_is_additive(
            a in prop::collection::vec(0.0f64..50.0, 0..5),
            b in prop::collection::vec(0.0f64..50.0, 0..5),
            la in 0.0f64..200.0,
            lb in 0.0f64..200.0,
        ) {
            let mk = |lat: &[f64], km| path(lat.iter().enumerate().map(|(i, &l)| element(&i.to_string(), l, 0.0, 0.0)).collect(), km);
            let pa = mk(&a, la);
            let pb = mk(&b, lb);
            let sum = one_way_delay_us(&pa) + one_way_delay_us(&pb);
            prop_assert!((one_way_delay_us(&pa.concat(&pb)) - sum).abs() < 1e-9);
        }

        #[test]
        fn timestamps_are_tick_multiples_and_reproducible(
            seed in any::<u64>(),
            km in 0.0f64..100.0,
            jitter in 0.0f64..10.0,
        ) {
            let p = path(vec![element("e", 1.3, 0.01, jitter)], km);
            let sched = TrainSchedule::new(500, 1456);
            let a = transmit_train(&p, &sched, seed);
            prop_assert_eq!(&a, &transmit_train(&p, &sched, seed));
            for (i, rx) in a.iter().enumerate() {
                prop_assert_eq!(sched.tx_ps(i as u32) % CLOCK_TICK_PS, 0);
                if let Some(rx) = rx {
                    prop_assert_eq!(rx % CLOCK_TICK_PS, 0);
                }
            }
        }

        #[test]
        fn ber_strictly_decreasing(a in -10.0f64..15.0, d in 0.01f64..5.0) {
            prop_assert!(qpsk_ber(a + d) < qpsk_ber(a));
        }
    }
}
