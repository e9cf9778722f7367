use std::collections::{BTreeMap, BTreeSet};

use crate::dataplane::{transmit_train_with, PathModel};

use super::{Echo, ProbeBackend, ProbeError, StatsAccumulator, TrainConfig, TrainStats};

/// Runs a train over `path` looped back at the far end.
pub fn simulate_train(
    path: &PathModel,
    cfg: &TrainConfig,
    seed: u64,
    forced_loss: &BTreeSet<u32>,
) -> TrainStats {
    let mut acc = StatsAccumulator::default();
    transmit_train_with(&path.round_trip(), &cfg.schedule(), seed, forced_loss, |_, tx, rx| {
        if let Some(rx) = rx {
            acc.push(tx, rx);
        }
    });
    acc.finish(cfg.count, cfg.ip_payload_bytes)
}

/// Per-packet form of [`simulate_train`].
pub fn simulate_echoes(
    path: &PathModel,
    cfg: &TrainConfig,
    seed: u64,
    forced_loss: &BTreeSet<u32>,
) -> Vec<Echo> {
    let mut out = Vec::with_capacity(cfg.count as usize);
    transmit_train_with(&path.round_trip(), &cfg.schedule(), seed, forced_loss, |seq, tx_ps, rx_ps| {
        out.push(Echo { seq, tx_ps, rx_ps })
    });
    out
}

/// Seed of the `index`-th train drawn from a base seed.
pub fn train_seed(base: u64, index: u64) -> u64 {
    base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Probe attached to simulated circuits, addressed by VLAN. Each stored path
/// is the one-way circuit; trains are reflected at its far end.
#[derive(Debug, Clone, Default)]
pub struct SimulatedProbe {
    circuits: BTreeMap<u16, PathModel>,
    seed: u64,
    trains_run: u64,
    forced_loss: BTreeSet<u32>,
}

impl SimulatedProbe {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    pub fn add_circuit(&mut self, vlan_id: u16, path: PathModel) {
        self.circuits.insert(vlan_id, path);
    }

    /// Sequence numbers dropped on every subsequent train.
    pub fn force_loss(&mut self, seqs: impl IntoIterator<Item = u32>) {
        self.forced_loss.extend(seqs);
    }

    pub fn circuit(&self, vlan_id: u16) -> Option<&PathModel> {
        self.circuits.get(&vlan_id)
    }
}

impl ProbeBackend for SimulatedProbe {
    fn run_train(&mut self, cfg: &TrainConfig) -> Result<TrainStats, ProbeError> {
        cfg.validate()?;
        let path = self
            .circuits
            .get(&cfg.vlan_id)
            .ok_or(ProbeError::UnknownCircuit(cfg.vlan_id))?;
        let seed = train_seed(self.seed, self.trains_run);
        self.trains_run += 1;
        Ok(simulate_train(path, cfg, seed, &self.forced_loss))
    }
}
