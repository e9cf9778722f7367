//! Monitoring and data analytics: circuit measurements on demand, an
//! append-only record store, and soft-failure detection on optical channel
//! quality series.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::VirtualClock;
use crate::dataplane::ChannelQuality;
use crate::model::Verdict;
use crate::probe::{ProbeBackend, ProbeError, TrainConfig, TrainStats};

#[derive(Debug, Error)]
pub enum MdaError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub circuit_id: String,
    pub vlan_id: u16,
    pub t_virtual_s: f64,
    pub stats: TrainStats,
    pub verdict: Verdict,
    pub max_rtt_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// A provisioned circuit the MDA can be asked to verify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub circuit_id: String,
    pub vlan_id: u16,
    pub max_rtt_us: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordFilter {
    pub circuit_id: Option<String>,
    pub from_s: Option<f64>,
    pub to_s: Option<f64>,
}

impl RecordFilter {
    fn matches(&self, r: &MeasurementRecord) -> bool {
        self.circuit_id.as_ref().is_none_or(|c| *c == r.circuit_id)
            && self.from_s.is_none_or(|t| r.t_virtual_s >= t)
            && self.to_s.is_none_or(|t| r.t_virtual_s <= t)
    }
}

/// Append-only store of measurement records, optionally mirrored to a
/// JSON-lines file that is written through on every append.
#[derive(Debug, Default)]
pub struct RecordStore {
    records: Vec<MeasurementRecord>,
    sink: Option<(PathBuf, BufWriter<File>)>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MdaError + '_ {
    move |source| MdaError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl RecordStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `path` for appending, loading any records already in it.
    pub fn open(path: &Path) -> Result<Self, MdaError> {
        let records = if path.exists() {
            read_jsonl(path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        Ok(Self {
            records,
            sink: Some((path.to_path_buf(), BufWriter::new(file))),
        })
    }

    pub fn append(&mut self, r: MeasurementRecord) -> Result<(), MdaError> {
        if let Some((path, w)) = &mut self.sink {
            let line = serde_json::to_string(&r).expect("records serialize");
            writeln!(w, "{line}")
                .and_then(|_| w.flush())
                .map_err(io_err(path))?;
        }
        self.records.push(r);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in insertion order.
    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    /// Matching records ordered by virtual time, then circuit id; equal keys
    /// keep insertion order.
    pub fn query(&self, f: &RecordFilter) -> Vec<MeasurementRecord> {
        let mut out: Vec<_> = self.records.iter().filter(|r| f.matches(r)).cloned().collect();
        out.sort_by(|a, b| {
            a.t_virtual_s
                .total_cmp(&b.t_virtual_s)
                .then_with(|| a.circuit_id.cmp(&b.circuit_id))
        });
        out
    }

    pub fn export(&self, path: &Path) -> Result<(), MdaError> {
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        for r in &self.records {
            let line = serde_json::to_string(r).expect("records serialize");
            writeln!(w, "{line}").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    /// In-memory store holding the records of a JSON-lines file.
    pub fn import(path: &Path) -> Result<Self, MdaError> {
        Ok(Self {
            records: read_jsonl(path)?,
            sink: None,
        })
    }
}

fn read_jsonl(path: &Path) -> Result<Vec<MeasurementRecord>, MdaError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| MdaError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

/// Runs one train over `circuit`, judges it against the circuit's RTT bound
/// and appends the record. A probe timeout still produces a record, failed,
/// carrying the partial statistics.
///
/// The record is stamped with the clock at train start; the clock then
/// advances by the train's transmit duration.
pub fn measure_circuit(
    circuit: &CircuitSpec,
    train: &TrainConfig,
    backend: &mut dyn ProbeBackend,
    clock: &mut VirtualClock,
    store: &mut RecordStore,
) -> Result<MeasurementRecord, MdaError> {
    let cfg = TrainConfig {
        vlan_id: circuit.vlan_id,
        ..train.clone()
    };
    let t_virtual_s = clock.now();
    let (stats, reason) = match backend.run_train(&cfg) {
        Ok(s) => (s, None),
        Err(ProbeError::Timeout { partial, timeout_ms }) => {
            (partial, Some(format!("probe timeout after {timeout_ms} ms")))
        }
        Err(e) => return Err(e.into()),
    };
    let pass = reason.is_none() && stats.rtt_us.is_some_and(|rtt| rtt <= circuit.max_rtt_us);
    let reason = reason.or_else(|| stats.rtt_us.is_none().then(|| "no echoes received".to_string()));
    let record = MeasurementRecord {
        circuit_id: circuit.circuit_id.clone(),
        vlan_id: circuit.vlan_id,
        t_virtual_s,
        stats,
        verdict: Verdict::from_bool(pass),
        max_rtt_us: circuit.max_rtt_us,
        reason,
    };
    store.append(record.clone())?;
    clock.advance(cfg.schedule().duration_ps() as f64 * 1e-12);
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub delta_db: f64,
    pub consecutive: usize,
    pub fec_limit_ber: f64,
    pub baseline_window: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            delta_db: 0.5,
            consecutive: 3,
            fec_limit_ber: 2.0e-2,
            baseline_window: 10,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), MdaError> {
        let bad = |m: &str| Err(MdaError::InvalidConfig(m.into()));
        if !(self.delta_db > 0.0) {
            return bad("delta_db must be positive");
        }
        if self.consecutive == 0 {
            return bad("consecutive must be at least 1");
        }
        if !(self.fec_limit_ber > 0.0 && self.fec_limit_ber < 0.5) {
            return bad("fec_limit_ber must lie in (0, 0.5)");
        }
        if self.baseline_window == 0 {
            return bad("baseline_window must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftFailureReport {
    pub detected: bool,
    pub baseline_snr_db: f64,
    pub t_detect_s: Option<f64>,
    /// Absent when the series ends before the BER reaches the limit.
    pub t_fec_s: Option<f64>,
    pub anticipation_s: Option<f64>,
}

/// Time at which the BER first reaches `limit`, interpolated linearly in BER
/// between the bracketing samples.
fn fec_crossing(series: &[ChannelQuality], limit: f64) -> Option<f64> {
    let i = series.iter().position(|q| q.prefec_ber >= limit)?;
    if i == 0 {
        return Some(series[0].t_s);
    }
    let (a, b) = (&series[i - 1], &series[i]);
    let frac = (limit - a.prefec_ber) / (b.prefec_ber - a.prefec_ber);
    Some(a.t_s + frac * (b.t_s - a.t_s))
}

/// Flags a soft failure once `consecutive` successive samples sit more than
/// `delta_db` below the baseline SNR (mean of the first `baseline_window`
/// samples). Detection is declared at the last sample of that run, the
/// earliest moment the rule can fire. If the BER limit is crossed first, the
/// crossing itself is the detection and anticipation is zero.
pub fn detect_soft_failure(
    series: &[ChannelQuality],
    cfg: &DetectorConfig,
) -> Result<SoftFailureReport, MdaError> {
    cfg.validate()?;
    if series.len() < cfg.baseline_window {
        return Err(MdaError::InvalidConfig(format!(
            "series has {} samples, baseline needs {}",
            series.len(),
            cfg.baseline_window
        )));
    }
    let window = &series[..cfg.baseline_window];
    let baseline = window.iter().map(|q| q.snr_db).sum::<f64>() / window.len() as f64;
    let threshold = baseline - cfg.delta_db;

    let mut run = 0;
    let mut rule_fired = None;
    for q in series {
        run = if q.snr_db < threshold { run + 1 } else { 0 };
        if run == cfg.consecutive {
            rule_fired = Some(q.t_s);
            break;
        }
    }
    let t_fec_s = fec_crossing(series, cfg.fec_limit_ber);
    let t_detect_s = match (rule_fired, t_fec_s) {
        (Some(d), Some(f)) => Some(d.min(f)),
        (d, f) => d.or(f),
    };
    Ok(SoftFailureReport {
        detected: t_detect_s.is_some(),
        baseline_snr_db: baseline,
        t_detect_s,
        t_fec_s,
        anticipation_s: t_detect_s.zip(t_fec_s).map(|(d, f)| f - d),
    })
}
