//! Command implementations behind the `metroslice` binary. Each command
//! takes a loaded [`Scenario`] and writes its artifacts under an output
//! directory; the binary only parses arguments and prints.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use metroslice_core::dataplane::{evolve_quality, ChannelQuality, DegradationScenario, PathModel};
use metroslice_core::mda::{detect_soft_failure, MeasurementRecord, RecordFilter, RecordStore, SoftFailureReport};
use metroslice_core::model::NodeKind;
use metroslice_core::orchestrator::{run_wf1, run_wf2, EventLog, KpiReport, MessageRecord, TimingConfig};
use metroslice_core::planner::{self, PlacementDecision, PlanReport};
use metroslice_core::probe::{
    latency_budget_from_deltas, live_measure, simulate_train, train_seed, LatencyBudget, Reflector,
    SimulatedProbe, TrainConfig, TrainStats,
};
use metroslice_core::scenario::Scenario;

pub use metroslice_core;

pub const KPI_FILE: &str = "kpi.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const MESSAGES_FILE: &str = "messages.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const TABLE1_FILE: &str = "table1.csv";
pub const DEGRADATION_FILE: &str = "degradation.csv";
pub const SOFT_FAILURE_FILE: &str = "soft_failure.json";

pub fn load_scenario(path: Option<&Path>, seed: Option<u64>) -> Result<Scenario> {
    let mut s = match path {
        Some(p) => Scenario::load(p)?,
        None => Scenario::builtin(),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for i in items {
        text.push_str(&serde_json::to_string(i)?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<T: Serialize, W: Write>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(f, rows)
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

// ---- plan ----

#[derive(Debug, Serialize)]
pub struct CandidateRow {
    pub rank: usize,
    pub cost_us: f64,
    pub feasible: bool,
    pub selected: bool,
    pub chain: String,
}

pub fn cmd_plan(s: &Scenario, k: Option<usize>) -> Result<PlanReport> {
    let mut req = s.request.clone();
    if let Some(k) = k {
        req.k = k;
    }
    req.validate()?;
    Ok(planner::plan(&req, &s.topology, &s.topology.vims()))
}

pub fn candidate_rows(r: &PlanReport) -> Vec<CandidateRow> {
    let chosen = r.decision.placed();
    r.ranked
        .iter()
        .enumerate()
        .map(|(i, c)| CandidateRow {
            rank: i + 1,
            cost_us: c.cost_us,
            feasible: c.is_feasible(),
            selected: chosen == Some(c),
            chain: c
                .assignment
                .iter()
                .map(|a| format!("{}@{}", a.vnf_id, a.vim_id))
                .collect::<Vec<_>>()
                .join(" > "),
        })
        .collect()
}

pub fn describe_decision(d: &PlacementDecision) -> String {
    match d {
        PlacementDecision::Placed(c) => format!(
            "placed: {} (cost {:.2} us)",
            c.vim_sequence().join(" > "),
            c.cost_us
        ),
        PlacementDecision::Blocked(r) => format!("blocked: {r}"),
    }
}

// ---- deploy ----

#[derive(Debug, Clone, Default)]
pub struct DeployOptions {
    pub warmup_s: Option<f64>,
    pub serial_transponders: bool,
    pub count: Option<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeploySummary {
    pub ns_id: String,
    pub seed: u64,
    pub decision: PlacementDecision,
    pub kpi: Option<KpiReport>,
    pub ns_ready_s: Option<f64>,
    pub commissioning_passed: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct DeployOutcome {
    pub summary: DeploySummary,
    pub events: Vec<metroslice_core::orchestrator::WorkflowEvent>,
    pub messages: Vec<MessageRecord>,
    pub records: Vec<MeasurementRecord>,
}

pub fn deploy_timing(s: &Scenario, o: &DeployOptions) -> TimingConfig {
    let mut t = s.timing;
    if let Some(w) = o.warmup_s {
        t.laser_warmup_s = w;
    }
    if o.serial_transponders {
        t.parallel_transponders = false;
    }
    t
}

/// WF1 then, when placed, WF2 over the provisioned circuits on the simulated
/// data plane. Writes kpi.json, events.jsonl, messages.jsonl, records.jsonl.
pub fn cmd_deploy(s: &Scenario, o: &DeployOptions, out: &Path) -> Result<DeployOutcome> {
    ensure_dir(out)?;
    let timing = deploy_timing(s, o);
    let mut world = s.world()?;
    let wf1 = run_wf1(&s.request, &mut world, &timing)?;

    let records_path = out.join(RECORDS_FILE);
    if records_path.exists() {
        fs::remove_file(&records_path).with_context(|| format!("replacing {}", records_path.display()))?;
    }
    let mut store = RecordStore::open(&records_path)?;
    let mut log = EventLog::from_events(wf1.events.clone());
    let mut records = Vec::new();
    if let Some(ready) = wf1.ns_ready_s() {
        let mut probe = SimulatedProbe::new(s.seed);
        let specs: Vec<_> = wf1
            .circuits
            .iter()
            .map(|c| {
                probe.add_circuit(c.vlan_id, c.path.clone());
                c.spec(s.commissioning.max_rtt_us)
            })
            .collect();
        let mut train = s.probe.clone();
        if let Some(n) = o.count {
            train.count = n;
        }
        records = run_wf2(&specs, &train, &mut probe, &mut store, ready, &mut log)?;
    }

    let summary = DeploySummary {
        ns_id: s.request.ns_id.clone(),
        seed: s.seed,
        decision: wf1.decision.clone(),
        kpi: wf1.kpi.clone(),
        ns_ready_s: wf1.ns_ready_s(),
        commissioning_passed: (!records.is_empty()).then(|| records.iter().all(|r| r.verdict.is_pass())),
    };
    let events = log.into_events();
    write_json(&out.join(KPI_FILE), &summary)?;
    write_jsonl(&out.join(EVENTS_FILE), &events)?;
    write_jsonl(&out.join(MESSAGES_FILE), &wf1.messages)?;
    Ok(DeployOutcome {
        summary,
        events,
        messages: wf1.messages,
        records,
    })
}

// ---- table1 ----

/// One-way path between the first and last configured probe endpoints.
pub fn probe_path(s: &Scenario) -> Result<PathModel> {
    let (a, z) = match (s.probes.first(), s.probes.last()) {
        (Some(a), Some(z)) if s.probes.len() >= 2 => (&a.probe_node, &z.probe_node),
        _ => bail!("scenario needs at least two probe attachments"),
    };
    let route = s
        .topology
        .shortest_latency_path(a, z)
        .ok_or_else(|| anyhow!("no route between probes {a} and {z}"))?;
    Ok(PathModel::from_route(&s.topology, &route, &s.profiles))
}

/// The probe path keeping only elements of `kinds`, over `length_km` of fiber.
pub fn reduced_path(s: &Scenario, kinds: &[NodeKind], length_km: f64) -> Result<PathModel> {
    let mut p = probe_path(s)?;
    p.elements
        .retain(|e| s.topology.node(&e.id).is_some_and(|n| kinds.contains(&n.kind)));
    p.total_length_km = length_km;
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Result {
    pub setup: String,
    pub length_km: f64,
    pub two_way_propagation_us: f64,
    /// Mean RTT, averaged over the row's trains.
    pub rtt_us: Option<f64>,
    pub rtt_min_us: Option<f64>,
    pub delta_us: Option<f64>,
    pub jitter_ns: Option<f64>,
    pub throughput_mbps: Option<f64>,
    pub loss_rate: f64,
    pub trains: u32,
    pub packets_per_train: u32,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| sum / n as f64)
}

pub fn table1_row(
    s: &Scenario,
    row: &metroslice_core::scenario::Table1Row,
    row_index: usize,
    train: &TrainConfig,
    trains: u32,
) -> Result<Table1Result> {
    let path = reduced_path(s, &row.kinds, row.length_km)?;
    let row_seed = train_seed(s.seed, 1_000_000 + row_index as u64);
    let stats: Vec<TrainStats> = (0..trains)
        .map(|i| simulate_train(&path, train, train_seed(row_seed, i as u64), &BTreeSet::new()))
        .collect();
    let two_way = path.round_trip().propagation_us();
    let rtt = mean(stats.iter().filter_map(|t| t.rtt_mean_us));
    let sent: u64 = stats.iter().map(|t| t.sent as u64).sum();
    let lost: u64 = stats.iter().map(|t| t.lost as u64).sum();
    Ok(Table1Result {
        setup: row.setup.clone(),
        length_km: row.length_km,
        two_way_propagation_us: two_way,
        rtt_us: rtt,
        rtt_min_us: stats.iter().filter_map(|t| t.rtt_us).reduce(f64::min),
        delta_us: rtt.map(|r| r - two_way),
        jitter_ns: mean(stats.iter().filter_map(|t| t.jitter_ns)),
        throughput_mbps: mean(stats.iter().filter_map(|t| t.throughput_mbps)),
        loss_rate: if sent == 0 { 0.0 } else { lost as f64 / sent as f64 },
        trains,
        packets_per_train: train.count,
    })
}

#[derive(Debug, Clone, Default)]
pub struct Table1Options {
    pub trains: Option<u32>,
    pub count: Option<u32>,
}

pub fn cmd_table1(s: &Scenario, o: &Table1Options, out: &Path) -> Result<Vec<Table1Result>> {
    ensure_dir(out)?;
    let mut train = s.probe.clone();
    if let Some(n) = o.count {
        train.count = n;
    }
    train.validate()?;
    let trains = o.trains.unwrap_or(s.table1.trains_per_row);
    if trains == 0 {
        bail!("at least one train per row is needed");
    }
    let rows = s
        .table1
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| table1_row(s, r, i, &train, trains))
        .collect::<Result<Vec<_>>>()?;
    write_csv_file(&out.join(TABLE1_FILE), &rows)?;
    Ok(rows)
}

/// Decomposition from the first three rows: probe loopback, switch loopback,
/// and the shortest optical set-up.
pub fn budget_from_table(rows: &[Table1Result]) -> Result<LatencyBudget> {
    let d = |i: usize| -> Result<f64> {
        rows.get(i)
            .and_then(|r| r.delta_us)
            .ok_or_else(|| anyhow!("calibration row {} missing or empty", i + 1))
    };
    Ok(latency_budget_from_deltas(d(0)?, d(1)?, d(2)?)?)
}

// ---- degrade ----

#[derive(Debug, Clone, Default)]
pub struct DegradeOptions {
    pub ramp_db_per_s: Option<f64>,
    pub duration_s: Option<f64>,
}

pub fn degradation_scenario(s: &Scenario, o: &DegradeOptions) -> Result<DegradationScenario> {
    let mut d = s.degradation;
    if let Some(r) = o.ramp_db_per_s {
        d.ramp_db_per_s = r;
    }
    if let Some(t) = o.duration_s {
        d.duration_s = t;
    }
    if !(d.ramp_db_per_s >= 0.0 && d.duration_s > 0.0) {
        bail!("ramp must be non-negative and duration positive");
    }
    Ok(d)
}

pub fn cmd_degrade(
    s: &Scenario,
    o: &DegradeOptions,
    out: &Path,
) -> Result<(Vec<ChannelQuality>, SoftFailureReport)> {
    ensure_dir(out)?;
    let series = evolve_quality(&degradation_scenario(s, o)?);
    let report = detect_soft_failure(&series, &s.detector)?;
    write_csv_file(&out.join(DEGRADATION_FILE), &series)?;
    write_json(&out.join(SOFT_FAILURE_FILE), &report)?;
    Ok((series, report))
}

// ---- records ----

pub fn cmd_records(file: &Path, filter: &RecordFilter) -> Result<Vec<MeasurementRecord>> {
    Ok(RecordStore::import(file)?.query(filter))
}

#[derive(Debug, Serialize)]
pub struct RecordRow {
    pub circuit_id: String,
    pub vlan_id: u16,
    pub t_virtual_s: f64,
    pub verdict: String,
    pub rtt_us: Option<f64>,
    pub rtt_mean_us: Option<f64>,
    pub max_rtt_us: f64,
    pub loss_rate: f64,
    pub jitter_ns: Option<f64>,
    pub throughput_mbps: Option<f64>,
    pub reason: Option<String>,
}

impl From<&MeasurementRecord> for RecordRow {
    fn from(r: &MeasurementRecord) -> Self {
        Self {
            circuit_id: r.circuit_id.clone(),
            vlan_id: r.vlan_id,
            t_virtual_s: r.t_virtual_s,
            verdict: format!("{:?}", r.verdict),
            rtt_us: r.stats.rtt_us,
            rtt_mean_us: r.stats.rtt_mean_us,
            max_rtt_us: r.max_rtt_us,
            loss_rate: r.stats.loss_rate,
            jitter_ns: r.stats.jitter_ns,
            throughput_mbps: r.stats.throughput_mbps,
            reason: r.reason.clone(),
        }
    }
}

// ---- measure / reflect ----

#[derive(Debug, Clone)]
pub enum MeasureTarget {
    /// The probe-to-probe circuit of the scenario on the simulated data plane.
    Simulated,
    Live(SocketAddr),
}

pub fn cmd_measure(s: &Scenario, cfg: &TrainConfig, target: &MeasureTarget) -> Result<TrainStats> {
    cfg.validate()?;
    match target {
        MeasureTarget::Simulated => {
            let path = probe_path(s)?;
            Ok(simulate_train(&path, cfg, train_seed(s.seed, 0), &BTreeSet::new()))
        }
        MeasureTarget::Live(addr) => Ok(live_measure(cfg, *addr)?),
    }
}

/// Runs a reflector on `bind` until `duration` elapses, or indefinitely.
/// Returns the number of packets echoed.
pub fn cmd_reflect(bind: SocketAddr, duration: Option<Duration>, on_ready: impl FnOnce(SocketAddr)) -> Result<u64> {
    let r = Reflector::bind(bind)?;
    on_ready(r.local_addr()?);
    let stop = Arc::new(AtomicBool::new(false));
    if let Some(d) = duration {
        let s = stop.clone();
        std::thread::spawn(move || {
            std::thread::sleep(d);
            s.store(true, Ordering::Relaxed);
        });
    }
    Ok(r.run(&stop)?)
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
