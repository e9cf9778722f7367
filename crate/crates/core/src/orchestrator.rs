//! Workflow engine for network-service set-up (WF1) and commissioning
//! measurements (WF2), run on a virtual clock by a single-threaded
//! discrete-event executor.
//!
//! WF1 timeline with default timing (seconds from request receipt):
//!
//! ```text
//! 0 ........ 3   messages 1-4 (planner, NFVO)
//! 3 ....................................... 43   VNF instantiation
//! 3 .. 5         packet circuits
//!      5 ... 10  media channel (context, active connections, create)
//!            10 .. 12   transponders, in parallel
//!                  12 ........................ 137  laser warm-up
//! ```

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::VirtualClock;
use crate::dataplane::{ElementProfiles, PathModel};
use crate::mda::{measure_circuit, CircuitSpec, MdaError, MeasurementRecord, RecordStore};
use crate::model::{NsRequest, RequestError, Topology, VimStatus};
use crate::optical::{
    configure_transponder, ControllerMessage, OlsController, OpticalError, SlotRequest,
    Transponder, TransponderPhase, TransponderTiming,
};
use crate::planner::{self, PlacementDecision, ServiceChainCandidate};
use crate::probe::{ProbeBackend, TrainConfig};

pub mod labels {
    pub const DESCRIPTORS: &str = "1:get-vnf-descriptors";
    pub const VIM_STATUS: &str = "2:get-vim-status";
    pub const NS_REQUEST: &str = "3:ns-instantiation-request";
    pub const NS_BLOCKED: &str = "3:ns-request-blocked";
    pub const NS_INSTANTIATE: &str = "4:ns-instantiate";
    pub const VNF_START: &str = "5:vnf-instantiation";
    pub const VNF_DONE: &str = "5:vnfs-instantiated";
    pub const CONNECTIVITY_REQUEST: &str = "6:connectivity-request";
    pub const PACKET_DONE: &str = "6:packet-circuits-configured";
    pub const TAPI_CONTEXT: &str = "7:get-tapi-context";
    pub const ACTIVE_CONNECTIONS: &str = "7:get-active-connections";
    pub const MEDIA_CHANNEL: &str = "8:media-channel-created";
    pub const MEDIA_CHANNEL_FAILED: &str = "8:media-channel-failed";
    pub const TRANSPONDERS_CONFIGURED: &str = "10:transponders-configured";
    pub const TRANSPONDER_FAILED: &str = "10:transponder-failed";
    pub const OPTICAL_READY: &str = "10:optical-connectivity-ready";
    pub const E2E_READY: &str = "10:e2e-connectivity-ready";
    pub const NS_READY: &str = "ns-ready";
    pub const ROLLBACK: &str = "rollback";
    pub const MEASURE_REQUEST: &str = "11:measure-circuits";
    pub const PROBE_TRAIN: &str = "12:probe-train";
    pub const CIRCUIT_RESULT: &str = "12:circuit-result";
    pub const COMMISSIONING_PASSED: &str = "commissioning-passed";
    pub const COMMISSIONING_FAILED: &str = "commissioning-failed";
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error("no blank transponder at edge node `{0}`")]
    NoTransponder(String),
    #[error("provisioning failed, changes rolled back: {source}")]
    Provisioning {
        #[source]
        source: OpticalError,
        events: Vec<WorkflowEvent>,
    },
    #[error("event log has no `{0}` entry")]
    IncompleteLog(&'static str),
    #[error(transparent)]
    Mda(#[from] MdaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub vnf_instantiation_s: f64,
    pub media_channel_s: f64,
    pub tp_config_s: f64,
    pub laser_warmup_s: f64,
    pub packet_config_s: f64,
    pub orchestration_overhead_s: f64,
    pub parallel_transponders: bool,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            vnf_instantiation_s: 40.0,
            media_channel_s: 5.0,
            tp_config_s: 2.0,
            laser_warmup_s: 125.0,
            packet_config_s: 2.0,
            orchestration_overhead_s: 3.0,
            parallel_transponders: true,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        for (name, v) in [
            ("vnf_instantiation_s", self.vnf_instantiation_s),
            ("media_channel_s", self.media_channel_s),
            ("tp_config_s", self.tp_config_s),
            ("laser_warmup_s", self.laser_warmup_s),
            ("packet_config_s", self.packet_config_s),
            ("orchestration_overhead_s", self.orchestration_overhead_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(OrchestratorError::InvalidTiming(format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    fn transponder(&self) -> TransponderTiming {
        TransponderTiming {
            config_s: self.tp_config_s,
            laser_warmup_s: self.laser_warmup_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowEvent {
    pub seq: u64,
    pub label: String,
    pub t_virtual_s: f64,
    pub actor: String,
}

/// Controller exchange stamped with the instant it completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub t_virtual_s: f64,
    #[serde(flatten)]
    pub message: ControllerMessage,
}

#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<WorkflowEvent>,
}

impl EventLog {
    /// Continues an existing log; sequence numbers are reassigned from 1.
    pub fn from_events(events: Vec<WorkflowEvent>) -> Self {
        let mut log = Self::default();
        for e in events {
            log.push(&e.label, &e.actor, e.t_virtual_s);
        }
        log
    }

    /// Appends an event; times earlier than the last entry are clamped so the
    /// log stays non-decreasing.
    pub fn push(&mut self, label: &str, actor: &str, t_virtual_s: f64) {
        let t = self
            .events
            .last()
            .map_or(t_virtual_s, |e| e.t_virtual_s.max(t_virtual_s));
        self.events.push(WorkflowEvent {
            seq: self.events.len() as u64 + 1,
            label: label.into(),
            t_virtual_s: t,
            actor: actor.into(),
        });
    }

    pub fn events(&self) -> &[WorkflowEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<WorkflowEvent> {
        self.events
    }

    pub fn last_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t_virtual_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub kpi1_s: f64,
    pub kpi2_s: f64,
    pub kpi3_s: f64,
    /// Sum of the set-up phases other than transponder configuration and
    /// laser warm-up: overhead, VNF instantiation, packet circuits, media channel.
    pub excl_transponder_s: f64,
    pub phases: BTreeMap<String, f64>,
}

fn first(events: &[WorkflowEvent], label: &'static str) -> Result<f64, OrchestratorError> {
    events
        .iter()
        .find(|e| e.label == label)
        .map(|e| e.t_virtual_s)
        .ok_or(OrchestratorError::IncompleteLog(label))
}

fn last(events: &[WorkflowEvent], label: &'static str) -> Result<f64, OrchestratorError> {
    events
        .iter()
        .rev()
        .find(|e| e.label == label)
        .map(|e| e.t_virtual_s)
        .ok_or(OrchestratorError::IncompleteLog(label))
}

/// KPIs from event timestamps alone.
///
/// KPI-1: optical connectivity ready minus the first line-system request.
/// KPI-2: end-to-end connectivity ready minus the connectivity request.
/// KPI-3: network service ready minus request receipt.
pub fn derive_kpis(events: &[WorkflowEvent]) -> Result<KpiReport, OrchestratorError> {
    use labels::*;
    let request = first(events, DESCRIPTORS)?;
    let instantiate = first(events, NS_INSTANTIATE)?;
    let vnf_start = first(events, VNF_START)?;
    let vnf_done = last(events, VNF_DONE)?;
    let conn_start = first(events, CONNECTIVITY_REQUEST)?;
    let packet_done = last(events, PACKET_DONE)?;
    let optical_start = first(events, TAPI_CONTEXT)?;
    let mc_done = last(events, MEDIA_CHANNEL)?;
    let tp_done = last(events, TRANSPONDERS_CONFIGURED)?;
    let optical_ready = last(events, OPTICAL_READY)?;
    let e2e_ready = last(events, E2E_READY)?;
    let ns_ready = last(events, NS_READY)?;

    let phases: BTreeMap<String, f64> = [
        ("orchestration_overhead", instantiate - request),
        ("vnf_instantiation", vnf_done - vnf_start),
        ("packet_config", packet_done - conn_start),
        ("media_channel", mc_done - optical_start),
        ("transponder_config", tp_done - mc_done),
        ("laser_warmup", optical_ready - tp_done),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let excl_transponder_s = ["orchestration_overhead", "vnf_instantiation", "packet_config", "media_channel"]
        .iter()
        .map(|k| phases[*k])
        .sum();
    Ok(KpiReport {
        kpi1_s: optical_ready - optical_start,
        kpi2_s: e2e_ready - conn_start,
        kpi3_s: ns_ready - request,
        excl_transponder_s,
        phases,
    })
}

/// Maps an edge node to the probe endpoint that measures circuits from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeAttachment {
    pub probe_node: String,
    pub edge_node: String,
}

/// Everything WF1 acts on.
#[derive(Debug, Clone)]
pub struct World {
    pub topology: Topology,
    pub vims: Vec<VimStatus>,
    pub ols: OlsController,
    pub transponders: Vec<Transponder>,
    pub probes: Vec<ProbeAttachment>,
    pub profiles: ElementProfiles,
    pub tx_power_dbm: f64,
    pub vlan_base: u16,
}

/// Packet circuit between two edge nodes, carried by a media channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub circuit_id: String,
    pub vlan_id: u16,
    pub a_node: String,
    pub z_node: String,
    pub mc_id: String,
    pub transponders: (String, String),
    /// One-way path between the probes at either end.
    pub path: PathModel,
}

impl Circuit {
    pub fn spec(&self, max_rtt_us: f64) -> CircuitSpec {
        CircuitSpec {
            circuit_id: self.circuit_id.clone(),
            vlan_id: self.vlan_id,
            max_rtt_us,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Wf1Outcome {
    pub decision: PlacementDecision,
    pub kpi: Option<KpiReport>,
    pub events: Vec<WorkflowEvent>,
    pub messages: Vec<MessageRecord>,
    pub circuits: Vec<Circuit>,
}

impl Wf1Outcome {
    pub fn ns_ready_s(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.label == labels::NS_READY)
            .map(|e| e.t_virtual_s)
    }
}

fn to_ns(s: f64) -> u64 {
    (s * 1e9).round() as u64
}

fn to_s(ns: u64) -> f64 {
    ns as f64 / 1e9
}

#[derive(Debug)]
enum Action {
    Log { label: &'static str, actor: String },
    Instantiate,
    VnfsDone,
    PacketDone,
    MediaChannelsDone,
    OpticalReady,
}

struct PlannedCircuit {
    a_node: String,
    z_node: String,
    tps: (usize, usize),
    mc_id: Option<String>,
}

/// Single-threaded discrete-event run of WF1.
struct Wf1Run<'w> {
    world: &'w mut World,
    req: &'w NsRequest,
    timing: TimingConfig,
    queue: BinaryHeap<Reverse<(u64, u64, usize)>>,
    actions: Vec<Option<Action>>,
    now: u64,
    log: EventLog,
    messages: Vec<MessageRecord>,
    placed: Option<ServiceChainCandidate>,
    circuits: Vec<PlannedCircuit>,
    configured: Vec<usize>,
    vnfs_done: bool,
    connectivity_done: bool,
}

impl<'w> Wf1Run<'w> {
    fn at(&mut self, t: u64, a: Action) {
        let order = self.actions.len();
        self.actions.push(Some(a));
        self.queue.push(Reverse((t, order as u64, order)));
    }

    fn after(&mut self, dt_s: f64, a: Action) {
        self.at(self.now + to_ns(dt_s), a)
    }

    fn log(&mut self, label: &str, actor: &str) {
        self.log.push(label, actor, to_s(self.now));
    }

    fn message(&mut self, t_s: f64, message: ControllerMessage) {
        self.messages.push(MessageRecord {
            t_virtual_s: t_s,
            message,
        });
    }

    fn run(mut self) -> Result<Wf1Outcome, OrchestratorError> {
        use labels::*;
        let o = self.timing.orchestration_overhead_s;
        let decision = planner::place(self.req, &self.world.topology, &mut self.world.vims);
        self.after(0.0, Action::Log { label: DESCRIPTORS, actor: "planner".into() });
        self.after(o / 3.0, Action::Log { label: VIM_STATUS, actor: "planner".into() });
        match &decision {
            PlacementDecision::Blocked(_) => {
                self.after(2.0 * o / 3.0, Action::Log { label: NS_BLOCKED, actor: "planner".into() });
            }
            PlacementDecision::Placed(c) => {
                self.placed = Some(c.clone());
                self.after(2.0 * o / 3.0, Action::Log { label: NS_REQUEST, actor: "planner".into() });
                self.after(o, Action::Instantiate);
            }
        }

        while let Some(Reverse((t, _, idx))) = self.queue.pop() {
            self.now = t;
            let action = self.actions[idx].take().expect("each action runs once");
            if let Err(e) = self.handle(action) {
                return Err(self.rollback(e));
            }
        }

        let events = self.log.into_events();
        let kpi = match decision {
            PlacementDecision::Placed(_) => Some(derive_kpis(&events)?),
            PlacementDecision::Blocked(_) => None,
        };
        let circuits = self
            .circuits
            .iter()
            .enumerate()
            .map(|(i, c)| build_circuit(&*self.world, i, c))
            .collect();
        Ok(Wf1Outcome {
            decision,
            kpi,
            events,
            messages: self.messages,
            circuits,
        })
    }

    fn handle(&mut self, action: Action) -> Result<(), OpticalError> {
        use labels::*;
        match action {
            Action::Log { label, actor } => self.log(label, &actor),
            Action::Instantiate => {
                self.log(NS_INSTANTIATE, "nfvo");
                self.log(VNF_START, "nfvo");
                self.after(self.timing.vnf_instantiation_s, Action::VnfsDone);
                self.log(CONNECTIVITY_REQUEST, "parent-controller");
                self.after(self.timing.packet_config_s, Action::PacketDone);
            }
            Action::VnfsDone => {
                self.log(VNF_DONE, "vim");
                self.vnfs_done = true;
                self.maybe_ready();
            }
            Action::PacketDone => {
                self.log(PACKET_DONE, "parent-controller");
                let t = to_s(self.now);
                let ctx = self.world.ols.get_context();
                self.message(
                    t,
                    ControllerMessage::GetContext {
                        sip_count: ctx.sips.len(),
                        abstracted: self.world.ols.config().abstract_topology,
                    },
                );
                self.log(TAPI_CONTEXT, "optical-controller");
                let active = self.world.ols.get_active_connections();
                self.message(
                    t,
                    ControllerMessage::GetActiveConnections {
                        mc_ids: active.into_iter().map(|c| c.mc_id).collect(),
                    },
                );
                self.log(ACTIVE_CONNECTIONS, "optical-controller");
                self.after(self.timing.media_channel_s, Action::MediaChannelsDone);
            }
            Action::MediaChannelsDone => {
                let t = to_s(self.now);
                for i in 0..self.circuits.len() {
                    let (a, z) = self.circuits[i].tps;
                    let a_sip = self.world.transponders[a].sip_id.clone();
                    let z_sip = self.world.transponders[z].sip_id.clone();
                    let result = self.world.ols.create_media_channel(&a_sip, &z_sip, SlotRequest::Auto);
                    self.message(
                        t,
                        ControllerMessage::CreateMediaChannel {
                            a_sip,
                            z_sip,
                            request: SlotRequest::Auto,
                            result: result.clone().map_err(|e| e.to_string()),
                        },
                    );
                    match result {
                        Ok(mc) => self.circuits[i].mc_id = Some(mc.mc_id),
                        Err(e) => {
                            self.log(MEDIA_CHANNEL_FAILED, "ols-controller");
                            return Err(e);
                        }
                    }
                }
                self.log(MEDIA_CHANNEL, "ols-controller");
                self.configure_transponders()?;
            }
            Action::OpticalReady => {
                self.log(OPTICAL_READY, "optical-controller");
                self.log(E2E_READY, "parent-controller");
                self.connectivity_done = true;
                self.maybe_ready();
            }
        }
        Ok(())
    }

    fn configure_transponders(&mut self) -> Result<(), OpticalError> {
        use labels::*;
        let timing = self.timing.transponder();
        let mut start = VirtualClock::at(to_s(self.now));
        let mut configured_at = to_s(self.now);
        let mut ready_at = to_s(self.now);
        let mut step_logs = Vec::new();
        for i in 0..self.circuits.len() {
            let mc_id = self.circuits[i].mc_id.clone().expect("created above");
            let slot = self
                .world
                .ols
                .get_active_connections()
                .into_iter()
                .find(|c| c.mc_id == mc_id)
                .expect("channel just created")
                .slot;
            let (a, z) = self.circuits[i].tps;
            for (side, tp_idx) in [(9u8, a), (10u8, z)] {
                let mut clock = start;
                let tp = &mut self.world.transponders[tp_idx];
                let report = match configure_transponder(tp, slot, self.world.tx_power_dbm, &mut clock, &timing) {
                    Ok(r) => r,
                    Err(e) => {
                        let id = self.world.transponders[tp_idx].id().to_string();
                        self.log(TRANSPONDER_FAILED, &id);
                        return Err(e);
                    }
                };
                self.configured.push(tp_idx);
                for s in &report.steps {
                    step_logs.push((to_ns(s.t_virtual_s), side, s.action.clone(), s.tp_id.clone()));
                    self.message(s.t_virtual_s, ControllerMessage::TransponderStep(s.clone()));
                }
                configured_at = configured_at.max(report.configured_at_s);
                ready_at = ready_at.max(report.ready_at_s);
                if !self.timing.parallel_transponders {
                    start = VirtualClock::at(report.configured_at_s);
                }
            }
        }
        for (t, side, action, tp_id) in step_logs {
            let label: &'static str = transponder_label(side, &action);
            self.at(t, Action::Log { label, actor: tp_id });
        }
        self.at(
            to_ns(configured_at),
            Action::Log {
                label: TRANSPONDERS_CONFIGURED,
                actor: "optical-controller".into(),
            },
        );
        self.at(to_ns(ready_at), Action::OpticalReady);
        Ok(())
    }

    fn maybe_ready(&mut self) {
        if self.vnfs_done && self.connectivity_done {
            self.log(labels::NS_READY, "nfvo");
        }
    }

    /// Undoes every change made so far: media channels, transponder
    /// configuration and VIM reservations.
    fn rollback(mut self, source: OpticalError) -> OrchestratorError {
        for c in &self.circuits {
            if let Some(mc) = &c.mc_id {
                let result = self.world.ols.delete_media_channel(mc);
                self.messages.push(MessageRecord {
                    t_virtual_s: to_s(self.now),
                    message: ControllerMessage::DeleteMediaChannel {
                        mc_id: mc.clone(),
                        result: result.map_err(|e| e.to_string()),
                    },
                });
            }
        }
        for &i in &self.configured {
            self.world.transponders[i].reset();
        }
        if let Some(c) = &self.placed {
            planner::release(self.req, c, &mut self.world.vims);
        }
        self.log(labels::ROLLBACK, "parent-controller");
        OrchestratorError::Provisioning {
            source,
            events: self.log.into_events(),
        }
    }
}

fn transponder_label(side: u8, action: &str) -> &'static str {
    const A: [&str; 5] = [
        "9:create-line-otu4-odu4-och",
        "9:set-och-frequency-power",
        "9:create-client-transceiver",
        "9:create-client-odu4",
        "9:assign-client-to-line-odu4",
    ];
    const Z: [&str; 5] = [
        "10:create-line-otu4-odu4-och",
        "10:set-och-frequency-power",
        "10:create-client-transceiver",
        "10:create-client-odu4",
        "10:assign-client-to-line-odu4",
    ];
    let table = if side == 9 { &A } else { &Z };
    table
        .iter()
        .find(|l| l.ends_with(action))
        .copied()
        .unwrap_or(if side == 9 { "9:transponder-step" } else { "10:transponder-step" })
}

fn build_circuit(world: &World, i: usize, c: &PlannedCircuit) -> Circuit {
    let probe_at = |edge: &str| {
        world
            .probes
            .iter()
            .find(|p| p.edge_node == edge)
            .map_or(edge.to_string(), |p| p.probe_node.clone())
    };
    let (a, z) = (probe_at(&c.a_node), probe_at(&c.z_node));
    let path = world
        .topology
        .shortest_latency_path(&a, &z)
        .map(|route| PathModel::from_route(&world.topology, &route, &world.profiles))
        .unwrap_or(PathModel {
            elements: Vec::new(),
            total_length_km: 0.0,
            prop_const_us_per_km: world.topology.prop_const_us_per_km,
        });
    Circuit {
        circuit_id: format!("pc-{}", i + 1),
        vlan_id: world.vlan_base + i as u16,
        a_node: c.a_node.clone(),
        z_node: c.z_node.clone(),
        mc_id: c.mc_id.clone().unwrap_or_default(),
        transponders: (
            world.transponders[c.tps.0].id().to_string(),
            world.transponders[c.tps.1].id().to_string(),
        ),
        path,
    }
}

/// Pairs of consecutive distinct edge nodes along the placed chain, each
/// given a blank transponder at both ends.
fn plan_circuits(world: &World, c: &ServiceChainCandidate) -> Result<Vec<PlannedCircuit>, OrchestratorError> {
    let nodes: Vec<String> = c
        .assignment
        .iter()
        .filter_map(|a| world.topology.vim_node(&a.vim_id).map(|n| n.id.clone()))
        .collect();
    let mut used = Vec::new();
    let mut take = |node: &str| -> Result<usize, OrchestratorError> {
        let i = world
            .transponders
            .iter()
            .enumerate()
            .position(|(i, t)| {
                t.edge_node == node && t.state.phase == TransponderPhase::Blank && !used.contains(&i)
            })
            .ok_or_else(|| OrchestratorError::NoTransponder(node.into()))?;
        used.push(i);
        Ok(i)
    };
    let mut out = Vec::new();
    for w in nodes.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let tps = (take(&w[0])?, take(&w[1])?);
        out.push(PlannedCircuit {
            a_node: w[0].clone(),
            z_node: w[1].clone(),
            tps,
            mc_id: None,
        });
    }
    Ok(out)
}

/// Network-service set-up. A blocked request stops after message 3 with no
/// KPI report; a provisioning failure rolls back and returns the error.
pub fn run_wf1(
    req: &NsRequest,
    world: &mut World,
    timing: &TimingConfig,
) -> Result<Wf1Outcome, OrchestratorError> {
    req.validate()?;
    timing.validate()?;
    let plan = planner::plan(req, &world.topology, &world.vims);
    let circuits = match plan.decision.placed() {
        Some(c) => plan_circuits(world, c)?,
        None => Vec::new(),
    };
    Wf1Run {
        world,
        req,
        timing: *timing,
        queue: BinaryHeap::new(),
        actions: Vec::new(),
        now: 0,
        log: EventLog::default(),
        messages: Vec::new(),
        placed: None,
        circuits,
        configured: Vec::new(),
        vnfs_done: false,
        connectivity_done: false,
    }
    .run()
}

/// Commissioning: the parent controller asks the MDA to measure every
/// circuit; results are stored and appended to `log` starting at `start_s`.
pub fn run_wf2(
    circuits: &[CircuitSpec],
    train: &TrainConfig,
    backend: &mut dyn ProbeBackend,
    store: &mut RecordStore,
    start_s: f64,
    log: &mut EventLog,
) -> Result<Vec<MeasurementRecord>, OrchestratorError> {
    use labels::*;
    let mut clock = VirtualClock::at(start_s.max(log.last_time()));
    log.push(MEASURE_REQUEST, "parent-controller", clock.now());
    let mut out = Vec::with_capacity(circuits.len());
    for c in circuits {
        log.push(PROBE_TRAIN, "mda-controller", clock.now());
        let r = measure_circuit(c, train, backend, &mut clock, store)?;
        log.push(CIRCUIT_RESULT, "active-probe", clock.now());
        out.push(r);
    }
    let label = if out.iter().all(|r| r.verdict.is_pass()) {
        COMMISSIONING_PASSED
    } else {
        COMMISSIONING_FAILED
    };
    log.push(label, "mda-controller", clock.now());
    Ok(out)
}
