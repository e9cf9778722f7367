//! World model: topology, compute resources, service requests and the
//! video-surveillance demand profile.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default one-way propagation constant in μs/km.
///
/// Sits between (799.1 − 15.2)/160 and (420.4 − 15.2)/82.8, the two values
/// implied by the long-haul QoS measurements.
pub const DEFAULT_PROP_CONST_US_PER_KM: f64 = 4.899;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "AMEN")]
    Amen,
    #[serde(rename = "MCEN")]
    Mcen,
    #[serde(rename = "ROADM")]
    Roadm,
    AggSwitch,
    ProbeEndpoint,
}

impl NodeKind {
    /// Only edge nodes host a compute domain.
    pub fn hosts_vim(self) -> bool {
        matches!(self, NodeKind::Amen | NodeKind::Mcen)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::Amen => "AMEN",
            NodeKind::Mcen => "MCEN",
            NodeKind::Roadm => "ROADM",
            NodeKind::AggSwitch => "AggSwitch",
            NodeKind::ProbeEndpoint => "ProbeEndpoint",
        };
        f.write_str(s)
    }
}

/// Idle compute capacity of one VIM, as last reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VimStatus {
    pub vim_id: String,
    /// vCPUs.
    pub cpu_idle: u32,
    /// MiB.
    pub mem_idle: u64,
    /// GiB.
    pub storage_idle: u64,
    pub instantiable_vnf_types: BTreeSet<String>,
}

impl VimStatus {
    pub fn fits(&self, vnf: &VnfDescriptor) -> bool {
        self.cpu_idle >= vnf.cpu_req
            && self.mem_idle >= vnf.mem_req
            && self.storage_idle >= vnf.storage_req
            && self.instantiable_vnf_types.contains(&vnf.type_tag)
    }

    /// Reserves the VNF's resources. Caller must have checked [`VimStatus::fits`].
    pub(crate) fn reserve(&mut self, vnf: &VnfDescriptor) {
        debug_assert!(self.fits(vnf));
        self.cpu_idle -= vnf.cpu_req;
        self.mem_idle -= vnf.mem_req;
        self.storage_idle -= vnf.storage_req;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vim: Option<VimStatus>,
    /// One-way latency added each time a packet crosses the node.
    #[serde(default)]
    pub fixed_latency_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    Fiber,
    Patch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub endpoints: (String, String),
    pub length_km: f64,
    pub kind: LinkKind,
}

impl Link {
    pub fn other_end(&self, node: &str) -> Option<&str> {
        if self.endpoints.0 == node {
            Some(&self.endpoints.1)
        } else if self.endpoints.1 == node {
            Some(&self.endpoints.0)
        } else {
            None
        }
    }

    pub fn touches(&self, node: &str) -> bool {
        self.endpoints.0 == node || self.endpoints.1 == node
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub prop_const_us_per_km: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            links: Vec::new(),
            prop_const_us_per_km: DEFAULT_PROP_CONST_US_PER_KM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    DuplicateNodeId(String),
    DuplicateLinkId(String),
    DanglingEndpoint { link: String, node: String },
    SelfLoop(String),
    NegativeLength { link: String, length_km: f64 },
    NegativeLatency { node: String, fixed_latency_us: f64 },
    VimOnNonEdgeNode { node: String, kind: NodeKind },
    DuplicateVimId(String),
    NonPositivePropagationConstant(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId(id) => write!(f, "duplicate node id `{id}`"),
            Violation::DuplicateLinkId(id) => write!(f, "duplicate link id `{id}`"),
            Violation::DanglingEndpoint { link, node } => {
                write!(f, "link `{link}` references unknown node `{node}`")
            }
            Violation::SelfLoop(id) => write!(f, "link `{id}` is a self-loop"),
            Violation::NegativeLength { link, length_km } => {
                write!(f, "link `{link}` has negative length {length_km} km")
            }
            Violation::NegativeLatency {
                node,
                fixed_latency_us,
            } => write!(f, "node `{node}` has negative latency {fixed_latency_us} us"),
            Violation::VimOnNonEdgeNode { node, kind } => {
                write!(f, "node `{node}` of kind {kind} cannot host a VIM")
            }
            Violation::DuplicateVimId(id) => write!(f, "duplicate VIM id `{id}`"),
            Violation::NonPositivePropagationConstant(c) => {
                write!(f, "propagation constant must be positive, got {c}")
            }
        }
    }
}

/// Returns every invariant violation in `t`; an empty list means valid.
pub fn validate_topology(t: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(t.prop_const_us_per_km > 0.0) {
        out.push(Violation::NonPositivePropagationConstant(
            t.prop_const_us_per_km,
        ));
    }

    let mut node_ids = HashSet::new();
    let mut vim_ids = HashSet::new();
    for n in &t.nodes {
        if !node_ids.insert(n.id.as_str()) {
            out.push(Violation::DuplicateNodeId(n.id.clone()));
        }
        if !(n.fixed_latency_us >= 0.0) {
            out.push(Violation::NegativeLatency {
                node: n.id.clone(),
                fixed_latency_us: n.fixed_latency_us,
            });
        }
        if let Some(vim) = &n.vim {
            if !n.kind.hosts_vim() {
                out.push(Violation::VimOnNonEdgeNode {
                    node: n.id.clone(),
                    kind: n.kind,
                });
            }
            if !vim_ids.insert(vim.vim_id.as_str()) {
                out.push(Violation::DuplicateVimId(vim.vim_id.clone()));
            }
        }
    }

    let mut link_ids = HashSet::new();
    for l in &t.links {
        if !link_ids.insert(l.id.as_str()) {
            out.push(Violation::DuplicateLinkId(l.id.clone()));
        }
        for end in [&l.endpoints.0, &l.endpoints.1] {
            if !node_ids.contains(end.as_str()) {
                out.push(Violation::DanglingEndpoint {
                    link: l.id.clone(),
                    node: end.clone(),
                });
            }
        }
        if l.endpoints.0 == l.endpoints.1 {
            out.push(Violation::SelfLoop(l.id.clone()));
        }
        if !(l.length_km >= 0.0) {
            out.push(Violation::NegativeLength {
                link: l.id.clone(),
                length_km: l.length_km,
            });
        }
    }
    out
}

/// A minimum-latency route through the transport topology.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyPath {
    /// Nodes from source to destination, inclusive.
    pub nodes: Vec<String>,
    pub links: Vec<String>,
    pub length_km: f64,
    /// One-way latency: propagation plus the fixed latency of every transit
    /// node (source and destination excluded).
    pub one_way_us: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Topology {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }

    /// Node hosting the VIM with the given id.
    pub fn vim_node(&self, vim_id: &str) -> Option<&Node> {
        self.nodes
            .iter()
            .find(|n| n.vim.as_ref().is_some_and(|v| v.vim_id == vim_id))
    }

    /// Snapshot of every VIM's status, in node order.
    pub fn vims(&self) -> Vec<VimStatus> {
        self.nodes.iter().filter_map(|n| n.vim.clone()).collect()
    }

    fn link_latency_us(&self, l: &Link) -> f64 {
        l.length_km * self.prop_const_us_per_km
    }

    /// Single-source minimum one-way latency to every node (Dijkstra).
    /// Returns `(distance, predecessor link index)` per node index.
    fn latency_tree(&self, src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let index: BTreeMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.nodes.len()];
        // Sorted by link id so equal-latency ties resolve the same way every run.
        let mut order: Vec<usize> = (0..self.links.len()).collect();
        order.sort_by(|&a, &b| self.links[a].id.cmp(&self.links[b].id));
        for li in order {
            let l = &self.links[li];
            if let (Some(&a), Some(&b)) = (
                index.get(l.endpoints.0.as_str()),
                index.get(l.endpoints.1.as_str()),
            ) {
                adj[a].push((b, li));
                adj[b].push((a, li));
            }
        }

        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut pred = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(HeapEntry { cost: 0.0, node: src });
        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            let transit = if node == src {
                0.0
            } else {
                self.nodes[node].fixed_latency_us
            };
            for &(next, li) in &adj[node] {
                let cand = cost + transit + self.link_latency_us(&self.links[li]);
                if cand < dist[next] {
                    dist[next] = cand;
                    pred[next] = Some(li);
                    heap.push(HeapEntry {
                        cost: cand,
                        node: next,
                    });
                }
            }
        }
        (dist, pred)
    }

    /// Minimum one-way latency route between two nodes, or `None` when
    /// either node is unknown or they are disconnected.
    pub fn shortest_latency_path(&self, from: &str, to: &str) -> Option<LatencyPath> {
        let src = self.nodes.iter().position(|n| n.id == from)?;
        let dst = self.nodes.iter().position(|n| n.id == to)?;
        let (dist, pred) = self.latency_tree(src);
        if !dist[dst].is_finite() {
            return None;
        }
        let mut nodes = vec![self.nodes[dst].id.clone()];
        let mut links = Vec::new();
        let mut length_km = 0.0;
        let mut cur = dst;
        while cur != src {
            let li = pred[cur].expect("reachable node has a predecessor");
            let l = &self.links[li];
            links.push(l.id.clone());
            length_km += l.length_km;
            let prev = l.other_end(&self.nodes[cur].id).expect("link touches node");
            cur = self
                .nodes
                .iter()
                .position(|n| n.id == prev)
                .expect("validated endpoint");
            nodes.push(self.nodes[cur].id.clone());
        }
        nodes.reverse();
        links.reverse();
        Some(LatencyPath {
            nodes,
            links,
            length_km,
            one_way_us: dist[dst],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnfDescriptor {
    pub vnf_id: String,
    pub type_tag: String,
    pub cpu_req: u32,
    pub mem_req: u64,
    pub storage_req: u64,
}

/// Network-service instantiation request: an ordered VNF chain plus its
/// end-to-end latency requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsRequest {
    pub ns_id: String,
    pub chain: Vec<VnfDescriptor>,
    pub max_rtt_us: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Optional client-side attachment; adds an access leg to the chain cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingress: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub egress: Option<String>,
}

pub const DEFAULT_RANKING_DEPTH: usize = 10;

fn default_k() -> usize {
    DEFAULT_RANKING_DEPTH
}

#[derive(Debug, Error, PartialEq)]
pub enum RequestError {
    #[error("request `{0}` has an empty VNF chain")]
    EmptyChain(String),
    #[error("request `{ns}`: max_rtt_us must be positive, got {value}")]
    NonPositiveRtt { ns: String, value: f64 },
    #[error("request `{0}`: ranking depth k must be at least 1")]
    ZeroK(String),
    #[error("VNF `{0}` must request positive cpu, memory and storage")]
    ZeroRequirement(String),
    #[error("VNF id `{0}` appears twice in the chain")]
    DuplicateVnf(String),
}

impl NsRequest {
    pub fn validate(&self) -> Result<(), RequestError> {
        if self.chain.is_empty() {
            return Err(RequestError::EmptyChain(self.ns_id.clone()));
        }
        if !(self.max_rtt_us > 0.0) {
            return Err(RequestError::NonPositiveRtt {
                ns: self.ns_id.clone(),
                value: self.max_rtt_us,
            });
        }
        if self.k == 0 {
            return Err(RequestError::ZeroK(self.ns_id.clone()));
        }
        let mut seen = HashSet::new();
        for v in &self.chain {
            if v.cpu_req == 0 || v.mem_req == 0 || v.storage_req == 0 {
                return Err(RequestError::ZeroRequirement(v.vnf_id.clone()));
            }
            if !seen.insert(v.vnf_id.as_str()) {
                return Err(RequestError::DuplicateVnf(v.vnf_id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandEntry {
    pub channel_count: u64,
    pub per_channel_mbps: f64,
}

/// Camera-channel bandwidth demand and the PTZ control-loop RTT bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    #[serde(default)]
    pub entries: Vec<DemandEntry>,
    #[serde(default = "default_ptz_bound")]
    pub ptz_max_rtt_ms: f64,
}

fn default_ptz_bound() -> f64 {
    10.0
}

impl Default for DemandProfile {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            ptz_max_rtt_ms: default_ptz_bound(),
        }
    }
}

/// Total bandwidth in Mb/s.
pub fn aggregate_bandwidth(d: &DemandProfile) -> f64 {
    d.entries
        .iter()
        .map(|e| e.channel_count as f64 * e.per_channel_mbps)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

/// Inclusive bound check of a measured RTT against the PTZ requirement.
pub fn check_ptz_bound(measured_rtt_ms: f64, d: &DemandProfile) -> Verdict {
    Verdict::from_bool(measured_rtt_ms <= d.ptz_max_rtt_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn node(id: &str, kind: NodeKind) -> Node {
        Node {
            id: id.into(),
            kind,
            vim: None,
            fixed_latency_us: 0.0,
        }
    }

    fn fiber(id: &str, a: &str, b: &str, km: f64) -> Link {
        Link {
            id: id.into(),
            endpoints: (a.into(), b.into()),
            length_km: km,
            kind: LinkKind::Fiber,
        }
    }

    #[test]
    fn empty_topology_is_valid() {
        assert!(validate_topology(&Topology::default()).is_empty());
    }

    #[test]
    fn single_dangling_endpoint_is_one_violation() {
        let t = Topology {
            nodes: vec![node("A", NodeKind::Roadm)],
            links: vec![fiber("l1", "A", "X", 1.0)],
            ..Default::default()
        };
        let v = validate_topology(&t);
        assert_eq!(
            v,
            vec![Violation::DanglingEndpoint {
                link: "l1".into(),
                node: "X".into()
            }]
        );
    }

    #[test]
    fn collects_every_violation() {
        let mut amen = node("A", NodeKind::Roadm);
        amen.vim = Some(VimStatus {
            vim_id: "v".into(),
            cpu_idle: 1,
            mem_idle: 1,
            storage_idle: 1,
            instantiable_vnf_types: BTreeSet::new(),
        });
        amen.fixed_latency_us = -1.0;
        let t = Topology {
            nodes: vec![amen, node("A", NodeKind::Roadm)],
            links: vec![fiber("l", "A", "A", -2.0), fiber("l", "A", "A", 0.0)],
            prop_const_us_per_km: 0.0,
        };
        let v = validate_topology(&t);
        assert!(v.contains(&Violation::DuplicateNodeId("A".into())));
        assert!(v.contains(&Violation::DuplicateLinkId("l".into())));
        assert!(v.contains(&Violation::SelfLoop("l".into())));
        assert!(v.contains(&Violation::NonPositivePropagationConstant(0.0)));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::NegativeLength { .. })));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::NegativeLatency { .. })));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::VimOnNonEdgeNode { .. })));
    }

    #[test]
    fn shortest_path_counts_transit_nodes_only() {
        let mut r = node("R", NodeKind::Roadm);
        r.fixed_latency_us = 3.0;
        let mut a = node("A", NodeKind::Amen);
        a.fixed_latency_us = 100.0;
        let t = Topology {
            nodes: vec![a, r, node("B", NodeKind::Mcen)],
            links: vec![fiber("l1", "A", "R", 10.0), fiber("l2", "R", "B", 10.0)],
            prop_const_us_per_km: 5.0,
        };
        let p = t.shortest_latency_path("A", "B").unwrap();
        assert_eq!(p.nodes, ["A", "R", "B"]);
        assert_eq!(p.links, ["l1", "l2"]);
        assert!((p.one_way_us - 103.0).abs() < 1e-12);
        assert!((p.length_km - 20.0).abs() < 1e-12);
        assert_eq!(t.shortest_latency_path("A", "A").unwrap().one_way_us, 0.0);
    }

    #[test]
    fn shortest_path_avoids_slow_transit() {
        // Ring where the short way crosses a slow node.
        let mut slow = node("S", NodeKind::Roadm);
        slow.fixed_latency_us = 1000.0;
        let t = Topology {
            nodes: vec![
                node("A", NodeKind::Roadm),
                slow,
                node("F", NodeKind::Roadm),
                node("B", NodeKind::Roadm),
            ],
            links: vec![
                fiber("a-s", "A", "S", 1.0),
                fiber("s-b", "S", "B", 1.0),
                fiber("a-f", "A", "F", 50.0),
                fiber("f-b", "F", "B", 50.0),
            ],
            prop_const_us_per_km: 5.0,
        };
        let p = t.shortest_latency_path("A", "B").unwrap();
        assert_eq!(p.nodes, ["A", "F", "B"]);
        assert!(t.shortest_latency_path("A", "nowhere").is_none());
    }

    #[test]
    fn demand_examples() {
        let one = DemandProfile {
            entries: vec![DemandEntry {
                channel_count: 1,
                per_channel_mbps: 76.0,
            }],
            ..Default::default()
        };
        assert_eq!(aggregate_bandwidth(&one), 76.0);
        assert_eq!(aggregate_bandwidth(&DemandProfile::default()), 0.0);
        // 2000*240 + 2000*76 + 150000*2 = 480000 + 152000 + 300000
        let city = DemandProfile {
            entries: vec![
                DemandEntry {
                    channel_count: 2000,
                    per_channel_mbps: 240.0,
                },
                DemandEntry {
                    channel_count: 2000,
                    per_channel_mbps: 76.0,
                },
                DemandEntry {
                    channel_count: 150_000,
                    per_channel_mbps: 2.0,
                },
            ],
            ..Default::default()
        };
        assert_eq!(aggregate_bandwidth(&city), 932_000.0);
    }

    #[test]
    fn ptz_bound_is_inclusive() {
        let d10 = DemandProfile::default();
        let d50 = DemandProfile {
            ptz_max_rtt_ms: 50.0,
            ..Default::default()
        };
        assert_eq!(check_ptz_bound(0.7991, &d10), Verdict::Pass);
        assert_eq!(check_ptz_bound(10.0, &d10), Verdict::Pass);
        assert_eq!(check_ptz_bound(51.0, &d50), Verdict::Fail);
    }

    #[test]
    fn request_validation() {
        let vnf = VnfDescriptor {
            vnf_id: "a".into(),
            type_tag: "t".into(),
            cpu_req: 1,
            mem_req: 1,
            storage_req: 1,
        };
        let mut req = NsRequest {
            ns_id: "ns".into(),
            chain: vec![vnf.clone()],
            max_rtt_us: 1.0,
            k: 1,
            ingress: None,
            egress: None,
        };
        assert!(req.validate().is_ok());
        req.k = 0;
        assert_eq!(req.validate(), Err(RequestError::ZeroK("ns".into())));
        req.k = 1;
        req.chain.push(vnf);
        assert_eq!(req.validate(), Err(RequestError::DuplicateVnf("a".into())));
        req.chain.clear();
        assert!(matches!(req.validate(), Err(RequestError::EmptyChain(_))));
    }

    proptest! {
        #[test]
        fn aggregate_bandwidth_is_linear(
            entries in prop::collection::vec((0u64..200_000, 0.1f64..1000.0), 0..12),
            split in 0usize..12,
        ) {
            let entries: Vec<_> = entries
                .into_iter()
                .map(|(c, r)| DemandEntry { channel_count: c, per_channel_mbps: r })
                .collect();
            let split = split.min(entries.len());
            let whole = DemandProfile { entries: entries.clone(), ..Default::default() };
            let head = DemandProfile { entries: entries[..split].to_vec(), ..Default::default() };
            let tail = DemandProfile { entries: entries[split..].to_vec(), ..Default::default() };
            let lhs = aggregate_bandwidth(&whole);
            let rhs = aggregate_bandwidth(&head) + aggregate_bandwidth(&tail);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
        }
    }
}
