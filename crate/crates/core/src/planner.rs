//! VNF placement over an RTT-weighted graph of VIM-bearing nodes.
//!
//! The planner discards VIMs that cannot host any VNF of the request, ranks
//! the `k` cheapest service chains in the auxiliary graph and places the
//! request on the first ranked chain that puts every VNF on a distinct VIM.
//! Costs are accumulated in integer picoseconds so that equal-cost chains
//! tie exactly and the lexicographic tie-break is stable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{NsRequest, Topology, VimStatus};

/// Eligible VIM ids per VNF id.
pub type Eligibility = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RttVertex {
    pub vim_id: String,
    pub node: String,
    pub vnf_types: BTreeSet<String>,
}

/// Auxiliary graph: VIM vertices joined by the RTT of their shortest
/// transport path. Extra endpoints (client ingress/egress) can be carried
/// along for access-leg costs.
#[derive(Debug, Clone, Serialize)]
pub struct RttGraph {
    pub vertices: Vec<RttVertex>,
    points: Vec<String>,
    /// Two-way latency between points, `None` when unreachable.
    rtt_us: Vec<Vec<Option<f64>>>,
}

impl RttGraph {
    fn point(&self, node: &str) -> Option<usize> {
        self.points.iter().position(|p| p == node)
    }

    /// RTT between two nodes known to the graph.
    pub fn rtt_between_nodes(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.point(a)?, self.point(b)?);
        self.rtt_us[i][j]
    }

    /// RTT between the nodes hosting two VIMs.
    pub fn edge_weight(&self, vim_a: &str, vim_b: &str) -> Option<f64> {
        let a = self.vertices.iter().find(|v| v.vim_id == vim_a)?;
        let b = self.vertices.iter().find(|v| v.vim_id == vim_b)?;
        self.rtt_between_nodes(&a.node, &b.node)
    }
}

pub fn build_rtt_graph(t: &Topology, vims: &[VimStatus]) -> RttGraph {
    build_rtt_graph_with_endpoints(t, vims, &[])
}

/// Builds the graph over the VIM nodes plus `endpoints`.
///
/// Edge weight is twice the minimum one-way latency (propagation plus
/// transit-node latency) between the two nodes.
pub fn build_rtt_graph_with_endpoints(
    t: &Topology,
    vims: &[VimStatus],
    endpoints: &[&str],
) -> RttGraph {
    let mut vertices: Vec<RttVertex> = vims
        .iter()
        .filter_map(|v| {
            t.vim_node(&v.vim_id).map(|n| RttVertex {
                vim_id: v.vim_id.clone(),
                node: n.id.clone(),
                vnf_types: v.instantiable_vnf_types.clone(),
            })
        })
        .collect();
    vertices.sort_by(|a, b| a.vim_id.cmp(&b.vim_id));

    let mut points: Vec<String> = vertices.iter().map(|v| v.node.clone()).collect();
    for e in endpoints {
        if t.node(e).is_some() && !points.iter().any(|p| p == e) {
            points.push((*e).to_string());
        }
    }
    let n = points.len();
    let mut rtt_us = vec![vec![None; n]; n];
    for i in 0..n {
        rtt_us[i][i] = Some(0.0);
        for j in (i + 1)..n {
            let w = t
                .shortest_latency_path(&points[i], &points[j])
                .map(|p| 2.0 * p.one_way_us);
            rtt_us[i][j] = w;
            rtt_us[j][i] = w;
        }
    }
    RttGraph {
        vertices,
        points,
        rtt_us,
    }
}

/// For every VNF, the VIMs with enough idle resources that can instantiate
/// its type. VIMs eligible for nothing do not appear at all.
pub fn filter_vims(req: &NsRequest, vims: &[VimStatus]) -> Eligibility {
    let mut sorted: Vec<&VimStatus> = vims.iter().collect();
    sorted.sort_by(|a, b| a.vim_id.cmp(&b.vim_id));
    req.chain
        .iter()
        .map(|vnf| {
            let ok = sorted
                .iter()
                .filter(|v| v.fits(vnf))
                .map(|v| v.vim_id.clone())
                .collect();
            (vnf.vnf_id.clone(), ok)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub vnf_id: String,
    pub vim_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceChainCandidate {
    pub assignment: Vec<Assignment>,
    pub cost_us: f64,
}

impl ServiceChainCandidate {
    /// At most one VNF of the chain per VIM.
    pub fn is_feasible(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.assignment.iter().all(|a| seen.insert(a.vim_id.as_str()))
    }

    pub fn vim_sequence(&self) -> Vec<&str> {
        self.assignment.iter().map(|a| a.vim_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockReason {
    NoValidSC,
    RttExceeded,
    NoEligibleVim,
}

impl fmt::Display for BlockReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockReason::NoValidSC => "no valid service chain",
            BlockReason::RttExceeded => "minimum-cost chain exceeds the RTT requirement",
            BlockReason::NoEligibleVim => "a VNF has no eligible VIM",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlacementDecision {
    Placed(ServiceChainCandidate),
    Blocked(BlockReason),
}

impl PlacementDecision {
    pub fn placed(&self) -> Option<&ServiceChainCandidate> {
        match self {
            PlacementDecision::Placed(c) => Some(c),
            PlacementDecision::Blocked(_) => None,
        }
    }
}

fn to_ps(us: f64) -> u64 {
    (us * 1e6).round() as u64
}

/// Ranks up to `req.k` cheapest chains that respect `eligibility`, ascending
/// by cost with ties broken on the VIM-id sequence. Co-located chains are
/// ranked like any other; feasibility is checked by [`place`].
pub fn rank_service_chains(
    req: &NsRequest,
    g: &RttGraph,
    eligibility: &Eligibility,
) -> Vec<ServiceChainCandidate> {
    let k = req.k;
    if k == 0 || req.chain.is_empty() {
        return Vec::new();
    }
    // Vertex indices follow vim-id order, so comparing index sequences
    // compares vim-id sequences.
    let vertex = |vim: &str| g.vertices.iter().position(|v| v.vim_id == vim);
    let weight = |a: usize, b: usize| -> Option<u64> {
        g.rtt_between_nodes(&g.vertices[a].node, &g.vertices[b].node)
            .map(to_ps)
    };
    let access = |endpoint: &Option<String>, v: usize| -> Option<u64> {
        match endpoint {
            None => Some(0),
            Some(node) => g
                .rtt_between_nodes(node, &g.vertices[v].node)
                .map(to_ps),
        }
    };

    let layer_vertices = |vnf_id: &str| -> Vec<usize> {
        let mut vs: Vec<usize> = eligibility
            .get(vnf_id)
            .map(|ids| ids.iter().filter_map(|id| vertex(id)).collect())
            .unwrap_or_default();
        vs.sort_unstable();
        vs.dedup();
        vs
    };

    type Partial = (u64, Vec<usize>);
    let keep_best = |mut list: Vec<Partial>| -> Vec<Partial> {
        list.sort();
        list.truncate(k);
        list
    };

    // Best-k partial chains ending at each vertex of the current layer.
    let mut frontier: Vec<(usize, Vec<Partial>)> = layer_vertices(&req.chain[0].vnf_id)
        .into_iter()
        .filter_map(|v| access(&req.ingress, v).map(|c| (v, vec![(c, vec![v])])))
        .collect();

    for vnf in &req.chain[1..] {
        let mut next = Vec::new();
        for v in layer_vertices(&vnf.vnf_id) {
            let mut incoming = Vec::new();
            for (u, partials) in &frontier {
                let Some(w) = weight(*u, v) else { continue };
                for (c, seq) in partials {
                    let mut s = seq.clone();
                    s.push(v);
                    incoming.push((c + w, s));
                }
            }
            if !incoming.is_empty() {
                next.push((v, keep_best(incoming)));
            }
        }
        frontier = next;
    }

    let mut complete = Vec::new();
    for (v, partials) in frontier {
        let Some(leg) = access(&req.egress, v) else { continue };
        complete.extend(partials.into_iter().map(|(c, s)| (c + leg, s)));
    }
    keep_best(complete)
        .into_iter()
        .map(|(cost_ps, seq)| ServiceChainCandidate {
            assignment: req
                .chain
                .iter()
                .zip(seq)
                .map(|(vnf, v)| Assignment {
                    vnf_id: vnf.vnf_id.clone(),
                    vim_id: g.vertices[v].vim_id.clone(),
                })
                .collect(),
            cost_us: cost_ps as f64 / 1e6,
        })
        .collect()
}

/// Everything the planner computed for one request.
#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub eligibility: Eligibility,
    pub ranked: Vec<ServiceChainCandidate>,
    pub decision: PlacementDecision,
}

/// Computes the placement decision without touching VIM state.
pub fn plan(req: &NsRequest, t: &Topology, vims: &[VimStatus]) -> PlanReport {
    let eligibility = filter_vims(req, vims);
    if eligibility.values().any(|v| v.is_empty()) {
        return PlanReport {
            eligibility,
            ranked: Vec::new(),
            decision: PlacementDecision::Blocked(BlockReason::NoEligibleVim),
        };
    }
    let endpoints: Vec<&str> = [&req.ingress, &req.egress]
        .into_iter()
        .flatten()
        .map(String::as_str)
        .collect();
    let g = build_rtt_graph_with_endpoints(t, vims, &endpoints);
    let ranked = rank_service_chains(req, &g, &eligibility);
    let decision = match ranked.iter().find(|c| c.is_feasible()) {
        None => PlacementDecision::Blocked(BlockReason::NoValidSC),
        Some(c) if c.cost_us > req.max_rtt_us => {
            PlacementDecision::Blocked(BlockReason::RttExceeded)
        }
        Some(c) => PlacementDecision::Placed(c.clone()),
    };
    PlanReport {
        eligibility,
        ranked,
        decision,
    }
}

/// Places the request and, when placed, reserves the VNFs' resources on
/// the chosen VIMs. Blocked requests leave `vims` untouched.
///
/// The exclusive borrow of `vims` serializes concurrent callers.
pub fn place(req: &NsRequest, t: &Topology, vims: &mut [VimStatus]) -> PlacementDecision {
    let report = plan(req, t, vims);
    if let PlacementDecision::Placed(c) = &report.decision {
        commit(req, c, vims);
    }
    report.decision
}

pub(crate) fn commit(req: &NsRequest, c: &ServiceChainCandidate, vims: &mut [VimStatus]) {
    for (vnf, a) in req.chain.iter().zip(&c.assignment) {
        let vim = vims
            .iter_mut()
            .find(|v| v.vim_id == a.vim_id)
            .expect("placed on a known VIM");
        vim.reserve(vnf);
    }
}

/// Returns the reservation made by [`commit`].
pub(crate) fn release(req: &NsRequest, c: &ServiceChainCandidate, vims: &mut [VimStatus]) {
    for (vnf, a) in req.chain.iter().zip(&c.assignment) {
        if let Some(vim) = vims.iter_mut().find(|v| v.vim_id == a.vim_id) {
            vim.cpu_idle += vnf.cpu_req;
            vim.mem_idle += vnf.mem_req;
            vim.storage_idle += vnf.storage_req;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Link, LinkKind, Node, NodeKind, VnfDescriptor};
    use proptest::prelude::*;

    fn vim(id: &str, cpu: u32, tags: &[&str]) -> VimStatus {
        VimStatus {
            vim_id: id.into(),
            cpu_idle: cpu,
            mem_idle: 65_536,
            storage_idle: 1_000,
            instantiable_vnf_types: tags.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn vnf(id: &str, cpu: u32, tag: &str) -> VnfDescriptor {
        VnfDescriptor {
            vnf_id: id.into(),
            type_tag: tag.into(),
            cpu_req: cpu,
            mem_req: 1_024,
            storage_req: 10,
        }
    }

    fn request(chain: Vec<VnfDescriptor>, max_rtt_us: f64, k: usize) -> NsRequest {
        NsRequest {
            ns_id: "ns".into(),
            chain,
            max_rtt_us,
            k,
            ingress: None,
            egress: None,
        }
    }

    /// AMEN and MCEN joined by one 80 km span, no node latency.
    fn two_site(vims: &[VimStatus]) -> Topology {
        let mut a = Node {
            id: "AMEN".into(),
            kind: NodeKind::Amen,
            vim: None,
            fixed_latency_us: 0.0,
        };
        let mut b = Node {
            id: "MCEN".into(),
            kind: NodeKind::Mcen,
            vim: None,
            fixed_latency_us: 0.0,
        };
        a.vim = vims.first().cloned();
        b.vim = vims.get(1).cloned();
        Topology {
            nodes: vec![a, b],
            links: vec![Link {
                id: "span".into(),
                endpoints: ("AMEN".into(), "MCEN".into()),
                length_km: 80.0,
                kind: LinkKind::Fiber,
            }],
            prop_const_us_per_km: 4.899,
        }
    }

    fn demo_vims() -> Vec<VimStatus> {
        vec![vim("A", 16, &["css", "csm"]), vim("B", 16, &["css", "csm"])]
    }

    fn demo_chain() -> Vec<VnfDescriptor> {
        vec![vnf("v1", 4, "css"), vnf("v2", 4, "csm")]
    }

    #[test]
    fn filter_both_eligible() {
        let e = filter_vims(&request(demo_chain(), 1.0, 10), &demo_vims());
        assert_eq!(e["v1"], ["A", "B"]);
        assert_eq!(e["v2"], ["A", "B"]);
    }

    #[test]
    fn filter_boundary_is_inclusive() {
        let e = filter_vims(&request(vec![vnf("v", 8, "css")], 1.0, 1), &[vim("A", 8, &["css"])]);
        assert_eq!(e["v"], ["A"]);
        let e = filter_vims(
            &request(vec![vnf("v", 8, "css")], 1.0, 1),
            &[vim("A", 4, &["css"]), vim("B", 4, &["css"])],
        );
        assert!(e["v"].is_empty());
    }

    #[test]
    fn filter_checks_type_tag() {
        let e = filter_vims(&request(vec![vnf("v", 1, "dpi")], 1.0, 1), &demo_vims());
        assert!(e["v"].is_empty());
    }

    #[test]
    fn rtt_graph_single_span() {
        let vims = demo_vims();
        let g = build_rtt_graph(&two_site(&vims), &vims);
        // 2 * 80 km * 4.899 us/km
        let w = g.edge_weight("A", "B").unwrap();
        assert!((w - 783.84).abs() < 1e-9, "{w}");
        assert_eq!(g.edge_weight("A", "B"), g.edge_weight("B", "A"));
        assert_eq!(g.edge_weight("A", "A"), Some(0.0));
    }

    #[test]
    fn rtt_graph_disconnected_vim_has_no_edge() {
        let vims = demo_vims();
        let mut t = two_site(&vims);
        t.links.clear();
        let g = build_rtt_graph(&t, &vims);
        assert_eq!(g.edge_weight("A", "B"), None);
    }

    #[test]
    fn ranking_on_demo_pair() {
        let vims = demo_vims();
        let t = two_site(&vims);
        let req = request(demo_chain(), 10_000.0, 10);
        let g = build_rtt_graph(&t, &vims);
        let ranked = rank_service_chains(&req, &g, &filter_vims(&req, &vims));
        let seqs: Vec<_> = ranked.iter().map(|c| c.vim_sequence()).collect();
        assert_eq!(seqs, [["A", "A"], ["B", "B"], ["A", "B"], ["B", "A"]]);
        assert_eq!(ranked[0].cost_us, 0.0);
        assert_eq!(ranked[2].cost_us, ranked[3].cost_us);
        assert!((ranked[2].cost_us - 783.84).abs() < 1e-9);
    }

    #[test]
    fn single_vnf_costs_access_legs_only() {
        let vims = demo_vims();
        let t = two_site(&vims);
        let mut req = request(vec![vnf("v", 1, "css")], 10_000.0, 10);
        req.egress = Some("MCEN".into());
        let e = filter_vims(&req, &vims[..1]);
        let g = build_rtt_graph_with_endpoints(&t, &vims[..1], &["MCEN"]);
        let ranked = rank_service_chains(&req, &g, &e);
        assert_eq!(ranked.len(), 1);
        assert!((ranked[0].cost_us - 783.84).abs() < 1e-9);
    }

    #[test]
    fn demo_places_one_vnf_per_vim() {
        let mut vims = demo_vims();
        let t = two_site(&vims);
        let d = place(&request(demo_chain(), 10_000.0, 10), &t, &mut vims);
        let c = d.placed().expect("placed");
        assert_eq!(c.vim_sequence(), ["A", "B"]);
        assert_eq!(vims[0].cpu_idle, 12);
        assert_eq!(vims[1].cpu_idle, 12);
    }

    #[test]
    fn single_vim_for_two_vnfs_blocks() {
        let mut vims = vec![vim("A", 16, &["css", "csm"]), vim("B", 16, &[])];
        let t = two_site(&vims);
        let before = vims.clone();
        let d = place(&request(demo_chain(), 10_000.0, 10), &t, &mut vims);
        assert_eq!(d, PlacementDecision::Blocked(BlockReason::NoValidSC));
        assert_eq!(vims, before);
    }

    #[test]
    fn rtt_bound_blocks() {
        let mut vims = demo_vims();
        let t = two_site(&vims);
        let before = vims.clone();
        let d = place(&request(demo_chain(), 100.0, 10), &t, &mut vims);
        assert_eq!(d, PlacementDecision::Blocked(BlockReason::RttExceeded));
        assert_eq!(vims, before);
    }

    #[test]
    fn no_eligible_vim_blocks() {
        let mut vims = demo_vims();
        let t = two_site(&vims);
        let d = place(&request(vec![vnf("v", 64, "css")], 1e6, 10), &t, &mut vims);
        assert_eq!(d, PlacementDecision::Blocked(BlockReason::NoEligibleVim));
    }

    #[test]
    fn shallow_ranking_is_exhausted_by_colocated_chains() {
        // k = 2 only covers [A,A] and [B,B]; both violate distinct-VIM.
        let mut vims = demo_vims();
        let t = two_site(&vims);
        let d = place(&request(demo_chain(), 10_000.0, 2), &t, &mut vims);
        assert_eq!(d, PlacementDecision::Blocked(BlockReason::NoValidSC));
    }

    /// Brute-force enumeration of every eligibility-respecting assignment.
    fn brute_force(req: &NsRequest, g: &RttGraph, e: &Eligibility) -> Vec<(u64, Vec<String>)> {
        let mut out = Vec::new();
        let mut stack: Vec<(Vec<String>, u64)> = vec![(Vec::new(), 0)];
        while let Some((seq, cost)) = stack.pop() {
            if seq.len() == req.chain.len() {
                out.push((cost, seq));
                continue;
            }
            for vim in &e[&req.chain[seq.len()].vnf_id] {
                let add = match seq.last() {
                    None => Some(0),
                    Some(prev) => g.edge_weight(prev, vim).map(to_ps),
                };
                if let Some(w) = add {
                    let mut s = seq.clone();
                    s.push(vim.clone());
                    stack.push((s, cost + w));
                }
            }
        }
        out.sort();
        out
    }

    fn random_instance() -> impl Strategy<Value = (Topology, Vec<VimStatus>, NsRequest)> {
        (1usize..=4, 1usize..=3, 1usize..=30).prop_flat_map(|(nv, nc, k)| {
            (
                prop::collection::vec(1.0f64..200.0, nv * nv),
                prop::collection::vec(any::<bool>(), nv * nv),
                prop::collection::vec((1u32..8, prop::collection::vec(any::<bool>(), 2)), nv),
                prop::collection::vec((1u32..6, any::<bool>()), nc),
            )
                .prop_map(move |(lens, present, vimspec, chainspec)| {
                    let tags = ["x", "y"];
                    let mut nodes = Vec::new();
                    let mut vims = Vec::new();
                    for (i, (cpu, tagmask)) in vimspec.iter().enumerate() {
                        let v = VimStatus {
                            vim_id: format!("vim{i}"),
                            cpu_idle: *cpu,
                            mem_idle: 1 << 20,
                            storage_idle: 1 << 20,
                            instantiable_vnf_types: tags
                                .iter()
                                .zip(tagmask)
                                .filter(|(_, on)| **on)
                                .map(|(t, _)| t.to_string())
                                .collect(),
                        };
                        nodes.push(Node {
                            id: format!("n{i}"),
                            kind: NodeKind::Amen,
                            vim: Some(v.clone()),
                            fixed_latency_us: 0.5,
                        });
                        vims.push(v);
                    }
                    let mut links = Vec::new();
                    for i in 0..nv {
                        for j in (i + 1)..nv {
                            if present[i * nv + j] {
                                links.push(Link {
                                    id: format!("l{i}-{j}"),
                                    endpoints: (format!("n{i}"), format!("n{j}")),
                                    length_km: lens[i * nv + j],
                                    kind: LinkKind::Fiber,
                                });
                            }
                        }
                    }
                    let chain = chainspec
                        .iter()
                        .enumerate()
                        .map(|(i, (cpu, t))| vnf(&format!("f{i}"), *cpu, if *t { "x" } else { "y" }))
                        .collect();
                    let t = Topology {
                        nodes,
                        links,
                        prop_const_us_per_km: 4.899,
                    };
                    (t, vims, request(chain, 1500.0, k))
                })
        })
    }

    proptest! {
        #[test]
        fn ranking_matches_brute_force((t, vims, req) in random_instance()) {
            let e = filter_vims(&req, &vims);
            let g = build_rtt_graph(&t, &vims);
            let ranked = rank_service_chains(&req, &g, &e);
            let mut expected = brute_force(&req, &g, &e);
            expected.truncate(req.k);
            let got: Vec<(u64, Vec<String>)> = ranked
                .iter()
                .map(|c| ((c.cost_us * 1e6).round() as u64, c.vim_sequence().iter().map(|s| s.to_string()).collect()))
                .collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn k_one_is_global_minimum((t, vims, mut req) in random_instance()) {
            req.k = 1;
            let e = filter_vims(&req, &vims);
            let g = build_rtt_graph(&t, &vims);
            let ranked = rank_service_chains(&req, &g, &e);
            let expected = brute_force(&req, &g, &e);
            prop_assert!(ranked.len() <= 1);
            match expected.first() {
                None => prop_assert!(ranked.is_empty()),
                Some((c, _)) => prop_assert_eq!((ranked[0].cost_us * 1e6).round() as u64, *c),
            }
        }

        #[test]
        fn placement_is_deterministic_and_conserves_resources((t, vims, req) in random_instance()) {
            let mut a = vims.clone();
            let mut b = vims.clone();
            let da = place(&req, &t, &mut a);
            let db = place(&req, &t, &mut b);
            prop_assert_eq!(&da, &db);
            prop_assert_eq!(&a, &b);
            let total = |vs: &[VimStatus]| vs.iter().map(|v| v.cpu_idle as u64).sum::<u64>();
            match da {
                PlacementDecision::Placed(_) => {
                    let need: u64 = req.chain.iter().map(|v| v.cpu_req as u64).sum();
                    prop_assert_eq!(total(&vims) - total(&a), need);
                }
                PlacementDecision::Blocked(_) => prop_assert_eq!(&a, &vims),
            }
        }

        #[test]
        fn more_resources_never_block((t, vims, mut req) in random_instance(), extra in 1u32..8) {
            // Exhaustive ranking depth, so every feasible chain is visible.
            req.k = vims.len().pow(req.chain.len() as u32);
            let mut small = vims.clone();
            let before = place(&req, &t, &mut small);
            let mut richer: Vec<VimStatus> = vims.iter().cloned().map(|mut v| { v.cpu_idle += extra; v }).collect();
            let after = place(&req, &t, &mut richer);
            if before.placed().is_some() {
                prop_assert!(after.placed().is_some());
            }
        }
    }
}
