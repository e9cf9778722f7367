use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::slot::{FrequencySlot, Tunability};
use super::OpticalError;
use crate::model::{LinkKind, NodeKind, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sip {
    pub sip_id: String,
    /// ROADM the client port belongs to.
    pub node: String,
    pub port: String,
    pub tunability: Tunability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum McState {
    Provisioned,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaChannel {
    pub mc_id: String,
    pub a_sip: String,
    pub z_sip: String,
    pub slot: FrequencySlot,
    pub route: Vec<String>,
    pub state: McState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRequest {
    Fixed(FrequencySlot),
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OlsConfig {
    /// Lowest centre index first-fit will try.
    pub slot_floor_n: i32,
    /// Width multiple for automatically assigned slots (4 = 50 GHz).
    pub default_m: u32,
    /// Export the line system as a single forwarding node.
    pub abstract_topology: bool,
}

impl Default for OlsConfig {
    fn default() -> Self {
        Self {
            slot_floor_n: 0,
            default_m: 4,
            abstract_topology: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlsLink {
    pub link_id: String,
    pub a: String,
    pub z: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlsTopology {
    pub nodes: Vec<String>,
    pub links: Vec<OlsLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapiContext {
    pub sips: Vec<Sip>,
    pub topology: OlsTopology,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveConnections {
    pub media_channels: Vec<MediaChannel>,
}

/// Northbound exchange with the line-system controller, as logged by the
/// workflow engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "message", rename_all = "kebab-case")]
pub enum ControllerMessage {
    GetContext {
        sip_count: usize,
        abstracted: bool,
    },
    GetActiveConnections {
        mc_ids: Vec<String>,
    },
    CreateMediaChannel {
        a_sip: String,
        z_sip: String,
        request: SlotRequest,
        result: Result<MediaChannel, String>,
    },
    DeleteMediaChannel {
        mc_id: String,
        result: Result<(), String>,
    },
    TransponderStep(super::TransponderStep),
}

const ABSTRACT_NODE: &str = "ols-domain";

/// Line-system controller: single owner of the spectrum state.
#[derive(Debug, Clone)]
pub struct OlsController {
    cfg: OlsConfig,
    roadms: Vec<String>,
    links: Vec<OlsLink>,
    sips: BTreeMap<String, Sip>,
    channels: BTreeMap<String, MediaChannel>,
    next_id: u64,
}

impl OlsController {
    /// Builds the controller over the ROADMs of `t` and the fiber links
    /// joining them.
    pub fn new(t: &Topology, sips: Vec<Sip>, cfg: OlsConfig) -> Result<Self, OpticalError> {
        let mut roadms: Vec<String> = t
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Roadm)
            .map(|n| n.id.clone())
            .collect();
        roadms.sort();
        let is_roadm = |id: &str| roadms.binary_search_by(|r| r.as_str().cmp(id)).is_ok();
        let mut links: Vec<OlsLink> = t
            .links
            .iter()
            .filter(|l| {
                l.kind == LinkKind::Fiber && is_roadm(&l.endpoints.0) && is_roadm(&l.endpoints.1)
            })
            .map(|l| OlsLink {
                link_id: l.id.clone(),
                a: l.endpoints.0.clone(),
                z: l.endpoints.1.clone(),
            })
            .collect();
        links.sort_by(|a, b| a.link_id.cmp(&b.link_id));

        let mut by_id = BTreeMap::new();
        for s in sips {
            if !is_roadm(&s.node) {
                return Err(OpticalError::SipNotOnRoadm {
                    sip: s.sip_id,
                    node: s.node,
                });
            }
            if s.tunability.is_empty() {
                return Err(OpticalError::EmptyTunability(s.sip_id));
            }
            if by_id.contains_key(&s.sip_id) {
                return Err(OpticalError::DuplicateSip(s.sip_id));
            }
            by_id.insert(s.sip_id.clone(), s);
        }
        Ok(Self {
            cfg,
            roadms,
            links,
            sips: by_id,
            channels: BTreeMap::new(),
            next_id: 1,
        })
    }

    pub fn config(&self) -> &OlsConfig {
        &self.cfg
    }

    pub fn sip(&self, sip_id: &str) -> Option<&Sip> {
        self.sips.get(sip_id)
    }

    pub fn get_context(&self) -> TapiContext {
        let topology = if self.cfg.abstract_topology {
            OlsTopology {
                nodes: vec![ABSTRACT_NODE.to_string()],
                links: Vec::new(),
            }
        } else {
            OlsTopology {
                nodes: self.roadms.clone(),
                links: self.links.clone(),
            }
        };
        TapiContext {
            sips: self.sips.values().cloned().collect(),
            topology,
        }
    }

    /// Provisioned channels ordered by id.
    pub fn get_active_connections(&self) -> Vec<MediaChannel> {
        self.channels
            .values()
            .filter(|c| c.state == McState::Provisioned)
            .cloned()
            .collect()
    }

    /// Fewest-hop route; among equal hop counts the lexicographically
    /// smallest link-id sequence wins.
    pub fn route(&self, a_node: &str, z_node: &str) -> Option<Vec<String>> {
        if a_node == z_node {
            return Some(Vec::new());
        }
        let mut pred: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
        let mut seen: BTreeSet<&str> = BTreeSet::from([a_node]);
        let mut queue = VecDeque::from([a_node]);
        while let Some(u) = queue.pop_front() {
            // self.links is sorted by id, so neighbours come out in link-id order.
            for l in &self.links {
                let v = if l.a == u {
                    l.z.as_str()
                } else if l.z == u {
                    l.a.as_str()
                } else {
                    continue;
                };
                if seen.insert(v) {
                    pred.insert(v, (u, l.link_id.as_str()));
                    if v == z_node {
                        let mut route = Vec::new();
                        let mut cur = v;
                        while cur != a_node {
                            let (p, link) = pred[cur];
                            route.push(link.to_string());
                            cur = p;
                        }
                        route.reverse();
                        return Some(route);
                    }
                    queue.push_back(v);
                }
            }
        }
        None
    }

    fn collision(&self, route: &[String], slot: &FrequencySlot) -> Option<(String, String)> {
        self.channels
            .values()
            .filter(|c| c.state == McState::Provisioned)
            .find_map(|c| {
                if !c.slot.overlaps(slot) {
                    return None;
                }
                c.route
                    .iter()
                    .find(|l| route.contains(l))
                    .map(|l| (c.mc_id.clone(), l.clone()))
            })
    }

    pub fn create_media_channel(
        &mut self,
        a_sip: &str,
        z_sip: &str,
        request: SlotRequest,
    ) -> Result<MediaChannel, OpticalError> {
        let a = self
            .sips
            .get(a_sip)
            .ok_or_else(|| OpticalError::UnknownSip(a_sip.into()))?;
        let z = self
            .sips
            .get(z_sip)
            .ok_or_else(|| OpticalError::UnknownSip(z_sip.into()))?;
        let route = self
            .route(&a.node, &z.node)
            .ok_or_else(|| OpticalError::NoRoute(a.node.clone(), z.node.clone()))?;

        let slot = match request {
            SlotRequest::Fixed(slot) => {
                for s in [a, z] {
                    if !s.tunability.contains(slot.n) {
                        return Err(OpticalError::SlotOutOfTunability {
                            slot,
                            sip: s.sip_id.clone(),
                        });
                    }
                }
                if let Some((existing, link)) = self.collision(&route, &slot) {
                    return Err(OpticalError::SpectrumCollision {
                        slot,
                        existing,
                        link,
                    });
                }
                slot
            }
            SlotRequest::Auto => {
                let m = self.cfg.default_m;
                let floor = self.cfg.slot_floor_n;
                let top = a.tunability.max().min(z.tunability.max()).unwrap_or(floor - 1);
                (floor..=top)
                    .map(|n| FrequencySlot::new(n, m))
                    .find(|s| {
                        a.tunability.contains(s.n)
                            && z.tunability.contains(s.n)
                            && self.collision(&route, s).is_none()
                    })
                    .ok_or(OpticalError::SpectrumExhausted { m, floor })?
            }
        };

        let mc = MediaChannel {
            mc_id: format!("mc-{:06}", self.next_id),
            a_sip: a_sip.into(),
            z_sip: z_sip.into(),
            slot,
            route,
            state: McState::Provisioned,
        };
        self.next_id += 1;
        self.channels.insert(mc.mc_id.clone(), mc.clone());
        Ok(mc)
    }

    pub fn delete_media_channel(&mut self, mc_id: &str) -> Result<(), OpticalError> {
        match self.channels.get_mut(mc_id) {
            Some(c) if c.state == McState::Provisioned => {
                c.state = McState::Deleted;
                Ok(())
            }
            _ => Err(OpticalError::UnknownChannel(mc_id.into())),
        }
    }

    /// Occupied intervals (6.25 GHz units) per link, sorted.
    pub fn spectrum_occupancy(&self) -> BTreeMap<String, Vec<(i64, i64)>> {
        let mut out: BTreeMap<String, Vec<(i64, i64)>> = BTreeMap::new();
        for c in self.channels.values().filter(|c| c.state == McState::Provisioned) {
            for l in &c.route {
                out.entry(l.clone()).or_default().push(c.slot.interval());
            }
        }
        for v in out.values_mut() {
            v.sort_unstable();
        }
        out
    }
}
