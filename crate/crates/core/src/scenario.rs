//! Scenario files: one TOML document that references a topology file and an
//! NS request file (paths relative to the scenario) and carries every other
//! setting inline. The demonstration scenario is compiled in.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_toml, parse_topology, read_file, ConfigError};
use crate::dataplane::{DegradationScenario, ElementProfile, ElementProfiles};
use crate::mda::DetectorConfig;
use crate::model::{DemandProfile, NodeKind, NsRequest, Topology};
use crate::optical::{OlsConfig, OlsController, OpticalError, Sip, Transponder, Tunability};
use crate::orchestrator::{ProbeAttachment, TimingConfig, World};
use crate::probe::TrainConfig;

const BUILTIN_SCENARIO: &str = include_str!("../../../scenarios/default/scenario.toml");
const BUILTIN_TOPOLOGY: &str = include_str!("../../../scenarios/default/topology.toml");
const BUILTIN_REQUEST: &str = include_str!("../../../scenarios/default/ns_request.toml");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("line system: {0}")]
    Optical(#[from] OpticalError),
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileEntry {
    pub kind: NodeKind,
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default)]
    pub jitter_std_ns: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataplaneSection {
    #[serde(default)]
    pub profiles: Vec<ProfileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OlsSection {
    pub slot_floor_n: i32,
    pub default_m: u32,
    pub abstract_topology: bool,
    pub tx_power_dbm: f64,
}

impl Default for OlsSection {
    fn default() -> Self {
        let c = OlsConfig::default();
        Self {
            slot_floor_n: c.slot_floor_n,
            default_m: c.default_m,
            abstract_topology: c.abstract_topology,
            tx_power_dbm: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransponderEntry {
    pub tp_id: String,
    pub sip_id: String,
    pub edge_node: String,
    pub client_port: String,
    pub tunability: Tunability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Commissioning {
    pub max_rtt_us: f64,
    pub vlan_base: u16,
}

impl Default for Commissioning {
    fn default() -> Self {
        Self {
            max_rtt_us: 800.0,
            vlan_base: 100,
        }
    }
}

/// One QoS table row: the probe-to-probe circuit reduced to the element
/// kinds in `kinds`, over `length_km` of fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Row {
    pub setup: String,
    pub length_km: f64,
    pub kinds: Vec<NodeKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Config {
    pub trains_per_row: u32,
    pub rows: Vec<Table1Row>,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            trains_per_row: 10,
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    seed: u64,
    topology: String,
    request: String,
    #[serde(default)]
    timing: TimingConfig,
    #[serde(default)]
    probe: TrainConfig,
    #[serde(default)]
    degradation: DegradationScenario,
    #[serde(default)]
    detector: DetectorConfig,
    #[serde(default)]
    dataplane: DataplaneSection,
    #[serde(default)]
    ols: OlsSection,
    #[serde(default)]
    sips: Vec<Sip>,
    #[serde(default)]
    transponders: Vec<TransponderEntry>,
    #[serde(default)]
    probes: Vec<ProbeAttachment>,
    #[serde(default)]
    commissioning: Commissioning,
    #[serde(default)]
    table1: Table1Config,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub topology: Topology,
    pub demand: DemandProfile,
    pub request: NsRequest,
    pub timing: TimingConfig,
    pub probe: TrainConfig,
    pub degradation: DegradationScenario,
    pub detector: DetectorConfig,
    pub profiles: ElementProfiles,
    pub ols: OlsSection,
    pub sips: Vec<Sip>,
    pub transponders: Vec<TransponderEntry>,
    pub probes: Vec<ProbeAttachment>,
    pub commissioning: Commissioning,
    pub table1: Table1Config,
}

impl Scenario {
    /// The compiled-in demonstration scenario.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SCENARIO, "builtin:scenario.toml", |name| match name {
            "topology.toml" => Ok((BUILTIN_TOPOLOGY.into(), "builtin:topology.toml".into())),
            "ns_request.toml" => Ok((BUILTIN_REQUEST.into(), "builtin:ns_request.toml".into())),
            other => Err(ScenarioError::Invalid {
                origin: "builtin:scenario.toml".into(),
                message: format!("no built-in file `{other}`"),
            }),
        })
        .expect("built-in scenario is valid")
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = read_file(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), |name| {
            let p = dir.join(name);
            Ok((read_file(&p)?, p.display().to_string()))
        })
    }

    /// `resolve` maps a referenced file name to its text and a display origin.
    pub fn parse<F>(text: &str, origin: &str, resolve: F) -> Result<Self, ScenarioError>
    where
        F: Fn(&str) -> Result<(String, String), ScenarioError>,
    {
        let f: ScenarioFile = parse_toml(text, origin)?;
        let (topo_text, topo_origin) = resolve(&f.topology)?;
        let (topology, demand) = parse_topology(&topo_text, &topo_origin)?;
        let (req_text, req_origin) = resolve(&f.request)?;
        let request: NsRequest = parse_toml(&req_text, &req_origin)?;

        let invalid = |message: String| ScenarioError::Invalid {
            origin: origin.into(),
            message,
        };
        f.probe.validate().map_err(|e| invalid(e.to_string()))?;
        f.timing.validate().map_err(|e| invalid(e.to_string()))?;
        f.detector.validate().map_err(|e| invalid(e.to_string()))?;
        if !(f.degradation.sample_period_s > 0.0 && f.degradation.ramp_db_per_s >= 0.0) {
            return Err(invalid("degradation needs sample_period_s > 0 and ramp_db_per_s >= 0".into()));
        }
        let mut profiles = ElementProfiles::new();
        for p in &f.dataplane.profiles {
            if !(0.0..=1.0).contains(&p.loss_prob) || !(p.jitter_std_ns >= 0.0) {
                return Err(invalid(format!("bad element profile for {:?}", p.kind)));
            }
            if profiles
                .insert(
                    p.kind,
                    ElementProfile {
                        loss_prob: p.loss_prob,
                        jitter_std_ns: p.jitter_std_ns,
                    },
                )
                .is_some()
            {
                return Err(invalid(format!("duplicate element profile for {:?}", p.kind)));
            }
        }
        for a in &f.probes {
            for n in [&a.probe_node, &a.edge_node] {
                if topology.node(n).is_none() {
                    return Err(invalid(format!("probe attachment names unknown node `{n}`")));
                }
            }
        }
        for t in &f.transponders {
            if topology.node(&t.edge_node).is_none() {
                return Err(invalid(format!("transponder `{}` at unknown node `{}`", t.tp_id, t.edge_node)));
            }
        }

        Ok(Self {
            seed: f.seed,
            topology,
            demand,
            request,
            timing: f.timing,
            probe: f.probe,
            degradation: f.degradation,
            detector: f.detector,
            profiles,
            ols: f.ols,
            sips: f.sips,
            transponders: f.transponders,
            probes: f.probes,
            commissioning: f.commissioning,
            table1: f.table1,
        })
    }

    pub fn ols_config(&self) -> OlsConfig {
        OlsConfig {
            slot_floor_n: self.ols.slot_floor_n,
            default_m: self.ols.default_m,
            abstract_topology: self.ols.abstract_topology,
        }
    }

    /// Fresh world state: idle VIMs, empty line system, blank transponders.
    pub fn world(&self) -> Result<World, ScenarioError> {
        let ols = OlsController::new(&self.topology, self.sips.clone(), self.ols_config())?;
        Ok(World {
            vims: self.topology.vims(),
            ols,
            transponders: self
                .transponders
                .iter()
                .map(|t| Transponder::new(&t.tp_id, &t.sip_id, &t.edge_node, &t.client_port, t.tunability.clone()))
                .collect(),
            probes: self.probes.clone(),
            profiles: self.profiles.clone(),
            tx_power_dbm: self.ols.tx_power_dbm,
            vlan_base: self.commissioning.vlan_base,
            topology: self.topology.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::run_wf1;

    #[test]
    fn builtin_parses_and_runs() {
        let s = Scenario::builtin();
        assert_eq!(s.topology.nodes.len(), 9);
        assert_eq!(s.probe.ip_payload_bytes, 1456);
        let mut w = s.world().unwrap();
        let out = run_wf1(&s.request, &mut w, &s.timing).unwrap();
        let placed = out.decision.placed().unwrap();
        assert_eq!(placed.vim_sequence(), ["vim-amen1", "vim-mcen1"]);
        assert_eq!(out.kpi.unwrap().kpi3_s, 137.0);
    }

    #[test]
    fn loads_from_disk_with_relative_files() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default/scenario.toml");
        let s = Scenario::load(&root).unwrap();
        assert_eq!(s.seed, Scenario::builtin().seed);
    }

    #[test]
    fn unknown_field_names_line() {
        let text = BUILTIN_SCENARIO.replace("[timing]\n", "[timing]\nwarp_factor = 9\n");
        let err = Scenario::parse(&text, "s.toml", |n| Ok((
            if n == "topology.toml" { BUILTIN_TOPOLOGY } else { BUILTIN_REQUEST }.into(),
            n.into(),
        )))
        .unwrap_err()
        .to_string();
        assert!(err.contains("warp_factor"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn missing_file_is_reported() {
        let err = Scenario::load(Path::new("/nonexistent/scenario.toml")).unwrap_err();
        assert!(matches!(err, ScenarioError::Config(ConfigError::Io { .. })));
    }
}
