//! Topology configuration files.
//!
//! A topology file is TOML with exactly these top-level keys:
//!
//! ```toml
//! prop_const_us_per_km = 4.899
//!
//! [[nodes]]
//! id = "AMEN1"
//! kind = "AMEN"            # AMEN | MCEN | ROADM | AggSwitch | ProbeEndpoint
//! fixed_latency_us = 0.0
//!
//! [[links]]
//! id = "r1-r2"
//! endpoints = ["ROADM1", "ROADM2"]
//! length_km = 80.0
//! kind = "Fiber"           # Fiber | Patch
//!
//! [[vims]]
//! vim_id = "vim-amen"
//! node = "AMEN1"
//! cpu_idle = 16
//! mem_idle = 32768
//! storage_idle = 500
//! instantiable_vnf_types = ["css-dm", "csm-analytics"]
//!
//! [demand]
//! ptz_max_rtt_ms = 10.0
//! entries = [{ channel_count = 2000, per_channel_mbps = 240.0 }]
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_topology, DemandProfile, Link, Node, Topology, Violation, VimStatus,
    DEFAULT_PROP_CONST_US_PER_KM,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: vim `{vim}` attached to unknown node `{node}`")]
    UnknownVimNode {
        origin: String,
        vim: String,
        node: String,
    },
    #[error("{origin}: invalid topology: {}", join_violations(.violations))]
    Invalid {
        origin: String,
        violations: Vec<Violation>,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VimEntry {
    pub vim_id: String,
    pub node: String,
    pub cpu_idle: u32,
    pub mem_idle: u64,
    pub storage_idle: u64,
    #[serde(default)]
    pub instantiable_vnf_types: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    #[serde(default)]
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub links: Vec<Link>,
    #[serde(default = "default_prop")]
    pub prop_const_us_per_km: f64,
    #[serde(default)]
    pub vims: Vec<VimEntry>,
    #[serde(default)]
    pub demand: DemandProfile,
}

fn default_prop() -> f64 {
    DEFAULT_PROP_CONST_US_PER_KM
}

/// Parses TOML, reporting the offending line and field on failure.
pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(
    text: &str,
    origin: &str,
) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        origin: origin.to_string(),
        message: e.to_string().trim_end().to_string(),
    })
}

pub(crate) fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl TopologyFile {
    /// Attaches VIMs to their nodes and validates the result.
    pub fn into_model(self, origin: &str) -> Result<(Topology, DemandProfile), ConfigError> {
        let mut topo = Topology {
            nodes: self.nodes,
            links: self.links,
            prop_const_us_per_km: self.prop_const_us_per_km,
        };
        for v in self.vims {
            let Some(node) = topo.nodes.iter_mut().find(|n| n.id == v.node) else {
                return Err(ConfigError::UnknownVimNode {
                    origin: origin.into(),
                    vim: v.vim_id,
                    node: v.node,
                });
            };
            node.vim = Some(VimStatus {
                vim_id: v.vim_id,
                cpu_idle: v.cpu_idle,
                mem_idle: v.mem_idle,
                storage_idle: v.storage_idle,
                instantiable_vnf_types: v.instantiable_vnf_types,
            });
        }
        let violations = validate_topology(&topo);
        if !violations.is_empty() {
            return Err(ConfigError::Invalid {
                origin: origin.into(),
                violations,
            });
        }
        Ok((topo, self.demand))
    }
}

pub fn parse_topology(text: &str, origin: &str) -> Result<(Topology, DemandProfile), ConfigError> {
    parse_toml::<TopologyFile>(text, origin)?.into_model(origin)
}

pub fn load_topology(path: &Path) -> Result<(Topology, DemandProfile), ConfigError> {
    let text = read_file(path)?;
    parse_topology(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeKind;

    const SMALL: &str = r#"
prop_const_us_per_km = 5.0

[[nodes]]
id = "A"
kind = "AMEN"

[[nodes]]
id = "B"
kind = "MCEN"
fixed_latency_us = 0.5

[[links]]
id = "a-b"
endpoints = ["A", "B"]
length_km = 80.0
kind = "Fiber"

[[vims]]
vim_id = "vim-a"
node = "A"
cpu_idle = 8
mem_idle = 1024
storage_idle = 10
instantiable_vnf_types = ["x"]

[demand]
ptz_max_rtt_ms = 50.0
entries = [{ channel_count = 1, per_channel_mbps = 76.0 }]
"#;

    #[test]
    fn parses_small_topology() {
        let (t, d) = parse_topology(SMALL, "small.toml").unwrap();
        assert_eq!(t.nodes.len(), 2);
        assert_eq!(t.nodes[0].kind, NodeKind::Amen);
        assert_eq!(t.vim_node("vim-a").unwrap().id, "A");
        assert_eq!(d.ptz_max_rtt_ms, 50.0);
        assert_eq!(d.entries.len(), 1);
    }

    #[test]
    fn parse_error_names_line() {
        let bad = SMALL.replace("length_km = 80.0", "length_km = \"far\"");
        let err = parse_topology(&bad, "bad.toml").unwrap_err().to_string();
        assert!(err.starts_with("bad.toml"), "{err}");
        assert!(err.contains("line"), "{err}");
        assert!(err.contains("length_km"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("colour = 3\n{SMALL}");
        assert!(matches!(
            parse_topology(&bad, "x"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn vim_on_unknown_node_is_rejected() {
        let bad = SMALL.replace("node = \"A\"", "node = \"Z\"");
        assert!(matches!(
            parse_topology(&bad, "x"),
            Err(ConfigError::UnknownVimNode { .. })
        ));
    }

    #[test]
    fn invalid_topology_is_rejected() {
        let bad = SMALL.replace("endpoints = [\"A\", \"B\"]", "endpoints = [\"A\", \"Q\"]");
        match parse_topology(&bad, "x") {
            Err(ConfigError::Invalid { violations, .. }) => assert_eq!(violations.len(), 1),
            other => panic!("{other:?}"),
        }
    }
}
