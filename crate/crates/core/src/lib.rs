//! Latency-aware metro network slicing: VNF placement, optical line-system
//! provisioning, packet-train commissioning and soft-failure detection,
//! driven on a virtual clock.

pub mod config;
pub mod model;
pub mod planner;
pub mod clock;
pub mod optical;
pub mod dataplane;
pub mod probe;
pub mod mda;
pub mod orchestrator;
pub mod scenario;
