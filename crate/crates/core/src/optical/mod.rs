//! Optical half of the WAN infrastructure manager: an open line system
//! controller exposing a TAPI-like context and media channels, and the
//! OpenConfig-style transponder configuration sequence.
//!
//! Controller messages are plain serializable records; no protocol stack
//! sits behind them.

mod ols;
mod slot;
mod transponder;

pub use ols::{
    ActiveConnections, ControllerMessage, McState, MediaChannel, OlsConfig, OlsController,
    OlsLink, OlsTopology, Sip, SlotRequest, TapiContext,
};
pub use slot::{FrequencySlot, Tunability, ANCHOR_THZ, CENTER_GRANULARITY_GHZ, WIDTH_GRANULARITY_GHZ};
pub use transponder::{
    configure_transponder, ChannelAssignment, ChannelLayer, ChannelSide, LogicalChannel,
    Transponder, TransponderPhase, TransponderReport, TransponderState, TransponderStep,
    TransponderTiming,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticalError {
    #[error("unknown SIP `{0}`")]
    UnknownSip(String),
    #[error("duplicate SIP `{0}`")]
    DuplicateSip(String),
    #[error("SIP `{sip}` sits on `{node}`, which is not a ROADM of the line system")]
    SipNotOnRoadm { sip: String, node: String },
    #[error("SIP `{0}` has an empty tunability set")]
    EmptyTunability(String),
    #[error("no route between `{0}` and `{1}`")]
    NoRoute(String, String),
    #[error("slot {slot} collides with media channel `{existing}` on link `{link}`")]
    SpectrumCollision {
        slot: FrequencySlot,
        existing: String,
        link: String,
    },
    #[error("slot {slot} is outside the tunability of SIP `{sip}`")]
    SlotOutOfTunability { slot: FrequencySlot, sip: String },
    #[error("no free slot of width m={m} at or above n={floor}")]
    SpectrumExhausted { m: u32, floor: i32 },
    #[error("unknown media channel `{0}`")]
    UnknownChannel(String),
    #[error("transponder `{tp}` is in phase {phase:?}, expected Blank")]
    InvalidPhase {
        tp: String,
        phase: TransponderPhase,
    },
    #[error("frequency n={n} is outside the tuning range of transponder `{tp}`")]
    FrequencyOutOfRange { tp: String, n: i32 },
}
