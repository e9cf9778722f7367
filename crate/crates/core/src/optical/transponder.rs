use serde::{Deserialize, Serialize};

use super::slot::{FrequencySlot, Tunability};
use super::OpticalError;
use crate::clock::VirtualClock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransponderPhase {
    Blank,
    LineChannelsCreated,
    OchConfigured,
    TransceiverCreated,
    ClientChannelCreated,
    Assigned,
}

impl TransponderPhase {
    fn next(self) -> Option<Self> {
        use TransponderPhase::*;
        match self {
            Blank => Some(LineChannelsCreated),
            LineChannelsCreated => Some(OchConfigured),
            OchConfigured => Some(TransceiverCreated),
            TransceiverCreated => Some(ClientChannelCreated),
            ClientChannelCreated => Some(Assigned),
            Assigned => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelLayer {
    Otu4,
    Odu4,
    Och,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelSide {
    Line,
    Client,
}

/// What a logical channel is carried by / mapped into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelAssignment {
    LogicalChannel(u32),
    Transceiver(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalChannel {
    pub index: u32,
    pub layer: ChannelLayer,
    pub side: ChannelSide,
    pub assignments: Vec<ChannelAssignment>,
}

const OCH_INDEX: u32 = 1;
const OTU4_LINE_INDEX: u32 = 2;
const ODU4_LINE_INDEX: u32 = 3;
const ODU4_CLIENT_INDEX: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransponderState {
    pub tp_id: String,
    pub phase: TransponderPhase,
    pub och_freq: Option<FrequencySlot>,
    pub tx_power_dbm: Option<f64>,
    pub transceiver: Option<String>,
    pub logical_channels: Vec<LogicalChannel>,
    /// Client ODU4 assigned to line ODU4.
    pub client_line_assigned: bool,
    /// Virtual time at which the laser is warm and traffic can flow.
    pub ready_at_s: Option<f64>,
}

impl TransponderState {
    pub fn blank(tp_id: &str) -> Self {
        Self {
            tp_id: tp_id.into(),
            phase: TransponderPhase::Blank,
            och_freq: None,
            tx_power_dbm: None,
            transceiver: None,
            logical_channels: Vec::new(),
            client_line_assigned: false,
            ready_at_s: None,
        }
    }

    pub fn channel(&self, index: u32) -> Option<&LogicalChannel> {
        self.logical_channels.iter().find(|c| c.index == index)
    }

    fn channel_mut(&mut self, index: u32) -> &mut LogicalChannel {
        self.logical_channels
            .iter_mut()
            .find(|c| c.index == index)
            .expect("channel created in an earlier step")
    }
}

/// A coherent transponder attached to a line-system client port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transponder {
    pub state: TransponderState,
    pub sip_id: String,
    /// Edge node whose aggregation switch feeds the client port.
    pub edge_node: String,
    pub client_port: String,
    pub tunability: Tunability,
}

impl Transponder {
    pub fn new(
        tp_id: &str,
        sip_id: &str,
        edge_node: &str,
        client_port: &str,
        tunability: Tunability,
    ) -> Self {
        Self {
            state: TransponderState::blank(tp_id),
            sip_id: sip_id.into(),
            edge_node: edge_node.into(),
            client_port: client_port.into(),
            tunability,
        }
    }

    pub fn id(&self) -> &str {
        &self.state.tp_id
    }

    /// Wipes the configuration back to a blank device.
    pub fn reset(&mut self) {
        self.state = TransponderState::blank(&self.state.tp_id);
    }

    fn advance(&mut self, to: TransponderPhase) {
        assert_eq!(self.state.phase.next(), Some(to), "out-of-order step");
        self.state.phase = to;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransponderTiming {
    /// Budget shared by the five configuration steps.
    pub config_s: f64,
    pub laser_warmup_s: f64,
}

impl Default for TransponderTiming {
    fn default() -> Self {
        Self {
            config_s: 2.0,
            laser_warmup_s: 125.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransponderStep {
    pub tp_id: String,
    pub step: u8,
    pub action: String,
    pub t_virtual_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransponderReport {
    pub steps: Vec<TransponderStep>,
    pub configured_at_s: f64,
    pub ready_at_s: f64,
}

/// Configures a blank transponder in five steps:
///
/// 1. line OTU4 with its ODU4 and OCH, ODU4 mapped into OTU4 into OCH;
/// 2. OCH frequency and transmit power;
/// 3. transceiver component for the client port;
/// 4. client-side ODU4 assigned from the transceiver;
/// 5. client ODU4 assigned to line ODU4.
///
/// The steps share `timing.config_s`; the clock then runs through the laser
/// warm-up and ends at the traffic-ready instant.
pub fn configure_transponder(
    tp: &mut Transponder,
    freq: FrequencySlot,
    power_dbm: f64,
    clock: &mut VirtualClock,
    timing: &TransponderTiming,
) -> Result<TransponderReport, OpticalError> {
    if tp.state.phase != TransponderPhase::Blank {
        return Err(OpticalError::InvalidPhase {
            tp: tp.id().into(),
            phase: tp.state.phase,
        });
    }
    if !tp.tunability.contains(freq.n) {
        return Err(OpticalError::FrequencyOutOfRange {
            tp: tp.id().into(),
            n: freq.n,
        });
    }

    let step_s = timing.config_s / 5.0;
    let mut steps = Vec::with_capacity(5);
    let mut record = |tp: &Transponder, step: u8, action: &str, clock: &mut VirtualClock| {
        steps.push(TransponderStep {
            tp_id: tp.id().into(),
            step,
            action: action.into(),
            t_virtual_s: clock.advance(step_s),
        });
    };

    tp.state.logical_channels = vec![
        LogicalChannel {
            index: OCH_INDEX,
            layer: ChannelLayer::Och,
            side: ChannelSide::Line,
            assignments: Vec::new(),
        },
        LogicalChannel {
            index: OTU4_LINE_INDEX,
            layer: ChannelLayer::Otu4,
            side: ChannelSide::Line,
            assignments: vec![ChannelAssignment::LogicalChannel(OCH_INDEX)],
        },
        LogicalChannel {
            index: ODU4_LINE_INDEX,
            layer: ChannelLayer::Odu4,
            side: ChannelSide::Line,
            assignments: vec![ChannelAssignment::LogicalChannel(OTU4_LINE_INDEX)],
        },
    ];
    tp.advance(TransponderPhase::LineChannelsCreated);
    record(tp, 1, "create-line-otu4-odu4-och", clock);

    tp.state.och_freq = Some(freq);
    tp.state.tx_power_dbm = Some(power_dbm);
    tp.advance(TransponderPhase::OchConfigured);
    record(tp, 2, "set-och-frequency-power", clock);

    tp.state.transceiver = Some(format!("{}-transceiver", tp.client_port));
    tp.advance(TransponderPhase::TransceiverCreated);
    record(tp, 3, "create-client-transceiver", clock);

    let xcvr = tp.state.transceiver.clone().expect("set in step 3");
    tp.state.logical_channels.push(LogicalChannel {
        index: ODU4_CLIENT_INDEX,
        layer: ChannelLayer::Odu4,
        side: ChannelSide::Client,
        assignments: vec![ChannelAssignment::Transceiver(xcvr)],
    });
    tp.advance(TransponderPhase::ClientChannelCreated);
    record(tp, 4, "create-client-odu4", clock);

    tp.state
        .channel_mut(ODU4_CLIENT_INDEX)
        .assignments
        .push(ChannelAssignment::LogicalChannel(ODU4_LINE_INDEX));
    tp.state.client_line_assigned = true;
    tp.advance(TransponderPhase::Assigned);
    record(tp, 5, "assign-client-odu4-to-line-odu4", clock);

    let configured_at_s = clock.now();
    let ready_at_s = clock.advance(timing.laser_warmup_s);
    tp.state.ready_at_s = Some(ready_at_s);
    Ok(TransponderReport {
        steps,
        configured_at_s,
        ready_at_s,
    })
}
