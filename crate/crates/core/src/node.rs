use std::fmt;

use serde::{Deserialize, Serialize};

use crate::destruct::DestructionOutcome;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Alive,
    Suspicious,
    Destroying,
    Destroyed,
    PartiallyAlive,
    FullyAliveMalicious,
}

impl NodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Alive => "alive",
            NodeStatus::Suspicious => "suspicious",
            NodeStatus::Destroying => "destroying",
            NodeStatus::Destroyed => "destroyed",
            NodeStatus::PartiallyAlive => "partially_alive",
            NodeStatus::FullyAliveMalicious => "fully_alive_malicious",
        }
    }

    /// Still under normal monitoring (no destruction initiated).
    pub fn is_monitored(self) -> bool {
        matches!(self, NodeStatus::Alive | NodeStatus::Suspicious)
    }
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Temperature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    /// Grid position in meters; fixed for the run.
    pub position: (f64, f64),
    /// Charge fraction in `[0, 1]`.
    pub battery: f64,
    pub has_keys: bool,
    pub has_memory: bool,
    pub radio_ok: bool,
    pub sensor_masked: bool,
    pub sensor_kind: SensorKind,
    pub status: NodeStatus,
    /// Outcome of the first (and only) self-destruction attempt.
    pub destruction: Option<DestructionOutcome>,
}

impl NodeState {
    pub fn new(id: NodeId, position: (f64, f64), battery: f64) -> Self {
        Self {
            id,
            position,
            battery: battery.clamp(0.0, 1.0),
            has_keys: true,
            has_memory: true,
            radio_ok: true,
            sensor_masked: false,
            sensor_kind: SensorKind::Temperature,
            status: NodeStatus::Alive,
            destruction: None,
        }
    }

    pub fn can_transmit(&self) -> bool {
        self.radio_ok && self.battery > 0.0 && self.status != NodeStatus::Destroyed
    }

    /// Battery only ever decreases.
    pub fn drain(&mut self, amount: f64) {
        self.battery = (self.battery - amount.max(0.0)).max(0.0);
    }

    pub fn distance_to(&self, other: &NodeState) -> f64 {
        let (dx, dy) = (
            self.position.0 - other.position.0,
            self.position.1 - other.position.1,
        );
        dx.hypot(dy)
    }
}
