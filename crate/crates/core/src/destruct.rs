//! Self-destruction of a node judged malicious, and the base-station registry
//! it revokes identifiers from.
//!
//! Actions run in canonical order; battery draining starts together with the
//! memory erase. Three failure events can leave the node alive: the routine is
//! incompatible with the node (only the radio-flood drain succeeds), the node
//! ignores base-station messages (nothing happens), or the battery is below
//! the floor when erasing should start (memory survives).

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{NodeState, NodeStatus};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DestructionAction {
    EraseMemory,
    DrainBattery,
    DestroyRadio,
    DeleteIdentifier,
    MaskSensorType,
}

impl DestructionAction {
    pub const CANONICAL: [DestructionAction; 5] = [
        DestructionAction::EraseMemory,
        DestructionAction::DrainBattery,
        DestructionAction::DestroyRadio,
        DestructionAction::DeleteIdentifier,
        DestructionAction::MaskSensorType,
    ];
}

impl fmt::Display for DestructionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DestructionAction::EraseMemory => "erase_memory",
            DestructionAction::DrainBattery => "drain_battery",
            DestructionAction::DestroyRadio => "destroy_radio",
            DestructionAction::DeleteIdentifier => "delete_identifier",
            DestructionAction::MaskSensorType => "mask_sensor_type",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FailureModel {
    pub p_incompatible_routine: f64,
    pub p_ignores_messages: f64,
    /// Charge below which the memory erase cannot run.
    pub battery_floor: f64,
}

impl Default for FailureModel {
    fn default() -> Self {
        Self {
            p_incompatible_routine: 0.0,
            p_ignores_messages: 0.0,
            battery_floor: 0.05,
        }
    }
}

impl FailureModel {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, p) in [
            ("p_incompatible_routine", self.p_incompatible_routine),
            ("p_ignores_messages", self.p_ignores_messages),
        ] {
            if !(0.0..=1.0).contains(&p) {
                v.push(format!("failure.{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.battery_floor >= 0.0) {
            v.push(format!(
                "failure.battery_floor must be nonnegative, got {}",
                self.battery_floor
            ));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DestructionStatus {
    Destroyed,
    PartiallyAlive,
    FullyAliveMalicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    IncompatibleRoutine,
    IgnoresMessages,
    BatteryExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DestructionOutcome {
    pub status: DestructionStatus,
    /// In execution order.
    pub actions_completed: Vec<DestructionAction>,
    pub reason: Option<FailureReason>,
}

/// Identifiers the base station accepts, revoked identifiers, and identifiers
/// whose readings are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    registered: BTreeSet<NodeId>,
    revoked: BTreeSet<NodeId>,
    quarantined: BTreeSet<NodeId>,
}

impl Registry {
    pub fn new(ids: impl IntoIterator<Item = NodeId>) -> Self {
        Self {
            registered: ids.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn is_registered(&self, id: NodeId) -> bool {
        self.registered.contains(&id)
    }

    pub fn is_revoked(&self, id: NodeId) -> bool {
        self.revoked.contains(&id)
    }

    pub fn is_quarantined(&self, id: NodeId) -> bool {
        self.quarantined.contains(&id)
    }

    pub fn registered(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.registered.iter().copied()
    }

    pub fn quarantine(&mut self, id: NodeId) {
        self.quarantined.insert(id);
    }

    fn revoke(&mut self, id: NodeId) {
        self.registered.remove(&id);
        self.quarantined.remove(&id);
        self.revoked.insert(id);
    }

    /// Does the base station process readings carrying this identifier?
    pub fn accepts(&self, id: NodeId) -> bool {
        self.is_registered(id) && !self.is_quarantined(id) && !self.is_revoked(id)
    }

    /// A node presenting `id` asks to rejoin; revoked and quarantined
    /// identifiers are refused.
    pub fn reintroduction_attempt(&self, id: NodeId) -> bool {
        self.accepts(id)
    }
}

/// Runs the destruction procedure on `node`. Failure events are drawn from
/// `rng` (always two uniform draws, so stream consumption does not depend on
/// the model). A node that already went through the procedure is left
/// untouched and its earlier outcome returned.
pub fn initiate_self_destruction<R: Rng + ?Sized>(
    node: &mut NodeState,
    registry: &mut Registry,
    model: &FailureModel,
    rng: &mut R,
) -> Result<DestructionOutcome> {
    if let Some(prior) = &node.destruction {
        return Ok(prior.clone());
    }
    if !registry.is_registered(node.id) {
        return Err(Error::Config(format!(
            "node {} is not registered at the base station",
            node.id
        )));
    }
    node.status = NodeStatus::Destroying;
    registry.quarantine(node.id);

    let ignores = rng.random::<f64>() < model.p_ignores_messages;
    let incompatible = rng.random::<f64>() < model.p_incompatible_routine;

    use DestructionAction::*;
    let outcome = if ignores {
        DestructionOutcome {
            status: DestructionStatus::FullyAliveMalicious,
            actions_completed: Vec::new(),
            reason: Some(FailureReason::IgnoresMessages),
        }
    } else if incompatible {
        // The base station can still flood the node's radio.
        node.battery = 0.0;
        DestructionOutcome {
            status: DestructionStatus::PartiallyAlive,
            actions_completed: vec![DrainBattery],
            reason: Some(FailureReason::IncompatibleRoutine),
        }
    } else if node.battery < model.battery_floor {
        // Drain starts alongside the erase, which never runs; node-side
        // actions die with the battery, the registry revocation does not.
        node.battery = 0.0;
        registry.revoke(node.id);
        DestructionOutcome {
            status: DestructionStatus::PartiallyAlive,
            actions_completed: vec![DrainBattery, DeleteIdentifier],
            reason: Some(FailureReason::BatteryExhausted),
        }
    } else {
        node.has_memory = false;
        node.has_keys = false;
        node.battery = 0.0;
        node.radio_ok = false;
        registry.revoke(node.id);
        node.sensor_masked = true;
        DestructionOutcome {
            status: DestructionStatus::Destroyed,
            actions_completed: DestructionAction::CANONICAL.to_vec(),
            reason: None,
        }
    };

    node.status = match outcome.status {
        DestructionStatus::Destroyed => NodeStatus::Destroyed,
        DestructionStatus::PartiallyAlive => NodeStatus::PartiallyAlive,
        DestructionStatus::FullyAliveMalicious => NodeStatus::FullyAliveMalicious,
    };
    node.destruction = Some(outcome.clone());
    Ok(outcome)
}
