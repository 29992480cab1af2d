//! Scenario files: TOML, every section optional except where noted, unknown
//! keys rejected.

use serde::{Deserialize, Serialize};

use super::environment::{Drift, EnvironmentModel, HeatEventKind};
use crate::ar::ArConfig;
use crate::decision::{RuleTable, ThresholdConfig};
use crate::destruct::FailureModel;
use crate::error::{Error, Result};
use crate::nn::{LmConfig, NetTopologySpec};
use crate::NodeId;

/// Names accepted by [`Scenario::builtin`].
pub const BUILTIN_SCENARIOS: [&str; 2] = ["case1", "case2"];

const CASE1: &str = include_str!("../../scenarios/case1.toml");
const CASE2: &str = include_str!("../../scenarios/case2.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub node_count: usize,
    /// Grid width; nodes fill cells row by row.
    pub columns: usize,
    /// Meters between adjacent cells.
    pub spacing: f64,
    /// `[column, row]` of the cell the base station occupies, if on the grid.
    pub base_station_cell: Option<[usize; 2]>,
    pub neighbor_count: usize,
    pub initial_battery: f64,
    pub battery_overrides: Vec<BatteryOverride>,
    /// Charge spent per transmitted reading.
    pub drain_per_reading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryOverride {
    pub node: NodeId,
    pub level: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            node_count: 15,
            columns: 4,
            spacing: 1.0,
            base_station_cell: Some([3, 3]),
            neighbor_count: 8,
            initial_battery: 1.0,
            battery_overrides: Vec::new(),
            drain_per_reading: 1e-4,
        }
    }
}

impl NetworkConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.node_count == 0 {
            v.push("network.node_count must be positive".into());
        }
        if self.columns == 0 {
            v.push("network.columns must be positive".into());
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            v.push(format!(
                "network.spacing must be positive, got {}",
                self.spacing
            ));
        }
        if self.neighbor_count == 0 {
            v.push("network.neighbor_count must be positive".into());
        }
        if self.neighbor_count >= self.node_count {
            v.push(format!(
                "network.neighbor_count ({}) must be below node_count ({})",
                self.neighbor_count, self.node_count
            ));
        }
        if let Some([c, _]) = self.base_station_cell {
            if c >= self.columns {
                v.push(format!(
                    "network.base_station_cell column {c} is off the grid ({} columns)",
                    self.columns
                ));
            }
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.initial_battery) {
            v.push("network.initial_battery must lie in [0, 1]".into());
        }
        for o in &self.battery_overrides {
            if o.node as usize >= self.node_count || !in_unit(o.level) {
                v.push(format!(
                    "network.battery_overrides: node {} level {} invalid",
                    o.node, o.level
                ));
            }
        }
        if !(self.drain_per_reading >= 0.0 && self.drain_per_reading.is_finite()) {
            v.push("network.drain_per_reading must be nonnegative".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    pub ar_order: usize,
    pub ar_forgetting: f64,
    pub ar_init_scale: f64,
    pub ar_intercept: bool,
    /// Instants of neighbor history fed to the net (current included).
    pub nn_window: usize,
    pub hidden_layers: Vec<usize>,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            ar_order: 3,
            ar_forgetting: 0.995,
            ar_init_scale: 1e-3,
            ar_intercept: true,
            nn_window: 3,
            hidden_layers: vec![48, 24],
        }
    }
}

impl PredictorConfig {
    pub fn ar_config(&self) -> ArConfig<f64> {
        ArConfig {
            order: self.ar_order,
            forgetting: self.ar_forgetting,
            init_scale: self.ar_init_scale,
            include_intercept: self.ar_intercept,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = self.ar_config().validate() {
            v.push(format!("predictors: {e}"));
        }
        if self.nn_window == 0 {
            v.push("predictors.nn_window must be at least 1".into());
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            v.push("predictors.hidden_layers must be a nonempty list of positive sizes".into());
        }
        v
    }
}

/// Attack-free data generation for offline training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub seed: u64,
    /// Length of the generated run.
    pub steps: u64,
    /// Training pairs drawn from it.
    pub samples: usize,
    pub drift: Drift,
    /// Chance per step that a benign field-wide wave starts.
    pub wave_rate: f64,
    /// `[low, high]` °C range of wave magnitudes.
    pub wave_magnitude: [f64; 2],
    pub wave_decay: f64,
    /// Chance per node per step of a benign single-node blip. Blips teach
    /// the net not to follow one outlying neighbor; samples whose own node
    /// is blipping are left out.
    pub blip_rate: f64,
    pub blip_magnitude: [f64; 2],
    pub blip_decay: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            steps: 400,
            samples: 500,
            drift: Drift {
                amplitude: 1.5,
                period: 120.0,
                slope: 0.0,
            },
            wave_rate: 0.05,
            wave_magnitude: [1.0, 8.0],
            wave_decay: 0.5,
            blip_rate: 0.02,
            blip_magnitude: [-8.0, 8.0],
            blip_decay: 0.95,
        }
    }
}

impl TrainingConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.samples == 0 {
            v.push("training.samples must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.wave_rate) {
            v.push("training.wave_rate must lie in [0, 1]".into());
        }
        let [lo, hi] = self.wave_magnitude;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            v.push("training.wave_magnitude must be a finite [low, high] range".into());
        }
        if !(self.wave_decay > 0.0 && self.wave_decay <= 1.0) {
            v.push("training.wave_decay must lie in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.blip_rate) {
            v.push("training.blip_rate must lie in [0, 1]".into());
        }
        let [lo, hi] = self.blip_magnitude;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            v.push("training.blip_magnitude must be a finite [low, high] range".into());
        }
        if !(self.blip_decay > 0.0 && self.blip_decay <= 1.0) {
            v.push("training.blip_decay must lie in (0, 1]".into());
        }
        if !(self.drift.period >= 0.0 && self.drift.amplitude.is_finite()) {
            v.push("training.drift is invalid".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub total_steps: u64,
    /// Leading steps during which predictors run but trust is not updated.
    #[serde(default)]
    pub calibration_steps: u64,
    /// Node the run is about (reported separately), if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_node: Option<NodeId>,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub predictors: PredictorConfig,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub failure: FailureModel,
    #[serde(default)]
    pub environment: EnvironmentModel,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub lm: LmConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_table: Option<RuleTable>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "case1" => CASE1,
            "case2" => CASE2,
            _ => return None,
        };
        Some(Self::from_toml_str(text).expect("built-in scenarios parse"))
    }

    pub fn rules(&self) -> RuleTable {
        self.rule_table.unwrap_or_default()
    }

    pub fn topology(&self) -> NetTopologySpec {
        NetTopologySpec::new(
            self.network.neighbor_count * self.predictors.nn_window,
            &self.predictors.hidden_layers,
        )
    }

    /// Nodes targeted by a local attack.
    pub fn attacked_nodes(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self
            .environment
            .events
            .iter()
            .filter(|e| e.kind == HeatEventKind::LocalLamp)
            .filter_map(|e| e.target)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.name.trim().is_empty() {
            v.push("name must not be empty".into());
        }
        if let Some(t) = self.target_node {
            if t as usize >= self.network.node_count {
                v.push(format!("target_node {t} is not a node"));
            }
        }
        v.extend(self.network.violations());
        v.extend(self.predictors.violations());
        v.extend(self.thresholds.violations());
        v.extend(self.failure.violations());
        v.extend(self.environment.violations(self.network.node_count));
        v.extend(self.training.violations());
        v.extend(self.lm.violations());
        if self.predictors.violations().is_empty() && self.network.neighbor_count > 0 {
            if let Err(e) = self.topology().validate() {
                v.push(format!("predictors: {e}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}
