//! Field temperature: ambient baseline, optional slow drift, decaying heat
//! events, and Gaussian sensor noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Drift {
    /// °C peak of the sinusoidal component.
    pub amplitude: f64,
    /// Steps per sinusoid cycle; 0 disables it.
    pub period: f64,
    /// °C per step.
    pub slope: f64,
}

impl Drift {
    pub fn value(&self, step: u64) -> f64 {
        let t = step as f64;
        let wave = if self.period > 0.0 {
            self.amplitude * (std::f64::consts::TAU * t / self.period).sin()
        } else {
            0.0
        };
        wave + self.slope * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatEventKind {
    /// Heats only the target node.
    LocalLamp,
    /// Heats every node.
    GlobalWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatEvent {
    pub kind: HeatEventKind,
    /// Required for `local_lamp`, rejected otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<NodeId>,
    pub start_steps: Vec<u64>,
    pub magnitude: f64,
    /// Per-step decay factor in `(0, 1]`.
    pub decay: f64,
}

impl HeatEvent {
    pub fn global_wave(start_steps: Vec<u64>, magnitude: f64, decay: f64) -> Self {
        Self {
            kind: HeatEventKind::GlobalWave,
            target: None,
            start_steps,
            magnitude,
            decay,
        }
    }

    pub fn local_lamp(target: NodeId, start_steps: Vec<u64>, magnitude: f64, decay: f64) -> Self {
        Self {
            kind: HeatEventKind::LocalLamp,
            target: Some(target),
            start_steps,
            magnitude,
            decay,
        }
    }

    pub fn applies_to(&self, node: NodeId) -> bool {
        match self.kind {
            HeatEventKind::GlobalWave => true,
            HeatEventKind::LocalLamp => self.target == Some(node),
        }
    }

    /// Superposed offset of every activation at or before `step`.
    pub fn offset(&self, step: u64) -> f64 {
        self.start_steps
            .iter()
            .filter(|&&s| s <= step)
            .map(|&s| self.magnitude * self.decay.powi((step - s) as i32))
            .sum()
    }

    pub fn violations(&self, index: usize, node_count: usize) -> Vec<String> {
        let mut v = Vec::new();
        let at = format!("environment.events[{index}]");
        if !self.magnitude.is_finite() {
            v.push(format!("{at}.magnitude must be finite"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            v.push(format!("{at}.decay must lie in (0, 1], got {}", self.decay));
        }
        match (self.kind, self.target) {
            (HeatEventKind::LocalLamp, None) => v.push(format!("{at}: local_lamp needs a target")),
            (HeatEventKind::LocalLamp, Some(t)) if t as usize >= node_count => v.push(format!(
                "{at}.target {t} is not a node (node_count = {node_count})"
            )),
            (HeatEventKind::GlobalWave, Some(_)) => {
                v.push(format!("{at}: global_wave takes no target"))
            }
            _ => {}
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentModel {
    #[serde(default = "default_ambient")]
    pub ambient: f64,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Drift>,
    #[serde(default)]
    pub events: Vec<HeatEvent>,
}

fn default_ambient() -> f64 {
    22.0
}

fn default_noise() -> f64 {
    0.1
}

impl Default for EnvironmentModel {
    fn default() -> Self {
        Self {
            ambient: default_ambient(),
            noise_sigma: default_noise(),
            drift: None,
            events: Vec::new(),
        }
    }
}

impl EnvironmentModel {
    pub fn noiseless(&self, node: NodeId, step: u64) -> f64 {
        let drift = self.drift.map_or(0.0, |d| d.value(step));
        let events: f64 = self
            .events
            .iter()
            .filter(|e| e.applies_to(node))
            .map(|e| e.offset(step))
            .sum();
        self.ambient + drift + events
    }

    pub fn violations(&self, node_count: usize) -> Vec<String> {
        let mut v = Vec::new();
        if !self.ambient.is_finite() {
            v.push("environment.ambient must be finite".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            v.push(format!(
                "environment.noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            ));
        }
        if let Some(d) = self.drift {
            if !(d.amplitude.is_finite() && d.slope.is_finite() && d.period >= 0.0) {
                v.push("environment.drift needs finite amplitude/slope and period >= 0".into());
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            v.extend(e.violations(i, node_count));
        }
        v
    }
}

/// Noisy reading of `node` at `step`. Exactly one normal draw is taken from
/// `rng` whatever the noise level, so stream consumption is fixed.
pub fn environment_temperature<R: Rng + ?Sized>(
    env: &EnvironmentModel,
    node: NodeId,
    step: u64,
    rng: &mut R,
) -> f64 {
    let noise = Normal::new(0.0, env.noise_sigma.max(0.0))
        .expect("noise sigma is finite and nonnegative")
        .sample(rng);
    env.noiseless(node, step) + noise
}
