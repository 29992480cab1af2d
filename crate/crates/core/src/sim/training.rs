//! Offline training data: an attack-free run of the field under slow drift
//! and random benign waves, turned into (neighbor window, own reading) pairs.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::environment::{environment_temperature, EnvironmentModel, HeatEvent, HeatEventKind};
use super::network::build_network;
use super::scenario::Scenario;
use super::streams::{node_stream, scenario_stream, Purpose};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{lm_train, LmConfig, NeuralNet, TrainingReport, TrainingSet};
use crate::NodeId;

/// The scenario's environment with every scripted event removed, the
/// training drift applied, and random field-wide waves and single-node
/// blips added.
pub fn training_environment(scenario: &Scenario) -> EnvironmentModel {
    let t = &scenario.training;
    let mut rng = scenario_stream(t.seed, Purpose::Waves);
    let uniform = |rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]| lo + (hi - lo) * rng.random::<f64>();
    let mut events = Vec::new();
    for step in 0..t.steps {
        if rng.random::<f64>() < t.wave_rate {
            let magnitude = uniform(&mut rng, t.wave_magnitude);
            events.push(HeatEvent::global_wave(vec![step], magnitude, t.wave_decay));
        }
        for node in 0..scenario.network.node_count as NodeId {
            if rng.random::<f64>() < t.blip_rate {
                let magnitude = uniform(&mut rng, t.blip_magnitude);
                events.push(HeatEvent::local_lamp(
                    node,
                    vec![step],
                    magnitude,
                    t.blip_decay,
                ));
            }
        }
    }
    EnvironmentModel {
        drift: Some(t.drift),
        events,
        ..scenario.environment.clone()
    }
}

/// Offset from single-node events only.
fn local_offset(env: &EnvironmentModel, node: NodeId, step: u64) -> f64 {
    env.events
        .iter()
        .filter(|e| e.kind == HeatEventKind::LocalLamp && e.applies_to(node))
        .map(|e| e.offset(step))
        .sum()
}

/// Noisy readings `[step][node]`, one noise substream per node.
pub fn simulate_readings(
    env: &EnvironmentModel,
    node_count: usize,
    steps: u64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rngs: Vec<_> = (0..node_count)
        .map(|n| node_stream(seed, n as NodeId, Purpose::Noise))
        .collect();
    (0..steps)
        .map(|step| {
            rngs.iter_mut()
                .enumerate()
                .map(|(n, rng)| environment_temperature(env, n as NodeId, step, rng))
                .collect()
        })
        .collect()
}

/// Flattened neighbor window (neighbor-major, newest first) for `step`.
pub fn window_features(
    readings: &[Vec<f64>],
    neighbors: &[NodeId],
    step: usize,
    window: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(neighbors.len() * window);
    for &nb in neighbors {
        for lag in 0..window {
            out.push(readings[step - lag][nb as usize]);
        }
    }
    out
}

pub fn generate_training_set(scenario: &Scenario) -> Result<TrainingSet<f64>> {
    scenario.validate()?;
    let t = &scenario.training;
    let window = scenario.predictors.nn_window;
    let network = build_network(&scenario.network)?;
    let env = training_environment(scenario);
    let readings = simulate_readings(&env, network.nodes.len(), t.steps, t.seed);

    // Offsets below this are indistinguishable from sensor noise.
    let quiet = scenario.environment.noise_sigma.max(1e-3);
    let blipping =
        |node: usize, step: usize| local_offset(&env, node as NodeId, step as u64).abs() > quiet;
    let first = window - 1;
    let n_nodes = network.nodes.len();
    let candidates: Vec<(usize, usize)> = (first..readings.len())
        .flat_map(|step| (0..n_nodes).map(move |node| (step, node)))
        .filter(|&(step, node)| !blipping(node, step))
        .collect();
    let available = candidates.len();
    if available == 0 {
        return Err(Error::Config(format!(
            "training.steps = {} leaves no complete window of {window}",
            t.steps
        )));
    }
    let mut picks: Vec<usize> = if t.samples >= available {
        (0..available).collect()
    } else {
        let mut rng = scenario_stream(t.seed, Purpose::Sampling);
        index::sample(&mut rng, available, t.samples).into_vec()
    };
    picks.sort_unstable();

    let width = scenario.network.neighbor_count * window;
    let mut inputs = Vec::with_capacity(picks.len() * width);
    let mut targets = Vec::with_capacity(picks.len());
    for p in picks {
        let (step, node) = candidates[p];
        inputs.extend(window_features(
            &readings,
            &network.adjacency[node],
            step,
            window,
        ));
        targets.push(readings[step][node]);
    }
    let n = targets.len();
    let inputs =
        Matrix::from_row_major(n, width, inputs).expect("row-major buffer has n * width values");
    TrainingSet::new(inputs, targets)
}

/// Generates the training set and fits the scenario's topology to it.
pub fn train_predictor(
    scenario: &Scenario,
    lm: &LmConfig,
) -> Result<(NeuralNet<f64>, TrainingReport)> {
    let data = generate_training_set(scenario)?;
    log::info!(
        "training {:?} on {} samples",
        scenario.topology().layer_sizes,
        data.len()
    );
    lm_train(&scenario.topology(), &data, lm)
}
