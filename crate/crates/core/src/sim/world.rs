//! The base-station loop: sample every node, then per monitored node run
//! both predictors, update trust, consult the rule table, and finally apply
//! any self-destructions serially.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::environment::environment_temperature;
use super::network::build_network;
use super::scenario::Scenario;
use super::streams::{node_stream, Purpose};
use crate::ar::ArEstimator;
use crate::decision::{Action, RuleTable, TrustChange, TrustState};
use crate::destruct::{initiate_self_destruction, Registry};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{nn_error, NeighborPredictor, NeighborWindow, NeuralNet};
use crate::node::{NodeState, NodeStatus};
use crate::report::{Channel, Event, RunReport, Summary, TimeSeriesRow};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Run the per-node predictor phase on the rayon pool.
    pub parallel: bool,
}

#[derive(Debug, Clone)]
struct Pipeline {
    ar: ArEstimator<f64>,
    nn: NeighborPredictor<f64>,
    trust: TrustState,
}

#[derive(Debug, Default)]
struct NodeOutcome {
    pred_ar: Option<f64>,
    err_ar: Option<f64>,
    pred_nn: Option<f64>,
    err_nn: Option<f64>,
    change: Option<TrustChange>,
    action: Option<Action>,
    faults: Vec<String>,
}

/// Read-only view shared by the per-node phase.
struct Shared<'a> {
    scenario: &'a Scenario,
    rules: &'a RuleTable,
    held: &'a [VecDeque<f64>],
    received: &'a [Option<f64>],
    monitored: &'a [bool],
    step: u64,
}

impl Shared<'_> {
    fn window(&self, neighbors: &[NodeId]) -> Option<NeighborWindow<f64>> {
        let w = self.scenario.predictors.nn_window;
        let mut values = Vec::with_capacity(neighbors.len() * w);
        for &nb in neighbors {
            let h = &self.held[nb as usize];
            if h.len() < w {
                return None;
            }
            values.extend(h.iter().take(w));
        }
        let m = Matrix::from_row_major(neighbors.len(), w, values)?;
        NeighborWindow::new(neighbors.to_vec(), m).ok()
    }

    fn run(&self, i: usize, p: &mut Pipeline) -> NodeOutcome {
        let mut out = NodeOutcome::default();
        let (true, Some(x)) = (self.monitored[i], self.received[i]) else {
            return out;
        };
        match p.ar.step(x) {
            Ok(step) => {
                if let Some(r) = step.ready() {
                    if r.predicted.is_finite() {
                        out.pred_ar = Some(r.predicted);
                        out.err_ar = Some(r.error);
                    } else {
                        out.faults.push("AR prediction is not finite".into());
                    }
                }
            }
            Err(e) => out.faults.push(format!("AR: {e}")),
        }
        if let Some(window) = self.window(&p.nn.neighbor_ids) {
            match p
                .nn
                .predict(&window)
                .and_then(|y| nn_error(x, y).map(|e| (y, e)))
            {
                Ok((y, e)) => {
                    out.pred_nn = Some(y);
                    out.err_nn = Some(e);
                }
                Err(e) => out.faults.push(format!("NN: {e}")),
            }
        }
        if self.step >= self.scenario.calibration_steps {
            let change = p
                .trust
                .update(out.err_ar, out.err_nn, &self.scenario.thresholds);
            let (ar, nn) = p.trust.categories(&self.scenario.thresholds);
            out.action = Some(self.rules.evaluate(ar, nn));
            out.change = Some(change);
        }
        out
    }
}

pub struct World {
    scenario: Scenario,
    rules: RuleTable,
    options: RunOptions,
    nodes: Vec<NodeState>,
    adjacency: Vec<Vec<NodeId>>,
    registry: Registry,
    pipelines: Vec<Pipeline>,
    /// Base-station record per node, newest first; a silent node's last
    /// value is repeated.
    held: Vec<VecDeque<f64>>,
    noise: Vec<ChaCha8Rng>,
    destruct: Vec<ChaCha8Rng>,
    step: u64,
}

impl World {
    pub fn new(scenario: &Scenario, net: &NeuralNet<f64>, options: RunOptions) -> Result<Self> {
        scenario.validate()?;
        let want = scenario.topology();
        if net.spec().layer_sizes != want.layer_sizes {
            return Err(Error::Topology(format!(
                "net has layers {:?}, scenario needs {:?}",
                net.spec().layer_sizes,
                want.layer_sizes
            )));
        }
        let network = build_network(&scenario.network)?;
        let window = scenario.predictors.nn_window;
        let pipelines = network
            .nodes
            .iter()
            .map(|n| {
                Ok(Pipeline {
                    ar: ArEstimator::new(scenario.predictors.ar_config())?,
                    nn: NeighborPredictor::new(
                        n.id,
                        network.adjacency[n.id as usize].clone(),
                        window,
                        net.clone(),
                    )?,
                    trust: TrustState::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ids = network.nodes.iter().map(|n| n.id);
        Ok(Self {
            noise: ids
                .clone()
                .map(|id| node_stream(scenario.seed, id, Purpose::Noise))
                .collect(),
            destruct: ids
                .map(|id| node_stream(scenario.seed, id, Purpose::Destruction))
                .collect(),
            held: vec![VecDeque::with_capacity(window + 1); network.nodes.len()],
            rules: scenario.rules(),
            scenario: scenario.clone(),
            options,
            nodes: network.nodes,
            adjacency: network.adjacency,
            registry: network.registry,
            pipelines,
            step: 0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn adjacency(&self) -> &[Vec<NodeId>] {
        &self.adjacency
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn trust(&self, node: NodeId) -> Option<&TrustState> {
        self.pipelines.get(node as usize).map(|p| &p.trust)
    }

    /// Index of the next step to run.
    pub fn current_step(&self) -> u64 {
        self.step
    }

    /// Advances one step; returns its rows (ascending node id) and events.
    pub fn step(&mut self) -> (Vec<TimeSeriesRow>, Vec<Event>) {
        let t = self.step;
        let env = &self.scenario.environment;
        let drain = self.scenario.network.drain_per_reading;

        let mut received = Vec::with_capacity(self.nodes.len());
        for (node, rng) in self.nodes.iter_mut().zip(&mut self.noise) {
            let value = environment_temperature(env, node.id, t, rng);
            let reading = if node.can_transmit() {
                node.drain(drain);
                Some(value)
            } else {
                None
            };
            received.push(reading.filter(|_| self.registry.accepts(node.id)));
        }

        let window = self.scenario.predictors.nn_window;
        for (h, r) in self.held.iter_mut().zip(&received) {
            let v = r.or_else(|| h.front().copied());
            if let Some(v) = v {
                h.push_front(v);
                h.truncate(window);
            }
        }

        let monitored: Vec<bool> = self.nodes.iter().map(|n| n.status.is_monitored()).collect();
        let shared = Shared {
            scenario: &self.scenario,
            rules: &self.rules,
            held: &self.held,
            received: &received,
            monitored: &monitored,
            step: t,
        };
        let outcomes: Vec<NodeOutcome> = if self.options.parallel {
            self.pipelines
                .par_iter_mut()
                .enumerate()
                .map(|(i, p)| shared.run(i, p))
                .collect()
        } else {
            self.pipelines
                .iter_mut()
                .enumerate()
                .map(|(i, p)| shared.run(i, p))
                .collect()
        };

        let mut events = Vec::new();
        for (i, out) in outcomes.iter().enumerate() {
            let node = &mut self.nodes[i];
            let id = node.id;
            let trust = self.pipelines[i].trust;
            for message in &out.faults {
                log::warn!("step {t} node {id}: {message}");
                events.push(Event::Fault {
                    step: t,
                    node: id,
                    message: message.clone(),
                });
            }
            if let Some(change) = out.change {
                for (inc, channel, value) in [
                    (change.ar_incremented, Channel::Ar, trust.b_ar),
                    (change.nn_incremented, Channel::Nn, trust.b_nn),
                ] {
                    if inc {
                        events.push(Event::TrustIncrement {
                            step: t,
                            node: id,
                            channel,
                            value,
                        });
                    }
                }
                if change.reset {
                    events.push(Event::TrustReset { step: t, node: id });
                }
                let action = out.action.unwrap_or(Action::DoNothing);
                if change.ar_incremented || change.nn_incremented || action == Action::SelfDestruct
                {
                    let (ar, nn) = trust.categories(&self.scenario.thresholds);
                    events.push(Event::Decision {
                        step: t,
                        node: id,
                        ar,
                        nn,
                        action,
                    });
                }
                let wanted = match (node.status, trust.is_clean()) {
                    (NodeStatus::Alive, false) => Some(NodeStatus::Suspicious),
                    (NodeStatus::Suspicious, true) => Some(NodeStatus::Alive),
                    _ => None,
                };
                if let Some(to) = wanted {
                    events.push(Event::StatusChange {
                        step: t,
                        node: id,
                        from: node.status,
                        to,
                    });
                    node.status = to;
                }
            }
        }

        // Destruction mutates the registry, so it runs after every node's
        // computation and in id order.
        for (i, out) in outcomes.iter().enumerate() {
            if out.action != Some(Action::SelfDestruct) {
                continue;
            }
            let node = &mut self.nodes[i];
            let from = node.status;
            match initiate_self_destruction(
                node,
                &mut self.registry,
                &self.scenario.failure,
                &mut self.destruct[i],
            ) {
                Ok(outcome) => {
                    log::info!("step {t}: node {} -> {:?}", node.id, outcome.status);
                    events.push(Event::Destruction {
                        step: t,
                        node: node.id,
                        outcome,
                    });
                    events.push(Event::StatusChange {
                        step: t,
                        node: node.id,
                        from,
                        to: node.status,
                    });
                }
                Err(e) => events.push(Event::Fault {
                    step: t,
                    node: node.id,
                    message: e.to_string(),
                }),
            }
        }

        let rows = outcomes
            .into_iter()
            .enumerate()
            .map(|(i, out)| {
                let trust = self.pipelines[i].trust;
                TimeSeriesRow {
                    step: t,
                    node: self.nodes[i].id,
                    reading: received[i],
                    pred_ar: out.pred_ar,
                    pred_nn: out.pred_nn,
                    err_ar: out.err_ar,
                    err_nn: out.err_nn,
                    b_ar: trust.b_ar,
                    b_nn: trust.b_nn,
                    status: self.nodes[i].status,
                }
            })
            .collect();
        self.step += 1;
        (rows, events)
    }
}

pub fn run_simulation(
    scenario: &Scenario,
    net: &NeuralNet<f64>,
    options: RunOptions,
) -> Result<RunReport> {
    let mut world = World::new(scenario, net, options)?;
    let mut rows = Vec::new();
    let mut events = Vec::new();
    for _ in 0..scenario.total_steps {
        let (r, e) = world.step();
        rows.extend(r);
        events.extend(e);
    }
    let summary = Summary::from_events(
        &scenario.name,
        scenario.seed,
        scenario.total_steps,
        &events,
        &scenario.attacked_nodes(),
    );
    Ok(RunReport {
        node_count: world.nodes().len(),
        rows,
        events,
        summary,
    })
}
