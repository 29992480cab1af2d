//! Node placement and spatial adjacency. Adjacency only selects NN inputs;
//! every node talks to the base station directly.

use super::scenario::NetworkConfig;
use crate::destruct::Registry;
use crate::error::{Error, Result};
use crate::node::NodeState;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<NodeState>,
    /// `adjacency[i]`: node `i`'s neighbors, nearest first.
    pub adjacency: Vec<Vec<NodeId>>,
    pub registry: Registry,
}

/// Grid positions, row-major, skipping the base-station cell.
pub fn grid_positions(cfg: &NetworkConfig) -> Vec<(f64, f64)> {
    let columns = cfg.columns.max(1);
    (0..)
        .map(|cell: usize| [cell % columns, cell / columns])
        .filter(|&c| Some(c) != cfg.base_station_cell)
        .take(cfg.node_count)
        .map(|[c, r]| (c as f64 * cfg.spacing, r as f64 * cfg.spacing))
        .collect()
}

/// The `m` nearest other nodes by Euclidean distance, ties to the lower id.
pub fn nearest_neighbors(positions: &[(f64, f64)], node: usize, m: usize) -> Vec<NodeId> {
    let (x0, y0) = positions[node];
    let mut others: Vec<(f64, usize)> = positions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != node)
        .map(|(j, &(x, y))| ((x - x0).powi(2) + (y - y0).powi(2), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others
        .into_iter()
        .take(m)
        .map(|(_, j)| j as NodeId)
        .collect()
}

pub fn build_network(cfg: &NetworkConfig) -> Result<Network> {
    if cfg.node_count < cfg.neighbor_count + 1 {
        return Err(Error::Config(format!(
            "{} nodes cannot each have {} neighbors",
            cfg.node_count, cfg.neighbor_count
        )));
    }
    if let Some(v) = cfg.violations().into_iter().next() {
        return Err(Error::Config(v));
    }
    let positions = grid_positions(cfg);
    let nodes: Vec<NodeState> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let id = i as NodeId;
            let battery = cfg
                .battery_overrides
                .iter()
                .rev()
                .find(|o| o.node == id)
                .map_or(cfg.initial_battery, |o| o.level);
            NodeState::new(id, p, battery)
        })
        .collect();
    let adjacency = (0..nodes.len())
        .map(|i| nearest_neighbors(&positions, i, cfg.neighbor_count))
        .collect();
    Ok(Network {
        registry: Registry::new(nodes.iter().map(|n| n.id)),
        nodes,
        adjacency,
    })
}
