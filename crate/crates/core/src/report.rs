//! Run output: per-node time series, the event log, and a summary derived
//! from the log.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decision::{Action, TrustCategory};
use crate::destruct::{DestructionOutcome, DestructionStatus};
use crate::error::Result;
use crate::node::NodeStatus;
use crate::NodeId;

pub const CSV_HEADER: &str = "step,reading,pred_ar,pred_nn,err_ar,err_nn,b_ar,b_nn,status";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// What the base station saw of one node at one step. Absent values (no
/// reading, predictor warming up) are empty CSV fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub step: u64,
    pub node: NodeId,
    pub reading: Option<f64>,
    pub pred_ar: Option<f64>,
    pub pred_nn: Option<f64>,
    /// Signed.
    pub err_ar: Option<f64>,
    /// Absolute.
    pub err_nn: Option<f64>,
    pub b_ar: u32,
    pub b_nn: u32,
    pub status: NodeStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Ar,
    Nn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    TrustIncrement {
        step: u64,
        node: NodeId,
        channel: Channel,
        value: u32,
    },
    TrustReset {
        step: u64,
        node: NodeId,
    },
    /// Emitted when a trust indicator moved or the table asked for destruction.
    Decision {
        step: u64,
        node: NodeId,
        ar: TrustCategory,
        nn: TrustCategory,
        action: Action,
    },
    StatusChange {
        step: u64,
        node: NodeId,
        from: NodeStatus,
        to: NodeStatus,
    },
    Destruction {
        step: u64,
        node: NodeId,
        outcome: DestructionOutcome,
    },
    Fault {
        step: u64,
        node: NodeId,
        message: String,
    },
}

impl Event {
    pub fn node(&self) -> NodeId {
        match self {
            Event::TrustIncrement { node, .. }
            | Event::TrustReset { node, .. }
            | Event::Decision { node, .. }
            | Event::StatusChange { node, .. }
            | Event::Destruction { node, .. }
            | Event::Fault { node, .. } => *node,
        }
    }

    pub fn step(&self) -> u64 {
        match self {
            Event::TrustIncrement { step, .. }
            | Event::TrustReset { step, .. }
            | Event::Decision { step, .. }
            | Event::StatusChange { step, .. }
            | Event::Destruction { step, .. }
            | Event::Fault { step, .. } => *step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestructionRecord {
    pub node: NodeId,
    pub step: u64,
    pub status: DestructionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub steps: u64,
    /// Every node a destruction was initiated on, whatever the outcome.
    pub expelled: Vec<DestructionRecord>,
    pub destroyed: Vec<NodeId>,
    /// Expelled nodes that were not under attack.
    pub false_expulsions: usize,
    /// First step the rule table fired for each attacked node.
    pub detection_steps: BTreeMap<NodeId, Option<u64>>,
    pub faults: usize,
}

impl Summary {
    pub fn from_events(
        scenario: &str,
        seed: u64,
        steps: u64,
        events: &[Event],
        attacked: &[NodeId],
    ) -> Self {
        let expelled: Vec<DestructionRecord> = events
            .iter()
            .filter_map(|e| match e {
                Event::Destruction {
                    step,
                    node,
                    outcome,
                } => Some(DestructionRecord {
                    node: *node,
                    step: *step,
                    status: outcome.status,
                }),
                _ => None,
            })
            .collect();
        let destroyed = expelled
            .iter()
            .filter(|r| r.status == DestructionStatus::Destroyed)
            .map(|r| r.node)
            .collect();
        let false_expulsions = expelled
            .iter()
            .filter(|r| !attacked.contains(&r.node))
            .count();
        let detection_steps = attacked
            .iter()
            .map(|&a| {
                let first = events.iter().find_map(|e| match e {
                    Event::Decision {
                        step,
                        node,
                        action: Action::SelfDestruct,
                        ..
                    } if *node == a => Some(*step),
                    _ => None,
                });
                (a, first)
            })
            .collect();
        let faults = events
            .iter()
            .filter(|e| matches!(e, Event::Fault { .. }))
            .count();
        Self {
            scenario: scenario.to_owned(),
            seed,
            steps,
            expelled,
            destroyed,
            false_expulsions,
            detection_steps,
            faults,
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {} (seed {}, {} steps)",
            self.scenario, self.seed, self.steps
        )?;
        writeln!(f, "nodes destroyed: {}", self.destroyed.len())?;
        for r in &self.expelled {
            writeln!(f, "  node {} at step {}: {:?}", r.node, r.step, r.status)?;
        }
        writeln!(f, "false expulsions: {}", self.false_expulsions)?;
        for (node, step) in &self.detection_steps {
            match step {
                Some(s) => writeln!(f, "attacked node {node} detected at step {s}")?,
                None => writeln!(f, "attacked node {node} not detected")?,
            }
        }
        if self.faults > 0 {
            writeln!(f, "faults: {}", self.faults)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub node_count: usize,
    /// Ordered by `(step, node)`.
    pub rows: Vec<TimeSeriesRow>,
    pub events: Vec<Event>,
    pub summary: Summary,
}

fn field(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        // `Display` for f64 prints the shortest string that parses back exactly.
        write!(out, "{v}").expect("writing to a String");
    }
}

impl RunReport {
    pub fn rows_for(&self, node: NodeId) -> impl Iterator<Item = &TimeSeriesRow> + '_ {
        self.rows.iter().filter(move |r| r.node == node)
    }

    pub fn events_for(&self, node: NodeId) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.node() == node)
    }

    pub fn node_csv(&self, node: NodeId) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.rows_for(node) {
            write!(out, "{}", r.step).expect("writing to a String");
            field(&mut out, r.reading);
            field(&mut out, r.pred_ar);
            field(&mut out, r.pred_nn);
            field(&mut out, r.err_ar);
            field(&mut out, r.err_nn);
            writeln!(out, ",{},{},{}", r.b_ar, r.b_nn, r.status).expect("writing to a String");
        }
        out
    }

    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn csv_file_name(node: NodeId) -> String {
        format!("node_{node:02}.csv")
    }

    /// Writes one CSV per node, the event log and the summary; returns the
    /// paths written.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for node in 0..self.node_count as NodeId {
            let path = dir.join(Self::csv_file_name(node));
            fs::write(&path, self.node_csv(node))?;
            written.push(path);
        }
        let path = dir.join(EVENTS_FILE);
        fs::write(&path, self.events_jsonl())?;
        written.push(path);
        let path = dir.join(SUMMARY_FILE);
        let mut json = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        json.push('\n');
        fs::write(&path, json)?;
        written.push(path);
        Ok(written)
    }
}

/// One parsed CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub step: u64,
    /// `reading, pred_ar, pred_nn, err_ar, err_nn`.
    pub values: [Option<f64>; 5],
    pub b_ar: u32,
    pub b_nn: u32,
    pub status: String,
}

/// Parses one CSV data row back into its fields (empty → `None`).
pub fn parse_csv_row(line: &str) -> Option<CsvRow> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 9 {
        return None;
    }
    let opt = |s: &str| -> Option<Option<f64>> {
        if s.is_empty() {
            Some(None)
        } else {
            s.parse().ok().map(Some)
        }
    };
    Some(CsvRow {
        step: cols[0].parse().ok()?,
        values: [
            opt(cols[1])?,
            opt(cols[2])?,
            opt(cols[3])?,
            opt(cols[4])?,
            opt(cols[5])?,
        ],
        b_ar: cols[6].parse().ok()?,
        b_nn: cols[7].parse().ok()?,
        status: cols[8].to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(reading: Option<f64>) -> TimeSeriesRow {
        TimeSeriesRow {
            step: 3,
            node: 1,
            reading,
            pred_ar: None,
            pred_nn: Some(21.5),
            err_ar: None,
            err_nn: Some(0.1 + 0.2),
            b_ar: 0,
            b_nn: 2,
            status: NodeStatus::Suspicious,
        }
    }

    fn report(rows: Vec<TimeSeriesRow>) -> RunReport {
        RunReport {
            node_count: 2,
            rows,
            events: Vec::new(),
            summary: Summary::from_events("t", 0, 1, &[], &[]),
        }
    }

    #[test]
    fn csv_layout() {
        let csv = report(vec![row(Some(22.25)), row(None)]).node_csv(1);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "3,22.25,,21.5,,0.30000000000000004,0,2,suspicious"
        );
        assert_eq!(lines[2], "3,,,21.5,,0.30000000000000004,0,2,suspicious");
    }

    proptest! {
        #[test]
        fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let csv = report(vec![row(Some(x))]).node_csv(1);
            let line = csv.lines().nth(1).unwrap();
            let vals = parse_csv_row(line).unwrap().values;
            prop_assert_eq!(vals[0].unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn events_are_one_json_object_per_line() {
        let mut r = report(Vec::new());
        r.events = vec![
            Event::TrustIncrement {
                step: 15,
                node: 5,
                channel: Channel::Ar,
                value: 1,
            },
            Event::Decision {
                step: 27,
                node: 5,
                ar: TrustCategory::AtAlpha,
                nn: TrustCategory::AtAlpha,
                action: Action::SelfDestruct,
            },
        ];
        let text = r.events_jsonl();
        let parsed: Vec<Event> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(parsed, r.events);
        assert!(text.starts_with("{\"event\":\"trust_increment\""));
    }

    #[test]
    fn summary_counts_false_expulsions() {
        let outcome = DestructionOutcome {
            status: DestructionStatus::Destroyed,
            actions_completed: Vec::new(),
            reason: None,
        };
        let events = vec![
            Event::Destruction {
                step: 27,
                node: 5,
                outcome: outcome.clone(),
            },
            Event::Destruction {
                step: 30,
                node: 2,
                outcome,
            },
        ];
        let s = Summary::from_events("x", 1, 40, &events, &[5, 7]);
        assert_eq!(s.destroyed, vec![5, 2]);
        assert_eq!(s.false_expulsions, 1);
        assert_eq!(s.detection_steps[&7], None);
    }
}
