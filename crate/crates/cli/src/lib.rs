//! Scenario-file parsing and structured-record rendering for the
//! `concert` binary.
//!
//! Scenario files are line-oriented `key = value` text in four sections:
//!
//! ```text
//! # comments and blank lines are ignored
//! [sim]
//! seed = 42
//! nodes = 5
//! min_delay = 1
//! max_delay = 4
//! rounds = 1
//! edge = 1-2          # repeatable; adjacency is complete when no edges given
//! fail = 3@98304      # node@time, repeatable
//! time_limit = 500000 # optional
//!
//! [tree]
//! policy = bfs        # bfs | star | line | random
//!
//! [bug]
//! kind = disagreement # none | disagreement | invalid-decision | duplicate-id
//!                     # | tree-cycle | tree-forest | tree-omit-node
//! node = 3            # disagreement, duplicate-id, tree-omit-node
//! value = text:Y      # disagreement, invalid-decision
//! id = 2              # duplicate-id: the identity being claimed
//!
//! [proposals]
//! decision = text:X
//! default = text:X, text:Z  # every node, unless overridden
//! node.2 = hex:59           # per-node override
//! ```
//!
//! Values are `text:<bytes>` or `hex:<hex bytes>`; list values are
//! comma-separated (so `text:` payloads cannot contain commas). Consensus
//! rounds fire at `64 * max_delay * (nodes + 2) * (round + 1)` simulated
//! time units, which is the reference point for placing `fail` times
//! before, between or inside rounds.

use std::collections::BTreeMap;
use std::fmt;

use concert_core::simnet::SimConfig;
use concert_core::tree::Adjacency;
use concert_core::types::NodeId;
use concert_core::workload::{Bug, Scenario};
use concert_core::{Report, TreePolicy};

/// A parse failure with the 1-based line it occurred on.
#[derive(Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct RawScenario {
    seed: Option<u64>,
    nodes: Option<u64>,
    min_delay: Option<u64>,
    max_delay: Option<u64>,
    rounds: Option<u64>,
    time_limit: Option<u64>,
    edges: Vec<(NodeId, NodeId)>,
    faults: Vec<(u64, NodeId)>,
    policy: Option<TreePolicy>,
    bug_kind: Option<String>,
    bug_node: Option<u64>,
    bug_value: Option<Vec<u8>>,
    bug_id: Option<u64>,
    decision: Option<Vec<u8>>,
    default_proposals: Option<Vec<Vec<u8>>>,
    node_proposals: BTreeMap<u64, Vec<Vec<u8>>>,
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, ParseError> {
    value
        .parse()
        .map_err(|_| err(line, format!("{key} expects an unsigned integer, got {value:?}")))
}

/// `text:...` or `hex:...`.
fn parse_value(line: usize, value: &str) -> Result<Vec<u8>, ParseError> {
    if let Some(text) = value.strip_prefix("text:") {
        return Ok(text.as_bytes().to_vec());
    }
    if let Some(hex) = value.strip_prefix("hex:") {
        let hex = hex.trim();
        if hex.len() % 2 != 0 {
            return Err(err(line, "hex value needs an even number of digits"));
        }
        return (0..hex.len())
            .step_by(2)
            .map(|i| {
                u8::from_str_radix(&hex[i..i + 2], 16)
                    .map_err(|_| err(line, format!("bad hex byte {:?}", &hex[i..i + 2])))
            })
            .collect();
    }
    Err(err(
        line,
        format!("value must start with text: or hex:, got {value:?}"),
    ))
}

fn parse_value_list(line: usize, value: &str) -> Result<Vec<Vec<u8>>, ParseError> {
    value
        .split(',')
        .map(|part| parse_value(line, part.trim()))
        .collect()
}

/// Parses scenario-file text. `name` labels the resulting scenario
/// (usually the file stem).
pub fn parse_scenario(text: &str, name: &str) -> Result<Scenario, ParseError> {
    let mut raw = RawScenario::default();
    let mut section = String::new();

    for (index, full_line) in text.lines().enumerate() {
        let line = index + 1;
        let content = full_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(section_name) = rest.strip_suffix(']') else {
                return Err(err(line, "unterminated section header"));
            };
            match section_name {
                "sim" | "tree" | "bug" | "proposals" => section = section_name.to_string(),
                other => return Err(err(line, format!("unknown section [{other}]"))),
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(line, format!("expected key = value, got {content:?}")));
        };
        let key = key.trim();
        let value = value.trim();
        match (section.as_str(), key) {
            ("sim", "seed") => raw.seed = Some(parse_u64(line, key, value)?),
            ("sim", "nodes") => raw.nodes = Some(parse_u64(line, key, value)?),
            ("sim", "min_delay") => raw.min_delay = Some(parse_u64(line, key, value)?),
            ("sim", "max_delay") => raw.max_delay = Some(parse_u64(line, key, value)?),
            ("sim", "rounds") => raw.rounds = Some(parse_u64(line, key, value)?),
            ("sim", "time_limit") => raw.time_limit = Some(parse_u64(line, key, value)?),
            ("sim", "edge") => {
                let Some((a, b)) = value.split_once('-') else {
                    return Err(err(line, format!("edge expects a-b, got {value:?}")));
                };
                raw.edges.push((
                    NodeId::new(parse_u64(line, "edge endpoint", a.trim())?),
                    NodeId::new(parse_u64(line, "edge endpoint", b.trim())?),
                ));
            }
            ("sim", "fail") => {
                let Some((node, time)) = value.split_once('@') else {
                    return Err(err(line, format!("fail expects node@time, got {value:?}")));
                };
                raw.faults.push((
                    parse_u64(line, "fail time", time.trim())?,
                    NodeId::new(parse_u64(line, "fail node", node.trim())?),
                ));
            }
            ("tree", "policy") => {
                raw.policy = Some(value.parse().map_err(|e: String| err(line, e))?)
            }
            ("bug", "kind") => raw.bug_kind = Some(value.to_string()),
            ("bug", "node") => raw.bug_node = Some(parse_u64(line, key, value)?),
            ("bug", "value") => raw.bug_value = Some(parse_value(line, value)?),
            ("bug", "id") => raw.bug_id = Some(parse_u64(line, key, value)?),
            ("proposals", "decision") => raw.decision = Some(parse_value(line, value)?),
            ("proposals", "default") => {
                raw.default_proposals = Some(parse_value_list(line, value)?)
            }
            ("proposals", node_key) if node_key.starts_with("node.") => {
                let id = parse_u64(line, "node.<id>", &node_key["node.".len()..])?;
                raw.node_proposals
                    .insert(id, parse_value_list(line, value)?);
            }
            ("", _) => return Err(err(line, "keys must appear inside a [section]")),
            (section, key) => {
                return Err(err(line, format!("unknown key {key:?} in section [{section}]")))
            }
        }
    }

    assemble(raw, name).map_err(|message| ParseError { line: 0, message })
}

fn assemble(raw: RawScenario, name: &str) -> Result<Scenario, String> {
    let n = raw.nodes.ok_or("missing nodes in [sim]")?;
    let mut sim = SimConfig::new(raw.seed.unwrap_or(0), n);
    if let Some(min) = raw.min_delay {
        sim.min_delay = min;
    }
    if let Some(max) = raw.max_delay {
        sim.max_delay = max;
    }
    sim.time_limit = raw.time_limit;
    sim.fault_schedule = raw.faults;
    if !raw.edges.is_empty() {
        sim.adjacency = Adjacency::from_edges(raw.edges);
    }

    let node = |field: Option<u64>, what: &str| {
        field
            .map(NodeId::new)
            .ok_or(format!("[bug] {what} is required for this kind"))
    };
    let value = |field: Option<Vec<u8>>, what: &str| {
        field.ok_or(format!("[bug] {what} is required for this kind"))
    };
    let bug = match raw.bug_kind.as_deref().unwrap_or("none") {
        "none" => Bug::None,
        "disagreement" => Bug::Disagreement {
            node: node(raw.bug_node, "node")?,
            value: value(raw.bug_value, "value")?,
        },
        "invalid-decision" => Bug::InvalidDecision {
            value: value(raw.bug_value, "value")?,
        },
        "duplicate-id" => Bug::DuplicateId {
            node: node(raw.bug_node, "node")?,
            id: node(raw.bug_id, "id")?,
        },
        "tree-cycle" => Bug::TreeCycle,
        "tree-forest" => Bug::TreeForest,
        "tree-omit-node" => Bug::TreeOmitNode {
            node: node(raw.bug_node, "node")?,
        },
        other => return Err(format!("unknown bug kind {other:?}")),
    };

    let rounds = raw
        .rounds
        .unwrap_or(if bug.is_tree_bug() { 0 } else { 1 });
    let decision = match raw.decision {
        Some(d) => d,
        None if rounds == 0 => vec![],
        None => return Err("missing decision in [proposals] (required when rounds > 0)".into()),
    };

    let mut proposals: BTreeMap<NodeId, Vec<Vec<u8>>> = BTreeMap::new();
    if let Some(default) = &raw.default_proposals {
        for id in sim.node_ids() {
            proposals.insert(id, default.clone());
        }
    }
    for (id, values) in raw.node_proposals {
        if id == 0 || id > n {
            return Err(format!("[proposals] node.{id} is out of range"));
        }
        proposals.insert(NodeId::new(id), values);
    }

    Ok(Scenario {
        name: name.to_string(),
        sim,
        tree_policy: raw.policy.unwrap_or_default(),
        bug,
        proposals,
        decision,
        rounds,
    })
}

/// Line-delimited structured records for one report, one JSON object per
/// line: scenario header, truth, per-round outcomes, classifications,
/// signals, the meter and the final verdict.
pub fn report_records(report: &Report) -> Vec<String> {
    let mut lines = vec![
        serde_json::json!({
            "record": "scenario",
            "name": report.scenario,
            "bug": report.bug,
            "nodes": report.n,
            "rounds": report.rounds_scheduled,
            "quiescent": report.quiescent,
            "uniqueness_mode": report.uniqueness_mode,
            "uniqueness_miss_bound": report.uniqueness_miss_bound,
        })
        .to_string(),
        serde_json::json!({
            "record": "truth",
            "structure": report.structure_holds,
            "uniqueness": report.uniqueness_holds,
            "unrestricted_agreement": report.unrestricted_agreement,
            "unrestricted_validity": report.unrestricted_validity,
        })
        .to_string(),
    ];
    for round in &report.rounds {
        lines.push(
            serde_json::json!({ "record": "round", "outcome": round }).to_string(),
        );
    }
    for (property, classification) in &report.classifications {
        lines.push(
            serde_json::json!({
                "record": "classification",
                "property": property,
                "outcome": classification,
            })
            .to_string(),
        );
    }
    for signal in &report.signals {
        lines.push(serde_json::json!({ "record": "signal", "signal": signal }).to_string());
    }
    lines.push(serde_json::json!({ "record": "meter", "meter": report.meter }).to_string());
    lines.push(
        serde_json::json!({ "record": "verdict", "falsified": report.falsified }).to_string(),
    );
    lines
}
