//! Run traces and the byte meter.
//!
//! A trace is the complete ordered record of a simulation: sends,
//! deliveries, drops, inputs, failures, notices, error signals and round
//! completions. It renders as stable line-oriented text (one record per
//! line), which is what the determinism checks compare byte for byte, and
//! the meter folds the send records into per-node, per-round message and
//! byte accounting.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::agent::Slot;
use crate::types::{ErrorSignal, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub time: u64,
    pub seq: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    TreeAssign {
        node: NodeId,
        epoch: u64,
        is_root: bool,
        height: u64,
    },
    Send {
        src: NodeId,
        dst: NodeId,
        epoch: u64,
        slot: Slot,
        tag: &'static str,
        bytes: u64,
    },
    Deliver {
        src: NodeId,
        dst: NodeId,
        epoch: u64,
        slot: Slot,
        tag: &'static str,
    },
    DropMessage {
        src: NodeId,
        dst: NodeId,
        reason: &'static str,
    },
    Input {
        node: NodeId,
        round: u64,
    },
    Fail {
        node: NodeId,
    },
    FailureNotice {
        node: NodeId,
        failed: Vec<NodeId>,
    },
    Signal {
        signal: ErrorSignal,
    },
    RoundDone {
        node: NodeId,
        epoch: u64,
        slot: Slot,
    },
    Suspect {
        node: NodeId,
        suspected: Vec<NodeId>,
    },
    BuildError {
        detail: String,
    },
    Stuck {
        node: NodeId,
        phase: String,
        missing: Vec<NodeId>,
    },
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} seq={} ", self.time, self.seq)?;
        match &self.event {
            TraceEvent::TreeAssign {
                node,
                epoch,
                is_root,
                height,
            } => write!(
                f,
                "tree-assign node={node} epoch={epoch} root={is_root} height={height}"
            ),
            TraceEvent::Send {
                src,
                dst,
                epoch,
                slot,
                tag,
                bytes,
            } => write!(
                f,
                "send src={src} dst={dst} epoch={epoch} slot={slot} tag={tag} bytes={bytes}"
            ),
            TraceEvent::Deliver {
                src,
                dst,
                epoch,
                slot,
                tag,
            } => write!(
                f,
                "deliver src={src} dst={dst} epoch={epoch} slot={slot} tag={tag}"
            ),
            TraceEvent::DropMessage { src, dst, reason } => {
                write!(f, "drop src={src} dst={dst} reason={reason:?}")
            }
            TraceEvent::Input { node, round } => write!(f, "input node={node} round={round}"),
            TraceEvent::Fail { node } => write!(f, "fail node={node}"),
            TraceEvent::FailureNotice { node, failed } => {
                write!(f, "failure-notice node={node} failed={}", join(failed))
            }
            TraceEvent::Signal { signal } => write!(f, "signal {signal}"),
            TraceEvent::RoundDone { node, epoch, slot } => {
                write!(f, "round-done node={node} epoch={epoch} slot={slot}")
            }
            TraceEvent::Suspect { node, suspected } => {
                write!(f, "suspect node={node} suspected={}", join(suspected))
            }
            TraceEvent::BuildError { detail } => write!(f, "build-error detail={detail:?}"),
            TraceEvent::Stuck {
                node,
                phase,
                missing,
            } => write!(f, "stuck node={node} phase={phase} missing={}", join(missing)),
        }
    }
}

fn join(ids: &[NodeId]) -> String {
    if ids.is_empty() {
        return "-".to_string();
    }
    ids.iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// The full ordered record of one simulation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&record.to_string());
            out.push('\n');
        }
        out
    }

    pub fn signals(&self) -> impl Iterator<Item = &ErrorSignal> {
        self.records.iter().filter_map(|r| match &r.event {
            TraceEvent::Signal { signal } => Some(signal),
            _ => None,
        })
    }

    /// Fail-stop times per node.
    pub fn fail_times(&self) -> BTreeMap<NodeId, u64> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            if let TraceEvent::Fail { node } = r.event {
                out.entry(node).or_insert(r.time);
            }
        }
        out
    }

    /// The aggregation root of each tree epoch (the node assigned without
    /// a parent).
    pub fn epoch_roots(&self) -> BTreeMap<u64, NodeId> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            if let TraceEvent::TreeAssign {
                node,
                epoch,
                is_root: true,
                ..
            } = r.event
            {
                out.insert(epoch, node);
            }
        }
        out
    }

    /// Times at which each consensus round completed at the aggregation
    /// root of its epoch, keyed by round.
    pub fn round_completions(&self) -> BTreeMap<u64, u64> {
        let roots = self.epoch_roots();
        let mut out = BTreeMap::new();
        for r in &self.records {
            if let TraceEvent::RoundDone {
                node,
                epoch,
                slot: Slot::Consensus(round),
            } = r.event
            {
                if roots.get(&epoch) == Some(&node) {
                    out.insert(round, r.time);
                }
            }
        }
        out
    }

    pub fn has_stuck_or_build_errors(&self) -> bool {
        self.records.iter().any(|r| {
            matches!(
                r.event,
                TraceEvent::Stuck { .. } | TraceEvent::BuildError { .. }
            )
        })
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Per-node accounting for one (epoch, slot).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MeterCell {
    pub msgs: u64,
    pub bytes: u64,
    pub max_msg_bytes: u64,
}

/// Message counts and byte totals folded from a trace's send records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Meter {
    pub cells: BTreeMap<(u64, Slot, NodeId), MeterCell>,
}

/// Exact per-node, per-round counts and byte totals from the encoded
/// message lengths recorded in the trace.
pub fn meter(trace: &Trace) -> Meter {
    let mut cells: BTreeMap<(u64, Slot, NodeId), MeterCell> = BTreeMap::new();
    for r in &trace.records {
        if let TraceEvent::Send {
            src,
            epoch,
            slot,
            bytes,
            ..
        } = r.event
        {
            let cell = cells.entry((epoch, slot, src)).or_default();
            cell.msgs += 1;
            cell.bytes += bytes;
            cell.max_msg_bytes = cell.max_msg_bytes.max(bytes);
        }
    }
    Meter { cells }
}

impl Meter {
    /// Total messages sent in one consensus round (across epochs; a round
    /// runs in exactly one epoch).
    pub fn consensus_round_messages(&self, round: u64) -> u64 {
        self.cells
            .iter()
            .filter(|((_, slot, _), _)| *slot == Slot::Consensus(round))
            .map(|(_, c)| c.msgs)
            .sum()
    }

    /// Largest encoded message observed in any consensus round.
    pub fn max_combined_bytes(&self) -> u64 {
        self.cells
            .iter()
            .filter(|((_, slot, _), _)| matches!(slot, Slot::Consensus(_)))
            .map(|(_, c)| c.max_msg_bytes)
            .max()
            .unwrap_or(0)
    }

    /// Largest encoded message observed anywhere.
    pub fn max_message_bytes(&self) -> u64 {
        self.cells.values().map(|c| c.max_msg_bytes).max().unwrap_or(0)
    }

    /// Per-node byte totals for the uniqueness round of `epoch`.
    pub fn uniqueness_node_bytes(&self, epoch: u64) -> BTreeMap<NodeId, u64> {
        self.cells
            .iter()
            .filter(|((e, slot, _), _)| *e == epoch && *slot == Slot::Uniqueness)
            .map(|((_, _, node), c)| (*node, c.bytes))
            .collect()
    }

    /// Per-node message counts for one (epoch, slot).
    pub fn node_messages(&self, epoch: u64, slot: Slot) -> BTreeMap<NodeId, u64> {
        self.cells
            .iter()
            .filter(|((e, s, _), _)| *e == epoch && *s == slot)
            .map(|((_, _, node), c)| (*node, c.msgs))
            .collect()
    }
}
