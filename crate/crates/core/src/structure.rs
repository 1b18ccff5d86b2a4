//! Spanning-structure certification.
//!
//! Every node sends its parent the claimed root, its own depth, and the
//! size of its subtree. A parent checks that each child agrees on the root
//! (ruling out a connected two-root forest) and sits strictly deeper
//! (ruling out cycles), then aggregates the counts; the root finally checks
//! that the total equals the claimed number of active nodes.

use crate::types::{ErrorKind, ErrorSignal, NodeId, TreeInput};
use crate::wire::{CertMessage, StructureMsg};

/// Outcome of one node's structure step. The error is present exactly when
/// the check failed; only the first violation found is reported, since one
/// signalling node is all the round needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureVerdict {
    pub pass: bool,
    pub error: Option<ErrorSignal>,
}

impl StructureVerdict {
    fn pass() -> Self {
        StructureVerdict {
            pass: true,
            error: None,
        }
    }

    fn fail(error: ErrorSignal) -> Self {
        StructureVerdict {
            pass: false,
            error: Some(error),
        }
    }
}

/// Runs one node's step of the structure round.
///
/// `child_msgs` must contain exactly one message per entry of
/// `input.children`. The depth check is the strict inequality
/// `child depth > own depth`, which is what makes the claimed graph
/// acyclic. Aggregation proceeds even past a violation so the root still
/// receives a count and can evaluate the span check in the same round.
pub fn structure_check_local(
    node: NodeId,
    epoch: u64,
    input: &TreeInput,
    child_msgs: &[StructureMsg],
) -> (Option<CertMessage>, StructureVerdict) {
    debug_assert_eq!(child_msgs.len(), input.children.len());

    let mut first_error: Option<ErrorSignal> = None;
    let mut subtree_count: u64 = 1;
    for (child, msg) in input.children.iter().zip(child_msgs) {
        if msg.claimed_root != input.root_id && first_error.is_none() {
            first_error = Some(ErrorSignal::new(
                node,
                0,
                ErrorKind::Structure,
                format!(
                    "epoch {epoch}: child {child} claims root {} but own root is {}",
                    msg.claimed_root, input.root_id
                ),
            ));
        }
        if msg.sender_depth <= input.depth && first_error.is_none() {
            first_error = Some(ErrorSignal::new(
                node,
                0,
                ErrorKind::Structure,
                format!(
                    "epoch {epoch}: child {child} reports depth {} which is not below own depth {}",
                    msg.sender_depth, input.depth
                ),
            ));
        }
        subtree_count += msg.subtree_count;
    }

    if input.is_root() {
        if first_error.is_none() && subtree_count != input.n() {
            first_error = Some(ErrorSignal::new(
                node,
                0,
                ErrorKind::Span,
                format!(
                    "epoch {epoch}: counted {subtree_count} nodes but the id list names {}",
                    input.n()
                ),
            ));
        }
        let verdict = match first_error {
            Some(err) => StructureVerdict::fail(err),
            None => StructureVerdict::pass(),
        };
        (None, verdict)
    } else {
        let outgoing = CertMessage::Structure(StructureMsg {
            claimed_root: input.root_id,
            sender_depth: input.depth,
            subtree_count,
        });
        let verdict = match first_error {
            Some(err) => StructureVerdict::fail(err),
            None => StructureVerdict::pass(),
        };
        (Some(outgoing), verdict)
    }
}
