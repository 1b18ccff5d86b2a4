//! Agreement and validity certification, combined into one message per
//! node per round.
//!
//! Agreement: every node compares its decision against each child's and
//! signals on any mismatch; equality is transitive, so one spanning tree
//! of comparisons covers every pair of nodes. Validity: each node checks
//! whether it proposed the value it decided, disjoins that witness with
//! its children's, and the root signals when the whole tree found none.

use serde::{Deserialize, Serialize};

use crate::digest::{DigestWidth, WireValue};
use crate::types::{ErrorKind, ErrorSignal, NodeId};
use crate::wire::{CertMessage, CombinedMsg};

/// What the local consensus implementation hands its certification agent
/// for one round: the decided value and the proposals it received. No
/// well-formedness is assumed; buggy implementations are the test subject.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusInput {
    pub decision: Vec<u8>,
    pub proposals: Vec<Vec<u8>>,
}

/// A child's contribution to a combined round, tagged with its sender for
/// error attribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChildCombined {
    pub sender: NodeId,
    pub decision: WireValue,
    pub witness_found: bool,
}

/// Compares child decisions against the local one, emitting one agreement
/// error per disagreeing child. The local decision is always forwarded,
/// error or not.
pub fn certify_agreement(
    node: NodeId,
    round: u64,
    decision: &WireValue,
    children: &[ChildCombined],
) -> (WireValue, Vec<ErrorSignal>) {
    let errors = children
        .iter()
        .filter(|c| c.decision != *decision)
        .map(|c| {
            ErrorSignal::new(
                node,
                round,
                ErrorKind::Agreement,
                format!("child {} decided a different value", c.sender),
            )
        })
        .collect();
    (decision.clone(), errors)
}

/// Did this node itself propose the value it decided? Comparison happens
/// on wire-normalized values so long proposals validate long decisions.
pub fn local_witness(input: &ConsensusInput, width: DigestWidth) -> bool {
    let decided = WireValue::normalize(&input.decision, width);
    input
        .proposals
        .iter()
        .any(|p| WireValue::normalize(p, width) == decided)
}

/// Disjoins the local witness with the child certificates. Non-roots
/// forward the combined flag; only the root sees the complete certificate
/// and signals when it is false.
pub fn certify_validity(
    node: NodeId,
    round: u64,
    input: &ConsensusInput,
    width: DigestWidth,
    child_flags: &[bool],
    is_root: bool,
) -> (bool, Option<ErrorSignal>) {
    let witness = local_witness(input, width) || child_flags.iter().any(|&f| f);
    let error = (is_root && !witness).then(|| {
        ErrorSignal::new(
            node,
            round,
            ErrorKind::Validity,
            "no node in the tree proposed the decided value".to_string(),
        )
    });
    (witness, error)
}

/// One node's combined consensus-certification step: runs the agreement
/// and validity checks over the same child messages and emits at most one
/// outgoing message. Non-roots forward their decision plus the combined
/// witness; the root emits nothing.
pub fn certify_consensus(
    node: NodeId,
    round: u64,
    input: &ConsensusInput,
    width: DigestWidth,
    children: &[ChildCombined],
    is_root: bool,
) -> (Option<CertMessage>, Vec<ErrorSignal>) {
    let decided = WireValue::normalize(&input.decision, width);
    let (forward, mut errors) = certify_agreement(node, round, &decided, children);

    let child_flags: Vec<bool> = children.iter().map(|c| c.witness_found).collect();
    let (witness, validity_error) =
        certify_validity(node, round, input, width, &child_flags, is_root);
    errors.extend(validity_error);

    let outgoing = (!is_root).then_some(CertMessage::Combined(CombinedMsg {
        decision: forward,
        witness_found: witness,
    }));
    (outgoing, errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: DigestWidth = DigestWidth::W32;

    fn wire(v: &[u8]) -> WireValue {
        WireValue::normalize(v, W)
    }

    fn child(sender: u64, decision: &[u8], witness: bool) -> ChildCombined {
        ChildCombined {
            sender: NodeId::new(sender),
            decision: wire(decision),
            witness_found: witness,
        }
    }

    #[test]
    fn unanimous_children_produce_no_errors_and_forward_the_decision() {
        let d = wire(b"X");
        let children = vec![child(2, b"X", false), child(3, b"X", false)];
        let (forward, errors) = certify_agreement(NodeId::new(1), 0, &d, &children);
        assert_eq!(forward, d);
        assert!(errors.is_empty());
    }

    #[test]
    fn one_disagreeing_child_yields_exactly_one_error() {
        let d = wire(b"X");
        let children = vec![child(2, b"X", false), child(3, b"Y", false)];
        let (forward, errors) = certify_agreement(NodeId::new(1), 4, &d, &children);
        assert_eq!(forward, d);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].kind, ErrorKind::Agreement);
        assert_eq!(errors[0].round, 4);
        assert!(errors[0].detail.contains("child 3"));
    }

    #[test]
    fn long_values_agree_through_their_digests() {
        let value = b"a decision too long for the raw wire form".as_slice();
        let d = wire(value);
        let children = vec![child(2, value, false)];
        let (_, errors) = certify_agreement(NodeId::new(1), 0, &d, &children);
        assert!(errors.is_empty());
    }

    #[test]
    fn local_witness_matches_on_normalized_values() {
        let long = b"a proposal much longer than eight bytes".to_vec();
        let input = ConsensusInput {
            decision: long.clone(),
            proposals: vec![b"other".to_vec(), long],
        };
        assert!(local_witness(&input, W));

        let input = ConsensusInput {
            decision: b"X".to_vec(),
            proposals: vec![],
        };
        assert!(!local_witness(&input, W));
    }

    #[test]
    fn validity_holds_when_any_child_carries_the_witness() {
        let input = ConsensusInput {
            decision: b"X".to_vec(),
            proposals: vec![],
        };
        let (flag, error) =
            certify_validity(NodeId::new(1), 0, &input, W, &[false, true], true);
        assert!(flag);
        assert!(error.is_none());
    }

    #[test]
    fn root_signals_when_no_witness_exists_anywhere() {
        let input = ConsensusInput {
            decision: b"X".to_vec(),
            proposals: vec![b"Y".to_vec()],
        };
        let (flag, error) = certify_validity(NodeId::new(1), 2, &input, W, &[false], true);
        assert!(!flag);
        let err = error.expect("validity error at root");
        assert_eq!(err.kind, ErrorKind::Validity);
        assert_eq!(err.round, 2);
    }

    #[test]
    fn non_root_forwards_a_false_flag_instead_of_signalling() {
        let input = ConsensusInput {
            decision: b"X".to_vec(),
            proposals: vec![],
        };
        let (flag, error) = certify_validity(NodeId::new(2), 0, &input, W, &[], false);
        assert!(!flag);
        assert!(error.is_none());
    }

    #[test]
    fn combined_step_emits_one_message_for_non_roots_and_none_for_the_root() {
        let input = ConsensusInput {
            decision: b"X".to_vec(),
            proposals: vec![b"X".to_vec()],
        };
        let (msg, errors) = certify_consensus(NodeId::new(2), 0, &input, W, &[], false);
        assert!(errors.is_empty());
        assert_eq!(
            msg,
            Some(CertMessage::Combined(CombinedMsg {
                decision: wire(b"X"),
                witness_found: true,
            }))
        );

        let (msg, errors) = certify_consensus(NodeId::new(1), 0, &input, W, &[], true);
        assert!(msg.is_none());
        assert!(errors.is_empty());
    }

    #[test]
    fn singleton_node_passes_when_it_proposed_its_own_decision() {
        let input = ConsensusInput {
            decision: b"X".to_vec(),
            proposals: vec![b"X".to_vec()],
        };
        let (msg, errors) = certify_consensus(NodeId::new(1), 0, &input, W, &[], true);
        assert!(msg.is_none());
        assert!(errors.is_empty());
    }

    #[test]
    fn agreement_and_validity_bugs_are_reported_independently() {
        // The decision was never proposed and one child disagrees: both an
        // agreement error and (at the root) a validity error come out of
        // the same combined step.
        let input = ConsensusInput {
            decision: b"Z".to_vec(),
            proposals: vec![],
        };
        let children = vec![child(2, b"Y", false), child(3, b"Z", false)];
        let (msg, errors) = certify_consensus(NodeId::new(1), 0, &input, W, &children, true);
        assert!(msg.is_none());
        let kinds: Vec<ErrorKind> = errors.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![ErrorKind::Agreement, ErrorKind::Validity]);
    }
}
