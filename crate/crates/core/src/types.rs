//! Shared domain types: node identifiers, the per-node tree description,
//! and the node-local error signal.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::field::{FieldElement, MODULUS};

/// Node identifier. Totally ordered by integer comparison and kept below
/// the field modulus so every ID embeds as a [`FieldElement`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(u64);

impl NodeId {
    /// Panics if `value` does not fit below the field modulus.
    pub fn new(value: u64) -> Self {
        assert!(
            value < MODULUS,
            "node id {value} does not fit below the field modulus"
        );
        NodeId(value)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    pub fn to_field(self) -> FieldElement {
        FieldElement::new(self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The six-tuple a spanning-tree builder hands every node: its identity,
/// the list of all active IDs, the claimed root, its parent (absent at the
/// root), its children, and its distance from the root in hops.
///
/// The `id` field is what the node *claims* to be for certification
/// purposes; message routing uses the stable addresses in `parent_id` and
/// `children`. Everything here is input under test, so none of it is
/// trusted: local invariants are checked by [`TreeInput::local_violation`]
/// and everything global by the structure certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeInput {
    pub id: NodeId,
    pub id_list: Vec<NodeId>,
    pub root_id: NodeId,
    pub parent_id: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: u64,
}

impl TreeInput {
    /// Number of active nodes claimed by the ID list.
    pub fn n(&self) -> u64 {
        self.id_list.len() as u64
    }

    pub fn is_root(&self) -> bool {
        self.parent_id.is_none()
    }

    /// Checks the invariants a node can verify without any communication:
    /// the parent is absent exactly at the root, depth zero marks exactly
    /// the root, and both the node's ID and the root ID appear in the list.
    ///
    /// Returns a description of the first violated invariant, if any.
    pub fn local_violation(&self) -> Option<String> {
        if (self.id == self.root_id) != self.parent_id.is_none() {
            return Some(format!(
                "parent must be absent exactly at the root (id {}, root {}, parent {:?})",
                self.id, self.root_id, self.parent_id
            ));
        }
        if (self.depth == 0) != (self.id == self.root_id) {
            return Some(format!(
                "depth must be zero exactly at the root (id {}, root {}, depth {})",
                self.id, self.root_id, self.depth
            ));
        }
        if !self.id_list.contains(&self.id) {
            return Some(format!("own id {} is missing from the id list", self.id));
        }
        if !self.id_list.contains(&self.root_id) {
            return Some(format!(
                "root id {} is missing from the id list",
                self.root_id
            ));
        }
        None
    }
}

/// Which certified property a signal names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Structure,
    Span,
    Uniqueness,
    Agreement,
    Validity,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ErrorKind::Structure => "structure",
            ErrorKind::Span => "span",
            ErrorKind::Uniqueness => "uniqueness",
            ErrorKind::Agreement => "agreement",
            ErrorKind::Validity => "validity",
        };
        f.write_str(name)
    }
}

/// A node-local verdict naming a violated property. Signals are collected
/// by whoever monitors the node; they are never put on the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSignal {
    pub node: NodeId,
    pub round: u64,
    pub kind: ErrorKind,
    pub detail: String,
}

impl ErrorSignal {
    pub fn new(node: NodeId, round: u64, kind: ErrorKind, detail: impl Into<String>) -> Self {
        ErrorSignal {
            node,
            round,
            kind,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for ErrorSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "node={} round={} kind={} detail={:?}",
            self.node, self.round, self.kind, self.detail
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(id: u64, root: u64, parent: Option<u64>, depth: u64) -> TreeInput {
        TreeInput {
            id: NodeId::new(id),
            id_list: vec![NodeId::new(1), NodeId::new(2), NodeId::new(3)],
            root_id: NodeId::new(root),
            parent_id: parent.map(NodeId::new),
            children: vec![],
            depth,
        }
    }

    #[test]
    fn valid_root_and_leaf_pass_local_checks() {
        assert_eq!(input(1, 1, None, 0).local_violation(), None);
        assert_eq!(input(2, 1, Some(1), 1).local_violation(), None);
    }

    #[test]
    fn self_declared_root_with_parent_is_rejected() {
        let violation = input(2, 2, Some(1), 1).local_violation();
        assert!(violation.unwrap().contains("parent must be absent"));
    }

    #[test]
    fn nonzero_depth_at_root_is_rejected() {
        let violation = input(1, 1, None, 3).local_violation();
        assert!(violation.unwrap().contains("depth must be zero"));
    }

    #[test]
    fn membership_in_id_list_is_required() {
        let violation = input(7, 1, Some(1), 1).local_violation();
        assert!(violation.unwrap().contains("own id 7"));
    }

    #[test]
    #[should_panic(expected = "field modulus")]
    fn node_ids_must_fit_the_field() {
        NodeId::new(u64::MAX);
    }
}
