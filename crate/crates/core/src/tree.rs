//! Centralized spanning-tree builders.
//!
//! Deployments may build their tree with any protocol they like; these
//! builders are stand-ins that produce the per-node six-tuples. Their
//! output is deliberately untrusted: the structure certificate is what
//! establishes that what they produced really is a single rooted tree
//! spanning the ID list.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{NodeId, TreeInput};

/// Which shape the builder produces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreePolicy {
    /// Breadth-first tree over the declared adjacency, rooted at the
    /// smallest alive ID.
    #[default]
    Bfs,
    /// Height-one tree: everyone hangs off the smallest alive ID.
    Star,
    /// A single chain in ascending ID order.
    Line,
    /// Each node attaches under a uniformly chosen earlier node.
    Random,
}

impl fmt::Display for TreePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TreePolicy::Bfs => "bfs",
            TreePolicy::Star => "star",
            TreePolicy::Line => "line",
            TreePolicy::Random => "random",
        };
        f.write_str(name)
    }
}

impl FromStr for TreePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bfs" => Ok(TreePolicy::Bfs),
            "star" => Ok(TreePolicy::Star),
            "line" => Ok(TreePolicy::Line),
            "random" => Ok(TreePolicy::Random),
            other => Err(format!(
                "unknown tree policy {other:?} (expected bfs, star, line or random)"
            )),
        }
    }
}

/// Undirected network adjacency the BFS builder walks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adjacency {
    #[default]
    Complete,
    /// Explicit undirected edges, stored with the smaller endpoint first.
    Edges(BTreeSet<(NodeId, NodeId)>),
}

impl Adjacency {
    pub fn from_edges(edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Adjacency {
        Adjacency::Edges(
            edges
                .into_iter()
                .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
                .collect(),
        )
    }

    /// Neighbors of `node` among `alive`, ascending.
    pub fn neighbors(&self, node: NodeId, alive: &[NodeId]) -> Vec<NodeId> {
        match self {
            Adjacency::Complete => alive.iter().copied().filter(|&x| x != node).collect(),
            Adjacency::Edges(edges) => alive
                .iter()
                .copied()
                .filter(|&x| {
                    x != node
                        && (edges.contains(&(node.min(x), node.max(x))))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeBuildError {
    #[error("no alive nodes to build a tree over")]
    Empty,
    #[error("adjacency does not connect all alive nodes (reached {reached} of {alive})")]
    Disconnected { reached: usize, alive: usize },
}

/// A built tree: one input per alive node, plus the root and height the
/// harness needs for scheduling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuiltTree {
    pub inputs: BTreeMap<NodeId, TreeInput>,
    pub root: NodeId,
    pub height: u64,
}

/// Builds the per-node tree description over `alive` (sorted ascending).
/// Star, line and random shapes ignore the adjacency; BFS walks it and
/// fails if it does not connect the alive nodes.
pub fn build_tree(
    alive: &[NodeId],
    policy: TreePolicy,
    adjacency: &Adjacency,
    rng: &mut ChaCha8Rng,
) -> Result<BuiltTree, TreeBuildError> {
    if alive.is_empty() {
        return Err(TreeBuildError::Empty);
    }
    debug_assert!(alive.windows(2).all(|w| w[0] < w[1]));
    let root = alive[0];

    // parent per node; None only at the root.
    let mut parent: BTreeMap<NodeId, Option<NodeId>> = BTreeMap::new();
    match policy {
        TreePolicy::Star => {
            for &x in alive {
                parent.insert(x, (x != root).then_some(root));
            }
        }
        TreePolicy::Line => {
            parent.insert(root, None);
            for w in alive.windows(2) {
                parent.insert(w[1], Some(w[0]));
            }
        }
        TreePolicy::Random => {
            parent.insert(root, None);
            let mut attached = vec![root];
            for &x in &alive[1..] {
                let p = attached[rng.gen_range(0..attached.len())];
                parent.insert(x, Some(p));
                attached.push(x);
            }
        }
        TreePolicy::Bfs => {
            parent.insert(root, None);
            let mut queue = VecDeque::from([root]);
            while let Some(x) = queue.pop_front() {
                for nb in adjacency.neighbors(x, alive) {
                    if let std::collections::btree_map::Entry::Vacant(slot) = parent.entry(nb) {
                        slot.insert(Some(x));
                        queue.push_back(nb);
                    }
                }
            }
            if parent.len() != alive.len() {
                return Err(TreeBuildError::Disconnected {
                    reached: parent.len(),
                    alive: alive.len(),
                });
            }
        }
    }

    let mut children: BTreeMap<NodeId, Vec<NodeId>> = alive.iter().map(|&x| (x, vec![])).collect();
    for (&x, &p) in &parent {
        if let Some(p) = p {
            children.get_mut(&p).expect("parent is alive").push(x);
        }
    }

    let mut depth: BTreeMap<NodeId, u64> = BTreeMap::new();
    depth.insert(root, 0);
    let mut queue = VecDeque::from([root]);
    let mut height = 0;
    while let Some(x) = queue.pop_front() {
        let d = depth[&x];
        height = height.max(d);
        for &c in &children[&x] {
            depth.insert(c, d + 1);
            queue.push_back(c);
        }
    }

    let id_list = alive.to_vec();
    let inputs = alive
        .iter()
        .map(|&x| {
            (
                x,
                TreeInput {
                    id: x,
                    id_list: id_list.clone(),
                    root_id: root,
                    parent_id: parent[&x],
                    children: children[&x].clone(),
                    depth: depth[&x],
                },
            )
        })
        .collect();

    Ok(BuiltTree {
        inputs,
        root,
        height,
    })
}
