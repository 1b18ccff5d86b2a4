//! Scenario definitions, input generation with bug injection, and the
//! centralized ground-truth oracle.
//!
//! A scenario declares the simulated system, the tree policy, the
//! consensus values, and at most one injected defect. Generation produces
//! the per-node tree descriptions and consensus inputs the agents will
//! see; the oracle evaluates the certified predicates directly over those
//! inputs, which is what run reports classify signals against.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::consensus::ConsensusInput;
use crate::digest::DigestWidth;
use crate::report::{self, Report};
use crate::simnet::{self, derive_seed, InputRound, RunPlan, SimConfig};
use crate::trace::Trace;
use crate::tree::{build_tree, BuiltTree, TreePolicy};
use crate::types::{NodeId, TreeInput};
use crate::uniqueness::{check_id_list, UniquenessMode};

/// The defect a scenario injects, if any. Consensus bugs perturb the
/// inputs of the named nodes; tree bugs corrupt the builder's output
/// before it reaches the agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bug {
    None,
    /// `node` decides `value` instead of the scenario decision.
    Disagreement { node: NodeId, value: Vec<u8> },
    /// Every node decides `value`, which no node proposed.
    InvalidDecision { value: Vec<u8> },
    /// `node` claims `id` (another node's identity) as its own.
    DuplicateId { node: NodeId, id: NodeId },
    /// Depth labels are corrupted so the claimed graph contains a cycle.
    TreeCycle,
    /// One node claims a different root, as in a connected two-root forest.
    TreeForest,
    /// `node` is left out of the built tree while staying in the id list.
    TreeOmitNode { node: NodeId },
}

impl Bug {
    pub fn name(&self) -> &'static str {
        match self {
            Bug::None => "none",
            Bug::Disagreement { .. } => "disagreement",
            Bug::InvalidDecision { .. } => "invalid-decision",
            Bug::DuplicateId { .. } => "duplicate-id",
            Bug::TreeCycle => "tree-cycle",
            Bug::TreeForest => "tree-forest",
            Bug::TreeOmitNode { .. } => "tree-omit-node",
        }
    }

    pub fn is_tree_bug(&self) -> bool {
        matches!(
            self,
            Bug::TreeCycle | Bug::TreeForest | Bug::TreeOmitNode { .. }
        )
    }
}

/// A declarative description of one run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub sim: SimConfig,
    pub tree_policy: TreePolicy,
    pub bug: Bug,
    /// Per-node proposal lists; absent nodes received none.
    pub proposals: BTreeMap<NodeId, Vec<Vec<u8>>>,
    /// The value every node is supposed to decide.
    pub decision: Vec<u8>,
    /// Number of consensus-certification rounds to schedule.
    pub rounds: u64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("tree build failed: {0}")]
    TreeBuild(#[from] crate::tree::TreeBuildError),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

/// Everything `generate` derives from a scenario: the (possibly corrupted)
/// epoch-0 tree descriptions and the per-node consensus inputs.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub trees: BTreeMap<NodeId, TreeInput>,
    pub height: u64,
    pub inputs: BTreeMap<NodeId, ConsensusInput>,
}

/// Simulated-time gap between scheduled activities, generous enough for a
/// full initialization or rebuild plus one certification round.
pub fn round_gap(sim: &SimConfig) -> u64 {
    64 * sim.max_delay * (sim.n + 2)
}

/// The instant at which round `round`'s inputs reach the agents.
pub fn round_time(sim: &SimConfig, round: u64) -> u64 {
    round_gap(sim) * (round + 1)
}

/// The clean tree the scenario's builder produces, before bug injection.
/// Deterministic in the scenario seed; rebuilt identically by `generate`.
pub fn build_scenario_tree(scenario: &Scenario) -> Result<BuiltTree, ScenarioError> {
    let ids = scenario.sim.node_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.sim.seed, 1));
    Ok(build_tree(
        &ids,
        scenario.tree_policy,
        &scenario.sim.adjacency,
        &mut rng,
    )?)
}

/// Validates the scenario and produces the per-node tree descriptions and
/// consensus inputs, with the declared bug injected.
pub fn generate(scenario: &Scenario) -> Result<Prepared, ScenarioError> {
    scenario.sim.validate().map_err(invalid)?;
    validate_bug(scenario)?;

    let built = build_scenario_tree(scenario)?;
    let height = built.height;
    let trees = apply_tree_bug(built, &scenario.bug)?;
    let inputs = build_inputs(scenario);
    Ok(Prepared {
        trees,
        height,
        inputs,
    })
}

fn validate_bug(scenario: &Scenario) -> Result<(), ScenarioError> {
    let n = scenario.sim.n;
    let in_range = |node: NodeId| node.value() >= 1 && node.value() <= n;
    match &scenario.bug {
        Bug::None => {}
        Bug::Disagreement { node, value } => {
            if !in_range(*node) {
                return Err(invalid(format!("disagreement names unknown node {node}")));
            }
            if n < 2 {
                return Err(invalid("disagreement needs at least 2 nodes"));
            }
            if *value == scenario.decision {
                return Err(invalid(
                    "disagreement value must differ from the scenario decision",
                ));
            }
        }
        Bug::InvalidDecision { value } => {
            let proposed = scenario
                .proposals
                .values()
                .any(|ps| ps.iter().any(|p| p == value));
            if proposed {
                return Err(invalid(
                    "invalid-decision value must not appear in any proposal list",
                ));
            }
        }
        Bug::DuplicateId { node, id } => {
            // The claimed duplicate must be another non-root node's identity:
            // duplicating the root's id trips the local root/parent check
            // instead of exercising the distributed certificate.
            if !in_range(*node) || !in_range(*id) {
                return Err(invalid("duplicate-id names an unknown node"));
            }
            if node == id {
                return Err(invalid("duplicate-id must claim a different node's id"));
            }
            if node.value() == 1 || id.value() == 1 {
                return Err(invalid(
                    "duplicate-id cannot involve the tree root; pick nodes above 1",
                ));
            }
        }
        Bug::TreeCycle | Bug::TreeForest => {
            if n < 3 {
                return Err(invalid(format!(
                    "{} needs at least 3 nodes",
                    scenario.bug.name()
                )));
            }
        }
        Bug::TreeOmitNode { node } => {
            if !in_range(*node) {
                return Err(invalid(format!("tree-omit-node names unknown node {node}")));
            }
            if n < 2 {
                return Err(invalid("tree-omit-node needs at least 2 nodes"));
            }
        }
    }
    if scenario.bug.is_tree_bug() && scenario.rounds > 0 {
        return Err(invalid(
            "tree defect scenarios run initialization only; set rounds = 0",
        ));
    }
    Ok(())
}

fn apply_tree_bug(
    built: BuiltTree,
    bug: &Bug,
) -> Result<BTreeMap<NodeId, TreeInput>, ScenarioError> {
    let root = built.root;
    let mut trees = built.inputs;
    match bug {
        Bug::None | Bug::Disagreement { .. } | Bug::InvalidDecision { .. } => {}
        Bug::DuplicateId { node, id } => {
            trees
                .get_mut(node)
                .expect("validated node exists")
                .id = *id;
        }
        Bug::TreeForest => {
            // The largest-id non-root node claims some third node as its
            // root; its parent sees the mismatched claim.
            let victim = *trees.keys().rev().find(|&&x| x != root).expect("n >= 3");
            let foreign = *trees
                .keys()
                .find(|&&x| x != root && x != victim)
                .expect("n >= 3");
            trees.get_mut(&victim).expect("victim exists").root_id = foreign;
        }
        Bug::TreeCycle => {
            // Corrupt one node's depth so it no longer sits strictly below
            // its parent, which is exactly what a cycle looks like to the
            // depth check. If the tree has height 1, first re-parent one
            // leaf under another so the corrupted depth stays nonzero.
            let deep = trees
                .values()
                .filter(|t| t.depth >= 2)
                .max_by_key(|t| (t.depth, t.id))
                .map(|t| t.id);
            let victim = match deep {
                Some(v) => v,
                None => {
                    let mut leaves: Vec<NodeId> = trees
                        .values()
                        .filter(|t| t.children.is_empty() && t.id != root)
                        .map(|t| t.id)
                        .collect();
                    leaves.sort();
                    let (new_parent, moved) =
                        (leaves[leaves.len() - 2], leaves[leaves.len() - 1]);
                    let old_parent = trees[&moved].parent_id.expect("non-root leaf");
                    trees
                        .get_mut(&old_parent)
                        .expect("parent exists")
                        .children
                        .retain(|c| *c != moved);
                    trees
                        .get_mut(&new_parent)
                        .expect("new parent exists")
                        .children
                        .push(moved);
                    let depth = trees[&new_parent].depth + 1;
                    let entry = trees.get_mut(&moved).expect("victim exists");
                    entry.parent_id = Some(new_parent);
                    entry.depth = depth;
                    moved
                }
            };
            let parent = trees[&victim].parent_id.expect("victim is not the root");
            let parent_depth = trees[&parent].depth;
            trees.get_mut(&victim).expect("victim exists").depth = parent_depth;
        }
        Bug::TreeOmitNode { node } => {
            let entry = trees
                .get(node)
                .ok_or_else(|| invalid(format!("omit target {node} not in the built tree")))?;
            if !entry.children.is_empty() {
                return Err(invalid(format!(
                    "omit target {node} must be a leaf of the built tree"
                )));
            }
            let parent = entry.parent_id.expect("leaf of a multi-node tree");
            trees
                .get_mut(&parent)
                .expect("parent exists")
                .children
                .retain(|c| c != node);
            trees.remove(node);
        }
    }
    Ok(trees)
}

fn build_inputs(scenario: &Scenario) -> BTreeMap<NodeId, ConsensusInput> {
    let ids = scenario.sim.node_ids();
    let mut inputs: BTreeMap<NodeId, ConsensusInput> = ids
        .iter()
        .map(|&node| {
            let decision = match &scenario.bug {
                Bug::Disagreement { node: deviant, value } if *deviant == node => value.clone(),
                Bug::InvalidDecision { value } => value.clone(),
                _ => scenario.decision.clone(),
            };
            let proposals = scenario.proposals.get(&node).cloned().unwrap_or_default();
            inputs_entry(node, decision, proposals)
        })
        .collect();

    // A correct run carries a witness the certificate can see: some node
    // that decided the declared value must also have proposed it. The
    // invalid-decision bug is the one case that must stay unproposed.
    let needs_witness = !matches!(scenario.bug, Bug::InvalidDecision { .. });
    let witnessed = inputs.values().any(|i| i.proposals.contains(&i.decision));
    if needs_witness && !witnessed {
        let holder = *inputs
            .iter()
            .find(|(_, i)| i.decision == scenario.decision)
            .map(|(node, _)| node)
            .expect("some node decides the declared value");
        inputs
            .get_mut(&holder)
            .expect("witness holder exists")
            .proposals
            .push(scenario.decision.clone());
    }
    inputs
}

fn inputs_entry(
    node: NodeId,
    decision: Vec<u8>,
    proposals: Vec<Vec<u8>>,
) -> (NodeId, ConsensusInput) {
    (
        node,
        ConsensusInput {
            decision,
            proposals,
        },
    )
}

/// Ground truth for the consensus properties, evaluated directly over the
/// generated inputs of the given node set. Agreement: all decisions equal.
/// Validity: some considered node decided a value it itself proposed —
/// when agreement holds this is exactly "the common decision appears in
/// the union of proposals", and it stays well-defined when agreement is
/// broken and there is no common decision to ask about. An empty set holds
/// both vacuously.
pub fn consensus_truth(
    inputs: &BTreeMap<NodeId, ConsensusInput>,
    over: &BTreeSet<NodeId>,
) -> (bool, bool) {
    let considered: Vec<&ConsensusInput> =
        over.iter().filter_map(|node| inputs.get(node)).collect();
    if considered.is_empty() {
        return (true, true);
    }
    let agreement = considered
        .iter()
        .all(|i| i.decision == considered[0].decision);
    let validity = considered.iter().any(|n| n.proposals.contains(&n.decision));
    (agreement, validity)
}

/// Restricted oracle: evaluates the predicates over the inputs of
/// `alive` nodes only, the ground truth certification is held to when
/// nodes have failed.
pub fn oracle(
    scenario: &Scenario,
    alive: &BTreeSet<NodeId>,
) -> Result<(bool, bool), ScenarioError> {
    let prepared = generate(scenario)?;
    Ok(consensus_truth(&prepared.inputs, alive))
}

/// Does this per-node tree description actually describe one rooted tree
/// spanning the id list, with consistent links and strictly increasing
/// depths along every edge?
pub fn structure_truth(trees: &BTreeMap<NodeId, TreeInput>) -> bool {
    let Some(first) = trees.values().next() else {
        return false;
    };
    let id_list = &first.id_list;
    if !trees.values().all(|t| &t.id_list == id_list) {
        return false;
    }
    if trees.len() != id_list.len() || !id_list.iter().all(|id| trees.contains_key(id)) {
        return false;
    }
    let roots: Vec<NodeId> = trees
        .iter()
        .filter(|(_, t)| t.parent_id.is_none())
        .map(|(&addr, _)| addr)
        .collect();
    let [root] = roots[..] else {
        return false;
    };
    if trees[&root].depth != 0 || !trees.values().all(|t| t.root_id == root) {
        return false;
    }
    for (&addr, input) in trees {
        if let Some(parent) = input.parent_id {
            let Some(parent_input) = trees.get(&parent) else {
                return false;
            };
            if !parent_input.children.contains(&addr) {
                return false;
            }
            if input.depth <= parent_input.depth {
                return false;
            }
        }
        for child in &input.children {
            match trees.get(child) {
                Some(c) if c.parent_id == Some(addr) => {}
                _ => return false,
            }
        }
    }
    true
}

/// Are the claimed IDs of the participating nodes pairwise distinct, over
/// a well-formed (strictly increasing) id list?
pub fn ids_truth(trees: &BTreeMap<NodeId, TreeInput>) -> bool {
    let Some(first) = trees.values().next() else {
        return false;
    };
    if !check_id_list(&first.id_list) {
        return false;
    }
    let mut claimed: Vec<NodeId> = trees.values().map(|t| t.id).collect();
    claimed.sort();
    claimed.windows(2).all(|w| w[0] != w[1])
}

/// How a run is executed: the uniqueness mode and the digest width.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub mode: UniquenessMode,
    pub digest_width: DigestWidth,
}

/// The products of one executed scenario.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    pub report: Report,
}

/// Builds the run plan for a prepared scenario: one input round per
/// scheduled round, spaced far enough apart that initialization, rebuilds
/// and round completion never overlap the next round.
pub fn plan(scenario: &Scenario, prepared: &Prepared, opts: RunOptions) -> RunPlan {
    let input_schedule = (0..scenario.rounds)
        .map(|round| InputRound {
            time: round_time(&scenario.sim, round),
            round,
            inputs: prepared.inputs.clone(),
        })
        .collect();
    RunPlan {
        config: scenario.sim.clone(),
        mode: opts.mode,
        digest_width: opts.digest_width,
        initial_trees: prepared.trees.clone(),
        initial_height: prepared.height,
        rebuild_policy: scenario.tree_policy,
        input_schedule,
    }
}

/// Generates, simulates and reports one scenario.
pub fn execute(scenario: &Scenario, opts: RunOptions) -> Result<RunOutcome, ScenarioError> {
    let prepared = generate(scenario)?;
    let run_plan = plan(scenario, &prepared, opts);
    let trace = simnet::run(&run_plan);
    let report = report::build(scenario, &prepared, &trace, opts);
    Ok(RunOutcome { trace, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_scenario(n: u64) -> Scenario {
        Scenario {
            name: "test".into(),
            sim: SimConfig::new(7, n),
            tree_policy: TreePolicy::Star,
            bug: Bug::None,
            proposals: BTreeMap::new(),
            decision: b"X".to_vec(),
            rounds: 1,
        }
    }

    fn all_nodes(n: u64) -> BTreeSet<NodeId> {
        (1..=n).map(NodeId::new).collect()
    }

    #[test]
    fn correct_run_gets_a_witness_proposer_and_holds_both_predicates() {
        let scenario = base_scenario(4);
        let prepared = generate(&scenario).unwrap();
        assert!(prepared.inputs[&NodeId::new(1)]
            .proposals
            .contains(&b"X".to_vec()));
        assert_eq!(
            consensus_truth(&prepared.inputs, &all_nodes(4)),
            (true, true)
        );
        assert!(structure_truth(&prepared.trees));
        assert!(ids_truth(&prepared.trees));
    }

    #[test]
    fn disagreement_violates_agreement_only() {
        let mut scenario = base_scenario(4);
        scenario.bug = Bug::Disagreement {
            node: NodeId::new(3),
            value: b"Y".to_vec(),
        };
        let prepared = generate(&scenario).unwrap();
        assert_eq!(prepared.inputs[&NodeId::new(3)].decision, b"Y".to_vec());
        assert_eq!(
            consensus_truth(&prepared.inputs, &all_nodes(4)),
            (false, true)
        );
        assert!(structure_truth(&prepared.trees));
        assert!(ids_truth(&prepared.trees));
    }

    #[test]
    fn invalid_decision_violates_validity_only() {
        let mut scenario = base_scenario(4);
        scenario.bug = Bug::InvalidDecision {
            value: b"Z".to_vec(),
        };
        let prepared = generate(&scenario).unwrap();
        assert_eq!(
            consensus_truth(&prepared.inputs, &all_nodes(4)),
            (true, false)
        );
        assert!(structure_truth(&prepared.trees));
    }

    #[test]
    fn duplicate_id_perturbs_ids_but_not_structure() {
        let mut scenario = base_scenario(4);
        scenario.bug = Bug::DuplicateId {
            node: NodeId::new(3),
            id: NodeId::new(2),
        };
        let prepared = generate(&scenario).unwrap();
        assert!(!ids_truth(&prepared.trees));
        assert!(structure_truth(&prepared.trees));
        assert_eq!(
            consensus_truth(&prepared.inputs, &all_nodes(4)),
            (true, true)
        );
        // Local invariants still hold at the corrupted node.
        assert_eq!(prepared.trees[&NodeId::new(3)].local_violation(), None);
    }

    #[test]
    fn tree_cycle_perturbs_structure_but_not_ids() {
        for policy in [TreePolicy::Star, TreePolicy::Line, TreePolicy::Random] {
            let mut scenario = base_scenario(5);
            scenario.rounds = 0;
            scenario.tree_policy = policy;
            scenario.bug = Bug::TreeCycle;
            let prepared = generate(&scenario).unwrap();
            assert!(!structure_truth(&prepared.trees), "policy {policy}");
            assert!(ids_truth(&prepared.trees));
            for t in prepared.trees.values() {
                assert_eq!(t.local_violation(), None);
            }
        }
    }

    #[test]
    fn tree_forest_corrupts_exactly_one_root_claim() {
        let mut scenario = base_scenario(5);
        scenario.rounds = 0;
        scenario.bug = Bug::TreeForest;
        let prepared = generate(&scenario).unwrap();
        assert!(!structure_truth(&prepared.trees));
        assert!(ids_truth(&prepared.trees));
        let off: Vec<&TreeInput> = prepared
            .trees
            .values()
            .filter(|t| t.root_id != NodeId::new(1))
            .collect();
        assert_eq!(off.len(), 1);
        assert_eq!(off[0].local_violation(), None);
    }

    #[test]
    fn tree_omit_node_removes_the_leaf_but_keeps_it_listed() {
        let mut scenario = base_scenario(5);
        scenario.rounds = 0;
        scenario.bug = Bug::TreeOmitNode {
            node: NodeId::new(5),
        };
        let prepared = generate(&scenario).unwrap();
        assert!(!prepared.trees.contains_key(&NodeId::new(5)));
        assert!(prepared.trees[&NodeId::new(1)]
            .id_list
            .contains(&NodeId::new(5)));
        assert!(!structure_truth(&prepared.trees));
        assert!(ids_truth(&prepared.trees));
    }

    #[test]
    fn tree_bugs_require_init_only_scenarios() {
        let mut scenario = base_scenario(5);
        scenario.bug = Bug::TreeCycle;
        assert!(generate(&scenario).is_err());
    }

    #[test]
    fn restricted_oracle_ignores_failed_nodes() {
        let mut scenario = base_scenario(4);
        scenario.bug = Bug::Disagreement {
            node: NodeId::new(4),
            value: b"Y".to_vec(),
        };
        let unrestricted = oracle(&scenario, &all_nodes(4)).unwrap();
        assert_eq!(unrestricted, (false, true));
        // With the deviant dead, the survivors agree.
        let survivors: BTreeSet<NodeId> = (1..=3).map(NodeId::new).collect();
        let restricted = oracle(&scenario, &survivors).unwrap();
        assert_eq!(restricted, (true, true));
    }

    #[test]
    fn sole_proposer_failure_is_the_validity_gap_witness() {
        let mut scenario = base_scenario(4);
        scenario.proposals.insert(NodeId::new(4), vec![b"X".to_vec()]);
        let unrestricted = oracle(&scenario, &all_nodes(4)).unwrap();
        assert_eq!(unrestricted, (true, true));
        let survivors: BTreeSet<NodeId> = (1..=3).map(NodeId::new).collect();
        let restricted = oracle(&scenario, &survivors).unwrap();
        assert_eq!(restricted, (true, false));
    }

    #[test]
    fn ill_formed_scenarios_are_rejected_with_a_description() {
        let mut scenario = base_scenario(2);
        scenario.bug = Bug::Disagreement {
            node: NodeId::new(9),
            value: b"Y".to_vec(),
        };
        let err = generate(&scenario).unwrap_err();
        assert!(err.to_string().contains("unknown node 9"));
    }
}
