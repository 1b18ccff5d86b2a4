//! Randomized suite drivers shared by the CLI and the acceptance tests.
//!
//! Every suite is seeded: scenario `i` of a batch derives its seed from
//! the batch seed, so batches replay exactly. A run "holds up" when each
//! certified property classifies as expected — true-alarm on the property
//! the injected bug perturbs, clean-pass on every other — and any
//! deviation is collected as a failure description.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::digest::DigestWidth;
use crate::report::{Classification, Property, Report};
use crate::simnet::{derive_seed, SimConfig};
use crate::trace::meter;
use crate::tree::TreePolicy;
use crate::types::NodeId;
use crate::uniqueness::UniquenessMode;
use crate::workload::{
    build_scenario_tree, execute, round_gap, round_time, Bug, RunOptions, Scenario,
    ScenarioError,
};

/// The injectable defect classes, as suite parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BugClass {
    Disagreement,
    InvalidDecision,
    DuplicateId,
    TreeCycle,
    TreeForest,
    TreeOmitNode,
}

impl BugClass {
    pub const ALL: [BugClass; 6] = [
        BugClass::Disagreement,
        BugClass::InvalidDecision,
        BugClass::DuplicateId,
        BugClass::TreeCycle,
        BugClass::TreeForest,
        BugClass::TreeOmitNode,
    ];

    /// The property the class perturbs (and nothing else).
    pub fn property(self) -> Property {
        match self {
            BugClass::Disagreement => Property::Agreement,
            BugClass::InvalidDecision => Property::Validity,
            BugClass::DuplicateId => Property::Uniqueness,
            BugClass::TreeCycle | BugClass::TreeForest | BugClass::TreeOmitNode => {
                Property::Structure
            }
        }
    }

    pub fn min_nodes(self) -> u64 {
        match self {
            BugClass::Disagreement | BugClass::TreeOmitNode => 2,
            BugClass::InvalidDecision => 1,
            BugClass::DuplicateId | BugClass::TreeCycle | BugClass::TreeForest => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BugClass::Disagreement => "disagreement",
            BugClass::InvalidDecision => "invalid-decision",
            BugClass::DuplicateId => "duplicate-id",
            BugClass::TreeCycle => "tree-cycle",
            BugClass::TreeForest => "tree-forest",
            BugClass::TreeOmitNode => "tree-omit-node",
        }
    }
}

impl fmt::Display for BugClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn random_value(rng: &mut ChaCha8Rng, allow_long: bool) -> Vec<u8> {
    let len = if allow_long && rng.gen_bool(0.5) {
        rng.gen_range(9..=40)
    } else {
        rng.gen_range(1..=8)
    };
    let mut value = vec![0u8; len];
    rng.fill(&mut value[..]);
    value
}

/// A seeded correct-run scenario: random tree shape, random delays, random
/// proposals (short and long, to exercise both wire forms) and one round.
pub fn random_correct_scenario(seed: u64, n: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let mut sim = SimConfig::new(seed, n);
    sim.min_delay = rng.gen_range(1..=3);
    sim.max_delay = sim.min_delay + rng.gen_range(0..=5);
    let tree_policy = match rng.gen_range(0..4) {
        0 => TreePolicy::Bfs,
        1 => TreePolicy::Star,
        2 => TreePolicy::Line,
        _ => TreePolicy::Random,
    };
    let decision = random_value(&mut rng, true);
    let mut proposals = BTreeMap::new();
    for node in sim.node_ids() {
        let count = rng.gen_range(0..=2);
        let values: Vec<Vec<u8>> = (0..count).map(|_| random_value(&mut rng, true)).collect();
        if !values.is_empty() {
            proposals.insert(node, values);
        }
    }
    // One random node explicitly proposes the decision.
    let proposer = NodeId::new(rng.gen_range(1..=n));
    proposals.entry(proposer).or_default().push(decision.clone());
    Scenario {
        name: format!("correct-n{n}-seed{seed}"),
        sim,
        tree_policy,
        bug: Bug::None,
        proposals,
        decision,
        rounds: 1,
    }
}

/// A seeded scenario with one injected defect of the given class.
pub fn random_bug_scenario(
    seed: u64,
    n: u64,
    class: BugClass,
) -> Result<Scenario, ScenarioError> {
    assert!(n >= class.min_nodes(), "{class} needs n >= {}", class.min_nodes());
    let mut scenario = random_correct_scenario(seed, n);
    scenario.name = format!("{class}-n{n}-seed{seed}");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    match class {
        BugClass::Disagreement => {
            let node = NodeId::new(rng.gen_range(1..=n));
            let value = loop {
                let v = random_value(&mut rng, true);
                if v != scenario.decision {
                    break v;
                }
            };
            scenario.bug = Bug::Disagreement { node, value };
        }
        BugClass::InvalidDecision => {
            let value = loop {
                let mut v = vec![0u8; 16];
                rng.fill(&mut v[..]);
                let proposed = scenario.proposals.values().any(|ps| ps.contains(&v));
                if !proposed {
                    break v;
                }
            };
            scenario.bug = Bug::InvalidDecision { value };
        }
        BugClass::DuplicateId => {
            let node = NodeId::new(rng.gen_range(2..=n));
            let id = loop {
                let candidate = NodeId::new(rng.gen_range(2..=n));
                if candidate != node {
                    break candidate;
                }
            };
            scenario.bug = Bug::DuplicateId { node, id };
            scenario.rounds = 0;
        }
        BugClass::TreeCycle => {
            scenario.bug = Bug::TreeCycle;
            scenario.rounds = 0;
        }
        BugClass::TreeForest => {
            scenario.bug = Bug::TreeForest;
            scenario.rounds = 0;
        }
        BugClass::TreeOmitNode => {
            // Omission targets a leaf of the tree the builder will produce.
            let built = build_scenario_tree(&scenario)?;
            let leaves: Vec<NodeId> = built
                .inputs
                .values()
                .filter(|t| t.children.is_empty() && t.id != built.root)
                .map(|t| t.id)
                .collect();
            let node = leaves[rng.gen_range(0..leaves.len())];
            scenario.bug = Bug::TreeOmitNode { node };
            scenario.rounds = 0;
        }
    }
    Ok(scenario)
}

/// Aggregate outcome of a suite batch.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub runs: u64,
    /// Runs whose per-property classifications matched expectations.
    pub ok_runs: u64,
    pub signal_total: u64,
    pub max_combined_bytes: u64,
    pub max_message_bytes: u64,
    /// Descriptions of the first few mismatching runs.
    pub failures: Vec<String>,
}

impl SuiteOutcome {
    fn new(name: impl Into<String>) -> SuiteOutcome {
        SuiteOutcome {
            name: name.into(),
            runs: 0,
            ok_runs: 0,
            signal_total: 0,
            max_combined_bytes: 0,
            max_message_bytes: 0,
            failures: vec![],
        }
    }

    pub fn ok(&self) -> bool {
        self.runs > 0 && self.runs == self.ok_runs
    }

    fn absorb(&mut self, report: &Report, expectation_errors: Vec<String>) {
        self.runs += 1;
        self.signal_total += report.signals.len() as u64;
        self.max_combined_bytes = self.max_combined_bytes.max(report.meter.max_combined_bytes);
        self.max_message_bytes = self.max_message_bytes.max(report.meter.max_message_bytes);
        if expectation_errors.is_empty() {
            self.ok_runs += 1;
        } else if self.failures.len() < 8 {
            self.failures.extend(expectation_errors.into_iter().take(2));
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "suite {}: runs={} ok={} signals={} max-combined-bytes={} max-message-bytes={}\n",
            self.name,
            self.runs,
            self.ok_runs,
            self.signal_total,
            self.max_combined_bytes,
            self.max_message_bytes
        );
        for failure in &self.failures {
            out.push_str(&format!("  failure: {failure}\n"));
        }
        out.push_str(&format!(
            "  verdict {}\n",
            if self.ok() { "ok" } else { "FALSIFIED" }
        ));
        out
    }
}

/// Compares a report against "bug class X and nothing else": the perturbed
/// property must classify true-alarm, every other property clean-pass.
fn expect_exactly(report: &Report, perturbed: Option<Property>) -> Vec<String> {
    let mut errors = vec![];
    if !report.quiescent {
        errors.push(format!("{}: run did not quiesce", report.scenario));
    }
    for property in Property::ALL {
        let got = report.classification(property);
        let want = if Some(property) == perturbed {
            Classification::TrueAlarm
        } else {
            Classification::CleanPass
        };
        if got != want {
            errors.push(format!(
                "{}: {property} classified {got}, expected {want}",
                report.scenario
            ));
        }
    }
    errors
}

/// Correct runs: no node may signal anything.
pub fn run_completeness(n: u64, iters: u64, seed: u64, opts: RunOptions) -> SuiteOutcome {
    let mut outcome = SuiteOutcome::new(format!("completeness-n{n}"));
    for i in 0..iters {
        let scenario = random_correct_scenario(derive_seed(seed, 100 + i), n);
        match execute(&scenario, opts) {
            Ok(run) => {
                let mut errors = expect_exactly(&run.report, None);
                if !run.report.signals.is_empty() {
                    errors.push(format!(
                        "{}: {} unexpected signals",
                        scenario.name,
                        run.report.signals.len()
                    ));
                }
                outcome.absorb(&run.report, errors);
            }
            Err(err) => {
                outcome.runs += 1;
                outcome.failures.push(format!("{}: {err}", scenario.name));
            }
        }
    }
    outcome
}

/// Bug-injected runs: the perturbed property must raise a true alarm and
/// nothing else may move.
pub fn run_soundness(
    n: u64,
    iters: u64,
    seed: u64,
    classes: &[BugClass],
    opts: RunOptions,
) -> SuiteOutcome {
    let mut outcome = SuiteOutcome::new(format!("soundness-n{n}"));
    for i in 0..iters {
        let class = classes[(i % classes.len() as u64) as usize];
        let scenario = match random_bug_scenario(derive_seed(seed, 200 + i), n, class) {
            Ok(s) => s,
            Err(err) => {
                outcome.runs += 1;
                outcome.failures.push(format!("generation failed: {err}"));
                continue;
            }
        };
        match execute(&scenario, opts) {
            Ok(run) => {
                let errors = expect_exactly(&run.report, Some(class.property()));
                outcome.absorb(&run.report, errors);
            }
            Err(err) => {
                outcome.runs += 1;
                outcome.failures.push(format!("{}: {err}", scenario.name));
            }
        }
    }
    outcome
}

/// Valid random trees (initialization only): zero signals expected.
pub fn run_structure_valid(iters: u64, max_n: u64, seed: u64, opts: RunOptions) -> SuiteOutcome {
    let mut outcome = SuiteOutcome::new("structure-valid");
    for i in 0..iters {
        let item_seed = derive_seed(seed, 300 + i);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(item_seed, 4));
        let n = rng.gen_range(1..=max_n);
        let mut scenario = random_correct_scenario(item_seed, n);
        scenario.rounds = 0;
        match execute(&scenario, opts) {
            Ok(run) => {
                let mut errors = expect_exactly(&run.report, None);
                if !run.report.signals.is_empty() {
                    errors.push(format!("{}: unexpected signals", scenario.name));
                }
                outcome.absorb(&run.report, errors);
            }
            Err(err) => {
                outcome.runs += 1;
                outcome.failures.push(format!("{}: {err}", scenario.name));
            }
        }
    }
    outcome
}

/// Randomized defect instances of one class: at least one node must signal
/// the perturbed property, and only that property.
pub fn run_structure_defects(
    class: BugClass,
    iters: u64,
    max_n: u64,
    seed: u64,
    opts: RunOptions,
) -> SuiteOutcome {
    let mut outcome = SuiteOutcome::new(format!("defect-{class}"));
    let floor = class.min_nodes();
    for i in 0..iters {
        let item_seed = derive_seed(seed, 400 + i);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(item_seed, 4));
        let n = rng.gen_range(floor..=max_n.max(floor));
        match random_bug_scenario(item_seed, n, class)
            .and_then(|scenario| execute(&scenario, opts))
        {
            Ok(run) => {
                let errors = expect_exactly(&run.report, Some(class.property()));
                outcome.absorb(&run.report, errors);
            }
            Err(err) => {
                outcome.runs += 1;
                outcome.failures.push(format!("{err}"));
            }
        }
    }
    outcome
}

fn varint_len(mut v: u64) -> u64 {
    let mut len = 1;
    while v >= 0x80 {
        v >>= 7;
        len += 1;
    }
    len
}

/// Measured wire sizes for one node count.
#[derive(Clone, Debug, Serialize)]
pub struct EfficiencyRow {
    pub n: u64,
    /// Max encoded combined-message bytes with an 8-byte raw decision.
    pub combined_raw_bytes: u64,
    /// Max encoded combined-message bytes with long decisions at width 32.
    pub combined_digest_bytes: u64,
    /// Largest per-node byte total in the deterministic uniqueness round.
    pub uniqueness_node_bytes: u64,
    /// The exact size the batched evaluation is expected to cost per node.
    pub uniqueness_expected_bytes: u64,
    /// Messages sent in the consensus round (expected: n - 1).
    pub round_messages: u64,
}

/// Runs fixed-value efficiency scenarios and reports measured sizes.
pub fn run_efficiency(ns: &[u64], seed: u64) -> Result<Vec<EfficiencyRow>, ScenarioError> {
    let opts = RunOptions {
        mode: UniquenessMode::Deterministic,
        digest_width: DigestWidth::W32,
    };
    let mut rows = vec![];
    for &n in ns {
        let mut scenario = random_correct_scenario(derive_seed(seed, 500 + n), n);
        scenario.name = format!("efficiency-raw-n{n}");
        scenario.decision = b"decide01".to_vec(); // exactly the raw cap
        scenario.proposals = BTreeMap::new();
        scenario.rounds = 1;
        let run = execute(&scenario, opts)?;
        let m = meter(&run.trace);
        let combined_raw_bytes = m.max_combined_bytes();
        let uniqueness_node_bytes = run.report.meter.uniqueness_max_node_bytes;
        let round_messages = m.consensus_round_messages(0);

        let mut long = random_correct_scenario(derive_seed(seed, 600 + n), n);
        long.name = format!("efficiency-digest-n{n}");
        long.decision = b"a decision value far beyond the raw-size cap".to_vec();
        long.proposals = BTreeMap::new();
        long.rounds = 1;
        let run_long = execute(&long, opts)?;
        let combined_digest_bytes = meter(&run_long.trace).max_combined_bytes();

        rows.push(EfficiencyRow {
            n,
            combined_raw_bytes,
            combined_digest_bytes,
            uniqueness_node_bytes,
            uniqueness_expected_bytes: 1 + varint_len(n + 1) + 16 * (n + 1),
            round_messages,
        });
    }
    Ok(rows)
}

/// Fail-stop sweep at fixed `n`: for every failure count `f`, nodes
/// `n-f+1..=n` die between round 0 and round 1, the tree is rebuilt, and
/// round 1 must classify correctly over the survivors.
pub fn run_failures(n: u64, seed: u64, opts: RunOptions) -> SuiteOutcome {
    let mut outcome = SuiteOutcome::new(format!("failures-n{n}"));
    for f in 1..n {
        let survivors = n - f;
        for variant in ["correct", "disagreement", "invalid-decision"] {
            if variant == "disagreement" && survivors < 2 {
                continue;
            }
            let item_seed = derive_seed(seed, 700 + f * 8 + variant.len() as u64);
            let mut scenario = random_correct_scenario(item_seed, n);
            scenario.name = format!("failures-n{n}-f{f}-{variant}");
            scenario.rounds = 2;
            // The decision's proposer must survive: declare node 1 a
            // proposer and strip proposals from doomed nodes so the
            // restricted validity witness cannot die with them.
            scenario.proposals = BTreeMap::from([(
                NodeId::new(1),
                vec![scenario.decision.clone()],
            )]);
            let fail_at = round_time(&scenario.sim, 0) + round_gap(&scenario.sim) / 2;
            scenario.sim.fault_schedule = (survivors + 1..=n)
                .map(|x| (fail_at, NodeId::new(x)))
                .collect();
            let perturbed = match variant {
                "disagreement" => {
                    scenario.bug = Bug::Disagreement {
                        node: NodeId::new(2),
                        value: b"deviant!".to_vec(),
                    };
                    Some(Property::Agreement)
                }
                "invalid-decision" => {
                    scenario.bug = Bug::InvalidDecision {
                        value: b"unproposed-anywhere".to_vec(),
                    };
                    Some(Property::Validity)
                }
                _ => None,
            };
            match execute(&scenario, opts) {
                Ok(run) => {
                    let mut errors = expect_exactly(&run.report, perturbed);
                    for round in &run.report.rounds {
                        if !round.completed {
                            errors.push(format!(
                                "{}: round {} did not complete",
                                scenario.name, round.round
                            ));
                        }
                    }
                    if let Some(last) = run.report.rounds.last() {
                        if last.completed && last.alive.len() as u64 != survivors {
                            errors.push(format!(
                                "{}: round 1 saw {} alive, expected {survivors}",
                                scenario.name,
                                last.alive.len()
                            ));
                        }
                    }
                    // One message per alive non-root node, none from the root.
                    for &(round, msgs, alive) in &run.report.meter.consensus_rounds {
                        if msgs != alive - 1 {
                            errors.push(format!(
                                "{}: round {round} sent {msgs} messages for {alive} alive nodes",
                                scenario.name
                            ));
                        }
                    }
                    outcome.absorb(&run.report, errors);
                }
                Err(err) => {
                    outcome.runs += 1;
                    outcome.failures.push(format!("{}: {err}", scenario.name));
                }
            }
        }
    }
    outcome
}

/// One visibility-gap witness run: the report plus the checks that make it
/// a witness.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessOutcome {
    pub name: String,
    pub ok: bool,
    pub detail: String,
    pub report: Report,
}

/// The sole proposer of the decided value fails before the round: the root
/// must signal a validity error (a true alarm under the restricted
/// definitions) even though the unrestricted predicate holds.
pub fn witness_validity_gap(seed: u64, opts: RunOptions) -> Result<WitnessOutcome, ScenarioError> {
    let n = 4;
    let mut scenario = random_correct_scenario(derive_seed(seed, 800), n);
    scenario.name = "witness-validity-gap".into();
    scenario.rounds = 1;
    scenario.proposals = BTreeMap::from([(
        NodeId::new(n),
        vec![scenario.decision.clone()],
    )]);
    scenario.sim.fault_schedule = vec![(round_time(&scenario.sim, 0) / 2, NodeId::new(n))];
    let run = execute(&scenario, opts)?;
    let report = run.report;
    let round = &report.rounds[0];
    let mut problems = vec![];
    if !report.quiescent {
        problems.push("run did not quiesce".to_string());
    }
    if !round.completed {
        problems.push("round 0 did not complete".to_string());
    }
    if !report.unrestricted_validity {
        problems.push("unrestricted validity should hold (the proposer existed)".into());
    }
    if round.validity_holds {
        problems.push("restricted validity should be violated (proposer failed)".into());
    }
    if report.classification(Property::Validity) != Classification::TrueAlarm {
        problems.push(format!(
            "validity classified {}, expected true-alarm",
            report.classification(Property::Validity)
        ));
    }
    if report.classification(Property::Agreement) != Classification::CleanPass {
        problems.push("agreement should stay clean".into());
    }
    Ok(WitnessOutcome {
        name: scenario.name,
        ok: problems.is_empty(),
        detail: if problems.is_empty() {
            "root signalled validity despite the unrestricted predicate holding".into()
        } else {
            problems.join("; ")
        },
        report,
    })
}

/// The sole deviant decider fails before the round: no agreement error is
/// signalled (clean under the restricted definitions) even though the
/// unrestricted predicate is violated.
pub fn witness_agreement_gap(
    seed: u64,
    opts: RunOptions,
) -> Result<WitnessOutcome, ScenarioError> {
    let n = 4;
    let mut scenario = random_correct_scenario(derive_seed(seed, 900), n);
    scenario.name = "witness-agreement-gap".into();
    scenario.rounds = 1;
    scenario.proposals = BTreeMap::from([(
        NodeId::new(1),
        vec![scenario.decision.clone()],
    )]);
    scenario.bug = Bug::Disagreement {
        node: NodeId::new(n),
        value: b"hidden-deviation".to_vec(),
    };
    scenario.sim.fault_schedule = vec![(round_time(&scenario.sim, 0) / 2, NodeId::new(n))];
    let run = execute(&scenario, opts)?;
    let report = run.report;
    let round = &report.rounds[0];
    let mut problems = vec![];
    if !report.quiescent {
        problems.push("run did not quiesce".to_string());
    }
    if !round.completed {
        problems.push("round 0 did not complete".to_string());
    }
    if report.unrestricted_agreement {
        problems.push("unrestricted agreement should be violated (deviant existed)".into());
    }
    if !round.agreement_holds {
        problems.push("restricted agreement should hold (deviant failed)".into());
    }
    if !report.signals.is_empty() {
        problems.push(format!("{} unexpected signals", report.signals.len()));
    }
    if report.classification(Property::Agreement) != Classification::CleanPass {
        problems.push(format!(
            "agreement classified {}, expected clean-pass",
            report.classification(Property::Agreement)
        ));
    }
    Ok(WitnessOutcome {
        name: scenario.name,
        ok: problems.is_empty(),
        detail: if problems.is_empty() {
            "no agreement error despite the unrestricted predicate being violated".into()
        } else {
            problems.join("; ")
        },
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> RunOptions {
        RunOptions::default()
    }

    #[test]
    fn completeness_smoke() {
        let outcome = run_completeness(4, 10, 42, opts());
        assert!(outcome.ok(), "{:?}", outcome.failures);
        assert_eq!(outcome.signal_total, 0);
    }

    #[test]
    fn soundness_smoke_covers_every_class() {
        let outcome = run_soundness(5, 12, 43, &BugClass::ALL, opts());
        assert!(outcome.ok(), "{:?}", outcome.failures);
    }

    #[test]
    fn structure_suites_smoke() {
        let valid = run_structure_valid(8, 16, 44, opts());
        assert!(valid.ok(), "{:?}", valid.failures);
        for class in [BugClass::TreeCycle, BugClass::TreeForest, BugClass::TreeOmitNode] {
            let defect = run_structure_defects(class, 6, 16, 45, opts());
            assert!(defect.ok(), "{class}: {:?}", defect.failures);
        }
    }

    #[test]
    fn failures_smoke() {
        let outcome = run_failures(4, 46, opts());
        assert!(outcome.ok(), "{:?}", outcome.failures);
    }

    #[test]
    fn witnesses_smoke() {
        let v = witness_validity_gap(47, opts()).unwrap();
        assert!(v.ok, "{}", v.detail);
        let a = witness_agreement_gap(48, opts()).unwrap();
        assert!(a.ok, "{}", a.detail);
    }

    #[test]
    fn soundness_and_completeness_hold_at_larger_scale() {
        let sound = run_soundness(256, 4, 51, &[BugClass::Disagreement], opts());
        assert!(sound.ok(), "{:?}", sound.failures);
        let complete = run_completeness(256, 4, 52, opts());
        assert!(complete.ok(), "{:?}", complete.failures);
    }

    #[test]
    fn root_random_mode_smoke() {
        let rr = RunOptions {
            mode: UniquenessMode::RootRandom,
            digest_width: DigestWidth::W32,
        };
        let sound = run_soundness(6, 6, 49, &[BugClass::DuplicateId], rr);
        assert!(sound.ok(), "{:?}", sound.failures);
        let complete = run_completeness(6, 6, 50, rr);
        assert!(complete.ok(), "{:?}", complete.failures);
    }
}
