//! Run reports: signals versus ground truth, classification per certified
//! property, and a meter summary.
//!
//! Classification is mechanical. For each property, the restricted oracle
//! says whether the predicate held (over alive nodes, per completed
//! round), the trace says whether any node signalled it, and the pair maps
//! to clean-pass, true-alarm, false-alarm or missed-violation. The two
//! outcomes that falsify the certifier are false alarms and missed
//! violations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::trace::{meter, Trace};
use crate::types::{ErrorKind, ErrorSignal, NodeId};
use crate::uniqueness::{UniquenessMode, RANDOM_POINT_COUNT};
use crate::workload::{consensus_truth, ids_truth, structure_truth, Prepared, RunOptions, Scenario};

/// The four certified properties a signal can name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Property {
    Structure,
    Uniqueness,
    Agreement,
    Validity,
}

impl Property {
    pub const ALL: [Property; 4] = [
        Property::Structure,
        Property::Uniqueness,
        Property::Agreement,
        Property::Validity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Structure => "structure",
            Property::Uniqueness => "uniqueness",
            Property::Agreement => "agreement",
            Property::Validity => "validity",
        }
    }

    /// Which property a signal kind counts toward.
    pub fn of_kind(kind: ErrorKind) -> Property {
        match kind {
            ErrorKind::Structure | ErrorKind::Span => Property::Structure,
            ErrorKind::Uniqueness => Property::Uniqueness,
            ErrorKind::Agreement => Property::Agreement,
            ErrorKind::Validity => Property::Validity,
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Property {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Outcome of comparing signals against ground truth for one property.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    CleanPass,
    TrueAlarm,
    FalseAlarm,
    MissedViolation,
}

impl Classification {
    /// A larger rank is a worse outcome.
    fn severity(self) -> u8 {
        match self {
            Classification::CleanPass => 0,
            Classification::TrueAlarm => 1,
            Classification::FalseAlarm => 2,
            Classification::MissedViolation => 3,
        }
    }

    pub fn falsifies(self) -> bool {
        matches!(
            self,
            Classification::FalseAlarm | Classification::MissedViolation
        )
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Classification::CleanPass => "clean-pass",
            Classification::TrueAlarm => "true-alarm",
            Classification::FalseAlarm => "false-alarm",
            Classification::MissedViolation => "missed-violation",
        };
        f.write_str(name)
    }
}

/// The mechanical (holds, signalled) -> classification map.
pub fn classify(holds: bool, signalled: bool) -> Classification {
    match (holds, signalled) {
        (true, false) => Classification::CleanPass,
        (false, true) => Classification::TrueAlarm,
        (true, true) => Classification::FalseAlarm,
        (false, false) => Classification::MissedViolation,
    }
}

/// Per-round view of the consensus properties.
#[derive(Clone, Debug, Serialize)]
pub struct RoundOutcome {
    pub round: u64,
    pub completed: bool,
    /// Nodes alive when the round completed at the root.
    pub alive: Vec<NodeId>,
    pub agreement_holds: bool,
    pub validity_holds: bool,
    pub agreement_signals: u64,
    pub validity_signals: u64,
    pub agreement: Option<Classification>,
    pub validity: Option<Classification>,
}

/// Meter highlights for the efficiency claims.
#[derive(Clone, Debug, Default, Serialize)]
pub struct MeterSummary {
    /// `(round, messages sent, alive at completion)` per completed round.
    pub consensus_rounds: Vec<(u64, u64, u64)>,
    pub max_combined_bytes: u64,
    pub max_message_bytes: u64,
    /// Largest per-node byte total in the epoch-0 uniqueness round.
    pub uniqueness_max_node_bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub bug: String,
    pub n: u64,
    pub rounds_scheduled: u64,
    pub quiescent: bool,
    /// How uniqueness evaluation points were chosen for this run.
    pub uniqueness_mode: String,
    /// For the randomized mode: the probability that a duplicate slips
    /// past all drawn points, `(n / Q)^k`. Absent in deterministic mode,
    /// which cannot miss.
    pub uniqueness_miss_bound: Option<f64>,
    pub structure_holds: bool,
    pub uniqueness_holds: bool,
    /// Consensus truth ignoring failures, for surfacing the visibility gap.
    pub unrestricted_agreement: bool,
    pub unrestricted_validity: bool,
    pub rounds: Vec<RoundOutcome>,
    pub classifications: BTreeMap<Property, Classification>,
    pub signals: Vec<ErrorSignal>,
    pub meter: MeterSummary,
    /// True when any property classified as false-alarm or missed-violation.
    pub falsified: bool,
}

/// Derives the report for one executed scenario from its trace.
pub fn build(scenario: &Scenario, prepared: &Prepared, trace: &Trace, opts: RunOptions) -> Report {
    let signals: Vec<ErrorSignal> = trace.signals().cloned().collect();
    let fail_times = trace.fail_times();
    let completions = trace.round_completions();
    let all_nodes: BTreeSet<NodeId> = scenario.sim.node_ids().into_iter().collect();

    let structure_holds = structure_truth(&prepared.trees) && !trace.has_stuck_or_build_errors();
    let uniqueness_holds = ids_truth(&prepared.trees);
    let (unrestricted_agreement, unrestricted_validity) =
        consensus_truth(&prepared.inputs, &all_nodes);

    let mut rounds = Vec::new();
    for round in 0..scenario.rounds {
        let completed_at = completions.get(&round).copied();
        let alive: BTreeSet<NodeId> = match completed_at {
            Some(t) => all_nodes
                .iter()
                .copied()
                .filter(|n| fail_times.get(n).is_none_or(|&ft| ft > t))
                .collect(),
            None => BTreeSet::new(),
        };
        let (agreement_holds, validity_holds) = consensus_truth(&prepared.inputs, &alive);
        let agreement_signals = signals
            .iter()
            .filter(|s| s.kind == ErrorKind::Agreement && s.round == round)
            .count() as u64;
        let validity_signals = signals
            .iter()
            .filter(|s| s.kind == ErrorKind::Validity && s.round == round)
            .count() as u64;
        let completed = completed_at.is_some();
        rounds.push(RoundOutcome {
            round,
            completed,
            alive: alive.into_iter().collect(),
            agreement_holds,
            validity_holds,
            agreement_signals,
            validity_signals,
            agreement: completed.then(|| classify(agreement_holds, agreement_signals > 0)),
            validity: completed.then(|| classify(validity_holds, validity_signals > 0)),
        });
    }

    let mut classifications = BTreeMap::new();
    let signalled =
        |p: Property| signals.iter().any(|s| Property::of_kind(s.kind) == p);
    classifications.insert(
        Property::Structure,
        classify(structure_holds, signalled(Property::Structure)),
    );
    classifications.insert(
        Property::Uniqueness,
        classify(uniqueness_holds, signalled(Property::Uniqueness)),
    );
    // Agreement and validity classify per completed round; the scenario
    // takes the worst outcome. Signals tied to rounds that never completed
    // (aborted by failures) stay visible in the signal list but have no
    // truth to classify against.
    let worst = |pick: fn(&RoundOutcome) -> Option<Classification>| {
        rounds
            .iter()
            .filter_map(pick)
            .max_by_key(|c| c.severity())
            .unwrap_or(Classification::CleanPass)
    };
    classifications.insert(Property::Agreement, worst(|r| r.agreement));
    classifications.insert(Property::Validity, worst(|r| r.validity));

    let m = meter(trace);
    let meter_summary = MeterSummary {
        consensus_rounds: rounds
            .iter()
            .filter(|r| r.completed)
            .map(|r| {
                (
                    r.round,
                    m.consensus_round_messages(r.round),
                    r.alive.len() as u64,
                )
            })
            .collect(),
        max_combined_bytes: m.max_combined_bytes(),
        max_message_bytes: m.max_message_bytes(),
        uniqueness_max_node_bytes: m
            .uniqueness_node_bytes(0)
            .values()
            .copied()
            .max()
            .unwrap_or(0),
    };

    let (uniqueness_mode, uniqueness_miss_bound) = match opts.mode {
        UniquenessMode::Deterministic => ("deterministic".to_string(), None),
        UniquenessMode::RootRandom => {
            let per_point = scenario.sim.n as f64 / crate::field::MODULUS as f64;
            (
                "root-random".to_string(),
                Some(per_point.powi(RANDOM_POINT_COUNT as i32)),
            )
        }
    };

    let falsified = classifications.values().any(|c| c.falsifies());
    Report {
        scenario: scenario.name.clone(),
        bug: scenario.bug.name().to_string(),
        n: scenario.sim.n,
        rounds_scheduled: scenario.rounds,
        quiescent: !trace.has_stuck_or_build_errors(),
        uniqueness_mode,
        uniqueness_miss_bound,
        structure_holds,
        uniqueness_holds,
        unrestricted_agreement,
        unrestricted_validity,
        rounds,
        classifications,
        signals,
        meter: meter_summary,
        falsified,
    }
}

impl Report {
    pub fn classification(&self, property: Property) -> Classification {
        self.classifications[&property]
    }

    /// Stable aligned-text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let hold = |b: bool| if b { "holds" } else { "violated" };
        out.push_str(&format!("scenario {}\n", self.scenario));
        out.push_str(&format!(
            "  bug={} nodes={} rounds={} quiescent={}\n",
            self.bug, self.n, self.rounds_scheduled, self.quiescent
        ));
        out.push_str(&format!(
            "  truth: structure={} uniqueness={} unrestricted: agreement={} validity={}\n",
            hold(self.structure_holds),
            hold(self.uniqueness_holds),
            hold(self.unrestricted_agreement),
            hold(self.unrestricted_validity)
        ));
        match self.uniqueness_miss_bound {
            Some(bound) => out.push_str(&format!(
                "  uniqueness: mode={} miss-bound={bound:e}\n",
                self.uniqueness_mode
            )),
            None => out.push_str(&format!("  uniqueness: mode={}\n", self.uniqueness_mode)),
        }
        for r in &self.rounds {
            if r.completed {
                out.push_str(&format!(
                    "  round {}: completed alive={} agreement={}/{} validity={}/{}\n",
                    r.round,
                    r.alive.len(),
                    hold(r.agreement_holds),
                    r.agreement.expect("completed round classified"),
                    hold(r.validity_holds),
                    r.validity.expect("completed round classified"),
                ));
            } else {
                out.push_str(&format!("  round {}: not completed (aborted or stuck)\n", r.round));
            }
        }
        out.push_str("  classification:\n");
        for (property, class) in &self.classifications {
            out.push_str(&format!("    {:<10} {}\n", property.to_string(), class));
        }
        if self.signals.is_empty() {
            out.push_str("  signals: none\n");
        } else {
            out.push_str(&format!("  signals: {}\n", self.signals.len()));
            for s in &self.signals {
                out.push_str(&format!("    {s}\n"));
            }
        }
        out.push_str(&format!(
            "  meter: max-combined-bytes={} max-message-bytes={} uniqueness-max-node-bytes={}\n",
            self.meter.max_combined_bytes,
            self.meter.max_message_bytes,
            self.meter.uniqueness_max_node_bytes
        ));
        for (round, msgs, alive) in &self.meter.consensus_rounds {
            out.push_str(&format!(
                "  meter: round {round} messages={msgs} alive={alive}\n"
            ));
        }
        out.push_str(&format!(
            "  verdict {}\n",
            if self.falsified { "FALSIFIED" } else { "ok" }
        ));
        out
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_matrix_is_mechanical() {
        assert_eq!(classify(true, false), Classification::CleanPass);
        assert_eq!(classify(false, true), Classification::TrueAlarm);
        assert_eq!(classify(true, true), Classification::FalseAlarm);
        assert_eq!(classify(false, false), Classification::MissedViolation);
    }

    #[test]
    fn falsifying_outcomes_are_false_alarm_and_missed_violation() {
        assert!(!Classification::CleanPass.falsifies());
        assert!(!Classification::TrueAlarm.falsifies());
        assert!(Classification::FalseAlarm.falsifies());
        assert!(Classification::MissedViolation.falsifies());
    }

    #[test]
    fn span_signals_count_toward_the_structure_property() {
        assert_eq!(Property::of_kind(ErrorKind::Span), Property::Structure);
        assert_eq!(
            Property::of_kind(ErrorKind::Structure),
            Property::Structure
        );
        assert_eq!(
            Property::of_kind(ErrorKind::Uniqueness),
            Property::Uniqueness
        );
    }
}
