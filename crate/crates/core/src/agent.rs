//! The per-node certification agent.
//!
//! Each node runs one agent as a single-threaded event handler. The agent
//! receives tree assignments, certification messages, implementation
//! inputs, failure notices and timer expiries, and emits message sends,
//! node-local error signals, timer requests and failure suspicions. Agents
//! share nothing and interact only through `CertMessage`s.
//!
//! Initialization runs the structure round and then the unique-ID round
//! over a freshly assigned tree. A failure notice aborts whatever round is
//! in flight; the rebuild assignment that follows re-certifies structure
//! only, since IDs do not change when nodes fail. Consensus rounds run
//! only over a tree whose structure checks passed locally.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::consensus::{certify_consensus, ChildCombined, ConsensusInput};
use crate::digest::DigestWidth;
use crate::field::{field_mul_fold, FieldElement};
use crate::structure::structure_check_local;
use crate::types::{ErrorKind, ErrorSignal, NodeId, TreeInput};
use crate::uniqueness::{
    check_id_list, differing_points, evaluation_points, successor, EqualityRoundState,
    SetEqPairs, UniquenessMode,
};
use crate::wire::{CertMessage, PointsMsg, SetEqMsg, StructureMsg};

/// Which certification activity a message or completion belongs to,
/// within one tree epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Structure,
    Uniqueness,
    Consensus(u64),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Structure => f.write_str("structure"),
            Slot::Uniqueness => f.write_str("uniqueness"),
            Slot::Consensus(round) => write!(f, "consensus:{round}"),
        }
    }
}

impl Serialize for Slot {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Events delivered to an agent, one at a time.
#[derive(Clone, Debug)]
pub enum Event {
    /// A (re)built tree for `epoch`. `run_uniqueness` is set only for the
    /// initial build; rebuilds after failures re-certify structure alone.
    TreeAssign {
        epoch: u64,
        input: TreeInput,
        height: u64,
        run_uniqueness: bool,
    },
    /// A certification message from another agent.
    Message {
        from: NodeId,
        epoch: u64,
        slot: Slot,
        msg: CertMessage,
    },
    /// The local implementation invoking a certification round.
    Input { round: u64, input: ConsensusInput },
    /// The failure detector announcing the current set of failed nodes.
    FailureNotice { failed: Vec<NodeId> },
    /// A previously requested timer fired.
    Timeout { token: u64 },
}

/// An outgoing message: destination address plus the epoch/slot envelope
/// the simulator stamps on the wire bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Send {
    pub to: NodeId,
    pub epoch: u64,
    pub slot: Slot,
    pub msg: CertMessage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimerRequest {
    pub token: u64,
    pub delay: u64,
}

/// Everything an agent emits while handling one event.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub sends: Vec<Send>,
    pub signals: Vec<ErrorSignal>,
    pub timers: Vec<TimerRequest>,
    /// Children that missed the round deadline and are suspected failed.
    pub suspects: Vec<NodeId>,
    /// Rounds this node finished during the event, tagged (epoch, slot).
    pub completed: Vec<(u64, Slot)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    AwaitingTree,
    StructureRound,
    UniquenessRound,
    ConsensusRound(u64),
    Idle,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::AwaitingTree => "awaiting-tree",
            Phase::StructureRound => "structure-round",
            Phase::UniquenessRound => "uniqueness-round",
            Phase::ConsensusRound(_) => "consensus-round",
            Phase::Idle => "idle",
        }
    }
}

/// Static agent configuration shared by every node in a run.
#[derive(Clone, Copy, Debug)]
pub struct AgentConfig {
    pub mode: UniquenessMode,
    pub digest_width: DigestWidth,
    /// Upper bound on one-way message delay, used for round deadlines.
    pub max_delay: u64,
}

struct RoundCtx {
    round: u64,
    input: ConsensusInput,
}

/// Per-node certification agent state machine.
pub struct Agent {
    id: NodeId,
    cfg: AgentConfig,
    epoch: u64,
    phase: Phase,
    tree: Option<TreeInput>,
    height: u64,
    structure_ok: bool,
    id_list_ok: bool,
    run_uniqueness: bool,
    points: Option<Vec<FieldElement>>,
    inbox: BTreeMap<(u64, Slot), BTreeMap<NodeId, CertMessage>>,
    pending_inputs: VecDeque<(u64, ConsensusInput)>,
    current_round: Option<RoundCtx>,
    deadline_token: Option<u64>,
    next_token: u64,
    rng: ChaCha8Rng,
}

impl Agent {
    /// `rng_seed` must derive deterministically from the scenario seed so
    /// that runs replay bit for bit.
    pub fn new(id: NodeId, cfg: AgentConfig, rng_seed: u64) -> Agent {
        Agent {
            id,
            cfg,
            epoch: 0,
            phase: Phase::AwaitingTree,
            tree: None,
            height: 0,
            structure_ok: false,
            id_list_ok: false,
            run_uniqueness: false,
            points: None,
            inbox: BTreeMap::new(),
            pending_inputs: VecDeque::new(),
            current_round: None,
            deadline_token: None,
            next_token: 0,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn is_idle(&self) -> bool {
        self.phase == Phase::Idle && self.pending_inputs.is_empty()
    }

    /// An agent that was never handed a tree and has nothing queued is
    /// dormant (an omitted node, for instance), not stuck.
    pub fn is_dormant(&self) -> bool {
        self.phase == Phase::AwaitingTree && self.pending_inputs.is_empty()
    }

    pub fn phase_name(&self) -> &'static str {
        self.phase.name()
    }

    /// When the agent is parked mid-round, names the phase and the
    /// children it is still waiting on.
    pub fn stuck_info(&self) -> Option<(String, Vec<NodeId>)> {
        let slot = match self.phase {
            Phase::StructureRound => Slot::Structure,
            Phase::UniquenessRound => Slot::Uniqueness,
            Phase::ConsensusRound(round) => Slot::Consensus(round),
            Phase::AwaitingTree | Phase::Idle => return None,
        };
        Some((self.phase.name().to_string(), self.missing_children(slot)))
    }

    pub fn handle(&mut self, event: Event, _now: u64) -> Output {
        let mut out = Output::default();
        match event {
            Event::TreeAssign {
                epoch,
                input,
                height,
                run_uniqueness,
            } => self.on_tree_assign(epoch, input, height, run_uniqueness, &mut out),
            Event::Message {
                from,
                epoch,
                slot,
                msg,
            } => {
                if epoch >= self.epoch {
                    let entry = self.inbox.entry((epoch, slot)).or_default();
                    debug_assert!(!entry.contains_key(&from), "duplicate sender in a slot");
                    entry.insert(from, msg);
                }
            }
            Event::Input { round, input } => {
                self.pending_inputs.push_back((round, input));
            }
            Event::FailureNotice { .. } => {
                // Abort whatever is in flight; no verdict is emitted for an
                // aborted round. The rebuild assignment follows separately.
                self.current_round = None;
                self.deadline_token = None;
                self.points = None;
                let epoch = self.epoch;
                self.inbox.retain(|(e, _), _| *e > epoch);
                if self.tree.is_some() {
                    self.phase = Phase::AwaitingTree;
                }
            }
            Event::Timeout { token } => self.on_timeout(token, &mut out),
        }
        self.pump(&mut out);
        out
    }

    fn on_tree_assign(
        &mut self,
        epoch: u64,
        input: TreeInput,
        height: u64,
        run_uniqueness: bool,
        out: &mut Output,
    ) {
        debug_assert!(epoch >= self.epoch);
        self.epoch = epoch;
        self.inbox.retain(|(e, _), _| *e >= epoch);
        self.height = height;
        self.run_uniqueness = run_uniqueness;
        self.structure_ok = true;
        self.id_list_ok = true;
        self.points = None;
        self.current_round = None;
        self.deadline_token = None;
        self.phase = Phase::StructureRound;

        if let Some(violation) = input.local_violation() {
            out.signals.push(ErrorSignal::new(
                self.id,
                0,
                ErrorKind::Structure,
                format!("epoch {epoch}: local input check failed: {violation}"),
            ));
            self.structure_ok = false;
        }
        if !check_id_list(&input.id_list) {
            out.signals.push(ErrorSignal::new(
                self.id,
                0,
                ErrorKind::Uniqueness,
                format!("epoch {epoch}: id list is empty or not strictly increasing"),
            ));
            self.id_list_ok = false;
        }
        self.tree = Some(input);
    }

    fn on_timeout(&mut self, token: u64, out: &mut Output) {
        if self.deadline_token != Some(token) {
            return; // stale timer from a finished or aborted round
        }
        self.deadline_token = None;
        if let Phase::ConsensusRound(round) = self.phase {
            out.suspects = self.missing_children(Slot::Consensus(round));
        }
    }

    fn missing_children(&self, slot: Slot) -> Vec<NodeId> {
        let Some(tree) = self.tree.as_ref() else {
            return vec![];
        };
        let received = self.inbox.get(&(self.epoch, slot));
        tree.children
            .iter()
            .copied()
            .filter(|c| received.is_none_or(|m| !m.contains_key(c)))
            .collect()
    }

    fn children_ready(&self, slot: Slot) -> bool {
        self.missing_children(slot).is_empty()
    }

    fn take_child_msg(&mut self, slot: Slot, from: NodeId) -> Option<CertMessage> {
        self.inbox
            .get_mut(&(self.epoch, slot))
            .and_then(|m| m.remove(&from))
    }

    fn pump(&mut self, out: &mut Output) {
        loop {
            match self.phase {
                Phase::AwaitingTree => return,
                Phase::StructureRound => {
                    if !self.children_ready(Slot::Structure) {
                        return;
                    }
                    self.structure_step(out);
                }
                Phase::UniquenessRound => {
                    if self.points.is_none() {
                        if !self.try_absorb_points(out) {
                            return;
                        }
                        continue;
                    }
                    if !self.children_ready(Slot::Uniqueness) {
                        return;
                    }
                    self.uniqueness_step(out);
                }
                Phase::ConsensusRound(round) => {
                    if !self.children_ready(Slot::Consensus(round)) {
                        return;
                    }
                    self.consensus_step(round, out);
                }
                Phase::Idle => {
                    if self.pending_inputs.is_empty() {
                        return;
                    }
                    self.start_consensus_round(out);
                }
            }
        }
    }

    fn structure_step(&mut self, out: &mut Output) {
        let tree = self.tree.clone().expect("structure round requires a tree");
        let msgs: Vec<StructureMsg> = tree
            .children
            .iter()
            .map(|&c| match self.take_child_msg(Slot::Structure, c) {
                Some(CertMessage::Structure(m)) => m,
                other => {
                    debug_assert!(false, "expected structure message, got {other:?}");
                    StructureMsg {
                        claimed_root: tree.root_id,
                        sender_depth: tree.depth + 1,
                        subtree_count: 0,
                    }
                }
            })
            .collect();

        let (outgoing, verdict) = structure_check_local(self.id, self.epoch, &tree, &msgs);
        if let Some(signal) = verdict.error {
            out.signals.push(signal);
        }
        if !verdict.pass {
            self.structure_ok = false;
        }
        if let Some(msg) = outgoing {
            out.sends.push(Send {
                to: tree.parent_id.expect("non-root has a parent"),
                epoch: self.epoch,
                slot: Slot::Structure,
                msg,
            });
        }
        out.completed.push((self.epoch, Slot::Structure));

        if self.run_uniqueness && self.id_list_ok {
            self.phase = Phase::UniquenessRound;
            self.start_uniqueness(out);
        } else {
            self.phase = Phase::Idle;
        }
    }

    fn start_uniqueness(&mut self, out: &mut Output) {
        let tree = self.tree.as_ref().expect("uniqueness round requires a tree");
        match self.cfg.mode {
            UniquenessMode::Deterministic => {
                self.points = Some(evaluation_points(
                    UniquenessMode::Deterministic,
                    tree.n(),
                    &mut self.rng,
                ));
            }
            UniquenessMode::RootRandom => {
                if tree.is_root() {
                    let points =
                        evaluation_points(UniquenessMode::RootRandom, tree.n(), &mut self.rng);
                    let children = tree.children.clone();
                    for child in children {
                        out.sends.push(Send {
                            to: child,
                            epoch: self.epoch,
                            slot: Slot::Uniqueness,
                            msg: CertMessage::Points(PointsMsg {
                                points: points.clone(),
                            }),
                        });
                    }
                    self.points = Some(points);
                }
                // Non-roots wait for the down-pass from their parent.
            }
        }
    }

    /// Root-random down-pass: absorb the parent's points and forward them.
    fn try_absorb_points(&mut self, out: &mut Output) -> bool {
        let tree = self.tree.clone().expect("uniqueness round requires a tree");
        let Some(parent) = tree.parent_id else {
            return false; // the root draws its own points
        };
        match self.take_child_msg(Slot::Uniqueness, parent) {
            Some(CertMessage::Points(m)) => {
                for &child in &tree.children {
                    out.sends.push(Send {
                        to: child,
                        epoch: self.epoch,
                        slot: Slot::Uniqueness,
                        msg: CertMessage::Points(m.clone()),
                    });
                }
                self.points = Some(m.points);
                true
            }
            Some(other) => {
                debug_assert!(false, "expected points message, got {other:?}");
                false
            }
            None => false,
        }
    }

    fn uniqueness_step(&mut self, out: &mut Output) {
        let tree = self.tree.clone().expect("uniqueness round requires a tree");
        let points = self.points.take().expect("points fixed before evaluation");
        let child_pairs: Vec<SetEqPairs> = tree
            .children
            .iter()
            .map(|&c| match self.take_child_msg(Slot::Uniqueness, c) {
                Some(CertMessage::SetEq(SetEqMsg { pairs })) => pairs,
                other => {
                    debug_assert!(false, "expected set-eq message, got {other:?}");
                    vec![]
                }
            })
            .collect();

        let pairs: SetEqPairs = match successor(tree.id, &tree.id_list) {
            Ok(succ) => {
                EqualityRoundState::new(points.clone(), tree.id, succ).evaluate(&child_pairs)
            }
            Err(err) => {
                // The claimed ID is not even in the list: signal locally and
                // participate with neutral factors so the round still flows.
                out.signals.push(ErrorSignal::new(
                    self.id,
                    0,
                    ErrorKind::Uniqueness,
                    format!("epoch {}: {err}", self.epoch),
                ));
                points
                    .iter()
                    .enumerate()
                    .map(|(i, _)| {
                        let at: Vec<(FieldElement, FieldElement)> = child_pairs
                            .iter()
                            .map(|ps| {
                                ps.get(i)
                                    .copied()
                                    .unwrap_or((FieldElement::ONE, FieldElement::ONE))
                            })
                            .collect();
                        (
                            field_mul_fold(FieldElement::ONE, at.iter().map(|p| p.0)),
                            field_mul_fold(FieldElement::ONE, at.iter().map(|p| p.1)),
                        )
                    })
                    .collect()
            }
        };

        if tree.is_root() {
            // A verdict only makes sense over a tree whose structure checks
            // passed here at the root; without the span guarantee the
            // fingerprint compares the wrong multi-sets.
            if self.structure_ok {
                let bad = differing_points(&pairs);
                if !bad.is_empty() {
                    out.signals.push(ErrorSignal::new(
                        self.id,
                        0,
                        ErrorKind::Uniqueness,
                        format!(
                            "epoch {}: id and successor multi-sets differ at point indices {bad:?}",
                            self.epoch
                        ),
                    ));
                }
            }
        } else {
            out.sends.push(Send {
                to: tree.parent_id.expect("non-root has a parent"),
                epoch: self.epoch,
                slot: Slot::Uniqueness,
                msg: CertMessage::SetEq(SetEqMsg { pairs }),
            });
        }
        out.completed.push((self.epoch, Slot::Uniqueness));
        self.phase = Phase::Idle;
    }

    fn start_consensus_round(&mut self, out: &mut Output) {
        let (round, input) = self
            .pending_inputs
            .pop_front()
            .expect("caller checked the queue");
        if !self.structure_ok {
            // No locally certified tree: sit the round out. Scenario design
            // keeps consensus rounds off trees that fail certification.
            return;
        }
        let tree = self.tree.as_ref().expect("idle phase requires a tree");
        let has_children = !tree.children.is_empty();
        self.current_round = Some(RoundCtx { round, input });
        self.phase = Phase::ConsensusRound(round);
        if has_children {
            let token = self.next_token;
            self.next_token += 1;
            self.deadline_token = Some(token);
            out.timers.push(TimerRequest {
                token,
                delay: 4 * self.cfg.max_delay * self.height.max(1),
            });
        }
    }

    fn consensus_step(&mut self, round: u64, out: &mut Output) {
        let tree = self.tree.clone().expect("consensus round requires a tree");
        let ctx = self
            .current_round
            .take()
            .expect("consensus round carries its input");
        debug_assert_eq!(ctx.round, round);

        let children: Vec<ChildCombined> = tree
            .children
            .iter()
            .map(|&c| match self.take_child_msg(Slot::Consensus(round), c) {
                Some(CertMessage::Combined(m)) => ChildCombined {
                    sender: c,
                    decision: m.decision,
                    witness_found: m.witness_found,
                },
                other => {
                    debug_assert!(false, "expected combined message, got {other:?}");
                    ChildCombined {
                        sender: c,
                        decision: crate::digest::WireValue::from_wire_bytes(vec![]),
                        witness_found: false,
                    }
                }
            })
            .collect();

        let (outgoing, errors) = certify_consensus(
            self.id,
            round,
            &ctx.input,
            self.cfg.digest_width,
            &children,
            tree.is_root(),
        );
        out.signals.extend(errors);
        if let Some(msg) = outgoing {
            out.sends.push(Send {
                to: tree.parent_id.expect("non-root has a parent"),
                epoch: self.epoch,
                slot: Slot::Consensus(round),
                msg,
            });
        }
        out.completed.push((self.epoch, Slot::Consensus(round)));
        self.deadline_token = None;
        self.phase = Phase::Idle;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::WireValue;
    use crate::wire::CombinedMsg;

    fn cfg() -> AgentConfig {
        AgentConfig {
            mode: UniquenessMode::Deterministic,
            digest_width: DigestWidth::W32,
            max_delay: 4,
        }
    }

    fn ids(values: &[u64]) -> Vec<NodeId> {
        values.iter().copied().map(NodeId::new).collect()
    }

    fn assign(input: TreeInput, height: u64) -> Event {
        Event::TreeAssign {
            epoch: 0,
            input,
            height,
            run_uniqueness: true,
        }
    }

    fn line_root() -> TreeInput {
        TreeInput {
            id: NodeId::new(1),
            id_list: ids(&[1, 2]),
            root_id: NodeId::new(1),
            parent_id: None,
            children: ids(&[2]),
            depth: 0,
        }
    }

    fn line_leaf() -> TreeInput {
        TreeInput {
            id: NodeId::new(2),
            id_list: ids(&[1, 2]),
            root_id: NodeId::new(1),
            parent_id: Some(NodeId::new(1)),
            children: vec![],
            depth: 1,
        }
    }

    #[test]
    fn singleton_initializes_to_idle_with_no_signals_or_sends() {
        let mut agent = Agent::new(NodeId::new(1), cfg(), 0);
        let input = TreeInput {
            id: NodeId::new(1),
            id_list: ids(&[1]),
            root_id: NodeId::new(1),
            parent_id: None,
            children: vec![],
            depth: 0,
        };
        let out = agent.handle(assign(input, 0), 0);
        assert!(out.sends.is_empty());
        assert!(out.signals.is_empty());
        assert!(agent.is_idle());
    }

    #[test]
    fn leaf_emits_structure_and_set_eq_in_one_step() {
        let mut agent = Agent::new(NodeId::new(2), cfg(), 0);
        let out = agent.handle(assign(line_leaf(), 1), 0);
        let slots: Vec<Slot> = out.sends.iter().map(|s| s.slot).collect();
        assert_eq!(slots, vec![Slot::Structure, Slot::Uniqueness]);
        assert!(out.signals.is_empty());
        assert!(agent.is_idle());
    }

    #[test]
    fn out_of_order_set_eq_is_buffered_until_the_structure_round_ends() {
        let mut root = Agent::new(NodeId::new(1), cfg(), 0);
        root.handle(assign(line_root(), 1), 0);

        let mut leaf = Agent::new(NodeId::new(2), cfg(), 1);
        let leaf_out = leaf.handle(assign(line_leaf(), 1), 0);

        // Deliver the uniqueness message before the structure message.
        let mut sends = leaf_out.sends.clone();
        sends.reverse();
        let first = root.handle(
            Event::Message {
                from: NodeId::new(2),
                epoch: 0,
                slot: sends[0].slot,
                msg: sends[0].msg.clone(),
            },
            1,
        );
        assert!(first.completed.is_empty());

        let second = root.handle(
            Event::Message {
                from: NodeId::new(2),
                epoch: 0,
                slot: sends[1].slot,
                msg: sends[1].msg.clone(),
            },
            2,
        );
        let completed: Vec<Slot> = second.completed.iter().map(|(_, s)| *s).collect();
        assert_eq!(completed, vec![Slot::Structure, Slot::Uniqueness]);
        assert!(second.signals.is_empty());
        assert!(root.is_idle());
    }

    #[test]
    fn consensus_round_deadline_reports_missing_children_as_suspects() {
        let mut root = Agent::new(NodeId::new(1), cfg(), 0);
        root.handle(assign(line_root(), 1), 0);
        // Finish initialization by hand.
        let mut leaf = Agent::new(NodeId::new(2), cfg(), 1);
        for send in leaf.handle(assign(line_leaf(), 1), 0).sends {
            root.handle(
                Event::Message {
                    from: NodeId::new(2),
                    epoch: 0,
                    slot: send.slot,
                    msg: send.msg,
                },
                1,
            );
        }

        let out = root.handle(
            Event::Input {
                round: 0,
                input: ConsensusInput {
                    decision: b"X".to_vec(),
                    proposals: vec![b"X".to_vec()],
                },
            },
            10,
        );
        assert_eq!(out.timers.len(), 1);
        let token = out.timers[0].token;

        // The child never invokes; the deadline names it, and no agreement
        // error is attributed to the silent child.
        let fired = root.handle(Event::Timeout { token }, 50);
        assert_eq!(fired.suspects, ids(&[2]));
        assert!(fired.signals.is_empty());
    }

    #[test]
    fn failure_notice_aborts_the_round_without_a_verdict() {
        let mut root = Agent::new(NodeId::new(1), cfg(), 0);
        root.handle(assign(line_root(), 1), 0);
        let mut leaf = Agent::new(NodeId::new(2), cfg(), 1);
        for send in leaf.handle(assign(line_leaf(), 1), 0).sends {
            root.handle(
                Event::Message {
                    from: NodeId::new(2),
                    epoch: 0,
                    slot: send.slot,
                    msg: send.msg,
                },
                1,
            );
        }
        root.handle(
            Event::Input {
                round: 0,
                input: ConsensusInput {
                    decision: b"X".to_vec(),
                    proposals: vec![b"X".to_vec()],
                },
            },
            10,
        );

        let out = root.handle(
            Event::FailureNotice {
                failed: ids(&[2]),
            },
            20,
        );
        assert!(out.signals.is_empty());
        assert!(out.completed.is_empty());
        assert_eq!(root.phase_name(), "awaiting-tree");

        // The rebuilt singleton tree re-certifies structure only.
        let rebuilt = TreeInput {
            id: NodeId::new(1),
            id_list: ids(&[1]),
            root_id: NodeId::new(1),
            parent_id: None,
            children: vec![],
            depth: 0,
        };
        let out = root.handle(
            Event::TreeAssign {
                epoch: 1,
                input: rebuilt,
                height: 0,
                run_uniqueness: false,
            },
            25,
        );
        assert!(out.signals.is_empty());
        let completed: Vec<Slot> = out.completed.iter().map(|(_, s)| *s).collect();
        assert_eq!(completed, vec![Slot::Structure]);
        assert!(root.is_idle());
    }

    #[test]
    fn inputs_are_discarded_when_the_local_structure_check_failed() {
        let mut agent = Agent::new(NodeId::new(1), cfg(), 0);
        // Root whose id list claims two nodes but whose tree has none.
        let input = TreeInput {
            id: NodeId::new(1),
            id_list: ids(&[1, 2]),
            root_id: NodeId::new(1),
            parent_id: None,
            children: vec![],
            depth: 0,
        };
        let out = agent.handle(assign(input, 0), 0);
        assert!(out.signals.iter().any(|s| s.kind == ErrorKind::Span));

        let out = agent.handle(
            Event::Input {
                round: 0,
                input: ConsensusInput::default(),
            },
            5,
        );
        assert!(out.sends.is_empty());
        assert!(out.completed.is_empty());
        assert!(agent.is_idle());
    }

    #[test]
    fn stale_epoch_messages_are_ignored_after_a_rebuild() {
        let mut root = Agent::new(NodeId::new(1), cfg(), 0);
        root.handle(assign(line_root(), 1), 0);
        root.handle(Event::FailureNotice { failed: ids(&[2]) }, 5);
        let rebuilt = TreeInput {
            id: NodeId::new(1),
            id_list: ids(&[1]),
            root_id: NodeId::new(1),
            parent_id: None,
            children: vec![],
            depth: 0,
        };
        root.handle(
            Event::TreeAssign {
                epoch: 1,
                input: rebuilt,
                height: 0,
                run_uniqueness: false,
            },
            6,
        );
        // A late message from the old epoch must not resurrect anything.
        let out = root.handle(
            Event::Message {
                from: NodeId::new(2),
                epoch: 0,
                slot: Slot::Structure,
                msg: CertMessage::Combined(CombinedMsg {
                    decision: WireValue::from_wire_bytes(vec![]),
                    witness_found: false,
                }),
            },
            7,
        );
        assert!(out.completed.is_empty());
        assert!(root.is_idle());
    }
}
