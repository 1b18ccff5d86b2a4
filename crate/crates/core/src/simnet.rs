//! Deterministic, seeded, partially synchronous message-passing simulator
//! with fail-stop fault injection.
//!
//! The simulator owns one certification agent per node and drives them
//! from a discrete-event queue keyed by `(time, sequence)`, with sequence
//! numbers assigned in generation order so tie-breaking is deterministic.
//! Message delays are drawn uniformly from `[min_delay, max_delay]` with
//! the run's seeded generator; a failed node neither sends nor receives
//! after its fail time. Failure notifications reach every alive agent at
//! `fail_time + max_delay`, modeling a perfect detector under partial
//! synchrony, and each notification is followed by a centrally rebuilt
//! tree for the survivors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentConfig, Event, Output, Slot};
use crate::consensus::ConsensusInput;
use crate::digest::DigestWidth;
use crate::trace::{Trace, TraceEvent, TraceRecord};
use crate::tree::{build_tree, Adjacency, TreePolicy};
use crate::types::{NodeId, TreeInput};
use crate::uniqueness::UniquenessMode;
use crate::wire::CertMessage;

/// Static simulation parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Node count; addresses are `1..=n`.
    pub n: u64,
    pub adjacency: Adjacency,
    pub min_delay: u64,
    pub max_delay: u64,
    /// Fail-stop events as `(time, node)`.
    pub fault_schedule: Vec<(u64, NodeId)>,
    /// Safety net against non-quiescent runs; derived from the schedule
    /// when absent.
    pub time_limit: Option<u64>,
}

impl SimConfig {
    pub fn new(seed: u64, n: u64) -> SimConfig {
        SimConfig {
            seed,
            n,
            adjacency: Adjacency::Complete,
            min_delay: 1,
            max_delay: 4,
            fault_schedule: vec![],
            time_limit: None,
        }
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        (1..=self.n).map(NodeId::new).collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("node count must be at least 1".into());
        }
        if self.min_delay == 0 || self.min_delay > self.max_delay {
            return Err(format!(
                "delays must satisfy 0 < min ({}) <= max ({})",
                self.min_delay, self.max_delay
            ));
        }
        for (time, node) in &self.fault_schedule {
            if node.value() == 0 || node.value() > self.n {
                return Err(format!("fault at t={time} names unknown node {node}"));
            }
        }
        Ok(())
    }
}

/// One scheduled consensus-certification round: every listed node hands
/// its input to its local agent at `time`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputRound {
    pub time: u64,
    pub round: u64,
    pub inputs: BTreeMap<NodeId, ConsensusInput>,
}

/// Everything the simulator needs to execute one run.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub config: SimConfig,
    pub mode: UniquenessMode,
    pub digest_width: DigestWidth,
    /// Per-node tree description for epoch 0 (possibly bug-injected;
    /// omitted nodes are simply absent).
    pub initial_trees: BTreeMap<NodeId, TreeInput>,
    pub initial_height: u64,
    /// Policy used for centralized rebuilds after failures.
    pub rebuild_policy: TreePolicy,
    pub input_schedule: Vec<InputRound>,
}

/// Runs the plan to quiescence (or the time limit) and returns the
/// complete trace. Traces are a pure function of the plan.
pub fn run(plan: &RunPlan) -> Trace {
    plan.config.validate().expect("plan validated by caller");
    Simulation::new(plan).run()
}

#[derive(Debug)]
struct QueuedEvent {
    time: u64,
    seq: u64,
    kind: EventKind,
}

#[derive(Debug)]
enum EventKind {
    AssignInitial,
    Deliver {
        src: NodeId,
        dst: NodeId,
        epoch: u64,
        slot: Slot,
        bytes: Vec<u8>,
    },
    InputRound {
        index: usize,
    },
    NodeFail {
        node: NodeId,
    },
    DetectorFire,
    Timeout {
        node: NodeId,
        token: u64,
    },
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for QueuedEvent {}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops
        // first. Sequence numbers are unique, making this a total order.
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-purpose seed derivation from the scenario seed.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(base ^ splitmix64(salt))
}

struct Simulation<'a> {
    plan: &'a RunPlan,
    queue: BinaryHeap<QueuedEvent>,
    next_seq: u64,
    rng: ChaCha8Rng,
    agents: BTreeMap<NodeId, Agent>,
    dead: BTreeSet<NodeId>,
    epoch: u64,
    last_notified: BTreeSet<NodeId>,
    records: Vec<TraceRecord>,
    record_seq: u64,
    now: u64,
    time_limit: u64,
}

impl<'a> Simulation<'a> {
    fn new(plan: &'a RunPlan) -> Simulation<'a> {
        let config = &plan.config;
        let agent_cfg = AgentConfig {
            mode: plan.mode,
            digest_width: plan.digest_width,
            max_delay: config.max_delay,
        };
        let agents = config
            .node_ids()
            .into_iter()
            .map(|id| {
                (
                    id,
                    Agent::new(id, agent_cfg, derive_seed(config.seed, id.value())),
                )
            })
            .collect();

        let last_scheduled = plan
            .input_schedule
            .iter()
            .map(|r| r.time)
            .chain(config.fault_schedule.iter().map(|(t, _)| *t))
            .max()
            .unwrap_or(0);
        let slack = config
            .max_delay
            .saturating_mul((config.n + 8).saturating_mul(64));
        let time_limit = config
            .time_limit
            .unwrap_or(last_scheduled.saturating_add(slack).saturating_add(1_000));

        let mut sim = Simulation {
            plan,
            queue: BinaryHeap::new(),
            next_seq: 0,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0)),
            agents,
            dead: BTreeSet::new(),
            epoch: 0,
            last_notified: BTreeSet::new(),
            records: Vec::new(),
            record_seq: 0,
            now: 0,
            time_limit,
        };
        // Faults first: a fault scheduled at the same instant as other
        // activity takes effect before it.
        for &(time, node) in &config.fault_schedule {
            sim.schedule(time, EventKind::NodeFail { node });
        }
        sim.schedule(0, EventKind::AssignInitial);
        for (index, round) in plan.input_schedule.iter().enumerate() {
            sim.schedule(round.time, EventKind::InputRound { index });
        }
        sim
    }

    fn schedule(&mut self, time: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(QueuedEvent { time, seq, kind });
    }

    fn record(&mut self, event: TraceEvent) {
        let seq = self.record_seq;
        self.record_seq += 1;
        self.records.push(TraceRecord {
            time: self.now,
            seq,
            event,
        });
    }

    fn alive(&self) -> Vec<NodeId> {
        self.plan
            .config
            .node_ids()
            .into_iter()
            .filter(|id| !self.dead.contains(id))
            .collect()
    }

    fn run(mut self) -> Trace {
        while let Some(event) = self.queue.pop() {
            if event.time > self.time_limit {
                break;
            }
            self.now = event.time;
            match event.kind {
                EventKind::AssignInitial => self.on_assign_initial(),
                EventKind::Deliver {
                    src,
                    dst,
                    epoch,
                    slot,
                    bytes,
                } => self.on_deliver(src, dst, epoch, slot, bytes),
                EventKind::InputRound { index } => self.on_input_round(index),
                EventKind::NodeFail { node } => self.on_node_fail(node),
                EventKind::DetectorFire => self.on_detector_fire(),
                EventKind::Timeout { node, token } => self.on_timeout(node, token),
            }
        }

        // Anything still parked mid-round is a stuck state worth reporting.
        let alive = self.alive();
        for node in alive {
            let agent = &self.agents[&node];
            if !agent.is_idle() && !agent.is_dormant() {
                let (phase, missing) = agent
                    .stuck_info()
                    .unwrap_or_else(|| (agent.phase_name().to_string(), vec![]));
                self.record(TraceEvent::Stuck {
                    node,
                    phase,
                    missing,
                });
            }
        }

        Trace {
            records: self.records,
        }
    }

    fn on_assign_initial(&mut self) {
        let height = self.plan.initial_height;
        for (node, input) in self.plan.initial_trees.clone() {
            if self.dead.contains(&node) {
                continue;
            }
            self.record(TraceEvent::TreeAssign {
                node,
                epoch: 0,
                is_root: input.parent_id.is_none(),
                height,
            });
            let out = self.agents.get_mut(&node).expect("agent exists").handle(
                Event::TreeAssign {
                    epoch: 0,
                    input,
                    height,
                    run_uniqueness: true,
                },
                0,
            );
            self.process_output(node, out);
        }
    }

    fn on_deliver(&mut self, src: NodeId, dst: NodeId, epoch: u64, slot: Slot, bytes: Vec<u8>) {
        if self.dead.contains(&src) {
            self.record(TraceEvent::DropMessage {
                src,
                dst,
                reason: "sender failed",
            });
            return;
        }
        if self.dead.contains(&dst) {
            self.record(TraceEvent::DropMessage {
                src,
                dst,
                reason: "recipient failed",
            });
            return;
        }
        if epoch < self.epoch {
            self.record(TraceEvent::DropMessage {
                src,
                dst,
                reason: "stale epoch",
            });
            return;
        }
        let msg = CertMessage::decode(&bytes).expect("internally encoded message");
        self.record(TraceEvent::Deliver {
            src,
            dst,
            epoch,
            slot,
            tag: msg.tag_name(),
        });
        let now = self.now;
        let out = self
            .agents
            .get_mut(&dst)
            .expect("agent exists")
            .handle(Event::Message { from: src, epoch, slot, msg }, now);
        self.process_output(dst, out);
    }

    fn on_input_round(&mut self, index: usize) {
        let round = self.plan.input_schedule[index].clone();
        for (node, input) in round.inputs {
            if self.dead.contains(&node) {
                continue;
            }
            self.record(TraceEvent::Input {
                node,
                round: round.round,
            });
            let now = self.now;
            let out = self.agents.get_mut(&node).expect("agent exists").handle(
                Event::Input {
                    round: round.round,
                    input,
                },
                now,
            );
            self.process_output(node, out);
        }
    }

    fn on_node_fail(&mut self, node: NodeId) {
        if !self.dead.insert(node) {
            return;
        }
        self.record(TraceEvent::Fail { node });
        let fire_at = self.now + self.plan.config.max_delay;
        self.schedule(fire_at, EventKind::DetectorFire);
    }

    fn on_detector_fire(&mut self) {
        // Announce the current failed set once; a later fire that saw the
        // same set is a duplicate and is skipped.
        if self.dead == self.last_notified {
            return;
        }
        self.last_notified = self.dead.clone();
        let failed: Vec<NodeId> = self.dead.iter().copied().collect();
        let alive = self.alive();
        if alive.is_empty() {
            return;
        }

        for &node in &alive {
            self.record(TraceEvent::FailureNotice {
                node,
                failed: failed.clone(),
            });
            let now = self.now;
            let out = self.agents.get_mut(&node).expect("agent exists").handle(
                Event::FailureNotice {
                    failed: failed.clone(),
                },
                now,
            );
            self.process_output(node, out);
        }

        self.epoch += 1;
        let epoch = self.epoch;
        match build_tree(
            &alive,
            self.plan.rebuild_policy,
            &self.plan.config.adjacency,
            &mut self.rng,
        ) {
            Ok(built) => {
                for (node, input) in built.inputs {
                    self.record(TraceEvent::TreeAssign {
                        node,
                        epoch,
                        is_root: input.parent_id.is_none(),
                        height: built.height,
                    });
                    let now = self.now;
                    let out = self.agents.get_mut(&node).expect("agent exists").handle(
                        Event::TreeAssign {
                            epoch,
                            input,
                            height: built.height,
                            run_uniqueness: false,
                        },
                        now,
                    );
                    self.process_output(node, out);
                }
            }
            Err(err) => {
                self.record(TraceEvent::BuildError {
                    detail: err.to_string(),
                });
            }
        }
    }

    fn on_timeout(&mut self, node: NodeId, token: u64) {
        if self.dead.contains(&node) {
            return;
        }
        let now = self.now;
        let out = self
            .agents
            .get_mut(&node)
            .expect("agent exists")
            .handle(Event::Timeout { token }, now);
        self.process_output(node, out);
    }

    fn process_output(&mut self, node: NodeId, out: Output) {
        for signal in out.signals {
            self.record(TraceEvent::Signal { signal });
        }
        for (epoch, slot) in out.completed {
            self.record(TraceEvent::RoundDone { node, epoch, slot });
        }
        if !out.suspects.is_empty() {
            // Suspicions are informational: every real failure already has
            // a detector notification in flight within max_delay.
            self.record(TraceEvent::Suspect {
                node,
                suspected: out.suspects,
            });
        }
        for timer in out.timers {
            self.schedule(
                self.now + timer.delay,
                EventKind::Timeout {
                    node,
                    token: timer.token,
                },
            );
        }
        for send in out.sends {
            let bytes = send.msg.encode();
            self.record(TraceEvent::Send {
                src: node,
                dst: send.to,
                epoch: send.epoch,
                slot: send.slot,
                tag: send.msg.tag_name(),
                bytes: bytes.len() as u64,
            });
            let delay = self
                .rng
                .gen_range(self.plan.config.min_delay..=self.plan.config.max_delay);
            self.schedule(
                self.now + delay,
                EventKind::Deliver {
                    src: node,
                    dst: send.to,
                    epoch: send.epoch,
                    slot: send.slot,
                    bytes,
                },
            );
        }
    }
}
