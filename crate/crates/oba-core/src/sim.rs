//! Deterministic discrete-event network simulator.
//!
//! Runs `n` protocol parties — some possibly replaced by adversarial
//! behaviors — over a message-passing network whose delays are chosen
//! by a pluggable policy and then clamped into the legal window of the
//! configured synchrony assumption.  Every run is a pure function of
//! `(RunConfig, seed)`: events are ordered by `(time, class, seq)` with
//! deliveries before timers at the same tick, all collections iterate
//! deterministically, and the only randomness is a seeded stream handed
//! to the delay policy.
//!
//! The simulator meters honest communication in words at send time and
//! produces a [`RunReport`]; [`run_traced`] additionally returns the
//! honest parties' trace notes and decided values for invariant checks.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::{PartyId, Sq};
use crate::messages::{Message, Value};
use crate::party::{Event, Output, Party, PartyConfig, PhaseLabel, ProofKind, TraceNote};
use crate::plugins::{
    behavior_exists, make_behavior, make_delay_policy, Behavior, ByzAction, ByzCtx, DelayPolicy,
    Envelope, LegalWindow, NodeEvent, NodeTimer,
};
use crate::sync_path::{wedge_at, Tick};

// --- configuration ------------------------------------------------------

/// Network synchrony assumption for a run.  It fixes the default
/// stabilization time and the default delay policy; both can be
/// overridden per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    /// Synchronous from the start, worst-case legal delays.
    Sync,
    /// Eventually synchronous with stabilization at time zero.
    EsGst0,
    /// Stabilizes midway through the leader slots.
    EsMid,
    /// Stabilizes only after every leader slot has passed.
    EsLate,
    /// Never stabilizes; honest deliveries have no deadline.
    Async,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Sync,
        Mode::EsGst0,
        Mode::EsMid,
        Mode::EsLate,
        Mode::Async,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Sync => "sync",
            Mode::EsGst0 => "es-gst0",
            Mode::EsMid => "es-mid",
            Mode::EsLate => "es-late",
            Mode::Async => "async",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }

    fn default_gst(self, n: usize, delta: Tick) -> Option<Tick> {
        match self {
            Mode::Sync | Mode::EsGst0 => Some(0),
            Mode::EsMid => Some(wedge_at(n.div_ceil(2) as Sq, delta)),
            Mode::EsLate => Some(wedge_at(n as Sq, delta) + 10 * delta),
            Mode::Async => None,
        }
    }

    fn default_policy(self) -> &'static str {
        match self {
            Mode::Sync => "max-delay",
            _ => "uniform",
        }
    }
}

/// Everything that defines one simulation run.  Build with
/// [`RunConfig::sync`] or [`RunConfig::new`] and refine with the
/// `with_*` methods; mode-derived defaults (stabilization time, delay
/// policy) track later changes until explicitly overridden.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub t: usize,
    pub delta: Tick,
    pub seed: u64,
    pub mode: Mode,
    /// Stabilization time; `None` means the network never stabilizes.
    pub gst: Option<Tick>,
    pub corrupted: BTreeSet<PartyId>,
    pub behavior: String,
    pub delay_policy: String,
    /// Events past this tick cap the run.
    pub max_time: Tick,
    /// Fallback waves past this count cap the run.
    pub max_waves: usize,
    gst_overridden: bool,
    policy_overridden: bool,
}

impl RunConfig {
    pub fn new(n: usize, mode: Mode) -> Self {
        let t = n.saturating_sub(1) / 3;
        let delta = 10;
        RunConfig {
            n,
            t,
            delta,
            seed: 0,
            mode,
            gst: mode.default_gst(n, delta),
            corrupted: BTreeSet::new(),
            behavior: "silent".to_string(),
            delay_policy: mode.default_policy().to_string(),
            max_time: 200_000,
            max_waves: 64,
            gst_overridden: false,
            policy_overridden: false,
        }
    }

    pub fn sync(n: usize) -> Self {
        Self::new(n, Mode::Sync)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Corrupt `parties` and have them run the named behavior.
    pub fn with_corruptions(mut self, parties: BTreeSet<PartyId>, behavior: &str) -> Self {
        self.corrupted = parties;
        self.behavior = behavior.to_string();
        self
    }

    pub fn with_policy(mut self, name: &str) -> Self {
        self.delay_policy = name.to_string();
        self.policy_overridden = true;
        self
    }

    pub fn with_gst(mut self, gst: Option<Tick>) -> Self {
        self.gst = gst;
        self.gst_overridden = true;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        if !self.gst_overridden {
            self.gst = mode.default_gst(self.n, self.delta);
        }
        if !self.policy_overridden {
            self.delay_policy = mode.default_policy().to_string();
        }
        self
    }

    pub fn with_delta(mut self, delta: Tick) -> Self {
        self.delta = delta;
        if !self.gst_overridden {
            self.gst = self.mode.default_gst(self.n, delta);
        }
        self
    }

    pub fn with_t(mut self, t: usize) -> Self {
        self.t = t;
        self
    }

    pub fn with_max_time(mut self, max_time: Tick) -> Self {
        self.max_time = max_time;
        self
    }

    pub fn with_max_waves(mut self, max_waves: usize) -> Self {
        self.max_waves = max_waves;
        self
    }

    /// Number of corrupted parties.
    pub fn f(&self) -> usize {
        self.corrupted.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("n must be positive".into());
        }
        if self.n < 3 * self.t + 1 {
            return Err(format!(
                "n = {} cannot tolerate t = {}: need n >= 3t + 1",
                self.n, self.t
            ));
        }
        if self.f() > self.t {
            return Err(format!(
                "{} corruptions exceed the tolerance t = {}",
                self.f(),
                self.t
            ));
        }
        if let Some(&worst) = self.corrupted.iter().next_back() {
            if worst >= self.n {
                return Err(format!(
                    "corrupted id {worst} out of range for n = {}",
                    self.n
                ));
            }
        }
        if self.delta == 0 {
            return Err("delta must be positive".into());
        }
        if !behavior_exists(&self.behavior) {
            return Err(format!("unknown behavior '{}'", self.behavior));
        }
        if make_delay_policy(&self.delay_policy, self.n, self.delta).is_none() {
            return Err(format!("unknown delay policy '{}'", self.delay_policy));
        }
        Ok(())
    }
}

// --- results ------------------------------------------------------------

/// Flat, serialization-stable summary of one run.  `honest_words`
/// counts every word sent by an honest party to another party; replies
/// provoked by adversaries count, adversary-sent traffic does not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub mode: String,
    pub n: usize,
    pub t: usize,
    pub f: usize,
    pub honest_words: u64,
    /// Latest honest decision time; `None` unless every honest party decided.
    pub decide_time_max: Option<Tick>,
    /// Distinct fallback waves any honest party entered.
    pub waves: usize,
    pub fallback_entered_any: bool,
    /// True when the run hit `max_time` or `max_waves` instead of quiescing.
    pub capped: bool,
    pub adversary: Vec<PartyId>,
    pub behavior: String,
    pub delay_policy: String,
    pub gst: Option<Tick>,
    pub delta: Tick,
    pub honest_to_honest_words: u64,
    pub complains_validated: u64,
    /// Deliveries the legal window moved away from the policy's choice.
    pub clamped_deliveries: u64,
    /// Per wave, in order: did the elected leader's view complete somewhere?
    pub elected_completed: Vec<bool>,
    pub decide_times: Vec<Option<Tick>>,
    pub fallback_entered: Vec<bool>,
    pub words_by_type: BTreeMap<String, u64>,
    pub words_by_phase: BTreeMap<String, u64>,
}

/// One honest trace note with its position in the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Tick,
    pub party: PartyId,
    pub note: TraceNote,
}

/// A report plus the raw evidence behind it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub trace: Vec<TraceEvent>,
    /// Honest parties' decided values, `None` for undecided and adversarial slots.
    pub decided: Vec<Option<Value>>,
}

/// Run a configuration to quiescence (or its caps) and report.
pub fn run(config: RunConfig) -> RunReport {
    run_traced(config).report
}

/// Like [`run`], keeping the honest trace and decided values.
pub fn run_traced(config: RunConfig) -> RunOutcome {
    if let Err(e) = config.validate() {
        panic!("invalid run configuration: {e}");
    }
    let mut sim = Sim::new(&config);
    sim.execute();
    sim.finish(&config)
}

fn derive_coin_key(seed: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(31) ^ 0x636f_696e_5f6b_6579
}

// --- the engine ---------------------------------------------------------

const CLASS_DELIVER: u8 = 0;
const CLASS_TIMER: u8 = 1;

enum Node {
    Honest(Box<Party>),
    Byz(Box<dyn Behavior>),
}

// Deliveries dominate the event stream, so the envelope stays inline
// rather than paying an allocation per message.
#[allow(clippy::large_enum_variant)]
enum Item {
    Start { party: PartyId },
    Deliver { env: Envelope },
    Timer { party: PartyId, timer: NodeTimer },
}

/// Heap entry ordered by `(time, class, seq)`: same-tick deliveries
/// precede same-tick timers, and insertion order breaks the remaining
/// ties deterministically.
struct Scheduled {
    time: Tick,
    class: u8,
    seq: u64,
    item: Item,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.class, self.seq) == (other.time, other.class, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.class, self.seq).cmp(&(other.time, other.class, other.seq))
    }
}

struct Sim {
    n: usize,
    delta: Tick,
    gst: Option<Tick>,
    max_time: Tick,
    max_waves: usize,
    nodes: Vec<Node>,
    policy: Box<dyn DelayPolicy>,
    rng: ChaCha8Rng,
    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    // metered state
    honest_words: u64,
    honest_to_honest_words: u64,
    complains_validated: u64,
    clamped_deliveries: u64,
    words_by_type: BTreeMap<String, u64>,
    words_by_phase: BTreeMap<String, u64>,
    decided: Vec<Option<Value>>,
    decide_times: Vec<Option<Tick>>,
    fallback_entered: Vec<bool>,
    wave_sqs: BTreeSet<Sq>,
    commit_holders: BTreeMap<(Sq, PartyId), BTreeSet<PartyId>>,
    elections: BTreeMap<Sq, bool>,
    trace: Vec<TraceEvent>,
    capped: bool,
}

impl Sim {
    fn new(config: &RunConfig) -> Self {
        let coin_key = derive_coin_key(config.seed);
        let nodes = (0..config.n)
            .map(|id| {
                let pcfg = PartyConfig {
                    id,
                    n: config.n,
                    t: config.t,
                    delta: config.delta,
                    proposal: Value::valid(100 + id as u64),
                    coin_key,
                };
                if config.corrupted.contains(&id) {
                    Node::Byz(make_behavior(&config.behavior, pcfg).expect("validated behavior"))
                } else {
                    Node::Honest(Box::new(Party::new(pcfg)))
                }
            })
            .collect();
        let policy = make_delay_policy(&config.delay_policy, config.n, config.delta)
            .expect("validated delay policy");
        let mut sim = Sim {
            n: config.n,
            delta: config.delta,
            gst: config.gst,
            max_time: config.max_time,
            max_waves: config.max_waves,
            nodes,
            policy,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            heap: BinaryHeap::new(),
            seq: 0,
            honest_words: 0,
            honest_to_honest_words: 0,
            complains_validated: 0,
            clamped_deliveries: 0,
            words_by_type: BTreeMap::new(),
            words_by_phase: BTreeMap::new(),
            decided: vec![None; config.n],
            decide_times: vec![None; config.n],
            fallback_entered: vec![false; config.n],
            wave_sqs: BTreeSet::new(),
            commit_holders: BTreeMap::new(),
            elections: BTreeMap::new(),
            trace: Vec::new(),
            capped: false,
        };
        for party in 0..config.n {
            sim.push(0, CLASS_DELIVER, Item::Start { party });
        }
        sim
    }

    fn push(&mut self, time: Tick, class: u8, item: Item) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Scheduled {
            time,
            class,
            seq,
            item,
        }));
    }

    fn execute(&mut self) {
        while let Some(Reverse(next)) = self.heap.pop() {
            if next.time > self.max_time {
                self.capped = true;
                break;
            }
            let now = next.time;
            match next.item {
                Item::Start { party } => self.dispatch(party, now, NodeEvent::Start),
                Item::Deliver { env } => {
                    let to = env.to;
                    let ev = NodeEvent::Message {
                        from: env.from,
                        msg: env.msg,
                    };
                    self.dispatch(to, now, ev);
                }
                Item::Timer { party, timer } => self.dispatch(party, now, NodeEvent::Timer(timer)),
            }
            if self.wave_sqs.len() > self.max_waves {
                self.capped = true;
                break;
            }
        }
    }

    fn dispatch(&mut self, id: PartyId, now: Tick, event: NodeEvent) {
        enum Stepped {
            Honest(Vec<Output>, PhaseLabel),
            Byz(Vec<ByzAction>),
        }
        let stepped = match &mut self.nodes[id] {
            Node::Honest(party) => {
                let ev = match event {
                    NodeEvent::Start => Event::Start,
                    NodeEvent::Timer(NodeTimer::Protocol(kind)) => Event::Timer(kind),
                    NodeEvent::Timer(NodeTimer::Wakeup(_)) => return,
                    NodeEvent::Message { from, msg } => Event::Message { from, msg },
                };
                let outputs = party.step(now, ev);
                Stepped::Honest(outputs, party.phase_label())
            }
            Node::Byz(behavior) => {
                let mut ctx = ByzCtx::new(id);
                behavior.on_event(now, &event, &mut ctx);
                Stepped::Byz(ctx.take_actions())
            }
        };
        match stepped {
            Stepped::Honest(outputs, phase) => {
                for out in outputs {
                    self.apply_honest_output(id, now, phase, out);
                }
            }
            Stepped::Byz(actions) => {
                for action in actions {
                    self.apply_byz_action(id, now, action);
                }
            }
        }
    }

    fn apply_honest_output(&mut self, id: PartyId, now: Tick, phase: PhaseLabel, out: Output) {
        match out {
            Output::Send { to, msg } => self.post(id, to, now, msg, true, phase),
            Output::Broadcast { msg } => {
                for to in 0..self.n {
                    self.post(id, to, now, msg.clone(), true, phase);
                }
            }
            Output::SetTimer { at, kind } => {
                let timer = NodeTimer::Protocol(kind);
                self.push(at.max(now), CLASS_TIMER, Item::Timer { party: id, timer });
            }
            Output::Decided { value } => {
                if self.decided[id].is_none() {
                    self.decided[id] = Some(value);
                    self.decide_times[id] = Some(now);
                }
            }
            Output::Note(note) => self.note(id, now, note),
        }
    }

    fn apply_byz_action(&mut self, id: PartyId, now: Tick, action: ByzAction) {
        match action {
            ByzAction::Send { to, msg } => self.post(id, to, now, msg, false, PhaseLabel::Sync),
            ByzAction::Broadcast { msg } => {
                for to in 0..self.n {
                    self.post(id, to, now, msg.clone(), false, PhaseLabel::Sync);
                }
            }
            ByzAction::SetTimer { at, timer } => {
                self.push(at.max(now), CLASS_TIMER, Item::Timer { party: id, timer });
            }
        }
    }

    /// Meter (for honest senders) and schedule one message.  Messages
    /// to self are free and arrive in the same tick; everything else
    /// goes through the delay policy and the legal-window clamp.
    fn post(
        &mut self,
        from: PartyId,
        to: PartyId,
        sent_at: Tick,
        msg: Message,
        sender_honest: bool,
        phase: PhaseLabel,
    ) {
        if sender_honest && to != from {
            let words = msg.words();
            self.honest_words += words;
            *self
                .words_by_type
                .entry(msg.type_name().to_string())
                .or_insert(0) += words;
            *self
                .words_by_phase
                .entry(phase.name().to_string())
                .or_insert(0) += words;
            if matches!(self.nodes[to], Node::Honest(_)) {
                self.honest_to_honest_words += words;
            }
        }
        if to == from {
            let env = Envelope {
                from,
                to,
                sent_at,
                msg,
            };
            self.push(sent_at, CLASS_DELIVER, Item::Deliver { env });
            return;
        }
        let earliest = sent_at + 1;
        let latest = if sender_honest {
            self.gst.map(|gst| gst.max(sent_at) + self.delta)
        } else {
            None
        };
        let env = Envelope {
            from,
            to,
            sent_at,
            msg,
        };
        let window = LegalWindow { earliest, latest };
        let desired = self.policy.delay(&env, &window, &mut self.rng);
        let mut at = desired;
        if at < earliest {
            at = earliest;
            self.clamped_deliveries += 1;
        }
        if let Some(latest) = latest {
            if at > latest {
                at = latest;
                self.clamped_deliveries += 1;
            }
        }
        self.push(at, CLASS_DELIVER, Item::Deliver { env });
    }

    fn note(&mut self, id: PartyId, now: Tick, note: TraceNote) {
        self.trace.push(TraceEvent {
            time: now,
            party: id,
            note,
        });
        match note {
            TraceNote::WaveStart { sq } => {
                self.wave_sqs.insert(sq);
                self.fallback_entered[id] = true;
            }
            TraceNote::ProofStored {
                sq,
                leader,
                kind: ProofKind::Commit,
            } => {
                self.commit_holders
                    .entry((sq, leader))
                    .or_default()
                    .insert(id);
            }
            TraceNote::ProofStored { .. } => {}
            TraceNote::Elected { sq, leader } => {
                // The first honest election report fixes the wave's outcome:
                // the elected leader's view counts as completed if some honest
                // party holds its commit certificate by then.
                self.elections.entry(sq).or_insert_with(|| {
                    self.commit_holders
                        .get(&(sq, leader))
                        .is_some_and(|s| !s.is_empty())
                });
            }
            TraceNote::ComplainValidated { .. } => self.complains_validated += 1,
        }
    }

    fn finish(self, config: &RunConfig) -> RunOutcome {
        let honest = |id: &PartyId| !config.corrupted.contains(id);
        let honest_ids: Vec<PartyId> = (0..config.n).filter(|id| honest(id)).collect();
        let decide_time_max = honest_ids
            .iter()
            .map(|&id| self.decide_times[id])
            .collect::<Option<Vec<_>>>()
            .map(|times| times.into_iter().max().unwrap_or(0));
        let fallback_entered_any = honest_ids.iter().any(|&id| self.fallback_entered[id]);
        let report = RunReport {
            seed: config.seed,
            mode: config.mode.name().to_string(),
            n: config.n,
            t: config.t,
            f: config.f(),
            honest_words: self.honest_words,
            decide_time_max,
            waves: self.wave_sqs.len(),
            fallback_entered_any,
            capped: self.capped,
            adversary: config.corrupted.iter().copied().collect(),
            behavior: config.behavior.clone(),
            delay_policy: config.delay_policy.clone(),
            gst: config.gst,
            delta: config.delta,
            honest_to_honest_words: self.honest_to_honest_words,
            complains_validated: self.complains_validated,
            clamped_deliveries: self.clamped_deliveries,
            elected_completed: self.elections.values().copied().collect(),
            decide_times: self.decide_times,
            fallback_entered: self.fallback_entered,
            words_by_type: self.words_by_type,
            words_by_phase: self.words_by_phase,
        };
        RunOutcome {
            report,
            trace: self.trace,
            decided: self.decided,
        }
    }
}
