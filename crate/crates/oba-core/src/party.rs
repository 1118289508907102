//! One protocol party: the composition of slots, gates, waves, state
//! exchange, and retry slots into a single event-driven state machine.
//!
//! A party reacts to three kinds of events — its start, its own timers,
//! and incoming messages — and emits sends, broadcasts, timer requests,
//! a decision signal, and trace notes.  It never touches the clock or
//! the network itself, which keeps the whole protocol deterministic and
//! lets the simulator (or a test) drive it tick by tick.
//!
//! The phase flow is linear: the `n` optimistic slots run on the global
//! clock; after the last slot a help gate either parks the party for
//! good (everyone it can see is done) or releases it into the fallback
//! loop of wave, exchange, gate, retry slot, gate, next wave.

use std::collections::{BTreeMap, BTreeSet};

use crate::crypto::{share_sign, PartyId, Sq};
use crate::fallback::{WaveParams, WaveState};
use crate::halting::HelpState;
use crate::lbv::{LbvEvent, LbvInstance, LbvParams};
use crate::messages::{dom_coin, dom_share_ready, dom_view_done, Message, Value};
use crate::state::{is_wave_sq, static_leader, LocalState, ViewProofs};
use crate::sync_path::{leader_propose_at, retry_wedge_after, wedge_at, Tick};

/// Static configuration of one party.
#[derive(Debug, Clone)]
pub struct PartyConfig {
    pub id: PartyId,
    pub n: usize,
    pub t: usize,
    /// Post-stabilization delivery bound, in ticks.
    pub delta: Tick,
    /// The externally valid value this party proposes.
    pub proposal: Value,
    /// Per-run key of the election hash.  Parties know it; adversarial
    /// plugins are never handed it.
    pub coin_key: u64,
}

impl PartyConfig {
    /// Certificate threshold, `n - t`.
    pub fn quorum(&self) -> usize {
        self.n - self.t
    }

    /// Coin and complaint threshold, `t + 1`.
    pub fn small(&self) -> usize {
        self.t + 1
    }
}

/// A party's own timers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    /// Global end of slot `sq`: wedge it and open what follows.
    SlotBoundary(Sq),
    /// A keyed slot's leader proposes after its key-request round trip.
    LeaderPropose(Sq),
    /// Local end of the retry slot `sq`.
    RetryWedge(Sq),
}

/// Everything that can happen to a party.
#[derive(Debug, Clone)]
pub enum Event {
    /// The protocol starts (delivered to every party at time zero).
    Start,
    /// One of the party's own timers fired.
    Timer(TimerKind),
    /// A message arrived.  `from` is the authenticated channel identity
    /// of the sender — a faulty party cannot spoof it.
    Message { from: PartyId, msg: Message },
}

/// Which certificate a trace note reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProofKind {
    Key,
    Lock,
    Commit,
}

/// Landmarks a party reports for test instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceNote {
    /// The party started participating in wave `sq`.
    WaveStart { sq: Sq },
    /// The party obtained a certificate of view `(sq, leader)`.
    ProofStored {
        sq: Sq,
        leader: PartyId,
        kind: ProofKind,
    },
    /// The party learned wave `sq`'s elected leader.
    Elected { sq: Sq, leader: PartyId },
    /// The party validated (or formed) a complaint for gate `sq`.
    ComplainValidated { sq: Sq },
}

/// Everything a party can ask of the outside world.
#[derive(Debug, Clone)]
pub enum Output {
    Send {
        to: PartyId,
        msg: Message,
    },
    Broadcast {
        msg: Message,
    },
    SetTimer {
        at: Tick,
        kind: TimerKind,
    },
    /// First decision of this party.
    Decided {
        value: Value,
    },
    Note(TraceNote),
}

/// Cost-attribution bucket for words a party sends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PhaseLabel {
    /// Slot machinery: the optimistic schedule and the retry slots.
    Sync,
    /// Help gates.
    Gate,
    /// Wave barrier, election, and state exchange.
    Fallback,
}

impl PhaseLabel {
    pub fn name(&self) -> &'static str {
        match self {
            PhaseLabel::Sync => "sync",
            PhaseLabel::Gate => "gate",
            PhaseLabel::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Slots,
    Gate { sq: Sq },
    WaveBarrier { sq: Sq },
    WaveElect { sq: Sq },
    Exchange { sq: Sq },
    RetrySlot { sq: Sq },
}

/// One protocol party.
#[derive(Debug, Clone)]
pub struct Party {
    cfg: PartyConfig,
    st: LocalState,
    phase: Phase,
    /// Views this party participates in, by (view, leader).
    lbvs: BTreeMap<(Sq, PartyId), LbvInstance>,
    /// Senders whose key request was already answered (once per sender,
    /// ever).
    key_request_served: BTreeSet<PartyId>,
    help: HelpState,
    waves: BTreeMap<Sq, WaveState>,
    /// Distinct exchange senders applied, per wave.
    exchange_applied: BTreeMap<Sq, BTreeSet<PartyId>>,
    /// Exchanges for waves this party has not wedged yet.
    exchange_buffer: BTreeMap<Sq, Vec<(PartyId, Message)>>,
    exchange_sent: BTreeSet<Sq>,
    fallback_entered: bool,
    decided_emitted: bool,
}

impl Party {
    pub fn new(cfg: PartyConfig) -> Self {
        Party {
            cfg,
            st: LocalState::new(),
            phase: Phase::Slots,
            lbvs: BTreeMap::new(),
            key_request_served: BTreeSet::new(),
            help: HelpState::new(),
            waves: BTreeMap::new(),
            exchange_applied: BTreeMap::new(),
            exchange_buffer: BTreeMap::new(),
            exchange_sent: BTreeSet::new(),
            fallback_entered: false,
            decided_emitted: false,
        }
    }

    pub fn id(&self) -> PartyId {
        self.cfg.id
    }

    pub fn config(&self) -> &PartyConfig {
        &self.cfg
    }

    pub fn state(&self) -> &LocalState {
        &self.st
    }

    pub fn decided_value(&self) -> Option<Value> {
        self.st.decided()
    }

    pub fn fallback_entered(&self) -> bool {
        self.fallback_entered
    }

    /// Bucket for the words this party sends right now.
    pub fn phase_label(&self) -> PhaseLabel {
        match self.phase {
            Phase::Slots | Phase::RetrySlot { .. } => PhaseLabel::Sync,
            Phase::Gate { .. } => PhaseLabel::Gate,
            Phase::WaveBarrier { .. } | Phase::WaveElect { .. } | Phase::Exchange { .. } => {
                PhaseLabel::Fallback
            }
        }
    }

    /// Feed one event, collect everything the party wants done.
    pub fn step(&mut self, now: Tick, event: Event) -> Vec<Output> {
        let mut out = Vec::new();
        match event {
            Event::Start => self.on_start(now, &mut out),
            Event::Timer(kind) => self.on_timer(now, kind, &mut out),
            Event::Message { from, msg } => self.on_message(now, from, msg, &mut out),
        }
        out
    }

    // --- slots ----------------------------------------------------------

    fn on_start(&mut self, now: Tick, out: &mut Vec<Output>) {
        self.start_slot(1, now, out);
        out.push(Output::SetTimer {
            at: wedge_at(1, self.cfg.delta),
            kind: TimerKind::SlotBoundary(1),
        });
    }

    fn start_slot(&mut self, sq: Sq, now: Tick, out: &mut Vec<Output>) {
        let leader = static_leader(self.cfg.n, sq).expect("slots have scheduled leaders");
        if leader == self.cfg.id {
            // A decided leader skips its own slot entirely.
            if self.st.commit.is_some() {
                return;
            }
            self.ensure_instance(sq, leader);
            if sq == 1 {
                // The first slot is key-free: propose immediately.
                self.leader_propose(sq, leader, out);
            } else {
                out.push(Output::Broadcast {
                    msg: Message::KeyRequest,
                });
                out.push(Output::SetTimer {
                    at: leader_propose_at(sq, self.cfg.delta),
                    kind: TimerKind::LeaderPropose(sq),
                });
            }
        } else {
            self.ensure_instance(sq, leader);
            let events = {
                let inst = self.lbvs.get_mut(&(sq, leader)).expect("just ensured");
                inst.start(&self.st)
            };
            self.ingest_lbv(sq, leader, events, now, out);
        }
        let _ = now;
    }

    fn leader_propose(&mut self, sq: Sq, leader: PartyId, out: &mut Vec<Output>) {
        let value = self.st.value.unwrap_or(self.cfg.proposal);
        let key = self.st.key.clone();
        let events = {
            let inst = self.lbvs.get_mut(&(sq, leader)).expect("instance exists");
            inst.start_with_proposal(value, key, &self.st)
        };
        self.ingest_lbv(sq, leader, events, 0, out);
    }

    fn on_timer(&mut self, now: Tick, kind: TimerKind, out: &mut Vec<Output>) {
        match kind {
            TimerKind::SlotBoundary(sq) => {
                let leader = static_leader(self.cfg.n, sq).expect("slot leader");
                self.wedge_view(sq, leader, out);
                if sq < self.cfg.n as Sq {
                    self.start_slot(sq + 1, now, out);
                    out.push(Output::SetTimer {
                        at: wedge_at(sq + 1, self.cfg.delta),
                        kind: TimerKind::SlotBoundary(sq + 1),
                    });
                } else {
                    self.enter_gate(sq + 1, now, out);
                }
            }
            TimerKind::LeaderPropose(sq) => {
                if self.st.commit.is_some() {
                    return;
                }
                let leader = self.cfg.id;
                if matches!(self.lbvs.get(&(sq, leader)), Some(inst) if !inst.started() && !inst.wedged())
                {
                    self.leader_propose(sq, leader, out);
                }
            }
            TimerKind::RetryWedge(sq) => {
                if self.phase != (Phase::RetrySlot { sq }) {
                    return;
                }
                let leader = static_leader(self.cfg.n, sq).expect("retry slot leader");
                self.wedge_view(sq, leader, out);
                self.enter_gate(sq, now, out);
            }
        }
    }

    fn wedge_view(&mut self, sq: Sq, leader: PartyId, out: &mut Vec<Output>) {
        let Some(inst) = self.lbvs.get_mut(&(sq, leader)) else {
            return;
        };
        if inst.wedged() {
            return;
        }
        let proofs = inst.wedge();
        if self.st.update_state(&proofs) {
            self.note_decided(out);
        }
    }

    // --- gates ------------------------------------------------------------

    fn enter_gate(&mut self, sq: Sq, now: Tick, out: &mut Vec<Output>) {
        self.phase = Phase::Gate { sq };
        if self.st.commit.is_none() {
            if let Some(share) = self.help.own_request(self.cfg.id, sq) {
                out.push(Output::Broadcast {
                    msg: Message::HelpRequest { sq, share },
                });
            }
        }
        self.check_gate_release(now, out);
    }

    fn check_gate_release(&mut self, now: Tick, out: &mut Vec<Output>) {
        let Phase::Gate { sq } = self.phase else {
            return;
        };
        if !self.help.released(sq) {
            return;
        }
        let next = sq + 1;
        if is_wave_sq(self.cfg.n, next) {
            self.enter_wave(next, now, out);
        } else {
            self.enter_retry(next, now, out);
        }
    }

    // --- waves ------------------------------------------------------------

    fn enter_wave(&mut self, sq: Sq, now: Tick, out: &mut Vec<Output>) {
        self.fallback_entered = true;
        self.phase = Phase::WaveBarrier { sq };
        out.push(Output::Note(TraceNote::WaveStart { sq }));
        self.wave_entry(sq);
        for leader in 0..self.cfg.n {
            self.ensure_instance(sq, leader);
            if leader == self.cfg.id {
                self.leader_propose(sq, leader, out);
            } else {
                let events = {
                    let inst = self.lbvs.get_mut(&(sq, leader)).expect("just ensured");
                    inst.start(&self.st)
                };
                self.ingest_lbv(sq, leader, events, now, out);
            }
        }
        self.poll_wave(sq, now, out);
    }

    fn poll_wave(&mut self, sq: Sq, now: Tick, out: &mut Vec<Output>) {
        if self.phase == (Phase::WaveBarrier { sq }) {
            let ready = self.waves.get(&sq).is_some_and(|w| w.ready());
            if ready {
                self.phase = Phase::WaveElect { sq };
                let send_coin = self.wave_entry(sq).take_coin_send();
                if send_coin {
                    let share = share_sign(self.cfg.id, &dom_coin(sq));
                    out.push(Output::Broadcast {
                        msg: Message::CoinShare { sq, share },
                    });
                }
            }
        }
        if self.phase == (Phase::WaveElect { sq }) {
            if let Some(elected) = self.waves.get(&sq).and_then(|w| w.elected()) {
                self.finish_wave(sq, elected, now, out);
            }
        }
    }

    fn finish_wave(&mut self, sq: Sq, elected: PartyId, now: Tick, out: &mut Vec<Output>) {
        out.push(Output::Note(TraceNote::Elected {
            sq,
            leader: elected,
        }));
        let mut elected_proofs = ViewProofs {
            sq,
            leader: elected,
            ..Default::default()
        };
        let leaders: Vec<PartyId> = self
            .lbvs
            .range((sq, 0)..=(sq, PartyId::MAX))
            .map(|((_, l), _)| *l)
            .collect();
        for leader in leaders {
            let inst = self.lbvs.get_mut(&(sq, leader)).expect("listed above");
            if inst.wedged() {
                continue;
            }
            let proofs = inst.wedge();
            if leader == elected {
                elected_proofs = proofs;
            }
        }
        // Only the elected view's certificates survive into durable state.
        if self.st.update_state(&elected_proofs) {
            self.note_decided(out);
        }
        self.enter_exchange(sq, now, out);
    }

    fn enter_exchange(&mut self, sq: Sq, now: Tick, out: &mut Vec<Output>) {
        self.phase = Phase::Exchange { sq };
        if self.exchange_sent.insert(sq) {
            out.push(Output::Broadcast {
                msg: Message::Exchange {
                    sq,
                    key: self.st.key.clone(),
                    value: self.st.value,
                    commit: self.st.commit.clone(),
                },
            });
        }
        if let Some(buffered) = self.exchange_buffer.remove(&sq) {
            for (from, msg) in buffered {
                if let Message::Exchange {
                    sq,
                    key,
                    value,
                    commit,
                } = msg
                {
                    self.apply_exchange(from, sq, key, value, commit, out);
                }
            }
        }
        self.poll_exchange(sq, now, out);
    }

    fn apply_exchange(
        &mut self,
        from: PartyId,
        sq: Sq,
        key: Option<crate::messages::Key>,
        value: Option<Value>,
        commit: Option<crate::messages::Commit>,
        out: &mut Vec<Output>,
    ) {
        let (n, quorum) = (self.cfg.n, self.cfg.quorum());
        if let (Some(k), Some(v)) = (&key, &value) {
            self.st.check_update_key(k, v, n, quorum);
        }
        if let Some(c) = &commit {
            if self.st.check_update_commit(c, n, quorum) {
                self.note_decided(out);
            }
        }
        self.exchange_applied.entry(sq).or_default().insert(from);
    }

    fn poll_exchange(&mut self, sq: Sq, now: Tick, out: &mut Vec<Output>) {
        if self.phase != (Phase::Exchange { sq }) {
            return;
        }
        let applied = self.exchange_applied.get(&sq).map_or(0, |s| s.len());
        if applied >= self.cfg.quorum() {
            self.enter_gate(sq, now, out);
        }
    }

    // --- retry slots --------------------------------------------------------

    fn enter_retry(&mut self, sq: Sq, now: Tick, out: &mut Vec<Output>) {
        self.phase = Phase::RetrySlot { sq };
        let leader = static_leader(self.cfg.n, sq).expect("retry slot leader");
        self.ensure_instance(sq, leader);
        if leader == self.cfg.id {
            // Unconditional: even a decided leader proposes here, so that
            // parties released by a complaint can still catch up.
            self.leader_propose(sq, leader, out);
        } else {
            let events = {
                let inst = self.lbvs.get_mut(&(sq, leader)).expect("just ensured");
                inst.start(&self.st)
            };
            self.ingest_lbv(sq, leader, events, now, out);
        }
        out.push(Output::SetTimer {
            at: now + retry_wedge_after(self.cfg.delta),
            kind: TimerKind::RetryWedge(sq),
        });
    }

    // --- message dispatch -----------------------------------------------

    fn on_message(&mut self, now: Tick, from: PartyId, msg: Message, out: &mut Vec<Output>) {
        match msg {
            Message::PreKeyStep { sq, leader, .. }
            | Message::KeyStep { sq, leader, .. }
            | Message::LockStep { sq, leader, .. }
            | Message::CommitStep { sq, leader, .. }
            | Message::KeyShare { sq, leader, .. }
            | Message::LockShare { sq, leader, .. }
            | Message::CommitShare { sq, leader, .. } => {
                self.ensure_instance(sq, leader);
                let events = {
                    let inst = self.lbvs.get_mut(&(sq, leader)).expect("just ensured");
                    inst.on_message(from, msg, &self.st)
                };
                self.ingest_lbv(sq, leader, events, now, out);
            }

            Message::KeyRequest => {
                if self.key_request_served.insert(from) {
                    out.push(Output::Send {
                        to: from,
                        msg: Message::KeyReply {
                            key: self.st.key.clone(),
                            value: self.st.value,
                        },
                    });
                }
            }
            Message::KeyReply { key, value } => {
                // Validated evidence is safe to adopt no matter who asked.
                if let (Some(k), Some(v)) = (key, value) {
                    self.st
                        .check_update_key(&k, &v, self.cfg.n, self.cfg.quorum());
                }
            }

            Message::ViewDone { sq, leader, share } => {
                if leader == self.cfg.id && is_wave_sq(self.cfg.n, sq) {
                    let ready = self.wave_entry(sq).note_view_done(from, &share);
                    if ready {
                        let share = share_sign(self.cfg.id, &dom_share_ready(sq));
                        out.push(Output::Broadcast {
                            msg: Message::ShareReady { sq, share },
                        });
                    }
                }
            }
            Message::ShareReady { sq, share } => {
                if is_wave_sq(self.cfg.n, sq) {
                    let proof = self.wave_entry(sq).note_share_ready(from, &share);
                    if let Some(proof) = proof {
                        out.push(Output::Broadcast {
                            msg: Message::BarrierReady { sq, proof },
                        });
                    }
                    self.poll_wave(sq, now, out);
                }
            }
            Message::BarrierReady { sq, proof } => {
                if is_wave_sq(self.cfg.n, sq) {
                    let o = self.wave_entry(sq).note_barrier_ready(&proof);
                    if o.echo {
                        out.push(Output::Broadcast {
                            msg: Message::BarrierReady { sq, proof },
                        });
                    }
                    self.poll_wave(sq, now, out);
                }
            }
            Message::CoinShare { sq, share } => {
                if is_wave_sq(self.cfg.n, sq) {
                    self.wave_entry(sq).note_coin_share(from, &share);
                    self.poll_wave(sq, now, out);
                }
            }

            Message::Exchange {
                sq,
                key,
                value,
                commit,
            } => {
                if self.st.leaders.contains_key(&sq) {
                    self.apply_exchange(from, sq, key, value, commit, out);
                    self.poll_exchange(sq, now, out);
                } else {
                    self.exchange_buffer.entry(sq).or_default().push((
                        from,
                        Message::Exchange {
                            sq,
                            key,
                            value,
                            commit,
                        },
                    ));
                }
            }

            Message::HelpRequest { sq, share } => {
                let o = self.help.note_request(from, sq, &share, self.cfg.small());
                if let Some(to) = o.reply_to {
                    out.push(Output::Send {
                        to,
                        msg: Message::HelpReply {
                            sq,
                            commit: self.st.commit.clone(),
                        },
                    });
                }
                if let Some(proof) = o.complain {
                    out.push(Output::Note(TraceNote::ComplainValidated { sq }));
                    out.push(Output::Broadcast {
                        msg: Message::Complain { sq, proof },
                    });
                    self.check_gate_release(now, out);
                }
            }
            Message::HelpReply { sq: _, commit } => {
                if let Some(c) = commit {
                    if self
                        .st
                        .check_update_commit(&c, self.cfg.n, self.cfg.quorum())
                    {
                        self.note_decided(out);
                    }
                }
            }
            Message::Complain { sq, proof } => {
                let o = self.help.note_complain(sq, &proof, self.cfg.small());
                if o.newly_validated {
                    out.push(Output::Note(TraceNote::ComplainValidated { sq }));
                }
                if o.echo {
                    out.push(Output::Broadcast {
                        msg: Message::Complain { sq, proof },
                    });
                }
                self.check_gate_release(now, out);
            }
        }
    }

    // --- shared plumbing --------------------------------------------------

    fn ensure_instance(&mut self, sq: Sq, leader: PartyId) {
        let cfg = &self.cfg;
        self.lbvs.entry((sq, leader)).or_insert_with(|| {
            LbvInstance::new(LbvParams {
                me: cfg.id,
                sq,
                leader,
                n: cfg.n,
                quorum: cfg.quorum(),
            })
        });
    }

    fn wave_entry(&mut self, sq: Sq) -> &mut WaveState {
        let cfg = &self.cfg;
        self.waves.entry(sq).or_insert_with(|| {
            WaveState::new(WaveParams {
                me: cfg.id,
                sq,
                n: cfg.n,
                quorum: cfg.quorum(),
                small: cfg.small(),
                coin_key: cfg.coin_key,
            })
        })
    }

    fn ingest_lbv(
        &mut self,
        sq: Sq,
        leader: PartyId,
        events: Vec<LbvEvent>,
        _now: Tick,
        out: &mut Vec<Output>,
    ) {
        for ev in events {
            match ev {
                LbvEvent::Send { to, msg } => out.push(Output::Send { to, msg }),
                LbvEvent::Broadcast { msg } => out.push(Output::Broadcast { msg }),
                LbvEvent::StoredKeyProof => out.push(Output::Note(TraceNote::ProofStored {
                    sq,
                    leader,
                    kind: ProofKind::Key,
                })),
                LbvEvent::StoredLockProof => out.push(Output::Note(TraceNote::ProofStored {
                    sq,
                    leader,
                    kind: ProofKind::Lock,
                })),
                LbvEvent::Completed => {
                    out.push(Output::Note(TraceNote::ProofStored {
                        sq,
                        leader,
                        kind: ProofKind::Commit,
                    }));
                    if is_wave_sq(self.cfg.n, sq) {
                        let share = share_sign(self.cfg.id, &dom_view_done(sq, leader));
                        out.push(Output::Send {
                            to: leader,
                            msg: Message::ViewDone { sq, leader, share },
                        });
                    }
                }
            }
        }
    }

    fn note_decided(&mut self, out: &mut Vec<Output>) {
        if self.decided_emitted {
            return;
        }
        if let Some(value) = self.st.decided() {
            self.decided_emitted = true;
            out.push(Output::Decided { value });
        }
    }
}
