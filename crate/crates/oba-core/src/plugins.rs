//! Pluggable network adversaries: delay policies and byzantine behaviors.
//!
//! A delay policy is the network scheduler — for every message it picks
//! an arrival time, which the simulator then clamps into the legal
//! window for the current synchrony assumption.  A behavior replaces a
//! corrupted party's logic entirely; it can send, broadcast, set wakeup
//! timers, and sign as itself, but it is never handed the election key
//! and cannot forge other parties' signatures.
//!
//! Both kinds are looked up by name so harnesses can select them from
//! configuration; `DELAY_POLICIES` and `BEHAVIORS` list what is built in.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::{share_sign, PartyId, SigShare, Sq};
use crate::messages::{dom_help, Message, Value};
use crate::party::{Event, Output, Party, PartyConfig, TimerKind};
use crate::sync_path::{leader_propose_at, wedge_at, Tick};

// --- network side -------------------------------------------------------

/// One message in flight.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub from: PartyId,
    pub to: PartyId,
    pub sent_at: Tick,
    pub msg: Message,
}

/// Arrival bounds the simulator enforces after the policy has chosen:
/// at least one tick of latency, and — for honest senders under a
/// synchrony assumption — delivery by `max(sent, GST) + Δ`.
#[derive(Debug, Clone, Copy)]
pub struct LegalWindow {
    pub earliest: Tick,
    pub latest: Option<Tick>,
}

/// The adversarial message scheduler.  Returns the desired arrival
/// tick; the simulator clamps it into the legal window and counts
/// clamped deliveries, so policies may ask for the impossible.
pub trait DelayPolicy {
    fn name(&self) -> &'static str;
    fn delay(&mut self, env: &Envelope, window: &LegalWindow, rng: &mut ChaCha8Rng) -> Tick;
}

/// Built-in delay policies, with a one-line description each.
pub const DELAY_POLICIES: &[(&str, &str)] = &[
    (
        "max-delay",
        "every message arrives as late as legally possible (4Δ when unbounded)",
    ),
    (
        "uniform",
        "arrival uniform over the legal window (up to 4Δ when unbounded)",
    ),
    (
        "fixed-large",
        "every message takes 10Δ, clamped to the window",
    ),
    (
        "starve-leader",
        "messages touching a rotating victim take 40Δ; the rest max-delay",
    ),
];

/// Look up a built-in delay policy by name.
pub fn make_delay_policy(name: &str, n: usize, delta: Tick) -> Option<Box<dyn DelayPolicy>> {
    match name {
        "max-delay" => Some(Box::new(MaxDelay { delta })),
        "uniform" => Some(Box::new(UniformDelay { delta })),
        "fixed-large" => Some(Box::new(FixedLarge { delta })),
        "starve-leader" => Some(Box::new(StarveLeader { n, delta })),
        _ => None,
    }
}

struct MaxDelay {
    delta: Tick,
}

impl DelayPolicy for MaxDelay {
    fn name(&self) -> &'static str {
        "max-delay"
    }

    fn delay(&mut self, env: &Envelope, window: &LegalWindow, _rng: &mut ChaCha8Rng) -> Tick {
        window.latest.unwrap_or(env.sent_at + 4 * self.delta)
    }
}

struct UniformDelay {
    delta: Tick,
}

impl DelayPolicy for UniformDelay {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn delay(&mut self, env: &Envelope, window: &LegalWindow, rng: &mut ChaCha8Rng) -> Tick {
        let hi = window
            .latest
            .unwrap_or(env.sent_at + 4 * self.delta)
            .max(window.earliest);
        rng.gen_range(window.earliest..=hi)
    }
}

struct FixedLarge {
    delta: Tick,
}

impl DelayPolicy for FixedLarge {
    fn name(&self) -> &'static str {
        "fixed-large"
    }

    fn delay(&mut self, env: &Envelope, _window: &LegalWindow, _rng: &mut ChaCha8Rng) -> Tick {
        env.sent_at + 10 * self.delta
    }
}

/// Picks a victim that rotates every 20Δ and stalls all of its traffic,
/// in and out.  After stabilization the clamp makes this toothless —
/// which is the point of measuring it.
struct StarveLeader {
    n: usize,
    delta: Tick,
}

impl DelayPolicy for StarveLeader {
    fn name(&self) -> &'static str {
        "starve-leader"
    }

    fn delay(&mut self, env: &Envelope, window: &LegalWindow, _rng: &mut ChaCha8Rng) -> Tick {
        let victim = ((env.sent_at / (20 * self.delta)) as usize) % self.n;
        if env.from == victim || env.to == victim {
            env.sent_at + 40 * self.delta
        } else {
            window.latest.unwrap_or(env.sent_at + 4 * self.delta)
        }
    }
}

// --- behavior side ------------------------------------------------------

/// Timers a simulated node can own: the protocol's own timers, or an
/// opaque wakeup cookie for behaviors that need a clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeTimer {
    Protocol(TimerKind),
    Wakeup(u64),
}

/// Everything that can happen to a simulated node.
#[derive(Debug, Clone)]
pub enum NodeEvent {
    Start,
    Timer(NodeTimer),
    Message { from: PartyId, msg: Message },
}

/// What a behavior asked the simulator to do.
#[derive(Debug, Clone)]
pub enum ByzAction {
    Send { to: PartyId, msg: Message },
    Broadcast { msg: Message },
    SetTimer { at: Tick, timer: NodeTimer },
}

/// Capability handle a behavior acts through.  Deliberately narrow: a
/// corrupted party can talk and schedule wakeups, and sign only as
/// itself; the election key is not reachable from here.
pub struct ByzCtx {
    me: PartyId,
    actions: Vec<ByzAction>,
}

impl ByzCtx {
    pub fn new(me: PartyId) -> Self {
        ByzCtx {
            me,
            actions: Vec::new(),
        }
    }

    pub fn me(&self) -> PartyId {
        self.me
    }

    pub fn send(&mut self, to: PartyId, msg: Message) {
        self.actions.push(ByzAction::Send { to, msg });
    }

    pub fn broadcast(&mut self, msg: Message) {
        self.actions.push(ByzAction::Broadcast { msg });
    }

    pub fn set_timer(&mut self, at: Tick, timer: NodeTimer) {
        self.actions.push(ByzAction::SetTimer { at, timer });
    }

    /// Sign as this party.  Forging other identities is not on offer.
    pub fn sign(&self, domain: &[u8]) -> SigShare {
        share_sign(self.me, domain)
    }

    /// Drain the accumulated actions (the simulator calls this).
    pub fn take_actions(&mut self) -> Vec<ByzAction> {
        std::mem::take(&mut self.actions)
    }
}

/// A corrupted party's brain: consumes node events, acts through the
/// context.  Implementations must be deterministic.
pub trait Behavior {
    fn name(&self) -> &'static str;
    fn on_event(&mut self, now: Tick, event: &NodeEvent, ctx: &mut ByzCtx);
}

/// Built-in behaviors, with a one-line description each.
pub const BEHAVIORS: &[(&str, &str)] = &[
    (
        "follow-protocol",
        "runs the real protocol (corrupted in name only)",
    ),
    ("silent", "sends nothing, ever"),
    (
        "crash-at",
        "follows the protocol, then halts: bare form fails right before its own slot's \
         commit step; crash-at:<tick> pins an absolute time",
    ),
    (
        "equivocate-leader",
        "follows the protocol but serves one victim a second value on all of its own \
         leader steps",
    ),
    (
        "spam-help",
        "broadcasts three duplicate help requests for the first gate",
    ),
];

/// Build a built-in behavior by name for the party described by `cfg`.
/// `crash-at` accepts an optional `:tick` suffix.
pub fn make_behavior(name: &str, cfg: PartyConfig) -> Option<Box<dyn Behavior>> {
    if let Some(rest) = name.strip_prefix("crash-at:") {
        let at: Tick = rest.parse().ok()?;
        return Some(Box::new(CrashAt {
            crash_at: at,
            party: Party::new(cfg),
        }));
    }
    match name {
        "follow-protocol" => Some(Box::new(FollowProtocol {
            party: Party::new(cfg),
        })),
        "silent" => Some(Box::new(Silent)),
        "crash-at" => {
            let at = default_crash_tick(&cfg);
            Some(Box::new(CrashAt {
                crash_at: at,
                party: Party::new(cfg),
            }))
        }
        "equivocate-leader" => {
            let victim = if cfg.id == cfg.n - 1 {
                cfg.n - 2
            } else {
                cfg.n - 1
            };
            Some(Box::new(EquivocateLeader {
                victim,
                n: cfg.n,
                party: Party::new(cfg),
            }))
        }
        "spam-help" => Some(Box::new(SpamHelp {
            n: cfg.n,
            delta: cfg.delta,
            fired: false,
        })),
        _ => None,
    }
}

/// Check a behavior name without building one (for config validation).
pub fn behavior_exists(name: &str) -> bool {
    if let Some(rest) = name.strip_prefix("crash-at:") {
        return rest.parse::<Tick>().is_ok();
    }
    BEHAVIORS.iter().any(|(b, _)| *b == name)
}

/// The most expensive failure a slot leader can stage: participate
/// through its own slot's lock round, then die before the commit step.
fn default_crash_tick(cfg: &PartyConfig) -> Tick {
    let own_slot = (cfg.id + 1) as Sq;
    let propose_at = if own_slot == 1 {
        0
    } else {
        leader_propose_at(own_slot, cfg.delta)
    };
    propose_at + 5 * cfg.delta
}

/// Map a node event onto the wrapped party, if it is for the protocol.
fn step_party(party: &mut Party, now: Tick, event: &NodeEvent) -> Option<Vec<Output>> {
    let ev = match event {
        NodeEvent::Start => Event::Start,
        NodeEvent::Timer(NodeTimer::Protocol(kind)) => Event::Timer(*kind),
        NodeEvent::Timer(NodeTimer::Wakeup(_)) => return None,
        NodeEvent::Message { from, msg } => Event::Message {
            from: *from,
            msg: msg.clone(),
        },
    };
    Some(party.step(now, ev))
}

/// Forward a party's outputs through the byzantine context unchanged
/// (decision signals and trace notes are internal and dropped).
fn relay_outputs(outputs: Vec<Output>, ctx: &mut ByzCtx) {
    for out in outputs {
        match out {
            Output::Send { to, msg } => ctx.send(to, msg),
            Output::Broadcast { msg } => ctx.broadcast(msg),
            Output::SetTimer { at, kind } => ctx.set_timer(at, NodeTimer::Protocol(kind)),
            Output::Decided { .. } | Output::Note(_) => {}
        }
    }
}

struct FollowProtocol {
    party: Party,
}

impl Behavior for FollowProtocol {
    fn name(&self) -> &'static str {
        "follow-protocol"
    }

    fn on_event(&mut self, now: Tick, event: &NodeEvent, ctx: &mut ByzCtx) {
        if let Some(outputs) = step_party(&mut self.party, now, event) {
            relay_outputs(outputs, ctx);
        }
    }
}

struct Silent;

impl Behavior for Silent {
    fn name(&self) -> &'static str {
        "silent"
    }

    fn on_event(&mut self, _now: Tick, _event: &NodeEvent, _ctx: &mut ByzCtx) {}
}

struct CrashAt {
    crash_at: Tick,
    party: Party,
}

impl Behavior for CrashAt {
    fn name(&self) -> &'static str {
        "crash-at"
    }

    fn on_event(&mut self, now: Tick, event: &NodeEvent, ctx: &mut ByzCtx) {
        if now >= self.crash_at {
            return;
        }
        if let Some(outputs) = step_party(&mut self.party, now, event) {
            relay_outputs(outputs, ctx);
        }
    }
}

struct EquivocateLeader {
    victim: PartyId,
    n: usize,
    party: Party,
}

impl EquivocateLeader {
    fn altered(msg: &Message) -> Message {
        let mut out = msg.clone();
        match &mut out {
            Message::PreKeyStep { value, .. }
            | Message::KeyStep { value, .. }
            | Message::LockStep { value, .. }
            | Message::CommitStep { value, .. } => {
                *value = Value::valid(value.payload + 1000);
            }
            _ => {}
        }
        out
    }

    fn is_own_leader_step(&self, msg: &Message) -> bool {
        matches!(
            msg,
            Message::PreKeyStep { leader, .. }
            | Message::KeyStep { leader, .. }
            | Message::LockStep { leader, .. }
            | Message::CommitStep { leader, .. }
                if *leader == self.party.id()
        )
    }
}

impl Behavior for EquivocateLeader {
    fn name(&self) -> &'static str {
        "equivocate-leader"
    }

    fn on_event(&mut self, now: Tick, event: &NodeEvent, ctx: &mut ByzCtx) {
        let Some(outputs) = step_party(&mut self.party, now, event) else {
            return;
        };
        for out in outputs {
            match out {
                Output::Broadcast { msg } if self.is_own_leader_step(&msg) => {
                    // The second value goes to the victim alone; everyone
                    // else (this node included) sees the real proposal.
                    let altered = Self::altered(&msg);
                    for to in 0..self.n {
                        let copy = if to == self.victim {
                            altered.clone()
                        } else {
                            msg.clone()
                        };
                        ctx.send(to, copy);
                    }
                }
                other => relay_outputs(vec![other], ctx),
            }
        }
    }
}

struct SpamHelp {
    n: usize,
    delta: Tick,
    fired: bool,
}

impl Behavior for SpamHelp {
    fn name(&self) -> &'static str {
        "spam-help"
    }

    fn on_event(&mut self, _now: Tick, event: &NodeEvent, ctx: &mut ByzCtx) {
        match event {
            NodeEvent::Start => {
                ctx.set_timer(wedge_at(self.n as Sq, self.delta), NodeTimer::Wakeup(0));
            }
            NodeEvent::Timer(NodeTimer::Wakeup(_)) if !self.fired => {
                self.fired = true;
                let sq = (self.n + 1) as Sq;
                for _ in 0..3 {
                    let share = ctx.sign(&dom_help(sq));
                    ctx.broadcast(Message::HelpRequest { sq, share });
                }
            }
            _ => {}
        }
    }
}
