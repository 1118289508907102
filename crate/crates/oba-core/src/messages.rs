//! Wire messages, their signing domains, and the word-cost model.
//!
//! Communication cost is counted in words: one word holds a value, a
//! signature share, or an aggregated threshold signature.  Message tags
//! and bare sequence numbers ride for free, and every message sent costs
//! at least one word.  Composite certificates price as the sum of their
//! parts: a key is two words and a commit is three.

use serde::{Deserialize, Serialize};

use crate::crypto::{PartyId, SigShare, Sq, ThresholdSig};

// --- protocol values and certificates ---------------------------------

/// An externally valid proposal: an application payload plus the
/// validity proof that accompanies it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Value {
    pub payload: u64,
    pub proof: u64,
}

/// Produce the validity proof the mock external validator accepts.
pub fn mock_validity_proof(payload: u64) -> u64 {
    payload.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17) ^ 0xa5a5_5a5a
}

impl Value {
    /// Build a proposal the external validator accepts.
    pub fn valid(payload: u64) -> Self {
        Value {
            payload,
            proof: mock_validity_proof(payload),
        }
    }

    /// Check the proposal against the external validity predicate.
    pub fn externally_valid(&self) -> bool {
        self.proof == mock_validity_proof(self.payload)
    }
}

/// Evidence that some value gathered a first-round quorum in view `sq`:
/// unlocks proposing that value in later views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Key {
    pub sq: Sq,
    pub proof: ThresholdSig,
}

/// Evidence that a value may be decided: the value, the view that
/// produced the certificate, and the third-round aggregate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub val: Value,
    pub sq: Sq,
    pub proof: ThresholdSig,
}

// --- signing domains ---------------------------------------------------

/// Bytes signed by a first-step reply: binds the replier to the leader's
/// proposal in this view.  An aggregate over this domain is a key proof.
pub fn dom_pre_key(sq: Sq, leader: PartyId, value: &Value) -> Vec<u8> {
    domain("preKeyStep", sq, leader, value)
}

/// Bytes signed by a second-step reply; an aggregate is a lock proof.
pub fn dom_key_step(sq: Sq, leader: PartyId, value: &Value) -> Vec<u8> {
    domain("keyStep", sq, leader, value)
}

/// Bytes signed by a third-step reply; an aggregate is a commit proof.
pub fn dom_lock_step(sq: Sq, leader: PartyId, value: &Value) -> Vec<u8> {
    domain("lockStep", sq, leader, value)
}

fn domain(step: &str, sq: Sq, leader: PartyId, value: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(step.len() + 40);
    out.extend_from_slice(step.as_bytes());
    out.push(0);
    out.extend_from_slice(&sq.to_le_bytes());
    out.extend_from_slice(&(leader as u64).to_le_bytes());
    out.extend_from_slice(&value.payload.to_le_bytes());
    out.extend_from_slice(&value.proof.to_le_bytes());
    out
}

/// Bytes signed to tell a view's leader that the view completed at the
/// signer.
pub fn dom_view_done(sq: Sq, leader: PartyId) -> Vec<u8> {
    let mut out = tagged("viewDone", sq);
    out.extend_from_slice(&(leader as u64).to_le_bytes());
    out
}

/// Bytes signed to attest "my view of wave `sq` completed at n-t parties".
pub fn dom_share_ready(sq: Sq) -> Vec<u8> {
    tagged("shareReady", sq)
}

/// Bytes signed by a coin share for the election of wave `sq`.
pub fn dom_coin(sq: Sq) -> Vec<u8> {
    tagged("coin", sq)
}

/// Bytes signed by a help request at halting gate `sq`.
pub fn dom_help(sq: Sq) -> Vec<u8> {
    tagged("helpRequest", sq)
}

fn tagged(tag: &str, sq: Sq) -> Vec<u8> {
    let mut out = Vec::with_capacity(tag.len() + 9);
    out.extend_from_slice(tag.as_bytes());
    out.push(0);
    out.extend_from_slice(&sq.to_le_bytes());
    out
}

// --- messages ----------------------------------------------------------

/// Every message any party ever puts on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    /// Leader's first step: the proposal, with the highest key the leader
    /// holds (absent in a key-free view such as an optimistic first one).
    PreKeyStep {
        sq: Sq,
        leader: PartyId,
        value: Value,
        key: Option<Key>,
    },
    /// Follower's reply to the first step.
    KeyShare {
        sq: Sq,
        leader: PartyId,
        share: SigShare,
    },
    /// Leader's second step: the proposal plus the key proof.
    KeyStep {
        sq: Sq,
        leader: PartyId,
        value: Value,
        proof: ThresholdSig,
    },
    /// Follower's reply to the second step.
    LockShare {
        sq: Sq,
        leader: PartyId,
        share: SigShare,
    },
    /// Leader's third step: the proposal plus the lock proof.
    LockStep {
        sq: Sq,
        leader: PartyId,
        value: Value,
        proof: ThresholdSig,
    },
    /// Follower's reply to the third step.
    CommitShare {
        sq: Sq,
        leader: PartyId,
        share: SigShare,
    },
    /// Leader's final step: the proposal plus the commit proof.
    CommitStep {
        sq: Sq,
        leader: PartyId,
        value: Value,
        proof: ThresholdSig,
    },

    /// Slot leader asking everyone for their highest key before proposing.
    /// Carries nothing: the reply is validated evidence on its own.
    KeyRequest,
    /// Reply to a key request: the replier's current key and its value.
    KeyReply {
        key: Option<Key>,
        value: Option<Value>,
    },

    /// Wave participant telling a view's leader that the view is done.
    ViewDone {
        sq: Sq,
        leader: PartyId,
        share: SigShare,
    },
    /// Signed claim that n-t views of the wave completed.
    ShareReady { sq: Sq, share: SigShare },
    /// Aggregate of n-t ready claims; entering the election barrier.
    BarrierReady { sq: Sq, proof: ThresholdSig },
    /// One share of the shared coin for the wave's election.
    CoinShare { sq: Sq, share: SigShare },

    /// Post-election state exchange: key, value, and commit certificate.
    Exchange {
        sq: Sq,
        key: Option<Key>,
        value: Option<Value>,
        commit: Option<Commit>,
    },

    /// Undecided party asking for a decision proof at gate `sq`.
    HelpRequest { sq: Sq, share: SigShare },
    /// Reply to a help request: the replier's commit certificate, if any.
    HelpReply { sq: Sq, commit: Option<Commit> },
    /// Aggregate of t+1 help requests: proof someone is stuck, so nobody
    /// may halt at this gate.
    Complain { sq: Sq, proof: ThresholdSig },
}

impl Message {
    /// Wire tag, used for per-type cost attribution.
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::PreKeyStep { .. } => "preKeyStep",
            Message::KeyShare { .. } => "keyShare",
            Message::KeyStep { .. } => "keyStep",
            Message::LockShare { .. } => "lockShare",
            Message::LockStep { .. } => "lockStep",
            Message::CommitShare { .. } => "commitShare",
            Message::CommitStep { .. } => "commit",
            Message::KeyRequest => "keyRequest",
            Message::KeyReply { .. } => "keyReply",
            Message::ViewDone { .. } => "viewDone",
            Message::ShareReady { .. } => "shareReady",
            Message::BarrierReady { .. } => "barrierReady",
            Message::CoinShare { .. } => "coinShare",
            Message::Exchange { .. } => "exchange",
            Message::HelpRequest { .. } => "helpRequest",
            Message::HelpReply { .. } => "helpReply",
            Message::Complain { .. } => "complain",
        }
    }

    /// Cost of this message in words.
    ///
    /// One word per value, per share, and per aggregate; a key is two
    /// words (sequence number slot + aggregate ride with its value
    /// binding), a commit is three; tags and bare sequence numbers are
    /// free; any non-empty message costs at least one word.
    pub fn words(&self) -> u64 {
        let raw = match self {
            Message::PreKeyStep { key, .. } => 1 + key_words(key),
            Message::KeyShare { .. } | Message::LockShare { .. } | Message::CommitShare { .. } => 1,
            Message::KeyStep { .. } | Message::LockStep { .. } => 1 + 1,
            Message::CommitStep { .. } => 1 + 1,
            Message::KeyRequest => 0,
            Message::KeyReply { key, value } => key_words(key) + value.map_or(0, |_| 1),
            Message::ViewDone { .. } => 1,
            Message::ShareReady { .. } => 1,
            Message::BarrierReady { .. } => 1,
            Message::CoinShare { .. } => 1,
            Message::Exchange {
                key, value, commit, ..
            } => key_words(key) + value.map_or(0, |_| 1) + commit_words(commit),
            Message::HelpRequest { .. } => 1,
            Message::HelpReply { commit, .. } => commit_words(commit),
            Message::Complain { .. } => 1,
        };
        raw.max(1)
    }
}

fn key_words(key: &Option<Key>) -> u64 {
    if key.is_some() {
        2
    } else {
        0
    }
}

fn commit_words(commit: &Option<Commit>) -> u64 {
    if commit.is_some() {
        3
    } else {
        0
    }
}
