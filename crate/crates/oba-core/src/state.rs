//! Durable per-party agreement state carried across views.
//!
//! A party tracks the highest key it has seen (and that key's value), the
//! highest view it is locked on, its commit certificate once one exists,
//! and the leader every wedged view ran with.  The leader map is what
//! later views consult to validate keys and commits that reference an
//! earlier view.

use std::collections::BTreeMap;

use crate::crypto::{threshold_validate, PartyId, Sq, ThresholdSig};
use crate::messages::{dom_lock_step, dom_pre_key, Commit, Key, Value};

/// Everything a wedged view hands back: whichever certificates the party
/// obtained while the view ran.  Each certificate carries the value it is
/// bound to — a faulty leader can run the three rounds on different
/// values, so the bindings are tracked per certificate, not per view.
#[derive(Debug, Clone, Default)]
pub struct ViewProofs {
    pub sq: Sq,
    pub leader: PartyId,
    /// First-round aggregate and the value it certifies.
    pub key: Option<(Value, ThresholdSig)>,
    /// Second-round aggregate; its presence locks the view number.
    pub lock: Option<ThresholdSig>,
    /// Third-round aggregate and the value it certifies.
    pub commit: Option<(Value, ThresholdSig)>,
}

/// Durable state of one party.
#[derive(Debug, Clone, Default)]
pub struct LocalState {
    /// Highest view this party is locked on: it will only accept
    /// proposals carrying a key at least this high.
    pub lock: Option<Sq>,
    /// Highest key obtained so far.
    pub key: Option<Key>,
    /// The value bound to `key`.
    pub value: Option<Value>,
    /// Commit certificate, set at most once.
    pub commit: Option<Commit>,
    /// Leader of every view folded into this state.
    pub leaders: BTreeMap<Sq, PartyId>,
}

impl LocalState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decided value, if any.  A party decides exactly when its commit
    /// certificate is set.
    pub fn decided(&self) -> Option<Value> {
        self.commit.as_ref().map(|c| c.val)
    }

    /// Leader of view `sq` as far as this party knows: folded views
    /// first, otherwise the static schedule.
    pub fn leader_of(&self, sq: Sq, n: usize) -> Option<PartyId> {
        self.leaders
            .get(&sq)
            .copied()
            .or_else(|| static_leader(n, sq))
    }

    /// Fold a wedged view's certificates into the durable state.
    ///
    /// The key advances only to a strictly higher view, the lock is
    /// monotone, and the commit certificate is written at most once —
    /// a party already holding one ignores later commit evidence.
    /// Returns true iff this call set the commit certificate (i.e. the
    /// party decides now).
    pub fn update_state(&mut self, p: &ViewProofs) -> bool {
        self.leaders.insert(p.sq, p.leader);

        if let Some((v, kp)) = &p.key {
            if self.key.as_ref().is_none_or(|k| k.sq < p.sq) {
                self.key = Some(Key {
                    sq: p.sq,
                    proof: kp.clone(),
                });
                self.value = Some(*v);
            }
        }
        if p.lock.is_some() && self.lock.is_none_or(|l| l < p.sq) {
            self.lock = Some(p.sq);
        }
        if let Some((v, cp)) = &p.commit {
            if self.commit.is_none() {
                self.commit = Some(Commit {
                    val: *v,
                    sq: p.sq,
                    proof: cp.clone(),
                });
                return true;
            }
        }
        false
    }

    /// Validate a key received from another party and adopt it if it is
    /// strictly higher than the current one.  Returns true iff adopted.
    ///
    /// A key for view `sq` is an aggregate of `quorum` first-step replies
    /// of that view, so it validates against the first-step domain under
    /// the leader this party knows for `sq`.
    pub fn check_update_key(&mut self, key: &Key, value: &Value, n: usize, quorum: usize) -> bool {
        let Some(leader) = self.leader_of(key.sq, n) else {
            return false;
        };
        if !threshold_validate(&dom_pre_key(key.sq, leader, value), &key.proof, quorum) {
            return false;
        }
        if self.key.as_ref().is_none_or(|k| k.sq < key.sq) {
            self.key = Some(key.clone());
            self.value = Some(*value);
            return true;
        }
        false
    }

    /// Validate a commit certificate received from another party and
    /// adopt it if this party has none yet.  Returns true iff adopted
    /// (i.e. the party decides now).
    ///
    /// A commit for view `sq` aggregates `quorum` third-step replies, so
    /// it validates against the third-step domain of that view.
    pub fn check_update_commit(&mut self, commit: &Commit, n: usize, quorum: usize) -> bool {
        if self.commit.is_some() {
            return false;
        }
        let Some(leader) = self.leader_of(commit.sq, n) else {
            return false;
        };
        if !threshold_validate(
            &dom_lock_step(commit.sq, leader, &commit.val),
            &commit.proof,
            quorum,
        ) {
            return false;
        }
        self.commit = Some(commit.clone());
        true
    }
}

// --- view numbering ----------------------------------------------------

/// Leader of view `sq` fixed by the schedule, when there is one.
///
/// Views `1..=n` are the optimistic slots, led round-robin by parties
/// `0..n`.  After the slots, view `n+2` opens the first fallback wave and
/// waves take every second number from there; each wave `sq` is followed
/// by a deterministic retry slot `sq+1` led round-robin starting from
/// party 0.  Wave views have no scheduled leader — their leader is
/// elected, and recorded per party when the wave wedges.
pub fn static_leader(n: usize, sq: Sq) -> Option<PartyId> {
    if sq >= 1 && sq <= n as Sq {
        return Some((sq - 1) as PartyId);
    }
    if is_rr_slot(n, sq) {
        let rank = (sq - (n as Sq + 3)) / 2;
        return Some((rank % n as Sq) as PartyId);
    }
    None
}

/// True iff `sq` numbers a fallback wave.
pub fn is_wave_sq(n: usize, sq: Sq) -> bool {
    sq >= n as Sq + 2 && (sq - n as Sq).is_multiple_of(2)
}

/// True iff `sq` numbers a post-wave retry slot.
pub fn is_rr_slot(n: usize, sq: Sq) -> bool {
    sq >= n as Sq + 3 && (sq - n as Sq) % 2 == 1
}
