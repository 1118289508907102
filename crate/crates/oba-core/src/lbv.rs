//! One leader-based view: the linear four-step exchange between a leader
//! and its followers.
//!
//! The leader broadcasts four steps (proposal, key step, lock step,
//! commit step); followers answer each step with a signature share sent
//! only to the leader, and the leader aggregates each round of shares
//! into the certificate it attaches to the next step.  All communication
//! is leader-to-all or all-to-leader, so a view costs O(n) words.
//!
//! The leader participates in its own view as an ordinary follower via
//! self-delivery, so share collection needs no special casing.
//!
//! Safety hinges on one rule: a follower answers each step at most once
//! per view, no matter what values the steps carry.  Two conflicting
//! third-round certificates would need `n - t` signers each, hence at
//! least one honest double-signer in their intersection — which the
//! once-only rule forbids.

use std::collections::BTreeMap;

use crate::crypto::{
    share_sign, share_validate, threshold_sign, threshold_validate, PartyId, SigShare, Sq,
    ThresholdSig,
};
use crate::messages::{dom_key_step, dom_lock_step, dom_pre_key, Key, Message, Value};
use crate::state::{LocalState, ViewProofs};

/// Static parameters of one view at one party.
#[derive(Debug, Clone, Copy)]
pub struct LbvParams {
    /// This party.
    pub me: PartyId,
    /// View number.
    pub sq: Sq,
    /// The view's leader.
    pub leader: PartyId,
    /// Number of parties.
    pub n: usize,
    /// Aggregation threshold for every certificate, `n - t`.
    pub quorum: usize,
}

/// What a view hands back to its driver as it reacts to a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LbvEvent {
    /// Point-to-point message to send.
    Send { to: PartyId, msg: Message },
    /// Message to broadcast to all parties (including self).
    Broadcast { msg: Message },
    /// This party now holds the view's first-round certificate.
    StoredKeyProof,
    /// This party now holds the view's second-round certificate.
    StoredLockProof,
    /// This party now holds the view's third-round certificate: the view
    /// has completed here.
    Completed,
}

/// One view's live state at one party.
#[derive(Debug, Clone)]
pub struct LbvInstance {
    params: LbvParams,
    started: bool,
    wedged: bool,
    done: bool,
    /// Messages that arrived before this party started the view.
    pending: Vec<(PartyId, Message)>,
    /// The value the view currently runs on, as far as this party knows.
    proposal: Option<Value>,

    // Follower side: one reply per step, ever.
    sent_key_share: bool,
    sent_lock_share: bool,
    sent_commit_share: bool,

    // Leader side: collected shares, one aggregation per round.
    key_shares: BTreeMap<PartyId, SigShare>,
    lock_shares: BTreeMap<PartyId, SigShare>,
    commit_shares: BTreeMap<PartyId, SigShare>,

    // Certificates obtained so far, each bound to its value.
    key: Option<(Value, ThresholdSig)>,
    lock: Option<ThresholdSig>,
    commit: Option<(Value, ThresholdSig)>,
}

impl LbvInstance {
    pub fn new(params: LbvParams) -> Self {
        LbvInstance {
            params,
            started: false,
            wedged: false,
            done: false,
            pending: Vec::new(),
            proposal: None,
            sent_key_share: false,
            sent_lock_share: false,
            sent_commit_share: false,
            key_shares: BTreeMap::new(),
            lock_shares: BTreeMap::new(),
            commit_shares: BTreeMap::new(),
            key: None,
            lock: None,
            commit: None,
        }
    }

    pub fn params(&self) -> &LbvParams {
        &self.params
    }

    pub fn started(&self) -> bool {
        self.started
    }

    pub fn wedged(&self) -> bool {
        self.wedged
    }

    /// The view completed at this party: it holds the third-round
    /// certificate.
    pub fn completed(&self) -> bool {
        self.done
    }

    /// Start participating as a follower, draining anything that arrived
    /// early.
    pub fn start(&mut self, st: &LocalState) -> Vec<LbvEvent> {
        if self.started || self.wedged {
            return Vec::new();
        }
        self.started = true;
        self.drain_pending(st)
    }

    /// Start the view as its leader: broadcast the proposal (with the
    /// leader's highest key attached, if any), then drain early arrivals.
    pub fn start_with_proposal(
        &mut self,
        value: Value,
        key: Option<Key>,
        st: &LocalState,
    ) -> Vec<LbvEvent> {
        if self.started || self.wedged {
            return Vec::new();
        }
        debug_assert_eq!(self.params.me, self.params.leader);
        self.started = true;
        self.proposal = Some(value);
        let mut events = vec![LbvEvent::Broadcast {
            msg: Message::PreKeyStep {
                sq: self.params.sq,
                leader: self.params.leader,
                value,
                key,
            },
        }];
        events.extend(self.drain_pending(st));
        events
    }

    /// Stop the view and hand back whatever certificates it produced.
    /// A wedged view ignores all further messages.
    pub fn wedge(&mut self) -> ViewProofs {
        self.wedged = true;
        self.pending.clear();
        ViewProofs {
            sq: self.params.sq,
            leader: self.params.leader,
            key: self.key.clone(),
            lock: self.lock.clone(),
            commit: self.commit.clone(),
        }
    }

    /// Feed one incoming message to the view.
    pub fn on_message(&mut self, from: PartyId, msg: Message, st: &LocalState) -> Vec<LbvEvent> {
        if self.wedged {
            return Vec::new();
        }
        if !self.started {
            self.pending.push((from, msg));
            return Vec::new();
        }
        self.handle(from, msg, st)
    }

    fn drain_pending(&mut self, st: &LocalState) -> Vec<LbvEvent> {
        let pending = std::mem::take(&mut self.pending);
        let mut events = Vec::new();
        for (from, msg) in pending {
            events.extend(self.handle(from, msg, st));
        }
        events
    }

    fn handle(&mut self, from: PartyId, msg: Message, st: &LocalState) -> Vec<LbvEvent> {
        let LbvParams {
            me,
            sq,
            leader,
            n,
            quorum,
        } = self.params;
        let mut out = Vec::new();
        match msg {
            // --- follower side: leader steps --------------------------
            Message::PreKeyStep {
                sq: msq,
                leader: mleader,
                value,
                key,
            } => {
                if from != leader || msq != sq || mleader != leader || self.sent_key_share {
                    return out;
                }
                if !first_step_ok(st, &value, &key, n, quorum) {
                    return out;
                }
                self.proposal = Some(value);
                self.sent_key_share = true;
                out.push(LbvEvent::Send {
                    to: leader,
                    msg: Message::KeyShare {
                        sq,
                        leader,
                        share: share_sign(me, &dom_pre_key(sq, leader, &value)),
                    },
                });
            }
            Message::KeyStep {
                sq: msq,
                leader: mleader,
                value,
                proof,
            } => {
                if from != leader || msq != sq || mleader != leader || self.sent_lock_share {
                    return out;
                }
                if !threshold_validate(&dom_pre_key(sq, leader, &value), &proof, quorum) {
                    return out;
                }
                if self.key.is_none() {
                    self.key = Some((value, proof));
                    out.push(LbvEvent::StoredKeyProof);
                }
                self.proposal = Some(value);
                self.sent_lock_share = true;
                out.push(LbvEvent::Send {
                    to: leader,
                    msg: Message::LockShare {
                        sq,
                        leader,
                        share: share_sign(me, &dom_key_step(sq, leader, &value)),
                    },
                });
            }
            Message::LockStep {
                sq: msq,
                leader: mleader,
                value,
                proof,
            } => {
                if from != leader || msq != sq || mleader != leader || self.sent_commit_share {
                    return out;
                }
                if !threshold_validate(&dom_key_step(sq, leader, &value), &proof, quorum) {
                    return out;
                }
                if self.lock.is_none() {
                    self.lock = Some(proof);
                    out.push(LbvEvent::StoredLockProof);
                }
                self.proposal = Some(value);
                self.sent_commit_share = true;
                out.push(LbvEvent::Send {
                    to: leader,
                    msg: Message::CommitShare {
                        sq,
                        leader,
                        share: share_sign(me, &dom_lock_step(sq, leader, &value)),
                    },
                });
            }
            Message::CommitStep {
                sq: msq,
                leader: mleader,
                value,
                proof,
            } => {
                if from != leader || msq != sq || mleader != leader || self.done {
                    return out;
                }
                if !threshold_validate(&dom_lock_step(sq, leader, &value), &proof, quorum) {
                    return out;
                }
                if self.commit.is_none() {
                    self.commit = Some((value, proof));
                    out.push(LbvEvent::Completed);
                }
                self.done = true;
            }

            // --- leader side: follower shares --------------------------
            Message::KeyShare {
                sq: msq,
                leader: mleader,
                share,
            } => {
                if me != leader || msq != sq || mleader != leader {
                    return out;
                }
                let Some(value) = self.proposal else {
                    return out;
                };
                if self.key.is_some()
                    || !share_validate(&dom_pre_key(sq, leader, &value), from, &share)
                {
                    return out;
                }
                self.key_shares.insert(from, share);
                if self.key_shares.len() >= quorum {
                    let shares: Vec<SigShare> = self.key_shares.values().cloned().collect();
                    let proof =
                        threshold_sign(&shares, quorum).expect("validated shares aggregate");
                    self.key = Some((value, proof.clone()));
                    out.push(LbvEvent::StoredKeyProof);
                    out.push(LbvEvent::Broadcast {
                        msg: Message::KeyStep {
                            sq,
                            leader,
                            value,
                            proof,
                        },
                    });
                }
            }
            Message::LockShare {
                sq: msq,
                leader: mleader,
                share,
            } => {
                if me != leader || msq != sq || mleader != leader {
                    return out;
                }
                let Some(value) = self.proposal else {
                    return out;
                };
                if self.lock.is_some()
                    || !share_validate(&dom_key_step(sq, leader, &value), from, &share)
                {
                    return out;
                }
                self.lock_shares.insert(from, share);
                if self.lock_shares.len() >= quorum {
                    let shares: Vec<SigShare> = self.lock_shares.values().cloned().collect();
                    let proof =
                        threshold_sign(&shares, quorum).expect("validated shares aggregate");
                    self.lock = Some(proof.clone());
                    out.push(LbvEvent::StoredLockProof);
                    out.push(LbvEvent::Broadcast {
                        msg: Message::LockStep {
                            sq,
                            leader,
                            value,
                            proof,
                        },
                    });
                }
            }
            Message::CommitShare {
                sq: msq,
                leader: mleader,
                share,
            } => {
                if me != leader || msq != sq || mleader != leader {
                    return out;
                }
                let Some(value) = self.proposal else {
                    return out;
                };
                if self.commit.is_some()
                    || !share_validate(&dom_lock_step(sq, leader, &value), from, &share)
                {
                    return out;
                }
                self.commit_shares.insert(from, share);
                if self.commit_shares.len() >= quorum {
                    let shares: Vec<SigShare> = self.commit_shares.values().cloned().collect();
                    let proof =
                        threshold_sign(&shares, quorum).expect("validated shares aggregate");
                    self.commit = Some((value, proof.clone()));
                    self.done = true;
                    out.push(LbvEvent::Completed);
                    out.push(LbvEvent::Broadcast {
                        msg: Message::CommitStep {
                            sq,
                            leader,
                            value,
                            proof,
                        },
                    });
                }
            }

            // Anything else is not a view message.
            _ => {}
        }
        out
    }
}

/// The follower's acceptance check for a leader's proposal.
///
/// The value must be externally valid; a party locked on some view only
/// accepts proposals whose attached key is at least that high; and an
/// attached key must itself be a valid first-round certificate binding
/// this very value under the leader of the key's view.
pub fn first_step_ok(
    st: &LocalState,
    value: &Value,
    key: &Option<Key>,
    n: usize,
    quorum: usize,
) -> bool {
    if !value.externally_valid() {
        return false;
    }
    let lock_ok = match (st.lock, key) {
        (None, _) => true,
        (Some(l), Some(k)) => k.sq >= l,
        (Some(_), None) => false,
    };
    if !lock_ok {
        return false;
    }
    if let Some(k) = key {
        let Some(key_leader) = st.leader_of(k.sq, n) else {
            return false;
        };
        if !threshold_validate(&dom_pre_key(k.sq, key_leader, value), &k.proof, quorum) {
            return false;
        }
    }
    true
}
