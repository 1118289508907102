//! The help-and-halt gate run between fallback phases.
//!
//! A party that reaches a gate decided would like to stop — but stopping
//! is only safe if nobody still needs it.  So undecided parties broadcast
//! a signed help request for the gate; every party answers each distinct
//! requester once with its commit certificate (if it has one), which lets
//! stragglers catch up.  Any party that collects `t + 1` distinct
//! requests for one gate aggregates them into a complaint — proof that
//! honest parties may be stuck — broadcasts it, and echoes the first
//! complaint it receives.  A validated complaint releases everyone at
//! that gate into the next phase; without one, a decided party parks at
//! the gate for good, which is how the protocol halts.
//!
//! With `t + 1` signatures a complaint contains at least one honest
//! requester, so fewer than `t + 1` real stragglers can never force the
//! network to keep running: they are served by replies instead.

use std::collections::{BTreeMap, BTreeSet};

use crate::crypto::{
    share_sign, share_validate, threshold_sign, threshold_validate, PartyId, SigShare, Sq,
    ThresholdSig,
};
use crate::messages::dom_help;

/// Outcome of recording a help request.
#[derive(Debug, Default)]
pub struct RequestOutcome {
    /// The requester has not been answered at this gate yet: send it a
    /// reply now.
    pub reply_to: Option<PartyId>,
    /// The request crossed the complaint threshold: broadcast this.
    pub complain: Option<ThresholdSig>,
}

/// Outcome of recording a complaint.
#[derive(Debug, Default)]
pub struct ComplainOutcome {
    /// First validated complaint for its gate.
    pub newly_validated: bool,
    /// Re-broadcast the complaint so every party is released.
    pub echo: bool,
}

/// Per-party ledger of help requests, replies, and complaints, across
/// all gates.
#[derive(Debug, Clone, Default)]
pub struct HelpState {
    /// Valid request shares seen, by gate then requester.
    requests: BTreeMap<Sq, BTreeMap<PartyId, SigShare>>,
    /// (requester, gate) pairs already answered.
    replied: BTreeSet<(PartyId, Sq)>,
    /// Gates where this party broadcast its own request.
    requested: BTreeSet<Sq>,
    /// Gates where this party broadcast or echoed a complaint.
    complain_sent: BTreeSet<Sq>,
    /// Gates with a validated complaint: parked parties are released.
    complained: BTreeSet<Sq>,
}

impl HelpState {
    pub fn new() -> Self {
        Self::default()
    }

    /// True iff gate `sq` has a validated complaint.
    pub fn released(&self, sq: Sq) -> bool {
        self.complained.contains(&sq)
    }

    /// Sign this party's own help request for gate `sq`, once.
    pub fn own_request(&mut self, me: PartyId, sq: Sq) -> Option<SigShare> {
        if self.requested.insert(sq) {
            Some(share_sign(me, &dom_help(sq)))
        } else {
            None
        }
    }

    /// Record a help request from `from` at gate `sq`.
    ///
    /// `small` is the complaint threshold, `t + 1`.
    pub fn note_request(
        &mut self,
        from: PartyId,
        sq: Sq,
        share: &SigShare,
        small: usize,
    ) -> RequestOutcome {
        let mut out = RequestOutcome::default();
        if !share_validate(&dom_help(sq), from, share) {
            return out;
        }
        if self.replied.insert((from, sq)) {
            out.reply_to = Some(from);
        }
        let gate = self.requests.entry(sq).or_default();
        gate.insert(from, share.clone());
        if gate.len() >= small && !self.complain_sent.contains(&sq) {
            let shares: Vec<SigShare> = gate.values().cloned().collect();
            let proof = threshold_sign(&shares, small).expect("validated shares aggregate");
            self.complain_sent.insert(sq);
            self.complained.insert(sq);
            out.complain = Some(proof);
        }
        out
    }

    /// Record a complaint for gate `sq`.
    pub fn note_complain(&mut self, sq: Sq, proof: &ThresholdSig, small: usize) -> ComplainOutcome {
        let mut out = ComplainOutcome::default();
        if !threshold_validate(&dom_help(sq), proof, small) {
            return out;
        }
        if self.complained.insert(sq) {
            out.newly_validated = true;
            out.echo = self.complain_sent.insert(sq);
        }
        out
    }
}
