//! Barrier and election bookkeeping for one fallback wave.
//!
//! In a wave every party leads its own view while following all others.
//! The wave closes in three stages.  First, whenever a view completes at
//! a party, that party tells the view's leader; a leader whose own view
//! completed at `n - t` parties broadcasts a signed ready claim.  Second,
//! any party holding `n - t` distinct ready claims aggregates them into a
//! barrier certificate, broadcasts it, and everyone echoes the first
//! certificate they see — so entering the election is all-or-nothing
//! among honest parties.  Third, parties reveal coin shares; `t + 1` of
//! them determine the elected leader, and only the elected view's
//! certificates survive into durable state.
//!
//! The election result depends only on the wave number and the run's
//! hidden coin key — never on which `t + 1` shares were aggregated — so
//! every party computes the same leader, while an adversary scheduling
//! messages before the barrier cannot predict it.

use std::collections::BTreeMap;

use crate::crypto::{
    hash_to_leader, share_validate, threshold_sign, threshold_validate, PartyId, SigShare, Sq,
    ThresholdSig,
};
use crate::messages::{dom_coin, dom_share_ready, dom_view_done};

/// Static parameters of one wave at one party.
#[derive(Debug, Clone, Copy)]
pub struct WaveParams {
    pub me: PartyId,
    pub sq: Sq,
    pub n: usize,
    /// Certificate threshold, `n - t`.
    pub quorum: usize,
    /// Coin threshold, `t + 1`.
    pub small: usize,
    /// Per-run key of the election hash.
    pub coin_key: u64,
}

/// Outcome of recording a barrier certificate.
#[derive(Debug, Default)]
pub struct BarrierOutcome {
    /// First valid certificate seen: the party enters the election.
    pub newly_ready: bool,
    /// Re-broadcast the certificate (first sighting, nothing sent yet).
    pub echo: bool,
}

/// One wave's collection state at one party.
#[derive(Debug, Clone)]
pub struct WaveState {
    params: WaveParams,
    /// Completion signals for this party's own view.
    view_dones: BTreeMap<PartyId, SigShare>,
    sent_share_ready: bool,
    /// Ready claims from view leaders.
    share_readys: BTreeMap<PartyId, SigShare>,
    /// Barrier passed: this party is in (or past) the election.
    ready: bool,
    /// A barrier certificate has been broadcast or echoed.
    barrier_sent: bool,
    sent_coin: bool,
    coin_shares: BTreeMap<PartyId, SigShare>,
    elected: Option<PartyId>,
}

impl WaveState {
    pub fn new(params: WaveParams) -> Self {
        WaveState {
            params,
            view_dones: BTreeMap::new(),
            sent_share_ready: false,
            share_readys: BTreeMap::new(),
            ready: false,
            barrier_sent: false,
            sent_coin: false,
            coin_shares: BTreeMap::new(),
            elected: None,
        }
    }

    /// Barrier passed at this party.
    pub fn ready(&self) -> bool {
        self.ready
    }

    /// Elected leader, once `t + 1` coin shares arrived.
    pub fn elected(&self) -> Option<PartyId> {
        self.elected
    }

    /// Claim the one coin-share broadcast this party gets per wave.
    pub fn take_coin_send(&mut self) -> bool {
        !std::mem::replace(&mut self.sent_coin, true)
    }

    /// Record that this party's own view completed at `from`.
    /// Returns true when the ready claim should be broadcast now.
    pub fn note_view_done(&mut self, from: PartyId, share: &SigShare) -> bool {
        let WaveParams { me, sq, quorum, .. } = self.params;
        if !share_validate(&dom_view_done(sq, me), from, share) {
            return false;
        }
        self.view_dones.insert(from, share.clone());
        if self.view_dones.len() >= quorum && !self.sent_share_ready {
            self.sent_share_ready = true;
            return true;
        }
        false
    }

    /// Record a ready claim from a view leader.  Returns the barrier
    /// certificate when this claim completes it (broadcast it, then
    /// treat the barrier as passed).
    pub fn note_share_ready(&mut self, from: PartyId, share: &SigShare) -> Option<ThresholdSig> {
        let WaveParams { sq, quorum, .. } = self.params;
        if !share_validate(&dom_share_ready(sq), from, share) {
            return None;
        }
        self.share_readys.insert(from, share.clone());
        if self.share_readys.len() >= quorum && !self.barrier_sent {
            let shares: Vec<SigShare> = self.share_readys.values().cloned().collect();
            let proof = threshold_sign(&shares, quorum).expect("validated shares aggregate");
            self.barrier_sent = true;
            self.ready = true;
            return Some(proof);
        }
        None
    }

    /// Record a received barrier certificate.
    pub fn note_barrier_ready(&mut self, proof: &ThresholdSig) -> BarrierOutcome {
        let WaveParams { sq, quorum, .. } = self.params;
        let mut out = BarrierOutcome::default();
        if !threshold_validate(&dom_share_ready(sq), proof, quorum) {
            return out;
        }
        if !self.ready {
            self.ready = true;
            out.newly_ready = true;
            out.echo = !std::mem::replace(&mut self.barrier_sent, true);
        }
        out
    }

    /// Record a coin share.  Returns the elected leader when the share
    /// completes the coin.
    pub fn note_coin_share(&mut self, from: PartyId, share: &SigShare) -> Option<PartyId> {
        let WaveParams {
            sq,
            n,
            small,
            coin_key,
            ..
        } = self.params;
        if !share_validate(&dom_coin(sq), from, share) {
            return None;
        }
        self.coin_shares.insert(from, share.clone());
        if self.coin_shares.len() >= small && self.elected.is_none() {
            let shares: Vec<SigShare> = self.coin_shares.values().cloned().collect();
            let proof = threshold_sign(&shares, small).expect("validated shares aggregate");
            let leader = hash_to_leader(&proof, n, coin_key);
            self.elected = Some(leader);
            return Some(leader);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::share_sign;

    const N: usize = 4;
    const QUORUM: usize = 3;
    const SMALL: usize = 2;
    const COIN_KEY: u64 = 0x5eed;

    fn params(me: PartyId) -> WaveParams {
        WaveParams {
            me,
            sq: 6,
            n: N,
            quorum: QUORUM,
            small: SMALL,
            coin_key: COIN_KEY,
        }
    }

    fn view_done(from: PartyId, for_leader: PartyId) -> SigShare {
        share_sign(from, &dom_view_done(6, for_leader))
    }

    fn ready_claim(from: PartyId) -> SigShare {
        share_sign(from, &dom_share_ready(6))
    }

    fn coin(from: PartyId) -> SigShare {
        share_sign(from, &dom_coin(6))
    }

    #[test]
    fn ready_claim_fires_at_quorum_once() {
        let mut w = WaveState::new(params(1));
        assert!(!w.note_view_done(0, &view_done(0, 1)));
        assert!(!w.note_view_done(1, &view_done(1, 1)));
        // Duplicate signal does not advance the count.
        assert!(!w.note_view_done(1, &view_done(1, 1)));
        assert!(w.note_view_done(2, &view_done(2, 1)));
        // Crossing the threshold again never re-fires.
        assert!(!w.note_view_done(3, &view_done(3, 1)));
    }

    #[test]
    fn completion_signals_for_other_views_are_rejected() {
        let mut w = WaveState::new(params(1));
        // Signal bound to view leader 2, handed to leader 1's collector.
        assert!(!w.note_view_done(0, &view_done(0, 2)));
        // Signer mismatch.
        assert!(!w.note_view_done(0, &view_done(3, 1)));
        assert!(!w.note_view_done(2, &view_done(2, 1)));
        assert!(
            !w.note_view_done(3, &view_done(3, 1)),
            "only two valid signals so far"
        );
    }

    #[test]
    fn barrier_aggregates_at_quorum_and_validates() {
        let mut w = WaveState::new(params(0));
        assert!(w.note_share_ready(0, &ready_claim(0)).is_none());
        assert!(w.note_share_ready(1, &ready_claim(1)).is_none());
        let proof = w
            .note_share_ready(2, &ready_claim(2))
            .expect("third claim completes");
        assert!(w.ready());
        assert!(threshold_validate(&dom_share_ready(6), &proof, QUORUM));
        // Already sent: a fourth claim does not re-aggregate.
        assert!(w.note_share_ready(3, &ready_claim(3)).is_none());
    }

    #[test]
    fn received_barrier_echoes_once() {
        let shares: Vec<SigShare> = (0..3).map(ready_claim).collect();
        let proof = threshold_sign(&shares, QUORUM).unwrap();

        let mut w = WaveState::new(params(3));
        let first = w.note_barrier_ready(&proof);
        assert!(first.newly_ready && first.echo);
        assert!(w.ready());
        let second = w.note_barrier_ready(&proof);
        assert!(!second.newly_ready && !second.echo);
    }

    #[test]
    fn own_barrier_broadcast_suppresses_echo() {
        let mut w = WaveState::new(params(0));
        for p in 0..3 {
            w.note_share_ready(p, &ready_claim(p));
        }
        let shares: Vec<SigShare> = (0..3).map(ready_claim).collect();
        let proof = threshold_sign(&shares, QUORUM).unwrap();
        // Self-delivery of the certificate this party already broadcast.
        let back = w.note_barrier_ready(&proof);
        assert!(!back.newly_ready && !back.echo);
    }

    #[test]
    fn forged_barriers_are_rejected() {
        let mut w = WaveState::new(params(0));
        let thin = threshold_sign(&[ready_claim(0), ready_claim(1)], SMALL).unwrap();
        let out = w.note_barrier_ready(&thin);
        assert!(!out.newly_ready && !w.ready());
    }

    #[test]
    fn election_is_subset_independent() {
        // Two parties aggregate disjoint coin-share subsets of size t+1
        // and must elect the same leader.
        let mut a = WaveState::new(params(0));
        let mut b = WaveState::new(params(1));
        assert!(a.note_coin_share(0, &coin(0)).is_none());
        let la = a
            .note_coin_share(1, &coin(1))
            .expect("t+1 shares complete the coin");
        assert!(b.note_coin_share(2, &coin(2)).is_none());
        let lb = b
            .note_coin_share(3, &coin(3))
            .expect("t+1 shares complete the coin");
        assert_eq!(la, lb);
        assert_eq!(a.elected(), Some(la));
        // Late shares do not change the result.
        assert!(a.note_coin_share(2, &coin(2)).is_none());
        assert_eq!(a.elected(), Some(la));
    }

    #[test]
    fn invalid_coin_shares_are_ignored() {
        let mut w = WaveState::new(params(0));
        // Share over the wrong wave.
        let wrong = share_sign(0, &dom_coin(8));
        assert!(w.note_coin_share(0, &wrong).is_none());
        // Signer mismatch.
        assert!(w.note_coin_share(1, &coin(2)).is_none());
        assert!(
            w.note_coin_share(2, &coin(2)).is_none(),
            "only one valid share"
        );
        assert!(w.note_coin_share(3, &coin(3)).is_some());
    }

    #[test]
    fn coin_send_is_claimed_once() {
        let mut w = WaveState::new(params(0));
        assert!(w.take_coin_send());
        assert!(!w.take_coin_send());
    }
}
