//! Timing of the optimistic slot schedule.
//!
//! The protocol opens with `n` leader slots on a fixed clock.  Slot 1 is
//! key-free: its leader proposes immediately at time zero and the slot is
//! wedged after the seven message hops of one view (7Δ).  Every later
//! slot buys its leader an extra round trip to collect keys before
//! proposing, so it spans 9Δ: the leader asks for keys at the slot start,
//! proposes at +2Δ, and everyone wedges at +9Δ.  Each slot starts exactly
//! when the previous one wedges.
//!
//! The deterministic retry slot that follows each fallback wave reuses
//! the view machinery but runs on a local clock (parties leave a wave at
//! different times) and skips the key request — its leader holds a fresh
//! key from the wave's state exchange.  One extra Δ absorbs the skew in
//! slot entry across parties, hence an 8Δ budget.

use crate::crypto::Sq;

/// Simulated time, in abstract ticks.
pub type Tick = u64;

/// Hops a single view needs from proposal to commit delivery:
/// four leader steps and three follower replies.
pub const VIEW_HOPS: Tick = 7;

/// Hops a keyed slot needs: a key-request round trip plus one view.
pub const KEYED_SLOT_HOPS: Tick = 2 + VIEW_HOPS;

/// Hops budgeted for a post-wave retry slot: one view plus one hop of
/// entry skew.
pub const RETRY_SLOT_HOPS: Tick = VIEW_HOPS + 1;

/// Global start time of slot `j` (1-based).
pub fn slot_start(j: Sq, delta: Tick) -> Tick {
    debug_assert!(j >= 1);
    if j == 1 {
        0
    } else {
        VIEW_HOPS * delta + (j - 2) * KEYED_SLOT_HOPS * delta
    }
}

/// Global time at which every party wedges slot `j`.
pub fn wedge_at(j: Sq, delta: Tick) -> Tick {
    if j == 1 {
        VIEW_HOPS * delta
    } else {
        slot_start(j, delta) + KEYED_SLOT_HOPS * delta
    }
}

/// Global time at which slot `j`'s leader proposes: immediately in the
/// key-free first slot, after the key-request round trip otherwise.
pub fn leader_propose_at(j: Sq, delta: Tick) -> Tick {
    if j == 1 {
        0
    } else {
        slot_start(j, delta) + 2 * delta
    }
}

/// Local wedge offset for a post-wave retry slot, relative to the
/// moment a party enters it.
pub fn retry_wedge_after(delta: Tick) -> Tick {
    RETRY_SLOT_HOPS * delta
}
