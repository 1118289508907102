//! Mock threshold signature scheme and the leader-election hash.
//!
//! The scheme stands in for a (t+1)-out-of-n / (n-t)-out-of-n unique
//! threshold signature setup.  A share is the signer's index plus a
//! domain-tagged digest of the signed bytes; an aggregate is the digest
//! plus the distinct signer set it was built from.  Nothing here is
//! cryptographically hard — unforgeability is structural: the fields are
//! private, only [`share_sign`] and [`threshold_sign`] construct tokens,
//! and adversary plugins are only ever handed a signer bound to their own
//! party index.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Party index, `0..n`.
pub type PartyId = usize;

/// Sequence number of a view/phase in the protocol composition.
pub type Sq = u64;

/// Output of the mock hash, 32 bytes of SHA-256.
pub type Digest = [u8; 32];

/// Scheme tag mixed into every digest so signed bytes can never collide
/// with raw message bytes from another context.
const SCHEME_TAG: &[u8] = b"oba.share.v1";

fn payload_digest(msg: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(SCHEME_TAG);
    h.update((msg.len() as u64).to_le_bytes());
    h.update(msg);
    h.finalize().into()
}

/// A single party's signature share over one byte string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigShare {
    signer: PartyId,
    payload_digest: Digest,
}

impl SigShare {
    /// Index of the party that produced this share.
    pub fn signer(&self) -> PartyId {
        self.signer
    }
}

/// Aggregate of `threshold` distinct shares over one byte string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSig {
    payload_digest: Digest,
    signers: BTreeSet<PartyId>,
    threshold: usize,
}

impl ThresholdSig {
    /// Number of distinct signers aggregated.
    pub fn signer_count(&self) -> usize {
        self.signers.len()
    }

    /// The threshold the aggregate was constructed for.
    pub fn threshold(&self) -> usize {
        self.threshold
    }
}

/// Aggregation failures from [`threshold_sign`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    /// Fewer distinct signers than the requested threshold.
    #[error("insufficient shares: got {got} distinct signers, need {need}")]
    InsufficientShares { got: usize, need: usize },
    /// The shares do not all sign the same byte string.
    #[error("mixed payloads: shares sign different byte strings")]
    MixedPayload,
}

/// Sign `msg` as party `signer`.
pub fn share_sign(signer: PartyId, msg: &[u8]) -> SigShare {
    SigShare {
        signer,
        payload_digest: payload_digest(msg),
    }
}

/// True iff `share` was produced by [`share_sign`] of `signer` on exactly `msg`.
pub fn share_validate(msg: &[u8], signer: PartyId, share: &SigShare) -> bool {
    share.signer == signer && share.payload_digest == payload_digest(msg)
}

/// Aggregate shares into a threshold signature.
///
/// Duplicate shares from one signer count once.  All shares must sign the
/// same byte string.
pub fn threshold_sign(
    shares: &[SigShare],
    threshold: usize,
) -> Result<ThresholdSig, AggregateError> {
    let Some(first) = shares.first() else {
        return Err(AggregateError::InsufficientShares {
            got: 0,
            need: threshold,
        });
    };
    if shares
        .iter()
        .any(|s| s.payload_digest != first.payload_digest)
    {
        return Err(AggregateError::MixedPayload);
    }
    let signers: BTreeSet<PartyId> = shares.iter().map(|s| s.signer).collect();
    if signers.len() < threshold {
        return Err(AggregateError::InsufficientShares {
            got: signers.len(),
            need: threshold,
        });
    }
    Ok(ThresholdSig {
        payload_digest: first.payload_digest,
        signers,
        threshold,
    })
}

/// True iff `sig` aggregates at least `required` distinct shares on `msg`.
pub fn threshold_validate(msg: &[u8], sig: &ThresholdSig, required: usize) -> bool {
    sig.payload_digest == payload_digest(msg)
        && sig.signers.len() >= sig.threshold
        && sig.signers.len() >= required
}

/// Map a coin aggregate onto a party index.
///
/// The draw depends only on the signed payload (never the signer set), so
/// every party that aggregates any valid share subset for the same coin
/// computes the same index.  `coin_key` is a per-run PRF key: without it
/// the draw cannot be evaluated, which is what keeps future coins
/// unpredictable to adversary plugins.
pub fn hash_to_leader(coin_sig: &ThresholdSig, n: usize, coin_key: u64) -> PartyId {
    let mut h = Sha256::new();
    h.update(b"oba.coin.prf.v1");
    h.update(coin_key.to_le_bytes());
    h.update(coin_sig.payload_digest);
    let out = h.finalize();
    let draw = u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"));
    index_from_draw(draw, n)
}

/// Reduce a raw 64-bit draw onto `0..n`.
pub fn index_from_draw(draw: u64, n: usize) -> PartyId {
    (draw % n as u64) as PartyId
}
