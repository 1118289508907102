//! Optimistic Byzantine agreement with a word-counting network simulator.
//!
//! The protocol decides one externally valid value among `n` parties of
//! which at most `t < n/3` are faulty.  It opens with `n` linear leader
//! slots on a synchronous schedule — a fault-free run decides within one
//! slot at linear word cost — and falls back to randomized leaderless
//! waves that stay live under full asynchrony, at quadratic cost per
//! wave.  Between fallback phases a help gate lets decided parties stop
//! as soon as nobody provably needs them.
//!
//! The crate ships the protocol itself ([`party`]), a deterministic
//! discrete-event network ([`sim`]) with pluggable delay policies and
//! misbehaviors ([`plugins`]), and least-squares helpers ([`metrics`])
//! for checking how measured word counts scale.

pub mod crypto;
pub mod fallback;
pub mod halting;
pub mod lbv;
pub mod messages;
pub mod metrics;
pub mod party;
pub mod plugins;
pub mod sim;
pub mod state;
pub mod sync_path;

pub use crypto::{PartyId, Sq};
pub use messages::{Commit, Key, Message, Value};
pub use metrics::{fit_complexity, least_squares, ComplexityFit, CostPoint, Fit, MetricsError};
pub use party::{Event, Output, Party, PartyConfig, ProofKind, TimerKind, TraceNote};
pub use sim::{run, run_traced, Mode, RunConfig, RunOutcome, RunReport, TraceEvent};
pub use state::LocalState;
pub use sync_path::Tick;
