//! Safety properties under randomized configurations.
//!
//! These properties hold for every mode, adversary mix, and seed — not
//! just the curated scenarios — so they are checked over random draws:
//! honest parties never disagree or decide invalid values, the metering
//! is internally consistent, runs replay identically, and equivocating
//! leaders cannot split the honest set.

use std::collections::BTreeSet;

use oba_core::sim::{run, run_traced, Mode, RunConfig};
use oba_core::Value;
use proptest::prelude::*;

const BEHAVIORS: [&str; 5] = [
    "silent",
    "crash-at",
    "equivocate-leader",
    "spam-help",
    "follow-protocol",
];

/// A bounded random scenario: caps keep adversarial draws from running
/// the fallback forever, and a capped run must still be safe.
fn scenario(n: usize, mode: Mode, behavior: &str, corrupt_bits: u64, seed: u64) -> RunConfig {
    let t = (n - 1) / 3;
    let corrupted: BTreeSet<usize> = (0..n)
        .filter(|i| corrupt_bits & (1 << i) != 0)
        .take(t)
        .collect();
    RunConfig::new(n, mode)
        .with_seed(seed)
        .with_corruptions(corrupted, behavior)
        .with_max_waves(12)
        .with_max_time(60_000)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn honest_parties_agree_on_an_externally_valid_value(
        n in 4usize..=7,
        mode_idx in 0usize..5,
        behavior_idx in 0usize..5,
        corrupt_bits in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let cfg = scenario(n, Mode::ALL[mode_idx], BEHAVIORS[behavior_idx], corrupt_bits, seed);
        let corrupted = cfg.corrupted.clone();
        let outcome = run_traced(cfg);
        let mut first: Option<Value> = None;
        for id in (0..n).filter(|id| !corrupted.contains(id)) {
            if let Some(v) = outcome.decided[id] {
                prop_assert!(v.externally_valid(), "party {} decided an invalid value", id);
                match first {
                    None => first = Some(v),
                    Some(w) => prop_assert_eq!(v, w, "parties disagree"),
                }
            }
        }
    }

    #[test]
    fn metering_is_internally_consistent(
        n in 4usize..=7,
        mode_idx in 0usize..5,
        behavior_idx in 0usize..5,
        corrupt_bits in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let cfg = scenario(n, Mode::ALL[mode_idx], BEHAVIORS[behavior_idx], corrupt_bits, seed);
        let r = run(cfg);
        let by_phase: u64 = r.words_by_phase.values().sum();
        let by_type: u64 = r.words_by_type.values().sum();
        prop_assert_eq!(by_phase, r.honest_words, "phase attribution loses words");
        prop_assert_eq!(by_type, r.honest_words, "type attribution loses words");
        prop_assert!(r.honest_to_honest_words <= r.honest_words);
        prop_assert_eq!(r.waves, r.elected_completed.len(), "one election verdict per wave");
    }

    #[test]
    fn equivocating_leaders_cannot_split_honest_parties(
        n in 4usize..=7,
        seed in any::<u64>(),
    ) {
        // Worst tolerated equivocation under synchrony: every corrupted
        // slot leader serves a second value. The honest parties must all
        // decide the same value inside the leader slots.
        let t = (n - 1) / 3;
        let cfg = RunConfig::sync(n)
            .with_seed(seed)
            .with_corruptions((0..t).collect(), "equivocate-leader");
        let outcome = run_traced(cfg);
        prop_assert!(!outcome.report.fallback_entered_any, "synchrony must not fall back");
        prop_assert_eq!(outcome.report.complains_validated, 0);
        let decided: Vec<Value> = (t..n)
            .map(|id| {
                outcome.decided[id].expect("every honest party decides under synchrony")
            })
            .collect();
        prop_assert!(decided.windows(2).all(|w| w[0] == w[1]), "parties disagree");
        prop_assert!(decided[0].externally_valid());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn reruns_are_byte_identical(
        n in 4usize..=7,
        mode_idx in 0usize..5,
        behavior_idx in 0usize..5,
        corrupt_bits in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let cfg = scenario(n, Mode::ALL[mode_idx], BEHAVIORS[behavior_idx], corrupt_bits, seed);
        let a = serde_json::to_string(&run(cfg.clone())).unwrap();
        let b = serde_json::to_string(&run(cfg)).unwrap();
        prop_assert_eq!(a, b);
    }
}
