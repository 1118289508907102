//! The acceptance gate: eleven release criteria, one test per criterion.
//!
//! Each test prints exactly one `ACCEPTANCE <id> PASS|FAIL` line (visible
//! with `--nocapture`, and always shown for failures) and asserts the
//! criterion. Criteria 1, 3, 6, 9, and 10 share a single large run matrix
//! computed once and streamed into small aggregates; the remaining
//! criteria run their own dedicated sweeps. All tolerances are pinned as
//! constants next to the checks that use them.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::Instant;

use oba_core::metrics::least_squares;
use oba_core::sim::{run, run_traced, Mode, RunConfig, RunOutcome};
use oba_core::sync_path::wedge_at;
use oba_core::{PartyId, ProofKind, Sq, TraceNote, Value};
use rayon::prelude::*;

// --- Matrix dimensions and pinned tolerances -------------------------------

const MATRIX_N: [usize; 4] = [4, 7, 10, 13];
const MATRIX_SEEDS: u64 = 200;
const SWEEP_N: [usize; 5] = [4, 7, 10, 13, 16];
const DELTA: u64 = 10;

/// Scaling fits must explain at least this share of the variance.
const MIN_R_SQUARED: f64 = 0.99;
/// Help-spam overhead may deviate from the fitted C*n by at most this factor.
const SPAM_RESIDUAL_TOLERANCE: f64 = 0.25;
/// A wave elects a view some honest party completed at least this often.
const MIN_ELECTION_FREQUENCY: f64 = 0.33 - 0.05;
/// Waves sampled per adversary before the election frequency is judged.
const MIN_WAVE_SAMPLE: usize = 500;
/// Mean waves to decision under the fair-coin fallback (expected 3, plus slack).
const MAX_MEAN_WAVES: f64 = 3.0 + 0.5;
/// Fallback iterations an honest party may start between GST and deciding.
const MAX_WAVES_AFTER_GST: usize = 2;
/// Wall-clock budget for the shared matrix, in seconds.
const MATRIX_TIME_BUDGET: f64 = 600.0;

/// One named attack column of the matrix: a node behavior for the
/// corrupted parties plus, optionally, a scheduler policy override.
struct Adversary {
    name: &'static str,
    behavior: &'static str,
    policy: Option<&'static str>,
}

const ADVERSARIES: [Adversary; 5] = [
    Adversary {
        name: "silent",
        behavior: "silent",
        policy: None,
    },
    Adversary {
        name: "crash-at",
        behavior: "crash-at",
        policy: None,
    },
    Adversary {
        name: "equivocate-leader",
        behavior: "equivocate-leader",
        policy: None,
    },
    Adversary {
        name: "spam-help",
        behavior: "spam-help",
        policy: None,
    },
    // The starving scheduler is a network-side attack: the corrupted
    // parties follow the protocol while the scheduler stalls leaders.
    Adversary {
        name: "starve-leader",
        behavior: "follow-protocol",
        policy: Some("starve-leader"),
    },
];

fn matrix_config(mode: Mode, adversary: &Adversary, n: usize, seed: u64) -> RunConfig {
    let t = (n - 1) / 3;
    let mut cfg = RunConfig::new(n, mode)
        .with_seed(seed)
        .with_corruptions((0..t).collect(), adversary.behavior);
    if let Some(policy) = adversary.policy {
        cfg = cfg.with_policy(policy);
    }
    cfg
}

// --- Shared matrix pass -----------------------------------------------------

/// Aggregates distilled from one run (and merged across the matrix).
/// Only counters and first-failure notes are retained, never full runs.
#[derive(Default)]
struct MatrixStats {
    runs: usize,
    elapsed_secs: f64,
    disagreements: usize,
    validity_failures: usize,
    first_safety: Option<String>,
    sync_runs: usize,
    sync_fallbacks: usize,
    sync_complains: u64,
    causality_failures: usize,
    first_causality: Option<String>,
    capped: usize,
    noncapped_undecided: usize,
    first_undecided: Option<String>,
    /// Per adversary: (waves that elected a completed view, waves total)
    /// over the asynchronous column.
    elections: BTreeMap<&'static str, (usize, usize)>,
}

impl MatrixStats {
    fn merge(mut self, other: MatrixStats) -> MatrixStats {
        self.runs += other.runs;
        self.disagreements += other.disagreements;
        self.validity_failures += other.validity_failures;
        self.first_safety = self.first_safety.or(other.first_safety);
        self.sync_runs += other.sync_runs;
        self.sync_fallbacks += other.sync_fallbacks;
        self.sync_complains += other.sync_complains;
        self.causality_failures += other.causality_failures;
        self.first_causality = self.first_causality.or(other.first_causality);
        self.capped += other.capped;
        self.noncapped_undecided += other.noncapped_undecided;
        self.first_undecided = self.first_undecided.or(other.first_undecided);
        for (name, (hits, total)) in other.elections {
            let slot = self.elections.entry(name).or_insert((0, 0));
            slot.0 += hits;
            slot.1 += total;
        }
        self
    }

    fn from_run(adversary: &'static str, mode: Mode, outcome: &RunOutcome) -> MatrixStats {
        let r = &outcome.report;
        let tag = format!(
            "{} {} n={} f={} seed={}",
            r.mode, adversary, r.n, r.f, r.seed
        );
        let mut stats = MatrixStats {
            runs: 1,
            ..MatrixStats::default()
        };

        if let Err(why) = agreement_holds(outcome) {
            if why.contains("invalid") {
                stats.validity_failures = 1;
            } else {
                stats.disagreements = 1;
            }
            stats.first_safety = Some(format!("{tag}: {why}"));
        }
        if mode == Mode::Sync {
            stats.sync_runs = 1;
            stats.sync_fallbacks = usize::from(r.fallback_entered_any);
            stats.sync_complains = r.complains_validated;
        }
        if let Err(why) = causality_holds(outcome) {
            stats.causality_failures = 1;
            stats.first_causality = Some(format!("{tag}: {why}"));
        }
        if r.capped {
            stats.capped = 1;
        } else if r.decide_time_max.is_none() {
            stats.noncapped_undecided = 1;
            stats.first_undecided = Some(tag.clone());
        }
        if mode == Mode::Async {
            let hits = r.elected_completed.iter().filter(|&&hit| hit).count();
            stats
                .elections
                .insert(adversary, (hits, r.elected_completed.len()));
        }
        stats
    }
}

fn matrix() -> &'static MatrixStats {
    static MATRIX: OnceLock<MatrixStats> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let mut cells = Vec::new();
        for mode in Mode::ALL {
            for adversary in &ADVERSARIES {
                for n in MATRIX_N {
                    for seed in 0..MATRIX_SEEDS {
                        cells.push((mode, adversary, n, seed));
                    }
                }
            }
        }
        let started = Instant::now();
        let mut stats = cells
            .par_iter()
            .map(|&(mode, adversary, n, seed)| {
                let outcome = run_traced(matrix_config(mode, adversary, n, seed));
                MatrixStats::from_run(adversary.name, mode, &outcome)
            })
            .reduce(MatrixStats::default, MatrixStats::merge);
        stats.elapsed_secs = started.elapsed().as_secs_f64();
        stats
    })
}

// --- Per-run predicates ------------------------------------------------------

/// No two honest parties decide differently, and every decision passes
/// external validation.
fn agreement_holds(outcome: &RunOutcome) -> Result<(), String> {
    let r = &outcome.report;
    let mut first: Option<(usize, Value)> = None;
    for id in (0..r.n).filter(|id| !r.adversary.contains(id)) {
        if let Some(value) = outcome.decided[id] {
            if !value.externally_valid() {
                return Err(format!("party {id} decided an invalid value"));
            }
            match first {
                None => first = Some((id, value)),
                Some((other, w)) if w != value => {
                    return Err(format!("parties {other} and {id} disagree"));
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Certificates are stored in dependency order: a commit certificate for a
/// view appears only after at least t+1 honest parties stored that view's
/// lock certificate, and a lock certificate only after t+1 honest key
/// certificates. The trace is in event order, so a single forward scan
/// checks precedence.
fn causality_holds(outcome: &RunOutcome) -> Result<(), String> {
    let small = outcome.report.t + 1;
    let mut key_holders: BTreeMap<(Sq, PartyId), BTreeSet<PartyId>> = BTreeMap::new();
    let mut lock_holders: BTreeMap<(Sq, PartyId), BTreeSet<PartyId>> = BTreeMap::new();
    for event in &outcome.trace {
        let TraceNote::ProofStored { sq, leader, kind } = event.note else {
            continue;
        };
        let view = (sq, leader);
        match kind {
            ProofKind::Key => {
                key_holders.entry(view).or_default().insert(event.party);
            }
            ProofKind::Lock => {
                let keys = key_holders.get(&view).map_or(0, BTreeSet::len);
                if keys < small {
                    return Err(format!(
                        "lock certificate of view {view:?} stored after only {keys} honest key stores"
                    ));
                }
                lock_holders.entry(view).or_default().insert(event.party);
            }
            ProofKind::Commit => {
                let locks = lock_holders.get(&view).map_or(0, BTreeSet::len);
                if locks < small {
                    return Err(format!(
                        "commit certificate of view {view:?} stored after only {locks} honest lock stores"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Every honest party decides, and between GST and its decision it starts
/// at most `MAX_WAVES_AFTER_GST` fallback iterations.
fn decides_soon_after_gst(outcome: &RunOutcome, gst: u64) -> Result<(), String> {
    let r = &outcome.report;
    for id in (0..r.n).filter(|id| !r.adversary.contains(id)) {
        let Some(decide) = r.decide_times[id] else {
            return Err(format!("party {id} never decided"));
        };
        let waves = outcome
            .trace
            .iter()
            .filter(|event| {
                event.party == id
                    && event.time >= gst
                    && event.time < decide
                    && matches!(event.note, TraceNote::WaveStart { .. })
            })
            .count();
        if waves > MAX_WAVES_AFTER_GST {
            return Err(format!(
                "party {id} started {waves} fallback iterations after GST before deciding"
            ));
        }
    }
    Ok(())
}

// --- Reporting ---------------------------------------------------------------

/// Prints the single `ACCEPTANCE <id> PASS|FAIL` line and asserts the verdict.
fn conclude(id: u32, name: &str, verdict: Result<String, String>) {
    match verdict {
        Ok(detail) => println!("ACCEPTANCE {id} PASS {name}: {detail}"),
        Err(why) => {
            println!("ACCEPTANCE {id} FAIL {name}: {why}");
            panic!("acceptance criterion {id} ({name}) failed: {why}");
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// --- Criteria ----------------------------------------------------------------

#[test]
fn criterion_01_agreement_safety() {
    let m = matrix();
    let verdict = if m.disagreements > 0 || m.validity_failures > 0 {
        Err(format!(
            "{} disagreements, {} validity failures; first: {}",
            m.disagreements,
            m.validity_failures,
            m.first_safety.as_deref().unwrap_or("-")
        ))
    } else if m.elapsed_secs >= MATRIX_TIME_BUDGET {
        Err(format!(
            "matrix took {:.1}s, budget {MATRIX_TIME_BUDGET}s",
            m.elapsed_secs
        ))
    } else {
        Ok(format!(
            "{} runs ({} modes x {} adversaries x n in {MATRIX_N:?} x {MATRIX_SEEDS} seeds) \
             with zero disagreements and zero validity failures in {:.1}s",
            m.runs,
            Mode::ALL.len(),
            ADVERSARIES.len(),
            m.elapsed_secs
        ))
    };
    conclude(1, "agreement-safety", verdict);
}

#[test]
fn criterion_02_synchronous_timing() {
    let verdict = (|| {
        // Fault-free: every honest party decides at exactly 7 * delta.
        for n in MATRIX_N {
            let outcome = run_traced(RunConfig::sync(n));
            for id in 0..n {
                let decide = outcome.report.decide_times[id];
                if decide != Some(7 * DELTA) {
                    return Err(format!(
                        "n={n} fault-free: party {id} decided at {decide:?}, expected {}",
                        7 * DELTA
                    ));
                }
            }
        }
        // Silent prefix: with the first j-1 slot leaders silent, every
        // honest party decides no later than slot j's wedge.
        for n in MATRIX_N {
            let t = (n - 1) / 3;
            for j in 2..=(t + 1) {
                let f = j - 1;
                let cfg = RunConfig::sync(n).with_corruptions((0..f).collect(), "silent");
                let outcome = run_traced(cfg);
                let deadline = wedge_at(j as Sq, DELTA);
                for id in f..n {
                    match outcome.report.decide_times[id] {
                        Some(at) if at <= deadline => {}
                        other => {
                            return Err(format!(
                                "n={n} f={f}: party {id} decided at {other:?}, deadline {deadline}"
                            ));
                        }
                    }
                }
            }
        }
        Ok(format!(
            "fault-free decisions all at exactly {}; silent prefixes decide by their slot wedge",
            7 * DELTA
        ))
    })();
    conclude(2, "synchronous-timing", verdict);
}

#[test]
fn criterion_03_no_fallback_in_synchrony() {
    let m = matrix();
    let verdict = if m.sync_fallbacks > 0 || m.sync_complains > 0 {
        Err(format!(
            "{} of {} synchronous runs entered fallback, {} complaints validated",
            m.sync_fallbacks, m.sync_runs, m.sync_complains
        ))
    } else {
        Ok(format!(
            "{} synchronous runs, zero fallback entries, zero validated complaints",
            m.sync_runs
        ))
    };
    conclude(3, "no-fallback-in-synchrony", verdict);
}

#[test]
fn criterion_04_complexity_scaling() {
    let verdict = (|| {
        // (a) Fault-free cost is linear in n.
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for n in SWEEP_N {
            let words: Vec<f64> = (0..3)
                .map(|seed| run(RunConfig::sync(n).with_seed(seed)).honest_words as f64)
                .collect();
            rows.push(vec![n as f64, 1.0]);
            ys.push(mean(&words));
        }
        let linear = least_squares(&rows, &ys).map_err(|e| format!("fault-free fit: {e}"))?;
        if linear.r_squared < MIN_R_SQUARED {
            return Err(format!(
                "fault-free cost is not linear: R2={:.5} < {MIN_R_SQUARED}",
                linear.r_squared
            ));
        }

        // (b) Worst-case silent prefix (f = t) costs O(f*n + n).
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for n in SWEEP_N {
            let t = (n - 1) / 3;
            let words: Vec<f64> = (0..3)
                .map(|seed| {
                    let cfg = RunConfig::sync(n)
                        .with_seed(seed)
                        .with_corruptions((0..t).collect(), "silent");
                    run(cfg).honest_words as f64
                })
                .collect();
            rows.push(vec![(t * n) as f64, n as f64]);
            ys.push(mean(&words));
        }
        let adaptive = least_squares(&rows, &ys).map_err(|e| format!("adaptive fit: {e}"))?;
        if adaptive.r_squared < MIN_R_SQUARED {
            return Err(format!(
                "worst-case cost is not f*n-dominated: R2={:.5} < {MIN_R_SQUARED}",
                adaptive.r_squared
            ));
        }

        // (c) For fixed n, cost never shrinks as more leaders crash.
        for n in SWEEP_N {
            let t = (n - 1) / 3;
            let mut previous = 0.0;
            for f in 0..=t {
                let words: Vec<f64> = (0..3)
                    .map(|seed| {
                        let cfg = RunConfig::sync(n)
                            .with_seed(seed)
                            .with_corruptions((0..f).collect(), "crash-at");
                        run(cfg).honest_words as f64
                    })
                    .collect();
                let current = mean(&words);
                if current < previous {
                    return Err(format!(
                        "n={n}: cost dropped from {previous} to {current} at f={f}"
                    ));
                }
                previous = current;
            }
        }

        Ok(format!(
            "fault-free fit {:.2}*n+{:.2} (R2={:.5}); worst-case fit {:.2}*f*n+{:.2}*n (R2={:.5}); \
             cost monotone in crashed leaders for every n",
            linear.coeffs[0],
            linear.coeffs[1],
            linear.r_squared,
            adaptive.coeffs[0],
            adaptive.coeffs[1],
            adaptive.r_squared
        ))
    })();
    conclude(4, "complexity-scaling", verdict);
}

#[test]
fn criterion_05_spam_resilience() {
    let verdict = (|| {
        // Overhead of one help-spamming party relative to the same run
        // with that party merely silent, across the n sweep.
        let mut overheads = Vec::new();
        for n in SWEEP_N {
            let byz: BTreeSet<PartyId> = [n - 1].into();
            let base = run(RunConfig::sync(n).with_corruptions(byz.clone(), "silent"));
            let spam = run(RunConfig::sync(n).with_corruptions(byz, "spam-help"));
            if spam.honest_words < base.honest_words {
                return Err(format!(
                    "n={n}: spam run cost {} below silent baseline {}",
                    spam.honest_words, base.honest_words
                ));
            }
            overheads.push((n as f64, (spam.honest_words - base.honest_words) as f64));
        }
        // Fit overhead = C * n once, then bound every deviation.
        let rows: Vec<Vec<f64>> = overheads.iter().map(|&(n, _)| vec![n]).collect();
        let ys: Vec<f64> = overheads.iter().map(|&(_, d)| d).collect();
        let fit = least_squares(&rows, &ys).map_err(|e| format!("overhead fit: {e}"))?;
        let c = fit.coeffs[0];
        for &(n, d) in &overheads {
            let bound = SPAM_RESIDUAL_TOLERANCE * c * n;
            if (d - c * n).abs() > bound {
                return Err(format!(
                    "n={n}: overhead {d} deviates from {:.2} by more than {:.0}%",
                    c * n,
                    SPAM_RESIDUAL_TOLERANCE * 100.0
                ));
            }
        }
        Ok(format!(
            "spam overhead fits {c:.3}*n across n in {SWEEP_N:?} within {:.0}%",
            SPAM_RESIDUAL_TOLERANCE * 100.0
        ))
    })();
    conclude(5, "spam-resilience", verdict);
}

#[test]
fn criterion_06_election_frequency() {
    let verdict = (|| {
        let m = matrix();
        let mut lines = Vec::new();
        for adversary in &ADVERSARIES {
            let (mut hits, mut total) = m.elections.get(adversary.name).copied().unwrap_or((0, 0));
            // The matrix yields well over the required sample; top up with
            // extra asynchronous runs in the unlikely case it does not.
            let mut extra_seed = MATRIX_SEEDS;
            while total < MIN_WAVE_SAMPLE && extra_seed < MATRIX_SEEDS + 2_000 {
                let outcome = run_traced(matrix_config(Mode::Async, adversary, 7, extra_seed));
                hits += outcome
                    .report
                    .elected_completed
                    .iter()
                    .filter(|&&h| h)
                    .count();
                total += outcome.report.elected_completed.len();
                extra_seed += 1;
            }
            if total < MIN_WAVE_SAMPLE {
                return Err(format!(
                    "{}: only {total} waves sampled, need {MIN_WAVE_SAMPLE}",
                    adversary.name
                ));
            }
            let frequency = hits as f64 / total as f64;
            if frequency < MIN_ELECTION_FREQUENCY {
                return Err(format!(
                    "{}: elected a completed view in {frequency:.3} of {total} waves, \
                     need {MIN_ELECTION_FREQUENCY}",
                    adversary.name
                ));
            }
            lines.push(format!("{} {frequency:.3} ({total} waves)", adversary.name));
        }
        Ok(lines.join(", "))
    })();
    conclude(6, "election-frequency", verdict);
}

#[test]
fn criterion_07_fallback_progress() {
    let verdict = (|| {
        const SEEDS: u64 = 100;
        let mut all_waves = Vec::new();
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for n in SWEEP_N {
            let t = (n - 1) / 3;
            let mut per_wave = Vec::new();
            for seed in 0..SEEDS {
                let cfg = RunConfig::new(n, Mode::Async)
                    .with_seed(seed)
                    .with_corruptions((0..t).collect(), "follow-protocol");
                let report = run(cfg);
                if report.capped {
                    return Err(format!("n={n} seed={seed}: run hit its cap"));
                }
                all_waves.push(report.waves as f64);
                if report.waves > 0 {
                    let fallback_words =
                        report.words_by_phase.get("fallback").copied().unwrap_or(0);
                    per_wave.push(fallback_words as f64 / report.waves as f64);
                }
            }
            rows.push(vec![(n * n) as f64]);
            ys.push(mean(&per_wave));
        }
        if all_waves.len() < 300 {
            return Err(format!("only {} runs sampled, need 300", all_waves.len()));
        }
        let mean_waves = mean(&all_waves);
        if mean_waves > MAX_MEAN_WAVES {
            return Err(format!(
                "mean waves to decision {mean_waves:.3} exceeds {MAX_MEAN_WAVES}"
            ));
        }
        let fit = least_squares(&rows, &ys).map_err(|e| format!("per-wave fit: {e}"))?;
        if fit.r_squared < MIN_R_SQUARED {
            return Err(format!(
                "per-wave cost is not quadratic: R2={:.5} < {MIN_R_SQUARED}",
                fit.r_squared
            ));
        }
        Ok(format!(
            "{} runs, mean waves {mean_waves:.3} <= {MAX_MEAN_WAVES}; \
             per-wave cost fits {:.2}*n^2 (R2={:.5})",
            all_waves.len(),
            fit.coeffs[0],
            fit.r_squared
        ))
    })();
    conclude(7, "fallback-progress", verdict);
}

#[test]
fn criterion_08_recovery_after_gst() {
    let verdict = (|| {
        const SEEDS: u64 = 50;
        let mut runs = 0;
        for n in [4, 7] {
            // Stabilize mid-fallback: after the last wedge, inside the
            // first wave's message exchange.
            let gst = wedge_at(n as Sq, DELTA) + 15 * DELTA;
            for f in [0usize, 1] {
                for seed in 0..SEEDS {
                    let cfg = RunConfig::new(n, Mode::EsLate)
                        .with_seed(seed)
                        .with_gst(Some(gst))
                        .with_corruptions((0..f).collect(), "silent");
                    let outcome = run_traced(cfg);
                    decides_soon_after_gst(&outcome, gst)
                        .map_err(|why| format!("n={n} f={f} seed={seed}: {why}"))?;
                    runs += 1;
                }
            }
        }
        Ok(format!(
            "{runs} runs with GST injected mid-fallback; every honest party decided \
             within {MAX_WAVES_AFTER_GST} fallback iterations of GST"
        ))
    })();
    conclude(8, "recovery-after-gst", verdict);
}

#[test]
fn criterion_09_certificate_causality() {
    let m = matrix();
    let verdict = if m.causality_failures > 0 {
        Err(format!(
            "{} runs violated certificate precedence; first: {}",
            m.causality_failures,
            m.first_causality.as_deref().unwrap_or("-")
        ))
    } else {
        Ok(format!(
            "certificate dependency order held in all {} matrix runs",
            m.runs
        ))
    };
    conclude(9, "certificate-causality", verdict);
}

#[test]
fn criterion_10_quiescence() {
    let m = matrix();
    let verdict = if m.noncapped_undecided > 0 {
        Err(format!(
            "{} uncapped runs drained their queue with honest parties undecided; first: {}",
            m.noncapped_undecided,
            m.first_undecided.as_deref().unwrap_or("-")
        ))
    } else {
        Ok(format!(
            "all {} uncapped matrix runs drained their event queue with every honest \
             party decided ({} runs hit a cap and are excluded)",
            m.runs - m.capped,
            m.capped
        ))
    };
    conclude(10, "quiescence", verdict);
}

#[test]
fn criterion_11_deterministic_replay() {
    let verdict = (|| {
        let cases: Vec<RunConfig> = vec![
            RunConfig::sync(7)
                .with_seed(5)
                .with_corruptions((0..2).collect(), "silent"),
            RunConfig::new(7, Mode::Async)
                .with_seed(9)
                .with_corruptions((0..2).collect(), "crash-at"),
            RunConfig::new(4, Mode::EsLate)
                .with_seed(3)
                .with_corruptions([0].into(), "equivocate-leader"),
            RunConfig::new(10, Mode::Async)
                .with_seed(1)
                .with_corruptions((0..3).collect(), "follow-protocol")
                .with_policy("starve-leader"),
        ];
        let count = cases.len();
        for cfg in cases {
            let first = serde_json::to_string(&run(cfg.clone())).expect("report serializes");
            let second = serde_json::to_string(&run(cfg.clone())).expect("report serializes");
            if first != second {
                return Err(format!(
                    "reports differ on replay for mode {} n={} seed={}",
                    cfg.mode.name(),
                    cfg.n,
                    cfg.seed
                ));
            }
        }
        Ok(format!("{count} configurations replayed byte-identically"))
    })();
    conclude(11, "deterministic-replay", verdict);
}
