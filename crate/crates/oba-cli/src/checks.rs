//! Record-level summaries and acceptance checks, plus `summarize`.
//!
//! Everything here works from the flat per-run records alone, so a
//! record file can be re-analyzed long after the runs.  Checks that
//! need data the records lack (e.g. a subset that was never swept)
//! report insufficient data rather than guessing.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use oba_core::metrics::least_squares;
use oba_core::sim::RunReport;

#[derive(Args)]
pub struct SummarizeArgs {
    /// Record file written by `run` (JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    /// Check id to evaluate (repeatable). Without it, all applicable
    /// checks run and inapplicable ones are skipped.
    #[arg(long = "check")]
    checks: Vec<String>,
}

/// Check ids with one-line meanings, in evaluation order.
pub const KNOWN_CHECKS: &[(&str, &str)] = &[
    ("linear-f0", "fault-free cost fits a*n + b with R^2 >= 0.99"),
    (
        "adaptive-fn",
        "cost at f = t fits a*f*n + b*n with R^2 >= 0.99",
    ),
    ("monotone-f", "mean cost never drops as f grows, at each n"),
    (
        "election-frequency",
        "completed-view election frequency >= 0.28",
    ),
    ("mean-waves", "mean waves among fallback runs <= 3.5"),
    (
        "sync-no-fallback",
        "no synchronous-mode run entered the fallback",
    ),
    ("no-caps", "no run hit its time or wave cap"),
];

pub fn known(id: &str) -> bool {
    KNOWN_CHECKS.iter().any(|(k, _)| *k == id)
}

pub struct CheckResult {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn display_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!("check {:<20} {verdict}  {}", self.id, self.detail)
    }
}

/// Evaluate one check over the records.  Unknown ids and checks whose
/// input subset is missing are errors, not failures.
pub fn evaluate(id: &str, reports: &[RunReport]) -> Result<CheckResult> {
    let Some((id, _)) = KNOWN_CHECKS.iter().find(|(k, _)| *k == id) else {
        bail!("unknown check '{id}'");
    };
    match run_check(id, reports) {
        Ok((pass, detail)) => Ok(CheckResult { id, pass, detail }),
        Err(why) => bail!("check {id}: insufficient data: {why}"),
    }
}

/// Mean honest words per n over a record subset.
fn mean_words_by_n<'a>(
    reports: impl Iterator<Item = &'a RunReport>,
) -> BTreeMap<usize, (f64, usize)> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in reports {
        let entry = acc.entry(r.n).or_insert((0.0, 0));
        entry.0 += r.honest_words as f64;
        entry.1 += 1;
    }
    for v in acc.values_mut() {
        v.0 /= v.1 as f64;
    }
    acc
}

/// Ok((pass, detail)) or Err(insufficient-data reason).
fn run_check(id: &str, reports: &[RunReport]) -> std::result::Result<(bool, String), String> {
    match id {
        "linear-f0" => {
            let means = mean_words_by_n(reports.iter().filter(|r| r.f == 0));
            if means.len() < 4 {
                return Err(format!("need 4 distinct n at f = 0, have {}", means.len()));
            }
            let rows: Vec<Vec<f64>> = means.keys().map(|&n| vec![n as f64, 1.0]).collect();
            let ys: Vec<f64> = means.values().map(|&(m, _)| m).collect();
            let fit = least_squares(&rows, &ys).map_err(|e| e.to_string())?;
            Ok((
                fit.r_squared >= 0.99,
                format!(
                    "words ~ {:.2}*n + {:.2}, R^2 = {:.4}",
                    fit.coeffs[0], fit.coeffs[1], fit.r_squared
                ),
            ))
        }
        "adaptive-fn" => {
            let subset: Vec<&RunReport> =
                reports.iter().filter(|r| r.f == r.t && r.f > 0).collect();
            let mut by_n: BTreeMap<usize, (usize, f64, usize)> = BTreeMap::new();
            for r in &subset {
                let entry = by_n.entry(r.n).or_insert((r.f, 0.0, 0));
                entry.1 += r.honest_words as f64;
                entry.2 += 1;
            }
            if by_n.len() < 4 {
                return Err(format!("need 4 distinct n at f = t, have {}", by_n.len()));
            }
            let rows: Vec<Vec<f64>> = by_n
                .iter()
                .map(|(&n, &(f, ..))| vec![(f * n) as f64, n as f64])
                .collect();
            let ys: Vec<f64> = by_n.values().map(|&(_, sum, k)| sum / k as f64).collect();
            let fit = least_squares(&rows, &ys).map_err(|e| e.to_string())?;
            Ok((
                fit.r_squared >= 0.99,
                format!(
                    "words ~ {:.2}*f*n + {:.2}*n, R^2 = {:.4}",
                    fit.coeffs[0], fit.coeffs[1], fit.r_squared
                ),
            ))
        }
        "monotone-f" => {
            let mut by_nf: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
            for r in reports {
                let entry = by_nf.entry((r.n, r.f)).or_insert((0.0, 0));
                entry.0 += r.honest_words as f64;
                entry.1 += 1;
            }
            let ns: std::collections::BTreeSet<usize> = by_nf.keys().map(|&(n, _)| n).collect();
            let mut checked = 0usize;
            for &n in &ns {
                let means: Vec<(usize, f64)> = by_nf
                    .iter()
                    .filter(|&(&(bn, _), _)| bn == n)
                    .map(|(&(_, f), &(sum, k))| (f, sum / k as f64))
                    .collect();
                if means.len() < 2 {
                    continue;
                }
                checked += 1;
                if means.windows(2).any(|w| w[1].1 < w[0].1) {
                    return Ok((false, format!("mean words drop as f grows at n = {n}")));
                }
            }
            if checked == 0 {
                return Err("no n was swept over more than one f".to_string());
            }
            Ok((true, format!("non-decreasing in f across {checked} sizes")))
        }
        "election-frequency" => {
            let total: usize = reports.iter().map(|r| r.elected_completed.len()).sum();
            if total == 0 {
                return Err("no fallback waves in the records".to_string());
            }
            let hits: usize = reports
                .iter()
                .map(|r| r.elected_completed.iter().filter(|&&b| b).count())
                .sum();
            let freq = hits as f64 / total as f64;
            Ok((
                freq >= 0.28,
                format!("{hits}/{total} waves elected a completed view ({freq:.3})"),
            ))
        }
        "mean-waves" => {
            let waves: Vec<usize> = reports
                .iter()
                .filter(|r| r.fallback_entered_any)
                .map(|r| r.waves)
                .collect();
            if waves.is_empty() {
                return Err("no run entered the fallback".to_string());
            }
            let mean = waves.iter().sum::<usize>() as f64 / waves.len() as f64;
            Ok((
                mean <= 3.5,
                format!("mean {mean:.2} waves over {} runs", waves.len()),
            ))
        }
        "sync-no-fallback" => {
            let sync: Vec<&RunReport> = reports.iter().filter(|r| r.mode == "sync").collect();
            if sync.is_empty() {
                return Err("no synchronous-mode records".to_string());
            }
            let entered = sync.iter().filter(|r| r.fallback_entered_any).count();
            Ok((
                entered == 0,
                format!("{entered} of {} sync runs fell back", sync.len()),
            ))
        }
        "no-caps" => {
            if reports.is_empty() {
                return Err("no records".to_string());
            }
            let capped = reports.iter().filter(|r| r.capped).count();
            Ok((
                capped == 0,
                format!("{capped} of {} runs capped", reports.len()),
            ))
        }
        _ => unreachable!("filtered by KNOWN_CHECKS"),
    }
}

// --- summaries ----------------------------------------------------------

fn quantile(sorted: &[u64], q: f64) -> u64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Human-readable roll-up of a record set.
pub fn summary_text(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let capped = reports.iter().filter(|r| r.capped).count();
    out.push_str(&format!("runs: {} (capped: {capped})\n", reports.len()));
    if reports.is_empty() {
        return out;
    }

    let mut by_mode: BTreeMap<&str, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        by_mode.entry(r.mode.as_str()).or_default().push(r);
    }
    for (mode, rs) in &by_mode {
        let mut decided: Vec<u64> = rs.iter().filter_map(|r| r.decide_time_max).collect();
        decided.sort_unstable();
        let undecided = rs.len() - decided.len();
        if decided.is_empty() {
            out.push_str(&format!("{mode}: {} runs, none fully decided\n", rs.len()));
        } else {
            out.push_str(&format!(
                "{mode}: {} runs, decide time p50 {} p90 {} max {}, undecided {undecided}\n",
                rs.len(),
                quantile(&decided, 0.5),
                quantile(&decided, 0.9),
                decided.last().unwrap(),
            ));
        }
    }

    let words: Vec<u64> = reports.iter().map(|r| r.honest_words).collect();
    let mean = words.iter().sum::<u64>() as f64 / words.len() as f64;
    out.push_str(&format!(
        "honest words: min {} mean {mean:.1} max {}\n",
        words.iter().min().unwrap(),
        words.iter().max().unwrap(),
    ));

    let fallback_runs = reports.iter().filter(|r| r.fallback_entered_any).count();
    let total_waves: usize = reports.iter().map(|r| r.waves).sum();
    out.push_str(&format!(
        "fallback: entered in {fallback_runs} runs, {total_waves} waves total\n"
    ));
    let elections: usize = reports.iter().map(|r| r.elected_completed.len()).sum();
    if elections > 0 {
        let hits: usize = reports
            .iter()
            .map(|r| r.elected_completed.iter().filter(|&&b| b).count())
            .sum();
        out.push_str(&format!(
            "election success: {hits}/{elections} waves ({:.3})\n",
            hits as f64 / elections as f64
        ));
    }

    let points: Vec<oba_core::metrics::CostPoint> = reports
        .iter()
        .map(|r| oba_core::metrics::CostPoint {
            n: r.n,
            f: r.f,
            words: r.honest_words,
        })
        .collect();
    if let Ok(fit) = oba_core::metrics::fit_complexity(&points) {
        out.push_str(&format!(
            "scaling fit: words ~ {:.2}*(f+1)*n + {:.2}, R^2 = {:.4}\n",
            fit.a, fit.b, fit.r_squared
        ));
    }
    out.push_str(&verdict_lines(reports));
    out
}

/// The headline verdicts, printed only where the records support them.
fn verdict_lines(reports: &[RunReport]) -> String {
    let mut out = String::new();
    if let Ok((pass, detail)) = run_check("linear-f0", reports) {
        if pass {
            out.push_str(&format!("verdict: linear ({detail})\n"));
        }
    }
    if let Ok((pass, detail)) = run_check("adaptive-fn", reports) {
        if pass {
            out.push_str(&format!("verdict: f*n-dominated ({detail})\n"));
        }
    }
    if let Ok((pass, detail)) = run_check("mean-waves", reports) {
        if pass {
            out.push_str(&format!("verdict: {detail} (<= 3.5)\n"));
        }
    }
    out
}

// --- the summarize command ----------------------------------------------

pub fn summarize_command(args: SummarizeArgs) -> Result<ExitCode> {
    if args.input.extension().is_some_and(|e| e == "csv") {
        bail!("summarize reads the JSONL record format (CSV drops the per-wave fields)");
    }
    let file = std::fs::File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let mut reports = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let report: RunReport = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", args.input.display(), lineno + 1))?;
        reports.push(report);
    }
    if reports.is_empty() {
        bail!("{} holds no records", args.input.display());
    }

    print!("{}", summary_text(&reports));

    let mut failed = false;
    if args.checks.is_empty() {
        // Evaluate whatever the records can support; skip the rest.
        for (id, _) in KNOWN_CHECKS {
            match run_check(id, &reports) {
                Ok((pass, detail)) => {
                    let r = CheckResult { id, pass, detail };
                    println!("{}", r.display_line());
                    failed |= !pass;
                }
                Err(why) => println!("check {id:<20} SKIP  {why}"),
            }
        }
    } else {
        for id in &args.checks {
            let result = evaluate(id, &reports)?;
            println!("{}", result.display_line());
            failed |= !result.pass;
        }
    }
    Ok(if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}
