//! Experiment files, grid expansion, and the `run` command.
//!
//! An experiment is a cross product of grid axes (mode, delay policy,
//! behavior, n, f, delta, stabilization) times a seed list.  Every grid
//! point is validated before anything runs; the sweep itself runs on a
//! worker pool and the records come out in deterministic
//! (grid point, seed) order regardless of scheduling.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use oba_core::sim::{run_traced, Mode, RunConfig, RunOutcome, RunReport};
use rayon::prelude::*;
use serde::Deserialize;

use crate::checks;

#[derive(Args)]
pub struct RunArgs {
    /// Experiment file (TOML). Flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synchrony mode: sync, es-gst0, es-mid, es-late, async.
    #[arg(long)]
    mode: Option<String>,
    /// System size; replaces the default grid {4, 7, 10, 13, 16}.
    #[arg(long)]
    n: Option<usize>,
    /// Fault tolerance; default (n - 1) / 3 per grid point.
    #[arg(long)]
    t: Option<usize>,
    /// Number of corrupted parties (ids 0..f).
    #[arg(long)]
    f: Option<usize>,
    /// Post-stabilization delivery bound in ticks (default 10).
    #[arg(long)]
    delta: Option<u64>,
    /// Stabilization tick; defaults follow the mode.
    #[arg(long)]
    gst: Option<u64>,
    /// Delay policy name; defaults follow the mode.
    #[arg(long)]
    adversary: Option<String>,
    /// Behavior run by corrupted parties (default silent).
    #[arg(long)]
    behavior: Option<String>,
    /// Seed count (`200`) or explicit comma-separated list (`1,5,9`).
    #[arg(long)]
    seeds: Option<String>,
    /// Record file; .jsonl or .csv by extension. Default: stdout as JSONL.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on simulated time per run.
    #[arg(long)]
    max_time: Option<u64>,
}

// --- experiment files ---------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    seeds: Option<SeedsSpec>,
    out: Option<PathBuf>,
    t: Option<usize>,
    max_time: Option<u64>,
    checks: Option<Vec<String>>,
    #[serde(default)]
    grid: GridFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    n: Option<Vec<usize>>,
    f: Option<Vec<usize>>,
    mode: Option<Vec<String>>,
    adversary: Option<Vec<String>>,
    behavior: Option<Vec<String>>,
    delta: Option<Vec<u64>>,
    gst: Option<Vec<u64>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SeedsSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedsSpec {
    fn seeds(&self) -> Vec<u64> {
        match self {
            SeedsSpec::Count(k) => (0..*k).collect(),
            SeedsSpec::List(list) => list.clone(),
        }
    }
}

/// A fully resolved experiment: file values with flag overrides applied.
struct Experiment {
    n: Vec<usize>,
    t: Option<usize>,
    f: Vec<usize>,
    mode: Vec<Mode>,
    /// Delay policy per axis point; `None` follows the mode default.
    adversary: Vec<Option<String>>,
    behavior: Vec<String>,
    delta: Vec<u64>,
    /// Stabilization per axis point; `None` follows the mode default.
    gst: Vec<Option<u64>>,
    seeds: Vec<u64>,
    out: Option<PathBuf>,
    max_time: Option<u64>,
    checks: Vec<String>,
}

const DEFAULT_GRID_N: &[usize] = &[4, 7, 10, 13, 16];
const DEFAULT_SEED_COUNT: u64 = 10;

impl Experiment {
    fn resolve(args: &RunArgs) -> Result<Experiment> {
        let file: ExperimentFile = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentFile::default(),
        };

        let mode_names = match &args.mode {
            Some(m) => vec![m.clone()],
            None => file.grid.mode.unwrap_or_else(|| vec!["sync".to_string()]),
        };
        let mode = mode_names
            .iter()
            .map(|name| Mode::parse(name).ok_or_else(|| anyhow::anyhow!("unknown mode '{name}'")))
            .collect::<Result<Vec<_>>>()?;

        let seeds = match &args.seeds {
            Some(spec) => parse_seeds(spec)?,
            None => file
                .seeds
                .as_ref()
                .map(SeedsSpec::seeds)
                .unwrap_or_else(|| (0..DEFAULT_SEED_COUNT).collect()),
        };
        if seeds.is_empty() {
            bail!("empty seed list");
        }

        let adversary = match &args.adversary {
            Some(a) => vec![Some(a.clone())],
            None => match file.grid.adversary {
                Some(list) => list.into_iter().map(Some).collect(),
                None => vec![None],
            },
        };
        let gst = match args.gst {
            Some(g) => vec![Some(g)],
            None => match file.grid.gst {
                Some(list) => list.into_iter().map(Some).collect(),
                None => vec![None],
            },
        };

        Ok(Experiment {
            n: match args.n {
                Some(n) => vec![n],
                None => file.grid.n.unwrap_or_else(|| DEFAULT_GRID_N.to_vec()),
            },
            t: args.t.or(file.t),
            f: match args.f {
                Some(f) => vec![f],
                None => file.grid.f.unwrap_or_else(|| vec![0]),
            },
            mode,
            adversary,
            behavior: match &args.behavior {
                Some(b) => vec![b.clone()],
                None => file
                    .grid
                    .behavior
                    .unwrap_or_else(|| vec!["silent".to_string()]),
            },
            delta: match args.delta {
                Some(d) => vec![d],
                None => file.grid.delta.unwrap_or_else(|| vec![10]),
            },
            gst,
            seeds,
            out: args.out.clone().or(file.out),
            max_time: args.max_time.or(file.max_time),
            checks: file.checks.unwrap_or_default(),
        })
    }

    /// Cross the grid axes in a fixed order and validate every point.
    /// The returned order — grid point major, seed minor — is the
    /// record order in the output.
    fn expand(&self) -> Result<Vec<RunConfig>> {
        for id in &self.checks {
            if !checks::known(id) {
                bail!("unknown check '{id}'");
            }
        }
        let mut configs = Vec::new();
        for &mode in &self.mode {
            for adversary in &self.adversary {
                for behavior in &self.behavior {
                    for &n in &self.n {
                        for &f in &self.f {
                            for &delta in &self.delta {
                                for &gst in &self.gst {
                                    for &seed in &self.seeds {
                                        let mut cfg = RunConfig::new(n, mode)
                                            .with_seed(seed)
                                            .with_delta(delta);
                                        if let Some(t) = self.t {
                                            cfg = cfg.with_t(t);
                                        }
                                        if gst.is_some() {
                                            cfg = cfg.with_gst(gst);
                                        }
                                        cfg = cfg.with_corruptions(
                                            (0..f).collect::<BTreeSet<_>>(),
                                            behavior,
                                        );
                                        if let Some(policy) = adversary {
                                            cfg = cfg.with_policy(policy);
                                        }
                                        if let Some(max_time) = self.max_time {
                                            cfg = cfg.with_max_time(max_time);
                                        }
                                        if let Err(e) = cfg.validate() {
                                            bail!(
                                                "invalid grid point (mode {}, n {n}, f {f}): {e}",
                                                mode.name()
                                            );
                                        }
                                        configs.push(cfg);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(configs)
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if spec.contains(',') {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .with_context(|| format!("bad seed '{s}'"))
            })
            .collect()
    } else {
        let count: u64 = spec
            .trim()
            .parse()
            .with_context(|| format!("bad seed count '{spec}'"))?;
        Ok((0..count).collect())
    }
}

// --- the run command ----------------------------------------------------

pub fn run_command(args: RunArgs) -> Result<ExitCode> {
    let exp = Experiment::resolve(&args)?;
    let configs = exp.expand()?;

    let outcomes: Vec<RunOutcome> = configs
        .par_iter()
        .map(|cfg| run_traced(cfg.clone()))
        .collect();

    let mut violations = Vec::new();
    let mut capped = 0usize;
    for outcome in &outcomes {
        if outcome.report.capped {
            capped += 1;
        }
        violations.extend(safety_violations(outcome));
    }
    if capped > 0 {
        eprintln!(
            "warning: {capped} of {} runs hit a time or wave cap",
            outcomes.len()
        );
    }

    let reports: Vec<RunReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    write_records(exp.out.as_deref(), &reports)?;

    // When records go to stdout, keep it machine-readable and push the
    // summary to stderr.
    let summary = checks::summary_text(&reports);
    let to_stderr = exp.out.is_none();
    let mut lines = summary;
    lines.push_str(&format!("agreement violations: {}\n", violations.len()));
    if to_stderr {
        eprint!("{lines}");
    } else {
        print!("{lines}");
    }
    for v in &violations {
        eprintln!("invariant violation: {v}");
    }

    let mut check_failed = false;
    for id in &exp.checks {
        let result = checks::evaluate(id, &reports)?;
        let line = result.display_line();
        if to_stderr {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
        check_failed |= !result.pass;
    }

    if !violations.is_empty() || check_failed {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

/// Agreement and external validity over one run's honest decisions.
fn safety_violations(outcome: &RunOutcome) -> Vec<String> {
    let r = &outcome.report;
    let corrupted: BTreeSet<usize> = r.adversary.iter().copied().collect();
    let tag = format!("mode {} n {} f {} seed {}", r.mode, r.n, r.f, r.seed);
    let mut violations = Vec::new();
    let mut first = None;
    for id in (0..r.n).filter(|id| !corrupted.contains(id)) {
        let Some(value) = outcome.decided[id] else {
            continue;
        };
        if !value.externally_valid() {
            violations.push(format!(
                "{tag}: party {id} decided an externally invalid value"
            ));
        }
        match first {
            None => first = Some((id, value)),
            Some((first_id, first_value)) if first_value != value => {
                violations.push(format!(
                    "{tag}: party {id} decided differently from party {first_id}"
                ));
            }
            Some(_) => {}
        }
    }
    violations
}

// --- record output ------------------------------------------------------

fn write_records(out: Option<&std::path::Path>, reports: &[RunReport]) -> Result<()> {
    match out {
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_jsonl(&mut w, reports)?;
            w.flush()?;
        }
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            if path.extension().is_some_and(|e| e == "csv") {
                write_csv(&mut w, reports)?;
            } else {
                write_jsonl(&mut w, reports)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn write_jsonl(w: &mut impl Write, reports: &[RunReport]) -> Result<()> {
    for report in reports {
        serde_json::to_writer(&mut *w, report)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Flat scalar columns only; the vector- and map-valued fields need the
/// JSONL format.
fn write_csv(w: &mut impl Write, reports: &[RunReport]) -> Result<()> {
    writeln!(
        w,
        "seed,mode,n,t,f,honest_words,decide_time_max,waves,fallback_entered_any,capped,\
         behavior,delay_policy,gst,delta,honest_to_honest_words,complains_validated,\
         clamped_deliveries"
    )?;
    for r in reports {
        let decide = r.decide_time_max.map(|t| t.to_string()).unwrap_or_default();
        let gst = r.gst.map(|g| g.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.mode,
            r.n,
            r.t,
            r.f,
            r.honest_words,
            decide,
            r.waves,
            r.fallback_entered_any,
            r.capped,
            r.behavior,
            r.delay_policy,
            gst,
            r.delta,
            r.honest_to_honest_words,
            r.complains_validated,
            r.clamped_deliveries,
        )?;
    }
    Ok(())
}
