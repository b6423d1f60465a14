//! `frb`: replay corpora through Ravens, aggregate metrics, draw charts.

mod chart;

use std::collections::BTreeSet;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use frb_core::analysis::report::{analyze, write_report, CampaignReport};
use frb_core::analysis::survival::{format_median, format_percent};
use frb_core::analysis::validate_ravens;
use frb_core::emu::RunLimits;
use frb_core::fixtures::build_fixtures;
use frb_core::minivm::{assemble_with_labels, TargetImage};
use frb_core::oracle::{Label, Mode, RavenSet};
use frb_core::replay::ingest::{ingest_campaign, InputRecord, IngestOptions};
use frb_core::replay::{read_jsonl, replay_all, write_jsonl, Adapter, ReplayOptions, ReplayOutcome};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "frb", version, about = "Replay-based bug oracles for firmware fuzzing campaigns")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a corpus and write one outcome per input as JSON Lines.
    Replay {
        /// Target image (`.img`) or assembler source (`.s`).
        #[arg(long)]
        target: PathBuf,
        /// Raven directory; may be repeated.
        #[arg(long, required = true)]
        ravens: Vec<PathBuf>,
        /// A trial directory or a `<fuzzer>/<trial>/` tree.
        #[arg(long)]
        corpus: PathBuf,
        /// Fuzzing log for a single-trial corpus.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Worker threads, 0 for one per core.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Abort executions when an active bug triggers.
        #[arg(long)]
        live: bool,
        /// Comma-separated active bug IDs for live mode (default: metadata `active`).
        #[arg(long, value_delimiter = ',')]
        active: Vec<String>,
        /// Seed adapter: raw, multistream or auto.
        #[arg(long, default_value = "auto")]
        adapter: String,
        #[arg(long, default_value_t = frb_core::emu::DEFAULT_STEP_LIMIT)]
        max_instructions: u64,
        #[arg(long, default_value = "outcomes.jsonl")]
        out: PathBuf,
    },
    /// Aggregate outcome files into a report with CSV tables.
    Analyze {
        /// Glob(s) of outcome files.
        #[arg(long, required = true)]
        outcomes: Vec<String>,
        #[arg(long, default_value_t = 86400.0)]
        horizon: f64,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Render SVG charts from a report.
    Chart {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "charts")]
        out: PathBuf,
    },
    /// Check that every crashing seed is matched by some Raven.
    Validate {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, required = true)]
        ravens: Vec<PathBuf>,
        /// Directory of crashing seeds, or a trial directory with `crashes/`.
        #[arg(long)]
        crashes: PathBuf,
        #[arg(long, default_value = "auto")]
        adapter: String,
    },
    /// Assemble a minivm source file.
    Asm {
        source: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Print label addresses.
        #[arg(long)]
        labels: bool,
    },
    /// Regenerate the fixture tree.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

/// Error carrying its exit code.
struct Fail(u8, anyhow::Error);

fn usage(e: impl Into<anyhow::Error>) -> Fail {
    Fail(EXIT_USAGE, e.into())
}

fn data(e: impl Into<anyhow::Error>) -> Fail {
    Fail(EXIT_DATA, e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, e)) => {
            eprintln!("frb: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8, Fail> {
    match cmd {
        Cmd::Replay {
            target,
            ravens,
            corpus,
            log,
            jobs,
            live,
            active,
            adapter,
            max_instructions,
            out,
        } => {
            let adapter: Adapter = adapter.parse().map_err(|e: String| usage(anyhow!(e)))?;
            need(&corpus)?;
            if let Some(l) = &log {
                need(l)?;
            }
            let image = load_target(&target)?;
            let set = load_ravens(&ravens)?;
            let opts = IngestOptions {
                adapter,
                ..IngestOptions::default()
            };
            let ingested = ingest_campaign(&corpus, log.as_deref(), &opts).map_err(data)?;
            for w in &ingested.warnings {
                eprintln!("warning: {w}");
            }
            let active: BTreeSet<String> = if active.is_empty() {
                set.default_active()
            } else {
                active.into_iter().collect()
            };
            let ropts = ReplayOptions {
                jobs,
                mode: if live { Mode::Live } else { Mode::Replay },
                active,
                limits: RunLimits { max_instructions },
                ..ReplayOptions::default()
            };
            let outcomes = replay_all(&ingested.records, &image, &set, &ropts).map_err(data)?;
            write_outcomes(&out, &outcomes)?;
            let crashes = outcomes.iter().filter(|o| o.is_crash()).count();
            println!("{} inputs replayed, {crashes} crashes -> {}", outcomes.len(), out.display());
            let hard = ingested.hard_errors + ingested.malformed_log_lines;
            if hard > 0 {
                eprintln!("{hard} input(s) or log line(s) could not be processed");
                return Ok(EXIT_DATA);
            }
            Ok(0)
        }
        Cmd::Analyze { outcomes, horizon, out } => {
            if !(horizon > 0.0) {
                return Err(usage(anyhow!("--horizon must be positive")));
            }
            let mut files = Vec::new();
            for pattern in &outcomes {
                let paths = glob::glob(pattern).map_err(usage)?;
                for p in paths {
                    files.push(p.map_err(data)?);
                }
            }
            files.sort();
            files.dedup();
            if files.is_empty() {
                return Err(usage(anyhow!("no outcome files match {outcomes:?}")));
            }
            let mut all = Vec::new();
            for f in &files {
                let file = std::fs::File::open(f).with_context(|| f.display().to_string()).map_err(data)?;
                let v = read_jsonl(BufReader::new(file)).map_err(|e| data(anyhow!("{}: {e}", f.display())))?;
                all.extend(v);
            }
            let report = analyze(&all, horizon).map_err(data)?;
            write_report(&report, &out).with_context(|| out.display().to_string()).map_err(data)?;
            print_summary(&report);
            println!("report -> {}", out.join("report.json").display());
            Ok(0)
        }
        Cmd::Chart { report, out } => {
            let text = std::fs::read_to_string(&report)
                .with_context(|| report.display().to_string())
                .map_err(usage)?;
            let report = CampaignReport::from_json(&text).map_err(|e| data(anyhow!("malformed report: {e}")))?;
            std::fs::create_dir_all(&out).map_err(data)?;
            let svgs = chart::render_all(&report);
            for svg in &svgs {
                std::fs::write(out.join(&svg.file_name), &svg.body).map_err(data)?;
            }
            println!("{} charts -> {}", svgs.len(), out.display());
            Ok(0)
        }
        Cmd::Validate {
            target,
            ravens,
            crashes,
            adapter,
        } => {
            let adapter: Adapter = adapter.parse().map_err(|e: String| usage(anyhow!(e)))?;
            need(&crashes)?;
            let image = load_target(&target)?;
            let set = load_ravens(&ravens)?;
            let records = crash_records(&crashes, adapter)?;
            let outcomes = replay_all(&records, &image, &set, &ReplayOptions::default()).map_err(data)?;
            let v = validate_ravens(&set.bug_ids(), &outcomes);
            let silent = outcomes.iter().filter(|o| !o.is_crash()).count();
            println!("{} crashing seeds, {} unlabeled", v.crashes, v.unlabeled.len());
            if silent > 0 {
                println!("{silent} seed(s) did not crash on replay");
            }
            for id in &v.unlabeled {
                println!("unlabeled: {id}");
            }
            for c in &v.cross_matches {
                println!("cross-match: {} -> {}", c.input_id, c.bugs.join(", "));
            }
            for (bug, n) in &v.matched {
                println!("matched {bug}: {n}");
            }
            if v.complete {
                println!("complete: no unidentified crashing seeds");
                Ok(0)
            } else {
                Ok(EXIT_INVALID)
            }
        }
        Cmd::Asm { source, out, labels } => {
            let text = std::fs::read_to_string(&source)
                .with_context(|| source.display().to_string())
                .map_err(usage)?;
            let (image, table) =
                assemble_with_labels(&text).map_err(|e| data(anyhow!("{}: {e}", source.display())))?;
            std::fs::write(&out, image.to_bytes()).map_err(data)?;
            if labels {
                for (name, addr) in &table {
                    println!("{addr:#010x} {name}");
                }
            }
            Ok(0)
        }
        Cmd::Fixtures { out } => {
            let suite = build_fixtures().map_err(data)?;
            suite.write(&out).map_err(data)?;
            println!("{} bundles -> {}", suite.bundles.len(), out.display());
            Ok(0)
        }
    }
}

fn need(path: &Path) -> Result<(), Fail> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(anyhow!("{}: no such file or directory", path.display())))
    }
}

fn load_target(path: &Path) -> Result<TargetImage, Fail> {
    need(path)?;
    let bytes = std::fs::read(path).with_context(|| path.display().to_string()).map_err(usage)?;
    if path.extension().is_some_and(|e| e == "s") {
        let text = String::from_utf8(bytes).map_err(|e| data(anyhow!("{}: {e}", path.display())))?;
        assemble_with_labels(&text)
            .map(|(img, _)| img)
            .map_err(|e| data(anyhow!("{}: {e}", path.display())))
    } else {
        TargetImage::from_bytes(&bytes).map_err(|e| data(anyhow!("{}: {e}", path.display())))
    }
}

fn load_ravens(dirs: &[PathBuf]) -> Result<RavenSet, Fail> {
    let mut set = RavenSet::default();
    for d in dirs {
        need(d)?;
        set.extend(RavenSet::load_dir(d).map_err(data)?);
    }
    Ok(set)
}

fn write_outcomes(path: &Path, outcomes: &[ReplayOutcome]) -> Result<(), Fail> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(data)?;
    }
    let file = std::fs::File::create(path).with_context(|| path.display().to_string()).map_err(data)?;
    let mut w = BufWriter::new(file);
    write_jsonl(outcomes, &mut w).map_err(data)?;
    w.flush().map_err(data)
}

/// Crashing seeds from a flat directory or from `<trial>/crashes/`.
fn crash_records(dir: &Path, adapter: Adapter) -> Result<Vec<InputRecord>, Fail> {
    let (dir, prefix) = if dir.join("crashes").is_dir() {
        (dir.join("crashes"), "crashes/")
    } else {
        (dir.to_path_buf(), "")
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .with_context(|| dir.display().to_string())
        .map_err(data)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let raw = std::fs::read(&p).with_context(|| p.display().to_string()).map_err(data)?;
        let bytes = adapter.apply(&raw).map_err(|e| data(anyhow!("{}: {e}", p.display())))?;
        let name = p.file_name().unwrap().to_string_lossy();
        out.push(InputRecord {
            input_id: format!("{prefix}{name}"),
            bytes,
            timestamp_s: 0.0,
            label: Label::Crash,
            fuzzer: "crashes".into(),
            trial_index: 0,
            mtime_fallback: false,
        });
    }
    Ok(out)
}

fn print_summary(report: &CampaignReport) {
    println!(
        "{} inputs, {} crashes, {} label mismatches, {} multi-bug inputs",
        report.inputs, report.crashes, report.label_mismatches, report.multi_bug_inputs
    );
    for f in &report.fuzzers {
        println!(
            "{}: {} trials, {} triggered ({} TP / {} FP), consistency {:.3}",
            f.fuzzer, f.trials, f.counts.triggered, f.counts.triggered_tp, f.counts.triggered_fp, f.consistency
        );
    }
    for f in &report.fuzzers {
        for b in &f.bugs {
            println!(
                "  {:<10} {:<12} hit {:>4}  median {}",
                f.fuzzer,
                b.bug_id,
                format_percent(b.hit_rate),
                format_median(b.median_triggered_s)
            );
        }
    }
}
