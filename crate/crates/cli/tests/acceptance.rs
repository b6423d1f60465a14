//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use frb_core::analysis::survival::format_percent;
use frb_core::analysis::{consistency, dedup_compare, format_median, kaplan_meier, Heuristic};
use frb_core::emu::Termination;
use frb_core::fixtures::{build_fixtures, Bundle, FixtureSuite};
use frb_core::oracle::{BugState, Label, RavenSet};
use frb_core::raven::ReportKind;
use frb_core::replay::{replay_all, InputRecord, ReplayOptions, ReplayOutcome, Worker};
use num::{BigInt, BigRational, Signed};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = fn(&FixtureSuite) -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn all_records(b: &Bundle) -> Vec<InputRecord> {
    let mut r = b.records();
    r.extend(b.campaign_records());
    r
}

fn frb(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_frb"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn raven_semantics(suite: &FixtureSuite) -> Result<String, String> {
    let start = Instant::now();
    let b = suite.bundle("mf04").ok_or("no mf04 bundle")?;
    let ravens = b.ravens().map_err(|e| e.to_string())?;
    let mut w = Worker::new(&b.image, &ravens, &ReplayOptions::default()).map_err(|e| e.to_string())?;
    let cases = [
        ("can_handler", BugState::Reached, false),
        ("dropped", BugState::Triggered, false),
        ("confused", BugState::Detected, true),
    ];
    for (name, want, crash) in cases {
        let seed = b.seed(name).ok_or(format!("no seed {name}"))?;
        let rec = InputRecord {
            input_id: name.into(),
            bytes: seed.bytes(),
            timestamp_s: 0.0,
            label: seed.kind,
            fuzzer: "acceptance".into(),
            trial_index: 0,
            mtime_fallback: false,
        };
        let o = w.replay(&rec);
        ensure(o.state_of("MF04") == want, || format!("{name}: MF04 {} != {want}", o.state_of("MF04")))?;
        ensure(o.is_crash() == crash, || format!("{name}: crash = {}", o.is_crash()))?;
        let kinds: Vec<ReportKind> = w.oracle().events().iter().map(|e| e.kind).collect();
        let want_kinds = if want == BugState::Reached {
            vec![ReportKind::Reached]
        } else {
            vec![ReportKind::Reached, ReportKind::DetectedTriggered]
        };
        ensure(kinds == want_kinds, || format!("{name}: reports {kinds:?}"))?;
    }
    let dt = start.elapsed();
    ensure(dt < Duration::from_secs(1), || format!("took {dt:?}"))?;
    Ok(format!("3 staged inputs, {} ms", dt.as_millis()))
}

fn state_lattice(suite: &FixtureSuite) -> Result<String, String> {
    let mut inputs = 0;
    let mut violations = Vec::new();
    for b in &suite.bundles {
        let ravens = b.ravens().map_err(|e| e.to_string())?;
        let mut w = Worker::new(&b.image, &ravens, &ReplayOptions::default()).map_err(|e| e.to_string())?;
        for rec in all_records(b) {
            inputs += 1;
            let o = w.replay(&rec);
            let mut reached = BTreeSet::new();
            let mut triggered = BTreeSet::new();
            let mut max: BTreeMap<&str, BugState> = BTreeMap::new();
            for e in w.oracle().events() {
                let s = match e.kind {
                    ReportKind::Reached => BugState::Reached,
                    ReportKind::DetectedTriggered => BugState::Triggered,
                };
                reached.insert(e.bug_id.as_str());
                if s == BugState::Triggered {
                    triggered.insert(e.bug_id.as_str());
                }
                let m = max.entry(&e.bug_id).or_insert(BugState::NotReached);
                *m = (*m).max(s);
            }
            for ob in &o.observations {
                let bug = ob.bug_id.as_str();
                let aborted = matches!(&o.termination, Termination::OracleAbort { bug_id } if bug_id == bug);
                let lattice = match ob.state {
                    BugState::Detected => triggered.contains(bug) && (o.is_crash() || aborted),
                    BugState::Triggered => triggered.contains(bug) && !o.is_crash(),
                    BugState::Reached => reached.contains(bug) && !triggered.contains(bug),
                    BugState::NotReached => !reached.contains(bug),
                };
                let fired = max.get(bug).copied().unwrap_or(BugState::NotReached);
                let promoted = if fired == BugState::Triggered && (o.is_crash() || aborted) {
                    BugState::Detected
                } else {
                    fired
                };
                if !lattice || promoted != ob.state {
                    violations.push(format!("{}/{} {bug}: {}", b.name, o.input_id, ob.state));
                }
            }
        }
    }
    ensure(inputs >= 200, || format!("only {inputs} inputs"))?;
    ensure(violations.is_empty(), || format!("{} violations, first {}", violations.len(), violations[0]))?;
    Ok(format!("{inputs} inputs, 0 violations"))
}

fn isolation(suite: &FixtureSuite) -> Result<String, String> {
    let none = RavenSet::default();
    let mut n = 0;
    for b in &suite.bundles {
        let ravens = b.ravens().map_err(|e| e.to_string())?;
        let recs = all_records(b);
        let with = replay_all(&recs, &b.image, &ravens, &ReplayOptions::default()).map_err(|e| e.to_string())?;
        let without = replay_all(&recs, &b.image, &none, &ReplayOptions::default()).map_err(|e| e.to_string())?;
        for (x, y) in with.iter().zip(&without) {
            n += 1;
            ensure(
                x.termination == y.termination
                    && x.instructions_executed == y.instructions_executed
                    && x.covered_blocks == y.covered_blocks,
                || format!("{}/{} differs", b.name, x.input_id),
            )?;
        }
    }
    Ok(format!("{n} inputs identical"))
}

fn consistency_formula(_: &FixtureSuite) -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let tol = BigRational::new(BigInt::from(1), BigInt::from(10u64.pow(12)));
    for i in 0..1000 {
        let n_bugs = rng.gen_range(1..=20u64);
        let trials = rng.gen_range(1..=20u64);
        let triggered = rng.gen_range(0..=n_bugs) as usize;
        let counts: Vec<u64> = (0..triggered).map(|_| rng.gen_range(0..=trials)).collect();
        let got = consistency(&counts, trials, n_bugs).map_err(|e| e.to_string())?;
        let mut exact = BigRational::from_integer(BigInt::from(0));
        for c in &counts {
            exact += BigRational::new(BigInt::from(*c), BigInt::from(trials));
        }
        exact /= BigInt::from(n_bugs);
        let err = (BigRational::from_float(got).unwrap() - &exact).abs();
        ensure(err <= tol, || format!("matrix {i}: {got} vs {exact}"))?;
    }
    let zero = consistency(&[0, 0], 10, 5).unwrap();
    let one = consistency(&[20; 20], 20, 20).unwrap();
    let worked = consistency(&[10, 4], 10, 2).unwrap();
    ensure(zero.to_bits() == 0.0f64.to_bits(), || format!("zero case {zero}"))?;
    ensure(one.to_bits() == 1.0f64.to_bits(), || format!("one case {one}"))?;
    ensure(worked == 0.7, || format!("worked case {worked}"))?;
    Ok("1000 matrices, boundaries exact, worked case 0.7".into())
}

fn survival(suite: &FixtureSuite) -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(0xbeef);
    for i in 0..1000 {
        let n = rng.gen_range(1..=16);
        let sample: Vec<f64> = (0..n).map(|_| rng.gen_range(0..40u32) as f64 * 60.0).collect();
        let c = kaplan_meier(&sample.iter().map(|t| Some(*t)).collect::<Vec<_>>(), 86_400.0);
        for t in sample.iter().flat_map(|t| [*t, t + 1.0]).chain([0.0, 86_400.0]) {
            let empirical = sample.iter().filter(|x| **x > t).count() as f64 / n as f64;
            ensure(c.at(t) == empirical, || format!("sample {i}: S({t}) = {} != {empirical}", c.at(t)))?;
        }
    }
    let mut times = vec![None; 6];
    times.extend([Some(1_000.0), Some(2_000.0), Some(3_000.0), Some(4_000.0)]);
    let c = kaplan_meier(&times, 86_400.0);
    let (median, hit) = (format_median(c.median_s), format_percent(c.hit_rate()));
    ensure(median == "--" && hit == "40%", || format!("4/10 case: {median} {hit}"))?;

    let mut curves = Vec::new();
    for _ in 0..1000 {
        let n = rng.gen_range(1..=30);
        let t: Vec<Option<f64>> = (0..n)
            .map(|_| rng.gen_bool(0.6).then(|| rng.gen_range(1..5000u32) as f64))
            .collect();
        curves.push(kaplan_meier(&t, 4000.0));
    }
    let b = suite.bundle("two_bug").ok_or("no two_bug")?;
    let report = frb_core::analysis::analyze(&b.replay_campaign().map_err(|e| e.to_string())?, 86_400.0)
        .map_err(|e| e.to_string())?;
    curves.extend(report.fuzzers.iter().flat_map(|f| f.bugs.iter().map(|x| x.survival.clone())));
    let points: usize = curves.iter().map(|c| c.points.len()).sum();
    for c in &curves {
        for p in &c.points {
            ensure(p.ci_low <= p.prob && p.prob <= p.ci_high, || format!("{p:?} outside band"))?;
        }
    }
    Ok(format!("1000 exact samples, 4/10 -> {median} {hit}, {points} points in band"))
}

fn dedup(suite: &FixtureSuite) -> Result<String, String> {
    let row = |bundle: &str, h: Heuristic| -> Result<_, String> {
        let out = suite
            .bundle(bundle)
            .ok_or(format!("no {bundle}"))?
            .replay_corpus()
            .map_err(|e| e.to_string())?;
        Ok(dedup_compare(&out).into_iter().find(|r| r.heuristic == h).unwrap())
    };
    let conf = row("shared_corruption", Heuristic::PcLr)?;
    ensure(conf.groups == 1 && conf.oracle_bugs == 2 && conf.conflations == 1, || format!("pc_lr {conf:?}"))?;
    let split = row("interrupt_timing", Heuristic::StackHash)?;
    ensure(split.groups >= 2 && split.oracle_bugs == 1 && split.splits == 1, || format!("stack_hash {split:?}"))?;
    Ok(format!(
        "pc_lr 1 group / 2 bugs / 1 conflation; stack_hash {} groups / 1 bug / 1 split",
        split.groups
    ))
}

fn blocks_of(path: &Path) -> Result<BTreeSet<u64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut out = BTreeSet::new();
    for line in text.lines() {
        let o: ReplayOutcome = serde_json::from_str(line).map_err(|e| e.to_string())?;
        out.extend(o.covered_blocks);
    }
    Ok(out)
}

fn cli_replay(bundle: &str, out: &Path, extra: &[&str]) -> Result<(), String> {
    let b = fixtures_dir().join(bundle);
    let (t, r, c) = (b.join("target.img"), b.join("ravens"), b.join("corpus"));
    let mut args = vec!["replay", "--target", s(&t), "--ravens", s(&r), "--corpus", s(&c), "--out", s(out)];
    args.extend_from_slice(extra);
    let (code, _) = frb(&args)?;
    ensure(code == 0, || format!("replay {bundle} exited {code}"))
}

fn exploit_pair(_: &FixtureSuite) -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (u, p, l) = (tmp.path().join("u.jsonl"), tmp.path().join("p.jsonl"), tmp.path().join("l.jsonl"));
    cli_replay("exploit", &u, &[])?;
    cli_replay("exploit_patched", &p, &[])?;
    cli_replay("exploit", &l, &["--live", "--active", "FRB_OVF1"])?;
    let (cu, cp, cl) = (blocks_of(&u)?, blocks_of(&p)?, blocks_of(&l)?);
    ensure(cu.is_superset(&cp) && cu.len() > cp.len(), || format!("unpatched {} vs patched {}", cu.len(), cp.len()))?;
    ensure(cl == cp, || format!("live {:?} vs patched {:?}", cl, cp))?;
    Ok(format!("unpatched {} blocks > patched {} = live {}", cu.len(), cp.len(), cl.len()))
}

fn validation(suite: &FixtureSuite) -> Result<String, String> {
    let mut runs = 0;
    for b in &suite.bundles {
        let dir = fixtures_dir().join(&b.name);
        let full = b.ravens().map_err(|e| e.to_string())?;
        let crash_recs: Vec<InputRecord> = b.records().into_iter().filter(|r| r.label == Label::Crash).collect();
        let base = replay_all(&crash_recs, &b.image, &full, &ReplayOptions::default()).map_err(|e| e.to_string())?;
        if !base.iter().any(|o| o.is_crash()) {
            continue;
        }
        let target = dir.join("target.img");
        let corpus = dir.join("corpus");
        let (code, out) = frb(&["validate", "--target", s(&target), "--ravens", s(&dir.join("ravens")), "--crashes", s(&corpus)])?;
        ensure(code == 0 && out.contains("no unidentified crashing seeds"), || format!("{}: complete set exited {code}", b.name))?;
        runs += 1;

        let mut names: Vec<String> = std::fs::read_dir(dir.join("ravens"))
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().to_string())
            .filter(|n| n.ends_with(".raven"))
            .collect();
        names.sort();
        for removed in &names {
            let stem = removed.trim_end_matches(".raven");
            let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
            for n in &names {
                if n != removed {
                    let st = n.trim_end_matches(".raven");
                    for ext in ["raven", "json"] {
                        let f = format!("{st}.{ext}");
                        std::fs::copy(dir.join("ravens").join(&f), tmp.path().join(&f)).map_err(|e| e.to_string())?;
                    }
                }
            }
            let gone: BTreeSet<String> = full
                .ravens
                .iter()
                .filter(|r| Path::new(&r.origin).file_stem().is_some_and(|f| f == stem))
                .flat_map(|r| r.program.bug_ids())
                .collect();
            let want: Vec<String> = base
                .iter()
                .filter(|o| o.is_crash())
                .filter(|o| {
                    o.observations
                        .iter()
                        .filter(|ob| ob.state >= BugState::Triggered)
                        .all(|ob| gone.contains(&ob.bug_id))
                })
                .map(|o| o.input_id.clone())
                .collect();
            let (code, out) = frb(&["validate", "--target", s(&target), "--ravens", s(tmp.path()), "--crashes", s(&corpus)])?;
            let got: Vec<String> = out.lines().filter_map(|l| l.strip_prefix("unlabeled: ")).map(String::from).collect();
            ensure(!want.is_empty(), || format!("{}: {removed} owns no crash", b.name))?;
            ensure(got == want, || format!("{} without {removed}: {got:?} != {want:?}", b.name))?;
            ensure(code != 0, || format!("{} without {removed}: exit 0", b.name))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} validate runs"))
}

fn pipeline(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for bundle in std::fs::read_dir(fixtures_dir()).map_err(|e| e.to_string())? {
        let bundle = bundle.map_err(|e| e.to_string())?.path();
        let name = bundle.file_name().unwrap().to_string_lossy().to_string();
        let mut corpora = vec![("corpus", bundle.join("corpus"))];
        if bundle.join("campaign").is_dir() {
            corpora.push(("campaign", bundle.join("campaign")));
        }
        for (kind, corpus) in corpora {
            let work = root.join(&name).join(kind);
            let outcomes = work.join("outcomes.jsonl");
            let (t, r) = (bundle.join("target.img"), bundle.join("ravens"));
            let (report_dir, charts) = (work.join("report"), work.join("charts"));
            let report = report_dir.join("report.json");
            let steps: [Vec<&str>; 3] = [
                vec!["replay", "--jobs", "8", "--target", s(&t), "--ravens", s(&r), "--corpus", s(&corpus), "--out", s(&outcomes)],
                vec!["analyze", "--outcomes", s(&outcomes), "--out", s(&report_dir)],
                vec!["chart", "--report", s(&report), "--out", s(&charts)],
            ];
            for args in &steps {
                let (code, _) = frb(args)?;
                ensure(code == 0, || format!("{name}/{kind}: `{}` exited {code}", args[0]))?;
            }
            let mut lines: Vec<(String, String)> = Vec::new();
            for l in std::fs::read_to_string(&outcomes).map_err(|e| e.to_string())?.lines() {
                let v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
                let key = format!("{}/{}/{}", v["fuzzer"], v["trial_index"], v["input_id"]);
                lines.push((key, l.to_string()));
            }
            lines.sort();
            let sorted: String = lines.into_iter().map(|(_, l)| l + "\n").collect();
            out.insert(format!("{name}/{kind}/outcomes.jsonl"), sorted.into_bytes());
            out.insert(
                format!("{name}/{kind}/report.json"),
                std::fs::read(&report).map_err(|e| e.to_string())?,
            );
            for svg in std::fs::read_dir(&charts).map_err(|e| e.to_string())? {
                let p = svg.map_err(|e| e.to_string())?.path();
                let key = format!("{name}/{kind}/{}", p.file_name().unwrap().to_string_lossy());
                out.insert(key, std::fs::read(&p).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn determinism(_: &FixtureSuite) -> Result<String, String> {
    let start = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    ensure(first.keys().eq(second.keys()), || "different artifact sets".into())?;
    for (k, v) in &first {
        ensure(second[k] == *v, || format!("{k} differs between runs"))?;
    }
    let dt = start.elapsed();
    ensure(dt < Duration::from_secs(60), || format!("took {dt:?}"))?;
    let svgs = first.keys().filter(|k| k.ends_with(".svg")).count();
    Ok(format!("{} artifacts ({svgs} SVGs) identical, {:.1} s", first.len(), dt.as_secs_f64()))
}

fn first_triggered(suite: &FixtureSuite) -> Result<String, String> {
    let b = suite.bundle("two_bug").ok_or("no two_bug")?;
    let ravens = b.ravens().map_err(|e| e.to_string())?;
    let mut w = Worker::new(&b.image, &ravens, &ReplayOptions::default()).map_err(|e| e.to_string())?;
    let rec = b
        .records()
        .into_iter()
        .find(|r| r.input_id.ends_with("_both"))
        .ok_or("no `both` seed")?;
    let o = w.replay(&rec);
    let order: Vec<&str> = w
        .oracle()
        .events()
        .iter()
        .filter(|e| e.kind == ReportKind::DetectedTriggered)
        .map(|e| e.bug_id.as_str())
        .collect();
    ensure(order.first() == Some(&"TB1"), || format!("hook order {order:?}"))?;
    ensure(o.first_triggered.as_deref() == Some("TB1"), || format!("first_triggered {:?}", o.first_triggered))?;
    ensure(o.flags.multi_bug, || "multi_bug not set".into())?;
    ensure(
        o.state_of("TB1") == BugState::Detected && o.state_of("TB2") == BugState::Detected,
        || "both bugs should be Detected".into(),
    )?;
    Ok("first_triggered TB1, multi_bug set".into())
}

fn main() {
    let start = Instant::now();
    let suite = match build_fixtures() {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL  fixtures did not build: {e}");
            std::process::exit(1);
        }
    };
    let criteria: [(&str, Check); 10] = [
        ("raven semantics (MF04)", raven_semantics),
        ("state lattice over the corpus", state_lattice),
        ("isolation", isolation),
        ("consistency formula", consistency_formula),
        ("survival estimator", survival),
        ("dedup pathologies", dedup),
        ("coverage inflation and live mode", exploit_pair),
        ("validation workflow", validation),
        ("end-to-end determinism", determinism),
        ("first-triggered / multi-bug", first_triggered),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(|| check(&suite))).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let ms = t.elapsed().as_millis();
        match r {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{ms} ms]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{ms} ms]", i + 1);
            }
        }
    }
    println!("{}/10 passed in {:.1} s", 10 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
