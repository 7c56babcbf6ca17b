//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use chrdc::analysis::{
    check_modularity, check_rule_decreasing, check_strong_confluence, full_mask, join_search, Options, Pattern,
    PeakStatus, Report,
};
use chrdc::cli::report::{parse_records, Record};
use chrdc::orders::{enumerate_admissible, is_admissible, Partition, RulePreorder, Termination};
use chrdc::peaks::{critical_peaks, CriticalPeak};
use chrdc::state::canonicalize;
use chrdc::syntax::parse_state;
use chrdc::terms::Name;
use common::{chrdc, embeds, fixture_str, load, props};

type Outcome = Result<(), String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn machine(args: &[&str]) -> (Vec<Record>, i32, String) {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--format", "machine"]);
    let (out, code) = chrdc(&full);
    let records = parse_records(&out).unwrap_or_else(|| panic!("unparseable machine output:\n{out}"));
    (records, code, out)
}

fn find<'a>(records: &'a [Record], kind: &str) -> Option<&'a Record> {
    records.iter().find(|r| r.kind == kind)
}

fn words(r: Option<&Record>) -> Vec<&str> {
    r.map(|r| r.words.iter().map(String::as_str).collect())
        .unwrap_or_default()
}

fn labels(v: &[Name]) -> Vec<&str> {
    v.iter().map(|n| &**n).collect()
}

/// The partial-order peak from two opposite `leq` atoms: antisymmetry
/// leaves only the equation, transitivity adds `leq(X,X)`.
fn is_opposite_pair_peak(pk: &CriticalPeak) -> bool {
    let s = canonicalize(&parse_state("leq(X,Y), leq(Y,X) # globals: X, Y").unwrap());
    let l = canonicalize(&parse_state("X = Y # globals: X, Y").unwrap());
    let r = canonicalize(&parse_state("leq(X,Y), leq(Y,X), leq(X,X) # globals: X, Y").unwrap());
    &*pk.r1 == "antisymmetry" && &*pk.r2 == "transitivity" && pk.ancestor_c.user().len() == 2 && embeds(pk, &s, &l, &r)
}

fn criterion_1() -> Outcome {
    let (recs, code, _) = machine(&[
        "check",
        "--mode",
        "decreasing",
        &fixture_str("leq.chr"),
        "--config",
        &fixture_str("leq.cfg"),
    ]);
    ensure!(code == 0, "exit code {code}");
    ensure!(
        words(find(&recs, "VERDICT")) == ["rule_decreasing", "CONFLUENT"],
        "verdict {:?}",
        find(&recs, "VERDICT")
    );
    ensure!(
        words(find(&recs, "TERMINATION")) == ["inductive", "VERIFIED"],
        "termination {:?}",
        find(&recs, "TERMINATION")
    );
    // Every admissible order, not just the default one.
    let p = load("leq.chr");
    let part = Partition::declared(&p, None, Some(&["transitivity".to_string()])).unwrap();
    let orders = enumerate_admissible(&p, &part);
    ensure!(orders.len() == 29, "{} admissible orders", orders.len());
    for o in &orders {
        let r = check_rule_decreasing(&p, &part, Some(o), &Options::default());
        ensure!(r.confluent, "order {o} fails: {:?}", r.reason);
        ensure!(
            r.termination.as_ref().map(|t| &t.1) == Some(&Termination::Verified),
            "termination"
        );
    }
    Ok(())
}

fn criterion_2() -> Outcome {
    let (recs, code, _) = machine(&[
        "check",
        "--mode",
        "decreasing",
        &fixture_str("leq.chr"),
        "--config",
        &fixture_str("leq_strong.cfg"),
    ]);
    ensure!(code == 0, "exit code {code}");
    let verdict = find(&recs, "VERDICT").ok_or("no verdict")?;
    ensure!(
        verdict.words == ["rule_decreasing", "CONFLUENT"],
        "verdict {:?}",
        verdict
    );
    ensure!(verdict.field("kind").is_some(), "not strongly rule-decreasing");
    let p = load("leq.chr");
    let part = Partition::all_coinductive(&p);
    let o = RulePreorder::from_pairs(
        &p,
        &[
            ("transitivity".into(), "duplicate".into(), true),
            ("duplicate".into(), "antisymmetry".into(), true),
            ("antisymmetry".into(), "reflexivity".into(), true),
        ],
    )
    .unwrap();
    let r = check_rule_decreasing(&p, &part, Some(&o), &Options::default());
    ensure!(r.confluent && r.strong, "library verdict differs");
    let mut seen = 0;
    for pr in r.peaks.iter().filter(|pr| is_opposite_pair_peak(&pr.peak)) {
        seen += 1;
        let v = pr.verdict.certificate().ok_or("opposite-pair peak has no certificate")?;
        ensure!(
            v.left.labels().is_empty() && labels(&v.right.labels()) == ["reflexivity", "antisymmetry"],
            "opposite-pair peak closes with {:?} / {:?}",
            v.left.labels(),
            v.right.labels()
        );
        for l in v.left.labels().iter().chain(&v.right.labels()) {
            ensure!(
                o.gt_names(&pr.peak.r1, l) || o.gt_names(&pr.peak.r2, l),
                "{l} is not below the peak labels"
            );
        }
    }
    ensure!(seen > 0, "opposite-pair peak not found");
    Ok(())
}

fn criterion_3() -> Outcome {
    let (recs, code, _) = machine(&["check", "--mode", "strong", &fixture_str("leq.chr")]);
    ensure!(code == 1, "exit code {code}");
    ensure!(
        words(find(&recs, "VERDICT")) == ["strong", "NOT_ESTABLISHED"],
        "verdict"
    );
    let p = load("leq.chr");
    let r = check_strong_confluence(&p, &Options::default());
    let failing: Vec<_> = r.failing().collect();
    let peak = failing
        .iter()
        .find(|pr| is_opposite_pair_peak(&pr.peak))
        .ok_or("opposite-pair peak not among the failing peaks")?;
    ensure!(
        peak.verdict.notes.iter().any(|n| n == "left reduct admits no step"),
        "notes {:?}",
        peak.verdict.notes
    );
    let id = peak.peak.id.to_string();
    ensure!(
        recs.iter().any(|rec| rec.kind == "PEAK"
            && rec.words.first() == Some(&id)
            && rec.words.get(3).map(String::as_str) == Some("NOT_CLOSED")),
        "peak {id} not flagged in the report"
    );
    Ok(())
}

fn criterion_4() -> Outcome {
    let (recs, _, _) = machine(&["peaks", &fixture_str("philos.chr")]);
    let peaks: Vec<&Record> = recs.iter().filter(|r| r.kind == "PEAK").collect();
    ensure!(!peaks.is_empty(), "no peaks");
    ensure!(
        peaks.iter().all(|r| r.words[1] == "eat" && r.words[2] == "eat"),
        "a peak does not pair eat with eat"
    );
    let (recs, code, _) = machine(&[
        "check",
        "--mode",
        "decreasing",
        &fixture_str("philos.chr"),
        "--config",
        &fixture_str("philos.cfg"),
    ]);
    ensure!(code == 0, "exit code {code}");
    ensure!(
        words(find(&recs, "VERDICT")) == ["rule_decreasing", "CONFLUENT"],
        "verdict"
    );
    for r in recs.iter().filter(|r| r.kind == "PEAK") {
        let trace = ["thk", "eat", "thk"].map(String::from);
        ensure!(
            r.list("left") == Some(&trace[..]) && r.list("right") == Some(&trace[..]),
            "peak {} closes with {:?} / {:?}",
            r.words[0],
            r.list("left"),
            r.list("right")
        );
    }
    Ok(())
}

fn criterion_5() -> Outcome {
    let (recs, _, _) = machine(&["peaks", &fixture_str("pminus.chr")]);
    ensure!(recs.iter().filter(|r| r.kind == "PEAK").count() == 1, "peak count");
    let (recs, code, _) = machine(&["check", "--mode", "decreasing", &fixture_str("pminus.chr")]);
    ensure!(code == 0, "all-inductive exit code {code}");
    ensure!(
        words(find(&recs, "TERMINATION")) == ["inductive", "VERIFIED"],
        "termination"
    );
    ensure!(
        find(&recs, "TERMINATION").and_then(|r| r.field("measure")).is_some(),
        "measure"
    );
    let (recs, code, _) = machine(&[
        "check",
        &fixture_str("pminus.chr"),
        "--config",
        &fixture_str("pminus_co.cfg"),
    ]);
    ensure!(code == 1, "coinductive exit code {code}");
    ensure!(
        words(find(&recs, "VERDICT")) == ["rule_decreasing", "NOT_ESTABLISHED"],
        "verdict"
    );
    ensure!(
        words(find(&recs, "ADMISSIBLE")) == ["EXHAUSTED"],
        "admissibility {:?}",
        find(&recs, "ADMISSIBLE")
    );
    Ok(())
}

fn criterion_6() -> Outcome {
    let p = load("pplus.chr");
    let real: Vec<_> = critical_peaks(&p).into_iter().filter(|pk| !pk.trivial).collect();
    ensure!(real.len() == 1, "{} peaks", real.len());
    let opts = Options {
        enumerate_orders: true,
        ..Options::default()
    };
    for dup_inductive in [true, false] {
        for s_plus_inductive in [true, false] {
            let mut part = Partition::all_inductive(&p);
            for (rule, inductive) in [("duplicate", dup_inductive), ("s_plus", s_plus_inductive)] {
                if !inductive {
                    part.inductive.remove(rule);
                    part.coinductive.insert(chrdc::terms::name(rule));
                }
            }
            let r = check_rule_decreasing(&p, &part, None, &opts);
            ensure!(!r.confluent, "established for {:?}", part);
            if s_plus_inductive {
                ensure!(
                    matches!(r.termination, Some((_, Termination::Refuted(_)))),
                    "termination not refuted for {:?}",
                    part
                );
            } else {
                for o in enumerate_admissible(&p, &part) {
                    let r = check_rule_decreasing(&p, &part, Some(&o), &Options::default());
                    ensure!(is_admissible(&o, &part).is_ok(), "enumerated order not admissible");
                    ensure!(
                        r.peaks
                            .iter()
                            .all(|pr| matches!(pr.verdict.status, PeakStatus::NotClosed { .. })),
                        "peak decreasing under {o}"
                    );
                }
            }
        }
    }
    let (recs, code, _) = machine(&["check", &fixture_str("pplus.chr")]);
    ensure!(
        code == 1 && words(find(&recs, "VERDICT")) == ["rule_decreasing", "NOT_ESTABLISHED"],
        "cli verdict"
    );
    Ok(())
}

fn criterion_7() -> Outcome {
    let suites: [(&str, Check); 7] = [
        ("a", props::unifier_laws),
        ("b", props::equivalence_laws),
        ("c", props::monotonicity),
        ("d", props::peak_replay),
        ("e", props::star_agreement),
        ("f", props::certificate_replay),
        ("g", props::peak_completeness),
    ];
    for (tag, suite) in suites {
        let start = Instant::now();
        suite().map_err(|e| format!("({tag}) {e}"))?;
        println!("    ({tag}) {} cases ok in {:.2?}", props::CASES, start.elapsed());
    }
    Ok(())
}

fn modular(p: &str, q: &str) -> Result<Report, String> {
    check_modularity(&load(p), &load(q), &Options::default()).map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    for (p, q) in [
        ("p_refl.chr", "q_dup.chr"),
        ("p_refl.chr", "q_sminus.chr"),
        ("p_splus.chr", "q_sminus.chr"),
    ] {
        let r = modular(p, q)?;
        ensure!(r.confluent, "{p} + {q} not established");
        let (_, code, _) = machine(&["check", "--mode", "modular", &fixture_str(p), &fixture_str(q)]);
        ensure!(code == 0, "cli exit code {code} for {p} + {q}");
    }
    let splus = modular("p_splus.chr", "q_sminus.chr")?;
    let v = splus.peaks[0].verdict.certificate().ok_or("no certificate")?;
    ensure!(labels(&v.left.labels()).iter().all(|l| *l == "s_minus"), "left uses P");
    ensure!(v.right.len() <= 1, "right too long");

    let r = modular("p_viol.chr", "q_viol.chr")?;
    ensure!(!r.confluent, "violating pair established");
    let (_, code, _) = machine(&[
        "check",
        "--mode",
        "modular",
        &fixture_str("p_viol.chr"),
        &fixture_str("q_viol.chr"),
    ]);
    ensure!(code == 1, "cli exit code {code}");
    // Without the restriction the peak closes, but only with two P steps.
    let union = load("p_viol.chr").union(&load("q_viol.chr"));
    let pr = &r.peaks[0];
    let free = join_search(
        &union,
        &pr.peak,
        &full_mask(&union),
        &Pattern::Any,
        &Options::default().budget,
    );
    let v = free
        .certificate()
        .ok_or("unrestricted search does not close the peak")?;
    ensure!(
        v.left.is_empty() && labels(&v.right.labels()) == ["b", "c"],
        "unrestricted valley {:?}",
        v.right.labels()
    );
    Ok(())
}

fn criterion_runs() -> Vec<Vec<String>> {
    let f = fixture_str;
    vec![
        vec![
            "check".into(),
            "--mode".into(),
            "decreasing".into(),
            f("leq.chr"),
            "--config".into(),
            f("leq.cfg"),
        ],
        vec![
            "check".into(),
            "--mode".into(),
            "decreasing".into(),
            f("leq.chr"),
            "--config".into(),
            f("leq_strong.cfg"),
        ],
        vec!["check".into(), "--mode".into(), "strong".into(), f("leq.chr")],
        vec!["check".into(), "--mode".into(), "local".into(), f("leq.chr")],
        vec!["peaks".into(), f("philos.chr")],
        vec![
            "check".into(),
            "--mode".into(),
            "decreasing".into(),
            f("philos.chr"),
            "--config".into(),
            f("philos.cfg"),
        ],
        vec!["peaks".into(), f("pminus.chr")],
        vec!["check".into(), f("pminus.chr")],
        vec!["check".into(), f("pminus.chr"), "--config".into(), f("pminus_co.cfg")],
        vec!["check".into(), f("pplus.chr")],
        vec![
            "check".into(),
            "--mode".into(),
            "modular".into(),
            f("p_refl.chr"),
            f("q_dup.chr"),
        ],
        vec![
            "check".into(),
            "--mode".into(),
            "modular".into(),
            f("p_splus.chr"),
            f("q_sminus.chr"),
        ],
        vec![
            "check".into(),
            "--mode".into(),
            "modular".into(),
            f("p_viol.chr"),
            f("q_viol.chr"),
        ],
    ]
}

/// Runs the installed binary in a fresh process.
fn binary(args: &[String]) -> (Vec<u8>, Option<i32>) {
    let out = Command::new(env!("CARGO_BIN_EXE_chrdc"))
        .args(args)
        .args(["--format", "machine"])
        .output()
        .expect("binary runs");
    (out.stdout, out.status.code())
}

fn criterion_9() -> Outcome {
    for args in criterion_runs() {
        let first = binary(&args);
        let second = binary(&args);
        ensure!(!first.0.is_empty(), "`{}` printed nothing", args.join(" "));
        ensure!(first == second, "`{}` differs between runs", args.join(" "));
        let in_process: Vec<&str> = args.iter().map(String::as_str).collect();
        ensure!(
            machine(&in_process).2.as_bytes() == first.0,
            "`{}` differs from the library",
            args.join(" ")
        );
    }
    // The property suites are seeded, so a second run must agree as well.
    ensure!(
        props::star_agreement() == props::star_agreement(),
        "property runs differ"
    );
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        (
            "partial-order solver is rule-decreasing for every admissible order",
            criterion_1,
        ),
        (
            "partial-order solver is strongly rule-decreasing when all rules are coinductive",
            criterion_2,
        ),
        (
            "partial-order solver is not strongly confluent at the two-atom peak",
            criterion_3,
        ),
        (
            "dining philosophers are rule-decreasing with eat above thk",
            criterion_4,
        ),
        (
            "P-minus: one peak, confluent when inductive, no order when s_minus is coinductive",
            criterion_5,
        ),
        ("P-plus: one peak, never established", criterion_6),
        ("property suites", criterion_7),
        ("modularity of unions", criterion_8),
        ("machine reports are deterministic", criterion_9),
    ];
    let mut failed = 0;
    for (i, (what, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        match result {
            Ok(()) => println!("criterion {}: PASS  {what} ({elapsed:.2?})", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL  {what} ({elapsed:.2?})\n    {e}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
