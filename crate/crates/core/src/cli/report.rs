//! Rendering of analysis reports, as prose or as line records.
//!
//! Machine records are space separated. The first field names the record,
//! then come positional words, then `key=value` fields whose value is a
//! word or a bracketed comma list:
//!
//! ```text
//! PEAK 3 antisymmetry transitivity DECREASING left=[] right=[reflexivity,antisymmetry]
//! TERMINATION inductive VERIFIED measure=atoms,size
//! ADMISSIBLE YES order=[transitivity>duplicate]
//! VERDICT rule_decreasing CONFLUENT assumptions=[]
//! ```

use std::fmt::Write;

use crate::analysis::{Admissibility, PeakStatus, Report, TerminationScope, Valley};
use crate::engine::Derivation;
use crate::orders::{Partition, Termination};
use crate::peaks::{CriticalPeak, PeakClass};
use crate::syntax::VarNamer;
use crate::terms::Name;

fn bracket<S: AsRef<str>>(items: &[S]) -> String {
    let inner: Vec<&str> = items.iter().map(|s| s.as_ref()).collect();
    format!("[{}]", inner.join(","))
}

fn labels(d: &Derivation) -> String {
    bracket(&d.labels())
}

fn class_word(c: PeakClass) -> &'static str {
    match c {
        PeakClass::Inductive => "INDUCTIVE",
        PeakClass::Coinductive => "COINDUCTIVE",
    }
}

fn scope_word(s: &TerminationScope) -> &'static str {
    match s {
        TerminationScope::Inductive => "inductive",
        TerminationScope::Program => "program",
    }
}

/// `PEAK` records for the `peaks` command.
pub fn machine_peaks(peaks: &[CriticalPeak], part: &Partition) -> String {
    let mut out = String::new();
    for pk in peaks.iter().filter(|p| !p.trivial) {
        writeln!(
            out,
            "PEAK {} {} {} {} selector={}",
            pk.id,
            pk.r1,
            pk.r2,
            class_word(pk.classify(part)),
            pk.selector()
        )
        .unwrap();
    }
    writeln!(out, "PEAKS count={}", peaks.iter().filter(|p| !p.trivial).count()).unwrap();
    out
}

pub fn text_peaks(peaks: &[CriticalPeak], part: &Partition) -> String {
    let mut out = String::new();
    let real: Vec<&CriticalPeak> = peaks.iter().filter(|p| !p.trivial).collect();
    writeln!(out, "{} critical peak(s)", real.len()).unwrap();
    for pk in real {
        out.push('\n');
        write_peak_header(&mut out, pk, pk.classify(part));
    }
    out
}

fn write_peak_header(out: &mut String, pk: &CriticalPeak, class: PeakClass) {
    let n = pk.namer();
    writeln!(
        out,
        "peak {} [{}] {} x {}  ({})",
        pk.id,
        class,
        pk.r1,
        pk.r2,
        pk.selector()
    )
    .unwrap();
    writeln!(out, "  ancestor: {}", pk.ancestor_c.show(&n)).unwrap();
    writeln!(out, "  left  by {}: {}", pk.r1, pk.left_c.show(&n)).unwrap();
    writeln!(out, "  right by {}: {}", pk.r2, pk.right_c.show(&n)).unwrap();
}

fn write_closing(out: &mut String, side: &str, d: &Derivation, n: &VarNamer) {
    write!(out, "  {side} closing: {}", d.source.show(n)).unwrap();
    for s in &d.steps {
        write!(out, "\n      -{}-> {}", s.rule, s.target.show(n)).unwrap();
    }
    out.push('\n');
}

fn valley_namer(pk: &CriticalPeak, v: &Valley) -> VarNamer {
    let mut vars = pk.ancestor_c.vars();
    vars.extend(pk.left_c.vars());
    vars.extend(pk.right_c.vars());
    for d in [&v.left, &v.right] {
        for s in &d.steps {
            vars.extend(s.target.vars());
        }
    }
    VarNamer::new(&vars)
}

fn termination_record(scope: &TerminationScope, t: &Termination) -> String {
    match t {
        Termination::Verified => format!("TERMINATION {} VERIFIED measure=atoms,size", scope_word(scope)),
        Termination::Assumed => format!("TERMINATION {} ASSUMED", scope_word(scope)),
        Termination::Refuted(r) => format!("TERMINATION {} REFUTED rule={r}", scope_word(scope)),
    }
}

fn admissible_record(a: &Admissibility) -> String {
    match a {
        Admissibility::Yes(o) => format!("ADMISSIBLE YES order={}", bracket(&o.pairs())),
        Admissibility::No { coinductive, inductive } => format!("ADMISSIBLE NO witness=[{coinductive},{inductive}]"),
        Admissibility::Exhausted { tried, best } => {
            format!("ADMISSIBLE EXHAUSTED tried={tried} best={}", bracket(&best.pairs()))
        }
    }
}

fn verdict_record(r: &Report) -> String {
    let mut line = format!(
        "VERDICT {} {} assumptions={}",
        r.mode,
        if r.confluent { "CONFLUENT" } else { "NOT_ESTABLISHED" },
        bracket(&r.assumptions)
    );
    if r.strong {
        line.push_str(" kind=strong");
    }
    if let Some(reason) = &r.reason {
        write!(line, " reason={reason}").unwrap();
    }
    line
}

pub fn machine_report(r: &Report) -> String {
    let mut out = String::new();
    for p in &r.peaks {
        let pk = &p.peak;
        write!(out, "PEAK {} {} {} {}", pk.id, pk.r1, pk.r2, p.verdict.status.keyword()).unwrap();
        match (&p.verdict.status, p.verdict.certificate()) {
            (
                PeakStatus::NotClosed {
                    exhaustive,
                    max_depth,
                    max_states,
                },
                _,
            ) => {
                write!(
                    out,
                    " bounds=[depth={max_depth},states={max_states}] exhaustive={}",
                    if *exhaustive { "yes" } else { "no" }
                )
                .unwrap();
            }
            (_, Some(v)) => {
                write!(out, " left={} right={}", labels(&v.left), labels(&v.right)).unwrap();
                if p.tactic {
                    out.push_str(" tactic=yes");
                }
            }
            _ => {}
        }
        out.push('\n');
    }
    if let Some((scope, t)) = &r.termination {
        writeln!(out, "{}", termination_record(scope, t)).unwrap();
    }
    if let Some(a) = &r.admissible {
        writeln!(out, "{}", admissible_record(a)).unwrap();
    }
    writeln!(out, "{}", verdict_record(r)).unwrap();
    out
}

fn names_list(names: &std::collections::BTreeSet<Name>) -> String {
    names.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn text_report(r: &Report) -> String {
    let mut out = String::new();
    let title = match r.mode {
        crate::analysis::Mode::Local => "local confluence (terminating program, joinable peaks)",
        crate::analysis::Mode::Strong => "strong confluence (peaks closed in at most one step per side)",
        crate::analysis::Mode::RuleDecreasing => "rule-decreasingness",
        crate::analysis::Mode::Modular => "modularity of a union",
    };
    writeln!(out, "check: {title}").unwrap();
    if let Some(part) = &r.partition {
        writeln!(out, "inductive rules:   {}", names_list(&part.inductive)).unwrap();
        writeln!(out, "coinductive rules: {}", names_list(&part.coinductive)).unwrap();
    }
    if let Some(a) = &r.admissible {
        match a {
            Admissibility::Yes(o) => writeln!(out, "order: {o} (admissible)").unwrap(),
            Admissibility::No { coinductive, inductive } => {
                writeln!(out, "order: not admissible, {coinductive} is not above {inductive}").unwrap()
            }
            Admissibility::Exhausted { tried, best } => {
                writeln!(out, "order: none of {tried} admissible orders works; closest: {best}").unwrap()
            }
        }
    }
    if let Some((scope, t)) = &r.termination {
        let what = match scope {
            TerminationScope::Inductive => "inductive part",
            TerminationScope::Program => "program",
        };
        let how = match t {
            Termination::Verified => "verified by the (weighted atoms, size) measure".to_string(),
            Termination::Assumed => "assumed".to_string(),
            Termination::Refuted(rule) => format!("not shown, rule {rule} does not decrease the measure"),
        };
        writeln!(out, "termination of the {what}: {how}").unwrap();
    }
    writeln!(out, "{} critical peak(s)", r.peaks.len()).unwrap();
    for p in &r.peaks {
        out.push('\n');
        write_peak_header(&mut out, &p.peak, p.class);
        let status = match &p.verdict.status {
            PeakStatus::NotClosed {
                exhaustive,
                max_depth,
                max_states,
            } => {
                if *exhaustive {
                    "not closed (search space exhausted)".to_string()
                } else {
                    format!("not closed within depth {max_depth}, {max_states} states")
                }
            }
            PeakStatus::Refuted => "not joinable (both sides fully explored)".to_string(),
            s => s.keyword().to_lowercase().replace('_', " "),
        };
        writeln!(out, "  status: {status}{}", if p.tactic { " (by tactic)" } else { "" }).unwrap();
        for note in &p.verdict.notes {
            writeln!(out, "  note: {note}").unwrap();
        }
        if let Some(v) = p.verdict.certificate() {
            let n = valley_namer(&p.peak, v);
            write_closing(&mut out, "left", &v.left, &n);
            write_closing(&mut out, "right", &v.right, &n);
        }
    }
    out.push('\n');
    let verdict = if r.confluent {
        if r.strong {
            "CONFLUENT (strongly rule-decreasing)".to_string()
        } else {
            "CONFLUENT".to_string()
        }
    } else {
        format!(
            "NOT ESTABLISHED ({})",
            r.reason.as_deref().unwrap_or("unknown").replace('_', " ")
        )
    };
    writeln!(out, "verdict: {verdict}").unwrap();
    if !r.assumptions.is_empty() {
        writeln!(out, "assuming: {}", r.assumptions.join(", ")).unwrap();
    }
    out
}

/// A field value of a machine record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Word(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub kind: String,
    pub words: Vec<String>,
    pub fields: Vec<(String, Value)>,
}

impl Record {
    pub fn field(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn list(&self, key: &str) -> Option<&[String]> {
        match self.field(key)? {
            Value::List(items) => Some(items),
            Value::Word(_) => None,
        }
    }

    pub fn render(&self) -> String {
        let mut parts = vec![self.kind.clone()];
        parts.extend(self.words.iter().cloned());
        for (k, v) in &self.fields {
            match v {
                Value::Word(w) => parts.push(format!("{k}={w}")),
                Value::List(items) => parts.push(format!("{k}={}", bracket(items))),
            }
        }
        parts.join(" ")
    }
}

/// Parses machine output back into records; `None` on a malformed line.
pub fn parse_records(text: &str) -> Option<Vec<Record>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|line| {
            let mut tokens = line.split(' ');
            let kind = tokens.next()?.to_string();
            if kind.is_empty() || !kind.chars().all(|c| c.is_ascii_uppercase()) {
                return None;
            }
            let mut words = Vec::new();
            let mut fields = Vec::new();
            for tok in tokens {
                match tok.split_once('=') {
                    Some((k, v)) if !k.is_empty() && !k.contains('[') => {
                        let value = if let Some(inner) = v.strip_prefix('[') {
                            let inner = inner.strip_suffix(']')?;
                            Value::List(if inner.is_empty() {
                                Vec::new()
                            } else {
                                inner.split(',').map(str::to_string).collect()
                            })
                        } else {
                            Value::Word(v.to_string())
                        };
                        fields.push((k.to_string(), value));
                    }
                    _ if fields.is_empty() && !tok.is_empty() => words.push(tok.to_string()),
                    _ => return None,
                }
            }
            Some(Record { kind, words, fields })
        })
        .collect()
}
