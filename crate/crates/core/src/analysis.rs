//! Joinability search and the four confluence criteria.
//!
//! Each side of a peak is explored breadth-first together with the phase of
//! a small automaton describing which label sequences are acceptable on
//! that side. A certificate is a pair of derivations that end in equivalent
//! states, both accepted by their automata. Among all certificates the
//! search returns the one with the fewest steps in total, then the least
//! pair of label sequences, comparing rules by program position.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;

use crate::engine::{applicable_steps, Derivation, LabeledStep};
use crate::orders::{
    check_termination, count_admissible, enumerate_admissible, is_admissible, Partition, RulePreorder, Termination,
};
use crate::peaks::{classify, critical_peaks, critical_peaks_between, CriticalPeak, PeakClass};
use crate::state::{CanonicalState, StateIndex};
use crate::syntax::Program;
use crate::terms::Name;

/// Above this many candidate orders the exhaustive enumeration is skipped.
pub const MAX_ENUMERATED_ORDERS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_depth: usize,
    pub max_states: usize,
    pub max_valleys: usize,
}

impl Default for Budget {
    fn default() -> Budget {
        Budget {
            max_depth: 8,
            max_states: 5000,
            max_valleys: 1,
        }
    }
}

/// Rules usable on a side, indexed by program position.
pub type RuleMask = Vec<bool>;

pub fn full_mask(p: &Program) -> RuleMask {
    vec![true; p.rules.len()]
}

pub fn mask_of(p: &Program, names: &BTreeSet<Name>) -> RuleMask {
    p.rules.iter().map(|r| names.contains(&r.name)).collect()
}

/// Automaton over rule indices restricting the labels of one side.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SidePattern {
    Any(RuleMask),
    AtMost(usize, RuleMask),
    /// `a* · (m | ε) · t*`
    Star {
        a: RuleMask,
        m: RuleMask,
        t: RuleMask,
    },
    Exact(Vec<usize>),
}

impl SidePattern {
    fn next(&self, phase: usize, r: usize) -> Vec<usize> {
        match self {
            SidePattern::Any(mask) => {
                if mask[r] {
                    vec![0]
                } else {
                    vec![]
                }
            }
            SidePattern::AtMost(k, mask) => {
                if phase < *k && mask[r] {
                    vec![phase + 1]
                } else {
                    vec![]
                }
            }
            SidePattern::Star { a, m, t } => {
                let mut out = Vec::new();
                if phase == 0 && a[r] {
                    out.push(0);
                }
                if (phase == 0 && m[r]) || t[r] {
                    out.push(1);
                }
                out
            }
            SidePattern::Exact(seq) => {
                if seq.get(phase) == Some(&r) {
                    vec![phase + 1]
                } else {
                    vec![]
                }
            }
        }
    }

    fn accepting(&self, phase: usize) -> bool {
        match self {
            SidePattern::Exact(seq) => phase == seq.len(),
            _ => true,
        }
    }

    /// Whether the automaton accepts a whole label sequence.
    pub fn accepts(&self, labels: &[usize]) -> bool {
        let mut phases = vec![0usize];
        for &r in labels {
            let mut next: Vec<usize> = phases.iter().flat_map(|&ph| self.next(ph, r)).collect();
            next.sort_unstable();
            next.dedup();
            if next.is_empty() {
                return false;
            }
            phases = next;
        }
        phases.iter().any(|&ph| self.accepting(ph))
    }
}

fn and(x: &[bool], y: &[bool]) -> RuleMask {
    x.iter().zip(y).map(|(a, b)| *a && *b).collect()
}

fn or(x: &[bool], y: &[bool]) -> RuleMask {
    x.iter().zip(y).map(|(a, b)| *a || *b).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    Any,
    SingleStepEq,
    /// Decreasing with respect to the peak labels `alpha` (left step) and
    /// `beta` (right step), given as program indices.
    Star {
        alpha: usize,
        beta: usize,
        order: RulePreorder,
    },
    Tactic {
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// Left side by rules of `q` only, right side by at most one rule of `p`.
    Modular {
        p: RuleMask,
        q: RuleMask,
    },
}

impl Pattern {
    pub fn sides(&self, allowed: &[bool]) -> (SidePattern, SidePattern) {
        match self {
            Pattern::Any => (SidePattern::Any(allowed.to_vec()), SidePattern::Any(allowed.to_vec())),
            Pattern::SingleStepEq => (
                SidePattern::AtMost(1, allowed.to_vec()),
                SidePattern::AtMost(1, allowed.to_vec()),
            ),
            Pattern::Star { alpha, beta, order } => {
                let (lt_a, lt_b) = (order.down_strict(&[*alpha]), order.down_strict(&[*beta]));
                let (le_a, le_b) = (order.down_eq(&[*alpha]), order.down_eq(&[*beta]));
                let t = and(&or(&lt_a, &lt_b), allowed);
                (
                    SidePattern::Star {
                        a: and(&lt_a, allowed),
                        m: and(&le_b, allowed),
                        t: t.clone(),
                    },
                    SidePattern::Star {
                        a: and(&lt_b, allowed),
                        m: and(&le_a, allowed),
                        t,
                    },
                )
            }
            Pattern::Tactic { left, right } => (SidePattern::Exact(left.clone()), SidePattern::Exact(right.clone())),
            Pattern::Modular { p, q } => (
                SidePattern::Any(and(q, allowed)),
                SidePattern::AtMost(1, and(p, allowed)),
            ),
        }
    }

    fn closed_status(&self) -> PeakStatus {
        match self {
            Pattern::Any | Pattern::Modular { .. } => PeakStatus::Joinable,
            Pattern::SingleStepEq => PeakStatus::StronglyJoinable,
            Pattern::Star { .. } | Pattern::Tactic { .. } => PeakStatus::Decreasing,
        }
    }
}

/// Property (⋆) by enumeration of split points: the left labels factor as
/// `A · M · T` with `A` strictly below `alpha`, `M` at most one label
/// below or equal to `beta`, and `T` strictly below `alpha` or `beta`; the
/// right labels likewise with `alpha` and `beta` exchanged.
pub fn matches_star(left: &[Name], right: &[Name], alpha: &str, beta: &str, o: &RulePreorder) -> bool {
    fn side(labels: &[Name], a: &str, b: &str, o: &RulePreorder) -> bool {
        let below_a = |g: &Name| o.gt_names(a, g);
        let below_eq_b = |g: &Name| o.ge_names(b, g);
        let below_ab = |g: &Name| o.gt_names(a, g) || o.gt_names(b, g);
        let n = labels.len();
        (0..=n).any(|i| {
            labels[..i].iter().all(below_a)
                && (i..=n.min(i + 1)).any(|j| labels[i..j].iter().all(below_eq_b) && labels[j..].iter().all(below_ab))
        })
    }
    side(left, alpha, beta, o) && side(right, beta, alpha, o)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Valley {
    pub left: Derivation,
    pub right: Derivation,
}

impl Valley {
    pub fn meet(&self) -> &CanonicalState {
        self.left.target()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PeakStatus {
    Joinable,
    StronglyJoinable,
    Decreasing,
    /// No certificate within the budget. `exhaustive` means both sides were
    /// explored completely under the pattern.
    NotClosed {
        exhaustive: bool,
        max_depth: usize,
        max_states: usize,
    },
    /// Both sides were explored completely without any restriction and
    /// never meet.
    Refuted,
}

impl PeakStatus {
    pub fn is_closed(&self) -> bool {
        matches!(
            self,
            PeakStatus::Joinable | PeakStatus::StronglyJoinable | PeakStatus::Decreasing
        )
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            PeakStatus::Joinable => "JOINABLE",
            PeakStatus::StronglyJoinable => "STRONGLY_JOINABLE",
            PeakStatus::Decreasing => "DECREASING",
            PeakStatus::NotClosed { .. } => "NOT_CLOSED",
            PeakStatus::Refuted => "REFUTED",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeakVerdict {
    pub status: PeakStatus,
    /// Best certificates first; empty unless closed.
    pub valleys: Vec<Valley>,
    pub notes: Vec<String>,
}

impl PeakVerdict {
    pub fn certificate(&self) -> Option<&Valley> {
        self.valleys.first()
    }
}

struct Classes<'a> {
    program: &'a Program,
    index: StateIndex,
    states: Vec<CanonicalState>,
    steps: Vec<Option<Vec<(usize, LabeledStep, usize)>>>,
}

impl<'a> Classes<'a> {
    fn new(program: &'a Program) -> Classes<'a> {
        Classes {
            program,
            index: StateIndex::new(),
            states: Vec::new(),
            steps: Vec::new(),
        }
    }

    fn class_of(&mut self, c: &CanonicalState) -> usize {
        let id = self.states.len();
        match self.index.insert(c, id) {
            Ok(()) => {
                self.states.push(c.clone());
                self.steps.push(None);
                id
            }
            Err(old) => old,
        }
    }

    /// Successors of a class by every rule, in program order.
    fn successors(&mut self, class: usize) -> Vec<(usize, LabeledStep, usize)> {
        if let Some(s) = &self.steps[class] {
            return s.clone();
        }
        let program = self.program;
        let state = self.states[class].clone();
        let mut out = Vec::new();
        for (r, rule) in program.rules.iter().enumerate() {
            for step in applicable_steps(program, &state, |x| x.name == rule.name) {
                let target = self.class_of(&step.target);
                out.push((r, step, target));
            }
        }
        self.steps[class] = Some(out.clone());
        out
    }
}

struct Node {
    class: usize,
    phase: usize,
    depth: usize,
    parent: Option<(usize, LabeledStep)>,
    labels: Vec<usize>,
}

struct Side {
    pattern: SidePattern,
    nodes: Vec<Node>,
    seen: HashMap<(usize, usize), usize>,
    frontier: Vec<usize>,
    depth: usize,
    truncated: bool,
    accepting: HashMap<usize, Vec<usize>>,
}

impl Side {
    fn new(pattern: SidePattern, root: usize) -> Side {
        let mut s = Side {
            pattern,
            nodes: Vec::new(),
            seen: HashMap::new(),
            frontier: Vec::new(),
            depth: 0,
            truncated: false,
            accepting: HashMap::new(),
        };
        s.add(root, 0, 0, None, Vec::new());
        s
    }

    fn add(
        &mut self,
        class: usize,
        phase: usize,
        depth: usize,
        parent: Option<(usize, LabeledStep)>,
        labels: Vec<usize>,
    ) -> Option<usize> {
        if self.seen.contains_key(&(class, phase)) {
            return None;
        }
        let id = self.nodes.len();
        self.seen.insert((class, phase), id);
        self.nodes.push(Node {
            class,
            phase,
            depth,
            parent,
            labels,
        });
        self.frontier.push(id);
        if self.pattern.accepting(phase) {
            self.accepting.entry(class).or_default().push(id);
            return Some(id);
        }
        None
    }

    fn complete(&self) -> bool {
        self.frontier.is_empty()
    }

    fn can_expand(&self, budget: &Budget) -> bool {
        !self.complete() && !self.truncated && self.depth < budget.max_depth
    }

    /// Lower bound on the length of any accepting path not yet found.
    fn bound(&self) -> usize {
        if self.complete() {
            usize::MAX
        } else {
            self.depth + 1
        }
    }

    /// Expands one BFS layer; returns the new accepting nodes.
    fn expand(&mut self, classes: &mut Classes, budget: &Budget) -> Vec<usize> {
        let layer = std::mem::take(&mut self.frontier);
        let mut fresh = Vec::new();
        'outer: for n in layer {
            let (class, phase) = (self.nodes[n].class, self.nodes[n].phase);
            for (r, step, target) in classes.successors(class) {
                for ph in self.pattern.next(phase, r) {
                    if self.seen.contains_key(&(target, ph)) {
                        continue;
                    }
                    if self.nodes.len() >= budget.max_states {
                        self.truncated = true;
                        break 'outer;
                    }
                    let mut labels = self.nodes[n].labels.clone();
                    labels.push(r);
                    if let Some(id) = self.add(target, ph, self.depth + 1, Some((n, step.clone())), labels) {
                        fresh.push(id);
                    }
                }
            }
        }
        self.depth += 1;
        fresh
    }

    fn derivation(&self, classes: &Classes, mut n: usize) -> Derivation {
        let mut steps = Vec::new();
        while let Some((parent, step)) = &self.nodes[n].parent {
            steps.push(step.clone());
            n = *parent;
        }
        steps.reverse();
        Derivation {
            source: classes.states[self.nodes[n].class].clone(),
            steps,
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
struct Candidate {
    total: usize,
    left_labels: Vec<usize>,
    right_labels: Vec<usize>,
    left: usize,
    right: usize,
}

impl Candidate {
    fn key(&self) -> (usize, &[usize], &[usize]) {
        (self.total, &self.left_labels, &self.right_labels)
    }
}

fn record(best: &mut Vec<Candidate>, c: Candidate, keep: usize) {
    if best.iter().any(|b| b.key() == c.key()) {
        return;
    }
    let at = best
        .binary_search_by(|b| b.key().cmp(&c.key()).then(Ordering::Less))
        .unwrap_or_else(|e| e);
    best.insert(at, c);
    best.truncate(keep.max(1));
}

/// Searches for a valley closing `peak` whose two label sequences are
/// accepted by `pattern`, using rules in `allowed` only.
pub fn join_search(
    p: &Program,
    peak: &CriticalPeak,
    allowed: &[bool],
    pattern: &Pattern,
    budget: &Budget,
) -> PeakVerdict {
    join_states(p, &peak.left_c, &peak.right_c, allowed, pattern, budget)
}

/// [`join_search`] on an arbitrary pair of states.
pub fn join_states(
    p: &Program,
    left: &CanonicalState,
    right: &CanonicalState,
    allowed: &[bool],
    pattern: &Pattern,
    budget: &Budget,
) -> PeakVerdict {
    let (lp, rp) = pattern.sides(allowed);
    let mut classes = Classes::new(p);
    let lroot = classes.class_of(left);
    let rroot = classes.class_of(right);
    let mut sides = [Side::new(lp, lroot), Side::new(rp, rroot)];
    let mut best: Vec<Candidate> = Vec::new();

    let meet = |sides: &[Side; 2], which: usize, fresh: &[usize], best: &mut Vec<Candidate>| {
        for &n in fresh {
            let class = sides[which].nodes[n].class;
            let Some(others) = sides[1 - which].accepting.get(&class) else {
                continue;
            };
            for &m in others {
                let (l, r) = if which == 0 { (n, m) } else { (m, n) };
                let (ln, rn) = (&sides[0].nodes[l], &sides[1].nodes[r]);
                record(
                    best,
                    Candidate {
                        total: ln.depth + rn.depth,
                        left_labels: ln.labels.clone(),
                        right_labels: rn.labels.clone(),
                        left: l,
                        right: r,
                    },
                    budget.max_valleys,
                );
            }
        }
    };
    let roots: Vec<usize> = sides[0].accepting.values().flatten().copied().collect();
    meet(&sides, 0, &roots, &mut best);

    loop {
        let lower = sides[0].bound().min(sides[1].bound());
        if best.len() >= budget.max_valleys.max(1) && best.last().is_some_and(|b| b.total < lower) {
            break;
        }
        if lower == usize::MAX {
            break;
        }
        let which = match (sides[0].can_expand(budget), sides[1].can_expand(budget)) {
            (true, true) => usize::from(sides[1].depth < sides[0].depth),
            (true, false) => 0,
            (false, true) => 1,
            (false, false) => break,
        };
        let fresh = sides[which].expand(&mut classes, budget);
        meet(&sides, which, &fresh, &mut best);
    }

    let mut notes = Vec::new();
    if best.is_empty() {
        for (name, root) in [("left", lroot), ("right", rroot)] {
            let moves = classes
                .successors(root)
                .iter()
                .any(|(r, _, _)| allowed.get(*r).copied().unwrap_or(false));
            if !moves {
                notes.push(format!("{name} reduct admits no step"));
            }
        }
        let exhaustive = sides.iter().all(|s| s.complete() && !s.truncated);
        let status = if exhaustive && *pattern == Pattern::Any {
            PeakStatus::Refuted
        } else {
            PeakStatus::NotClosed {
                exhaustive,
                max_depth: budget.max_depth,
                max_states: budget.max_states,
            }
        };
        return PeakVerdict {
            status,
            valleys: Vec::new(),
            notes,
        };
    }
    let valleys = best
        .iter()
        .map(|c| Valley {
            left: sides[0].derivation(&classes, c.left),
            right: sides[1].derivation(&classes, c.right),
        })
        .collect();
    PeakVerdict {
        status: pattern.closed_status(),
        valleys,
        notes,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Local,
    Strong,
    RuleDecreasing,
    Modular,
}

impl Mode {
    pub fn keyword(&self) -> &'static str {
        match self {
            Mode::Local => "local",
            Mode::Strong => "strong",
            Mode::RuleDecreasing => "rule_decreasing",
            Mode::Modular => "modular",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TerminationScope {
    Inductive,
    Program,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Admissibility {
    Yes(RulePreorder),
    No {
        coinductive: Name,
        inductive: Name,
    },
    /// Every admissible order was tried and none closes all peaks; the
    /// order closing the most peaks is reported.
    Exhausted {
        tried: usize,
        best: RulePreorder,
    },
}

#[derive(Clone, Debug)]
pub struct PeakReport {
    pub peak: CriticalPeak,
    pub class: PeakClass,
    pub verdict: PeakVerdict,
    /// Set when the certificate came from a user tactic.
    pub tactic: bool,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub mode: Mode,
    pub peaks: Vec<PeakReport>,
    pub termination: Option<(TerminationScope, Termination)>,
    pub admissible: Option<Admissibility>,
    pub partition: Option<Partition>,
    pub confluent: bool,
    /// Rule-decreasing with an empty inductive part.
    pub strong: bool,
    pub reason: Option<String>,
    pub assumptions: Vec<String>,
}

impl Report {
    pub fn failing(&self) -> impl Iterator<Item = &PeakReport> {
        self.peaks.iter().filter(|p| !p.verdict.status.is_closed())
    }
}

/// Label sequences to try on a peak before searching: selector → pairs.
pub type Tactics = HashMap<String, Vec<(Vec<Name>, Vec<Name>)>>;

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub budget: Budget,
    pub assume_terminating: bool,
    pub enumerate_orders: bool,
    pub tactics: Tactics,
}

fn indices(p: &Program, labels: &[Name]) -> Option<Vec<usize>> {
    labels.iter().map(|l| p.index_of(l)).collect()
}

/// Tries the tactics registered for `peak`; the first one whose valley is
/// also accepted by `pattern` wins.
fn try_tactics(
    p: &Program,
    peak: &CriticalPeak,
    allowed: &[bool],
    pattern: &Pattern,
    opts: &Options,
) -> Option<PeakVerdict> {
    let (lp, rp) = pattern.sides(allowed);
    for (left, right) in opts.tactics.get(&peak.selector())? {
        let (Some(l), Some(r)) = (indices(p, left), indices(p, right)) else {
            continue;
        };
        if !lp.accepts(&l) || !rp.accepts(&r) {
            continue;
        }
        let tactic = Pattern::Tactic { left: l, right: r };
        let mut v = join_search(p, peak, &full_mask(p), &tactic, &opts.budget);
        if v.status.is_closed() {
            v.status = pattern.closed_status();
            v.notes.push("closed by tactic".to_string());
            return Some(v);
        }
    }
    None
}

fn search_peak(
    p: &Program,
    peak: &CriticalPeak,
    allowed: &[bool],
    pattern: &Pattern,
    opts: &Options,
) -> (PeakVerdict, bool) {
    if let Some(v) = try_tactics(p, peak, allowed, pattern, opts) {
        return (v, true);
    }
    (join_search(p, peak, allowed, pattern, &opts.budget), false)
}

fn run_peaks(
    p: &Program,
    peaks: Vec<CriticalPeak>,
    part: &Partition,
    plan: impl Fn(&CriticalPeak, PeakClass) -> (RuleMask, Pattern) + Sync,
    opts: &Options,
) -> Vec<PeakReport> {
    peaks
        .into_par_iter()
        .filter(|pk| !pk.trivial)
        .map(|peak| {
            let class = classify(&peak, part);
            let (allowed, pattern) = plan(&peak, class);
            let (verdict, tactic) = search_peak(p, &peak, &allowed, &pattern, opts);
            PeakReport {
                peak,
                class,
                verdict,
                tactic,
            }
        })
        .collect()
}

fn peaks_reason(peaks: &[PeakReport]) -> Option<String> {
    peaks
        .iter()
        .any(|p| !p.verdict.status.is_closed())
        .then(|| "peaks_not_closed".to_string())
}

/// Newman-style check: the whole program must terminate and every
/// critical peak must be joinable.
pub fn check_local_confluence(p: &Program, opts: &Options) -> Report {
    let all: BTreeSet<Name> = p.names().into_iter().collect();
    let mut termination = check_termination(p, &all);
    let mut assumptions = Vec::new();
    if matches!(termination, Termination::Refuted(_)) && opts.assume_terminating {
        termination = Termination::Assumed;
        assumptions.push("terminating".to_string());
    }
    let part = Partition::all_inductive(p);
    let mask = full_mask(p);
    let peaks = run_peaks(p, critical_peaks(p), &part, |_, _| (mask.clone(), Pattern::Any), opts);
    let reason = match &termination {
        Termination::Refuted(r) => Some(format!("termination_refuted:{r}")),
        _ => peaks_reason(&peaks),
    };
    Report {
        mode: Mode::Local,
        confluent: reason.is_none(),
        peaks,
        termination: Some((TerminationScope::Program, termination)),
        admissible: None,
        partition: None,
        strong: false,
        reason,
        assumptions,
    }
}

/// Every critical peak must close in at most one step on each side.
pub fn check_strong_confluence(p: &Program, opts: &Options) -> Report {
    let part = Partition::all_inductive(p);
    let mask = full_mask(p);
    let peaks = run_peaks(
        p,
        critical_peaks(p),
        &part,
        |_, _| (mask.clone(), Pattern::SingleStepEq),
        opts,
    );
    let reason = peaks_reason(&peaks);
    Report {
        mode: Mode::Strong,
        confluent: reason.is_none(),
        peaks,
        termination: None,
        admissible: None,
        partition: None,
        strong: false,
        reason,
        assumptions: Vec::new(),
    }
}

/// Rule-decreasingness for a partition and an order. Without an order the
/// two-level order from the partition is used.
pub fn check_rule_decreasing(p: &Program, part: &Partition, order: Option<&RulePreorder>, opts: &Options) -> Report {
    let base_order = order.cloned().unwrap_or_else(|| RulePreorder::from_partition(p, part));
    let mut assumptions = Vec::new();
    let mut termination = check_termination(p, &part.inductive);
    if matches!(termination, Termination::Refuted(_)) && opts.assume_terminating {
        termination = Termination::Assumed;
        assumptions.push("inductive_terminating".to_string());
    }
    let all = full_mask(p);
    let inductive = mask_of(p, &part.inductive);
    let peaks: Vec<CriticalPeak> = critical_peaks(p).into_iter().filter(|pk| !pk.trivial).collect();

    let plan = |o: &RulePreorder| {
        let all = all.clone();
        let inductive = inductive.clone();
        let o = o.clone();
        move |pk: &CriticalPeak, class: PeakClass| match class {
            PeakClass::Inductive => (inductive.clone(), Pattern::Any),
            PeakClass::Coinductive => (
                all.clone(),
                Pattern::Star {
                    alpha: pk.i1,
                    beta: pk.i2,
                    order: o.clone(),
                },
            ),
        }
    };

    let admissible_base = is_admissible(&base_order, part);
    let mut reports = run_peaks(p, peaks.clone(), part, plan(&base_order), opts);
    let base_admissible = admissible_base.is_ok();
    let base_ok = base_admissible && reports.iter().all(|r| r.verdict.status.is_closed());
    let mut admissible = match admissible_base {
        Ok(()) => Admissibility::Yes(base_order.clone()),
        Err((c, i)) => Admissibility::No {
            coinductive: c,
            inductive: i,
        },
    };

    if !base_ok && opts.enumerate_orders {
        if count_admissible(part) <= MAX_ENUMERATED_ORDERS {
            let (outcome, best_reports) =
                search_orders(p, part, &peaks, &reports, base_admissible.then_some(&base_order), opts);
            admissible = outcome;
            reports = best_reports;
        } else {
            assumptions.push("order_enumeration_skipped".to_string());
        }
    }

    let reason = if let Admissibility::No { .. } = admissible {
        Some("order_not_admissible".to_string())
    } else if let Termination::Refuted(r) = &termination {
        Some(format!("termination_refuted:{r}"))
    } else if let Admissibility::Exhausted { .. } = admissible {
        Some("no_admissible_order".to_string())
    } else {
        peaks_reason(&reports)
    };
    Report {
        mode: Mode::RuleDecreasing,
        confluent: reason.is_none(),
        strong: reason.is_none() && part.inductive.is_empty(),
        peaks: reports,
        termination: Some((TerminationScope::Inductive, termination)),
        admissible: Some(admissible),
        partition: Some(part.clone()),
        reason,
        assumptions,
    }
}

/// Tries every admissible order; inductive peaks do not depend on the
/// order so only coinductive ones are recomputed, with results shared
/// between orders that induce the same automata.
fn search_orders(
    p: &Program,
    part: &Partition,
    peaks: &[CriticalPeak],
    base: &[PeakReport],
    base_order: Option<&RulePreorder>,
    opts: &Options,
) -> (Admissibility, Vec<PeakReport>) {
    let all = full_mask(p);
    let orders = enumerate_admissible(p, part);
    let tried = orders.len();
    let mut cache: HashMap<(usize, SidePattern, SidePattern), (PeakVerdict, bool)> = HashMap::new();
    let mut best: Option<(usize, RulePreorder, Vec<PeakReport>)> = None;
    if let Some(o) = base_order {
        let closed = base.iter().filter(|r| r.verdict.status.is_closed()).count();
        best = Some((closed, o.clone(), base.to_vec()));
    }
    for o in orders {
        let jobs: Vec<(usize, Pattern, SidePattern, SidePattern)> = base
            .iter()
            .enumerate()
            .filter(|(_, r)| r.class == PeakClass::Coinductive)
            .map(|(i, r)| {
                let pat = Pattern::Star {
                    alpha: r.peak.i1,
                    beta: r.peak.i2,
                    order: o.clone(),
                };
                let (l, rr) = pat.sides(&all);
                (i, pat, l, rr)
            })
            .collect();
        let missing: Vec<&(usize, Pattern, SidePattern, SidePattern)> = jobs
            .iter()
            .filter(|(i, _, l, r)| !cache.contains_key(&(*i, l.clone(), r.clone())))
            .collect();
        let computed: Vec<_> = missing
            .par_iter()
            .map(|(i, pat, l, r)| ((*i, l.clone(), r.clone()), search_peak(p, &peaks[*i], &all, pat, opts)))
            .collect();
        cache.extend(computed);
        let mut reports = base.to_vec();
        for (i, _, l, r) in &jobs {
            let (v, tactic) = cache[&(*i, l.clone(), r.clone())].clone();
            reports[*i].verdict = v;
            reports[*i].tactic = tactic;
        }
        let closed = reports.iter().filter(|r| r.verdict.status.is_closed()).count();
        if closed == reports.len() {
            return (Admissibility::Yes(o), reports);
        }
        if best.as_ref().is_none_or(|(c, _, _)| closed > *c) {
            best = Some((closed, o, reports));
        }
    }
    let (_, order, reports) = best.unwrap_or_else(|| (0, RulePreorder::from_partition(p, part), base.to_vec()));
    (Admissibility::Exhausted { tried, best: order }, reports)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule `{0}` occurs in both programs")]
pub struct NameClash(pub String);

/// Peaks between `p` (left step) and `q` (right step) must close by any
/// number of `q` steps on the left and at most one `p` step on the right.
pub fn check_modularity(p: &Program, q: &Program, opts: &Options) -> Result<Report, NameClash> {
    if let Some(r) = q.rules.iter().find(|r| p.rule(&r.name).is_some()) {
        return Err(NameClash(r.name.to_string()));
    }
    let pq = p.union(q);
    let n = p.rules.len();
    let pm: RuleMask = (0..pq.rules.len()).map(|i| i < n).collect();
    let qm: RuleMask = pm.iter().map(|b| !b).collect();
    let mut peaks = critical_peaks_between(p, q, false);
    for pk in peaks.iter_mut() {
        pk.i2 += n;
    }
    let part = Partition::all_inductive(&pq);
    let all = full_mask(&pq);
    let pattern = Pattern::Modular { p: pm, q: qm };
    let reports = run_peaks(&pq, peaks, &part, |_, _| (all.clone(), pattern.clone()), opts);
    let reason = peaks_reason(&reports);
    Ok(Report {
        mode: Mode::Modular,
        confluent: reason.is_none(),
        peaks: reports,
        termination: None,
        admissible: None,
        partition: None,
        strong: false,
        reason,
        assumptions: vec!["P_confluent".to_string(), "Q_confluent".to_string()],
    })
}
