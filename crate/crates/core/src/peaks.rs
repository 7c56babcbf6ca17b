//! Critical peaks: superpositions of two rules on shared head atoms.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;

use crate::orders::Partition;
use crate::state::{canonical_equivalent, canonicalize, CanonicalState, State};
use crate::syntax::{equations, Atom, Constraint, Program, Rule, VarNamer};
use crate::terms::{tag_vars, unify, Name, Subst, Substitutable, Term, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PeakClass {
    Inductive,
    Coinductive,
}

impl fmt::Display for PeakClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeakClass::Inductive => "inductive",
            PeakClass::Coinductive => "coinductive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CriticalPeak {
    /// Position in the emitted sequence, from 1; trivial peaks get 0.
    pub id: usize,
    pub r1: Name,
    pub r2: Name,
    /// Index of `r1` in the left program and of `r2` in the right one.
    pub i1: usize,
    pub i2: usize,
    /// Rank among the peaks of the same rule pair, from 1.
    pub k: usize,
    pub ancestor: State,
    pub left: State,
    pub right: State,
    /// Pairs of head positions (kept heads first) identified by the overlap.
    pub overlap: Vec<(usize, usize)>,
    /// Most general unifier of the overlap equations and guards.
    pub unifier: Subst,
    pub ancestor_c: CanonicalState,
    pub left_c: CanonicalState,
    pub right_c: CanonicalState,
    /// Both reducts are equivalent; discharged without search.
    pub trivial: bool,
}

impl CriticalPeak {
    pub fn selector(&self) -> String {
        format!("peak:{}x{}#{}", self.r1, self.r2, self.k)
    }

    pub fn classify(&self, part: &Partition) -> PeakClass {
        classify(self, part)
    }

    /// A namer shared by the three states so that printed variables agree.
    pub fn namer(&self) -> VarNamer {
        let mut vars = self.ancestor_c.vars();
        vars.extend(self.left_c.vars());
        vars.extend(self.right_c.vars());
        VarNamer::new(&vars)
    }
}

pub fn classify(peak: &CriticalPeak, part: &Partition) -> PeakClass {
    if part.is_inductive(&peak.r1) && part.is_inductive(&peak.r2) {
        PeakClass::Inductive
    } else {
        PeakClass::Coinductive
    }
}

impl fmt::Display for CriticalPeak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.namer();
        writeln!(
            f,
            "{} <-{}- {} -{}-> {}",
            self.left_c.show(&n),
            self.r1,
            self.ancestor_c.show(&n),
            self.r2,
            self.right_c.show(&n)
        )
    }
}

/// Subsets of `0..n` of size `k` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Permutations of `items` in lexicographic order of positions.
fn arrangements(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in arrangements(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

fn eq_constraints(pairs: &[(Term, Term)]) -> Vec<Constraint> {
    pairs
        .iter()
        .map(|(a, b)| Constraint::Eq(a.clone(), b.clone()))
        .collect()
}

/// Ancestor, left reduct, right reduct, overlap and unifier of a peak.
type RawPeak = (State, State, State, Vec<(usize, usize)>, Subst);

/// Raw peaks of one rule pair, before deduplication.
fn pair_peaks(r1: &Rule, r2: &Rule) -> Vec<RawPeak> {
    let a = tag_vars(r1, 1);
    let b = tag_vars(r2, 2);
    let h1: Vec<&Atom> = a.heads().collect();
    let h2: Vec<&Atom> = b.heads().collect();
    let mut globals = a.head_vars();
    globals.extend(b.head_vars());
    let guard_eqs = {
        let mut g = a.guard.clone();
        g.extend(b.guard.iter().cloned());
        g
    };
    let Some(guards) = equations(&guard_eqs) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for size in 1..=h1.len().min(h2.len()) {
        for s1 in subsets(h1.len(), size) {
            for s2 in subsets(h2.len(), size) {
                let trivial_overlap = s1.iter().all(|&i| i < a.kept.len()) && s2.iter().all(|&j| j < b.kept.len());
                if trivial_overlap {
                    continue;
                }
                for perm in arrangements(&s2) {
                    let overlap: Vec<(usize, usize)> = s1.iter().copied().zip(perm.iter().copied()).collect();
                    if overlap
                        .iter()
                        .any(|&(i, j)| h1[i].pred != h2[j].pred || h1[i].arity() != h2[j].arity())
                    {
                        continue;
                    }
                    let mut eqs: Vec<(Term, Term)> = overlap
                        .iter()
                        .flat_map(|&(i, j)| h1[i].args.iter().cloned().zip(h2[j].args.iter().cloned()))
                        .collect();
                    eqs.extend(guards.iter().cloned());
                    let Some(mgu) = unify(&eqs) else {
                        continue;
                    };
                    let d = eq_constraints(&eqs);
                    let h2_delta: Vec<Atom> = (0..h2.len())
                        .filter(|j| !perm.contains(j))
                        .map(|j| h2[j].clone())
                        .collect();
                    let h1_delta: Vec<Atom> = (0..h1.len())
                        .filter(|i| !s1.contains(i))
                        .map(|i| h1[i].clone())
                        .collect();

                    let mut anc_user: Vec<Atom> = h1.iter().map(|x| (*x).clone()).collect();
                    anc_user.extend(h2_delta.iter().cloned());
                    let ancestor = State::new(anc_user, d.clone(), globals.clone());

                    let mut left_user = a.kept.clone();
                    left_user.extend(a.user_body.iter().cloned());
                    left_user.extend(h2_delta);
                    let mut left_builtin = d.clone();
                    left_builtin.extend(a.builtin_body.iter().cloned());
                    let left = State::new(left_user, left_builtin, globals.clone());

                    let mut right_user = b.kept.clone();
                    right_user.extend(b.user_body.iter().cloned());
                    right_user.extend(h1_delta);
                    let mut right_builtin = d;
                    right_builtin.extend(b.builtin_body.iter().cloned());
                    let right = State::new(right_user, right_builtin, globals.clone());

                    out.push((ancestor, left, right, overlap, mgu));
                }
            }
        }
    }
    out
}

/// Exchanges the copy tags 1 and 2 of generated variables.
fn swap_tags<T: Substitutable>(x: &T) -> T {
    let pairs: Vec<(Var, Var)> = x
        .vars()
        .into_iter()
        .filter_map(|v| match &v {
            Var::Fresh { base, id } if *id == 1 || *id == 2 => {
                let w = Var::Fresh {
                    base: base.clone(),
                    id: 3 - id,
                };
                Some((v, w))
            }
            _ => None,
        })
        .collect();
    x.apply(&Subst::renaming(pairs))
}

type Triple = (CanonicalState, CanonicalState, CanonicalState);

fn same_triple(x: &Triple, y: &Triple) -> bool {
    canonical_equivalent(&x.0, &y.0) && canonical_equivalent(&x.1, &y.1) && canonical_equivalent(&x.2, &y.2)
}

/// The critical peaks between the rules of `p` (left step) and `q` (right
/// step). When `same` is set the two programs are the same and each
/// unordered rule pair is considered once, in program order.
pub fn critical_peaks_between(p: &Program, q: &Program, same: bool) -> Vec<CriticalPeak> {
    let pairs: Vec<(usize, usize)> = (0..p.rules.len())
        .flat_map(|i| (0..q.rules.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| !same || i <= j)
        .collect();
    let per_pair: Vec<Vec<CriticalPeak>> = pairs
        .par_iter()
        .map(|&(i, j)| peaks_for_pair(&p.rules[i], &q.rules[j], i, j, same && i == j))
        .collect();
    let mut out = Vec::new();
    let mut id = 0;
    for mut group in per_pair {
        for peak in group.iter_mut() {
            if !peak.trivial {
                id += 1;
                peak.id = id;
            }
        }
        out.extend(group);
    }
    out
}

/// Critical peaks of a program with itself.
pub fn critical_peaks(p: &Program) -> Vec<CriticalPeak> {
    critical_peaks_between(p, p, true)
}

fn peaks_for_pair(r1: &Rule, r2: &Rule, i1: usize, i2: usize, self_pair: bool) -> Vec<CriticalPeak> {
    let mut kept: Vec<(Triple, CriticalPeak)> = Vec::new();
    for (ancestor, left, right, overlap, unifier) in pair_peaks(r1, r2) {
        let triple = (canonicalize(&ancestor), canonicalize(&left), canonicalize(&right));
        if kept.iter().any(|(t, _)| same_triple(t, &triple)) {
            continue;
        }
        if self_pair {
            let mirror = (
                canonicalize(&swap_tags(&ancestor)),
                canonicalize(&swap_tags(&right)),
                canonicalize(&swap_tags(&left)),
            );
            if kept.iter().any(|(t, _)| same_triple(t, &mirror)) {
                continue;
            }
        }
        let trivial = canonical_equivalent(&triple.1, &triple.2);
        let peak = CriticalPeak {
            id: 0,
            r1: r1.name.clone(),
            r2: r2.name.clone(),
            i1,
            i2,
            k: 0,
            ancestor,
            left,
            right,
            overlap,
            unifier,
            ancestor_c: triple.0.clone(),
            left_c: triple.1.clone(),
            right_c: triple.2.clone(),
            trivial,
        };
        kept.push((triple, peak));
    }
    let mut k = 0;
    kept.into_iter()
        .map(|(_, mut p)| {
            if !p.trivial {
                k += 1;
                p.k = k;
            }
            p
        })
        .collect()
}

/// Looks up a peak by its `peak:<r1>x<r2>#<k>` selector.
pub fn find_by_selector<'a>(peaks: &'a [CriticalPeak], sel: &str) -> Option<&'a CriticalPeak> {
    peaks.iter().find(|p| !p.trivial && p.selector() == sel)
}

/// Splits a selector into its rule names and rank, trying every `x` as the
/// separator against the known rule names. `None` if no split or more than
/// one split names two rules.
pub fn parse_selector(sel: &str, names: &BTreeSet<String>) -> Option<(String, String, usize)> {
    let body = sel.strip_prefix("peak:")?;
    let (pair, k) = body.rsplit_once('#')?;
    let k: usize = k.parse().ok()?;
    let mut found = pair.match_indices('x').filter_map(|(at, _)| {
        let (a, b) = (&pair[..at], &pair[at + 1..]);
        (names.contains(a) && names.contains(b)).then(|| (a.to_string(), b.to_string(), k))
    });
    let first = found.next()?;
    // Ambiguous selectors are rejected rather than guessed.
    found.next().is_none().then_some(first)
}
