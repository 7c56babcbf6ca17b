//! Inductive/coinductive partitions, preorders on rule names and the
//! termination measure for the inductive part.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::syntax::{Atom, Program, Rule};
use crate::terms::{Name, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{0}` is both inductive and coinductive")]
    Overlap(String),
    #[error("`{0} > {1}` contradicts the declared order")]
    Contradiction(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    pub inductive: BTreeSet<Name>,
    pub coinductive: BTreeSet<Name>,
}

impl Partition {
    pub fn all_inductive(p: &Program) -> Partition {
        Partition {
            inductive: p.names().into_iter().collect(),
            coinductive: BTreeSet::new(),
        }
    }

    pub fn all_coinductive(p: &Program) -> Partition {
        Partition {
            inductive: BTreeSet::new(),
            coinductive: p.names().into_iter().collect(),
        }
    }

    /// Builds a partition from the declared parts; rules mentioned in
    /// neither part go to the inductive side unless only the inductive
    /// part was declared.
    pub fn declared(
        p: &Program,
        inductive: Option<&[String]>,
        coinductive: Option<&[String]>,
    ) -> Result<Partition, OrderError> {
        let lookup = |names: &[String]| -> Result<BTreeSet<Name>, OrderError> {
            names
                .iter()
                .map(|n| {
                    p.rule(n)
                        .map(|r| r.name.clone())
                        .ok_or_else(|| OrderError::UnknownRule(n.clone()))
                })
                .collect()
        };
        let all: BTreeSet<Name> = p.names().into_iter().collect();
        let (inductive, coinductive) = match (inductive, coinductive) {
            (None, None) => (all, BTreeSet::new()),
            (Some(i), None) => {
                let i = lookup(i)?;
                let c = all.difference(&i).cloned().collect();
                (i, c)
            }
            (None, Some(c)) => {
                let c = lookup(c)?;
                let i = all.difference(&c).cloned().collect();
                (i, c)
            }
            (Some(i), Some(c)) => {
                let i = lookup(i)?;
                let c = lookup(c)?;
                if let Some(both) = i.intersection(&c).next() {
                    return Err(OrderError::Overlap(both.to_string()));
                }
                // Undeclared rules default to inductive.
                let rest: BTreeSet<Name> = all.difference(&c).cloned().collect();
                (rest, c)
            }
        };
        Ok(Partition { inductive, coinductive })
    }

    pub fn is_inductive(&self, rule: &str) -> bool {
        self.inductive.iter().any(|n| &**n == rule)
    }
}

/// A preorder on the rules of a program, stored as its reflexive-transitive
/// closure over program indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RulePreorder {
    names: Vec<Name>,
    ge: Vec<Vec<bool>>,
}

impl RulePreorder {
    fn identity(names: Vec<Name>) -> RulePreorder {
        let n = names.len();
        let ge = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
        RulePreorder { names, ge }
    }

    /// Only the reflexive pairs.
    pub fn discrete(p: &Program) -> RulePreorder {
        RulePreorder::identity(p.names())
    }

    /// Every rule equivalent to every other.
    pub fn total(p: &Program) -> RulePreorder {
        let n = p.rules.len();
        RulePreorder {
            names: p.names(),
            ge: vec![vec![true; n]; n],
        }
    }

    /// Two equivalence classes with the coinductive rules strictly above
    /// the inductive ones; the most permissive admissible two-level order.
    pub fn from_partition(p: &Program, part: &Partition) -> RulePreorder {
        let names = p.names();
        let co: Vec<bool> = names.iter().map(|n| part.coinductive.contains(n)).collect();
        let ge = (0..names.len())
            .map(|i| (0..names.len()).map(|j| co[i] || !co[j]).collect())
            .collect();
        RulePreorder { names, ge }
    }

    /// Closure of declared pairs `(a, b, strict)` meaning `a ≻ b` when
    /// strict and `a ≽ b` otherwise.
    pub fn from_pairs(p: &Program, pairs: &[(String, String, bool)]) -> Result<RulePreorder, OrderError> {
        let mut o = RulePreorder::identity(p.names());
        let idx = |n: &str| p.index_of(n).ok_or_else(|| OrderError::UnknownRule(n.to_string()));
        let mut resolved = Vec::new();
        for (a, b, strict) in pairs {
            let (i, j) = (idx(a)?, idx(b)?);
            o.ge[i][j] = true;
            resolved.push((i, j, *strict));
        }
        o.close();
        for (i, j, strict) in resolved {
            if strict && o.ge[j][i] {
                return Err(OrderError::Contradiction(
                    o.names[i].to_string(),
                    o.names[j].to_string(),
                ));
            }
        }
        Ok(o)
    }

    fn close(&mut self) {
        let n = self.names.len();
        for k in 0..n {
            for i in 0..n {
                if self.ge[i][k] {
                    for j in 0..n {
                        if self.ge[k][j] {
                            self.ge[i][j] = true;
                        }
                    }
                }
            }
        }
    }

    pub fn names(&self) -> &[Name] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ge(&self, a: usize, b: usize) -> bool {
        self.ge[a][b]
    }

    pub fn gt(&self, a: usize, b: usize) -> bool {
        self.ge[a][b] && !self.ge[b][a]
    }

    fn index(&self, n: &str) -> Option<usize> {
        self.names.iter().position(|m| &**m == n)
    }

    pub fn gt_names(&self, a: &str, b: &str) -> bool {
        matches!((self.index(a), self.index(b)), (Some(i), Some(j)) if self.gt(i, j))
    }

    pub fn ge_names(&self, a: &str, b: &str) -> bool {
        matches!((self.index(a), self.index(b)), (Some(i), Some(j)) if self.ge(i, j))
    }

    /// `{γ | ∃δ ∈ ks. δ ≻ γ}`
    pub fn down_strict(&self, ks: &[usize]) -> Vec<bool> {
        (0..self.len()).map(|g| ks.iter().any(|&d| self.gt(d, g))).collect()
    }

    /// `{γ | ∃δ ∈ ks. δ ≽ γ}`
    pub fn down_eq(&self, ks: &[usize]) -> Vec<bool> {
        (0..self.len()).map(|g| ks.iter().any(|&d| self.ge(d, g))).collect()
    }

    /// The strict part is acyclic; always true for a closed preorder but
    /// kept as an explicit check.
    pub fn is_wellfounded(&self) -> bool {
        let n = self.len();
        let mut done = vec![false; n];
        for _ in 0..n {
            // Remove one element with no strict predecessor left.
            let Some(m) = (0..n).find(|&i| !done[i] && (0..n).all(|j| done[j] || !self.gt(i, j))) else {
                return false;
            };
            done[m] = true;
        }
        true
    }

    /// Non-reflexive pairs of the closure as `a>b` or `a>=b` for
    /// equivalent rules, in program order.
    pub fn pairs(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i != j && self.ge[i][j] {
                    let op = if self.gt(i, j) { ">" } else { ">=" };
                    out.push(format!("{}{}{}", self.names[i], op, self.names[j]));
                }
            }
        }
        out
    }
}

impl fmt::Display for RulePreorder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pairs().join(", "))
    }
}

/// `Ok` iff every coinductive rule is strictly above every inductive one;
/// otherwise the first violating `(coinductive, inductive)` pair.
pub fn is_admissible(o: &RulePreorder, part: &Partition) -> Result<(), (Name, Name)> {
    for rc in o.names() {
        if !part.coinductive.contains(rc) {
            continue;
        }
        for ri in o.names() {
            if part.inductive.contains(ri) && !o.gt_names(rc, ri) {
                return Err((rc.clone(), ri.clone()));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Termination {
    Verified,
    Assumed,
    Refuted(Name),
}

/// Whether one application of `r` strictly decreases the user store in
/// the lexicographic order on (number of atoms, total term size) for every
/// instance.
pub fn rule_decreases(r: &Rule) -> bool {
    rule_decreases_with(r, &|_| 1)
}

/// As [`rule_decreases`], counting each atom with the weight of its
/// predicate instead of 1.
pub fn rule_decreases_with(r: &Rule, weight: &dyn Fn(&str) -> usize) -> bool {
    let count = |atoms: &[Atom]| atoms.iter().map(|a| weight(&a.pred)).sum::<usize>();
    let (head, body) = (count(&r.removed), count(&r.user_body));
    if body < head {
        return true;
    }
    if body > head {
        return false;
    }
    // Equal count: the size must drop whatever the variables are
    // instantiated to, so no variable may occur more often in the body.
    let mut head_occ = BTreeMap::new();
    let mut body_occ = BTreeMap::new();
    count_atoms(&r.removed, &mut head_occ);
    count_atoms(&r.user_body, &mut body_occ);
    let more = body_occ.iter().any(|(v, n)| head_occ.get(v).copied().unwrap_or(0) < *n);
    !more && atoms_size(&r.removed) > atoms_size(&r.user_body)
}

fn atoms_size(atoms: &[Atom]) -> usize {
    atoms.iter().map(Atom::size).sum()
}

fn count_atoms(atoms: &[Atom], occ: &mut BTreeMap<Var, usize>) {
    fn go(t: &Term, occ: &mut BTreeMap<Var, usize>) {
        match t {
            Term::Var(v) => *occ.entry(v.clone()).or_default() += 1,
            Term::App(_, args) => args.iter().for_each(|a| go(a, occ)),
        }
    }
    for a in atoms {
        a.args.iter().for_each(|t| go(t, occ));
    }
}

/// Largest predicate weight tried by [`check_termination`].
const MAX_WEIGHT: usize = 3;
/// Weight assignments beyond this many are not searched.
const MAX_WEIGHTINGS: usize = 1 << 16;

/// Termination of the sub-program made of `rules`: some assignment of
/// weights in `0..=MAX_WEIGHT` to predicates must make every rule decrease.
/// Unit weights are tried first; when nothing works the first rule (in
/// program order) failing under unit weights is the witness.
pub fn check_termination(p: &Program, rules: &BTreeSet<Name>) -> Termination {
    let rs: Vec<&Rule> = p.rules.iter().filter(|r| rules.contains(&r.name)).collect();
    let Some(witness) = rs.iter().find(|r| !rule_decreases(r)) else {
        return Termination::Verified;
    };
    let preds: Vec<Name> = rs
        .iter()
        .flat_map(|r| r.removed.iter().chain(&r.user_body))
        .map(|a| a.pred.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let base = MAX_WEIGHT + 1;
    let total = base.checked_pow(preds.len() as u32).filter(|&t| t <= MAX_WEIGHTINGS);
    for code in 0..total.unwrap_or(0) {
        let w: Vec<usize> = (0..preds.len()).map(|i| code / base.pow(i as u32) % base).collect();
        let weight = |pred: &str| preds.iter().position(|q| &**q == pred).map_or(1, |i| w[i]);
        if rs.iter().all(|r| rule_decreases_with(r, &weight)) {
            return Termination::Verified;
        }
    }
    Termination::Refuted(witness.name.clone())
}

/// All preorders on `n` elements as closure matrices, built by inserting
/// one element at a time.
pub fn all_preorders(n: usize) -> Vec<Vec<Vec<bool>>> {
    let mut acc: Vec<Vec<Vec<bool>>> = vec![Vec::new()];
    for k in 0..n {
        let mut next = Vec::new();
        for m in &acc {
            // Each existing element relates to k as none, below, above or equal.
            for choice in 0..4usize.pow(k as u32) {
                let mut g = vec![vec![false; k + 1]; k + 1];
                for (row, src) in g.iter_mut().zip(m) {
                    row[..k].copy_from_slice(&src[..k]);
                }
                g[k][k] = true;
                let mut c = choice;
                let (rows, last) = g.split_at_mut(k);
                for (i, row) in rows.iter_mut().enumerate() {
                    let rel = c % 4;
                    c /= 4;
                    last[0][i] = rel & 1 != 0;
                    row[k] = rel & 2 != 0;
                }
                if is_transitive(&g) {
                    next.push(g);
                }
            }
        }
        acc = next;
    }
    acc
}

fn is_transitive(g: &[Vec<bool>]) -> bool {
    let n = g.len();
    (0..n).all(|i| (0..n).all(|j| !g[i][j] || (0..n).all(|k| !g[j][k] || g[i][k])))
}

/// Number of admissible orders for a partition: preorders on each part.
pub fn count_admissible(part: &Partition) -> usize {
    preorder_count(part.inductive.len()).saturating_mul(preorder_count(part.coinductive.len()))
}

fn preorder_count(n: usize) -> usize {
    [1, 1, 4, 29, 355, 6942, 209527].get(n).copied().unwrap_or(usize::MAX)
}

/// Every admissible preorder for `part`: an arbitrary preorder on each
/// part with all coinductive rules above all inductive ones.
pub fn enumerate_admissible(p: &Program, part: &Partition) -> Vec<RulePreorder> {
    let names = p.names();
    let ind: Vec<usize> = (0..names.len())
        .filter(|&i| part.inductive.contains(&names[i]))
        .collect();
    let co: Vec<usize> = (0..names.len())
        .filter(|&i| part.coinductive.contains(&names[i]))
        .collect();
    let pi = all_preorders(ind.len());
    let pc = all_preorders(co.len());
    let mut out = Vec::with_capacity(pi.len() * pc.len());
    for gc in &pc {
        for gi in &pi {
            let n = names.len();
            let mut ge = vec![vec![false; n]; n];
            for (a, &x) in ind.iter().enumerate() {
                for (b, &y) in ind.iter().enumerate() {
                    ge[x][y] = gi[a][b];
                }
            }
            for (a, &x) in co.iter().enumerate() {
                for (b, &y) in co.iter().enumerate() {
                    ge[x][y] = gc[a][b];
                }
                for &y in &ind {
                    ge[x][y] = true;
                }
            }
            out.push(RulePreorder {
                names: names.clone(),
                ge,
            });
        }
    }
    out
}
