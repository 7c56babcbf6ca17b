//! CHR states `⟨C; E; x̄⟩`, their structural equivalence and the quantified
//! conjunction `⊕`.
//!
//! Equivalence is decided by canonicalisation: the built-in store is solved
//! by unification, the solved form is pushed into the user store, bindings
//! of dead or local variables are projected away, and the remaining local
//! variables are renamed to `Local(0)`, `Local(1)`, … in a canonical order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::syntax::{equations, Atom, Constraint, VarNamer};
use crate::terms::{unify, Renamer, Subst, Substitutable, Term, Var};

/// Upper bound on the atom orderings tried when local variables make the
/// sorted store ambiguous. Beyond it the form is marked inexact and
/// equivalence falls back to a bijection search.
const MAX_ORDERINGS: usize = 720;

/// Residual bindings and user store under one renaming of the locals.
type Renamed = (Vec<(Var, Term)>, Vec<Atom>);

#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct State {
    pub user: Vec<Atom>,
    pub builtin: Vec<Constraint>,
    pub globals: BTreeSet<Var>,
}

impl State {
    pub fn new(user: Vec<Atom>, builtin: Vec<Constraint>, globals: BTreeSet<Var>) -> State {
        State { user, builtin, globals }
    }

    pub fn inconsistent() -> State {
        State::new(Vec::new(), vec![Constraint::False], BTreeSet::new())
    }

    /// Variables of the stores; globals that do not occur are not included.
    pub fn store_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.user.collect_vars(&mut out);
        self.builtin.collect_vars(&mut out);
        out
    }

    pub fn locals(&self) -> BTreeSet<Var> {
        self.store_vars()
            .into_iter()
            .filter(|v| !self.globals.contains(v))
            .collect()
    }
}

impl Substitutable for State {
    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.user.collect_vars(out);
        self.builtin.collect_vars(out);
        out.extend(self.globals.iter().cloned());
    }

    /// Instantiates both stores. A global mapped to a term is replaced by
    /// the variables of that term.
    fn apply(&self, s: &Subst) -> State {
        let mut globals = BTreeSet::new();
        for g in &self.globals {
            match s.get(g) {
                Some(t) => t.collect_vars(&mut globals),
                None => {
                    globals.insert(g.clone());
                }
            }
        }
        State {
            user: self.user.apply(s),
            builtin: self.builtin.apply(s),
            globals,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::syntax::pretty_state(self))
    }
}

/// Normal form of a consistent state.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct CanonicalStore {
    /// User store with the solved built-in store applied, sorted.
    pub user: Vec<Atom>,
    /// Bindings `g = t` for global variables `g`, sorted by `g`.
    pub residual: Vec<(Var, Term)>,
    /// Global variables that still occur.
    pub globals: BTreeSet<Var>,
    /// False when the local renaming was chosen heuristically.
    pub exact: bool,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum CanonicalState {
    Inconsistent,
    Consistent(CanonicalStore),
}

impl CanonicalState {
    pub fn is_inconsistent(&self) -> bool {
        matches!(self, CanonicalState::Inconsistent)
    }

    pub fn store(&self) -> Option<&CanonicalStore> {
        match self {
            CanonicalState::Consistent(c) => Some(c),
            CanonicalState::Inconsistent => None,
        }
    }

    pub fn user(&self) -> &[Atom] {
        self.store().map(|c| c.user.as_slice()).unwrap_or(&[])
    }

    pub fn globals(&self) -> BTreeSet<Var> {
        self.store().map(|c| c.globals.clone()).unwrap_or_default()
    }

    /// The residual built-in store as a substitution on global variables.
    pub fn residual_subst(&self) -> Subst {
        match self {
            CanonicalState::Consistent(c) => Subst::from_bindings(c.residual.iter().cloned()),
            CanonicalState::Inconsistent => Subst::new(),
        }
    }

    pub fn to_state(&self) -> State {
        match self {
            CanonicalState::Inconsistent => State::inconsistent(),
            CanonicalState::Consistent(c) => State {
                user: c.user.clone(),
                builtin: c
                    .residual
                    .iter()
                    .map(|(v, t)| Constraint::Eq(Term::Var(v.clone()), t.clone()))
                    .collect(),
                globals: c.globals.clone(),
            },
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.to_state().vars()
    }

    /// Hash key that ignores the names of local variables. Equivalent
    /// states always share it.
    pub fn shape(&self) -> CanonicalState {
        match self {
            CanonicalState::Inconsistent => CanonicalState::Inconsistent,
            CanonicalState::Consistent(c) => {
                let hole = |t: &Term| abstract_term(t, &|v| matches!(v, Var::Local(_)));
                let mut user: Vec<Atom> = c
                    .user
                    .iter()
                    .map(|a| Atom {
                        pred: a.pred.clone(),
                        args: a.args.iter().map(hole).collect(),
                    })
                    .collect();
                user.sort();
                CanonicalState::Consistent(CanonicalStore {
                    user,
                    residual: c.residual.iter().map(|(v, t)| (v.clone(), hole(t))).collect(),
                    globals: c.globals.clone(),
                    exact: c.exact,
                })
            }
        }
    }

    /// Display with the given namer (shared names across several states).
    pub fn show(&self, namer: &VarNamer) -> String {
        namer.state(&self.to_state())
    }
}

impl fmt::Display for CanonicalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_state().fmt(f)
    }
}

const HOLE: Var = Var::Local(u32::MAX);

fn abstract_term(t: &Term, is_local: &dyn Fn(&Var) -> bool) -> Term {
    match t {
        Term::Var(v) if is_local(v) => Term::Var(HOLE),
        Term::Var(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| abstract_term(a, is_local)).collect()),
    }
}

fn abstract_atom(a: &Atom, is_local: &dyn Fn(&Var) -> bool) -> Atom {
    Atom {
        pred: a.pred.clone(),
        args: a.args.iter().map(|t| abstract_term(t, is_local)).collect(),
    }
}

/// Solves the built-in store and reorients variable-variable bindings so
/// that a class of aliased variables is represented by its least global
/// member when it has one.
fn solved_form(eqs: &[(Term, Term)], globals: &BTreeSet<Var>) -> Option<Subst> {
    let sigma = unify(eqs)?;
    let mut classes: BTreeMap<Var, Vec<Var>> = BTreeMap::new();
    for (v, t) in sigma.iter() {
        if let Term::Var(w) = t {
            classes.entry(w.clone()).or_default().push(v.clone());
        }
    }
    let mut rho = Vec::new();
    for (w, members) in &classes {
        let best = members
            .iter()
            .chain(std::iter::once(w))
            .filter(|v| globals.contains(*v))
            .min();
        if let Some(rep) = best {
            if rep != w {
                rho.push((w.clone(), rep.clone()));
            }
        }
    }
    if rho.is_empty() {
        return Some(sigma);
    }
    let rho = Subst::renaming(rho);
    let mut bindings: Vec<(Var, Term)> = sigma.iter().map(|(v, t)| (v.clone(), t.apply(&rho))).collect();
    bindings.extend(rho.iter().map(|(v, t)| (v.clone(), t.clone())));
    Some(Subst::from_bindings(bindings))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn number_locals(
    residual: &[(Var, Term)],
    user: &[Atom],
    order: &[usize],
    locals: &BTreeSet<Var>,
) -> (Vec<(Var, Term)>, Vec<Atom>) {
    let mut map: BTreeMap<Var, Var> = BTreeMap::new();
    fn visit(t: &Term, locals: &BTreeSet<Var>, map: &mut BTreeMap<Var, Var>) {
        match t {
            Term::Var(v) => {
                if locals.contains(v) && !map.contains_key(v) {
                    let n = map.len() as u32;
                    map.insert(v.clone(), Var::Local(n));
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| visit(a, locals, map)),
        }
    }
    for (_, t) in residual {
        visit(t, locals, &mut map);
    }
    for &i in order {
        user[i].args.iter().for_each(|t| visit(t, locals, &mut map));
    }
    let s = Subst::renaming(map);
    let residual = residual.iter().map(|(v, t)| (v.clone(), t.apply(&s))).collect();
    let mut user: Vec<Atom> = user.iter().map(|a| a.apply(&s)).collect();
    user.sort();
    (residual, user)
}

/// Normal form of `s` modulo state equivalence.
pub fn canonicalize(s: &State) -> CanonicalState {
    let Some(eqs) = equations(&s.builtin) else {
        return CanonicalState::Inconsistent;
    };
    let Some(tau) = solved_form(&eqs, &s.globals) else {
        return CanonicalState::Inconsistent;
    };
    let user: Vec<Atom> = s.user.apply(&tau);
    let residual: Vec<(Var, Term)> = s
        .globals
        .iter()
        .filter_map(|g| tau.get(g).map(|t| (g.clone(), t.clone())))
        .collect();

    let mut live = BTreeSet::new();
    user.collect_vars(&mut live);
    for (g, t) in &residual {
        live.insert(g.clone());
        t.collect_vars(&mut live);
    }
    let globals: BTreeSet<Var> = s.globals.intersection(&live).cloned().collect();
    let locals: BTreeSet<Var> = live.difference(&globals).cloned().collect();

    if locals.is_empty() {
        let mut user = user;
        user.sort();
        return CanonicalState::Consistent(CanonicalStore {
            user,
            residual,
            globals,
            exact: true,
        });
    }

    let is_local = |v: &Var| locals.contains(v);
    let mut keyed: Vec<(Atom, usize)> = user
        .iter()
        .enumerate()
        .map(|(i, a)| (abstract_atom(a, &is_local), i))
        .collect();
    keyed.sort_by(|x, y| x.0.cmp(&y.0).then_with(|| user[x.1].cmp(&user[y.1])));
    let base: Vec<usize> = keyed.iter().map(|(_, i)| *i).collect();

    // Runs of atoms that look the same once locals are hidden.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=keyed.len() {
        if i == keyed.len() || keyed[i].0 != keyed[start].0 {
            let has_local = user[keyed[start].1].vars().iter().any(&is_local);
            if i - start > 1 && has_local {
                groups.push((start, i));
            }
            start = i;
        }
    }
    let mut total: usize = 1;
    let mut exact = true;
    for &(a, b) in &groups {
        total = total.saturating_mul((1..=(b - a)).product());
        if total > MAX_ORDERINGS {
            exact = false;
            break;
        }
    }

    let (residual, user) = if exact && !groups.is_empty() {
        let perms: Vec<Vec<Vec<usize>>> = groups.iter().map(|&(a, b)| permutations(b - a)).collect();
        let mut best: Option<Renamed> = None;
        let mut choice = vec![0usize; groups.len()];
        loop {
            let mut order = base.clone();
            for (g, &(a, _)) in groups.iter().enumerate() {
                for (k, &p) in perms[g][choice[g]].iter().enumerate() {
                    order[a + k] = base[a + p];
                }
            }
            let cand = number_locals(&residual, &user, &order, &locals);
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
            // Odometer over the per-group permutations.
            let mut g = 0;
            loop {
                if g == groups.len() {
                    break;
                }
                choice[g] += 1;
                if choice[g] < perms[g].len() {
                    break;
                }
                choice[g] = 0;
                g += 1;
            }
            if g == groups.len() {
                break;
            }
        }
        best.expect("at least one ordering")
    } else {
        number_locals(&residual, &user, &base, &locals)
    };

    CanonicalState::Consistent(CanonicalStore {
        user,
        residual,
        globals,
        exact,
    })
}

/// Decides equivalence of two canonical forms.
pub fn canonical_equivalent(a: &CanonicalState, b: &CanonicalState) -> bool {
    match (a, b) {
        (CanonicalState::Inconsistent, CanonicalState::Inconsistent) => true,
        (CanonicalState::Consistent(x), CanonicalState::Consistent(y)) => {
            if x == y {
                true
            } else if x.exact && y.exact {
                false
            } else {
                bijection_match(x, y)
            }
        }
        _ => false,
    }
}

/// State equivalence.
pub fn equivalent(s1: &State, s2: &State) -> bool {
    canonical_equivalent(&canonicalize(s1), &canonicalize(s2))
}

/// Backtracking search for a bijection between the local variables of two
/// stores (plus a permutation of atoms) that makes them identical.
fn bijection_match(x: &CanonicalStore, y: &CanonicalStore) -> bool {
    if x.globals != y.globals || x.user.len() != y.user.len() || x.residual.len() != y.residual.len() {
        return false;
    }
    let mut map = BTreeMap::new();
    let mut back = BTreeMap::new();
    for ((g1, t1), (g2, t2)) in x.residual.iter().zip(&y.residual) {
        if g1 != g2 || !match_local(t1, t2, &mut map, &mut back) {
            return false;
        }
    }
    let mut used = vec![false; y.user.len()];
    assign_atoms(&x.user, &y.user, 0, &mut used, &mut map, &mut back)
}

fn assign_atoms(
    xs: &[Atom],
    ys: &[Atom],
    i: usize,
    used: &mut [bool],
    map: &mut BTreeMap<Var, Var>,
    back: &mut BTreeMap<Var, Var>,
) -> bool {
    if i == xs.len() {
        return true;
    }
    for j in 0..ys.len() {
        if used[j] || xs[i].pred != ys[j].pred || xs[i].args.len() != ys[j].args.len() {
            continue;
        }
        let (m0, b0) = (map.clone(), back.clone());
        let ok = xs[i]
            .args
            .iter()
            .zip(&ys[j].args)
            .all(|(s, t)| match_local(s, t, map, back));
        if ok {
            used[j] = true;
            if assign_atoms(xs, ys, i + 1, used, map, back) {
                return true;
            }
            used[j] = false;
        }
        *map = m0;
        *back = b0;
    }
    false
}

fn match_local(s: &Term, t: &Term, map: &mut BTreeMap<Var, Var>, back: &mut BTreeMap<Var, Var>) -> bool {
    match (s, t) {
        (Term::Var(a @ Var::Local(_)), Term::Var(b @ Var::Local(_))) => match (map.get(a), back.get(b)) {
            (Some(x), Some(y)) => x == b && y == a,
            (None, None) => {
                map.insert(a.clone(), b.clone());
                back.insert(b.clone(), a.clone());
                true
            }
            _ => false,
        },
        (Term::Var(a), Term::Var(b)) => a == b && !matches!(a, Var::Local(_)),
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(a, b)| match_local(a, b, map, back))
        }
        _ => false,
    }
}

/// Lookup table of canonical states up to equivalence. Exact forms are
/// hashed directly; inexact ones are bucketed by shape and compared with
/// the bijection search.
#[derive(Clone, Debug, Default)]
pub struct StateIndex {
    exact: HashMap<CanonicalState, usize>,
    fuzzy: HashMap<CanonicalState, Vec<(CanonicalState, usize)>>,
}

impl StateIndex {
    pub fn new() -> StateIndex {
        StateIndex::default()
    }

    pub fn get(&self, c: &CanonicalState) -> Option<usize> {
        match c {
            CanonicalState::Consistent(store) if !store.exact => self
                .fuzzy
                .get(&c.shape())?
                .iter()
                .find(|(d, _)| canonical_equivalent(c, d))
                .map(|(_, id)| *id),
            _ => self.exact.get(c).copied(),
        }
    }

    /// Registers `c` with `id` unless an equivalent state is present, in
    /// which case the existing id is returned.
    pub fn insert(&mut self, c: &CanonicalState, id: usize) -> Result<(), usize> {
        if let Some(old) = self.get(c) {
            return Err(old);
        }
        match c {
            CanonicalState::Consistent(store) if !store.exact => {
                self.fuzzy.entry(c.shape()).or_default().push((c.clone(), id));
            }
            _ => {
                self.exact.insert(c.clone(), id);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.fuzzy.values().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("quantified conjunction precondition violated: shared variables {shared:?} are not global in both states")]
pub struct ContractError {
    pub shared: Vec<String>,
}

/// Quantified conjunction `s1 ⊕_z̄ s2`: union of both stores with global
/// variables `(x̄ ∪ ȳ) \ z̄`. Variables shared by the two states must be
/// global in both; rename locals apart first with [`rename_locals_apart`].
pub fn compose(s1: &State, s2: &State, quantified: &BTreeSet<Var>) -> Result<State, ContractError> {
    let v1 = s1.store_vars();
    let v2 = s2.store_vars();
    let bad: Vec<String> = v1
        .intersection(&v2)
        .filter(|v| !(s1.globals.contains(v) && s2.globals.contains(v)))
        .map(|v| v.to_string())
        .collect();
    if !bad.is_empty() {
        return Err(ContractError { shared: bad });
    }
    let mut user = s1.user.clone();
    user.extend(s2.user.iter().cloned());
    let mut builtin = s1.builtin.clone();
    builtin.extend(s2.builtin.iter().cloned());
    let globals = s1
        .globals
        .union(&s2.globals)
        .filter(|v| !quantified.contains(*v))
        .cloned()
        .collect();
    Ok(State::new(user, builtin, globals))
}

/// Renames the local variables of `s` to fresh variables outside `avoid`.
pub fn rename_locals_apart(s: &State, avoid: &BTreeSet<Var>) -> State {
    let mut avoid = avoid.clone();
    avoid.extend(s.vars());
    let mut renamer = Renamer::new();
    let pairs: Vec<(Var, Var)> = s
        .locals()
        .into_iter()
        .map(|v| {
            let w = renamer.fresh(v.base(), &avoid);
            avoid.insert(w.clone());
            (v, w)
        })
        .collect();
    s.apply(&Subst::renaming(pairs))
}
