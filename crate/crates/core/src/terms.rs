//! First-order terms over a free (Herbrand) signature, substitutions and
//! syntactic unification with occurs check.
//!
//! Every function symbol, including integer literals and `+`, is a free
//! constructor: `I+1` never evaluates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Interned-ish identifier shared between many terms.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// A logic variable.
///
/// Only `Named` variables come out of the parser. `Fresh` variables are
/// produced when renaming apart and `Local` variables are the canonical
/// names given to the existential variables of a canonical state. Keeping
/// them as separate variants makes collisions with user names impossible.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Var {
    Named(Name),
    Fresh { base: Name, id: u32 },
    Local(u32),
}

impl Var {
    pub fn named(s: &str) -> Var {
        Var::Named(name(s))
    }

    /// The user-facing stem this variable was derived from.
    pub fn base(&self) -> &str {
        match self {
            Var::Named(n) => n,
            Var::Fresh { base, .. } => base,
            Var::Local(_) => "L",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Named(n) => f.write_str(n),
            Var::Fresh { base, id } => write!(f, "_{base}{id}"),
            Var::Local(i) => write!(f, "_L{i}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Var(Var),
    App(Name, Vec<Term>),
}

impl Term {
    pub fn var(s: &str) -> Term {
        Term::Var(Var::named(s))
    }

    pub fn constant(s: &str) -> Term {
        Term::App(name(s), Vec::new())
    }

    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(name(f), args)
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::App(..) => None,
        }
    }

    pub fn occurs(&self, v: &Var) -> bool {
        match self {
            Term::Var(w) => w == v,
            Term::App(_, args) => args.iter().any(|a| a.occurs(v)),
        }
    }

    /// Number of symbol occurrences; a variable counts as one.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, self, &|v: &Var| v.to_string())
    }
}

/// Writes `t` using `var_name` for variables. `+/2` is printed infix and
/// associates to the left.
pub(crate) fn write_term(out: &mut impl fmt::Write, t: &Term, var_name: &dyn Fn(&Var) -> String) -> fmt::Result {
    match t {
        Term::Var(v) => out.write_str(&var_name(v)),
        Term::App(f, args) if &**f == "+" && args.len() == 2 => {
            write_term(out, &args[0], var_name)?;
            out.write_char('+')?;
            if matches!(&args[1], Term::App(g, a) if &**g == "+" && a.len() == 2) {
                out.write_char('(')?;
                write_term(out, &args[1], var_name)?;
                out.write_char(')')
            } else {
                write_term(out, &args[1], var_name)
            }
        }
        Term::App(f, args) => {
            out.write_str(f)?;
            if !args.is_empty() {
                out.write_char('(')?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.write_char(',')?;
                    }
                    write_term(out, a, var_name)?;
                }
                out.write_char(')')?;
            }
            Ok(())
        }
    }
}

/// Anything that carries variables and can be instantiated.
pub trait Substitutable: Sized {
    fn collect_vars(&self, out: &mut BTreeSet<Var>);
    fn apply(&self, s: &Subst) -> Self;

    fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }
}

impl Substitutable for Term {
    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    fn apply(&self, s: &Subst) -> Term {
        if s.is_empty() {
            return self.clone();
        }
        match self {
            Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.apply(s)).collect()),
        }
    }
}

impl<T: Substitutable> Substitutable for Vec<T> {
    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.iter().for_each(|x| x.collect_vars(out));
    }

    fn apply(&self, s: &Subst) -> Self {
        self.iter().map(|x| x.apply(s)).collect()
    }
}

impl<A: Substitutable, B: Substitutable> Substitutable for (A, B) {
    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.0.collect_vars(out);
        self.1.collect_vars(out);
    }

    fn apply(&self, s: &Subst) -> Self {
        (self.0.apply(s), self.1.apply(s))
    }
}

/// An idempotent finite map from variables to terms. No variable is ever
/// bound to itself.
#[derive(Clone, Default, PartialEq, Eq, Hash, Debug)]
pub struct Subst {
    map: BTreeMap<Var, Term>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    /// Builds a substitution from bindings that are already idempotent.
    /// Identity bindings are dropped.
    pub fn from_bindings(bindings: impl IntoIterator<Item = (Var, Term)>) -> Subst {
        let map = bindings.into_iter().filter(|(v, t)| t.as_var() != Some(v)).collect();
        Subst { map }
    }

    /// A variable-for-variable renaming.
    pub fn renaming(pairs: impl IntoIterator<Item = (Var, Var)>) -> Subst {
        Subst::from_bindings(pairs.into_iter().map(|(a, b)| (a, Term::Var(b))))
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.map.keys()
    }

    pub fn restrict(&self, keep: impl Fn(&Var) -> bool) -> Subst {
        Subst {
            map: self
                .map
                .iter()
                .filter(|(v, _)| keep(v))
                .map(|(v, t)| (v.clone(), t.clone()))
                .collect(),
        }
    }

    pub fn is_idempotent(&self) -> bool {
        self.map.values().all(|t| self.map.keys().all(|v| !t.occurs(v)))
    }

    /// Adds `v ↦ t` where `t` is already normalised by `self` and does not
    /// contain `v`; existing bindings are rewritten so the result stays
    /// idempotent.
    fn bind(&mut self, v: Var, t: Term) {
        let single = Subst {
            map: BTreeMap::from([(v.clone(), t.clone())]),
        };
        for val in self.map.values_mut() {
            if val.occurs(&v) {
                *val = val.apply(&single);
            }
        }
        self.map.insert(v, t);
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}↦{t}")?;
        }
        f.write_str("}")
    }
}

/// Most general unifier of all `pairs`, or `None` on clash or occurs-check
/// failure.
pub fn unify(pairs: &[(Term, Term)]) -> Option<Subst> {
    unify_restricted(pairs, |_| true)
}

/// Unification where only variables accepted by `bindable` may be bound.
/// Any other variable behaves like a constant. With `bindable` selecting
/// the variables of one side only this is one-way matching.
pub fn unify_restricted(pairs: &[(Term, Term)], bindable: impl Fn(&Var) -> bool) -> Option<Subst> {
    let mut subst = Subst::new();
    let mut work: Vec<(Term, Term)> = pairs.iter().rev().cloned().collect();
    while let Some((s, t)) = work.pop() {
        let s = s.apply(&subst);
        let t = t.apply(&subst);
        if s == t {
            continue;
        }
        match (s, t) {
            (Term::Var(x), t) if bindable(&x) => {
                if t.occurs(&x) {
                    return None;
                }
                subst.bind(x, t);
            }
            (s, Term::Var(y)) if bindable(&y) => {
                if s.occurs(&y) {
                    return None;
                }
                subst.bind(y, s);
            }
            (Term::App(f, xs), Term::App(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return None;
                }
                work.extend(xs.into_iter().zip(ys).rev());
            }
            _ => return None,
        }
    }
    Some(subst)
}

/// One-way matching: finds `θ` binding only `bindable` variables with
/// `pattern·θ = target` for every pair.
pub fn match_terms(pairs: &[(Term, Term)], bindable: impl Fn(&Var) -> bool) -> Option<Subst> {
    let theta = unify_restricted(pairs, &bindable)?;
    // A bindable variable may also occur in a target; reject anything that
    // changed the right-hand sides.
    pairs.iter().all(|(_, t)| t.apply(&theta) == *t).then_some(theta)
}

/// Allocates variables that are guaranteed not to clash with a given set.
#[derive(Debug, Default)]
pub struct Renamer {
    next: u32,
}

impl Renamer {
    pub fn new() -> Renamer {
        Renamer::default()
    }

    pub fn fresh(&mut self, base: &str, avoid: &BTreeSet<Var>) -> Var {
        loop {
            let v = Var::Fresh {
                base: name(base),
                id: self.next,
            };
            self.next += 1;
            if !avoid.contains(&v) {
                return v;
            }
        }
    }
}

/// Replaces every variable of `value` injectively by a fresh variable not
/// in `in_use`. The result is an alpha-variant of `value`.
pub fn rename_apart<T: Substitutable>(in_use: &BTreeSet<Var>, value: &T) -> (T, Subst) {
    let mut renamer = Renamer::new();
    let mut avoid = in_use.clone();
    let own = value.vars();
    avoid.extend(own.iter().cloned());
    let mut pairs = Vec::with_capacity(own.len());
    for v in own {
        let w = renamer.fresh(v.base(), &avoid);
        avoid.insert(w.clone());
        pairs.push((v, w));
    }
    let s = Subst::renaming(pairs);
    (value.apply(&s), s)
}

/// Renames every variable `X` of `value` to `Fresh { base: X, id: tag }`.
/// Used to build the two disjoint copies of a rule pair. Variables that
/// are not user-named get a stem distinct from every user name so the
/// renaming stays injective.
pub fn tag_vars<T: Substitutable>(value: &T, tag: u32) -> T {
    let vars = value.vars();
    let mut used: BTreeSet<String> = vars
        .iter()
        .filter_map(|v| match v {
            Var::Named(n) => Some(n.to_string()),
            _ => None,
        })
        .collect();
    let mut pairs = Vec::with_capacity(vars.len());
    for v in vars {
        let base = match &v {
            Var::Named(n) => n.to_string(),
            other => {
                let stem = match other.base() {
                    "_" => "A",
                    b => b,
                };
                let mut k = 0;
                loop {
                    let cand = format!("{stem}{k}");
                    if used.insert(cand.clone()) {
                        break cand;
                    }
                    k += 1;
                }
            }
        };
        pairs.push((
            v,
            Var::Fresh {
                base: name(&base),
                id: tag,
            },
        ));
    }
    value.apply(&Subst::renaming(pairs))
}
