//! Abstract syntax of CHR programs plus the concrete text format.
//!
//! ```text
//! antisymmetry @ leq(X,Y), leq(Y,X) <=> X = Y.
//! transitivity @ leq(X,Y), leq(Y,Z) ==> leq(X,Z).
//! duplicate    @ leq(X,Y) \ leq(X,Y) <=> true.
//! ```

mod parser;
mod pretty;

use std::collections::BTreeSet;
use std::fmt;

use crate::terms::{Name, Subst, Substitutable, Term, Var};

pub use parser::{parse_program, parse_state, ParseError, ParseErrorKind};
pub use pretty::{pretty_program, pretty_rule, pretty_state, VarNamer};

/// A user-defined constraint `p(t1, …, tn)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Atom {
    pub pred: Name,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Atom {
        Atom {
            pred: crate::terms::name(pred),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn size(&self) -> usize {
        1 + self.args.iter().map(Term::size).sum::<usize>()
    }

    /// The atom viewed as a term, handy for unification.
    pub fn to_term(&self) -> Term {
        Term::App(self.pred.clone(), self.args.clone())
    }
}

impl Substitutable for Atom {
    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.args.collect_vars(out);
    }

    fn apply(&self, s: &Subst) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.apply(s),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_term().fmt(f)
    }
}

/// A built-in constraint of the Herbrand theory.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Constraint {
    Eq(Term, Term),
    False,
}

impl Substitutable for Constraint {
    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        if let Constraint::Eq(a, b) = self {
            a.collect_vars(out);
            b.collect_vars(out);
        }
    }

    fn apply(&self, s: &Subst) -> Constraint {
        match self {
            Constraint::Eq(a, b) => Constraint::Eq(a.apply(s), b.apply(s)),
            Constraint::False => Constraint::False,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Eq(a, b) => write!(f, "{a} = {b}"),
            Constraint::False => f.write_str("false"),
        }
    }
}

/// Splits a conjunction of constraints into equations, or `None` if it
/// contains `false`.
pub fn equations(cs: &[Constraint]) -> Option<Vec<(Term, Term)>> {
    cs.iter()
        .map(|c| match c {
            Constraint::Eq(a, b) => Some((a.clone(), b.clone())),
            Constraint::False => None,
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RuleKind {
    Simplification,
    Propagation,
}

/// `name @ kept \ removed <=> guard | user_body ; builtin_body`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Rule {
    pub name: Name,
    pub kept: Vec<Atom>,
    pub removed: Vec<Atom>,
    pub guard: Vec<Constraint>,
    pub user_body: Vec<Atom>,
    pub builtin_body: Vec<Constraint>,
}

impl Rule {
    pub fn kind(&self) -> RuleKind {
        if self.removed.is_empty() {
            RuleKind::Propagation
        } else {
            RuleKind::Simplification
        }
    }

    /// Kept head followed by removed head; positions below `kept.len()`
    /// are kept.
    pub fn heads(&self) -> impl Iterator<Item = &Atom> {
        self.kept.iter().chain(self.removed.iter())
    }

    pub fn head_len(&self) -> usize {
        self.kept.len() + self.removed.len()
    }

    pub fn head_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.kept.collect_vars(&mut out);
        self.removed.collect_vars(&mut out);
        out
    }
}

impl Substitutable for Rule {
    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.kept.collect_vars(out);
        self.removed.collect_vars(out);
        self.guard.collect_vars(out);
        self.user_body.collect_vars(out);
        self.builtin_body.collect_vars(out);
    }

    fn apply(&self, s: &Subst) -> Rule {
        Rule {
            name: self.name.clone(),
            kept: self.kept.apply(s),
            removed: self.removed.apply(s),
            guard: self.guard.apply(s),
            user_body: self.user_body.apply(s),
            builtin_body: self.builtin_body.apply(s),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_rule(self))
    }
}

#[derive(Clone, Default, PartialEq, Eq, Hash, Debug)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Program {
        Program { rules }
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| &*r.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.rules.iter().position(|r| &*r.name == name)
    }

    pub fn names(&self) -> Vec<Name> {
        self.rules.iter().map(|r| r.name.clone()).collect()
    }

    /// The sub-program made of the named rules, in program order.
    pub fn restrict(&self, keep: &BTreeSet<Name>) -> Program {
        Program {
            rules: self.rules.iter().filter(|r| keep.contains(&r.name)).cloned().collect(),
        }
    }

    /// Concatenation of two programs. Rule names must stay distinct.
    pub fn union(&self, other: &Program) -> Program {
        let mut rules = self.rules.clone();
        rules.extend(other.rules.iter().cloned());
        Program { rules }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_program(self))
    }
}
