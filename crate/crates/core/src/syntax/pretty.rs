use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{Atom, Constraint, Program, Rule};
use crate::state::State;
use crate::terms::{write_term, Substitutable, Term, Var};

/// Assigns parseable, collision-free names to variables for printing.
///
/// User variables keep their names. Generated variables get a name derived
/// from their stem (`X` copied for side 1 prints as `X1`) that is not taken
/// by anything else in the printed object.
#[derive(Clone, Debug, Default)]
pub struct VarNamer {
    names: BTreeMap<Var, String>,
}

impl VarNamer {
    pub fn new(vars: &BTreeSet<Var>) -> VarNamer {
        let mut taken: BTreeSet<String> = vars
            .iter()
            .filter_map(|v| match v {
                Var::Named(n) => Some(n.to_string()),
                _ => None,
            })
            .collect();
        let mut names = BTreeMap::new();
        for v in vars {
            let display = match v {
                Var::Named(n) => n.to_string(),
                Var::Fresh { base, id } => {
                    let stem = if base.as_ref() == "_" { "A" } else { base.as_ref() };
                    let first = if stem.ends_with(|c: char| c.is_ascii_digit()) {
                        format!("{stem}_{id}")
                    } else {
                        format!("{stem}{id}")
                    };
                    unique(first, &mut taken)
                }
                Var::Local(i) => unique(format!("_L{i}"), &mut taken),
            };
            names.insert(v.clone(), display);
        }
        VarNamer { names }
    }

    pub fn name(&self, v: &Var) -> String {
        self.names.get(v).cloned().unwrap_or_else(|| v.to_string())
    }

    pub fn term(&self, t: &Term) -> String {
        let mut s = String::new();
        write_term(&mut s, t, &|v| self.name(v)).expect("writing to a String");
        s
    }

    pub fn atom(&self, a: &Atom) -> String {
        self.term(&a.to_term())
    }

    pub fn constraint(&self, c: &Constraint) -> String {
        match c {
            Constraint::Eq(a, b) => format!("{} = {}", self.term(a), self.term(b)),
            Constraint::False => "false".to_string(),
        }
    }

    pub fn state(&self, s: &State) -> String {
        if s.builtin.contains(&Constraint::False) {
            return "<false>".to_string();
        }
        let mut goals: Vec<String> = s.user.iter().map(|a| self.atom(a)).collect();
        goals.extend(s.builtin.iter().map(|c| self.constraint(c)));
        let body = if goals.is_empty() {
            "true".to_string()
        } else {
            goals.join(", ")
        };
        let globals: Vec<String> = s.globals.iter().map(|v| self.name(v)).collect();
        if globals.is_empty() {
            format!("{body} # globals:")
        } else {
            format!("{body} # globals: {}", globals.join(", "))
        }
    }
}

fn unique(first: String, taken: &mut BTreeSet<String>) -> String {
    let mut cand = first.clone();
    let mut k = 1;
    while taken.contains(&cand) {
        cand = format!("{first}_{k}");
        k += 1;
    }
    taken.insert(cand.clone());
    cand
}

fn join_atoms(n: &VarNamer, atoms: &[Atom]) -> String {
    atoms.iter().map(|a| n.atom(a)).collect::<Vec<_>>().join(", ")
}

pub fn pretty_rule(r: &Rule) -> String {
    let n = VarNamer::new(&r.vars());
    let mut out = format!("{} @ ", r.name);
    if r.removed.is_empty() {
        write!(out, "{} ==> ", join_atoms(&n, &r.kept)).unwrap();
    } else if r.kept.is_empty() {
        write!(out, "{} <=> ", join_atoms(&n, &r.removed)).unwrap();
    } else {
        write!(
            out,
            "{} \\ {} <=> ",
            join_atoms(&n, &r.kept),
            join_atoms(&n, &r.removed)
        )
        .unwrap();
    }
    if !r.guard.is_empty() {
        let g: Vec<String> = r.guard.iter().map(|c| n.constraint(c)).collect();
        write!(out, "{} | ", g.join(", ")).unwrap();
    }
    let mut body: Vec<String> = r.user_body.iter().map(|a| n.atom(a)).collect();
    body.extend(r.builtin_body.iter().map(|c| n.constraint(c)));
    if body.is_empty() {
        out.push_str("true");
    } else {
        out.push_str(&body.join(", "));
    }
    out.push('.');
    out
}

pub fn pretty_program(p: &Program) -> String {
    let mut out = String::new();
    for r in &p.rules {
        out.push_str(&pretty_rule(r));
        out.push('\n');
    }
    out
}

/// Prints a state in the query syntax, always with an explicit
/// `# globals:` clause so that reparsing preserves which variables are
/// local.
pub fn pretty_state(s: &State) -> String {
    VarNamer::new(&s.vars()).state(s)
}
