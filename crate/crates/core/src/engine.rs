//! The labeled transition relation on canonical states and bounded
//! exploration of derivations.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::state::{canonical_equivalent, canonicalize, CanonicalState, State, StateIndex};
use crate::syntax::{Atom, Constraint, Program, Rule};
use crate::terms::{match_terms, rename_apart, unify_restricted, Name, Subst, Substitutable, Term, Var};

/// One rule application. Positions index the user store of the canonical
/// source state; `unifier` binds the variables of the renamed rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledStep {
    pub rule: Name,
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub unifier: Subst,
    pub target: CanonicalState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub source: CanonicalState,
    pub steps: Vec<LabeledStep>,
}

impl Derivation {
    pub fn empty(source: CanonicalState) -> Derivation {
        Derivation {
            source,
            steps: Vec::new(),
        }
    }

    pub fn labels(&self) -> Vec<Name> {
        self.steps.iter().map(|s| s.rule.clone()).collect()
    }

    pub fn target(&self) -> &CanonicalState {
        self.steps.last().map_or(&self.source, |s| &s.target)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {index}: no rule named `{rule}`")]
    UnknownRule { index: usize, rule: String },
    #[error("step {index}: rule `{rule}` does not apply at the recorded positions")]
    NotApplicable { index: usize, rule: String },
}

/// All steps of the rules accepted by `allowed` from `s`, grouped by rule
/// in program order.
pub fn applicable_steps(p: &Program, s: &CanonicalState, allowed: impl Fn(&Rule) -> bool) -> Vec<LabeledStep> {
    p.rules
        .iter()
        .filter(|r| allowed(r))
        .flat_map(|r| rule_steps(r, s))
        .collect()
}

/// Steps of a single rule. On the inconsistent state every rule fires once
/// and the target stays inconsistent.
pub fn rule_steps(rule: &Rule, s: &CanonicalState) -> Vec<LabeledStep> {
    let store = match s {
        CanonicalState::Inconsistent => {
            return vec![LabeledStep {
                rule: rule.name.clone(),
                kept: Vec::new(),
                removed: Vec::new(),
                unifier: Subst::new(),
                target: CanonicalState::Inconsistent,
            }]
        }
        CanonicalState::Consistent(c) => c,
    };
    let state_vars = s.vars();
    let (rule, _) = rename_apart(&state_vars, rule);
    let heads: Vec<&Atom> = rule.heads().collect();
    let head_vars = rule.head_vars();
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(heads.len());
    let mut pairs = Vec::new();
    search(
        &heads,
        &store.user,
        &head_vars,
        &mut chosen,
        &mut pairs,
        &mut |chosen, theta| {
            if let Some(step) = fire(&rule, s, chosen, theta) {
                out.push(step);
            }
        },
    );
    out
}

fn search(
    heads: &[&Atom],
    store: &[Atom],
    bindable: &BTreeSet<Var>,
    chosen: &mut Vec<usize>,
    pairs: &mut Vec<(Term, Term)>,
    found: &mut dyn FnMut(&[usize], Subst),
) {
    let i = chosen.len();
    if i == heads.len() {
        let theta = match_terms(pairs, |v| bindable.contains(v)).expect("checked while extending");
        found(chosen, theta);
        return;
    }
    let h = heads[i];
    for (j, a) in store.iter().enumerate() {
        if chosen.contains(&j) || a.pred != h.pred || a.args.len() != h.args.len() {
            continue;
        }
        let mark = pairs.len();
        pairs.extend(h.args.iter().cloned().zip(a.args.iter().cloned()));
        if match_terms(pairs, |v| bindable.contains(v)).is_some() {
            chosen.push(j);
            search(heads, store, bindable, chosen, pairs, found);
            chosen.pop();
        }
        pairs.truncate(mark);
    }
}

/// Checks the guard and builds the target of a matched rule instance.
fn fire(rule: &Rule, s: &CanonicalState, chosen: &[usize], theta: Subst) -> Option<LabeledStep> {
    let store = s.store()?;
    let head_vars = rule.head_vars();
    let guard = rule.guard.apply(&theta);
    let guard_locals: BTreeSet<Var> = rule
        .guard
        .vars()
        .into_iter()
        .filter(|v| !head_vars.contains(v))
        .collect();
    let theta = if guard.is_empty() {
        theta
    } else {
        let eqs = crate::syntax::equations(&guard)?;
        let phi = unify_restricted(&eqs, |v| guard_locals.contains(v))?;
        compose_subst(&theta, &phi)
    };
    let (kept, removed) = chosen.split_at(rule.kept.len());
    let mut user: Vec<Atom> = store
        .user
        .iter()
        .enumerate()
        .filter(|(j, _)| !removed.contains(j))
        .map(|(_, a)| a.clone())
        .collect();
    user.extend(rule.user_body.apply(&theta));
    let mut builtin: Vec<Constraint> = store
        .residual
        .iter()
        .map(|(v, t)| Constraint::Eq(Term::Var(v.clone()), t.clone()))
        .collect();
    builtin.extend(rule.guard.apply(&theta));
    builtin.extend(rule.builtin_body.apply(&theta));
    let target = canonicalize(&State::new(user, builtin, store.globals.clone()));
    Some(LabeledStep {
        rule: rule.name.clone(),
        kept: kept.to_vec(),
        removed: removed.to_vec(),
        unifier: theta,
        target,
    })
}

/// `θ` followed by `φ`, where `φ` binds only variables outside the range
/// of `θ`'s domain.
fn compose_subst(theta: &Subst, phi: &Subst) -> Subst {
    let mut bindings: Vec<(Var, Term)> = theta.iter().map(|(v, t)| (v.clone(), t.apply(phi))).collect();
    bindings.extend(phi.iter().map(|(v, t)| (v.clone(), t.clone())));
    Subst::from_bindings(bindings)
}

/// Re-executes a derivation by rule name and matched positions, returning
/// the final state.
pub fn replay(p: &Program, d: &Derivation) -> Result<CanonicalState, ReplayError> {
    let mut current = d.source.clone();
    for (index, step) in d.steps.iter().enumerate() {
        let rule = p.rule(&step.rule).ok_or_else(|| ReplayError::UnknownRule {
            index,
            rule: step.rule.to_string(),
        })?;
        let next = rule_steps(rule, &current)
            .into_iter()
            .find(|s| s.kept == step.kept && s.removed == step.removed && canonical_equivalent(&s.target, &step.target))
            .ok_or_else(|| ReplayError::NotApplicable {
                index,
                rule: step.rule.to_string(),
            })?;
        current = next.target;
    }
    Ok(current)
}

#[derive(Clone, Debug)]
pub struct Reachable {
    /// Every state found, with a shortest derivation to it, in BFS order.
    pub states: Vec<(CanonicalState, Derivation)>,
    pub depth_truncated: bool,
    pub states_truncated: bool,
}

impl Reachable {
    pub fn contains(&self, s: &CanonicalState) -> bool {
        self.states.iter().any(|(c, _)| canonical_equivalent(c, s))
    }
}

/// Breadth-first exploration from `s` up to `max_depth` steps and
/// `max_states` distinct states.
pub fn reachable(
    p: &Program,
    s: &State,
    allowed: impl Fn(&Rule) -> bool,
    max_depth: usize,
    max_states: usize,
) -> Reachable {
    let start = canonicalize(s);
    let mut index = StateIndex::new();
    let _ = index.insert(&start, 0);
    let mut states = vec![(start.clone(), Derivation::empty(start))];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    let mut depth_truncated = false;
    let mut states_truncated = false;
    while let Some((id, depth)) = queue.pop_front() {
        let from = states[id].0.clone();
        let steps = applicable_steps(p, &from, &allowed);
        if depth == max_depth {
            depth_truncated |= steps.iter().any(|st| index.get(&st.target).is_none());
            continue;
        }
        for step in steps {
            if index.get(&step.target).is_some() {
                continue;
            }
            if states.len() >= max_states {
                states_truncated = true;
                break;
            }
            let new_id = states.len();
            let _ = index.insert(&step.target, new_id);
            let mut d = states[id].1.clone();
            let target = step.target.clone();
            d.steps.push(step);
            states.push((target, d));
            queue.push_back((new_id, depth + 1));
        }
    }
    Reachable {
        states,
        depth_truncated,
        states_truncated,
    }
}
