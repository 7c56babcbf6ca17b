//! Randomized property suites. Each runs a fixed number of cases from a
//! fixed seed and reports the first counterexample.

use std::collections::BTreeSet;

use chrdc::analysis::{
    check_local_confluence, check_rule_decreasing, check_strong_confluence, matches_star, Budget, Options, PeakStatus,
    Report,
};
use chrdc::engine::{applicable_steps, replay, rule_steps};
use chrdc::orders::{Partition, RulePreorder};
use chrdc::peaks::critical_peaks;
use chrdc::state::{canonical_equivalent, canonicalize, compose, equivalent, rename_locals_apart, State};
use chrdc::syntax::Program;
use chrdc::terms::{unify, Substitutable, Var};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use super::*;

pub const CASES: u32 = 200;

fn runner() -> TestRunner {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

/// (a) The unifier of `s = t` unifies, is idempotent, only binds variables
/// of the problem, and is more general than every unifier from a pool.
pub fn unifier_laws() -> Result<(), String> {
    let pool = pooled_substitutions();
    run((arb_term(), arb_term()), |(s, t)| {
        let mgu = unify(&[(s.clone(), t.clone())]);
        let flipped = unify(&[(t.clone(), s.clone())]);
        prop_assert_eq!(mgu.is_some(), flipped.is_some());
        let unifiers = pool.iter().filter(|th| s.apply(th) == t.apply(th));
        match mgu {
            Some(sigma) => {
                prop_assert_eq!(s.apply(&sigma), t.apply(&sigma));
                prop_assert!(sigma.is_idempotent());
                let mut vars = s.vars();
                vars.extend(t.vars());
                prop_assert!(sigma.domain().all(|v| vars.contains(v)));
                for th in unifiers {
                    for x in ["X", "Y", "Z"] {
                        let x = chrdc::terms::Term::var(x);
                        prop_assert_eq!(x.apply(&sigma).apply(th), x.apply(th), "{} is not an instance", th);
                    }
                }
            }
            None => {
                let witness = unifiers.into_iter().next();
                prop_assert!(witness.is_none(), "no mgu although {:?} unifies", witness);
            }
        }
        Ok(())
    })
}

/// (b) Equivalence is reflexive, symmetric, transitive, invariant under
/// presentation, agrees with a renaming search on builtin-free states, and
/// canonical forms are fixpoints.
pub fn equivalence_laws() -> Result<(), String> {
    run(
        (
            arb_state(),
            arb_state(),
            arb_user_state(),
            arb_user_state(),
            any::<u64>(),
        ),
        |(s1, s2, u1, u2, seed)| {
            prop_assert!(equivalent(&s1, &s1));
            prop_assert_eq!(equivalent(&s1, &s2), equivalent(&s2, &s1));
            let v1 = variant(&s1, seed);
            let v2 = variant(&v1, seed.rotate_left(7));
            prop_assert!(equivalent(&s1, &v1), "{} vs {}", s1, v1);
            prop_assert!(equivalent(&v1, &v2));
            prop_assert!(equivalent(&s1, &v2));
            if equivalent(&s1, &s2) {
                prop_assert!(equivalent(&v1, &s2));
            }
            let c = canonicalize(&s1);
            prop_assert_eq!(canonicalize(&c.to_state()), c.clone());
            prop_assert!(canonical_equivalent(&c, &canonicalize(&v1)));
            prop_assert_eq!(equivalent(&u1, &u2), brute_equivalent(&u1, &u2), "{} vs {}", u1, u2);
            let vu = variant(&u1, seed);
            prop_assert!(brute_equivalent(&u1, &vu) && equivalent(&u1, &vu));
            Ok(())
        },
    )
}

/// (c) If `s -> t` by rule r then `s ⊕ u -> t ⊕ u` by r.
pub fn monotonicity() -> Result<(), String> {
    run((arb_program(), arb_state(), arb_state()), |(p, s, u)| {
        let u = rename_locals_apart(&u, &s.vars());
        let shared: BTreeSet<Var> = ["X", "Y"].into_iter().map(Var::named).collect();
        let s = State {
            globals: shared.clone(),
            ..s
        };
        let u = State { globals: shared, ..u };
        let big = canonicalize(&compose(&s, &u, &BTreeSet::new()).unwrap());
        for step in applicable_steps(&p, &canonicalize(&s), |_| true) {
            let t = step.target.to_state();
            let t = rename_locals_apart(&t, &u.vars());
            let u2 = rename_locals_apart(&u, &t.vars());
            let expected = canonicalize(&compose(&t, &u2, &BTreeSet::new()).unwrap());
            let rule = p.rule(&step.rule).unwrap();
            let found = rule_steps(rule, &big)
                .iter()
                .any(|st| canonical_equivalent(&st.target, &expected));
            prop_assert!(found, "{} fires on {} but not on {}", step.rule, s, big);
        }
        Ok(())
    })
}

/// (d) Both reducts of every critical peak are one-step successors of its
/// ancestor by the peak's rules.
pub fn peak_replay() -> Result<(), String> {
    run(arb_program(), |p| {
        for pk in critical_peaks(&p) {
            for (rule, reduct) in [(&pk.r1, &pk.left_c), (&pk.r2, &pk.right_c)] {
                let ok = applicable_steps(&p, &pk.ancestor_c, |r| &r.name == rule)
                    .iter()
                    .any(|st| canonical_equivalent(&st.target, reduct));
                prop_assert!(ok, "peak {} of\n{}\nhas an unreachable reduct", pk.selector(), p);
            }
        }
        Ok(())
    })
}

/// (e) `matches_star` against enumeration of segment tags.
pub fn star_agreement() -> Result<(), String> {
    let strategy = (2..=4usize).prop_flat_map(|n| (arb_preorder(n), arb_labels(n), arb_labels(n), 0..n, 0..n));
    run(strategy, |(o, left, right, a, b)| {
        let (alpha, beta) = (format!("r{a}"), format!("r{b}"));
        prop_assert_eq!(
            matches_star(&left, &right, &alpha, &beta, &o),
            brute_star(&left, &right, &alpha, &beta, &o),
            "order {}",
            o
        );
        Ok(())
    })
}

fn certificates_sound(
    p: &Program,
    r: &Report,
    star: Option<&RulePreorder>,
    max_len: Option<usize>,
) -> Result<(), TestCaseError> {
    for pr in &r.peaks {
        let Some(v) = pr.verdict.certificate() else {
            prop_assert!(!pr.verdict.status.is_closed());
            continue;
        };
        prop_assert!(canonical_equivalent(&v.left.source, &pr.peak.left_c));
        prop_assert!(canonical_equivalent(&v.right.source, &pr.peak.right_c));
        let l = replay(p, &v.left).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let rr = replay(p, &v.right).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(
            canonical_equivalent(&l, &rr),
            "valley of {} does not meet",
            pr.peak.selector()
        );
        if let Some(n) = max_len {
            prop_assert!(v.left.len() <= n && v.right.len() <= n);
        }
        if let (Some(o), PeakStatus::Decreasing) = (star, &pr.verdict.status) {
            prop_assert!(matches_star(
                &v.left.labels(),
                &v.right.labels(),
                &pr.peak.r1,
                &pr.peak.r2,
                o
            ));
        }
    }
    Ok(())
}

/// (f) Every certificate replays from the reducts to equivalent states and
/// fits the pattern it was found for.
pub fn certificate_replay() -> Result<(), String> {
    let opts = Options {
        budget: Budget {
            max_depth: 4,
            max_states: 200,
            max_valleys: 1,
        },
        assume_terminating: true,
        ..Options::default()
    };
    run(arb_program(), |p| {
        certificates_sound(&p, &check_local_confluence(&p, &opts), None, None)?;
        certificates_sound(&p, &check_strong_confluence(&p, &opts), None, Some(1))?;
        let part = Partition::all_coinductive(&p);
        let o = RulePreorder::total(&p);
        certificates_sound(&p, &check_rule_decreasing(&p, &part, Some(&o), &opts), Some(&o), None)?;
        Ok(())
    })
}

/// (g) On tiny programs, every overlapping local peak from a small state
/// is an instance of an emitted critical peak.
pub fn peak_completeness() -> Result<(), String> {
    run(
        (arb_program(), prop::collection::vec(arb_small_state(), 12)),
        |(p, states)| {
            let peaks = critical_peaks(&p);
            for s in &states {
                let c = canonicalize(s);
                let steps = applicable_steps(&p, &c, |_| true);
                for s1 in &steps {
                    for s2 in &steps {
                        let pos1: BTreeSet<usize> = s1.kept.iter().chain(&s1.removed).copied().collect();
                        let pos2: BTreeSet<usize> = s2.kept.iter().chain(&s2.removed).copied().collect();
                        let shared: Vec<usize> = pos1.intersection(&pos2).copied().collect();
                        let only_kept = shared.iter().all(|i| s1.kept.contains(i) && s2.kept.contains(i));
                        if shared.is_empty() || only_kept {
                            continue;
                        }
                        let found = peaks.iter().any(|pk| {
                            (pk.r1 == s1.rule && pk.r2 == s2.rule && embeds(pk, &c, &s1.target, &s2.target))
                                || (pk.r1 == s2.rule && pk.r2 == s1.rule && embeds(pk, &c, &s2.target, &s1.target))
                        });
                        prop_assert!(
                            found,
                            "peak {} <- {} -> {} by {}/{} is not covered in\n{}",
                            s1.target,
                            c,
                            s2.target,
                            s1.rule,
                            s2.rule,
                            p
                        );
                    }
                }
            }
            Ok(())
        },
    )
}
