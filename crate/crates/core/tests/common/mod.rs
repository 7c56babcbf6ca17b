//! Shared fixtures, random generators and brute-force oracles.
#![allow(dead_code)]

pub mod props;

use std::collections::BTreeSet;
use std::path::PathBuf;

use chrdc::orders::RulePreorder;
use chrdc::peaks::CriticalPeak;
use chrdc::state::{canonical_equivalent, canonicalize, compose, rename_locals_apart, CanonicalState, State};
use chrdc::syntax::{parse_program, Atom, Constraint, Program};
use chrdc::terms::{match_terms, Name, Subst, Substitutable, Term, Var};
use proptest::prelude::*;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_str(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

pub fn load(name: &str) -> Program {
    parse_program(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// Runs the command line in-process.
pub fn chrdc(args: &[&str]) -> (String, i32) {
    chrdc::cli::execute(std::iter::once("chrdc").chain(args.iter().copied()))
}

// ---- terms -------------------------------------------------------------

pub fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::var("X")),
        Just(Term::var("Y")),
        Just(Term::var("Z")),
        Just(Term::constant("a")),
        Just(Term::constant("b")),
    ];
    leaf.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::app("g", vec![t])),
            (inner.clone(), inner).prop_map(|(s, t)| Term::app("f", vec![s, t])),
        ]
    })
}

/// Every substitution sending X, Y, Z into a small fixed pool of terms.
pub fn pooled_substitutions() -> Vec<Subst> {
    let pool = [
        Term::constant("a"),
        Term::constant("b"),
        Term::var("X"),
        Term::var("Y"),
        Term::var("Z"),
        Term::app("g", vec![Term::constant("a")]),
        Term::app("g", vec![Term::var("X")]),
        Term::app("g", vec![Term::var("Z")]),
        Term::app("f", vec![Term::constant("a"), Term::constant("b")]),
        Term::app("f", vec![Term::var("Y"), Term::var("Y")]),
    ];
    let mut out = Vec::new();
    for x in &pool {
        for y in &pool {
            for z in &pool {
                out.push(Subst::from_bindings([
                    (Var::named("X"), x.clone()),
                    (Var::named("Y"), y.clone()),
                    (Var::named("Z"), z.clone()),
                ]));
            }
        }
    }
    out
}

// ---- states ------------------------------------------------------------

fn arb_arg() -> impl Strategy<Value = Term> {
    prop_oneof![
        Just(Term::var("X")),
        Just(Term::var("Y")),
        Just(Term::var("L")),
        Just(Term::var("M")),
        Just(Term::constant("a")),
        Just(Term::app("s", vec![Term::var("X")])),
        Just(Term::app("s", vec![Term::var("L")])),
    ]
}

pub fn arb_atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        arb_arg().prop_map(|t| Atom::new("p", vec![t])),
        (arb_arg(), arb_arg()).prop_map(|(s, t)| Atom::new("q", vec![s, t])),
    ]
}

/// States over globals drawn from {X, Y} and locals L, M.
pub fn arb_state() -> impl Strategy<Value = State> {
    (
        prop::collection::vec(arb_atom(), 0..4),
        prop::collection::vec((arb_arg(), arb_arg()), 0..3),
        any::<(bool, bool)>(),
    )
        .prop_map(|(user, eqs, (gx, gy))| {
            let mut globals = BTreeSet::new();
            if gx {
                globals.insert(Var::named("X"));
            }
            if gy {
                globals.insert(Var::named("Y"));
            }
            State::new(
                user,
                eqs.into_iter().map(|(s, t)| Constraint::Eq(s, t)).collect(),
                globals,
            )
        })
}

/// Builtin-free states whose variables are all global.
pub fn arb_user_state() -> impl Strategy<Value = State> {
    prop::collection::vec(arb_atom(), 0..4).prop_map(|user| {
        let s = State::new(user, Vec::new(), BTreeSet::new());
        let globals = s.store_vars();
        State { globals, ..s }
    })
}

/// A syntactically different presentation of the same state: atoms and
/// equations shuffled, equations flipped, locals renamed, a dead global
/// added.
pub fn variant(s: &State, seed: u64) -> State {
    let mut rng = seed;
    let mut next = move || {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng >> 33) as usize
    };
    let mut user = s.user.clone();
    for i in (1..user.len()).rev() {
        let j = next() % (i + 1);
        user.swap(i, j);
    }
    let mut builtin: Vec<Constraint> = s
        .builtin
        .iter()
        .map(|c| match c {
            Constraint::Eq(a, b) if next() % 2 == 0 => Constraint::Eq(b.clone(), a.clone()),
            c => c.clone(),
        })
        .collect();
    builtin.reverse();
    let renaming = Subst::renaming(
        s.locals()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, Var::named(&format!("R{}", i + next() % 3 * 10)))),
    );
    let mut globals = s.globals.clone();
    globals.insert(Var::named("Dead"));
    State::new(user, builtin, globals).apply(&renaming)
}

/// Equivalence of builtin-free states by trying every injective renaming
/// of locals and comparing the sorted atom lists.
pub fn brute_equivalent(a: &State, b: &State) -> bool {
    let live = |s: &State| -> BTreeSet<Var> { s.globals.intersection(&s.store_vars()).cloned().collect() };
    if live(a) != live(b) || a.user.len() != b.user.len() {
        return false;
    }
    let la: Vec<Var> = a.locals().into_iter().collect();
    let lb: Vec<Var> = b.locals().into_iter().collect();
    if la.len() != lb.len() {
        return false;
    }
    let mut sorted_b = b.user.clone();
    sorted_b.sort();
    permutations(lb.len()).into_iter().any(|perm| {
        let r = Subst::renaming(la.iter().cloned().zip(perm.iter().map(|&i| lb[i].clone())));
        let mut ua: Vec<Atom> = a.user.iter().map(|x| x.apply(&r)).collect();
        ua.sort();
        ua == sorted_b
    })
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
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

// ---- programs ----------------------------------------------------------

const HEAD_ARGS: &[&str] = &["X", "Y", "a", "s(X)"];
const BODY_ARGS: &[&str] = &["X", "Y", "Z", "a", "s(X)"];

fn atom_text(args: &'static [&'static str]) -> impl Strategy<Value = String> {
    let arg = || prop::sample::select(args);
    prop_oneof![
        arg().prop_map(|a| format!("p({a})")),
        (arg(), arg()).prop_map(|(a, b)| format!("q({a},{b})")),
    ]
}

/// Source text of a rule with at most two head atoms and depth-one terms.
pub fn arb_rule_text(name: &'static str) -> impl Strategy<Value = String> {
    let heads = prop_oneof![
        (Just(0usize), Just(1usize)),
        (Just(0usize), Just(2usize)),
        (Just(1usize), Just(0usize)),
        (Just(1usize), Just(1usize)),
    ];
    (
        heads,
        prop::collection::vec(atom_text(HEAD_ARGS), 2),
        prop_oneof![3 => Just(""), 1 => Just("X = Y | ")],
        prop::collection::vec(atom_text(BODY_ARGS), 0..2),
        prop_oneof![3 => Just(None), 1 => Just(Some("X = a"))],
    )
        .prop_map(move |((k, r), atoms, guard, body, eq)| {
            let kept = atoms[..k].join(", ");
            let removed = atoms[k..k + r].join(", ");
            let mut parts = body;
            parts.extend(eq.map(str::to_string));
            let body = if parts.is_empty() {
                "true".to_string()
            } else {
                parts.join(", ")
            };
            match (k, r) {
                (_, 0) => format!("{name} @ {kept} ==> {guard}{body}."),
                (0, _) => format!("{name} @ {removed} <=> {guard}{body}."),
                _ => format!("{name} @ {kept} \\ {removed} <=> {guard}{body}."),
            }
        })
}

/// Programs of one or two rules.
pub fn arb_program() -> impl Strategy<Value = Program> {
    (arb_rule_text("r1"), prop::option::of(arb_rule_text("r2"))).prop_map(|(a, b)| {
        let text = match b {
            Some(b) => format!("{a}\n{b}"),
            None => a,
        };
        parse_program(&text).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{text}"))
    })
}

/// Ground-or-global states of at most three atoms with depth-one terms.
pub fn arb_small_state() -> impl Strategy<Value = State> {
    let arg = prop_oneof![
        Just(Term::var("X")),
        Just(Term::var("Y")),
        Just(Term::constant("a")),
        Just(Term::app("s", vec![Term::constant("a")])),
        Just(Term::app("s", vec![Term::var("X")])),
    ];
    let atom = prop_oneof![
        arg.clone().prop_map(|t| Atom::new("p", vec![t])),
        (arg.clone(), arg).prop_map(|(s, t)| Atom::new("q", vec![s, t])),
    ];
    prop::collection::vec(atom, 1..4).prop_map(|user| {
        let s = State::new(user, Vec::new(), BTreeSet::new());
        let globals = s.store_vars();
        State { globals, ..s }
    })
}

// ---- orders and label sequences ---------------------------------------

pub fn rule_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("r{i}")).collect()
}

pub fn nullary_program(n: usize) -> Program {
    let text: String = rule_names(n)
        .iter()
        .map(|r| format!("{r} @ {r}p <=> true.\n"))
        .collect();
    parse_program(&text).unwrap()
}

/// A random preorder on `r0..r{n-1}`: ranks give the candidate pairs and a
/// random subset of them is closed transitively.
pub fn arb_preorder(n: usize) -> impl Strategy<Value = RulePreorder> {
    (
        prop::collection::vec(0..4usize, n),
        prop::collection::vec(any::<bool>(), n * n),
    )
        .prop_map(move |(rank, keep)| {
            let names = rule_names(n);
            let mut pairs = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if a != b && keep[a * n + b] && rank[a] >= rank[b] {
                        pairs.push((names[a].clone(), names[b].clone(), rank[a] > rank[b]));
                    }
                }
            }
            RulePreorder::from_pairs(&nullary_program(n), &pairs).unwrap()
        })
}

pub fn arb_labels(n: usize) -> impl Strategy<Value = Vec<Name>> {
    prop::collection::vec((0..n).prop_map(|i| chrdc::terms::name(&format!("r{i}"))), 0..7)
}

/// Whether `labels` splits as A·M·T by trying every assignment of
/// segment tags to positions.
pub fn brute_side(labels: &[Name], a: &str, b: &str, o: &RulePreorder) -> bool {
    let n = labels.len();
    (0..3usize.pow(n as u32)).any(|code| {
        let tags: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        tags.windows(2).all(|w| w[0] <= w[1])
            && tags.iter().filter(|&&t| t == 1).count() <= 1
            && labels.iter().zip(&tags).all(|(l, t)| match t {
                0 => o.gt_names(a, l),
                1 => o.ge_names(b, l),
                _ => o.gt_names(a, l) || o.gt_names(b, l),
            })
    })
}

pub fn brute_star(left: &[Name], right: &[Name], alpha: &str, beta: &str, o: &RulePreorder) -> bool {
    brute_side(left, alpha, beta, o) && brute_side(right, beta, alpha, o)
}

// ---- peak embedding ------------------------------------------------------

/// Every injection of `m` items into `n` slots.
pub fn injections(m: usize, n: usize) -> Vec<Vec<usize>> {
    fn go(m: usize, n: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == m {
            out.push(acc.clone());
            return;
        }
        for i in 0..n {
            if !acc.contains(&i) {
                acc.push(i);
                go(m, n, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(m, n, &mut Vec::new(), &mut out);
    out
}

/// Whether the local peak `t1 <- s -> t2` (with `s` builtin-free and all
/// variables global) is an instance of `pk` placed in a larger store: the
/// ancestor's atoms match atoms of `s`, and each reduct, instantiated and
/// conjoined with the unmatched atoms, is equivalent to the corresponding
/// target.
pub fn embeds(pk: &CriticalPeak, s: &CanonicalState, t1: &CanonicalState, t2: &CanonicalState) -> bool {
    let Some(anc) = pk.ancestor_c.store() else {
        return false;
    };
    let Some(store) = s.store() else {
        return false;
    };
    let pk_vars = pk.ancestor_c.vars();
    let globals = s.globals();
    for inj in injections(anc.user.len(), store.user.len()) {
        let mut pairs = Vec::new();
        let mut fits = true;
        for (a, &i) in anc.user.iter().zip(&inj) {
            let b = &store.user[i];
            if a.pred != b.pred || a.args.len() != b.args.len() {
                fits = false;
                break;
            }
            pairs.extend(a.args.iter().cloned().zip(b.args.iter().cloned()));
        }
        if !fits {
            continue;
        }
        let Some(sigma) = match_terms(&pairs, |v| pk_vars.contains(v)) else {
            continue;
        };
        let anc_globals = pk.ancestor_c.globals();
        let mut bindings: Vec<(Var, Term)> = sigma
            .iter()
            .filter(|(v, _)| anc_globals.contains(*v))
            .map(|(v, t)| (v.clone(), t.clone()))
            .collect();
        for (v, t) in &anc.residual {
            bindings.push((v.clone(), t.apply(&sigma)));
        }
        let sigma = Subst::from_bindings(bindings);
        let rest: Vec<Atom> = (0..store.user.len())
            .filter(|i| !inj.contains(i))
            .map(|i| store.user[i].clone())
            .collect();
        let place = |reduct: &CanonicalState| -> CanonicalState {
            let inst = reduct.to_state().apply(&sigma);
            let inst = rename_locals_apart(&inst, &s.vars());
            let u = State::new(rest.clone(), Vec::new(), globals.clone());
            let mut joined = compose(&inst, &u, &BTreeSet::new()).expect("locals are apart");
            joined.globals = globals.clone();
            canonicalize(&joined)
        };
        if canonical_equivalent(&place(&pk.left_c), t1) && canonical_equivalent(&place(&pk.right_c), t2) {
            return true;
        }
    }
    false
}
