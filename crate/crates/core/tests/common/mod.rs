//! Generators shared by the integration tests.
#![allow(dead_code)]

use kanren_cost::engine::{step, EngineConfig, Env, State};
use kanren_cost::goal::{Goal, RelId, Spec};
use kanren_cost::programs::{self, zeros};
use kanren_cost::term::{Slot, Substitution, Term, UnifyOptions, Var};
use proptest::prelude::*;

pub mod checks;

/// Placeholder variable later turned into a `fresh` binder.
const BINDER: u32 = 999;

pub fn nil() -> Term {
    Term::atom("Nil")
}

pub fn zero() -> Term {
    Term::atom("Zero")
}

pub fn cons(a: Term, b: Term) -> Term {
    Term::ctor("Cons", vec![a, b])
}

/// Occurs check on, so generated runs never build cyclic terms.
pub fn cfg() -> EngineConfig {
    EngineConfig { unify: UnifyOptions::with_occurs_check(true), step_limit: 200_000 }
}

pub fn spec() -> Spec {
    programs::append()
}

pub fn term_over(vars: Vec<u32>, depth: u32) -> BoxedStrategy<Term> {
    let leaf = prop_oneof![
        2 => proptest::sample::select(vars).prop_map(Term::var),
        1 => Just(nil()),
        1 => Just(zero()),
    ];
    leaf.prop_recursive(depth, 8, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| cons(a, b)))
        .boxed()
}

pub fn term(nv: u32) -> BoxedStrategy<Term> {
    term_over((1..=nv).collect(), 2)
}

fn base_goal(nv: u32, rels: [RelId; 2]) -> BoxedStrategy<Goal> {
    let mut vars: Vec<u32> = (1..=nv).collect();
    vars.push(BINDER);
    let t = || term_over(vars.clone(), 2);
    prop_oneof![
        3 => (t(), t()).prop_map(|(a, b)| Goal::unify(a, b)),
        // a ground first argument keeps every call finite
        1 => (0..3usize, 0..2usize, t(), t())
            .prop_map(move |(k, r, b, ab)| Goal::invoke(rels[r], vec![zeros(k), b, ab])),
    ]
    .boxed()
}

fn bind_placeholder(g: Goal, id: u32) -> Goal {
    let slot = Slot::new(id, "x");
    let body = g.subst_vars(&|v| (v.0 == BINDER).then(|| Term::Slot(slot.clone())));
    Goal::fresh(slot, body)
}

/// Closed goals over `_1.._nv` built from equalities and finite calls.
pub fn goal(nv: u32) -> BoxedStrategy<Goal> {
    let spec = spec();
    let rels = [spec.lookup("appendo").unwrap(), spec.lookup("appendo_opt").unwrap()];
    base_goal(nv, rels)
        .prop_recursive(4, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Goal::conj(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Goal::disj(a, b)),
                (inner, 0..4u32).prop_map(|(g, id)| bind_placeholder(g, id)),
            ]
        })
        .prop_map(move |g| g.subst_vars(&|v| (v.0 == BINDER).then(|| Term::var(1))))
        .boxed()
}

/// The state reached after `k` steps from `init(g)`, if the run lasts that long.
pub fn advance(g: Goal, k: usize, spec: &Spec) -> Option<State> {
    let n = g.max_var();
    let mut s = State::leaf(g, Env::new(Substitution::new(), n));
    for _ in 0..k {
        s = step(s, spec, &cfg().unify).ok()?.next?;
    }
    Some(s)
}

/// Random intermediate states: a goal over `_1.._3` run for a few steps.
pub fn state() -> BoxedStrategy<(Goal, usize)> {
    (goal(3), 0..6usize).boxed()
}

pub fn min_counter(s: &State) -> u32 {
    s.leaves().iter().map(|(_, e)| e.counter).min().unwrap_or(0)
}

pub fn vars_of(t: &Term) -> Vec<Var> {
    t.free_vars().into_iter().collect()
}

/// `(g, n)` and `(g', σ', n')` with `g π = g' σ'` for an injective `π`:
/// variables are permuted into a wider range, the counter is shifted, and
/// some variables are routed through extra bindings.
#[derive(Debug, Clone)]
pub struct RenamedPair {
    pub original: State,
    pub renamed: State,
}

pub fn renamed_pair() -> BoxedStrategy<RenamedPair> {
    (goal(3), 0..4u32, any::<u64>(), proptest::collection::vec(any::<bool>(), 3))
        .prop_map(|(g, shift, perm_seed, route)| {
            let n = g.max_var();
            let width = n + shift;
            // a permutation of 1..=width chosen by the seed
            let mut pool: Vec<u32> = (1..=width).collect();
            let mut seed = perm_seed;
            let mut pi = Vec::new();
            for _ in 0..n {
                let i = (seed % pool.len() as u64) as usize;
                seed = seed.rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15;
                pi.push(pool.swap_remove(i));
            }
            let mut sigma = Substitution::new();
            let mut next = width;
            let mut target = std::collections::BTreeMap::new();
            for x in 1..=n {
                let image = pi[(x - 1) as usize];
                if route[(x - 1) as usize % route.len()] {
                    next += 1;
                    sigma.bind(Var(next), Term::var(image));
                    target.insert(x, next);
                } else {
                    target.insert(x, image);
                }
            }
            let g2 = g.subst_vars(&|v| target.get(&v.0).map(|&w| Term::var(w)));
            RenamedPair {
                original: State::leaf(g, Env::new(Substitution::new(), n)),
                renamed: State::leaf(g2, Env::new(sigma, next)),
            }
        })
        .boxed()
}

pub fn ground_term(depth: u32) -> BoxedStrategy<Term> {
    prop_oneof![Just(nil()), Just(zero())]
        .prop_recursive(depth, 8, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| cons(a, b)))
        .boxed()
}

/// `(t1, t2, ρ)` with `ρ` defined on a random subset of `_1.._4`.
pub fn unification_instance() -> BoxedStrategy<(Term, Term, std::collections::BTreeMap<Var, Term>)> {
    let vars: Vec<u32> = (1..=4).collect();
    (
        term_over(vars.clone(), 3),
        term_over(vars, 3),
        proptest::collection::vec(proptest::option::of(ground_term(2)), 4),
    )
        .prop_map(|(t1, t2, vals)| {
            let rho = vals
                .into_iter()
                .enumerate()
                .filter_map(|(i, t)| t.map(|t| (Var(i as u32 + 1), t)))
                .collect();
            (t1, t2, rho)
        })
        .boxed()
}

/// Symbolic unification against concrete unification of the instances:
/// an extension exists exactly when `t1ρ` and `t2ρ` unify, and then both
/// routes give every variable the same value up to renaming.
pub fn check_symbolic(t1: &Term, t2: &Term, rho: &std::collections::BTreeMap<Var, Term>) -> Result<(), String> {
    use kanren_cost::factors::{apply_valuation, solve_constraints};
    use kanren_cost::scheme::{constr, upd};
    use kanren_cost::term::{alpha_equivalent, unify};

    let v: std::collections::BTreeSet<Var> = rho.keys().copied().collect();
    let i1 = apply_valuation(t1, rho);
    let i2 = apply_valuation(t2, rho);
    let concrete = unify(&i1, &i2, true).map_err(|e| e.to_string())?;
    let Some(delta) = unify(t1, t2, true).map_err(|e| e.to_string())? else {
        return match concrete {
            None => Ok(()),
            Some(_) => Err(format!("{t1} and {t2} have no mgu but their instances unify")),
        };
    };
    let u = upd(&v, &delta);
    let ext = solve_constraints(rho, &constr(&delta, &u), &u).map_err(|e| e.to_string())?;
    match (concrete, ext) {
        (None, None) => Ok(()),
        (Some(m), Some(rho2)) => {
            let mut xs: std::collections::BTreeSet<Var> = t1.free_vars();
            xs.extend(t2.free_vars());
            let mut lhs = Vec::new();
            let mut rhs = Vec::new();
            for x in xs {
                let l = m.apply(&apply_valuation(&Term::Var(x), rho)).map_err(|e| e.to_string())?;
                let r = apply_valuation(&delta.apply(&Term::Var(x)).map_err(|e| e.to_string())?, &rho2);
                lhs.push(l);
                rhs.push(r);
            }
            if alpha_equivalent(&lhs, &rhs).is_some() {
                Ok(())
            } else {
                Err(format!("values differ: {lhs:?} vs {rhs:?}"))
            }
        }
        (c, e) => Err(format!(
            "{t1} == {t2} under {rho:?}: concrete {} but extension {}",
            if c.is_some() { "unifies" } else { "fails" },
            if e.is_some() { "exists" } else { "does not" }
        )),
    }
}
