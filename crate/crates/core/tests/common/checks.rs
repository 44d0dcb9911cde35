//! One generated instance per call. `Ok(true)` means the instance was checked,
//! `Ok(false)` that it was skipped because some run did not finish.

use super::{advance, cfg, min_counter, spec, RenamedPair};
use kanren_cost::engine::{run, run_inspect, step, well_formed, State};
use kanren_cost::goal::Goal;
use kanren_cost::measures::{chain_d, cost, predict_sum, times_parts, Cost, MeasureError};
use kanren_cost::term::Term;
use std::sync::Arc;

pub type Check = Result<bool, String>;

/// Maps the variables of `g` into `_1.._n` so that `s ⊗ g` is well formed.
pub fn fit_to(g: Goal, n: u32) -> Goal {
    g.subst_vars(&|v| Some(if n == 0 { Term::atom("Nil") } else { Term::var((v.0 - 1) % n + 1) }))
}

fn measured(s: State) -> Result<Option<Cost>, String> {
    match cost(s, &spec(), &cfg()) {
        Ok(c) => Ok(Some(c)),
        Err(MeasureError::Truncated) => Ok(None),
        Err(e) => Err(e.to_string()),
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

pub fn sum_case((g1, k1): (Goal, usize), (g2, k2): (Goal, usize)) -> Check {
    let spec = spec();
    let (Some(s1), Some(s2)) = (advance(g1, k1, &spec), advance(g2, k2, &spec)) else {
        return Ok(false);
    };
    let (Some(c1), Some(c2)) = (measured(s1.clone())?, measured(s2.clone())?) else {
        return Ok(false);
    };
    let whole = measured(State::sum(s1, s2))?.ok_or("sum truncated but its parts finish")?;
    let want = predict_sum(c1, c2);
    ensure!(whole == want, "sum of {c1:?} and {c2:?}: measured {whole:?}, predicted {want:?}");
    Ok(true)
}

pub fn times_case((g, k): (Goal, usize), g2: Goal) -> Check {
    let spec = spec();
    let Some(s) = advance(g, k, &spec) else { return Ok(false) };
    let g2 = Arc::new(fit_to(g2, min_counter(&s)));
    let prod = State::Prod(Box::new(s.clone()), g2.clone());
    ensure!(well_formed(&prod), "ill-formed product {prod:?}");
    let parts = match times_parts(s, &g2, &spec, &cfg()) {
        Ok(p) => p,
        Err(MeasureError::Truncated) => return Ok(false),
        Err(e) => return Err(e.to_string()),
    };
    let Some(whole) = measured(prod)? else { return Ok(false) };
    let want = parts.predict();
    ensure!(whole == want, "product: measured {whole:?}, predicted {want:?}");
    // the scheduling residual sits between X and 4X
    let (x, r) = (parts.approx_base(), parts.residual());
    ensure!(x <= r && r <= 4 * x, "residual {r} outside [{x}, {}]", 4 * x);
    Ok(true)
}

pub fn chain_case((g0, k): (Goal, usize), gs: Vec<Goal>) -> Check {
    let spec = spec();
    let Some(s0) = advance(g0, k, &spec) else { return Ok(false) };
    let n = min_counter(&s0);
    let gs: Vec<Arc<Goal>> = gs.into_iter().map(|g| Arc::new(fit_to(g, n))).collect();
    let mut chained = s0.clone();
    for g in &gs {
        chained = State::Prod(Box::new(chained), g.clone());
    }
    let Some(whole) = measured(chained)? else { return Ok(false) };
    match chain_d(s0, &gs, &spec, &cfg()) {
        Ok(d) => {
            ensure!(whole.d == d, "chain of {}: measured d={}, predicted {d}", gs.len(), whole.d);
            Ok(true)
        }
        Err(MeasureError::Truncated) => Ok(false),
        Err(e) => Err(e.to_string()),
    }
}

/// Well-formedness along the trace, `d ≤ t ≤ d²`, and the leaf-step
/// equation on up to eight leaf states of the trace.
pub fn task_case(g: Goal) -> Check {
    let spec = spec();
    let mut leaves = Vec::new();
    let mut ill = None;
    let stats = run_inspect(kanren_cost::init(g), &spec, &cfg(), |rec| {
        let from = rec.from.expect("inspect passes the state");
        if ill.is_none() && !well_formed(from) {
            ill = Some(rec.index);
        }
        if matches!(from, State::Leaf(..)) && leaves.len() < 8 {
            leaves.push(from.clone());
        }
    })
    .map_err(|e| e.to_string())?;
    if stats.truncated {
        return Ok(false);
    }
    ensure!(ill.is_none(), "ill-formed state at step {}", ill.unwrap());
    ensure!(bounded(stats.d, stats.t), "d={} t={} outside d <= t <= d^2", stats.d, stats.t);
    for leaf in leaves {
        let before = measured(leaf.clone())?.ok_or("leaf truncated")?;
        let next = step(leaf, &spec, &cfg().unify).map_err(|e| e.to_string())?.next;
        let after = match next {
            Some(s) => measured(s)?.ok_or("leaf successor truncated")?,
            None => Cost::ZERO,
        };
        ensure!(before == Cost { d: after.d + 1, t: after.t + 1 }, "leaf {before:?} then {after:?}");
    }
    Ok(true)
}

pub fn bounded(d: u64, t: u64) -> bool {
    d <= t && t <= d * d
}

pub fn renaming_case(pair: RenamedPair) -> Check {
    ensure!(well_formed(&pair.original) && well_formed(&pair.renamed), "ill-formed pair");
    let spec = spec();
    let a = run(pair.original, &spec, &cfg()).map_err(|e| e.to_string())?;
    if a.truncated {
        return Ok(false);
    }
    let b = run(pair.renamed, &spec, &cfg()).map_err(|e| e.to_string())?;
    let (x, y) = ((a.d, a.t, a.answers.len()), (b.d, b.t, b.answers.len()));
    ensure!(!b.truncated && x == y, "original {x:?}, renamed {y:?}");
    Ok(true)
}
