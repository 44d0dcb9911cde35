//! Closed-form predictions for `d` and `t` of composite states, computed
//! from the traces of their parts. Used to cross-check the engine.

use crate::engine::{run_observed, EngineConfig, EngineError, Env, Label, State};
use crate::goal::{Goal, Spec};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct Cost {
    pub d: u64,
    pub t: u64,
}

impl Cost {
    pub const ZERO: Cost = Cost { d: 0, t: 0 };
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("trace exceeded the step limit")]
    Truncated,
}

/// Measures a full, untruncated run.
pub fn cost(state: State, spec: &Spec, cfg: &EngineConfig) -> Result<Cost, MeasureError> {
    let stats = crate::engine::run(state, spec, cfg)?;
    if stats.truncated {
        return Err(MeasureError::Truncated);
    }
    Ok(Cost { d: stats.d, t: stats.t })
}

fn cost_opt(state: Option<State>, spec: &Spec, cfg: &EngineConfig) -> Result<Cost, MeasureError> {
    match state {
        Some(s) => cost(s, spec, cfg),
        None => Ok(Cost::ZERO),
    }
}

/// Scheduling overhead of a sum whose left part runs for `d1` steps and right part for `d2`.
pub fn cost_sum(d1: u64, d2: u64) -> u64 {
    if d1 == 0 || d2 == 0 {
        return 0;
    }
    (2 * d1 - 1).min(2 * d2)
}

pub fn predict_sum(a: Cost, b: Cost) -> Cost {
    Cost { d: a.d + b.d, t: a.t + b.t + cost_sum(a.d, b.d) }
}

/// `max•`: maximum, or zero for an empty collection.
pub fn max_dot<I: IntoIterator<Item = u64>>(xs: I) -> u64 {
    xs.into_iter().max().unwrap_or(0)
}

/// An answer of `s` and the state right after it (`None` for ◊).
pub type Continuation = (Env, Option<State>);

/// Run `s` alone, returning its cost, its answers, and the state that
/// follows each answer-labelled transition (`None` for ◊).
pub fn answers_with_continuations(
    s: State,
    spec: &Spec,
    cfg: &EngineConfig,
) -> Result<(Cost, Vec<Continuation>), MeasureError> {
    let mut out = Vec::new();
    let stats = run_observed(s, spec, cfg, |rec| {
        if let Label::Answer(e) = &rec.transition.label {
            out.push((e.clone(), rec.transition.next.clone()));
        }
    })?;
    if stats.truncated {
        return Err(MeasureError::Truncated);
    }
    Ok((Cost { d: stats.d, t: stats.t }, out))
}

/// Per-answer parts of `s ⊗ g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    /// `⟨g, a_i⟩`
    pub task: Cost,
    /// `s'_i ⊗ g`
    pub rest: Cost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimesParts {
    pub left: Cost,
    pub branches: Vec<Branch>,
}

impl TimesParts {
    pub fn predict(&self) -> Cost {
        let mut d = self.left.d;
        let mut t = self.left.t + self.left.d;
        for b in &self.branches {
            d += b.task.d;
            t += b.task.t + cost_sum(b.task.d, b.rest.d);
        }
        Cost { d, t }
    }

    /// `d(s) + Σ d(⟨g,a_i⟩) - max• d(⟨g,a_i⟩)`
    pub fn approx_base(&self) -> u64 {
        let sum: u64 = self.branches.iter().map(|b| b.task.d).sum();
        self.left.d + sum - max_dot(self.branches.iter().map(|b| b.task.d))
    }

    /// `t(s⊗g) - t(s) - Σ t(⟨g,a_i⟩)`, the part bounded by [`approx_base`](Self::approx_base).
    pub fn residual(&self) -> u64 {
        self.left.d + self.branches.iter().map(|b| cost_sum(b.task.d, b.rest.d)).sum::<u64>()
    }
}

pub fn times_parts(
    s: State,
    g: &Arc<Goal>,
    spec: &Spec,
    cfg: &EngineConfig,
) -> Result<TimesParts, MeasureError> {
    let (left, answers) = answers_with_continuations(s, spec, cfg)?;
    let mut branches = Vec::with_capacity(answers.len());
    for (env, next) in answers {
        let task = cost(State::Leaf(g.clone(), env), spec, cfg)?;
        let rest = cost_opt(next.map(|s| State::Prod(Box::new(s), g.clone())), spec, cfg)?;
        branches.push(Branch { task, rest });
    }
    Ok(TimesParts { left, branches })
}

/// `d` of `((s0 ⊗ g1) ⊗ …) ⊗ gk` from the tasks each stage's answers feed into.
pub fn chain_d(s0: State, goals: &[Arc<Goal>], spec: &Spec, cfg: &EngineConfig) -> Result<u64, MeasureError> {
    let stats = crate::engine::run(s0, spec, cfg)?;
    if stats.truncated {
        return Err(MeasureError::Truncated);
    }
    let mut d = stats.d;
    let mut answers = stats.answers;
    for g in goals {
        let mut next = Vec::new();
        for a in answers {
            let st = crate::engine::run(State::Leaf(g.clone(), a), spec, cfg)?;
            if st.truncated {
                return Err(MeasureError::Truncated);
            }
            d += st.d;
            next.extend(st.answers);
        }
        answers = next;
    }
    Ok(d)
}
