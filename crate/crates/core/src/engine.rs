//! The labeled transition system of interleaving search, with exact
//! accounting of the number of states `d` and the scheduling factor `t`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::goal::{Goal, GoalError, Printer, Spec};
use crate::term::{Substitution, Term, TermError, UnifyOptions, Var};

pub const DEFAULT_STEP_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Goal(#[from] GoalError),
    #[error("syntactic variable `{0}` is not bound by any fresh")]
    OpenGoal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub unify: UnifyOptions,
    pub step_limit: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { unify: UnifyOptions::default(), step_limit: DEFAULT_STEP_LIMIT }
    }
}

/// Environment `(σ, n)`: substitution and allocated-variable counter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Env {
    pub subst: Substitution,
    pub counter: u32,
}

impl Env {
    pub fn new(subst: Substitution, counter: u32) -> Env {
        Env { subst, counter }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub enum State {
    Leaf(Arc<Goal>, Env),
    Sum(Box<State>, Box<State>),
    Prod(Box<State>, Arc<Goal>),
}

impl State {
    pub fn leaf(goal: Goal, env: Env) -> State {
        State::Leaf(Arc::new(goal), env)
    }

    pub fn sum(a: State, b: State) -> State {
        State::Sum(Box::new(a), Box::new(b))
    }

    pub fn prod(s: State, g: Goal) -> State {
        State::Prod(Box::new(s), Arc::new(g))
    }

    /// Height of the leftmost branch.
    pub fn lh(&self) -> usize {
        let mut h = 1;
        let mut cur = self;
        loop {
            match cur {
                State::Leaf(..) => return h,
                State::Sum(l, _) | State::Prod(l, _) => {
                    h += 1;
                    cur = l;
                }
            }
        }
    }

    /// S-expression of the state shape; leaves show their goal and counter.
    pub fn shape(&self, printer: &Printer) -> String {
        let mut out = String::new();
        self.write_shape(printer, &mut out);
        out
    }

    fn write_shape(&self, printer: &Printer, out: &mut String) {
        match self {
            State::Leaf(g, e) => {
                let _ = write!(out, "<{} @{}>", printer.goal(g), e.counter);
            }
            State::Sum(a, b) => {
                out.push_str("(+ ");
                a.write_shape(printer, out);
                out.push(' ');
                b.write_shape(printer, out);
                out.push(')');
            }
            State::Prod(s, g) => {
                out.push_str("(* ");
                s.write_shape(printer, out);
                let _ = write!(out, " {{{}}})", printer.goal(g));
            }
        }
    }

    pub fn leaves(&self) -> Vec<(&Arc<Goal>, &Env)> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(s) = stack.pop() {
            match s {
                State::Leaf(g, e) => out.push((g, e)),
                State::Sum(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                State::Prod(a, _) => stack.push(a),
            }
        }
        out
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.shape(&Printer::detached()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    Silent,
    Answer(Env),
}

impl Label {
    pub fn is_answer(&self) -> bool {
        matches!(self, Label::Answer(_))
    }
}

/// The rule applied at the root of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    UnifyFail,
    UnifySuccess,
    Fresh,
    Invoke,
    Disj,
    Conj,
    DisjStop,
    DisjStep,
    ConjStop,
    ConjStopAns,
    ConjStep,
    ConjStepAns,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub label: Label,
    /// `None` is the terminal state.
    pub next: Option<State>,
    pub rule: Rule,
    /// Leftmost height of the state the transition was taken from.
    pub lh: usize,
}

enum Frame {
    SumLeft(Box<State>),
    ProdLeft(Arc<Goal>),
}

fn step_leaf(
    goal: &Goal,
    env: Env,
    spec: &Spec,
    opts: &UnifyOptions,
) -> Result<(Label, Option<State>, Rule), EngineError> {
    Ok(match goal {
        Goal::Unify(a, b) => match env.subst.unify(a, b, opts) {
            Ok(Some(subst)) => {
                (Label::Answer(Env { subst, counter: env.counter }), None, Rule::UnifySuccess)
            }
            Ok(None) => (Label::Silent, None, Rule::UnifyFail),
            Err(TermError::UnresolvedSlot(name)) => return Err(EngineError::OpenGoal(name)),
            Err(e) => return Err(e.into()),
        },
        Goal::Fresh(slot, body) => {
            let n = env.counter + 1;
            let map = [(slot.clone(), Term::var(n))].into_iter().collect();
            let g = body.subst_slots(&map);
            (Label::Silent, Some(State::leaf(g, Env { subst: env.subst, counter: n })), Rule::Fresh)
        }
        Goal::Invoke(rel, args) => {
            if let Some(t) = args.iter().find(|t| t.has_slots()) {
                return Err(EngineError::OpenGoal(t.to_string()));
            }
            let body = spec.instantiate(*rel, args)?;
            (Label::Silent, Some(State::leaf(body, env)), Rule::Invoke)
        }
        Goal::Disj(a, b) => (
            Label::Silent,
            Some(State::sum(
                State::Leaf(a.clone(), env.clone()),
                State::Leaf(b.clone(), env),
            )),
            Rule::Disj,
        ),
        Goal::Conj(a, b) => (
            Label::Silent,
            Some(State::Prod(Box::new(State::Leaf(a.clone(), env)), b.clone())),
            Rule::Conj,
        ),
    })
}

/// One transition of the system. The state is consumed.
pub fn step(state: State, spec: &Spec, opts: &UnifyOptions) -> Result<Transition, EngineError> {
    let mut frames = Vec::new();
    let mut cur = state;
    let (goal, env) = loop {
        match cur {
            State::Leaf(g, e) => break (g, e),
            State::Sum(l, r) => {
                frames.push(Frame::SumLeft(r));
                cur = *l;
            }
            State::Prod(l, g) => {
                frames.push(Frame::ProdLeft(g));
                cur = *l;
            }
        }
    };
    let lh = frames.len() + 1;
    let (mut label, mut next, mut rule) = step_leaf(&goal, env, spec, opts)?;
    while let Some(frame) = frames.pop() {
        match frame {
            Frame::SumLeft(right) => {
                match next {
                    None => {
                        next = Some(*right);
                        rule = Rule::DisjStop;
                    }
                    Some(s) => {
                        next = Some(State::Sum(right, Box::new(s)));
                        rule = Rule::DisjStep;
                    }
                }
            }
            Frame::ProdLeft(g) => {
                let (l, n, r) = match (label, next) {
                    (Label::Silent, None) => (Label::Silent, None, Rule::ConjStop),
                    (Label::Answer(e), None) => {
                        (Label::Silent, Some(State::Leaf(g, e)), Rule::ConjStopAns)
                    }
                    (Label::Silent, Some(s)) => {
                        (Label::Silent, Some(State::Prod(Box::new(s), g)), Rule::ConjStep)
                    }
                    (Label::Answer(e), Some(s)) => (
                        Label::Silent,
                        Some(State::sum(State::Leaf(g.clone(), e), State::Prod(Box::new(s), g))),
                        Rule::ConjStepAns,
                    ),
                };
                label = l;
                next = n;
                rule = r;
            }
        }
    }
    Ok(Transition { label, next, rule, lh })
}

/// `init(g) = <g, (ε, n_init(g))>` with `n_init(g)` the largest variable index in `g`.
pub fn init(goal: Goal) -> State {
    let n = goal.max_var();
    State::leaf(goal, Env::new(Substitution::new(), n))
}

pub fn init_arc(goal: Arc<Goal>) -> State {
    let n = goal.max_var();
    State::Leaf(goal, Env::new(Substitution::new(), n))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceStats {
    /// Number of non-terminal states in the trace, the initial one included.
    pub d: u64,
    /// Sum of leftmost heights over those states.
    pub t: u64,
    pub answers: Vec<Env>,
    pub truncated: bool,
}

pub struct StepRecord<'a> {
    /// 1-based index of the state the step was taken from.
    pub index: u64,
    pub from: Option<&'a State>,
    pub transition: &'a Transition,
}

/// Runs `state` to termination or until `cfg.step_limit` states have been visited.
pub fn run(state: State, spec: &Spec, cfg: &EngineConfig) -> Result<TraceStats, EngineError> {
    run_observed(state, spec, cfg, |_| {})
}

pub fn run_observed(
    state: State,
    spec: &Spec,
    cfg: &EngineConfig,
    mut observe: impl FnMut(&StepRecord),
) -> Result<TraceStats, EngineError> {
    let mut stats = TraceStats::default();
    let mut cur = Some(state);
    while let Some(s) = cur {
        if stats.d >= cfg.step_limit {
            stats.truncated = true;
            break;
        }
        let tr = step(s, spec, &cfg.unify)?;
        stats.d += 1;
        stats.t += tr.lh as u64;
        observe(&StepRecord { index: stats.d, from: None, transition: &tr });
        if let Label::Answer(e) = &tr.label {
            stats.answers.push(e.clone());
        }
        cur = tr.next;
    }
    Ok(stats)
}

/// Like [`run`], but `observe` also sees the state each step starts from.
/// Clones every state; intended for dumps and checks, not measurement series.
pub fn run_inspect(
    state: State,
    spec: &Spec,
    cfg: &EngineConfig,
    mut observe: impl FnMut(&StepRecord),
) -> Result<TraceStats, EngineError> {
    let mut stats = TraceStats::default();
    let mut cur = Some(state);
    while let Some(s) = cur {
        if stats.d >= cfg.step_limit {
            stats.truncated = true;
            break;
        }
        let from = s.clone();
        let tr = step(s, spec, &cfg.unify)?;
        stats.d += 1;
        stats.t += tr.lh as u64;
        observe(&StepRecord { index: stats.d, from: Some(&from), transition: &tr });
        if let Label::Answer(e) = &tr.label {
            stats.answers.push(e.clone());
        }
        cur = tr.next;
    }
    Ok(stats)
}

fn leaf_well_formed(goal: &Goal, env: &Env) -> bool {
    let n = env.counter;
    goal.free_vars().iter().all(|v| v.0 >= 1 && v.0 <= n)
        && env.subst.domain().iter().all(|v| v.0 >= 1 && v.0 <= n)
        && env.subst.vran().iter().all(|v| v.0 >= 1 && v.0 <= n)
}

/// Well-formedness of states: leaves respect their counters, and the
/// pending goal of a product only mentions variables below every counter
/// of the leaves in its left state.
pub fn well_formed(state: &State) -> bool {
    match state {
        State::Leaf(g, e) => leaf_well_formed(g, e),
        State::Sum(a, b) => well_formed(a) && well_formed(b),
        State::Prod(s, g) => {
            well_formed(s) && {
                let m = g.max_var();
                s.leaves().iter().all(|(_, e)| m <= e.counter)
            }
        }
    }
}

/// Answers projected onto query variables.
pub fn reify(env: &Env, vars: &[Var]) -> Result<Vec<Term>, TermError> {
    vars.iter().map(|v| env.subst.apply(&Term::Var(*v))).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnswerReport {
    pub answers: usize,
    /// Indices of answers with a free variable left in the projection.
    pub non_ground: Vec<usize>,
    /// Pairs `(first, later)` of identical projected answers.
    pub duplicates: Vec<(usize, usize)>,
}

impl AnswerReport {
    pub fn ok(&self) -> bool {
        self.non_ground.is_empty() && self.duplicates.is_empty()
    }
}

/// Checks the groundness and uniqueness restrictions on the answers of a run.
pub fn check_answers(stats: &TraceStats, vars: &[Var]) -> Result<AnswerReport, TermError> {
    let mut report = AnswerReport { answers: stats.answers.len(), ..Default::default() };
    let mut seen: BTreeMap<Vec<Term>, usize> = BTreeMap::new();
    for (i, env) in stats.answers.iter().enumerate() {
        let tuple = reify(env, vars)?;
        if !tuple.iter().all(Term::is_ground) {
            report.non_ground.push(i);
        }
        match seen.get(&tuple) {
            Some(&first) => report.duplicates.push((first, i)),
            None => {
                seen.insert(tuple, i);
            }
        }
    }
    Ok(report)
}

/// Renders an answer as `name = term` pairs.
pub fn format_answer(env: &Env, vars: &[(String, Var)]) -> Result<String, TermError> {
    let mut parts = Vec::new();
    for (name, v) in vars {
        parts.push(format!("{name} = {}", env.subst.apply(&Term::Var(*v))?));
    }
    Ok(format!("{{{}}}", parts.join(", ")))
}

/// Writes one line per step: `step#; lh; label; state-shape`.
pub fn dump_trace(
    state: State,
    spec: &Spec,
    cfg: &EngineConfig,
    vars: &[(String, Var)],
    out: &mut dyn fmt::Write,
) -> Result<TraceStats, EngineError> {
    let printer = spec.printer();
    let mut err: Option<EngineError> = None;
    let stats = run_inspect(state, spec, cfg, |rec| {
        let label = match &rec.transition.label {
            Label::Silent => "∘".to_string(),
            Label::Answer(e) => match format_answer(e, vars) {
                Ok(s) => s,
                Err(e) => {
                    err.get_or_insert(e.into());
                    String::new()
                }
            },
        };
        let shape = rec.from.map(|s| s.shape(&printer)).unwrap_or_default();
        let _ = writeln!(out, "{}; {}; {}; {}", rec.index, rec.transition.lh, label, shape);
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(stats),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_goal, parse_program};
    use crate::term::Slot;

    fn nil() -> Term {
        Term::atom("Nil")
    }
    fn nn() -> Goal {
        Goal::unify(nil(), nil())
    }
    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn unify_success_step() {
        let spec = Spec::default();
        let tr = step(init(nn()), &spec, &UnifyOptions::default()).unwrap();
        assert_eq!(tr.label, Label::Answer(Env::default()));
        assert!(tr.next.is_none());
        assert_eq!(tr.rule, Rule::UnifySuccess);
    }

    #[test]
    fn disj_step() {
        let spec = Spec::default();
        let g = Goal::disj(nn(), Goal::unify(nil(), Term::atom("Zero")));
        let tr = step(init(g.clone()), &spec, &UnifyOptions::default()).unwrap();
        assert_eq!(tr.label, Label::Silent);
        let Goal::Disj(a, b) = g else { unreachable!() };
        assert_eq!(
            tr.next.unwrap(),
            State::sum(State::Leaf(a, Env::default()), State::Leaf(b, Env::default()))
        );
    }

    #[test]
    fn fresh_step() {
        let spec = Spec::default();
        let x = Slot::new(0, "x");
        let g = Goal::fresh(x.clone(), Goal::unify(Term::Slot(x), nil()));
        let tr = step(init(g), &spec, &UnifyOptions::default()).unwrap();
        assert_eq!(tr.label, Label::Silent);
        assert_eq!(
            tr.next.unwrap(),
            State::leaf(Goal::unify(Term::var(1), nil()), Env::new(Substitution::new(), 1))
        );
    }

    #[test]
    fn leftmost_height() {
        let leaf = || State::leaf(nn(), Env::default());
        assert_eq!(leaf().lh(), 1);
        assert_eq!(State::sum(leaf(), leaf()).lh(), 2);
        assert_eq!(State::prod(State::sum(leaf(), leaf()), nn()).lh(), 3);
    }

    #[test]
    fn init_counter() {
        assert_eq!(init(nn()), State::leaf(nn(), Env::default()));
        let State::Leaf(_, e) = init(Goal::unify(Term::var(3), nil())) else { unreachable!() };
        assert_eq!(e.counter, 3);
        let spec = parse_program("rel appendo(a, b, ab) { a == Nil & ab == b }").unwrap();
        let rel = spec.lookup("appendo").unwrap();
        let State::Leaf(_, e) = init(spec.template(rel)) else { unreachable!() };
        assert_eq!(e.counter, 3);
    }

    #[test]
    fn small_runs() {
        let spec = Spec::default();
        let s = run(init(nn()), &spec, &cfg()).unwrap();
        assert_eq!((s.d, s.t, s.answers.len()), (1, 1, 1));
        let s = run(init(Goal::disj(nn(), nn())), &spec, &cfg()).unwrap();
        assert_eq!((s.d, s.t, s.answers.len()), (3, 4, 2));
        let s = run(init(Goal::conj(nn(), nn())), &spec, &cfg()).unwrap();
        assert_eq!((s.d, s.t, s.answers.len()), (3, 4, 1));
        assert!(!s.truncated);
    }

    #[test]
    fn step_limit_truncates() {
        let spec = parse_program("rel loop(x) { loop(x) }").unwrap();
        let q = parse_goal("loop(a)", &spec).unwrap();
        let cfg = EngineConfig { step_limit: 50, ..cfg() };
        let s = run(init_arc(q.goal), &spec, &cfg).unwrap();
        assert!(s.truncated);
        assert_eq!(s.d, 50);
    }

    #[test]
    fn well_formedness() {
        assert!(well_formed(&State::leaf(
            Goal::unify(Term::var(1), nil()),
            Env::new(Substitution::new(), 1)
        )));
        assert!(!well_formed(&State::leaf(
            Goal::unify(Term::var(2), nil()),
            Env::new(Substitution::new(), 1)
        )));
        let leaf = State::leaf(nn(), Env::new(Substitution::new(), 1));
        assert!(!well_formed(&State::prod(leaf, Goal::unify(Term::var(2), nil()))));
    }

    #[test]
    fn answer_checks() {
        let spec = Spec::default();
        let q = Goal::unify(Term::var(1), Term::var(2));
        let stats = run(init(q), &spec, &cfg()).unwrap();
        let report = check_answers(&stats, &[Var(1), Var(2)]).unwrap();
        assert_eq!(report.non_ground, vec![0]);

        let stats = run(init(Goal::disj(nn(), nn())), &spec, &cfg()).unwrap();
        let report = check_answers(&stats, &[]).unwrap();
        assert_eq!(report.duplicates, vec![(0, 1)]);
        assert!(!report.ok());
    }

    #[test]
    fn trace_dump_lines() {
        let spec = Spec::default();
        let mut out = String::new();
        dump_trace(init(Goal::disj(nn(), nn())), &spec, &cfg(), &[], &mut out).unwrap();
        let expected = "\
1; 1; ∘; <Nil == Nil | Nil == Nil @0>
2; 2; {}; (+ <Nil == Nil @0> <Nil == Nil @0>)
3; 1; {}; <Nil == Nil @0>
";
        assert_eq!(out, expected);
    }
}
