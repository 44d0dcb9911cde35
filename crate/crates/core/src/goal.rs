//! Goals, relation definitions and programs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::term::{Slot, Sym, Term, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelId(pub u32);

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Goal {
    Unify(Term, Term),
    Conj(Arc<Goal>, Arc<Goal>),
    Disj(Arc<Goal>, Arc<Goal>),
    Fresh(Slot, Arc<Goal>),
    Invoke(RelId, Arc<[Term]>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GoalError {
    #[error("relation `{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("unknown relation id {0:?}")]
    UnknownRelation(RelId),
}

impl Goal {
    pub fn unify(a: Term, b: Term) -> Goal {
        Goal::Unify(a, b)
    }

    pub fn conj(a: Goal, b: Goal) -> Goal {
        Goal::Conj(Arc::new(a), Arc::new(b))
    }

    pub fn disj(a: Goal, b: Goal) -> Goal {
        Goal::Disj(Arc::new(a), Arc::new(b))
    }

    pub fn fresh(slot: Slot, body: Goal) -> Goal {
        Goal::Fresh(slot, Arc::new(body))
    }

    pub fn invoke(rel: RelId, args: Vec<Term>) -> Goal {
        Goal::Invoke(rel, Arc::from(args))
    }

    /// Free logic variables. Slots are syntactic and never counted.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Goal::Unify(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Goal::Conj(a, b) | Goal::Disj(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Goal::Fresh(_, g) => g.collect_vars(out),
            Goal::Invoke(_, args) => args.iter().for_each(|t| t.collect_vars(out)),
        }
    }

    /// Largest logic-variable index occurring in the goal, 0 if none.
    pub fn max_var(&self) -> u32 {
        match self {
            Goal::Unify(a, b) => a.max_var().max(b.max_var()),
            Goal::Conj(a, b) | Goal::Disj(a, b) => a.max_var().max(b.max_var()),
            Goal::Fresh(_, g) => g.max_var(),
            Goal::Invoke(_, args) => args.iter().map(Term::max_var).max().unwrap_or(0),
        }
    }

    /// Slots occurring free (not under their own `fresh`).
    pub fn free_slots(&self) -> BTreeSet<Slot> {
        fn term_slots(t: &Term, bound: &[Slot], out: &mut BTreeSet<Slot>) {
            match t {
                Term::Slot(s) if !bound.contains(s) => {
                    out.insert(s.clone());
                }
                Term::Ctor(_, args) => args.iter().for_each(|a| term_slots(a, bound, out)),
                _ => {}
            }
        }
        fn go(g: &Goal, bound: &mut Vec<Slot>, out: &mut BTreeSet<Slot>) {
            match g {
                Goal::Unify(a, b) => {
                    term_slots(a, bound, out);
                    term_slots(b, bound, out);
                }
                Goal::Conj(a, b) | Goal::Disj(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Goal::Fresh(s, body) => {
                    bound.push(s.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                Goal::Invoke(_, args) => args.iter().for_each(|t| term_slots(t, bound, out)),
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Replaces free occurrences of slots. A `fresh` that rebinds a mapped
    /// slot shadows it in its body.
    pub fn subst_slots(&self, map: &BTreeMap<Slot, Term>) -> Goal {
        if map.is_empty() {
            return self.clone();
        }
        let lookup = |s: &Slot| map.get(s).cloned();
        match self {
            Goal::Unify(a, b) => Goal::Unify(a.subst_slots(&lookup), b.subst_slots(&lookup)),
            Goal::Conj(a, b) => Goal::Conj(Arc::new(a.subst_slots(map)), Arc::new(b.subst_slots(map))),
            Goal::Disj(a, b) => Goal::Disj(Arc::new(a.subst_slots(map)), Arc::new(b.subst_slots(map))),
            Goal::Fresh(s, body) => {
                if map.contains_key(s) {
                    let mut inner = map.clone();
                    inner.remove(s);
                    Goal::Fresh(s.clone(), Arc::new(body.subst_slots(&inner)))
                } else {
                    Goal::Fresh(s.clone(), Arc::new(body.subst_slots(map)))
                }
            }
            Goal::Invoke(r, args) => {
                Goal::Invoke(*r, args.iter().map(|t| t.subst_slots(&lookup)).collect())
            }
        }
    }

    /// Replaces logic variables (single pass).
    pub fn subst_vars(&self, map: &dyn Fn(Var) -> Option<Term>) -> Goal {
        match self {
            Goal::Unify(a, b) => Goal::Unify(a.subst_vars(map), b.subst_vars(map)),
            Goal::Conj(a, b) => Goal::Conj(Arc::new(a.subst_vars(map)), Arc::new(b.subst_vars(map))),
            Goal::Disj(a, b) => Goal::Disj(Arc::new(a.subst_vars(map)), Arc::new(b.subst_vars(map))),
            Goal::Fresh(s, body) => Goal::Fresh(s.clone(), Arc::new(body.subst_vars(map))),
            Goal::Invoke(r, args) => Goal::Invoke(*r, args.iter().map(|t| t.subst_vars(map)).collect()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Goal::Unify(..) | Goal::Invoke(..) => 1,
            Goal::Conj(a, b) | Goal::Disj(a, b) => 1 + a.size() + b.size(),
            Goal::Fresh(_, g) => 1 + g.size(),
        }
    }
}

/// Result of checking a goal against the disjunctive normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnfCheck {
    pub ok: bool,
    pub diagnostic: Option<String>,
}

/// Checks membership in the DNF fragment:
///
/// ```text
/// B ::= t == t | R(t, ..)
/// C ::= B | C & B
/// F ::= C | fresh x. F
/// D ::= F | D | F
/// ```
pub fn validate_dnf(g: &Goal) -> DnfCheck {
    fn base(g: &Goal) -> Result<(), &Goal> {
        match g {
            Goal::Unify(..) | Goal::Invoke(..) => Ok(()),
            _ => Err(g),
        }
    }
    fn conj(g: &Goal) -> Result<(), &Goal> {
        match g {
            Goal::Conj(a, b) => {
                conj(a)?;
                base(b)
            }
            _ => base(g),
        }
    }
    fn fresh(g: &Goal) -> Result<(), &Goal> {
        match g {
            Goal::Fresh(_, body) => fresh(body),
            _ => conj(g),
        }
    }
    fn disj(g: &Goal) -> Result<(), &Goal> {
        match g {
            Goal::Disj(a, b) => {
                disj(a)?;
                fresh(b)
            }
            _ => fresh(g),
        }
    }
    match disj(g) {
        Ok(()) => DnfCheck { ok: true, diagnostic: None },
        Err(bad) => {
            let what = match bad {
                Goal::Disj(..) => "disjunction nested under a conjunction or in a right operand",
                Goal::Fresh(..) => "fresh nested inside a conjunction",
                Goal::Conj(..) => "conjunction in the right operand of a conjunction",
                _ => "malformed goal",
            };
            DnfCheck { ok: false, diagnostic: Some(format!("{what}: {}", Printer::plain(bad))) }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelDef {
    pub name: String,
    pub params: Vec<Slot>,
    pub body: Arc<Goal>,
}

/// A query goal whose free identifiers have been bound to logic variables.
#[derive(Debug, Clone)]
pub struct Query {
    pub goal: Arc<Goal>,
    /// Surface names of the free variables, in first-occurrence order.
    pub vars: Vec<(String, Var)>,
}

impl Query {
    pub fn var_list(&self) -> Vec<Var> {
        self.vars.iter().map(|(_, v)| *v).collect()
    }
}

/// A program: relation definitions and an optional top-level goal.
#[derive(Debug, Clone, Default)]
pub struct Spec {
    rels: Vec<RelDef>,
    by_name: HashMap<String, RelId>,
    pub(crate) ctor_arity: BTreeMap<Sym, usize>,
    pub goal: Option<Query>,
}

impl Spec {
    pub(crate) fn from_parts(
        rels: Vec<RelDef>,
        ctor_arity: BTreeMap<Sym, usize>,
        goal: Option<Query>,
    ) -> Spec {
        let by_name = rels
            .iter()
            .enumerate()
            .map(|(i, r)| (r.name.clone(), RelId(i as u32)))
            .collect();
        Spec { rels, by_name, ctor_arity, goal }
    }

    pub fn relation(&self, id: RelId) -> Option<&RelDef> {
        self.rels.get(id.0 as usize)
    }

    pub fn rel(&self, id: RelId) -> &RelDef {
        &self.rels[id.0 as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<RelId> {
        self.by_name.get(name).copied()
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelId, &RelDef)> {
        self.rels.iter().enumerate().map(|(i, r)| (RelId(i as u32), r))
    }

    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    pub fn ctor_arity(&self, sym: &Sym) -> Option<usize> {
        self.ctor_arity.get(sym).copied()
    }

    /// The body of `rel` with its parameters replaced by `args`.
    pub fn instantiate(&self, rel: RelId, args: &[Term]) -> Result<Goal, GoalError> {
        let def = self.relation(rel).ok_or(GoalError::UnknownRelation(rel))?;
        instantiate(def, args)
    }

    /// `R(_1, ..., _k)` for relation `rel`.
    pub fn template(&self, rel: RelId) -> Goal {
        let k = self.rel(rel).params.len() as u32;
        Goal::invoke(rel, (1..=k).map(Term::var).collect())
    }

    pub fn printer(&self) -> Printer<'_> {
        Printer { spec: Some(self) }
    }
}

pub fn instantiate(def: &RelDef, args: &[Term]) -> Result<Goal, GoalError> {
    if def.params.len() != args.len() {
        return Err(GoalError::Arity {
            name: def.name.clone(),
            expected: def.params.len(),
            got: args.len(),
        });
    }
    let map: BTreeMap<Slot, Term> = def.params.iter().cloned().zip(args.iter().cloned()).collect();
    Ok(def.body.subst_slots(&map))
}

/// Pretty printer for goals in the concrete program syntax.
#[derive(Clone, Copy)]
pub struct Printer<'a> {
    spec: Option<&'a Spec>,
}

impl<'a> Printer<'a> {
    /// A printer without relation names; invocations print as `rel#N`.
    pub fn detached() -> Printer<'static> {
        Printer { spec: None }
    }

    pub fn plain(g: &Goal) -> String {
        Printer { spec: None }.goal(g)
    }

    pub fn goal(&self, g: &Goal) -> String {
        let mut out = String::new();
        self.write_disj(g, &mut out);
        out
    }

    pub fn rel_name(&self, r: RelId) -> String {
        match self.spec.and_then(|s| s.relation(r)) {
            Some(def) => def.name.clone(),
            None => format!("rel#{}", r.0),
        }
    }

    pub fn invocation(&self, r: RelId, args: &[Term]) -> String {
        let args: Vec<String> = args.iter().map(|t| t.to_string()).collect();
        format!("{}({})", self.rel_name(r), args.join(", "))
    }

    fn write_disj(&self, g: &Goal, out: &mut String) {
        match g {
            Goal::Disj(a, b) => {
                self.write_disj(a, out);
                out.push_str(" | ");
                self.write_conj_or_paren(b, out);
            }
            _ => self.write_conj_or_paren(g, out),
        }
    }

    fn write_conj_or_paren(&self, g: &Goal, out: &mut String) {
        match g {
            Goal::Disj(..) => {
                out.push('(');
                self.write_disj(g, out);
                out.push(')');
            }
            _ => self.write_conj(g, out),
        }
    }

    fn write_conj(&self, g: &Goal, out: &mut String) {
        match g {
            Goal::Conj(a, b) => {
                self.write_conj(a, out);
                out.push_str(" & ");
                self.write_base(b, out);
            }
            _ => self.write_base(g, out),
        }
    }

    fn write_base(&self, g: &Goal, out: &mut String) {
        match g {
            Goal::Unify(a, b) => out.push_str(&format!("{a} == {b}")),
            Goal::Invoke(r, args) => out.push_str(&self.invocation(*r, args)),
            Goal::Fresh(..) => {
                let mut names = Vec::new();
                let mut cur = g;
                while let Goal::Fresh(s, body) = cur {
                    names.push(s.name.to_string());
                    cur = body;
                }
                out.push_str("fresh ");
                out.push_str(&names.join(", "));
                out.push_str(" { ");
                self.write_disj(cur, out);
                out.push_str(" }");
            }
            Goal::Conj(..) | Goal::Disj(..) => {
                out.push('(');
                self.write_disj(g, out);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::plain(self))
    }
}

impl fmt::Debug for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::plain(self))
    }
}
