//! Symbolic execution schemes.
//!
//! A scheme records, for one relation body and one set of grounded
//! variables, which equalities and calls run in which order, which
//! variables are known to be ground at each point, and the constraints a
//! concrete valuation must satisfy for execution to continue past a node.

use crate::goal::{Goal, RelId, Spec};
use crate::term::{self, Substitution, Term, TermError, UnifyOptions, Var};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

pub type VarSet = BTreeSet<Var>;

/// `x = t`, to be read as `ρ'(x) = t ρ'`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Constraint {
    pub var: Var,
    #[serde(serialize_with = "ser_display")]
    pub term: Term,
}

fn ser_display<S: serde::Serializer, T: std::fmt::Display>(t: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(t)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scheme {
    UnifyLeaf {
        t1: Term,
        t2: Term,
        grounded: VarSet,
        /// The terms do not unify and there were goals left to run.
        dead: bool,
    },
    InvokeLeaf {
        rel: RelId,
        args: Vec<Term>,
        grounded: VarSet,
    },
    UnifyNode {
        t1: Term,
        t2: Term,
        grounded: VarSet,
        constraints: Vec<Constraint>,
        child: Box<Scheme>,
    },
    InvokeNode {
        rel: RelId,
        args: Vec<Term>,
        grounded: VarSet,
        child: Box<Scheme>,
    },
    Fork {
        left: Box<Scheme>,
        right: Box<Scheme>,
        grounded: VarSet,
    },
}

impl Scheme {
    pub fn grounded(&self) -> &VarSet {
        match self {
            Scheme::UnifyLeaf { grounded, .. }
            | Scheme::InvokeLeaf { grounded, .. }
            | Scheme::UnifyNode { grounded, .. }
            | Scheme::InvokeNode { grounded, .. }
            | Scheme::Fork { grounded, .. } => grounded,
        }
    }

    pub fn children(&self) -> Vec<&Scheme> {
        match self {
            Scheme::UnifyLeaf { .. } | Scheme::InvokeLeaf { .. } => vec![],
            Scheme::UnifyNode { child, .. } | Scheme::InvokeNode { child, .. } => vec![child],
            Scheme::Fork { left, right, .. } => vec![left, right],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Grounded sets never shrink from a node to its children, forks pass
    /// theirs on unchanged, and constraint terms only mention variables
    /// grounded at the child.
    pub fn check_invariants(&self) -> Result<(), String> {
        let v = self.grounded();
        match self {
            Scheme::Fork { left, right, .. } => {
                if left.grounded() != v || right.grounded() != v {
                    return Err("fork children carry a different grounded set".into());
                }
            }
            Scheme::UnifyNode { constraints, child, .. } => {
                let u = child.grounded();
                for c in constraints {
                    if !u.contains(&c.var) || !c.term.free_vars().is_subset(u) {
                        return Err(format!("constraint {} = {} mentions a free variable", c.var, c.term));
                    }
                }
            }
            _ => {}
        }
        for c in self.children() {
            if !v.is_subset(c.grounded()) {
                return Err("grounded set shrinks along an edge".into());
            }
            c.check_invariants()?;
        }
        Ok(())
    }
}

/// Closes `u` under `x ∈ U ⇒ FV(δ(x)) ⊆ U`.
pub fn upd(u: &VarSet, delta: &Substitution) -> VarSet {
    let mut out = u.clone();
    let mut work: Vec<Var> = out.iter().copied().collect();
    while let Some(x) = work.pop() {
        if let Some(t) = delta.get(x) {
            for y in t.free_vars() {
                if out.insert(y) {
                    work.push(y);
                }
            }
        }
    }
    out
}

/// `{ x = δ(x) | x ∈ U ∩ Dom δ }`
pub fn constr(delta: &Substitution, u: &VarSet) -> Vec<Constraint> {
    delta
        .iter()
        .filter(|(x, _)| u.contains(x))
        .map(|(x, t)| Constraint { var: *x, term: t.clone() })
        .collect()
}

fn scheme_opts() -> UnifyOptions {
    UnifyOptions::with_occurs_check(true)
}

/// Display names for the variables a scheme mentions.
pub type Names = BTreeMap<Var, String>;

struct Builder<'a> {
    spec: &'a Spec,
    names: Names,
}

impl Builder<'_> {
    fn name_fresh(&mut self, v: Var, base: &str) {
        let taken = |n: &str| self.names.iter().any(|(w, m)| *w != v && m == n);
        let mut name = base.to_string();
        let mut i = 1;
        while taken(&name) {
            name = format!("{base}_{i}");
            i += 1;
        }
        self.names.insert(v, name);
    }

    fn build(
        &mut self,
        g: &Goal,
        deferred: &[Arc<Goal>],
        sigma: &Substitution,
        n: u32,
        v: &VarSet,
    ) -> Result<Scheme, SchemeError> {
        match g {
            Goal::Conj(g1, g2) => {
                let mut d = Vec::with_capacity(deferred.len() + 1);
                d.push(g2.clone());
                d.extend_from_slice(deferred);
                self.build(g1, &d, sigma, n, v)
            }
            Goal::Disj(g1, g2) => {
                let left = self.build(g1, deferred, sigma, n, v)?;
                let right = self.build(g2, deferred, sigma, n, v)?;
                Ok(Scheme::Fork { left: Box::new(left), right: Box::new(right), grounded: v.clone() })
            }
            Goal::Fresh(slot, body) => {
                let var = Var(n + 1);
                self.name_fresh(var, &slot.name);
                let map = [(slot.clone(), Term::Var(var))].into_iter().collect();
                self.build(&body.subst_slots(&map), deferred, sigma, n + 1, v)
            }
            Goal::Unify(a, b) => {
                let t1 = sigma.apply(a)?;
                let t2 = sigma.apply(b)?;
                let Some((next, rest)) = deferred.split_first() else {
                    return Ok(Scheme::UnifyLeaf { t1, t2, grounded: v.clone(), dead: false });
                };
                match term::unify_with(&t1, &t2, &scheme_opts())? {
                    None => Ok(Scheme::UnifyLeaf { t1, t2, grounded: v.clone(), dead: true }),
                    Some(delta) => {
                        let u = upd(v, &delta);
                        let constraints = constr(&delta, &u);
                        let sigma2 = term::compose(sigma, &delta)?;
                        let child = self.build(next, rest, &sigma2, n, &u)?;
                        Ok(Scheme::UnifyNode { t1, t2, grounded: v.clone(), constraints, child: Box::new(child) })
                    }
                }
            }
            Goal::Invoke(rel, args) => {
                self.spec.relation(*rel).ok_or(SchemeError::UnknownRelation(*rel))?;
                let args = args.iter().map(|t| sigma.apply(t)).collect::<Result<Vec<_>, _>>()?;
                let Some((next, rest)) = deferred.split_first() else {
                    return Ok(Scheme::InvokeLeaf { rel: *rel, args, grounded: v.clone() });
                };
                let mut u = v.clone();
                for t in &args {
                    t.collect_vars(&mut u);
                }
                let child = self.build(next, rest, sigma, n, &u)?;
                Ok(Scheme::InvokeNode { rel: *rel, args, grounded: v.clone(), child: Box::new(child) })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemeError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("unknown relation {0:?}")]
    UnknownRelation(RelId),
    #[error("relation {0} has no parameter named {1}")]
    UnknownParam(String, String),
    #[error("no relation named {0}")]
    UnknownName(String),
}

/// Builds the scheme of `g` from environment `(σ, n)` with grounded set `v`.
pub fn build_scheme(
    g: &Goal,
    deferred: &[Arc<Goal>],
    sigma: &Substitution,
    n: u32,
    v: &VarSet,
    spec: &Spec,
) -> Result<Scheme, SchemeError> {
    Builder { spec, names: Names::new() }.build(g, deferred, sigma, n, v)
}

/// The scheme of a relation body, with parameters bound to `_1.._k`.
#[derive(Debug, Clone)]
pub struct RelScheme {
    pub rel: RelId,
    pub params: Vec<Var>,
    pub grounded: VarSet,
    /// The body with parameters instantiated; the goal the scheme describes.
    pub body: Goal,
    pub scheme: Scheme,
    pub names: Names,
}

pub fn relation_scheme(spec: &Spec, rel: RelId, grounded: &[&str]) -> Result<RelScheme, SchemeError> {
    let def = spec.relation(rel).ok_or(SchemeError::UnknownRelation(rel))?;
    let k = def.params.len() as u32;
    let params: Vec<Var> = (1..=k).map(Var).collect();
    let mut names = Names::new();
    for (p, v) in def.params.iter().zip(&params) {
        names.insert(*v, p.name.to_string());
    }
    let mut v = VarSet::new();
    for g in grounded {
        let i = def
            .params
            .iter()
            .position(|p| &*p.name == *g)
            .ok_or_else(|| SchemeError::UnknownParam(def.name.clone(), g.to_string()))?;
        v.insert(params[i]);
    }
    let body = spec.instantiate(rel, &params.iter().map(|v| Term::Var(*v)).collect::<Vec<_>>())
        .expect("arity matches by construction");
    let mut b = Builder { spec, names };
    let scheme = b.build(&body, &[], &Substitution::new(), k, &v)?;
    Ok(RelScheme { rel, params, grounded: v, body, scheme, names: b.names })
}

pub fn relation_scheme_by_name(spec: &Spec, name: &str, grounded: &[&str]) -> Result<RelScheme, SchemeError> {
    let rel = spec.lookup(name).ok_or_else(|| SchemeError::UnknownName(name.to_string()))?;
    relation_scheme(spec, rel, grounded)
}

// ---- rendering ----

struct Render<'a> {
    spec: &'a Spec,
    names: &'a Names,
}

fn overline(s: &str) -> String {
    s.chars().flat_map(|c| [c, '\u{0305}']).collect()
}

impl Render<'_> {
    fn var(&self, v: Var, grounded: Option<&VarSet>) -> String {
        let name = self.names.get(&v).cloned().unwrap_or_else(|| v.to_string());
        match grounded {
            Some(g) if g.contains(&v) => overline(&name),
            _ => name,
        }
    }

    fn term(&self, t: &Term, grounded: Option<&VarSet>) -> String {
        match t {
            Term::Var(v) => self.var(*v, grounded),
            Term::Slot(s) => s.name.to_string(),
            Term::Ctor(f, args) if args.is_empty() => f.to_string(),
            Term::Ctor(f, args) => {
                let parts: Vec<String> = args.iter().map(|a| self.term(a, grounded)).collect();
                format!("{f}({})", parts.join(", "))
            }
        }
    }

    fn call(&self, rel: RelId, args: &[Term], grounded: Option<&VarSet>) -> String {
        let parts: Vec<String> = args.iter().map(|a| self.term(a, grounded)).collect();
        format!("{}({})", self.spec.printer().rel_name(rel), parts.join(", "))
    }

    fn node_label(&self, s: &Scheme) -> String {
        let g = Some(s.grounded());
        match s {
            Scheme::UnifyLeaf { t1, t2, dead, .. } => {
                let mark = if *dead { "  (fails)" } else { "" };
                format!("{} == {}{mark}", self.term(t1, g), self.term(t2, g))
            }
            Scheme::UnifyNode { t1, t2, .. } => format!("{} == {}", self.term(t1, g), self.term(t2, g)),
            Scheme::InvokeLeaf { rel, args, .. } | Scheme::InvokeNode { rel, args, .. } => {
                self.call(*rel, args, g)
            }
            Scheme::Fork { .. } => "fork".to_string(),
        }
    }

    fn edge_label(&self, s: &Scheme) -> Option<String> {
        match s {
            Scheme::UnifyNode { constraints, .. } => {
                let parts: Vec<String> = constraints
                    .iter()
                    .map(|c| format!("{} = {}", self.var(c.var, None), self.term(&c.term, None)))
                    .collect();
                Some(if parts.is_empty() { "true".to_string() } else { parts.join(", ") })
            }
            Scheme::InvokeNode { rel, args, .. } => {
                let parts: Vec<String> = args.iter().map(|a| self.term(a, None)).collect();
                Some(format!("({}) in [[{}]]", parts.join(", "), self.spec.printer().rel_name(*rel)))
            }
            _ => None,
        }
    }

    fn text(&self, s: &Scheme, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let _ = writeln!(out, "{pad}{}", self.node_label(s));
        if let Some(e) = self.edge_label(s) {
            let _ = writeln!(out, "{pad}  -- {e} -->");
        }
        for c in s.children() {
            self.text(c, depth + if matches!(s, Scheme::Fork { .. }) { 1 } else { 2 }, out);
        }
    }

    fn dot(&self, s: &Scheme, next_id: &mut usize, out: &mut String) -> usize {
        let id = *next_id;
        *next_id += 1;
        let shape = match s {
            Scheme::Fork { .. } => "point",
            Scheme::InvokeLeaf { .. } | Scheme::InvokeNode { .. } => "box",
            _ => "ellipse",
        };
        let label = if matches!(s, Scheme::Fork { .. }) { String::new() } else { self.node_label(s) };
        let _ = writeln!(out, "  n{id} [shape={shape}, label=\"{}\"];", escape(&label));
        let edge = self.edge_label(s);
        for c in s.children() {
            let cid = self.dot(c, next_id, out);
            match &edge {
                Some(e) => {
                    let _ = writeln!(out, "  n{id} -> n{cid} [label=\"{}\"];", escape(e));
                }
                None => {
                    let _ = writeln!(out, "  n{id} -> n{cid};");
                }
            }
        }
        id
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl RelScheme {
    fn renderer<'a>(&'a self, spec: &'a Spec) -> Render<'a> {
        Render { spec, names: &self.names }
    }

    fn header(&self, spec: &Spec) -> String {
        let r = self.renderer(spec);
        let params: Vec<Term> = self.params.iter().map(|v| Term::Var(*v)).collect();
        let grounded: Vec<String> = self.grounded.iter().map(|v| r.var(*v, None)).collect();
        format!("{}  [V: {}]", r.call(self.rel, &params, None), grounded.join(", "))
    }

    /// Indented text. Variables grounded at a node are overlined there.
    pub fn render_text(&self, spec: &Spec) -> String {
        let mut out = self.header(spec);
        out.push('\n');
        self.renderer(spec).text(&self.scheme, 1, &mut out);
        out
    }

    pub fn render_dot(&self, spec: &Spec) -> String {
        let mut out = String::from("digraph scheme {\n");
        let _ = writeln!(out, "  label=\"{}\";", escape(&self.header(spec)));
        let _ = writeln!(out, "  node [fontname=\"monospace\"];");
        let mut id = 0;
        self.renderer(spec).dot(&self.scheme, &mut id, &mut out);
        out.push_str("}\n");
        out
    }

    pub fn var_name(&self, v: Var) -> String {
        self.names.get(&v).cloned().unwrap_or_else(|| v.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::programs;

    fn set(vs: &[u32]) -> VarSet {
        vs.iter().map(|&i| Var(i)).collect()
    }

    #[test]
    fn upd_examples() {
        assert_eq!(upd(&set(&[1]), &Substitution::new()), set(&[1]));
        let d = Substitution::from_pairs([(Var(1), Term::ctor("Cons", vec![Term::var(2), Term::var(3)]))]);
        assert_eq!(upd(&set(&[1]), &d), set(&[1, 2, 3]));
        let d = Substitution::from_pairs([(Var(2), Term::var(1))]);
        assert_eq!(upd(&set(&[1]), &d), set(&[1]));
    }

    #[test]
    fn upd_is_transitive() {
        let d = Substitution::from_pairs([
            (Var(1), Term::ctor("S", vec![Term::var(2)])),
            (Var(2), Term::ctor("S", vec![Term::var(3)])),
        ]);
        assert_eq!(upd(&set(&[1]), &d), set(&[1, 2, 3]));
    }

    #[test]
    fn constr_examples() {
        let d = Substitution::from_pairs([(Var(1), Term::atom("Nil"))]);
        assert_eq!(constr(&d, &set(&[1])), vec![Constraint { var: Var(1), term: Term::atom("Nil") }]);
        let d = Substitution::from_pairs([(Var(2), Term::atom("Nil"))]);
        assert!(constr(&d, &set(&[1])).is_empty());
    }

    #[test]
    fn single_equality_is_a_leaf() {
        let spec = programs::append();
        let g = Goal::unify(Term::var(1), Term::atom("Nil"));
        let s = build_scheme(&g, &[], &Substitution::new(), 1, &set(&[1]), &spec).unwrap();
        assert!(matches!(s, Scheme::UnifyLeaf { dead: false, .. }));
        assert_eq!(s.node_count(), 1);
    }

    #[test]
    fn appendo_shape() {
        let spec = programs::append();
        let rs = relation_scheme_by_name(&spec, "appendo", &["a", "b"]).unwrap();
        rs.scheme.check_invariants().unwrap();
        let Scheme::Fork { left, right, .. } = &rs.scheme else { panic!("root is not a fork") };
        let Scheme::UnifyNode { constraints, child, .. } = left.as_ref() else { panic!() };
        assert_eq!(constraints, &vec![Constraint { var: Var(1), term: Term::atom("Nil") }]);
        assert!(matches!(child.as_ref(), Scheme::UnifyLeaf { dead: false, .. }));
        let Scheme::UnifyNode { constraints, child, .. } = right.as_ref() else { panic!() };
        assert_eq!(constraints.len(), 1);
        assert_eq!(rs.var_name(constraints[0].var), "a");
        let Scheme::InvokeNode { child, grounded, .. } = child.as_ref() else { panic!() };
        assert_eq!(grounded.len(), 4); // a, b, h, t
        let Scheme::UnifyLeaf { grounded, .. } = child.as_ref() else { panic!() };
        assert_eq!(grounded.len(), 5); // plus tb
    }

    #[test]
    fn appendo_opt_recursion_is_a_leaf() {
        let spec = programs::append();
        let rs = relation_scheme_by_name(&spec, "appendo_opt", &["a", "b"]).unwrap();
        let Scheme::Fork { right, .. } = &rs.scheme else { panic!() };
        let Scheme::UnifyNode { child, .. } = right.as_ref() else { panic!() };
        let Scheme::UnifyNode { child, .. } = child.as_ref() else { panic!() };
        assert!(matches!(child.as_ref(), Scheme::InvokeLeaf { .. }));
    }

    #[test]
    fn dead_branch_is_kept() {
        let spec = programs::append();
        let g = Goal::conj(
            Goal::unify(Term::atom("Nil"), Term::atom("Zero")),
            Goal::unify(Term::var(1), Term::atom("Nil")),
        );
        let s = build_scheme(&g, &[], &Substitution::new(), 1, &VarSet::new(), &spec).unwrap();
        assert!(matches!(s, Scheme::UnifyLeaf { dead: true, .. }));
    }

    #[test]
    fn render_marks_grounded_variables() {
        let spec = programs::append();
        let rs = relation_scheme_by_name(&spec, "appendo", &["a", "b"]).unwrap();
        let text = rs.render_text(&spec);
        assert!(text.starts_with("appendo(a, b, ab)  [V: a, b]\n"));
        assert!(text.contains(&format!("ab == {}", overline("b"))));
        let dot = rs.render_dot(&spec);
        assert!(dot.starts_with("digraph scheme {"));
        assert_eq!(dot.matches("->").count(), rs.scheme.node_count() - 1);
    }

    #[test]
    fn single_leaf_dot_is_one_node() {
        let spec = programs::append();
        let rs = RelScheme {
            rel: RelId(0),
            params: vec![],
            grounded: VarSet::new(),
            body: Goal::unify(Term::atom("Nil"), Term::atom("Nil")),
            scheme: Scheme::UnifyLeaf {
                t1: Term::atom("Nil"),
                t2: Term::atom("Nil"),
                grounded: VarSet::new(),
                dead: false,
            },
            names: Names::new(),
        };
        let dot = rs.render_dot(&spec);
        assert_eq!(dot.matches("[shape=").count(), 1);
        assert!(!dot.contains("->"));
    }
}
