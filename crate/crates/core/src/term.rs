//! Terms over logic variables, triangular substitutions and syntactic unification.
//!
//! Logic variables are identified by a positive index (`_1`, `_2`, ...). Terms
//! inside relation bodies may additionally contain [`Slot`]s: placeholders for
//! syntactic variables that are replaced by logic terms when a body is
//! instantiated or a `fresh` binder is executed. Slots never reach the
//! substitution.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use im::OrdMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on resolution depth and unification work.
pub const DEFAULT_DEPTH_LIMIT: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("substitution is cyclic (resolution exceeded depth {0})")]
    Cyclic(usize),
    #[error("syntactic variable `{0}` reached unification unresolved")]
    UnresolvedSlot(String),
    #[error("renaming is not injective: {0} and {1} both map to {2}")]
    NonInjective(Var, Var, Var),
}

/// A logic variable; the index `i` of `α_i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var(pub u32);

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_{}", self.0)
    }
}

/// An interned constructor symbol.
#[derive(Clone)]
pub struct Sym(Arc<str>);

fn interner() -> &'static Mutex<HashSet<Arc<str>>> {
    static TABLE: OnceLock<Mutex<HashSet<Arc<str>>>> = OnceLock::new();
    TABLE.get_or_init(Default::default)
}

impl Sym {
    pub fn new(name: &str) -> Sym {
        let mut table = interner().lock().expect("symbol table poisoned");
        if let Some(s) = table.get(name) {
            return Sym(s.clone());
        }
        let s: Arc<str> = Arc::from(name);
        table.insert(s.clone());
        Sym(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl PartialEq for Sym {
    fn eq(&self, other: &Sym) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Sym {}

impl std::hash::Hash for Sym {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Sym) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Sym {
    fn cmp(&self, other: &Sym) -> std::cmp::Ordering {
        self.0.cmp(&other.0)
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A syntactic variable slot. Identity is the numeric id; the name is kept
/// for printing only.
#[derive(Clone)]
pub struct Slot {
    pub id: u32,
    pub name: Arc<str>,
}

impl Slot {
    pub fn new(id: u32, name: &str) -> Slot {
        Slot { id, name: Arc::from(name) }
    }
}

impl PartialEq for Slot {
    fn eq(&self, other: &Slot) -> bool {
        self.id == other.id
    }
}

impl Eq for Slot {}

impl std::hash::Hash for Slot {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl PartialOrd for Slot {
    fn partial_cmp(&self, other: &Slot) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Slot {
    fn cmp(&self, other: &Slot) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Debug for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Slot(Slot),
    Ctor(Sym, Arc<[Term]>),
}

impl Term {
    pub fn var(i: u32) -> Term {
        Term::Var(Var(i))
    }

    pub fn atom(name: &str) -> Term {
        Term::Ctor(Sym::new(name), Arc::from(Vec::new()))
    }

    pub fn ctor(name: &str, args: Vec<Term>) -> Term {
        Term::Ctor(Sym::new(name), Arc::from(args))
    }

    /// `Cons(x1, Cons(x2, ... Nil))`.
    pub fn list<I: IntoIterator<Item = Term>>(items: I) -> Term
    where
        I::IntoIter: DoubleEndedIterator,
    {
        items
            .into_iter()
            .rev()
            .fold(Term::atom("Nil"), |tail, head| Term::ctor("Cons", vec![head, tail]))
    }

    /// Peano numeral `S(S(...O))`.
    pub fn peano(n: usize) -> Term {
        (0..n).fold(Term::atom("O"), |acc, _| Term::ctor("S", vec![acc]))
    }

    pub fn as_var(&self) -> Option<Var> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(*v);
            }
            Term::Slot(_) => {}
            Term::Ctor(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) | Term::Slot(_) => false,
            Term::Ctor(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn has_slots(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Slot(_) => true,
            Term::Ctor(_, args) => args.iter().any(Term::has_slots),
        }
    }

    pub fn max_var(&self) -> u32 {
        match self {
            Term::Var(v) => v.0,
            Term::Slot(_) => 0,
            Term::Ctor(_, args) => args.iter().map(Term::max_var).max().unwrap_or(0),
        }
    }

    pub fn occurs(&self, v: Var) -> bool {
        match self {
            Term::Var(w) => *w == v,
            Term::Slot(_) => false,
            Term::Ctor(_, args) => args.iter().any(|a| a.occurs(v)),
        }
    }

    /// Replaces slots according to `map`; unmapped slots are kept.
    pub fn subst_slots(&self, map: &dyn Fn(&Slot) -> Option<Term>) -> Term {
        match self {
            Term::Slot(s) => map(s).unwrap_or_else(|| self.clone()),
            Term::Var(_) => self.clone(),
            Term::Ctor(f, args) => {
                if !args.iter().any(Term::has_slots) {
                    return self.clone();
                }
                Term::Ctor(f.clone(), args.iter().map(|a| a.subst_slots(map)).collect())
            }
        }
    }

    /// Replaces logic variables by terms; unmapped variables are kept.
    /// Single pass, no resolution through the result.
    pub fn subst_vars(&self, map: &dyn Fn(Var) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => map(*v).unwrap_or_else(|| self.clone()),
            Term::Slot(_) => self.clone(),
            Term::Ctor(f, args) => {
                Term::Ctor(f.clone(), args.iter().map(|a| a.subst_vars(map)).collect())
            }
        }
    }

    /// Number of constructor nodes along the `Cons` spine, or nesting of `S`.
    pub fn size(&self) -> usize {
        match self {
            Term::Ctor(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Slot(s) => write!(f, "{}", s.name),
            Term::Ctor(c, args) if args.is_empty() => write!(f, "{c}"),
            Term::Ctor(c, args) => {
                write!(f, "{c}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnifyOptions {
    pub occurs_check: bool,
    pub depth_limit: usize,
}

impl Default for UnifyOptions {
    fn default() -> Self {
        UnifyOptions { occurs_check: false, depth_limit: DEFAULT_DEPTH_LIMIT }
    }
}

impl UnifyOptions {
    pub fn with_occurs_check(occurs_check: bool) -> Self {
        UnifyOptions { occurs_check, ..Default::default() }
    }
}

/// A triangular substitution: bindings may mention other bound variables and
/// are resolved on demand by [`Substitution::walk`] and [`Substitution::apply`].
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Substitution {
    bindings: OrdMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Var, Term)>>(pairs: I) -> Substitution {
        Substitution { bindings: pairs.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, v: Var) -> Option<&Term> {
        self.bindings.get(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    /// Adds a binding. The caller guarantees `v` is unbound.
    pub fn bind(&mut self, v: Var, t: Term) {
        self.bindings.insert(v, t);
    }

    pub fn domain(&self) -> BTreeSet<Var> {
        self.bindings.keys().copied().collect()
    }

    /// Free variables of the image (unresolved, as stored).
    pub fn vran(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for t in self.bindings.values() {
            t.collect_vars(&mut out);
        }
        out
    }

    /// Follows variable bindings at the top of `t` until an unbound variable
    /// or a constructor is reached.
    pub fn walk(&self, t: &Term) -> Result<Term, TermError> {
        let mut cur = t;
        let mut hops = 0usize;
        while let Term::Var(v) = cur {
            match self.bindings.get(v) {
                Some(next) => {
                    hops += 1;
                    if hops > self.bindings.len() {
                        return Err(TermError::Cyclic(hops));
                    }
                    cur = next;
                }
                None => break,
            }
        }
        Ok(cur.clone())
    }

    pub fn apply(&self, t: &Term) -> Result<Term, TermError> {
        self.apply_limited(t, DEFAULT_DEPTH_LIMIT)
    }

    /// Full resolution of `t`. Nesting depth beyond `limit` is reported as a
    /// cyclic substitution.
    pub fn apply_limited(&self, t: &Term, limit: usize) -> Result<Term, TermError> {
        if self.bindings.is_empty() {
            return Ok(t.clone());
        }
        enum Work {
            Visit(Term, usize),
            Build(Sym, usize),
        }
        let mut work = vec![Work::Visit(t.clone(), 0)];
        let mut out: Vec<Term> = Vec::new();
        while let Some(item) = work.pop() {
            match item {
                Work::Visit(t, depth) => {
                    if depth > limit {
                        return Err(TermError::Cyclic(limit));
                    }
                    match self.walk(&t)? {
                        Term::Ctor(f, args) if !args.is_empty() => {
                            work.push(Work::Build(f, args.len()));
                            for a in args.iter().rev() {
                                work.push(Work::Visit(a.clone(), depth + 1));
                            }
                        }
                        other => out.push(other),
                    }
                }
                Work::Build(f, n) => {
                    let args = out.split_off(out.len() - n);
                    out.push(Term::Ctor(f, Arc::from(args)));
                }
            }
        }
        Ok(out.pop().expect("apply produced no term"))
    }

    /// Idempotent form: every binding fully resolved, identity bindings dropped.
    pub fn resolved(&self) -> Result<Substitution, TermError> {
        let mut bindings = OrdMap::new();
        for (v, _) in self.bindings.iter() {
            let t = self.apply(&Term::Var(*v))?;
            if t != Term::Var(*v) {
                bindings.insert(*v, t);
            }
        }
        Ok(Substitution { bindings })
    }

    fn occurs_in(&self, v: Var, t: &Term, limit: usize) -> Result<bool, TermError> {
        let mut stack = vec![(t.clone(), 0usize)];
        while let Some((t, depth)) = stack.pop() {
            if depth > limit {
                return Err(TermError::Cyclic(limit));
            }
            match self.walk(&t)? {
                Term::Var(w) => {
                    if w == v {
                        return Ok(true);
                    }
                }
                Term::Ctor(_, args) => stack.extend(args.iter().map(|a| (a.clone(), depth + 1))),
                Term::Slot(_) => {}
            }
        }
        Ok(false)
    }

    /// Unifies `t1` and `t2` under this substitution, returning the extended
    /// substitution, or `None` when the terms do not unify.
    pub fn unify(
        &self,
        t1: &Term,
        t2: &Term,
        opts: &UnifyOptions,
    ) -> Result<Option<Substitution>, TermError> {
        let mut s = self.clone();
        let mut stack = vec![(t1.clone(), t2.clone())];
        let mut work = 0usize;
        while let Some((a, b)) = stack.pop() {
            work += 1;
            if work > opts.depth_limit {
                return Err(TermError::Cyclic(opts.depth_limit));
            }
            let a = s.walk(&a)?;
            let b = s.walk(&b)?;
            match (a, b) {
                (Term::Slot(x), _) | (_, Term::Slot(x)) => {
                    return Err(TermError::UnresolvedSlot(x.name.to_string()))
                }
                (Term::Var(x), Term::Var(y)) if x == y => {}
                (Term::Var(x), t) | (t, Term::Var(x)) => {
                    if opts.occurs_check && s.occurs_in(x, &t, opts.depth_limit)? {
                        return Ok(None);
                    }
                    s.bind(x, t);
                }
                (Term::Ctor(f, xs), Term::Ctor(g, ys)) => {
                    if f != g || xs.len() != ys.len() {
                        return Ok(None);
                    }
                    if Arc::ptr_eq(&xs, &ys) {
                        continue;
                    }
                    for (x, y) in xs.iter().zip(ys.iter()).rev() {
                        stack.push((x.clone(), y.clone()));
                    }
                }
            }
        }
        Ok(Some(s))
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} -> {t}")?;
        }
        f.write_str("}")
    }
}

/// Most general unifier of `t1` and `t2`, in idempotent form.
pub fn unify(t1: &Term, t2: &Term, occurs_check: bool) -> Result<Option<Substitution>, TermError> {
    unify_with(t1, t2, &UnifyOptions::with_occurs_check(occurs_check))
}

pub fn unify_with(
    t1: &Term,
    t2: &Term,
    opts: &UnifyOptions,
) -> Result<Option<Substitution>, TermError> {
    match Substitution::new().unify(t1, t2, opts)? {
        Some(s) => s.resolved().map(Some),
        None => Ok(None),
    }
}

/// Composition "σ first, then δ": `apply(compose(σ, δ), t) = apply(δ, apply(σ, t))`.
///
/// Under full resolution the law needs `VRan(δ) ∩ Dom(σ) = ∅`, which holds
/// whenever `δ` unifies terms that `σ` has already been applied to.
pub fn compose(sigma: &Substitution, delta: &Substitution) -> Result<Substitution, TermError> {
    let mut bindings = OrdMap::new();
    let vars = sigma.bindings.keys().chain(delta.bindings.keys()).copied();
    for v in vars {
        if bindings.contains_key(&v) {
            continue;
        }
        let t = delta.apply(&sigma.apply(&Term::Var(v))?)?;
        if t != Term::Var(v) {
            bindings.insert(v, t);
        }
    }
    Ok(Substitution { bindings })
}

/// An injective variable-to-variable map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Renaming {
    map: BTreeMap<Var, Var>,
}

impl Renaming {
    pub fn new(map: BTreeMap<Var, Var>) -> Result<Renaming, TermError> {
        let mut seen: BTreeMap<Var, Var> = BTreeMap::new();
        for (&from, &to) in &map {
            if let Some(&prev) = seen.get(&to) {
                return Err(TermError::NonInjective(prev, from, to));
            }
            seen.insert(to, from);
        }
        Ok(Renaming { map })
    }

    pub fn from_pairs<I: IntoIterator<Item = (u32, u32)>>(pairs: I) -> Result<Renaming, TermError> {
        Renaming::new(pairs.into_iter().map(|(a, b)| (Var(a), Var(b))).collect())
    }

    pub fn get(&self, v: Var) -> Var {
        self.map.get(&v).copied().unwrap_or(v)
    }

    pub fn inverse(&self) -> Renaming {
        Renaming { map: self.map.iter().map(|(&a, &b)| (b, a)).collect() }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, Var)> + '_ {
        self.map.iter().map(|(&a, &b)| (a, b))
    }
}

/// Structural copy of `t` with variables remapped by `pi`. Variables outside
/// the map are kept; the resulting map on `FV(t)` must stay injective.
pub fn rename(t: &Term, pi: &Renaming) -> Result<Term, TermError> {
    let mut images: BTreeMap<Var, Var> = BTreeMap::new();
    for v in t.free_vars() {
        let w = pi.get(v);
        if let Some(&prev) = images.get(&w) {
            return Err(TermError::NonInjective(prev, v, w));
        }
        images.insert(w, v);
    }
    Ok(t.subst_vars(&|v| Some(Term::Var(pi.get(v)))))
}

/// Finds a bijection `π` on variables with `xs[i] π = ys[i]` for all `i`.
pub fn alpha_equivalent(xs: &[Term], ys: &[Term]) -> Option<BTreeMap<Var, Var>> {
    fn go(
        a: &Term,
        b: &Term,
        fwd: &mut BTreeMap<Var, Var>,
        bwd: &mut BTreeMap<Var, Var>,
    ) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                match (fwd.get(x), bwd.get(y)) {
                    (None, None) => {
                        fwd.insert(*x, *y);
                        bwd.insert(*y, *x);
                        true
                    }
                    (Some(fy), Some(bx)) => fy == y && bx == x,
                    _ => false,
                }
            }
            (Term::Ctor(f, xs), Term::Ctor(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys.iter()).all(|(x, y)| go(x, y, fwd, bwd))
            }
            (Term::Slot(x), Term::Slot(y)) => x == y,
            _ => false,
        }
    }
    if xs.len() != ys.len() {
        return None;
    }
    let mut fwd = BTreeMap::new();
    let mut bwd = BTreeMap::new();
    xs.iter()
        .zip(ys)
        .all(|(x, y)| go(x, y, &mut fwd, &mut bwd))
        .then_some(fwd)
}
