//! Complexity factors 𝒟, 𝒯 and ℒ of a scheme under a valuation, and the
//! band check relating them to measured `d` and `t`.

use crate::engine::{check_answers, init, run, AnswerReport, EngineConfig, EngineError};
use crate::goal::{Goal, RelId, Spec};
use crate::measures::{max_dot, Cost};
use crate::scheme::{Constraint, RelScheme, Scheme, VarSet};
use crate::term::{self, Substitution, Term, TermError, UnifyOptions, Var};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

/// Ground terms for grounded variables.
pub type Valuation = BTreeMap<Var, Term>;

pub fn apply_valuation(t: &Term, rho: &Valuation) -> Term {
    t.subst_vars(&|v| rho.get(&v).cloned())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FactorError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("call {0} exceeded the step limit")]
    Truncated(String),
    #[error("call {call} breaks the answer restrictions: {report:?}")]
    Restriction { call: String, report: AnswerReport },
    #[error("extension leaves {0} non-ground")]
    NonGround(String),
    #[error("symbolic and concrete unification disagree on {0}")]
    Disagreement(String),
}

/// One relational call: its cost and its answers projected onto the arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallResult {
    pub cost: Cost,
    pub tuples: Vec<Vec<Term>>,
    pub report: AnswerReport,
}

type CallCache = HashMap<(RelId, Vec<Term>), Arc<CallResult>>;

/// Runs calls on the engine, which stands in for the denotational semantics.
pub struct Oracle<'a> {
    spec: &'a Spec,
    cfg: EngineConfig,
    cache: Option<Mutex<CallCache>>,
}

impl<'a> Oracle<'a> {
    pub fn new(spec: &'a Spec, cfg: EngineConfig) -> Oracle<'a> {
        Oracle { spec, cfg, cache: Some(Mutex::new(HashMap::new())) }
    }

    pub fn uncached(spec: &'a Spec, cfg: EngineConfig) -> Oracle<'a> {
        Oracle { spec, cfg, cache: None }
    }

    pub fn spec(&self) -> &'a Spec {
        self.spec
    }

    pub fn call(&self, rel: RelId, args: &[Term]) -> Result<Arc<CallResult>, FactorError> {
        let key = (rel, args.to_vec());
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().unwrap().get(&key) {
                return Ok(hit.clone());
            }
        }
        let goal = Goal::invoke(rel, args.to_vec());
        let stats = run(init(goal), self.spec, &self.cfg)?;
        if stats.truncated {
            return Err(FactorError::Truncated(self.spec.printer().invocation(rel, args)));
        }
        let mut vars = VarSet::new();
        for a in args {
            a.collect_vars(&mut vars);
        }
        let vars: Vec<Var> = vars.into_iter().collect();
        let report = check_answers(&stats, &vars)?;
        let tuples = stats
            .answers
            .iter()
            .map(|e| args.iter().map(|a| e.subst.apply(a)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let result = Arc::new(CallResult { cost: Cost { d: stats.d, t: stats.t }, tuples, report });
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().insert(key, result.clone());
        }
        Ok(result)
    }

    /// Ground answer tuples of `rel(args)`.
    pub fn answers(&self, rel: RelId, args: &[Term]) -> Result<Vec<Vec<Term>>, FactorError> {
        let r = self.call(rel, args)?;
        self.require_restrictions(rel, args, &r)?;
        Ok(r.tuples.clone())
    }

    fn require_restrictions(&self, rel: RelId, args: &[Term], r: &CallResult) -> Result<(), FactorError> {
        if r.report.ok() {
            Ok(())
        } else {
            Err(FactorError::Restriction {
                call: self.spec.printer().invocation(rel, args),
                report: r.report.clone(),
            })
        }
    }
}

/// A leaf goal instance together with its `d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeafEntry {
    pub goal: String,
    pub d: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FactorReport {
    #[serde(rename = "D")]
    pub big_d: u64,
    #[serde(rename = "T")]
    pub big_t: u64,
    #[serde(rename = "L")]
    pub leaves: Vec<LeafEntry>,
}

impl FactorReport {
    pub fn max_leaf_d(&self) -> u64 {
        max_dot(self.leaves.iter().map(|l| l.d))
    }

    fn add(&mut self, c: Cost) {
        self.big_d += c.d;
        self.big_t += c.t;
    }
}

/// The unique `ρ' ≻ ρ` over `u` satisfying `constraints`, if any.
pub fn solve_constraints(
    rho: &Valuation,
    constraints: &[Constraint],
    u: &VarSet,
) -> Result<Option<Valuation>, FactorError> {
    let mut s = Substitution::from_pairs(rho.iter().map(|(v, t)| (*v, t.clone())));
    let opts = UnifyOptions::with_occurs_check(true);
    for c in constraints {
        match s.unify(&Term::Var(c.var), &c.term, &opts)? {
            Some(next) => s = next,
            None => return Ok(None),
        }
    }
    ground_on(&s, u).map(Some)
}

fn ground_on(s: &Substitution, u: &VarSet) -> Result<Valuation, FactorError> {
    let mut out = Valuation::new();
    for v in u {
        let t = s.apply(&Term::Var(*v))?;
        if !t.is_ground() {
            return Err(FactorError::NonGround(v.to_string()));
        }
        out.insert(*v, t);
    }
    Ok(out)
}

/// Extends `ρ` over `u` so that the call arguments match an answer tuple.
fn match_tuple(
    rho: &Valuation,
    args: &[Term],
    tuple: &[Term],
    u: &VarSet,
) -> Result<Option<Valuation>, FactorError> {
    let mut s = Substitution::from_pairs(rho.iter().map(|(v, t)| (*v, t.clone())));
    let opts = UnifyOptions::with_occurs_check(true);
    for (a, b) in args.iter().zip(tuple) {
        match s.unify(a, b, &opts)? {
            Some(next) => s = next,
            None => return Ok(None),
        }
    }
    ground_on(&s, u).map(Some)
}

pub struct Evaluator<'a, 'o> {
    pub oracle: &'o Oracle<'a>,
    /// Check every unify node against concrete unification.
    pub cross_check: bool,
}

impl Evaluator<'_, '_> {
    pub fn eval(&self, scheme: &Scheme, rho: &Valuation) -> Result<FactorReport, FactorError> {
        let mut out = FactorReport::default();
        self.walk(scheme, rho, &mut out)?;
        Ok(out)
    }

    fn walk(&self, s: &Scheme, rho: &Valuation, out: &mut FactorReport) -> Result<(), FactorError> {
        let spec = self.oracle.spec();
        match s {
            Scheme::UnifyLeaf { t1, t2, .. } => {
                let g = Goal::unify(apply_valuation(t1, rho), apply_valuation(t2, rho));
                let goal = g.to_string();
                let stats = run(init(g), spec, &EngineConfig::default())?;
                out.add(Cost { d: 1, t: 1 });
                out.leaves.push(LeafEntry { goal, d: stats.d });
            }
            Scheme::InvokeLeaf { rel, args, .. } => {
                let args: Vec<Term> = args.iter().map(|a| apply_valuation(a, rho)).collect();
                let r = self.oracle.call(*rel, &args)?;
                out.add(r.cost);
                out.leaves.push(LeafEntry { goal: spec.printer().invocation(*rel, &args), d: r.cost.d });
            }
            Scheme::UnifyNode { t1, t2, constraints, child, .. } => {
                out.add(Cost { d: 1, t: 1 });
                let ext = solve_constraints(rho, constraints, child.grounded())?;
                if self.cross_check {
                    let a = apply_valuation(t1, rho);
                    let b = apply_valuation(t2, rho);
                    let concrete = term::unify(&a, &b, true)?.is_some();
                    if concrete != ext.is_some() {
                        return Err(FactorError::Disagreement(format!("{a} == {b}")));
                    }
                }
                if let Some(rho2) = ext {
                    self.walk(child, &rho2, out)?;
                }
            }
            Scheme::InvokeNode { rel, args, child, .. } => {
                let inst: Vec<Term> = args.iter().map(|a| apply_valuation(a, rho)).collect();
                let r = self.oracle.call(*rel, &inst)?;
                self.oracle.require_restrictions(*rel, &inst, &r)?;
                out.add(r.cost);
                for tuple in &r.tuples {
                    if let Some(rho2) = match_tuple(rho, &inst, tuple, child.grounded())? {
                        self.walk(child, &rho2, out)?;
                    }
                }
            }
            Scheme::Fork { left, right, .. } => {
                self.walk(left, rho, out)?;
                self.walk(right, rho, out)?;
            }
        }
        Ok(())
    }
}

pub fn eval_factors(scheme: &Scheme, rho: &Valuation, oracle: &Oracle) -> Result<FactorReport, FactorError> {
    Evaluator { oracle, cross_check: cfg!(debug_assertions) }.eval(scheme, rho)
}

/// One valuation of a theorem check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremRow {
    pub size: usize,
    pub d: u64,
    #[serde(rename = "D")]
    pub big_d: u64,
    pub t: u64,
    #[serde(rename = "T")]
    pub big_t: u64,
    #[serde(rename = "maxL")]
    pub max_l: u64,
    /// `(t - 𝒯) / (𝒟 - maxL + 1)`
    pub ratio: f64,
}

impl TheoremRow {
    pub fn offset(&self) -> i64 {
        self.d as i64 - self.big_d as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandReport {
    pub rows: Vec<TheoremRow>,
}

impl BandReport {
    pub fn offsets(&self) -> Vec<i64> {
        self.rows.iter().map(TheoremRow::offset).collect()
    }

    pub fn offset_constant(&self) -> bool {
        self.offsets().windows(2).all(|w| w[0] == w[1])
    }

    pub fn ratio_band(&self) -> (f64, f64) {
        let lo = self.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let hi = self.rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Offsets constant, ratios positive and within a factor `width` of each other.
    pub fn passes(&self, width: f64) -> bool {
        let (lo, hi) = self.ratio_band();
        !self.rows.is_empty() && self.offset_constant() && lo > 0.0 && hi / lo <= width
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,d,D,t,T,maxL,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6}\n",
                r.size, r.d, r.big_d, r.t, r.big_t, r.max_l, r.ratio
            ));
        }
        out
    }
}

/// Valuations sweeping one grounded variable over `sizes`, with every other
/// grounded variable fixed at `fixed`.
pub fn family(
    rs: &RelScheme,
    sweep: Var,
    shape: crate::programs::Shape,
    sizes: &[usize],
    fixed: usize,
) -> Vec<(usize, Valuation)> {
    sizes
        .iter()
        .map(|&n| {
            let rho = rs
                .grounded
                .iter()
                .map(|&v| (v, shape.term(if v == sweep { n } else { fixed })))
                .collect();
            (n, rho)
        })
        .collect()
}

/// Measures `init(body ρ)` and evaluates the factors for each valuation.
pub fn check_theorem(
    rs: &RelScheme,
    valuations: &[(usize, Valuation)],
    oracle: &Oracle,
    cfg: &EngineConfig,
) -> Result<BandReport, FactorError> {
    let spec = oracle.spec();
    let mut rows = Vec::with_capacity(valuations.len());
    for (size, rho) in valuations {
        let g = rs.body.subst_vars(&|v| rho.get(&v).cloned());
        let stats = run(init(g), spec, cfg)?;
        if stats.truncated {
            return Err(FactorError::Truncated(format!("body at size {size}")));
        }
        let f = eval_factors(&rs.scheme, rho, oracle)?;
        let max_l = f.max_leaf_d();
        let denom = (f.big_d + 1).saturating_sub(max_l).max(1) as f64;
        let ratio = (stats.t as f64 - f.big_t as f64) / denom;
        rows.push(TheoremRow {
            size: *size,
            d: stats.d,
            big_d: f.big_d,
            t: stats.t,
            big_t: f.big_t,
            max_l,
            ratio,
        });
    }
    Ok(BandReport { rows })
}
