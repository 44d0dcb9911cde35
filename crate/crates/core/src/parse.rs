//! Concrete syntax for programs and query goals.
//!
//! ```text
//! program  := reldef* goal?
//! reldef   := "rel" IDENT "(" params ")" "{" goal "}"
//! goal     := disj
//! disj     := conj ("|" conj)*
//! conj     := base ("&" base)*
//! base     := term "==" term | IDENT "(" terms ")" | "fresh" IDENT ("," IDENT)* "{" goal "}" | "(" goal ")"
//! term     := IDENT | CTOR ("(" terms? ")")?
//! ```
//!
//! Conjunctions and disjunctions are re-associated to the left, so
//! `a & (b & c)` and `(a & b) & c` parse to the same goal.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::goal::{validate_dnf, Goal, Query, RelDef, RelId, Spec};
use crate::term::{Slot, Sym, Term, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Arity,
    UnboundVariable,
    DuplicateRelation,
    UnknownRelation,
    NotDnf,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError { kind, pos, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Ctor(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    EqEq,
    Bar,
    Amp,
    Rel,
    Fresh,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Ctor(s) => write!(f, "`{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::EqEq => f.write_str("`==`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Rel => f.write_str("`rel`"),
            Tok::Fresh => f.write_str("`fresh`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        };
        match c {
            c if c.is_whitespace() => bump(&mut chars),
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
            }
            '(' | ')' | '{' | '}' | ',' | '|' | '&' => {
                bump(&mut chars);
                out.push((
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        ',' => Tok::Comma,
                        '|' => Tok::Bar,
                        _ => Tok::Amp,
                    },
                    pos,
                ));
            }
            '=' => {
                bump(&mut chars);
                if chars.peek() == Some(&'=') {
                    bump(&mut chars);
                    out.push((Tok::EqEq, pos));
                } else {
                    return Err(ParseError::new(ParseErrorKind::Syntax, pos, "expected `==`"));
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' || c == '\'' {
                        word.push(c);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                let tok = match word.as_str() {
                    "rel" => Tok::Rel,
                    "fresh" => Tok::Fresh,
                    w if w.starts_with(|c: char| c.is_uppercase()) => Tok::Ctor(word),
                    _ => Tok::Ident(word),
                };
                out.push((tok, pos));
            }
            other => {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    pos,
                    format!("unexpected character `{other}`"),
                ))
            }
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[derive(Debug, Clone)]
enum RawTerm {
    Ident(String, Pos),
    Ctor(String, Vec<RawTerm>, Pos),
}

#[derive(Debug, Clone)]
enum RawGoal {
    Unify(RawTerm, RawTerm),
    Conj(Vec<RawGoal>),
    Disj(Vec<RawGoal>),
    Fresh(Vec<(String, Pos)>, Box<RawGoal>),
    Invoke(String, Vec<RawTerm>, Pos),
}

struct RawRel {
    name: String,
    pos: Pos,
    params: Vec<(String, Pos)>,
    body: RawGoal,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<Pos, ParseError> {
        let (tok, pos) = self.next();
        if tok == want {
            Ok(pos)
        } else {
            Err(ParseError::new(
                ParseErrorKind::Syntax,
                pos,
                format!("expected {want}, found {tok}"),
            ))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match self.next() {
            (Tok::Ident(s), pos) => Ok((s, pos)),
            (tok, pos) => Err(ParseError::new(
                ParseErrorKind::Syntax,
                pos,
                format!("expected identifier, found {tok}"),
            )),
        }
    }

    fn program(&mut self) -> Result<(Vec<RawRel>, Option<RawGoal>), ParseError> {
        let mut rels = Vec::new();
        while *self.peek() == Tok::Rel {
            rels.push(self.reldef()?);
        }
        let goal = if *self.peek() == Tok::Eof { None } else { Some(self.goal()?) };
        self.expect(Tok::Eof)?;
        Ok((rels, goal))
    }

    fn reldef(&mut self) -> Result<RawRel, ParseError> {
        self.expect(Tok::Rel)?;
        let (name, pos) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            params.push(self.ident()?);
            while *self.peek() == Tok::Comma {
                self.next();
                params.push(self.ident()?);
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;
        let body = self.goal()?;
        self.expect(Tok::RBrace)?;
        Ok(RawRel { name, pos, params, body })
    }

    fn goal(&mut self) -> Result<RawGoal, ParseError> {
        let mut items = Vec::new();
        push_flat(&mut items, self.conj()?, true);
        while *self.peek() == Tok::Bar {
            self.next();
            push_flat(&mut items, self.conj()?, true);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { RawGoal::Disj(items) })
    }

    fn conj(&mut self) -> Result<RawGoal, ParseError> {
        let mut items = Vec::new();
        push_flat(&mut items, self.base()?, false);
        while *self.peek() == Tok::Amp {
            self.next();
            push_flat(&mut items, self.base()?, false);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { RawGoal::Conj(items) })
    }

    fn base(&mut self) -> Result<RawGoal, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.next();
                let g = self.goal()?;
                self.expect(Tok::RParen)?;
                Ok(g)
            }
            Tok::Fresh => {
                self.next();
                let mut names = vec![self.ident()?];
                while *self.peek() == Tok::Comma {
                    self.next();
                    names.push(self.ident()?);
                }
                self.expect(Tok::LBrace)?;
                let body = self.goal()?;
                self.expect(Tok::RBrace)?;
                Ok(RawGoal::Fresh(names, Box::new(body)))
            }
            Tok::Ident(name) if *self.peek2() == Tok::LParen => {
                let pos = self.pos();
                self.next();
                self.next();
                let args = self.terms(Tok::RParen)?;
                self.expect(Tok::RParen)?;
                Ok(RawGoal::Invoke(name, args, pos))
            }
            Tok::Ident(_) | Tok::Ctor(_) => {
                let lhs = self.term()?;
                self.expect(Tok::EqEq)?;
                let rhs = self.term()?;
                Ok(RawGoal::Unify(lhs, rhs))
            }
            other => Err(ParseError::new(
                ParseErrorKind::Syntax,
                self.pos(),
                format!("expected a goal, found {other}"),
            )),
        }
    }

    fn terms(&mut self, close: Tok) -> Result<Vec<RawTerm>, ParseError> {
        let mut out = Vec::new();
        if *self.peek() == close {
            return Ok(out);
        }
        out.push(self.term()?);
        while *self.peek() == Tok::Comma {
            self.next();
            out.push(self.term()?);
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<RawTerm, ParseError> {
        match self.next() {
            (Tok::Ident(s), pos) => Ok(RawTerm::Ident(s, pos)),
            (Tok::Ctor(s), pos) => {
                let mut args = Vec::new();
                if *self.peek() == Tok::LParen {
                    self.next();
                    args = self.terms(Tok::RParen)?;
                    self.expect(Tok::RParen)?;
                }
                Ok(RawTerm::Ctor(s, args, pos))
            }
            (tok, pos) => Err(ParseError::new(
                ParseErrorKind::Syntax,
                pos,
                format!("expected a term, found {tok}"),
            )),
        }
    }
}

fn push_flat(items: &mut Vec<RawGoal>, g: RawGoal, disj: bool) {
    match g {
        RawGoal::Disj(inner) if disj => items.extend(inner),
        RawGoal::Conj(inner) if !disj => items.extend(inner),
        other => items.push(other),
    }
}

/// Name resolution from raw syntax to goals.
struct Resolver<'a> {
    rels: &'a HashMap<String, (RelId, usize)>,
    ctor_arity: BTreeMap<Sym, usize>,
}

/// Variable environment for one relation body or query.
struct Scope {
    bound: Vec<(String, Slot)>,
    next_slot: u32,
    /// When present, unbound identifiers become logic variables.
    free: Option<Vec<(String, Var)>>,
}

impl Scope {
    fn lookup(&mut self, name: &str, pos: Pos) -> Result<Term, ParseError> {
        if let Some((_, slot)) = self.bound.iter().rev().find(|(n, _)| n == name) {
            return Ok(Term::Slot(slot.clone()));
        }
        match &mut self.free {
            Some(free) => {
                if let Some((_, v)) = free.iter().find(|(n, _)| n == name) {
                    return Ok(Term::Var(*v));
                }
                let v = Var(free.len() as u32 + 1);
                free.push((name.to_string(), v));
                Ok(Term::Var(v))
            }
            None => Err(ParseError::new(
                ParseErrorKind::UnboundVariable,
                pos,
                format!("unbound variable `{name}`"),
            )),
        }
    }

    fn bind(&mut self, name: &str) -> Slot {
        let slot = Slot::new(self.next_slot, name);
        self.next_slot += 1;
        self.bound.push((name.to_string(), slot.clone()));
        slot
    }
}

impl Resolver<'_> {
    fn term(&mut self, t: &RawTerm, scope: &mut Scope) -> Result<Term, ParseError> {
        match t {
            RawTerm::Ident(name, pos) => scope.lookup(name, *pos),
            RawTerm::Ctor(name, args, pos) => {
                let sym = Sym::new(name);
                match self.ctor_arity.get(&sym) {
                    Some(&k) if k != args.len() => {
                        return Err(ParseError::new(
                            ParseErrorKind::Arity,
                            *pos,
                            format!("constructor `{name}` used with {} arguments, earlier with {k}", args.len()),
                        ))
                    }
                    Some(_) => {}
                    None => {
                        self.ctor_arity.insert(sym.clone(), args.len());
                    }
                }
                let args = args.iter().map(|a| self.term(a, scope)).collect::<Result<Vec<_>, _>>()?;
                Ok(Term::Ctor(sym, Arc::from(args)))
            }
        }
    }

    fn goal(&mut self, g: &RawGoal, scope: &mut Scope) -> Result<Goal, ParseError> {
        Ok(match g {
            RawGoal::Unify(a, b) => Goal::Unify(self.term(a, scope)?, self.term(b, scope)?),
            RawGoal::Conj(items) | RawGoal::Disj(items) => {
                let is_conj = matches!(g, RawGoal::Conj(_));
                let mut iter = items.iter();
                let first = self.goal(iter.next().expect("empty connective"), scope)?;
                let mut acc = first;
                for item in iter {
                    let next = self.goal(item, scope)?;
                    acc = if is_conj { Goal::conj(acc, next) } else { Goal::disj(acc, next) };
                }
                acc
            }
            RawGoal::Fresh(names, body) => {
                let slots: Vec<Slot> = names.iter().map(|(n, _)| scope.bind(n)).collect();
                let inner = self.goal(body, scope)?;
                scope.bound.truncate(scope.bound.len() - slots.len());
                slots.into_iter().rev().fold(inner, |acc, s| Goal::fresh(s, acc))
            }
            RawGoal::Invoke(name, args, pos) => {
                let &(id, arity) = self.rels.get(name).ok_or_else(|| {
                    ParseError::new(
                        ParseErrorKind::UnknownRelation,
                        *pos,
                        format!("unknown relation `{name}`"),
                    )
                })?;
                if arity != args.len() {
                    return Err(ParseError::new(
                        ParseErrorKind::Arity,
                        *pos,
                        format!("relation `{name}` has arity {arity}, called with {} arguments", args.len()),
                    ));
                }
                let args = args.iter().map(|a| self.term(a, scope)).collect::<Result<Vec<_>, _>>()?;
                Goal::invoke(id, args)
            }
        })
    }

    fn query(&mut self, g: &RawGoal) -> Result<Query, ParseError> {
        let mut scope = Scope { bound: Vec::new(), next_slot: 0, free: Some(Vec::new()) };
        let goal = self.goal(g, &mut scope)?;
        Ok(Query { goal: Arc::new(goal), vars: scope.free.unwrap_or_default() })
    }
}

/// Parses a program. Relation bodies must be closed and in disjunctive
/// normal form.
pub fn parse_program(text: &str) -> Result<Spec, ParseError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, at: 0 };
    let (raw_rels, raw_goal) = parser.program()?;

    let mut table = HashMap::new();
    for (i, r) in raw_rels.iter().enumerate() {
        if table.insert(r.name.clone(), (RelId(i as u32), r.params.len())).is_some() {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateRelation,
                r.pos,
                format!("relation `{}` defined twice", r.name),
            ));
        }
    }

    let mut resolver = Resolver { rels: &table, ctor_arity: BTreeMap::new() };
    let mut rels = Vec::new();
    for r in &raw_rels {
        let mut scope = Scope { bound: Vec::new(), next_slot: 0, free: None };
        let params: Vec<Slot> = r.params.iter().map(|(n, _)| scope.bind(n)).collect();
        let body = resolver.goal(&r.body, &mut scope)?;
        let check = validate_dnf(&body);
        if !check.ok {
            return Err(ParseError::new(
                ParseErrorKind::NotDnf,
                r.pos,
                format!(
                    "body of `{}` is not in disjunctive normal form: {}",
                    r.name,
                    check.diagnostic.unwrap_or_default()
                ),
            ));
        }
        rels.push(RelDef { name: r.name.clone(), params, body: Arc::new(body) });
    }
    let goal = raw_goal.as_ref().map(|g| resolver.query(g)).transpose()?;
    Ok(Spec::from_parts(rels, resolver.ctor_arity, goal))
}

/// Parses a query goal against the relations of `spec`. Free identifiers
/// become logic variables `_1, _2, ...` in order of first occurrence.
pub fn parse_goal(text: &str, spec: &Spec) -> Result<Query, ParseError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, at: 0 };
    let raw = parser.goal()?;
    parser.expect(Tok::Eof)?;
    let table: HashMap<String, (RelId, usize)> = spec
        .relations()
        .map(|(id, def)| (def.name.clone(), (id, def.params.len())))
        .collect();
    let mut resolver = Resolver { rels: &table, ctor_arity: spec.ctor_arity.clone() };
    resolver.query(&raw)
}
