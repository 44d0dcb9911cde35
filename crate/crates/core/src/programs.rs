//! Relation sources shipped with the crate.

use crate::goal::Spec;
use crate::parse::{parse_program, ParseError};
use crate::term::Term;

pub const APPEND: &str = include_str!("../programs/append.mk");
pub const REVERSE: &str = include_str!("../programs/reverse.mk");
pub const PEANO: &str = include_str!("../programs/peano.mk");

pub fn append() -> Spec {
    parse_program(APPEND).expect("shipped append program parses")
}

pub fn reverse() -> Spec {
    parse_program(REVERSE).expect("shipped reverse program parses")
}

pub fn peano() -> Spec {
    parse_program(PEANO).expect("shipped peano program parses")
}

/// Looks up a shipped program by file stem (`append`, `reverse`, `peano`).
pub fn by_name(name: &str) -> Option<Result<Spec, ParseError>> {
    let src = match name {
        "append" => APPEND,
        "reverse" => REVERSE,
        "peano" => PEANO,
        _ => return None,
    };
    Some(parse_program(src))
}

/// Ground list of `n` copies of `Zero`.
pub fn zeros(n: usize) -> Term {
    Term::list(std::iter::repeat_n(Term::atom("Zero"), n).collect::<Vec<_>>())
}

/// How a size parameter becomes a ground term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    List,
    Peano,
}

impl Shape {
    pub fn term(self, n: usize) -> Term {
        match self {
            Shape::List => zeros(n),
            Shape::Peano => Term::peano(n),
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Shape, String> {
        match s {
            "list" => Ok(Shape::List),
            "peano" => Ok(Shape::Peano),
            _ => Err(format!("unknown shape {s:?} (expected list or peano)")),
        }
    }
}
