//! Benchmark series over growing argument sizes and log-log slope fits.

use crate::engine::{init, run, EngineConfig, EngineError};
use crate::goal::{Goal, Spec};
use crate::programs::{self, zeros, Shape};
use crate::term::Term;
use serde::Serialize;
use std::io::{self, Write};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("suite {suite} hit the step limit at size {size}")]
    Truncated { suite: String, size: usize },
    #[error("unknown suite {0}")]
    UnknownSuite(String),
    #[error("fit needs at least 5 positive points spanning 8x in size (got {points} points, span {span:.2}x)")]
    TooFewPoints { points: usize, span: f64 },
    #[error("bad size list {0:?}")]
    BadSizes(String),
}

/// A relation run in one argument mode, with grounded arguments built from a size.
pub struct Suite {
    pub name: &'static str,
    pub program: fn() -> Spec,
    pub shape: Shape,
    pub about: &'static str,
    build: fn(&Spec, usize) -> Goal,
}

impl Suite {
    pub fn goal(&self, spec: &Spec, size: usize) -> Goal {
        (self.build)(spec, size)
    }
}

fn call(spec: &Spec, rel: &str, args: Vec<Term>) -> Goal {
    let id = spec.lookup(rel).unwrap_or_else(|| panic!("program defines {rel}"));
    Goal::invoke(id, args)
}

fn v(i: u32) -> Term {
    Term::var(i)
}

/// The fixed length of `b` in the forward append suites.
pub const APPEND_B_LEN: usize = 100;
/// The fixed magnitude of `m` in the forward multiplication suite.
pub const MULT_M: usize = 4;

pub static SUITES: &[Suite] = &[
    Suite {
        name: "appendo",
        program: programs::append,
        shape: Shape::List,
        about: "appendo(a, b, ab), len(a) = n, len(b) = 100",
        build: |s, n| call(s, "appendo", vec![zeros(n), zeros(APPEND_B_LEN), v(1)]),
    },
    Suite {
        name: "appendo_opt",
        program: programs::append,
        shape: Shape::List,
        about: "appendo_opt(a, b, ab), len(a) = n, len(b) = 100",
        build: |s, n| call(s, "appendo_opt", vec![zeros(n), zeros(APPEND_B_LEN), v(1)]),
    },
    Suite {
        name: "appendo_opt_bwd",
        program: programs::append,
        shape: Shape::List,
        about: "appendo_opt(a, b, ab), len(ab) = n",
        build: |s, n| call(s, "appendo_opt", vec![v(1), v(2), zeros(n)]),
    },
    Suite {
        name: "reverso_fwd",
        program: programs::reverse,
        shape: Shape::List,
        about: "reverso(a, r), len(a) = n",
        build: |s, n| call(s, "reverso", vec![zeros(n), v(1)]),
    },
    Suite {
        name: "reverso_bwd",
        program: programs::reverse,
        shape: Shape::List,
        about: "reverso_bwd(a, r), len(r) = n",
        build: |s, n| call(s, "reverso_bwd", vec![v(1), zeros(n)]),
    },
    Suite {
        name: "pluso_nm",
        program: programs::peano,
        shape: Shape::Peano,
        about: "pluso(n, m, r), |n| = |m| = n",
        build: |s, n| call(s, "pluso", vec![Term::peano(n), Term::peano(n), v(1)]),
    },
    Suite {
        name: "pluso_nr",
        program: programs::peano,
        shape: Shape::Peano,
        about: "pluso(n, m, r), |n| = n, |r| = 2n",
        build: |s, n| call(s, "pluso", vec![Term::peano(n), v(1), Term::peano(2 * n)]),
    },
    Suite {
        name: "pluso_r",
        program: programs::peano,
        shape: Shape::Peano,
        about: "pluso(n, m, r), |r| = n",
        build: |s, n| call(s, "pluso", vec![v(1), v(2), Term::peano(n)]),
    },
    Suite {
        name: "multo_nm",
        program: programs::peano,
        shape: Shape::Peano,
        about: "multo(n, m, r), |n| = n, |m| = 4",
        build: |s, n| call(s, "multo", vec![Term::peano(n), Term::peano(MULT_M), v(1)]),
    },
    Suite {
        name: "multo_r",
        program: programs::peano,
        shape: Shape::Peano,
        about: "multo_bwd(S(n), S(m), r), |r| = n",
        build: |s, n| {
            let sn = Term::ctor("S", vec![v(1)]);
            let sm = Term::ctor("S", vec![v(2)]);
            call(s, "multo_bwd", vec![sn, sm, Term::peano(n)])
        },
    },
];

pub fn suite(name: &str) -> Result<&'static Suite, BenchError> {
    SUITES.iter().find(|s| s.name == name).ok_or_else(|| BenchError::UnknownSuite(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeriesPoint {
    pub suite: String,
    pub size: usize,
    pub d: u64,
    pub t: u64,
    pub wall_ns: u64,
    pub answers: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SeriesConfig {
    pub engine: EngineConfig,
    /// Wall-clock repetitions per size; the median is reported.
    pub reps: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { engine: EngineConfig::default(), reps: 3 }
    }
}

pub fn run_series(suite: &Suite, sizes: &[usize], cfg: &SeriesConfig) -> Result<Vec<SeriesPoint>, BenchError> {
    let spec = (suite.program)();
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let goal = suite.goal(&spec, size);
        let mut walls = Vec::with_capacity(cfg.reps.max(1));
        let mut last = None;
        for _ in 0..cfg.reps.max(1) {
            let state = init(goal.clone());
            let start = Instant::now();
            let stats = run(state, &spec, &cfg.engine)?;
            walls.push(start.elapsed().as_nanos() as u64);
            if stats.truncated {
                return Err(BenchError::Truncated { suite: suite.name.to_string(), size });
            }
            last = Some(stats);
        }
        walls.sort_unstable();
        let stats = last.expect("at least one repetition");
        out.push(SeriesPoint {
            suite: suite.name.to_string(),
            size,
            d: stats.d,
            t: stats.t,
            wall_ns: walls[walls.len() / 2],
            answers: stats.answers.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    D,
    T,
    Wall,
}

impl Field {
    fn get(self, p: &SeriesPoint) -> f64 {
        match self {
            Field::D => p.d as f64,
            Field::T => p.t as f64,
            Field::Wall => p.wall_ns as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub field: Field,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Smallest and largest size in the fitted window.
    pub window: (usize, usize),
}

/// Least-squares line through `(ln size, ln y)` over the upper half of the
/// sizes. Points with a non-positive value are dropped first.
pub fn fit_loglog(points: &[SeriesPoint], field: Field) -> Result<FitResult, BenchError> {
    let mut pts: Vec<(usize, f64)> = points
        .iter()
        .map(|p| (p.size, field.get(p)))
        .filter(|&(s, y)| s > 0 && y > 0.0)
        .collect();
    pts.sort_by_key(|p| p.0);
    let span = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => b.0 as f64 / a.0 as f64,
        _ => 0.0,
    };
    if pts.len() < 5 || span < 8.0 {
        return Err(BenchError::TooFewPoints { points: pts.len(), span });
    }
    let window = &pts[pts.len() / 2..];
    let xs: Vec<f64> = window.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(FitResult { field, slope, intercept, r2, window: (window[0].0, window[window.len() - 1].0) })
}

/// Pearson correlation; `None` for fewer than two points or a constant input.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub const CSV_HEADER: &str = "suite,size,d,t,wall_ns,answers";

pub fn emit_csv(points: &[SeriesPoint], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{},{},{},{}", p.suite, p.size, p.d, p.t, p.wall_ns, p.answers)?;
    }
    Ok(())
}

/// Parses `lo:hi:step`, `lo..hi` (inclusive), or a comma-separated list.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, BenchError> {
    let bad = || BenchError::BadSizes(text.to_string());
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let sizes: Vec<usize> = if let Some((lo, hi)) = text.split_once("..") {
        (num(lo)?..=num(hi)?).collect()
    } else if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else { return Err(bad()) };
        let step = num(step)?;
        if step == 0 {
            return Err(bad());
        }
        (num(lo)?..=num(hi)?).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if sizes.is_empty() {
        return Err(bad());
    }
    Ok(sizes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(usize) -> u64) -> Vec<SeriesPoint> {
        (1..=16)
            .map(|n| SeriesPoint { suite: "x".into(), size: n, d: f(n), t: f(n), wall_ns: 0, answers: 0 })
            .collect()
    }

    #[test]
    fn fit_recovers_exact_powers() {
        let fit = fit_loglog(&synthetic(|n| (n * n) as u64), Field::T).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.window, (9, 16));
        let fit = fit_loglog(&synthetic(|n| 7 * n as u64), Field::D).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_short_series() {
        let pts = synthetic(|n| n as u64);
        assert!(matches!(fit_loglog(&pts[..4], Field::D), Err(BenchError::TooFewPoints { .. })));
        assert!(matches!(fit_loglog(&pts[8..], Field::D), Err(BenchError::TooFewPoints { .. })));
        // wall_ns is zero everywhere: every point is dropped
        assert!(fit_loglog(&pts, Field::Wall).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn sizes_syntax() {
        assert_eq!(parse_sizes("25:100:25").unwrap(), vec![25, 50, 75, 100]);
        assert_eq!(parse_sizes("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_sizes("1,2,4").unwrap(), vec![1, 2, 4]);
        assert!(parse_sizes("1:2").is_err());
        assert!(parse_sizes("x").is_err());
    }

    #[test]
    fn small_series_shapes() {
        let cfg = SeriesConfig { reps: 1, ..Default::default() };
        let app = run_series(suite("appendo").unwrap(), &[1, 2, 4], &cfg).unwrap();
        assert!(app.windows(2).all(|w| w[0].t < w[1].t));
        let ratio = |p: &SeriesPoint| p.t as f64 / p.d as f64;
        assert!(app.windows(2).all(|w| ratio(&w[0]) < ratio(&w[1])));
        assert!(app.iter().all(|p| p.answers == 1));

        let plus = run_series(suite("pluso_nm").unwrap(), &[1, 2, 4, 8], &cfg).unwrap();
        assert!(plus.windows(2).all(|w| w[0].d < w[1].d));
    }

    #[test]
    fn every_suite_converges_at_small_sizes() {
        let cfg = SeriesConfig { reps: 1, ..Default::default() };
        for s in SUITES {
            let pts = run_series(s, &[1, 2, 3], &cfg).unwrap();
            assert!(pts.iter().all(|p| p.answers >= 1), "{}", s.name);
        }
    }

    #[test]
    fn csv_layout() {
        let p = SeriesPoint { suite: "appendo".into(), size: 3, d: 10, t: 20, wall_ns: 5, answers: 1 };
        let mut buf = Vec::new();
        emit_csv(&[p], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "suite,size,d,t,wall_ns,answers\nappendo,3,10,20,5,1\n");
    }
}
