use clap::{Parser, Subcommand, ValueEnum};
use kanren_cost::bench::{self, Field, SeriesConfig};
use kanren_cost::engine::{self, check_answers, dump_trace, format_answer, init_arc};
use kanren_cost::factors::{self, Oracle};
use kanren_cost::programs::Shape;
use kanren_cost::scheme::{self, RelScheme};
use kanren_cost::term::{UnifyOptions, Var};
use kanren_cost::{parse_goal, parse_program, EngineConfig, Query, Spec};
use serde_json::json;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kcost", version, about = "Measure interleaving-search cost of miniKanren programs")]
struct Cli {
    /// Check for cyclic bindings during unification.
    #[arg(long, global = true, value_enum, default_value_t = Switch::Off)]
    occurs_check: Switch,
    /// Maximum number of states visited per run.
    #[arg(long, global = true, default_value_t = engine::DEFAULT_STEP_LIMIT)]
    step_limit: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Dot,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the answers of a goal.
    Run {
        file: PathBuf,
        #[arg(long)]
        goal: Option<String>,
    },
    /// Print one line per step: index, leftmost height, label, state.
    Trace {
        file: PathBuf,
        #[arg(long)]
        goal: Option<String>,
    },
    /// Print d, t and the answer count of a goal.
    Measure {
        file: PathBuf,
        #[arg(long)]
        goal: Option<String>,
    },
    /// Build the symbolic scheme of a relation body.
    Scheme {
        file: PathBuf,
        #[arg(long)]
        rel: String,
        /// Comma-separated parameter names known to be ground.
        #[arg(long, value_delimiter = ',')]
        grounded: Vec<String>,
        /// Also write the scheme as a DOT graph.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Compare measured d, t with the scheme factors over a family of valuations.
    Factors {
        file: PathBuf,
        #[arg(long)]
        rel: String,
        #[arg(long, value_delimiter = ',')]
        grounded: Vec<String>,
        /// Sizes for the swept parameter, as `lo..hi`, `lo:hi:step` or a list.
        #[arg(long, default_value = "1..30")]
        sizes: String,
        /// Grounded parameter to sweep (default: the first one).
        #[arg(long)]
        sweep: Option<String>,
        /// Size of every other grounded parameter.
        #[arg(long, default_value_t = 3)]
        fixed: usize,
        #[arg(long, default_value = "list")]
        shape: Shape,
        /// Largest accepted max/min ratio of the band.
        #[arg(long, default_value_t = 4.0)]
        band: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a benchmark series.
    Bench {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value = "25:400:25")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print log-log slopes of d, t and wall time.
        #[arg(long)]
        fit: bool,
    },
    /// Validate a program file and, if it ends with a goal, that goal's answers.
    Check { file: PathBuf },
}

struct Failure(String);

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("kcost: {msg}");
            ExitCode::from(1)
        }
    }
}

fn engine_config(cli: &Cli) -> EngineConfig {
    EngineConfig {
        unify: UnifyOptions::with_occurs_check(matches!(cli.occurs_check, Switch::On)),
        step_limit: cli.step_limit,
    }
}

fn load(path: &Path) -> Res<Spec> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    parse_program(&text).map_err(|e| Failure(format!("{}:{e}", path.display())))
}

fn query(spec: &Spec, goal: &Option<String>) -> Res<Query> {
    match goal {
        Some(text) => parse_goal(text, spec).map_err(|e| Failure(format!("--goal:{e}"))),
        None => spec.goal.clone().ok_or_else(|| Failure("no --goal given and the file has no goal".into())),
    }
}

fn dispatch(cli: &Cli) -> Res<()> {
    let cfg = engine_config(cli);
    match &cli.cmd {
        Cmd::Run { file, goal } => cmd_run(cli, &cfg, file, goal),
        Cmd::Trace { file, goal } => {
            let spec = load(file)?;
            let q = query(&spec, goal)?;
            let mut out = String::new();
            let stats = dump_trace(init_arc(q.goal.clone()), &spec, &cfg, &q.vars, &mut out)?;
            print!("{out}");
            if stats.truncated {
                eprintln!("kcost: trace truncated after {} states", stats.d);
            }
            Ok(())
        }
        Cmd::Measure { file, goal } => cmd_measure(cli, &cfg, file, goal),
        Cmd::Scheme { file, rel, grounded, dot } => {
            let spec = load(file)?;
            let rs = build_scheme(&spec, rel, grounded)?;
            if let Some(path) = dot {
                std::fs::write(path, rs.render_dot(&spec))?;
            }
            match cli.format {
                Format::Dot => print!("{}", rs.render_dot(&spec)),
                Format::Json => println!("{}", scheme_json(&spec, &rs)),
                _ => print!("{}", rs.render_text(&spec)),
            }
            Ok(())
        }
        Cmd::Factors { file, rel, grounded, sizes, sweep, fixed, shape, band, csv } => {
            let spec = load(file)?;
            let rs = build_scheme(&spec, rel, grounded)?;
            let sweep_var = match sweep.as_deref().or(grounded.first().map(String::as_str)) {
                Some(name) => param_var(&spec, &rs, name)?,
                None => return Err(Failure("--grounded must name at least one parameter".into())),
            };
            let sizes = bench::parse_sizes(sizes)?;
            let family = factors::family(&rs, sweep_var, *shape, &sizes, *fixed);
            let oracle = Oracle::new(&spec, cfg);
            let report = factors::check_theorem(&rs, &family, &oracle, &cfg)?;
            if let Some(path) = csv {
                std::fs::write(path, report.to_csv())?;
            }
            let (lo, hi) = report.ratio_band();
            let pass = report.passes(*band);
            match cli.format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "rows": report.rows,
                        "offsets_constant": report.offset_constant(),
                        "ratio_min": lo,
                        "ratio_max": hi,
                        "pass": pass,
                    })
                ),
                _ => {
                    print!("{}", report.to_csv());
                    println!(
                        "# d-D constant: {}; ratio band [{lo:.4}, {hi:.4}]; {}",
                        report.offset_constant(),
                        if pass { "PASS" } else { "FAIL" }
                    );
                }
            }
            Ok(())
        }
        Cmd::Bench { suite, sizes, reps, csv, fit } => {
            let suite = bench::suite(suite)?;
            let sizes = bench::parse_sizes(sizes)?;
            let points = bench::run_series(suite, &sizes, &SeriesConfig { engine: cfg, reps: *reps })?;
            match csv {
                Some(path) => {
                    let mut f = std::fs::File::create(path)?;
                    bench::emit_csv(&points, &mut f)?;
                }
                None if cli.format != Format::Json => bench::emit_csv(&points, &mut std::io::stdout())?,
                None => {}
            }
            let fits = if *fit {
                [Field::D, Field::T, Field::Wall]
                    .into_iter()
                    .map(|f| bench::fit_loglog(&points, f))
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                Vec::new()
            };
            if cli.format == Format::Json {
                println!("{}", json!({ "suite": suite.name, "points": points, "fits": fits }));
            } else {
                for f in &fits {
                    println!(
                        "# {:?} slope {:.4} (r2 {:.4}, sizes {}..{})",
                        f.field, f.slope, f.r2, f.window.0, f.window.1
                    );
                }
            }
            Ok(())
        }
        Cmd::Check { file } => {
            let spec = load(file)?;
            println!("{}: {} relation(s), all in disjunctive normal form", file.display(), spec.len());
            let Some(q) = spec.goal.clone() else { return Ok(()) };
            let stats = engine::run(init_arc(q.goal.clone()), &spec, &cfg)?;
            if stats.truncated {
                return Err(Failure(format!("goal did not finish within {} states", cfg.step_limit)));
            }
            let report = check_answers(&stats, &q.var_list())?;
            if !report.ok() {
                return Err(Failure(format!(
                    "goal answers break the restrictions: non-ground {:?}, duplicates {:?}",
                    report.non_ground, report.duplicates
                )));
            }
            println!("goal: {} ground, unique answer(s)", report.answers);
            Ok(())
        }
    }
}

fn cmd_run(cli: &Cli, cfg: &EngineConfig, file: &Path, goal: &Option<String>) -> Res<()> {
    let spec = load(file)?;
    let q = query(&spec, goal)?;
    let stats = engine::run(init_arc(q.goal.clone()), &spec, cfg)?;
    let answers = stats
        .answers
        .iter()
        .map(|e| format_answer(e, &q.vars))
        .collect::<Result<Vec<_>, _>>()?;
    if cli.format == Format::Json {
        println!("{}", json!({ "answers": answers, "truncated": stats.truncated }));
    } else {
        for a in &answers {
            println!("{a}");
        }
    }
    if stats.truncated {
        eprintln!("kcost: search truncated after {} states; {} answer(s) so far", stats.d, answers.len());
    }
    Ok(())
}

fn cmd_measure(cli: &Cli, cfg: &EngineConfig, file: &Path, goal: &Option<String>) -> Res<()> {
    let spec = load(file)?;
    let q = query(&spec, goal)?;
    let stats = engine::run(init_arc(q.goal.clone()), &spec, cfg)?;
    let n = stats.answers.len();
    match cli.format {
        Format::Json => println!(
            "{}",
            json!({ "d": stats.d, "t": stats.t, "answers": n, "truncated": stats.truncated })
        ),
        Format::Csv => {
            println!("d,t,answers,truncated");
            println!("{},{},{},{}", stats.d, stats.t, n, stats.truncated);
        }
        _ => {
            let note = if stats.truncated { " (truncated)" } else { "" };
            println!("d={}, t={}, answers={n}{note}", stats.d, stats.t);
        }
    }
    Ok(())
}

fn build_scheme(spec: &Spec, rel: &str, grounded: &[String]) -> Res<RelScheme> {
    let names: Vec<&str> = grounded.iter().map(String::as_str).collect();
    Ok(scheme::relation_scheme_by_name(spec, rel, &names)?)
}

fn param_var(spec: &Spec, rs: &RelScheme, name: &str) -> Res<Var> {
    let def = spec.rel(rs.rel);
    def.params
        .iter()
        .position(|p| &*p.name == name)
        .map(|i| rs.params[i])
        .ok_or_else(|| Failure(format!("{} has no parameter {name}", def.name)))
}

fn scheme_json(spec: &Spec, rs: &RelScheme) -> serde_json::Value {
    fn node(spec: &Spec, rs: &RelScheme, s: &scheme::Scheme) -> serde_json::Value {
        use scheme::Scheme::*;
        let grounded: Vec<String> = s.grounded().iter().map(|v| rs.var_name(*v)).collect();
        let term = |t: &kanren_cost::Term| rename(rs, t);
        let call = |rel, args: &[kanren_cost::Term]| {
            let args: Vec<String> = args.iter().map(term).collect();
            format!("{}({})", spec.printer().rel_name(rel), args.join(", "))
        };
        match s {
            UnifyLeaf { t1, t2, dead, .. } => json!({
                "kind": "unify_leaf", "goal": format!("{} == {}", term(t1), term(t2)),
                "dead": dead, "grounded": grounded,
            }),
            InvokeLeaf { rel, args, .. } => json!({
                "kind": "invoke_leaf", "goal": call(*rel, args), "grounded": grounded,
            }),
            UnifyNode { t1, t2, constraints, child, .. } => {
                let cs: Vec<String> = constraints
                    .iter()
                    .map(|c| format!("{} = {}", rs.var_name(c.var), term(&c.term)))
                    .collect();
                json!({
                    "kind": "unify", "goal": format!("{} == {}", term(t1), term(t2)),
                    "grounded": grounded, "constraints": cs, "child": node(spec, rs, child),
                })
            }
            InvokeNode { rel, args, child, .. } => json!({
                "kind": "invoke", "goal": call(*rel, args), "grounded": grounded,
                "child": node(spec, rs, child),
            }),
            Fork { left, right, .. } => json!({
                "kind": "fork", "grounded": grounded,
                "left": node(spec, rs, left), "right": node(spec, rs, right),
            }),
        }
    }
    json!({
        "relation": spec.rel(rs.rel).name,
        "grounded": rs.grounded.iter().map(|v| rs.var_name(*v)).collect::<Vec<_>>(),
        "scheme": node(spec, rs, &rs.scheme),
    })
}

fn rename(rs: &RelScheme, t: &kanren_cost::Term) -> String {
    use kanren_cost::Term;
    match t {
        Term::Var(v) => rs.var_name(*v),
        Term::Ctor(f, args) if args.is_empty() => f.to_string(),
        Term::Ctor(f, args) => {
            let parts: Vec<String> = args.iter().map(|a| rename(rs, a)).collect();
            format!("{f}({})", parts.join(", "))
        }
        Term::Slot(s) => s.name.to_string(),
    }
}
