//! The `ballotlab` command-line tool.
//!
//! Every command is reachable through [`run`], which takes the argument list
//! and output streams and returns the process exit code: 0 on success, 1 when
//! a scan's pass flag is false, 2 on malformed input.

mod query;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ballotlab::approx::{self, SpanFactor, XRule};
use ballotlab::distributions::{self, Family};
use ballotlab::exact::{Arithmetic, DpConfig};
use ballotlab::harness::{self, NGrid, ScanConfig, TargetRule};
use ballotlab::mc::{self, McConfig};
use ballotlab::rational;
use ballotlab::schema::{self, DistSummary, Document, Mode, Payload};
use ballotlab::{Error, Result, StepDistribution};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

pub use query::{rational_value, Query};

#[derive(Parser, Debug)]
#[command(
    name = "ballotlab",
    version,
    about = "Ballot-type probabilities for mean-zero random walks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Inspect step distributions.
    Dist {
        #[command(subcommand)]
        action: DistAction,
    },
    /// Evaluate a query with the exact engine.
    Exact {
        /// Query JSON, inline or a file path.
        query: String,
        #[command(flatten)]
        out: Output,
    },
    /// Estimate a query by Monte Carlo.
    Simulate {
        query: String,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        streams: Option<u64>,
        #[arg(long)]
        min_hits: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
    /// Run a scaling scan from a config.
    Scan {
        config: String,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Finite-n report for a counterexample family.
    Counterexample {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long = "K")]
        max_level: u32,
        #[arg(long)]
        n: u64,
        #[arg(long = "A", default_value = "1")]
        window_a: String,
        #[arg(long, value_enum, default_value = "n")]
        target: TargetArg,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "rational")]
        arithmetic: ArithmeticArg,
        #[command(flatten)]
        out: Output,
    },
    /// Exact point masses against the lattice local CLT.
    CltCompare {
        #[arg(long)]
        dist: String,
        /// `16,32,64`, `range:A:B` or `pow2:A:B`.
        #[arg(long)]
        n_grid: String,
        #[arg(long, default_value = "zero")]
        x: String,
        /// Leave out the span factor (negative control).
        #[arg(long)]
        no_span_factor: bool,
        #[arg(long, value_enum, default_value = "rational")]
        arithmetic: ArithmeticArg,
        /// CSV table path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check a JSON document against the schema.
    Validate { file: PathBuf },
}

#[derive(Subcommand, Debug)]
enum DistAction {
    /// Atoms, moments and lattice data of a builtin name or a JSON file.
    Show {
        name: String,
        #[arg(long = "K")]
        max_level: Option<u32>,
        /// Emit the JSON document instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug)]
struct Output {
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Tower,
    Heavy,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    N,
    SqrtN,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ArithmeticArg {
    Rational,
    Float,
}

impl From<ArithmeticArg> for DpConfig {
    fn from(a: ArithmeticArg) -> Self {
        match a {
            ArithmeticArg::Rational => DpConfig::default(),
            ArithmeticArg::Float => DpConfig::float(),
        }
    }
}

/// Failure of a command: malformed input, or a completed scan that did not pass.
enum Failure {
    Input(Error),
    ScanFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.into())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let line: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let _ = writeln!(err, "{}", line.join(" "));
            return 2;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let mut buf = Vec::new();
    let outcome = pool.install(|| dispatch(cli.command, &mut buf));
    if out.write_all(&buf).and_then(|()| out.flush()).is_err() {
        return 2;
    }
    match outcome {
        Ok(()) => 0,
        Err(Failure::ScanFailed) => 1,
        Err(Failure::Input(e)) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

/// A pool sized by `BALLOTLAB_THREADS`, or rayon's default.
fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("BALLOTLAB_THREADS") {
        let threads: usize = v.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "BALLOTLAB_THREADS must be a positive integer, got `{v}`"
            ))
        })?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start thread pool: {e}")))
}

/// Inline JSON if the argument looks like JSON, else the contents of a file.
fn load_json(arg: &str) -> Result<Value> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_owned()
    } else {
        fs::read_to_string(arg)
            .map_err(|e| Error::InvalidArgument(format!("cannot read `{arg}`: {e}")))?
    };
    Ok(serde_json::from_str(&text)?)
}

fn emit(doc: &Document, dest: &Output, out: &mut dyn Write) -> Result<()> {
    let text = doc.render()?;
    match &dest.out {
        Some(path) => fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn create(path: &Path) -> Result<fs::File> {
    Ok(fs::File::create(path)?)
}

pub fn parse_n_grid(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidArgument(format!("bad n grid `{s}`"));
    let bounds = |rest: &str| -> Result<(u64, u64)> {
        let (a, b) = rest.split_once(':').ok_or_else(bad)?;
        Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
    };
    let grid = if let Some(rest) = s.strip_prefix("range:") {
        let (a, b) = bounds(rest)?;
        NGrid::Range { range: [a, b] }
    } else if let Some(rest) = s.strip_prefix("pow2:") {
        let (a, b) = bounds(rest)?;
        NGrid::PowersOfTwo {
            powers_of_two: [
                u32::try_from(a).map_err(|_| bad())?,
                u32::try_from(b).map_err(|_| bad())?,
            ],
        }
    } else {
        NGrid::List(
            s.split(',')
                .map(|x| x.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?,
        )
    };
    grid.values()
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Dist {
            action:
                DistAction::Show {
                    name,
                    max_level,
                    json,
                },
        } => dist_show(&name, max_level, json, out)?,
        Command::Exact { query, out: dest } => {
            let q = Query::parse(load_json(&query)?)?;
            let doc = q.run_exact()?;
            if let Some(path) = &dest.csv {
                write_csv(&doc, path)?;
            }
            emit(&doc, &dest, out)?;
        }
        Command::Simulate {
            query,
            trials,
            seed,
            streams,
            min_hits,
            out: dest,
        } => {
            let q = Query::parse(load_json(&query)?)?;
            let mut cfg = McConfig::new(trials, seed);
            if let Some(s) = streams {
                cfg = cfg.with_streams(s);
            }
            if let Some(m) = min_hits {
                cfg.min_hits = m;
            }
            let doc = q.run_mc(&cfg)?;
            if let Some(path) = &dest.csv {
                write_csv(&doc, path)?;
            }
            emit(&doc, &dest, out)?;
        }
        Command::Scan {
            config,
            seed,
            out: dest,
        } => {
            let config = ScanConfig::from_json(&load_json(&config)?)?;
            let report = config.run(seed)?;
            let mode = scan_mode(&report, config.arithmetic);
            if let Some(path) = &dest.csv {
                report.write_csv(create(path)?)?;
            }
            let pass = report.pass;
            emit(
                &Document::new(mode, Payload::Scan { config, report }),
                &dest,
                out,
            )?;
            if !pass {
                return Err(Failure::ScanFailed);
            }
        }
        Command::Counterexample {
            family,
            max_level,
            n,
            window_a,
            target,
            trials,
            seed,
            arithmetic,
            out: dest,
        } => {
            let dist = match family {
                FamilyArg::Tower => distributions::tower_distribution(max_level)?,
                FamilyArg::Heavy => distributions::heavy_tower_distribution(max_level, None)?,
            };
            let rule = match target {
                TargetArg::N => TargetRule::N,
                TargetArg::SqrtN => TargetRule::SqrtN,
            };
            let a = rational::parse(&window_a)?;
            let report = harness::counterexample_report(
                &dist,
                n,
                &a,
                rule,
                &McConfig::new(trials, seed),
                &arithmetic.into(),
            )?;
            let mode = schema::Mode::of(&report.joint);
            emit(
                &Document::new(
                    mode,
                    Payload::Counterexample {
                        report: Box::new(report),
                    },
                ),
                &dest,
                out,
            )?;
        }
        Command::CltCompare {
            dist,
            n_grid,
            x,
            no_span_factor,
            arithmetic,
            out: csv_path,
            json,
        } => {
            let d = distributions::builtin(&dist)?;
            let span = if no_span_factor {
                SpanFactor::Omit
            } else {
                SpanFactor::Include
            };
            let cfg: DpConfig = arithmetic.into();
            let rows =
                approx::clt_compare(&d, &parse_n_grid(&n_grid)?, &XRule::parse(&x)?, span, &cfg)?;
            approx::write_clt_csv(&rows, create(&csv_path)?)?;
            if let Some(path) = json {
                let mode = match cfg.arithmetic {
                    Arithmetic::Rational => Mode::Rational,
                    Arithmetic::Float => Mode::Float,
                };
                fs::write(
                    path,
                    Document::new(mode, Payload::CltCompare { rows }).render()?,
                )?;
            }
        }
        Command::Validate { file } => {
            let text = fs::read_to_string(&file).map_err(|e| {
                Error::InvalidArgument(format!("cannot read `{}`: {e}", file.display()))
            })?;
            let v: Value = serde_json::from_str(&text).map_err(Error::from)?;
            let doc = schema::validate(&v)?;
            writeln!(
                out,
                "ok: {} document, schema {}",
                doc.payload.kind(),
                doc.ballotlab_schema
            )?;
        }
    }
    Ok(())
}

fn scan_mode(report: &harness::BoundReport, arithmetic: Arithmetic) -> Mode {
    let mc = report
        .cells
        .iter()
        .filter(|c| c.method == harness::CellMethod::Mc)
        .count();
    match (mc, arithmetic) {
        (0, Arithmetic::Rational) => Mode::Rational,
        (0, Arithmetic::Float) => Mode::Float,
        (m, _) if m == report.cells.len() => Mode::Mc,
        _ => Mode::Mixed,
    }
}

fn write_csv(doc: &Document, path: &Path) -> Result<()> {
    match &doc.payload {
        Payload::Simulate { query, result } => {
            mc::write_records_csv(&[mc::McRecord::new(query.clone(), result)], create(path)?)
        }
        Payload::Exact { query, result } => {
            mc::write_records_csv(&[mc::McRecord::new(query.clone(), result)], create(path)?)
        }
        Payload::Law {
            entries,
            constraint,
            ..
        } => {
            let mut w = csv::Writer::from_writer(create(path)?);
            w.write_record(["x", "mass", "mass_exact", "constraint"])?;
            for e in entries {
                w.write_record([
                    e.x.as_str(),
                    &rational::sig17(e.mass),
                    e.exact.as_deref().unwrap_or(""),
                    constraint,
                ])?;
            }
            w.flush()?;
            Ok(())
        }
        Payload::Chernoff { records } => {
            let mut w = csv::Writer::from_writer(create(path)?);
            w.write_record([
                "m",
                "q",
                "v",
                "t",
                "trials",
                "seed",
                "upper_emp",
                "upper_stderr",
                "upper_bound",
                "lower_emp",
                "lower_stderr",
                "lower_bound",
            ])?;
            for r in records {
                w.write_record([
                    r.m.to_string(),
                    rational::sig17(r.q),
                    rational::sig17(r.v),
                    rational::sig17(r.t),
                    r.trials.to_string(),
                    r.seed.to_string(),
                    rational::sig17(r.upper_emp),
                    rational::sig17(r.upper_stderr),
                    rational::sig17(r.upper_bound),
                    rational::sig17(r.lower_emp),
                    rational::sig17(r.lower_stderr),
                    rational::sig17(r.lower_bound),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
        _ => Err(Error::InvalidArgument(
            "no CSV form for this document".into(),
        )),
    }
}

fn resolve_dist(name: &str, max_level: Option<u32>) -> Result<(StepDistribution, Option<Value>)> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") || path.is_file() {
        let v = load_json(name)?;
        if v.get("levels").is_some() {
            let d = distributions::LeveledDistribution::from_json(&v)?;
            return Ok((d.base.clone(), Some(d.to_json()?)));
        }
        return Ok((StepDistribution::from_json(&v)?, None));
    }
    let full = match (max_level, Family::parse(name)) {
        (Some(k), Ok(_)) => format!("{name}:{k}"),
        (Some(_), Err(_)) => {
            return Err(Error::InvalidArgument(format!(
                "--K applies only to tower and heavy, not `{name}`"
            )))
        }
        (None, _) => name.to_owned(),
    };
    if full.contains(':') {
        let d = distributions::leveled(&full)?;
        let json = d.to_json()?;
        return Ok((d.base, Some(json)));
    }
    Ok((distributions::builtin(&full)?, None))
}

fn dist_show(name: &str, max_level: Option<u32>, json: bool, out: &mut dyn Write) -> Result<()> {
    let (dist, leveled) = resolve_dist(name, max_level)?;
    let lattice = dist.lattice()?;
    if json {
        let summary = DistSummary {
            distribution: match leveled {
                Some(v) => v,
                None => dist.to_json()?,
            },
            mean: dist.mean(),
            mean_exact: dist.mean_exact().map(|m| m.to_string()),
            variance: dist.variance(),
            variance_exact: dist.variance_exact().map(|v| v.to_string()),
            lattice,
        };
        out.write_all(
            Document::new(Mode::Rational, Payload::Distribution(summary))
                .render()?
                .as_bytes(),
        )?;
        return Ok(());
    }
    let atoms = dist.require_atoms()?;
    writeln!(out, "{}: {} atoms", dist.label(), atoms.len())?;
    for a in atoms {
        writeln!(out, "  {:>12}  {}", a.value.to_string(), a.prob)?;
    }
    let render = |exact: Option<&rational::Rational>, value: f64| match exact {
        Some(x) => format!("{x} ({})", rational::sig17(value)),
        None => rational::sig17(value),
    };
    writeln!(out, "mean      {}", render(dist.mean_exact(), dist.mean()))?;
    writeln!(
        out,
        "variance  {}",
        render(dist.variance_exact(), dist.variance())
    )?;
    writeln!(
        out,
        "lattice   span {}  offset {}  period {}",
        lattice.span_h, lattice.offset_z, lattice.period_d
    )?;
    Ok(())
}
