//! Command-line front end.
//!
//! Exit codes: 0 when every requested verification is Verified, 1 on a usage
//! or configuration error, 2 on Violated, 3 on Inconclusive (including
//! computation errors in `eval`).

mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rug::Rational;

use crate::context::{Mode, QContext, TruncationPolicy};
use crate::error::{Error, Result};
use crate::identities::{self, CheckSettings, Grid, Identity, Status};
use crate::qcore::{qbinom, qpoch, qpoch_inf};
use crate::qhyper::{dphi_with, SeriesSpec};
use crate::scalar::Scalar;

pub use report::{eval_json, eval_markdown, probe_json, probe_markdown, report_json, report_markdown};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

/// Smallest precision accepted in float mode.
pub const MIN_PRECISION_BITS: u32 = 64;

#[derive(Parser, Debug)]
#[command(name = "qcalc", version, about = "q-series evaluation and identity verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a single quantity.
    Eval(EvalArgs),
    /// Check a named identity over a parameter grid.
    Verify(VerifyArgs),
    /// Check an identity together with its alternative forms.
    Probe(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Md,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// r-phi-s series (u = 1)
    Phi,
    /// deformed r-Phi-s series with parameter --u
    Dphi,
    /// (a;q)_n, or (a;q)_inf without --n
    Qpoch,
    /// Gaussian binomial [n, k]
    Qbinom,
}

#[derive(Args, Debug, Clone)]
pub struct NumericArgs {
    /// Arithmetic mode; float unless the identity defaults to exact.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Float precision in bits (implies float mode).
    #[arg(long)]
    pub prec: Option<u32>,
    /// Maximum number of series terms.
    #[arg(long)]
    pub terms: Option<usize>,
    /// Relative tail tolerance, e.g. 1e-30.
    #[arg(long)]
    pub tol: Option<String>,
    /// Consecutive small terms required to stop.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub quantity: Quantity,
    /// Upper parameters, comma separated; `q^e` and `c*q^e` are accepted.
    #[arg(long, default_value = "")]
    pub upper: String,
    /// Lower parameters.
    #[arg(long, default_value = "")]
    pub lower: String,
    #[arg(long)]
    pub z: Option<String>,
    #[arg(long)]
    pub q: String,
    #[arg(long)]
    pub u: Option<String>,
    /// Pochhammer base for `qpoch`.
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<i64>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long)]
    pub identity: String,
    /// Grid `name=v1,v2;name=lo..hi`, blocks separated by `|`. Axes left out
    /// take the identity's default values.
    #[arg(long)]
    pub grid: Option<String>,
    /// Values for `n`, overriding the grid.
    #[arg(long)]
    pub n: Option<String>,
    /// Values for `k`, overriding the grid.
    #[arg(long)]
    pub k: Option<String>,
    /// Values for `q`, overriding the grid.
    #[arg(long)]
    pub q: Option<String>,
    /// Multiply every right-hand side by 1 + q^10.
    #[arg(long)]
    pub perturb: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok((text, code)) => {
            let output = match &cli.command {
                Command::Eval(a) => &a.numeric.output,
                Command::Verify(a) | Command::Probe(a) => &a.numeric.output,
            };
            match write_output(output.as_ref(), &text) {
                Ok(()) => code,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

/// Runs a parsed command. `Err` means a usage or configuration error; the
/// rendered report and exit code are returned otherwise.
pub fn run(cli: &Cli) -> Result<(String, i32)> {
    match &cli.command {
        Command::Eval(args) => run_eval(args),
        Command::Verify(args) => run_verify(args),
        Command::Probe(args) => run_probe(args),
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Verified => EXIT_OK,
        Status::Violated => EXIT_VIOLATED,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn mode_of(args: &NumericArgs, default: Mode) -> Result<Mode> {
    let float = |bits: u32| {
        if bits < MIN_PRECISION_BITS {
            Err(Error::InvalidContext(format!(
                "precision {bits} is below {MIN_PRECISION_BITS} bits"
            )))
        } else {
            Ok(Mode::Float { precision_bits: bits })
        }
    };
    let default_bits = match default {
        Mode::Float { precision_bits } => precision_bits,
        Mode::Exact => 128,
    };
    match (args.mode, args.prec) {
        (Some(ModeArg::Exact), Some(_)) => Err(Error::InvalidContext("--prec is meaningless in exact mode".into())),
        (Some(ModeArg::Exact), None) => Ok(Mode::Exact),
        (Some(ModeArg::Float), p) | (None, p @ Some(_)) => float(p.unwrap_or(default_bits)),
        (None, None) => Ok(default),
    }
}

fn truncation_of(args: &NumericArgs) -> Result<TruncationPolicy> {
    let mut t = TruncationPolicy::default();
    if let Some(m) = args.terms {
        t.max_terms = m;
    }
    if let Some(tol) = &args.tol {
        t.rel_tol = Scalar::parse_rational(tol)?;
    }
    if let Some(w) = args.window {
        t.stall_window = w;
    }
    t.validate()?;
    Ok(t)
}

fn identity_of(id: &str) -> Result<Identity> {
    identities::lookup(id).ok_or_else(|| {
        let known: Vec<_> = identities::registry().iter().map(|i| i.id).collect();
        Error::Parse(format!("unknown identity {id:?}; known: {}", known.join(", ")))
    })
}

fn grid_of(args: &VerifyArgs, identity: &Identity) -> Result<Grid> {
    let default = identity.default_grid();
    let mut grid = match &args.grid {
        Some(text) => {
            let mut g = Grid::parse(text)?;
            g.complete_from(&default);
            g
        }
        None => default,
    };
    for (name, values) in [("n", &args.n), ("k", &args.k), ("q", &args.q)] {
        if let Some(text) = values {
            let parsed = Grid::parse(&format!("{name}={text}"))?;
            let point_values = parsed
                .points()?
                .iter()
                .map(|p| p.rational(name).cloned())
                .collect::<Result<Vec<Rational>>>()?;
            grid.set_axis(name, point_values);
        }
    }
    Ok(grid)
}

fn settings_of(args: &VerifyArgs, identity: &Identity) -> Result<CheckSettings> {
    let mut s = CheckSettings::new(mode_of(&args.numeric, identity.default_mode)?);
    s.truncation = truncation_of(&args.numeric)?;
    s.perturb = args.perturb;
    if args.threads == Some(0) {
        return Err(Error::InvalidContext("--threads must be at least 1".into()));
    }
    s.threads = args.threads;
    Ok(s)
}

fn run_verify(args: &VerifyArgs) -> Result<(String, i32)> {
    let identity = identity_of(&args.identity)?;
    let grid = grid_of(args, &identity)?;
    let settings = settings_of(args, &identity)?;
    let report = identities::run_identity(&identity, Some(&grid), &settings)?;
    let text = match args.numeric.format {
        Format::Json => report_json(&report),
        Format::Md => report_markdown(&report),
    };
    Ok((text, exit_code(report.status)))
}

fn run_probe(args: &VerifyArgs) -> Result<(String, i32)> {
    let identity = identity_of(&args.identity)?;
    let grid = grid_of(args, &identity)?;
    let settings = settings_of(args, &identity)?;
    let reports = identities::probe(&identity, Some(&grid), &settings)?;
    let text = match args.numeric.format {
        Format::Json => probe_json(identity.id, &reports),
        Format::Md => probe_markdown(identity.id, &reports),
    };
    Ok((text, exit_code(reports[0].1.status)))
}

/// Parses `p/q`, decimals, `q^e` and products such as `1/5*q^2`.
pub fn parse_value(text: &str, q: &Rational) -> Result<Rational> {
    let mut value = Rational::from(1);
    for factor in text.split('*').map(str::trim) {
        if let Some(e) = factor.strip_prefix("q^") {
            let e: i32 = e
                .trim_matches(|c| c == '(' || c == ')')
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in {factor:?}")))?;
            if *q == 0 && e < 0 {
                return Err(Error::Parse(format!("{factor} with q = 0")));
            }
            value *= rug::ops::Pow::pow(q.clone(), e);
        } else if factor == "q" {
            value *= q;
        } else {
            value *= Scalar::parse_rational(factor)?;
        }
    }
    Ok(value)
}

fn parse_list(text: &str, q: &Rational) -> Result<Vec<Rational>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(s, q))
        .collect()
}

fn run_eval(args: &EvalArgs) -> Result<(String, i32)> {
    let mode = mode_of(&args.numeric, Mode::Exact)?;
    let q = Scalar::parse_rational(&args.q)?;
    let ctx = QContext::new(q.clone(), mode, truncation_of(&args.numeric)?)?;
    let lift = |text: &str| parse_value(text, &q).map(|r| ctx.lift(&r));
    let required = |v: &Option<String>, flag: &str| {
        v.clone()
            .ok_or_else(|| Error::Parse(format!("{flag} is required for this quantity")))
    };
    let mut inputs = vec![("q".to_string(), q.to_string())];
    let list = |v: &[Scalar]| v.iter().map(Scalar::to_canonical_string).collect::<Vec<_>>().join(",");
    let outcome: Result<report::EvalOutput> = match args.quantity {
        Quantity::Phi | Quantity::Dphi => {
            let upper: Vec<Scalar> = parse_list(&args.upper, &q)?.iter().map(|r| ctx.lift(r)).collect();
            let lower: Vec<Scalar> = parse_list(&args.lower, &q)?.iter().map(|r| ctx.lift(r)).collect();
            let z = lift(&required(&args.z, "--z")?)?;
            let u = match (args.quantity, &args.u) {
                (Quantity::Dphi, Some(u)) => lift(u)?,
                (Quantity::Dphi, None) => return Err(Error::Parse("--u is required for dphi".into())),
                _ => ctx.one(),
            };
            inputs.push(("upper".into(), list(&upper)));
            inputs.push(("lower".into(), list(&lower)));
            inputs.push(("z".into(), z.to_string()));
            inputs.push(("u".into(), u.to_string()));
            let spec = SeriesSpec::new(upper, lower, z);
            dphi_with(&spec, &ctx, &u).map(|r| report::EvalOutput {
                value: r.value.clone(),
                error_bound: r.error_bound(),
                terms_used: Some(r.terms_used),
                terminated: Some(format!("{:?}", r.terminated)),
            })
        }
        Quantity::Qpoch => {
            let a = lift(&required(&args.a, "--a")?)?;
            inputs.push(("a".into(), a.to_string()));
            match args.n {
                Some(n) => {
                    inputs.push(("n".into(), n.to_string()));
                    Ok(report::EvalOutput::exact(qpoch(&a, &ctx, n)))
                }
                None => qpoch_inf(&a, &ctx).map(|r| {
                    let terms = r.factors_used;
                    let approx = r.into_approx();
                    report::EvalOutput {
                        value: approx.value,
                        error_bound: approx.bound,
                        terms_used: Some(terms),
                        terminated: None,
                    }
                }),
            }
        }
        Quantity::Qbinom => {
            let n = args.n.ok_or_else(|| Error::Parse("--n is required for qbinom".into()))?;
            let k = args.k.ok_or_else(|| Error::Parse("--k is required for qbinom".into()))?;
            inputs.push(("n".into(), n.to_string()));
            inputs.push(("k".into(), k.to_string()));
            Ok(report::EvalOutput::exact(qbinom(n, k, &ctx)))
        }
    };
    let name = format!("{:?}", args.quantity).to_lowercase();
    let code = if outcome.is_ok() { EXIT_OK } else { EXIT_INCONCLUSIVE };
    let text = match args.numeric.format {
        Format::Json => eval_json(&name, mode, &inputs, &outcome),
        Format::Md => eval_markdown(&name, mode, &inputs, &outcome),
    };
    Ok((text, code))
}
