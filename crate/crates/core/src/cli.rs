//! The `goldprod` command line: tabulation, verification, convergence traces.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a runtime
//! error occurs, 2 for usage errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::Serialize;
use thiserror::Error;

use crate::arithfn::{self, ArithError, ArithFnTable, FnKind};
use crate::bigreal::{BigReal, PrecisionCtx};
use crate::exactnum::{parse_rational, Rational};
use crate::identities::{
    self, EvalPoint, IdentityCheck, IdentityError, Lemma2Report, SpecialVariant,
    TruncationReport,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    FnFile { path: String, message: String },
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "goldprod",
    version,
    about = "Möbius/totient tables and certified evaluation of the golden product identity for e"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Print a table of mu(n) or phi(n) for n = 1..=limit
    Tabulate(TabulateArgs),
    /// Evaluate an identity and certify the truncation error
    Verify {
        #[command(subcommand)]
        target: VerifyArgs,
    },
    /// Write a CSV convergence trace `N,partial,abs_error,tail_bound`
    Converge(ConvergeArgs),
}

#[derive(Debug, Args)]
struct TabulateArgs {
    #[arg(long = "fn", value_enum)]
    function: TableFn,
    #[arg(long)]
    limit: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Common {
    /// Target precision in bits; 64 or more guard bits are added on top
    #[arg(long = "prec-bits", default_value_t = 128, value_parser = clap::value_parser!(u32).range(16..=1_048_576))]
    prec_bits: u32,
    /// Significant decimal digits to print
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    digits: u32,
    /// Report format (csv is only meaningful for tabulate)
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum VerifyArgs {
    /// -Σ f(k)/k ln(1 - x^k) = x/(1-x) for phi, = x for mu
    Lemma1 {
        #[arg(long = "fn", value_enum)]
        function: TableFn,
        /// p/q in (0, 1), or 1/tau
        #[arg(long, value_parser = parse_point)]
        x: EvalPoint,
        #[arg(long, value_parser = parse_terms)]
        terms: usize,
        #[command(flatten)]
        common: Common,
    },
    /// The phi- and mu-sums at x = 1/tau, their targets tau and 1/tau, and their product
    Lemma2 {
        #[arg(long, value_parser = parse_terms)]
        terms: usize,
        #[command(flatten)]
        common: Common,
    },
    /// The product over n <= N against e, and its log-sum against 1
    Theorem {
        #[arg(long, value_parser = parse_terms)]
        terms: usize,
        #[command(flatten)]
        common: Common,
    },
    /// exp(x), exp(x/(1-x)) or exp(x^2/(1-x)) as products over 1 - x^n
    Special {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_parser = parse_rational_point)]
        x: Rational,
        #[arg(long, value_parser = parse_terms)]
        terms: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Π (1 - x^n)^(-f(n)/n) = exp(Σ (1*f)(n)/n x^n) for f read from a file
    General {
        /// CSV lines `n,f(n)` for n = 1, 2, ...; a JSON integer array if the
        /// file ends in .json
        #[arg(long = "f-file")]
        f_file: PathBuf,
        /// C with |f(n)| <= C n, as p/q
        #[arg(long = "growth-c", value_parser = parse_positive_rational)]
        growth_c: Rational,
        #[arg(long, value_parser = parse_rational_point)]
        x: Rational,
        #[arg(long, value_parser = parse_terms)]
        terms: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[arg(long, value_enum)]
    identity: TraceIdentity,
    #[arg(long = "max-terms", value_parser = parse_terms)]
    max_terms: usize,
    #[arg(long, default_value_t = 1, value_parser = parse_terms)]
    stride: usize,
    /// Minimum target precision in bits; raised automatically so rounding
    /// stays below the tail bound at max-terms
    #[arg(long = "prec-bits", default_value_t = 128, value_parser = clap::value_parser!(u32).range(16..=1_048_576))]
    prec_bits: u32,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    digits: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFn {
    Mu,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    #[value(name = "exp_x")]
    ExpX,
    #[value(name = "exp_x_over_1mx")]
    ExpXOver1mx,
    #[value(name = "exp_x2_over_1mx")]
    ExpX2Over1mx,
}

impl From<VariantArg> for SpecialVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::ExpX => SpecialVariant::ExpX,
            VariantArg::ExpXOver1mx => SpecialVariant::ExpXOver1mx,
            VariantArg::ExpX2Over1mx => SpecialVariant::ExpX2Over1mx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceIdentity {
    Theorem,
    Lemma2,
}

fn parse_terms(s: &str) -> Result<usize, String> {
    match usize::from_str(s) {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) if n > arithfn::MAX_SIEVE_LIMIT => {
            Err(format!("must not exceed {}", arithfn::MAX_SIEVE_LIMIT))
        }
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_rational_point(s: &str) -> Result<Rational, String> {
    let q = parse_rational(s).map_err(|e| e.to_string())?;
    if !q.is_positive() || q >= Rational::one() {
        return Err(format!("{q} is not strictly between 0 and 1"));
    }
    Ok(q)
}

fn parse_point(s: &str) -> Result<EvalPoint, String> {
    if s.trim() == "1/tau" {
        return Ok(EvalPoint::InverseTau);
    }
    parse_rational_point(s).map(EvalPoint::Rational)
}

fn parse_positive_rational(s: &str) -> Result<Rational, String> {
    let q = parse_rational(s).map_err(|e| e.to_string())?;
    if !q.is_positive() {
        return Err(format!("{q} must be positive"));
    }
    Ok(q)
}

/// What to run, after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Tabulate {
        function: TableFn,
    },
    VerifyLemma1 {
        function: TableFn,
        x: EvalPoint,
    },
    VerifyLemma2,
    VerifyTheorem,
    VerifySpecial {
        variant: SpecialVariant,
        x: Rational,
    },
    VerifyGeneral {
        f_file: PathBuf,
        growth_c: Rational,
        x: Rational,
    },
    Converge {
        identity: TraceIdentity,
        stride: usize,
    },
}

/// Validated command-line configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    /// Table limit, number of terms, or maximum terms of a trace.
    pub terms: usize,
    pub precision_bits: u32,
    pub digits: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
}

/// Usage problems and `--help` / `--version` requests.
#[derive(Debug)]
pub struct UsageError(clap::Error);

impl UsageError {
    pub fn exit_code(&self) -> i32 {
        if self.0.use_stderr() {
            EXIT_USAGE
        } else {
            EXIT_PASS
        }
    }

    pub fn print(&self) {
        let _ = self.0.print();
    }

    pub fn message(&self) -> String {
        self.0.to_string()
    }
}

/// Parse and validate `argv` (without the program name).
pub fn parse_args<I, S>(argv: I) -> Result<CliConfig, UsageError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = std::iter::once(std::ffi::OsString::from("goldprod"))
        .chain(argv.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(args).map_err(UsageError)?;
    let with_common = |command, terms, c: Common| CliConfig {
        command,
        terms,
        precision_bits: c.prec_bits,
        digits: c.digits as usize,
        format: c.format,
        out: c.out,
    };
    Ok(match cli.command {
        CommandArgs::Tabulate(t) => {
            if t.limit == 0 || t.limit > arithfn::MAX_SIEVE_LIMIT {
                return Err(UsageError(clap::Error::raw(
                    clap::error::ErrorKind::ValueValidation,
                    format!(
                        "invalid value '{}' for '--limit': must be in 1..={}\n",
                        t.limit,
                        arithfn::MAX_SIEVE_LIMIT
                    ),
                )));
            }
            CliConfig {
                command: Command::Tabulate { function: t.function },
                terms: t.limit,
                precision_bits: 128,
                digits: 30,
                format: t.format,
                out: t.out,
            }
        }
        CommandArgs::Verify { target } => match target {
            VerifyArgs::Lemma1 {
                function,
                x,
                terms,
                common,
            } => with_common(Command::VerifyLemma1 { function, x }, terms, common),
            VerifyArgs::Lemma2 { terms, common } => with_common(Command::VerifyLemma2, terms, common),
            VerifyArgs::Theorem { terms, common } => {
                with_common(Command::VerifyTheorem, terms, common)
            }
            VerifyArgs::Special {
                variant,
                x,
                terms,
                common,
            } => with_common(
                Command::VerifySpecial {
                    variant: variant.into(),
                    x,
                },
                terms,
                common,
            ),
            VerifyArgs::General {
                f_file,
                growth_c,
                x,
                terms,
                common,
            } => with_common(
                Command::VerifyGeneral {
                    f_file,
                    growth_c,
                    x,
                },
                terms,
                common,
            ),
        },
        CommandArgs::Converge(c) => CliConfig {
            command: Command::Converge {
                identity: c.identity,
                stride: c.stride,
            },
            terms: c.max_terms,
            precision_bits: c.prec_bits,
            digits: c.digits as usize,
            format: Format::Csv,
            out: Some(c.out),
        },
    })
}

/// Parse, run, and map the outcome to an exit code. Output goes to stdout
/// unless `--out` was given; diagnostics go to stderr.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cfg = match parse_args(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            e.print();
            return e.exit_code();
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run_command(&cfg, &mut lock) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("goldprod: {e}");
            EXIT_FAIL
        }
    }
}

/// Execute a validated configuration. Returns whether every check passed.
///
/// Output is written to `cfg.out` when set, otherwise to `stdout`.
pub fn run_command(cfg: &CliConfig, stdout: &mut dyn Write) -> Result<bool, CliError> {
    if let Command::Converge { identity, stride } = &cfg.command {
        let path = cfg.out.as_deref().expect("converge requires --out");
        return emit_trace(*identity, cfg.terms, *stride, cfg.precision_bits, cfg.digits, path);
    }
    let (body, pass) = render(cfg)?;
    match &cfg.out {
        Some(path) => {
            let mut f = File::create(path).map_err(io_err(path))?;
            f.write_all(body.as_bytes()).map_err(io_err(path))?;
        }
        None => stdout
            .write_all(body.as_bytes())
            .map_err(io_err(Path::new("<stdout>")))?,
    }
    Ok(pass)
}

fn ctx_for(cfg: &CliConfig) -> PrecisionCtx {
    PrecisionCtx::new(cfg.precision_bits).expect("range checked while parsing")
}

fn render(cfg: &CliConfig) -> Result<(String, bool), CliError> {
    let ctx = ctx_for(cfg);
    let d = cfg.digits;
    let sections = match &cfg.command {
        Command::Tabulate { function } => return Ok((tabulate(*function, cfg.terms, cfg.format)?, true)),
        Command::VerifyLemma1 { function, x } => {
            let table = sieve(*function, cfg.terms)?;
            let r = identities::lemma1_sum(&table, x, cfg.terms, None, &ctx)?;
            vec![Section::report(&format!("lemma1 {} at x = {x}", table.kind()), &r, d)]
        }
        Command::VerifyLemma2 => {
            let r = identities::lemma2_pair(cfg.terms, &ctx)?;
            lemma2_sections(&r, d)
        }
        Command::VerifyTheorem => {
            let p = identities::theorem_product(cfg.terms, &ctx)?;
            let s = identities::theorem_log_sum(cfg.terms, &ctx)?;
            vec![
                Section::report("product over (1 - tau^-n)^((mu(n) - phi(n))/n) against e", &p, d),
                Section::report("log-sum of (mu(k) - phi(k))/k ln(1 - tau^-k) against 1", &s, d),
            ]
        }
        Command::VerifySpecial { variant, x } => {
            let r = identities::special_exp_products(*variant, x, cfg.terms, &ctx)?;
            vec![
                Section::check(&format!("{variant} at x = {x}: product vs closed form"), &r.closed_form, d),
                Section::check(&format!("{variant} at x = {x}: product vs exp of (1*f) series"), &r.general, d),
            ]
        }
        Command::VerifyGeneral { f_file, growth_c, x } => {
            let f = read_fn_file(f_file)?;
            let r = identities::general_identity_check(&f, x, cfg.terms, growth_c, &ctx)?;
            vec![Section::check(&format!("general identity at x = {x}"), &r, d)]
        }
        Command::Converge { .. } => unreachable!("handled by run_command"),
    };
    let pass = sections.iter().all(Section::pass);
    let body = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                pass: bool,
                sections: &'a [Section],
            }
            let doc = Doc { pass, sections: &sections };
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable"))
        }
        _ => {
            let mut s = String::new();
            for section in &sections {
                section.write_text(&mut s);
            }
            s.push_str(if pass { "overall: PASS\n" } else { "overall: FAIL\n" });
            s
        }
    };
    Ok((body, pass))
}

fn lemma2_sections(r: &Lemma2Report, d: usize) -> Vec<Section> {
    vec![
        Section::report("phi-sum at x = 1/tau against tau", &r.phi, d),
        Section::report("mu-sum at x = 1/tau against 1/tau", &r.mu, d),
        Section::report("product of the two sums against 1", &r.product, d),
    ]
}

fn sieve(function: TableFn, limit: usize) -> Result<ArithFnTable, ArithError> {
    match function {
        TableFn::Mu => arithfn::sieve_mobius(limit),
        TableFn::Phi => arithfn::sieve_totient(limit),
    }
}

fn tabulate(function: TableFn, limit: usize, format: Format) -> Result<String, CliError> {
    let table = sieve(function, limit)?;
    let name = table.kind().to_string();
    let values = || (1..=limit).map(|n| table.value_i64(n).expect("sieved values fit"));
    let mut out = String::new();
    match format {
        Format::Text => {
            let width = limit.to_string().len();
            for (i, v) in values().enumerate() {
                out.push_str(&format!("{:>width$}  {v}\n", i + 1));
            }
        }
        Format::Csv => {
            out.push_str("n,value\n");
            for (i, v) in values().enumerate() {
                out.push_str(&format!("{},{v}\n", i + 1));
            }
        }
        Format::Json => {
            let doc = serde_json::json!({
                "fn": name,
                "limit": limit,
                "values": values().collect::<Vec<_>>(),
            });
            out = format!("{}\n", serde_json::to_string(&doc).expect("serializable"));
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct ReportView {
    title: String,
    identity: String,
    terms: usize,
    target_bits: u32,
    guard_bits: u32,
    partial: String,
    target: String,
    abs_diff: String,
    tail_bound: String,
    rounding_budget: String,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct CheckView {
    title: String,
    lhs: String,
    rhs: String,
    abs_diff: String,
    bound: String,
    pass: bool,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Section {
    Report(ReportView),
    Check(CheckView),
}

impl Section {
    fn report(title: &str, r: &TruncationReport, d: usize) -> Self {
        Section::Report(ReportView {
            title: title.to_string(),
            identity: r.identity.to_string(),
            terms: r.terms_used,
            target_bits: r.precision.target_bits(),
            guard_bits: r.precision.guard_bits(),
            partial: r.partial.to_decimal_string(d),
            target: r.target.to_decimal_string(d),
            abs_diff: r.abs_diff.to_decimal_string(d),
            tail_bound: r.tail_bound.to_decimal_string(d),
            rounding_budget: r.rounding_budget.to_decimal_string(d),
            pass: r.pass,
        })
    }

    fn check(title: &str, c: &IdentityCheck, d: usize) -> Self {
        Section::Check(CheckView {
            title: title.to_string(),
            lhs: c.lhs.to_decimal_string(d),
            rhs: c.rhs.to_decimal_string(d),
            abs_diff: c.abs_diff.to_decimal_string(d),
            bound: c.bound.to_decimal_string(d),
            pass: c.pass,
        })
    }

    fn pass(&self) -> bool {
        match self {
            Section::Report(r) => r.pass,
            Section::Check(c) => c.pass,
        }
    }

    fn write_text(&self, s: &mut String) {
        let verdict = |p: bool| if p { "PASS" } else { "FAIL" };
        match self {
            Section::Report(r) => {
                s.push_str(&format!("== {} [{}]\n", r.title, r.identity));
                s.push_str(&format!("terms:      {}\n", r.terms));
                s.push_str(&format!(
                    "precision:  {} bits (+{} guard)\n",
                    r.target_bits, r.guard_bits
                ));
                s.push_str(&format!("partial:    {}\n", r.partial));
                s.push_str(&format!("target:     {}\n", r.target));
                s.push_str(&format!("|diff|:     {}\n", r.abs_diff));
                s.push_str(&format!("tail bound: {}\n", r.tail_bound));
                s.push_str(&format!("rounding:   {}\n", r.rounding_budget));
                s.push_str(&format!("result:     {}\n\n", verdict(r.pass)));
            }
            Section::Check(c) => {
                s.push_str(&format!("== {}\n", c.title));
                s.push_str(&format!("lhs:        {}\n", c.lhs));
                s.push_str(&format!("rhs:        {}\n", c.rhs));
                s.push_str(&format!("|diff|:     {}\n", c.abs_diff));
                s.push_str(&format!("bound:      {}\n", c.bound));
                s.push_str(&format!("result:     {}\n\n", verdict(c.pass)));
            }
        }
    }
}

/// Read a custom arithmetic function.
///
/// CSV: one `n,f(n)` record per line with `n = 1, 2, ...` contiguous; a
/// leading header line is skipped. JSON (`.json` extension): an array of
/// integers, or of decimal integer strings for values beyond 64 bits.
pub fn read_fn_file(path: &Path) -> Result<ArithFnTable, CliError> {
    let bad = |message: String| CliError::FnFile {
        path: path.display().to_string(),
        message,
    };
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let values = if is_json {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let items = doc
            .as_array()
            .ok_or_else(|| bad("expected a JSON array of integers".into()))?;
        items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let text = match v {
                    serde_json::Value::Number(n) if n.is_i64() || n.is_u64() => n.to_string(),
                    serde_json::Value::String(s) => s.clone(),
                    other => return Err(bad(format!("entry {} is not an integer: {other}", i + 1))),
                };
                BigInt::from_str(text.trim())
                    .map_err(|_| bad(format!("entry {} is not an integer: {text}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let file = File::open(path).map_err(io_err(path))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(file);
        let mut values = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            if record.len() != 2 {
                return Err(bad(format!("line {}: expected `n,f(n)`", i + 1)));
            }
            let n = match usize::from_str(&record[0]) {
                Ok(n) => n,
                Err(_) if i == 0 => continue,
                Err(_) => return Err(bad(format!("line {}: bad index {:?}", i + 1, &record[0]))),
            };
            if n != values.len() + 1 {
                return Err(bad(format!(
                    "line {}: expected n = {}, found {n}",
                    i + 1,
                    values.len() + 1
                )));
            }
            let v = BigInt::from_str(&record[1])
                .map_err(|_| bad(format!("line {}: f({n}) = {:?} is not an integer", i + 1, &record[1])))?;
            values.push(v);
        }
        values
    };
    if values.is_empty() {
        return Err(bad("no values".into()));
    }
    Ok(ArithFnTable::from_values(FnKind::Custom, values)?)
}

/// Bits needed so that `2^-bits` sits well below the theorem/lemma tail
/// bound at `max_terms` (both decay like `tau^-N`, `log2 tau < 0.7`).
fn trace_precision(requested: u32, max_terms: usize) -> u32 {
    let needed = (max_terms as f64 * 0.7).ceil() as u32 + 16;
    requested.max(needed).min(crate::bigreal::MAX_TARGET_BITS)
}

/// CSV trace with header `N,partial,abs_error,tail_bound`, one row for each
/// `N = stride, 2 stride, ... <= max_terms`. Returns whether every row passed.
pub fn emit_trace(
    identity: TraceIdentity,
    max_terms: usize,
    stride: usize,
    precision_bits: u32,
    digits: usize,
    out: &Path,
) -> Result<bool, CliError> {
    let ctx = PrecisionCtx::new(trace_precision(precision_bits, max_terms))
        .expect("range checked while parsing");
    let rows: Vec<TruncationReport> = match identity {
        TraceIdentity::Theorem => identities::theorem_trace(max_terms, stride, &ctx)?
            .into_iter()
            .map(|(product, _)| product)
            .collect(),
        TraceIdentity::Lemma2 => identities::lemma2_trace(max_terms, stride, &ctx)?
            .into_iter()
            .map(|r| r.product)
            .collect(),
    };
    let file = File::create(out).map_err(io_err(out))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| CliError::Io {
        path: out.display().to_string(),
        source: e.into(),
    };
    w.write_record(["N", "partial", "abs_error", "tail_bound"])
        .map_err(csv_err)?;
    for r in &rows {
        let fmt = |x: &BigReal| x.to_decimal_string(digits);
        w.write_record([
            r.terms_used.to_string(),
            fmt(&r.partial),
            fmt(&r.abs_diff),
            fmt(&r.tail_bound),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(out))?;
    Ok(rows.iter().all(|r| r.pass))
}
