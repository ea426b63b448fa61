//! Command-line front end: argument parsing, model ingestion, and report emission.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::catalog::{load_model_json, BuiltModel};
use crate::clogic::report::{tally, AxiomReport, SuiteConfig};
use crate::clogic::{axiom_instances, parse_axiom_range, run_suite, BallSearch, Interpretation, Strategy};
use crate::definability::{run_chain, ChainOptions, StageRow, Sweep};
use crate::error::{Error, Result};
use crate::lemmas::{verify_lemma, Lemma, LemmaOptions, LemmaReport};
use crate::model::{mat_from_json, CJson, Operator};
use crate::modular::ModularCalculus;
use crate::sampling::random_in_ball;

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "WSTAR_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "wstar", version, about = "Checks the W*-probability-space axioms and lemmas on matrix models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate axiom instances on a model.
    CheckAxioms {
        #[command(flatten)]
        common: Common,
        /// Axiom numbers, e.g. "1-20" or "1-3,21".
        #[arg(long, default_value = "1-20")]
        axioms: String,
        /// Lattice spacing of Gamma for axioms (21)–(23): "ln2", "ln(3)", "ln1/2" or a number.
        #[arg(long)]
        gamma: Option<String>,
        /// Record per-instance wall-clock time (makes reports non-reproducible).
        #[arg(long)]
        timing: bool,
        /// Omit witnesses from the JSON report.
        #[arg(long)]
        no_witness: bool,
    },
    /// Run a randomized lemma battery.
    VerifyLemmas {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        lemma: LemmaArg,
        /// Restrict the forms battery to this alpha.
        #[arg(long)]
        alpha: Option<f64>,
        /// Restrict the forms battery to this beta (requires --alpha).
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Print Sp(sigma) and, optionally, the Arveson spectrum of an operator.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// JSON file holding a matrix ([[{"re":..,"im":..},..],..]) or {"unit":[i,j]}.
        #[arg(long)]
        operator: Option<PathBuf>,
        /// A constant symbol of the model, e.g. "w01".
        #[arg(long)]
        constant: Option<String>,
    },
    /// Certify the definability chain stage by stage on a random pair (x, y).
    Definability {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Model JSON file: {"recipe": {...}} or {"dim": n, "rho": {...}}.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// RNG seed; the WSTAR_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Trials per check (lemmas) or random starts per search (axioms).
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LemmaArg {
    Contprod,
    Normg,
    Contmod,
    Spectral,
    Forms,
}

impl From<LemmaArg> for Lemma {
    fn from(l: LemmaArg) -> Self {
        match l {
            LemmaArg::Contprod => Lemma::ContProd,
            LemmaArg::Normg => Lemma::NormG,
            LemmaArg::Contmod => Lemma::ContMod,
            LemmaArg::Spectral => Lemma::Spectral,
            LemmaArg::Forms => Lemma::Forms,
        }
    }
}

/// A rendered report plus the exit code it implies.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
}

/// Parses `lnX`, `ln(X)` (X a number or a/b) or a plain number; returns |value| > 0.
pub fn parse_gamma(s: &str) -> Result<f64> {
    let bad = || Error::BadParameters(format!("cannot parse gamma {s:?}"));
    let t = s.trim();
    let num = |u: &str| -> Result<f64> {
        let u = u.trim();
        match u.split_once('/') {
            Some((a, b)) => {
                let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                Ok(a / b)
            }
            None => u.parse().map_err(|_| bad()),
        }
    };
    let v = match t.strip_prefix("ln") {
        Some(rest) => {
            let inner = rest.trim().strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(rest);
            let x = num(inner)?;
            if !(x > 0.0) {
                return Err(bad());
            }
            x.ln()
        }
        None => num(t)?,
    };
    let v = v.abs();
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::BadParameters(format!("gamma must be nonzero and finite, got {s:?}")));
    }
    Ok(v)
}

/// The effective seed: `WSTAR_SEED` (if set) overrides the configured one.
pub fn effective_seed(configured: u64, env: Option<&str>) -> Result<u64> {
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::BadParameters(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        None => Ok(configured),
    }
}

fn load_model(common: &Common) -> Result<BuiltModel> {
    let text = std::fs::read_to_string(&common.model)?;
    load_model_json(&text)
}

fn validate_common(common: &Common) -> Result<()> {
    if !(common.tol > 0.0 && common.tol.is_finite()) {
        return Err(Error::BadParameters(format!("tol must be positive, got {}", common.tol)));
    }
    if common.samples == 0 {
        return Err(Error::BadParameters("samples must be positive".into()));
    }
    Ok(())
}

fn envelope(command: &str, common: &Common, seed: u64, payload: Value) -> Value {
    let mut v = json!({
        "v": SCHEMA_VERSION,
        "command": command,
        "model": common.model.display().to_string(),
        "seed": seed,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, payload) {
        dst.extend(src);
    }
    v
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Runs one parsed command; `env_seed` is the value of `WSTAR_SEED`, if any.
pub fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<Outcome> {
    let common = match &cli.command {
        Command::CheckAxioms { common, .. }
        | Command::VerifyLemmas { common, .. }
        | Command::Spectrum { common, .. }
        | Command::Definability { common } => common,
    };
    validate_common(common)?;
    let seed = effective_seed(common.seed, env_seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| Error::BadParameters(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::CheckAxioms { axioms, gamma, timing, no_witness, .. } => {
            check_axioms(common, seed, axioms, gamma.as_deref(), *timing, !*no_witness)
        }
        Command::VerifyLemmas { lemma, alpha, beta, .. } => verify_lemmas(common, seed, (*lemma).into(), *alpha, *beta),
        Command::Spectrum { operator, constant, .. } => spectrum(common, seed, operator.as_ref(), constant.as_deref()),
        Command::Definability { .. } => definability(common, seed),
    })
}

fn check_axioms(common: &Common, seed: u64, axioms: &str, gamma: Option<&str>, timing: bool, witness: bool) -> Result<Outcome> {
    let ids = parse_axiom_range(axioms)?;
    let built = load_model(common)?;
    let mut inst = built.instantiation();
    if let Some(g) = gamma {
        inst.gamma = Some(parse_gamma(g)?);
    }
    let mut instances = Vec::new();
    for &n in &ids {
        instances.extend(axiom_instances(n, &inst)?);
    }
    let interp = Interpretation::with_constants(ModularCalculus::new(built.model.clone()), &built.constants)?;
    let search = BallSearch {
        strategy: Strategy::MultiStartDescent { starts: common.samples, iters: 200, step: 0.25 },
        seed,
        ..Default::default()
    };
    let cfg = SuiteConfig { search, tol: common.tol, timing, include_witness: witness, expected_fail: BTreeSet::new(), ..Default::default() };
    let reports = run_suite(&interp, &instances, &cfg)?;
    let (pass, unexpected, expected) = tally(&reports);
    let code = if unexpected == 0 { EXIT_OK } else { EXIT_FAIL };
    let body = match common.format {
        Format::Json => to_json(&envelope(
            "check-axioms",
            common,
            seed,
            json!({
                "axioms": ids,
                "gamma": inst.gamma,
                "tol": common.tol,
                "summary": {"instances": reports.len(), "pass": pass, "unexpected_fail": unexpected, "expected_fail": expected},
                "reports": reports,
            }),
        ))?,
        Format::Text => axiom_table(&reports, pass, unexpected, expected),
    };
    Ok(Outcome { code, body })
}

fn verdict(r: &AxiomReport) -> &'static str {
    match (r.pass, r.expected_fail) {
        (true, _) => "PASS",
        (false, true) => "XFAIL",
        (false, false) => "FAIL",
    }
}

pub fn axiom_table(reports: &[AxiomReport], pass: usize, unexpected: usize, expected: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6} {:<56} {:<11} {:>12} {:>10} {:<6}", "AXIOM", "INSTANCE", "KIND", "VALUE", "TOL", "RESULT");
    for r in reports {
        let kind = format!("{:?}", r.kind).to_lowercase();
        let _ = writeln!(s, "{:<6} {:<56} {:<11} {:>12.4e} {:>10.1e} {:<6}", r.axiom, r.id, kind, r.value, r.tolerance, verdict(r));
    }
    let _ = writeln!(s, "instances {}  pass {}  fail {}  expected fail {}", reports.len(), pass, unexpected, expected);
    s
}

fn verify_lemmas(common: &Common, seed: u64, lemma: Lemma, alpha: Option<f64>, beta: Option<f64>) -> Result<Outcome> {
    let built = load_model(common)?;
    let mc = ModularCalculus::new(built.model);
    let opts = LemmaOptions { samples: common.samples, seed, alpha, beta };
    let report = verify_lemma(&mc, lemma, &opts)?;
    let code = if report.pass { EXIT_OK } else { EXIT_FAIL };
    let body = match common.format {
        Format::Json => to_json(&envelope(
            "verify-lemmas",
            common,
            seed,
            json!({"lemma": lemma, "worst_margin": report.worst_margin(), "report": report}),
        ))?,
        Format::Text => lemma_table(&report),
    };
    Ok(Outcome { code, body })
}

pub fn lemma_table(r: &LemmaReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<60} {:>7} {:>5} {:>13} {:>11} {:<6}", "CHECK", "TRIALS", "VIOL", "WORST_MARGIN", "WORST_RATIO", "RESULT");
    for c in &r.checks {
        let res = if c.pass() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{:<60} {:>7} {:>5} {:>13.4e} {:>11.4e} {:<6}", c.name, c.trials, c.violations, c.worst_margin, c.worst_ratio, res);
    }
    let _ = writeln!(s, "lemma {}  worst margin {:.4e}  {}", r.lemma.name(), r.worst_margin(), if r.pass { "PASS" } else { "FAIL" });
    s
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum OperatorFile {
    Unit { unit: [usize; 2] },
    Matrix(Vec<Vec<CJson>>),
}

fn load_operator(path: &PathBuf, dim: usize) -> Result<Operator> {
    let text = std::fs::read_to_string(path)?;
    let op = match serde_json::from_str::<OperatorFile>(&text)? {
        OperatorFile::Unit { unit: [i, j] } => {
            if i >= dim || j >= dim {
                return Err(Error::BadDimension(format!("unit ({i}, {j}) outside M_{dim}")));
            }
            Operator::unit(dim, i, j)
        }
        OperatorFile::Matrix(rows) => Operator::new(mat_from_json(&rows)?),
    };
    if op.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: op.dim() });
    }
    Ok(op)
}

/// Parses "w01" / "w_0_1" / "w_{0,1}" style constant names.
fn parse_constant(name: &str) -> Option<(usize, usize)> {
    let body = name.strip_prefix('w')?.trim_start_matches('_').trim_start_matches('{').trim_end_matches('}');
    let parts: Vec<&str> = body.split(|c| c == ',' || c == '_').filter(|p| !p.is_empty()).collect();
    match parts.as_slice() {
        [a, b] => Some((a.parse().ok()?, b.parse().ok()?)),
        [ab] if ab.len() == 2 => Some((ab[..1].parse().ok()?, ab[1..].parse().ok()?)),
        _ => None,
    }
}

fn spectrum(common: &Common, seed: u64, operator: Option<&PathBuf>, constant: Option<&str>) -> Result<Outcome> {
    let built = load_model(common)?;
    let mc = ModularCalculus::new(built.model.clone());
    let x = match (operator, constant) {
        (Some(_), Some(_)) => return Err(Error::BadParameters("give --operator or --constant, not both".into())),
        (Some(p), None) => Some(load_operator(p, mc.dim())?),
        (None, Some(name)) => {
            let key = parse_constant(name).ok_or_else(|| Error::UnknownConstant(name.into()))?;
            Some(built.constants.get(&key).cloned().ok_or_else(|| Error::UnknownConstant(name.into()))?)
        }
        (None, None) => None,
    };
    let flow = mc.flow_spectrum();
    let op_spec = match &x {
        Some(x) => {
            mc.check(x)?;
            Some(mc.arveson_spectrum(x, common.tol))
        }
        None => None,
    };
    let body = match common.format {
        Format::Json => to_json(&envelope(
            "spectrum",
            common,
            seed,
            json!({"eigenvalues": mc.p(), "flow_spectrum": flow, "operator_spectrum": op_spec}),
        ))?,
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "{:<20} {:>22}", "SET", "FREQUENCY");
            for r in &flow {
                let _ = writeln!(s, "{:<20} {:>22.15}", "Sp(sigma)", r);
            }
            for r in op_spec.iter().flatten() {
                let _ = writeln!(s, "{:<20} {:>22.15}", "Spec_sigma(x)", r);
            }
            s
        }
    };
    Ok(Outcome { code: EXIT_OK, body })
}

fn definability(common: &Common, seed: u64) -> Result<Outcome> {
    let built = load_model(common)?;
    let mc = ModularCalculus::new(built.model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_in_ball(mc.dim(), 1.0, &mut rng);
    let y = random_in_ball(mc.dim(), 1.0, &mut rng);
    let rows = run_chain(&mc, &Sweep::default(), &x, &y, &ChainOptions::default())?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    let code = if failed == 0 { EXIT_OK } else { EXIT_FAIL };
    let body = match common.format {
        Format::Json => to_json(&envelope(
            "definability",
            common,
            seed,
            json!({"summary": {"rows": rows.len(), "failed": failed}, "stages": rows}),
        ))?,
        Format::Text => stage_table(&rows),
    };
    Ok(Outcome { code, body })
}

pub fn stage_table(rows: &[StageRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:<48} {:>12} {:>12} {:>12} {:<6}", "STAGE", "PARAMS", "VALUE", "GAP", "BOUND", "RESULT");
    for r in rows {
        let res = if r.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{:<12} {:<48} {:>12.4e} {:>12.4e} {:>12.4e} {:<6}", r.stage, r.params, r.value, r.gap, r.bound, res);
    }
    s
}

/// Machine-readable error line for stderr.
pub fn error_json(kind: &str, message: &str) -> String {
    json!({"v": SCHEMA_VERSION, "error": {"kind": kind, "message": message}}).to_string()
}

/// Full entry point: parses `args`, runs, writes output, and returns the exit code.
pub fn run<I, T>(args: I, env_seed: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            eprintln!("{}", error_json("Usage", e.to_string().trim()));
            return EXIT_INVALID;
        }
    };
    let out_path = match &cli.command {
        Command::CheckAxioms { common, .. }
        | Command::VerifyLemmas { common, .. }
        | Command::Spectrum { common, .. }
        | Command::Definability { common } => common.out.clone(),
    };
    match execute(&cli, env_seed) {
        Ok(o) => {
            let written = match &out_path {
                Some(p) => std::fs::write(p, &o.body).map_err(Error::from),
                None => {
                    print!("{}", o.body);
                    Ok(())
                }
            };
            match written {
                Ok(()) => o.code,
                Err(e) => {
                    eprintln!("{}", error_json(e.kind(), &e.to_string()));
                    EXIT_INVALID
                }
            }
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            EXIT_INVALID
        }
    }
}
