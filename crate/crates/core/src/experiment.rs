//! Batch experiment runner behind the `querylab` binary.
//!
//! Every subcommand produces a table (CSV or JSON) plus a list of bound
//! checks. Exit codes: 0 when all checks pass, 1 when a check fails, 2 for
//! invalid configuration.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::circuit::{f_eval, single_qubit_sim, tensor_sim, ShiftedProductFunction, DEFAULT_QUBIT_CAP};
use crate::error::{invalid, LabError};
use crate::game::{bounds, estimate_win_cdf, CdfRow, StrategyKind};
use crate::info::{identification_trials, transcript_mi_profile, MI_MAX_N};
use crate::oracle::RandomStack;
use crate::torus::TorusPoint;
use crate::training::{default_alpha, divergence_experiment, exit_time_experiment, median_queries, training_runs, TrainerKind};

/// Seed used when neither `--seed` nor `QUERYLAB_SEED` is given.
pub const DEFAULT_SEED: u64 = 20190329;

/// Environment variable consulted for the default seed.
pub const SEED_ENV: &str = "QUERYLAB_SEED";

/// Largest n accepted by the sampling subcommands (3^n must fit in 64 bits).
const MAX_N: usize = 40;

/// Largest n for the identification scan over 3^n candidates.
const IDENTIFY_MAX_N: usize = 12;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUND_VIOLATED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "querylab",
    version,
    about = "Query-complexity experiments for shifted product circuit families",
    after_help = "CSV columns per subcommand:\n  \
        verify-circuit: n,trials,max_abs_diff,tolerance,pass\n  \
        bounds:         n,delta,p_exact,p_hoeffding\n  \
        game:           m,empirical,stderr,bound,violated\n  \
        train:          trial,hidden,queries_total,first_exit,succeeded\n  \
        exit-time:      m,empirical,stderr,bound,violated\n  \
        diverge:        m,empirical,stderr,bound,violated\n  \
        mi:             m,mi_bits,stderr,per_query_ratio\n  \
        identify:       n,trials,unique_correct,unique_wrong,ambiguous,rate\n\n\
        Exit codes: 0 all checks pass, 1 a bound check failed beyond 3 standard errors, 2 invalid configuration."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed [env: QUERYLAB_SEED; default 20190329]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads (defaults to available parallelism)
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Cross-check the state-vector simulator against the product formula
    VerifyCircuit {
        #[arg(long, default_value_t = 3)]
        n_max: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Tabulate delta, exact p and the Hoeffding bound on p
    Bounds {
        #[arg(long, default_value_t = 12)]
        n_max: usize,
    },
    /// Empirical win-time CDF of the plateau game
    Game {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        games: usize,
        #[arg(long, default_value_t = 50)]
        m_max: usize,
        /// uniform | sweep | adaptive
        #[arg(long, default_value = "uniform")]
        strategy: String,
    },
    /// Run a trainer against random family members and count queries
    Train {
        /// random | spsa | pshift
        #[arg(long, default_value = "random")]
        algo: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        /// Success slack; defaults to 1 - 2(2/3)^(n/2)
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Empirical CDF of the first query outside the hidden plateau
    ExitTime {
        #[arg(long, default_value = "random")]
        algo: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 50)]
        m_max: usize,
    },
    /// Divergence of coupled runs on the true and plateau-clamped functions
    Diverge {
        #[arg(long, default_value = "random")]
        algo: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eta: f64,
    },
    /// Mutual information between the hidden shift and sample transcripts
    Mi {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 10_000)]
        transcripts: usize,
        /// uniform | sweep | fixed (query the origin every round)
        #[arg(long, default_value = "uniform")]
        strategy: String,
    },
    /// Identify the hidden member from one exact evaluation query
    Identify {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyCircuit { .. } => "verify-circuit",
            Command::Bounds { .. } => "bounds",
            Command::Game { .. } => "game",
            Command::Train { .. } => "train",
            Command::ExitTime { .. } => "exit-time",
            Command::Diverge { .. } => "diverge",
            Command::Mi { .. } => "mi",
            Command::Identify { .. } => "identify",
        }
    }
}

/// Everything that determines an experiment's rows.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: String,
    pub command: Command,
    pub seed: u64,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    /// The result under test.
    pub lemma: String,
    pub passed: bool,
    /// Slack to the bound in standard errors (negative when violated).
    pub margin_sigma: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Real(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<usize>> for Cell {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Cell::Empty, Cell::from)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    fn to_json_rows(&self) -> Vec<Value> {
        self.rows
            .iter()
            .map(|row| {
                let map: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                Value::Object(map)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Value>,
    pub summary: Map<String, Value>,
    pub checks: Vec<BoundCheck>,
    pub wall_time_s: f64,
}

/// Rows, checks and free-form summary of one experiment.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub table: Table,
    pub checks: Vec<BoundCheck>,
    pub summary: Map<String, Value>,
}

impl Outcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn cdf_outcome(rows: &[CdfRow], name: &str, lemma: &str) -> Outcome {
    let mut table = Table::new(&["m", "empirical", "stderr", "bound", "violated"]);
    for r in rows {
        table.push(vec![r.m.into(), r.empirical.into(), r.stderr.into(), r.bound.into(), r.violated.into()]);
    }
    let worst = rows
        .iter()
        .map(CdfRow::margin_sigma)
        .fold(f64::INFINITY, f64::min);
    let violations: Vec<usize> = rows.iter().filter(|r| r.violated).map(|r| r.m).collect();
    Outcome {
        table,
        checks: vec![BoundCheck {
            name: name.to_string(),
            lemma: lemma.to_string(),
            passed: violations.is_empty(),
            margin_sigma: worst.is_finite().then_some(worst),
            detail: if violations.is_empty() {
                format!("all {} rows within bound + 3 stderr", rows.len())
            } else {
                format!("violated at m = {violations:?}")
            },
        }],
        summary: Map::new(),
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<(), LabError> {
    if cond {
        Ok(())
    } else {
        Err(invalid(msg))
    }
}

fn check_n(n: usize, lo: usize, hi: usize) -> Result<(), LabError> {
    require((lo..=hi).contains(&n), format!("--n {n} is out of range {lo}..={hi}"))
}

fn strategy_for(name: &str, n: usize) -> Result<StrategyKind, LabError> {
    match name {
        "fixed" => Ok(StrategyKind::Fixed(TorusPoint::zeros(n))),
        other => StrategyKind::parse(other),
    }
}

/// Runs one experiment. Invalid configurations surface as `InvalidArgument`.
pub fn execute(command: &Command, seed: u64) -> Result<Outcome, LabError> {
    match command {
        Command::VerifyCircuit { n_max, trials } => {
            check_n(*n_max, 1, DEFAULT_QUBIT_CAP)?;
            require(*trials >= 1, "--trials must be at least 1")?;
            const TOL: f64 = 1e-9;
            let mut table = Table::new(&["n", "trials", "max_abs_diff", "tolerance", "pass"]);
            let mut passed = true;
            for n in 1..=*n_max {
                let mut stack = RandomStack::new(seed, n as u64);
                let mut worst: f64 = 0.0;
                for _ in 0..*trials {
                    let f = ShiftedProductFunction::new(stack.pop_shift(n))?;
                    let x = stack.pop_point(n);
                    worst = worst.max((tensor_sim(&f, &x)? - f_eval(&f, &x)?).abs());
                }
                passed &= worst <= TOL;
                table.push(vec![n.into(), (*trials).into(), worst.into(), TOL.into(), (worst <= TOL).into()]);
            }
            let anchors = [(0.0, 1.0), (1.0 / 3.0, 0.0), (2.0 / 3.0, 0.0)];
            let anchor_err = anchors
                .iter()
                .map(|&(x, want)| (single_qubit_sim(x) - want).abs())
                .fold(0.0, f64::max);
            Ok(Outcome {
                table,
                checks: vec![
                    BoundCheck {
                        name: "tensor-vs-product".into(),
                        lemma: "tensor product of circuits realizes product of expectation functions".into(),
                        passed,
                        margin_sigma: None,
                        detail: format!("max |tensor_sim - f_eval| <= {TOL:e}"),
                    },
                    BoundCheck {
                        name: "circuit-anchors".into(),
                        lemma: "atomic circuit gives 1, 0, 0 at x = 0, 1/3, 2/3".into(),
                        passed: anchor_err <= 1e-12,
                        margin_sigma: None,
                        detail: format!("max anchor error {anchor_err:e}"),
                    },
                ],
                summary: Map::new(),
            })
        }
        Command::Bounds { n_max } => {
            require(*n_max >= 1 && *n_max <= 4096, "--n-max must be in 1..=4096")?;
            let mut table = Table::new(&["n", "delta", "p_exact", "p_hoeffding"]);
            let mut bad = Vec::new();
            for n in 1..=*n_max {
                let b = bounds(n)?;
                if b.p_exact > b.p_hoeffding {
                    bad.push(n);
                }
                table.push(vec![n.into(), b.delta.into(), b.p_exact.into(), b.p_hoeffding.into()]);
            }
            Ok(Outcome {
                table,
                checks: vec![BoundCheck {
                    name: "p-exact-below-hoeffding".into(),
                    lemma: "p <= exp(-n/36)".into(),
                    passed: bad.is_empty(),
                    margin_sigma: None,
                    detail: if bad.is_empty() { "holds for every n".into() } else { format!("fails at n = {bad:?}") },
                }],
                summary: Map::new(),
            })
        }
        Command::Game { n, games, m_max, strategy } => {
            check_n(*n, 1, MAX_N)?;
            require(*games >= 1, "--games must be at least 1")?;
            let kind = strategy_for(strategy, *n)?;
            let rows = estimate_win_cdf(*n, &kind, *games, *m_max, seed)?;
            Ok(cdf_outcome(&rows, "plateau-game", "P(M_A <= m) <= p m"))
        }
        Command::Train { algo, n, trials, budget, alpha } => {
            check_n(*n, 1, MAX_N)?;
            require(*trials >= 1, "--trials must be at least 1")?;
            let kind = TrainerKind::parse(algo)?;
            let alpha = match alpha {
                Some(a) => *a,
                None => default_alpha(*n)?,
            };
            let runs = training_runs(kind, *n, alpha, *budget, *trials, seed)?;
            let mut table = Table::new(&["trial", "hidden", "queries_total", "first_exit", "succeeded"]);
            let mut discipline = true;
            for (t, r) in runs.iter().enumerate() {
                discipline &= r.output.as_ref().is_none_or(|o| r.transcript.contains_point(o));
                discipline &= r.queries_total <= r.budget + 1;
                table.push(vec![
                    t.into(),
                    r.hidden.to_string().into(),
                    r.queries_total.into(),
                    r.first_exit.into(),
                    r.succeeded.into(),
                ]);
            }
            let mut summary = Map::new();
            summary.insert("alpha".into(), Value::from(alpha));
            summary.insert("median_queries".into(), median_queries(&runs).map_or(Value::Null, Value::from));
            summary.insert(
                "success_rate".into(),
                Value::from(runs.iter().filter(|r| r.succeeded).count() as f64 / runs.len() as f64),
            );
            Ok(Outcome {
                table,
                checks: vec![BoundCheck {
                    name: "output-queried".into(),
                    lemma: "an alpha-successful trainer queries the point it outputs".into(),
                    passed: discipline,
                    margin_sigma: None,
                    detail: "every output appears in its transcript, at most one extra query".into(),
                }],
                summary,
            })
        }
        Command::ExitTime { algo, n, trials, m_max } => {
            check_n(*n, 1, MAX_N)?;
            require(*trials >= 1, "--trials must be at least 1")?;
            let kind = TrainerKind::parse(algo)?;
            let rows = exit_time_experiment(kind, *n, *m_max, *trials, seed)?;
            Ok(cdf_outcome(&rows, "first-exit", "P(T'_A <= m) <= (p + delta/2) m"))
        }
        Command::Diverge { algo, n, m, trials, eta } => {
            check_n(*n, 4, MAX_N)?;
            require(*trials >= 1, "--trials must be at least 1")?;
            require((-1.0..=1.0).contains(eta), "--eta must lie in [-1, 1]")?;
            let kind = TrainerKind::parse(algo)?;
            let est = divergence_experiment(kind, *n, *m, *trials, *eta, seed)?;
            Ok(cdf_outcome(&est.table, "coupled-divergence", "P(diverge within m) <= delta m / 2"))
        }
        Command::Mi { n, m, transcripts, strategy } => {
            check_n(*n, 1, MI_MAX_N)?;
            require(*transcripts >= 1, "--transcripts must be at least 1")?;
            let kind = strategy_for(strategy, *n)?;
            require(kind != StrategyKind::Adaptive, "mi needs a non-adaptive strategy")?;
            let rows = transcript_mi_profile(*n, &kind, *m, *transcripts, seed)?;
            let cap = *n as f64 * 3f64.log2();
            let mut table = Table::new(&["m", "mi_bits", "stderr", "per_query_ratio"]);
            let mut bad = Vec::new();
            for r in &rows {
                if r.mi_bits < -3.0 * r.stderr - 1e-12 || r.mi_bits > cap + 3.0 * r.stderr {
                    bad.push(r.m);
                }
                table.push(vec![r.m.into(), r.mi_bits.into(), r.stderr.into(), r.per_query_ratio.into()]);
            }
            Ok(Outcome {
                table,
                checks: vec![BoundCheck {
                    name: "information-range".into(),
                    lemma: "0 <= I(C : transcript) <= H(C) = n log2 3".into(),
                    passed: bad.is_empty(),
                    margin_sigma: None,
                    detail: if bad.is_empty() { "all prefixes in range".into() } else { format!("out of range at m = {bad:?}") },
                }],
                summary: Map::new(),
            })
        }
        Command::Identify { n, trials, tol } => {
            check_n(*n, 1, IDENTIFY_MAX_N)?;
            require(*trials >= 1, "--trials must be at least 1")?;
            require(*tol > 0.0, "--tol must be positive")?;
            let r = identification_trials(*n, *trials, *tol, seed)?;
            let mut table = Table::new(&["n", "trials", "unique_correct", "unique_wrong", "ambiguous", "rate"]);
            table.push(vec![
                (*n).into(),
                r.trials.into(),
                r.unique_correct.into(),
                r.unique_wrong.into(),
                r.ambiguous.into(),
                r.rate().into(),
            ]);
            Ok(Outcome {
                table,
                checks: vec![BoundCheck {
                    name: "single-query-identification".into(),
                    lemma: "one evaluation query at a random point identifies the member".into(),
                    passed: r.unique_correct == r.trials,
                    margin_sigma: None,
                    detail: format!("{} of {} unique and correct", r.unique_correct, r.trials),
                }],
                summary: Map::new(),
            })
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, String> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_ENV}={v} is not an unsigned 64-bit integer")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Parses `argv` (including the program name), runs the experiment, writes
/// the report to `--out` or `stdout`, and returns the exit code.
pub fn run_command_with<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    let seed = match resolve_seed(cli.common.seed) {
        Ok(s) => s,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_INVALID;
        }
    };
    if cli.common.workers == Some(0) {
        let _ = writeln!(stderr, "error: --workers must be at least 1");
        return EXIT_INVALID;
    }
    let config = ExperimentConfig {
        subcommand: cli.command.name().to_string(),
        command: cli.command.clone(),
        seed,
    };

    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.common.workers {
        builder = builder.num_threads(w);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start worker pool: {e}");
            return EXIT_INVALID;
        }
    };
    let outcome = match pool.install(|| execute(&cli.command, seed)) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let elapsed = start.elapsed().as_secs_f64();

    let body = match cli.common.format {
        Format::Csv => outcome.table.to_csv(),
        Format::Json => {
            let report = ExperimentReport {
                config_digest: config.digest(),
                config,
                columns: outcome.table.columns.clone(),
                rows: outcome.table.to_json_rows(),
                summary: outcome.summary.clone(),
                checks: outcome.checks.clone(),
                wall_time_s: elapsed,
            };
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
        }
    };
    let written = match &cli.common.out {
        Some(path) => File::create(path).and_then(|mut f| f.write_all(body.as_bytes())),
        None => stdout.write_all(body.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write report: {e}");
        return EXIT_INVALID;
    }
    for c in &outcome.checks {
        let margin = c.margin_sigma.map_or(String::new(), |m| format!(" margin={m:.2}σ"));
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(stderr, "check {} [{}]: {verdict}{margin} ({})", c.name, c.lemma, c.detail);
    }
    if outcome.all_passed() {
        EXIT_OK
    } else {
        EXIT_BOUND_VIOLATED
    }
}

/// [`run_command_with`] on the process's standard streams.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run_command_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("querylab").chain(args.iter().copied());
        let code = run_command_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn bounds_table() {
        let (code, out, _) = run(&["bounds", "--n-max", "12", "--format", "csv"]);
        assert_eq!(code, 0);
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines[0], "n,delta,p_exact,p_hoeffding");
        assert_eq!(lines.len(), 13);
        let row4: Vec<f64> = lines[4].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row4[0], 4.0);
        assert_eq!(row4[2], 11.0 / 27.0);
    }

    #[test]
    fn reals_have_seventeen_significant_digits() {
        assert_eq!(Cell::Real(0.1).csv(), "1.0000000000000001e-1");
        assert_eq!(Cell::Real(0.1).csv().parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn default_alpha_rejected_for_small_n() {
        let (code, _, err) = run(&["train", "--algo", "random", "--n", "3"]);
        assert_eq!(code, 2);
        assert!(err.contains("n >= 4"), "{err}");
        let (code, _, _) = run(&["train", "--algo", "random", "--n", "3", "--alpha", "1.5", "--trials", "3", "--budget", "50"]);
        assert_eq!(code, 0);
    }

    #[test]
    fn invalid_configurations_exit_2() {
        assert_eq!(run(&["bounds", "--bogus"]).0, 2);
        assert_eq!(run(&["game", "--n", "0"]).0, 2);
        assert_eq!(run(&["identify", "--n", "3", "--tol", "0"]).0, 2);
        assert_eq!(run(&["diverge", "--n", "3"]).0, 2);
        assert_eq!(run(&["mi", "--n", "9"]).0, 2);
        assert_eq!(run(&["mi", "--n", "2", "--strategy", "adaptive"]).0, 2);
        assert_eq!(run(&["train", "--n", "5", "--algo", "newton"]).0, 2);
        assert_eq!(run(&["nonsense"]).0, 2);
        assert_eq!(run(&["bounds", "--workers", "0"]).0, 2);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("per_query_ratio"));
    }

    #[test]
    fn identify_reports_rate() {
        let (code, out, _) = run(&["identify", "--n", "2", "--trials", "500", "--tol", "1e-9", "--seed", "7"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("n,trials,unique_correct,unique_wrong,ambiguous,rate\n2,500,500,0,0,"));
    }

    #[test]
    fn json_embeds_digest_and_checks() {
        let (code, out, _) = run(&["game", "--n", "4", "--games", "500", "--m-max", "5", "--format", "json", "--seed", "3"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["config"]["seed"], 3);
        assert_eq!(v["config"]["subcommand"], "game");
        assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
        assert_eq!(v["rows"].as_array().unwrap().len(), 5);
        assert_eq!(v["checks"][0]["passed"], true);
    }

    #[test]
    fn digest_tracks_config() {
        let a = ExperimentConfig { subcommand: "bounds".into(), command: Command::Bounds { n_max: 3 }, seed: 1 };
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 2;
        assert_ne!(a.digest(), b.digest());
    }
}
