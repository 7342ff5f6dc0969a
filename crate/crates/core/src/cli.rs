//! The `tibs` command-line front end.
//!
//! Subcommands: `plan`, `table`, `estimate`, `verify`. Output is a readable
//! table by default, or `--format json|csv` for scripts. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, or verification PASS |
//! | 2 | usage error (bad flags, spec invariant violated, oracle budget exceeded) |
//! | 3 | trial source or protocol failure |
//! | 4 | verification FAIL |

use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bounds::{
    chernoff_hoeffding_n, clt_approx_n, gain_ratio, BoundVariant, BoundsError, ErrorSpec, Plan,
};
use crate::engine::{
    run_fixed_size, run_inverse_binomial, run_truncated_ibs, EngineError, EstimationResult, ExternalSource,
    SyntheticSource, TrialSource,
};
use crate::oracle::{empirical_coverage, exact_walk_coverage, CoverageReport, CriterionSpec, ExactOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOURCE: i32 = 3;
pub const EXIT_VERIFY_FAIL: i32 = 4;

/// Margins listed by `table`.
pub const TABLE_ALPHAS: [f64; 5] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

#[derive(Debug, Parser)]
#[command(name = "tibs", version, about = "Monte Carlo probability estimation with a mixed absolute/relative error guarantee")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the sampling budget for an error specification.
    Plan(PlanArgs),
    /// Chernoff-Hoeffding sample sizes for alpha = 1e-3 … 1e-7.
    Table(TableArgs),
    /// Run one estimation against a synthetic or external trial source.
    Estimate(EstimateArgs),
    /// Sweep a grid of true probabilities and check coverage against 1 − delta.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    /// Truncated inverse binomial sampling (rectangular walk).
    Tibs,
    /// Fixed sample size.
    Fixed,
    /// Inverse binomial sampling with a safety cap.
    Ibs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMethod {
    Exact,
    Empirical,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Margin of absolute error.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Margin of relative error.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Confidence parameter; coverage target is 1 − delta.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = BoundVariant::Simplified)]
    pub variant: BoundVariant,
}

#[derive(Debug, Args)]
pub struct OverrideArgs {
    /// Replace the box length L. Voids the coverage guarantee; for testing the verifier.
    #[arg(long)]
    pub override_length: Option<f64>,
    /// Replace the box width W. Voids the coverage guarantee; for testing the verifier.
    #[arg(long)]
    pub override_width: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub overrides: OverrideArgs,
    #[arg(long, value_enum, default_value_t = OutputFormat::Human)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Human)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub overrides: OverrideArgs,
    #[arg(long, value_enum, default_value_t = Rule::Tibs)]
    pub rule: Rule,
    /// Sample size for `--rule fixed` (default: first integer above the exact bound).
    #[arg(long)]
    pub n: Option<u64>,
    /// Trial cap for `--rule ibs`.
    #[arg(long)]
    pub cap: Option<u64>,
    /// True probability of the synthetic source.
    #[arg(long)]
    pub p_true: Option<f64>,
    /// Seed of the synthetic source.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// External simulator command line; it must print "0" or "1" per line.
    #[arg(long)]
    pub cmd: Option<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Human)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub overrides: OverrideArgs,
    #[arg(long, value_enum, default_value_t = VerifyMethod::Exact)]
    pub method: VerifyMethod,
    /// Grid of true probabilities: `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0.01:0.99:0.01")]
    pub grid: String,
    #[arg(long, default_value_t = 10_000)]
    pub replications: u64,
    #[arg(long, default_value_t = 1)]
    pub master_seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Human)]
    pub format: OutputFormat,
}

/// A failure mapped to an exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: EXIT_IO, message: e.to_string() }
    }
}

type CliResult = Result<i32, CliError>;

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a, out, err),
        Command::Table(a) => cmd_table(a, out),
        Command::Estimate(a) => cmd_estimate(a, out, err),
        Command::Verify(a) => cmd_verify(a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

impl SpecArgs {
    fn error_spec(&self) -> Result<ErrorSpec, CliError> {
        let missing = |name: &str| CliError::usage(format!("--{name} is required"));
        let alpha = self.alpha.ok_or_else(|| missing("alpha"))?;
        let beta = self.beta.ok_or_else(|| missing("beta"))?;
        let delta = self.delta.ok_or_else(|| missing("delta"))?;
        Ok(ErrorSpec::new(alpha, beta, delta)?)
    }
}

fn build_plan(spec: ErrorSpec, variant: BoundVariant, o: &OverrideArgs, err: &mut dyn Write) -> Result<Plan, CliError> {
    if o.override_length.is_none() && o.override_width.is_none() {
        return Ok(Plan::new(spec, variant)?);
    }
    writeln!(
        err,
        "WARNING: box dimensions overridden (length={:?}, width={:?}); this plan carries NO coverage guarantee",
        o.override_length, o.override_width
    )?;
    Ok(Plan::with_overrides(spec, variant, o.override_length, o.override_width)?)
}

/// Integer with comma thousands separators.
pub fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn human_count(n: Option<u64>) -> String {
    n.map(group_thousands).unwrap_or_else(|| "overflow".into())
}

fn csv_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct PlanRecord {
    alpha: f64,
    beta: f64,
    delta: f64,
    variant: BoundVariant,
    a_bound: f64,
    b_bound: f64,
    length: f64,
    width: f64,
    n_max: u64,
    k_threshold: u64,
    overridden: bool,
    chernoff_hoeffding_n: Option<u64>,
    clt_approx_n: Option<u64>,
    gain_ratio: Option<f64>,
}

fn cmd_plan(a: &PlanArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let spec = a.spec.error_spec()?;
    let plan = build_plan(spec, a.spec.variant, &a.overrides, err)?;
    let rec = PlanRecord {
        alpha: spec.alpha(),
        beta: spec.beta(),
        delta: spec.delta(),
        variant: plan.variant(),
        a_bound: plan.a_bound(),
        b_bound: plan.b_bound(),
        length: plan.length(),
        width: plan.width(),
        n_max: plan.n_max(),
        k_threshold: plan.k_threshold(),
        overridden: plan.is_overridden(),
        chernoff_hoeffding_n: chernoff_hoeffding_n(spec.alpha(), spec.delta()).ok(),
        clt_approx_n: clt_approx_n(spec.alpha(), spec.delta()).ok(),
        gain_ratio: gain_ratio(&spec).ok(),
    };
    match a.format {
        OutputFormat::Json => writeln!(out, "{}", serde_json::to_string(&rec).expect("plan serializes"))?,
        OutputFormat::Csv => {
            writeln!(out, "alpha,beta,delta,variant,a_bound,b_bound,length,width,n_max,k_threshold,overridden,chernoff_hoeffding_n,clt_approx_n,gain_ratio")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                rec.alpha,
                rec.beta,
                rec.delta,
                rec.variant,
                rec.a_bound,
                rec.b_bound,
                rec.length,
                rec.width,
                rec.n_max,
                rec.k_threshold,
                rec.overridden,
                csv_opt(rec.chernoff_hoeffding_n),
                csv_opt(rec.clt_approx_n),
                csv_opt(rec.gain_ratio)
            )?;
        }
        OutputFormat::Human => {
            writeln!(out, "plan: alpha={} beta={} delta={} variant={}", rec.alpha, rec.beta, rec.delta, rec.variant)?;
            writeln!(out, "  A  bound                {:.6}", rec.a_bound)?;
            writeln!(out, "  B  bound                {:.6}", rec.b_bound)?;
            writeln!(out, "  L  length               {:.6}", rec.length)?;
            writeln!(out, "  W  width                {:.6}", rec.width)?;
            writeln!(out, "  n_max (max trials)      {}", group_thousands(rec.n_max))?;
            writeln!(out, "  k_threshold (successes) {}", group_thousands(rec.k_threshold))?;
            writeln!(out, "  Chernoff-Hoeffding N    {}", human_count(rec.chernoff_hoeffding_n))?;
            writeln!(out, "  normal-approx N         {}", human_count(rec.clt_approx_n))?;
            match rec.gain_ratio {
                Some(g) => writeln!(out, "  gain ratio              {g:.2}")?,
                None => writeln!(out, "  gain ratio              n/a")?,
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_table(a: &TableArgs, out: &mut dyn Write) -> CliResult {
    let rows = TABLE_ALPHAS
        .iter()
        .map(|&alpha| Ok((alpha, chernoff_hoeffding_n(alpha, a.delta)?)))
        .collect::<Result<Vec<_>, BoundsError>>()?;
    match a.format {
        OutputFormat::Json => {
            let rows: Vec<_> = rows.iter().map(|&(alpha, n)| json!({ "alpha": alpha, "n_ch": n })).collect();
            writeln!(out, "{}", json!({ "delta": a.delta, "rows": rows }))?;
        }
        OutputFormat::Csv => {
            writeln!(out, "alpha,n_ch")?;
            for (alpha, n) in rows {
                writeln!(out, "{alpha:e},{n}")?;
            }
        }
        OutputFormat::Human => {
            writeln!(out, "Chernoff-Hoeffding sample size N_CH (delta = {})", a.delta)?;
            writeln!(out, "{:<8} {:>28}", "alpha", "N_CH")?;
            for (alpha, n) in rows {
                writeln!(out, "{:<8} {:>28}", format!("{alpha:e}"), group_thousands(n))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn open_source(a: &EstimateArgs) -> Result<Box<dyn TrialSource>, CliError> {
    match (a.p_true, a.cmd.as_deref()) {
        (Some(_), Some(_)) => Err(CliError::usage("give either --p-true or --cmd, not both")),
        (None, None) => Err(CliError::usage("a trial source is required: --p-true <p> or --cmd <command>")),
        (Some(p), None) => SyntheticSource::new(p, a.seed)
            .map(|s| Box::new(s) as Box<dyn TrialSource>)
            .ok_or_else(|| CliError::usage(format!("--p-true must lie in (0, 1), got {p}"))),
        (None, Some(cmd)) => {
            let words = shlex::split(cmd).filter(|w| !w.is_empty()).ok_or_else(|| CliError::usage("--cmd could not be parsed"))?;
            let (program, args) = words.split_first().ok_or_else(|| CliError::usage("--cmd is empty"))?;
            ExternalSource::spawn(program, args)
                .map(|s| Box::new(s) as Box<dyn TrialSource>)
                .map_err(|e| CliError { code: EXIT_SOURCE, message: e.to_string() })
        }
    }
}

fn engine_failure(e: EngineError) -> CliError {
    match e {
        EngineError::Source(ref s) => {
            let consumed = s.trials_consumed().map(|c| c.to_string()).unwrap_or_else(|| "0".into());
            CliError { code: EXIT_SOURCE, message: format!("{e} (trials consumed: {consumed})") }
        }
        other => CliError::usage(other.to_string()),
    }
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    // validate everything before spawning anything
    enum Prepared {
        Tibs(Plan),
        Fixed(u64),
        Ibs { beta: f64, delta: f64, cap: u64 },
    }
    let prepared = match a.rule {
        Rule::Tibs => {
            let spec = a.spec.error_spec()?;
            Prepared::Tibs(build_plan(spec, a.spec.variant, &a.overrides, err)?)
        }
        Rule::Fixed => match a.n {
            Some(0) => return Err(CliError::usage("--n must be at least 1")),
            Some(n) => Prepared::Fixed(n),
            None => {
                let spec = a.spec.error_spec()?;
                let plan = Plan::new(spec, BoundVariant::Exact)?;
                Prepared::Fixed(plan.n_max())
            }
        },
        Rule::Ibs => {
            let beta = a.spec.beta.ok_or_else(|| CliError::usage("--beta is required"))?;
            let delta = a.spec.delta.ok_or_else(|| CliError::usage("--delta is required"))?;
            crate::bounds::inverse_binomial_threshold(beta, delta)?;
            let cap = a.cap.ok_or_else(|| CliError::usage("--cap is required for --rule ibs"))?;
            if cap == 0 {
                return Err(CliError::usage("--cap must be at least 1"));
            }
            Prepared::Ibs { beta, delta, cap }
        }
    };
    let mut source = open_source(a)?;
    let result = match prepared {
        Prepared::Tibs(plan) => run_truncated_ibs(source.as_mut(), &plan),
        Prepared::Fixed(n) => run_fixed_size(source.as_mut(), n),
        Prepared::Ibs { beta, delta, cap } => run_inverse_binomial(source.as_mut(), beta, delta, cap),
    }
    .map_err(engine_failure)?;
    if result.truncated() {
        writeln!(err, "warning: inverse binomial run hit the cap of {} trials before the threshold", result.m())?;
    }
    render_estimate(&result, a.format, out)?;
    Ok(EXIT_OK)
}

fn render_estimate(r: &EstimationResult, format: OutputFormat, out: &mut dyn Write) -> std::io::Result<()> {
    let reason = serde_json::to_value(r.stop_reason()).expect("serializes");
    let reason = reason.as_str().unwrap_or_default();
    match format {
        OutputFormat::Json => writeln!(out, "{}", serde_json::to_string(r).expect("result serializes")),
        OutputFormat::Csv => {
            writeln!(out, "m,successes,p_hat,stop_reason,truncated,seed,source")?;
            writeln!(
                out,
                "{},{},{},{},{},{},\"{}\"",
                r.m(),
                r.successes(),
                r.p_hat(),
                reason,
                r.truncated(),
                csv_opt(r.seed()),
                r.source().replace('"', "\"\"")
            )
        }
        OutputFormat::Human => {
            writeln!(out, "source       {}", r.source())?;
            writeln!(out, "trials (m)   {}", group_thousands(r.m()))?;
            writeln!(out, "successes    {}", group_thousands(r.successes()))?;
            writeln!(out, "estimate     {}", r.p_hat())?;
            writeln!(out, "stop reason  {reason}{}", if r.truncated() { " (capped)" } else { "" })
        }
    }
}

/// Parse `start:stop:step` or `a,b,c` into a list of probabilities.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let bad = |what: &str| format!("invalid grid {text:?}: {what}");
    let values = if let Some((start, rest)) = text.split_once(':') {
        let (stop, step) = rest.split_once(':').ok_or_else(|| bad("expected start:stop:step"))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(s));
        let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
        if !(step > 0.0) || stop < start {
            return Err(bad("step must be positive and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as u64 + 1;
        (0..count)
            .map(|i| {
                let v = start + i as f64 * step;
                // strip accumulated binary noise: 0.01 + 6·0.01 should read back as 0.07
                format!("{v:.12}").parse::<f64>().expect("formatted float parses")
            })
            .collect::<Vec<_>>()
    } else {
        text.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad(s))).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad("empty"));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(bad(&format!("{v} is outside (0, 1)")));
    }
    Ok(values)
}

/// Pass/fail of one grid point against the target `1 − δ`.
///
/// Exact reports must exceed the target. Empirical reports fail only when
/// the upper end of the Wilson interval does not exceed it.
pub fn coverage_passes(report: &CoverageReport, target: f64) -> bool {
    match &report.empirical {
        Some(e) => e.wilson_high > target,
        None => report.coverage > target,
    }
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let spec = a.spec.error_spec()?;
    let plan = build_plan(spec, a.spec.variant, &a.overrides, err)?;
    let grid = parse_grid(&a.grid).map_err(CliError::usage)?;
    let crit = CriterionSpec::mixed(spec.alpha(), spec.beta()).map_err(|e| CliError::usage(e.to_string()))?;
    if a.method == VerifyMethod::Empirical && a.replications == 0 {
        return Err(CliError::usage("--replications must be at least 1"));
    }
    let opts = ExactOptions::from_env();
    let reports = grid
        .iter()
        .map(|&p| match a.method {
            VerifyMethod::Exact => exact_walk_coverage(&plan, p, &crit, &opts),
            VerifyMethod::Empirical => empirical_coverage(&plan, p, &crit, a.replications, a.master_seed),
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(e.to_string()))?;

    let target = 1.0 - spec.delta();
    let worst = reports
        .iter()
        .min_by(|x, y| x.coverage.total_cmp(&y.coverage))
        .expect("grid is non-empty");
    let failures: Vec<f64> = reports.iter().filter(|r| !coverage_passes(r, target)).map(|r| r.p_true).collect();
    let pass = failures.is_empty();
    let verdict = if pass { "PASS" } else { "FAIL" };

    match a.format {
        OutputFormat::Json => {
            let doc = json!({
                "alpha": spec.alpha(),
                "beta": spec.beta(),
                "delta": spec.delta(),
                "variant": plan.variant(),
                "length": plan.length(),
                "width": plan.width(),
                "n_max": plan.n_max(),
                "k_threshold": plan.k_threshold(),
                "overridden": plan.is_overridden(),
                "target": target,
                "reports": reports.iter().map(|r| r.to_json(false)).collect::<Vec<_>>(),
                "min_coverage": worst.coverage,
                "min_coverage_p": worst.p_true,
                "failures": failures,
                "verdict": verdict,
            });
            writeln!(out, "{doc}")?;
        }
        OutputFormat::Csv => {
            writeln!(out, "p_true,coverage,expected_m,method,n_max,k_threshold,wilson_low,wilson_high,pass")?;
            for r in &reports {
                let method = serde_json::to_value(r.method).expect("serializes");
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.p_true,
                    r.coverage,
                    r.expected_m,
                    method.as_str().unwrap_or_default(),
                    r.n_max,
                    r.k_threshold,
                    csv_opt(r.empirical.map(|e| e.wilson_low)),
                    csv_opt(r.empirical.map(|e| e.wilson_high)),
                    coverage_passes(r, target)
                )?;
            }
        }
        OutputFormat::Human => {
            writeln!(
                out,
                "verify: alpha={} beta={} delta={} variant={} n_max={} k_threshold={}{}",
                spec.alpha(),
                spec.beta(),
                spec.delta(),
                plan.variant(),
                plan.n_max(),
                plan.k_threshold(),
                if plan.is_overridden() { " [OVERRIDDEN]" } else { "" }
            )?;
            match a.method {
                VerifyMethod::Exact => writeln!(out, "{:>8} {:>14} {:>12}", "p", "coverage", "E[m]")?,
                VerifyMethod::Empirical => writeln!(
                    out,
                    "{:>8} {:>10} {:>10} {:>10} {:>10}  (R={}, seed={}, 99% Wilson)",
                    "p", "coverage", "low", "high", "mean m", a.replications, a.master_seed
                )?,
            }
            for r in &reports {
                let mark = if coverage_passes(r, target) { "" } else { "  <-- below target" };
                match r.empirical {
                    None => writeln!(out, "{:>8} {:>14.10} {:>12.4}{mark}", r.p_true, r.coverage, r.expected_m)?,
                    Some(e) => writeln!(
                        out,
                        "{:>8} {:>10.6} {:>10.6} {:>10.6} {:>10.3}{mark}",
                        r.p_true, r.coverage, e.wilson_low, e.wilson_high, r.expected_m
                    )?,
                }
            }
            writeln!(
                out,
                "{verdict}: min coverage {:.10} at p={} vs target {} ({} of {} grid points below)",
                worst.coverage,
                worst.p_true,
                target,
                failures.len(),
                reports.len()
            )?;
        }
    }
    Ok(if pass { EXIT_OK } else { EXIT_VERIFY_FAIL })
}
