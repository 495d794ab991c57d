//! Command-line front end: config loading, dispatch, CSV/JSON emission.
//!
//! Every artifact is written atomically (temp file in the target directory,
//! then rename), numeric CSV cells carry 15 significant digits with a '.'
//! decimal separator, and the exit code encodes the outcome:
//!
//! ```text
//! 0  command ran and every conclusive check passed
//! 1  command ran but a check failed
//! 2  usage, configuration, or well-posedness error
//! ```

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hawkes_heston::exec;
use hawkes_heston::hawkes;
use hawkes_heston::mc;
use hawkes_heston::measures;
use hawkes_heston::model::{JumpLaw, ModelConfig, TimeGrid};
use hawkes_heston::odes;
use hawkes_heston::sde::{self, DriftSpec, Scheme};

#[derive(Debug, thiserror::Error)]
enum CliError {
    /// Anything that prevents the computation from being well posed.
    #[error("{0}")]
    Setup(String),
}

impl CliError {
    fn setup(e: impl std::fmt::Display) -> Self {
        CliError::Setup(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hawkes-heston",
    version,
    about = "Simulation and verification toolkit for a Heston model with compound-Hawkes variance jumps"
)]
struct Cli {
    /// JSON model configuration; built-in reference parameters when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory artifacts are written into (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Master seed; fully determines all randomness.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone, Copy)]
struct SampleArgs {
    /// Number of Monte Carlo paths.
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// Uniform time-grid steps over [0, T].
    #[arg(long, default_value_t = 200)]
    grid_steps: usize,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate joint paths and write them as CSV (plus the event log).
    Simulate {
        /// Number of paths to write.
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 200)]
        grid_steps: usize,
    },
    /// Solve the affine ODE system at one exponent and write grid + summary.
    Odes {
        /// Exponent c; defaults to half the feasibility edge.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 200)]
        grid_steps: usize,
    },
    /// Closed-form and numeric admissibility constants for the three
    /// reference jump laws.
    CsTable,
    /// Locate the feasibility edge c_l for the configured law.
    ClSolve,
    /// Monte Carlo exponential-moment estimate against its analytic ceiling.
    BoundCheck {
        /// Exponent c; defaults to half the feasibility edge.
        #[arg(long)]
        c: Option<f64>,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Density-martingale check: sample mean of X_T against 1.
    MartingaleCheck {
        /// Girsanov parameter; defaults to 0.9 times the local-martingale
        /// bound.
        #[arg(long)]
        a: Option<f64>,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Pricing-measure check: discounted terminal price against s0 under the
    /// transformed dynamics.
    EmmCheck {
        /// Girsanov parameter; defaults to half the true-martingale bound.
        #[arg(long)]
        a: Option<f64>,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Run a named verification suite and write the JSON report.
    Verify {
        /// Suite name: "quick" or "full".
        #[arg(long, default_value = "quick")]
        suite: String,
    },
}

/// Parse `argv`, dispatch, and map the outcome to an exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let config = load_config(cli.config.as_deref())?;
    fs::create_dir_all(&cli.out).map_err(CliError::setup)?;
    match &cli.cmd {
        Cmd::Simulate { paths, grid_steps } => {
            cmd_simulate(&config, cli, *paths, *grid_steps)
        }
        Cmd::Odes { c, grid_steps } => cmd_odes(&config, cli, *c, *grid_steps),
        Cmd::CsTable => cmd_cs_table(&config, cli),
        Cmd::ClSolve => cmd_cl_solve(&config, cli),
        Cmd::BoundCheck { c, sample } => cmd_bound_check(&config, cli, *c, *sample),
        Cmd::MartingaleCheck { a, sample } => cmd_martingale(&config, cli, *a, *sample),
        Cmd::EmmCheck { a, sample } => cmd_emm(&config, cli, *a, *sample),
        Cmd::Verify { suite } => cmd_verify(&config, cli, suite),
    }
}

fn load_config(path: Option<&Path>) -> Result<ModelConfig, CliError> {
    let config = match path {
        None => ModelConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Setup(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Setup(format!("cannot parse {}: {e}", p.display())))?
        }
    };
    config.validate().map_err(CliError::setup)?;
    Ok(config)
}

fn log_hash<T: Serialize>(descriptor: &T) {
    eprintln!("config hash: {}", mc::config_hash(descriptor));
}

/// Atomically replace `dir/name` with `content`.
fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::setup)?;
    tmp.write_all(content.as_bytes()).map_err(CliError::setup)?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(CliError::setup)?;
    Ok(target)
}

/// 15 significant digits, '.' decimal separator, no grouping.
fn sig(x: f64) -> String {
    format!("{x:.14e}")
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn cmd_simulate(
    config: &ModelConfig,
    cli: &Cli,
    paths: usize,
    grid_steps: usize,
) -> Result<bool, CliError> {
    log_hash(&(config, "simulate", cli.seed, paths, grid_steps));
    let model = &config.model;
    let grid =
        TimeGrid::new(0.0, model.horizon, grid_steps).map_err(CliError::setup)?;

    let mut path_csv = String::from("path,t,v,log_s,lambda,n,l\n");
    let mut event_csv = String::from("path,t_event,mark,lambda_after_event\n");
    for p in 0..paths {
        let mut rng = exec::path_rng(cli.seed, p as u64);
        let events =
            hawkes::simulate_hawkes(&config.hawkes, &config.jump_law, model.horizon, &mut rng)
                .map_err(CliError::setup)?;
        let vpath = sde::simulate_variance(model, &events, &grid, Scheme::Exact, &mut rng)
            .map_err(CliError::setup)?;
        let spath = sde::simulate_stock(model, &vpath, DriftSpec::Objective, &mut rng);
        for (i, &t) in vpath.times.iter().enumerate() {
            let lambda = events.intensity_at(t).map_err(CliError::setup)?;
            path_csv.push_str(&format!(
                "{p},{},{},{},{},{},{}\n",
                sig(t),
                sig(vpath.values[i]),
                sig(spath.log_prices[i]),
                sig(lambda),
                events.count_up_to(t),
                sig(events.compound_up_to(t)),
            ));
        }
        for (i, &t) in events.times.iter().enumerate() {
            event_csv.push_str(&format!(
                "{p},{},{},{}\n",
                sig(t),
                sig(events.marks[i]),
                sig(events.lambda_after[i]),
            ));
        }
    }
    write_atomic(&cli.out, "paths.csv", &path_csv)?;
    write_atomic(&cli.out, "events.csv", &event_csv)?;
    Ok(true)
}

#[derive(Serialize)]
struct OdesSummary {
    c: f64,
    big_d: f64,
    lambda_c: f64,
    u: f64,
    x_p: f64,
    c_s: f64,
    c_l: f64,
    bound_m0: f64,
}

fn default_c(config: &ModelConfig) -> Result<f64, CliError> {
    let c_l =
        odes::compute_c_l(&config.model, &config.hawkes, &config.jump_law, odes::BRACKET_TOL)
            .map_err(CliError::setup)?;
    Ok(0.5 * c_l)
}

fn cmd_odes(
    config: &ModelConfig,
    cli: &Cli,
    c: Option<f64>,
    grid_steps: usize,
) -> Result<bool, CliError> {
    let c = match c {
        Some(c) => c,
        None => default_c(config)?,
    };
    log_hash(&(config, "odes", c, grid_steps));
    let model = &config.model;
    let grid =
        TimeGrid::new(0.0, model.horizon, grid_steps).map_err(CliError::setup)?;
    let sol = odes::supermartingale_bound(c, model, &config.hawkes, &config.jump_law, &grid)
        .map_err(CliError::setup)?;
    let c_s = odes::compute_c_s(model, &config.hawkes, &config.jump_law)
        .map_err(CliError::setup)?;
    let c_l = odes::compute_c_l(model, &config.hawkes, &config.jump_law, odes::BRACKET_TOL)
        .map_err(CliError::setup)?;

    let mut csv = String::from("t,g,h,f\n");
    for (i, t) in grid.nodes().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            sig(t),
            sig(sol.g[i]),
            sig(sol.h[i]),
            sig(sol.f[i]),
        ));
    }
    write_atomic(&cli.out, "odes.csv", &csv)?;
    let summary = OdesSummary {
        c,
        big_d: sol.big_d,
        lambda_c: sol.lambda_c,
        u: sol.u,
        x_p: sol.x_p,
        c_s,
        c_l,
        bound_m0: sol.bound_m0,
    };
    write_atomic(&cli.out, "odes.json", &to_json(&summary))?;
    Ok(true)
}

fn cmd_cs_table(config: &ModelConfig, cli: &Cli) -> Result<bool, CliError> {
    log_hash(&(config, "cs-table"));
    let laws = [
        ("exponential", JumpLaw::Exponential { rate: 10.0 }),
        ("gamma", JumpLaw::Gamma { shape: 2.0, rate: 20.0 }),
        ("constant", JumpLaw::Constant { value: 0.1 }),
    ];
    let model = &config.model;
    let mut csv = String::from("law,c_s,c_l,diffusion_cap\n");
    let mut ordered = true;
    for (name, law) in &laws {
        let c_s = odes::compute_c_s(model, &config.hawkes, law).map_err(CliError::setup)?;
        let c_l = odes::compute_c_l(model, &config.hawkes, law, odes::BRACKET_TOL)
            .map_err(CliError::setup)?;
        ordered &= 0.0 < c_s && c_s < c_l && c_l <= odes::diffusion_cap(model);
        csv.push_str(&format!(
            "{name},{},{},{}\n",
            sig(c_s),
            sig(c_l),
            sig(odes::diffusion_cap(model)),
        ));
    }
    write_atomic(&cli.out, "cs_table.csv", &csv)?;
    Ok(ordered)
}

#[derive(Serialize)]
struct ClSummary {
    c_l: f64,
    diffusion_cap: f64,
    hawkes_ceiling: f64,
    lambda_at_c_l: f64,
    u_at_c_l: f64,
}

fn cmd_cl_solve(config: &ModelConfig, cli: &Cli) -> Result<bool, CliError> {
    log_hash(&(config, "cl-solve"));
    let model = &config.model;
    let c_l = odes::compute_c_l(model, &config.hawkes, &config.jump_law, odes::BRACKET_TOL)
        .map_err(CliError::setup)?;
    let lambda = odes::big_lambda(c_l, model).map_err(CliError::setup)?;
    let u = hawkes_heston::mgf::mgf(&config.jump_law, lambda).map_err(CliError::setup)?;
    let summary = ClSummary {
        c_l,
        diffusion_cap: odes::diffusion_cap(model),
        hawkes_ceiling: odes::hawkes_ceiling(&config.hawkes),
        lambda_at_c_l: lambda,
        u_at_c_l: u,
    };
    write_atomic(&cli.out, "cl.json", &to_json(&summary))?;
    Ok(true)
}

#[derive(Serialize)]
struct BoundJson {
    c: f64,
    #[serde(flatten)]
    report: mc::McReport,
}

fn cmd_bound_check(
    config: &ModelConfig,
    cli: &Cli,
    c: Option<f64>,
    sample: SampleArgs,
) -> Result<bool, CliError> {
    let c = match c {
        Some(c) => c,
        None => default_c(config)?,
    };
    let exp = mc::Experiment::new(config.clone(), sample.paths, cli.seed, sample.grid_steps);
    log_hash(&(&exp, "bound-check", c));
    let report = mc::run_exp_moment(c, &exp).map_err(CliError::setup)?;
    let pass = report.pass || !report.conclusive;
    write_atomic(&cli.out, "bound_check.json", &to_json(&BoundJson { c, report }))?;
    Ok(pass)
}

/// The JSON shape shared by the two measure-check subcommands.
#[derive(Serialize)]
struct MeasureJson {
    a: f64,
    classification: measures::Classification,
    estimate: f64,
    std_error: f64,
    target: f64,
    pass: bool,
}

fn cmd_martingale(
    config: &ModelConfig,
    cli: &Cli,
    a: Option<f64>,
    sample: SampleArgs,
) -> Result<bool, CliError> {
    let c_l =
        odes::compute_c_l(&config.model, &config.hawkes, &config.jump_law, odes::BRACKET_TOL)
            .map_err(CliError::setup)?;
    let a = a.unwrap_or(0.9 * measures::elmm_bound(c_l));
    let exp = mc::Experiment::new(config.clone(), sample.paths, cli.seed, sample.grid_steps);
    log_hash(&(&exp, "martingale-check", a));
    let checks = mc::run_martingale(a, &exp).map_err(CliError::setup)?;
    let x_check = &checks[0].report;
    let json = MeasureJson {
        a,
        classification: measures::classify(a, c_l, config.model.rho),
        estimate: x_check.estimate,
        std_error: x_check.std_error,
        target: x_check.target,
        pass: x_check.pass,
    };
    write_atomic(&cli.out, "martingale_check.json", &to_json(&json))?;
    Ok(checks.iter().all(|c| c.report.pass))
}

fn cmd_emm(
    config: &ModelConfig,
    cli: &Cli,
    a: Option<f64>,
    sample: SampleArgs,
) -> Result<bool, CliError> {
    let a = match a {
        Some(a) => a,
        None => {
            let c_l = odes::compute_c_l(
                &config.model,
                &config.hawkes,
                &config.jump_law,
                odes::BRACKET_TOL,
            )
            .map_err(CliError::setup)?;
            let bound = measures::emm_bound(c_l, config.model.rho).ok_or_else(|| {
                CliError::Setup(format!(
                    "no true-martingale range: rho^2 = {} is not below c_l = {c_l}",
                    config.model.rho * config.model.rho
                ))
            })?;
            0.5 * bound
        }
    };
    let exp = mc::Experiment::new(config.clone(), sample.paths, cli.seed, sample.grid_steps);
    log_hash(&(&exp, "emm-check", a));
    let report =
        measures::emm_check_direct(config, a, sample.paths, sample.grid_steps, cli.seed)
            .map_err(CliError::setup)?;
    let json = MeasureJson {
        a,
        classification: report.classification,
        estimate: report.mc.estimate,
        std_error: report.mc.std_error,
        target: report.mc.target,
        pass: report.mc.pass,
    };
    write_atomic(&cli.out, "emm_check.json", &to_json(&json))?;
    Ok(json.pass)
}

fn cmd_verify(config: &ModelConfig, cli: &Cli, suite: &str) -> Result<bool, CliError> {
    let report = mc::run_suite(config, suite, cli.seed).map_err(CliError::setup)?;
    eprintln!("config hash: {}", report.config_hash);
    write_atomic(&cli.out, "verify.json", &to_json(&report))?;

    println!(
        "{:<38} {:>9} {:>17} {:>17} {:>12}  verdict",
        "check", "mode", "estimate", "target", "std_error"
    );
    for check in &report.checks {
        let r = &check.report;
        let verdict = if !r.conclusive {
            "inconclusive"
        } else if r.pass {
            "pass"
        } else {
            "FAIL"
        };
        let mode = match r.mode {
            mc::CheckMode::TwoSided => "two-sided",
            mc::CheckMode::Bound => "bound",
        };
        println!(
            "{:<38} {:>9} {:>17.10e} {:>17.10e} {:>12.4e}  {verdict}",
            check.name, mode, r.estimate, r.target, r.std_error
        );
    }
    println!(
        "suite {}: {} passed, {} failed, {} inconclusive",
        report.suite, report.passed, report.failed, report.inconclusive
    );
    Ok(report.all_pass())
}
