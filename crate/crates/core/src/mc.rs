//! Monte Carlo verification harness.
//!
//! Every check reduces to a sample mean with a standard error and a target,
//! judged one of two ways:
//!
//! ```text
//! two-sided:  pass  iff  |estimate - target| <= 4 SE
//! bound:      pass  iff  estimate <= target (1 + 4 SE/estimate)
//! ```
//!
//! Bound-mode checks with relative standard error above 25% are flagged
//! inconclusive: exponential moments near the feasibility edge are heavy
//! tailed and a wide band proves nothing either way. Inconclusive checks are
//! reported but do not decide a suite.
//!
//! Reproducibility contract: one RNG substream per path index, reductions in
//! path order with compensated summation, so a report depends only on the
//! configuration and the master seed, not on the worker count.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::hawkes::{self, HawkesError, MarkedPointPath};
use crate::measures::{self, Classification, MeasureError};
use crate::mgf;
use crate::model::{HawkesParams, ModelConfig, ModelParams, TimeGrid, ValidationReport};
use crate::odes::{self, OdeError};
use crate::sde::{self, DriftSpec, Scheme, SdeError};

/// Fewest paths a standard error is considered meaningful for.
pub const MIN_PATHS: usize = 100;

/// Bound-mode checks with `SE/estimate` above this are inconclusive.
pub const MAX_RELATIVE_SE: f64 = 0.25;

#[derive(Debug, Error)]
pub enum McError {
    #[error("{n} paths requested, at least {MIN_PATHS} required")]
    TooFewPaths { n: usize },
    #[error("grid with {steps} steps is too coarse for this check (need >= {min})")]
    GridTooCoarse { steps: usize, min: usize },
    #[error("exponent c = {c} is not below the feasibility edge c_l = {c_l}; the moment may be infinite")]
    ExponentNotBelowEdge { c: f64, c_l: f64 },
    #[error("unknown suite {name:?}; available: quick, full")]
    UnknownSuite { name: String },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Hawkes(#[from] HawkesError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Invalid(#[from] ValidationReport),
}

/// How a report's estimate is judged against its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    TwoSided,
    Bound,
}

/// One Monte Carlo verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub mode: CheckMode,
    pub pass: bool,
    /// False when the standard error is too wide to mean anything (bound
    /// mode only); such a report should not decide a suite.
    pub conclusive: bool,
    pub n_paths: usize,
    /// Wall-clock diagnostics; excluded from serialized reports so equal
    /// seeds give byte-identical artifacts.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl McReport {
    pub fn two_sided(estimate: f64, std_error: f64, target: f64, n_paths: usize) -> Self {
        McReport {
            estimate,
            std_error,
            target,
            mode: CheckMode::TwoSided,
            pass: (estimate - target).abs() <= 4.0 * std_error,
            conclusive: true,
            n_paths,
            wall_time: Duration::ZERO,
        }
    }

    pub fn bound(estimate: f64, std_error: f64, target: f64, n_paths: usize) -> Self {
        let relative = if estimate > 0.0 { std_error / estimate } else { 0.0 };
        McReport {
            estimate,
            std_error,
            target,
            mode: CheckMode::Bound,
            pass: estimate <= target * (1.0 + 4.0 * relative),
            conclusive: relative <= MAX_RELATIVE_SE,
            n_paths,
            wall_time: Duration::ZERO,
        }
    }
}

/// A named report, the unit a suite is made of.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(flatten)]
    pub report: McReport,
}

/// A reproducible experiment: configuration, sample size, seed, grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Experiment {
    pub config: ModelConfig,
    pub n_paths: usize,
    pub master_seed: u64,
    pub grid_steps: usize,
}

impl Experiment {
    pub fn new(config: ModelConfig, n_paths: usize, master_seed: u64, grid_steps: usize) -> Self {
        Experiment { config, n_paths, master_seed, grid_steps }
    }

    pub fn validate(&self) -> Result<(), McError> {
        self.config.validate()?;
        if self.n_paths < MIN_PATHS {
            return Err(McError::TooFewPaths { n: self.n_paths });
        }
        if self.grid_steps == 0 {
            return Err(McError::GridTooCoarse { steps: 0, min: 1 });
        }
        Ok(())
    }

    fn grid(&self) -> TimeGrid {
        TimeGrid::new(0.0, self.config.model.horizon, self.grid_steps)
            .expect("validated horizon and steps")
    }

    /// Stable fingerprint of everything that determines the results.
    pub fn config_hash(&self) -> String {
        config_hash(self)
    }
}

/// SipHash fingerprint of the canonical JSON form of any descriptor.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    use std::hash::{Hash, Hasher};
    let json = serde_json::to_string(value).expect("descriptors serialize");
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    json.hash(&mut hasher);
    format!("{:016x}", hasher.finish())
}

/// Mean intensity `m(t) = lambda0 (beta - alpha e^{(alpha-beta)t})/(beta-alpha)`.
pub fn mean_intensity(hawkes: &HawkesParams, t: f64) -> f64 {
    let d = hawkes.beta - hawkes.alpha;
    hawkes.lambda0 * (hawkes.beta - hawkes.alpha * ((-d) * t).exp()) / d
}

/// Jump-free mean variance `vbar + (v0 - vbar) e^{-kappa t}`.
pub fn mean_variance_jump_free(model: &ModelParams, t: f64) -> f64 {
    model.vbar + (model.v0 - model.vbar) * (-model.kappa * t).exp()
}

/// Full-model mean variance: fixed-step RK4 on the linear mean equation
///
/// ```text
/// m'(t) = -kappa (m(t) - vbar) + eta E[J] m_lambda(t),   m(0) = v0
/// ```
pub fn mean_variance_ode(config: &ModelConfig, t: f64) -> f64 {
    if t == 0.0 {
        return config.model.v0;
    }
    let model = &config.model;
    let source = |s: f64| {
        model.eta * mgf::mean(&config.jump_law) * mean_intensity(&config.hawkes, s)
    };
    let rhs = |s: f64, m: f64| -model.kappa * (m - model.vbar) + source(s);
    let n = 2048usize;
    let step = t / n as f64;
    let mut m = model.v0;
    for i in 0..n {
        let s = i as f64 * step;
        let k1 = rhs(s, m);
        let k2 = rhs(s + 0.5 * step, m + 0.5 * step * k1);
        let k3 = rhs(s + 0.5 * step, m + 0.5 * step * k2);
        let k4 = rhs(s + step, m + step * k3);
        m += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    m
}

fn collect<T>(results: Vec<Result<T, McError>>) -> Result<Vec<T>, McError> {
    results.into_iter().collect()
}

/// Estimate `E[exp(c int_0^T v dt)]` and compare with the analytic ceiling
/// `exp(F(0) + G(0) v0 + H(0) lambda0)` in bound mode.
///
/// `c` must lie strictly below the feasibility edge; the estimate at `c = 0`
/// is exactly one by construction.
pub fn run_exp_moment(c: f64, exp: &Experiment) -> Result<McReport, McError> {
    let started = Instant::now();
    exp.validate()?;
    let model = exp.config.model.clone();
    let hawkes = exp.config.hawkes;
    let law = exp.config.jump_law.clone();
    let c_l = odes::compute_c_l(&model, &hawkes, &law, odes::BRACKET_TOL)?;
    if !(c < c_l) {
        return Err(McError::ExponentNotBelowEdge { c, c_l });
    }
    let grid = exp.grid();
    let target = odes::supermartingale_bound(c, &model, &hawkes, &law, &grid)?.bound_m0;

    let seed = exp.master_seed;
    let horizon = model.horizon;
    let samples = collect(exec::map_paths(exp.n_paths, move |i| {
        let mut rng = exec::path_rng(seed, i as u64);
        let events = hawkes::simulate_hawkes(&hawkes, &law, horizon, &mut rng)?;
        let vpath = sde::simulate_variance(&model, &events, &grid, Scheme::Exact, &mut rng)?;
        Ok((c * vpath.integral_v()).exp())
    }))?;
    let (estimate, std_error) = exec::mean_and_se(&samples);
    let mut report = McReport::bound(estimate, std_error, target, exp.n_paths);
    report.wall_time = started.elapsed();
    Ok(report)
}

/// Snap `k T/5` (k = 1..5) to exact grid nodes.
fn checkpoints(grid: &TimeGrid) -> Vec<(usize, f64)> {
    (1..=5)
        .map(|k| {
            let idx = ((k * grid.steps) as f64 / 5.0).round() as usize;
            (idx, grid.node(idx))
        })
        .collect()
}

/// Mean-variance identities at five checkpoints: the jump-free variance
/// against its exponential-decay closed form, and the full model against the
/// linear mean equation, each two-sided.
pub fn run_mean_variance(exp: &Experiment) -> Result<Vec<Check>, McError> {
    let started = Instant::now();
    exp.validate()?;
    if exp.grid_steps < 5 {
        return Err(McError::GridTooCoarse { steps: exp.grid_steps, min: 5 });
    }
    let grid = exp.grid();
    let points = checkpoints(&grid);
    let model = exp.config.model.clone();
    let hawkes = exp.config.hawkes;
    let law = exp.config.jump_law.clone();
    let horizon = model.horizon;
    let n = exp.n_paths;

    // Full model.
    let seed = exp.master_seed;
    let times: Vec<f64> = points.iter().map(|&(_, t)| t).collect();
    let full = {
        let model = model.clone();
        let law = law.clone();
        let times = times.clone();
        collect(exec::map_paths(n, move |i| {
            let mut rng = exec::path_rng(seed, i as u64);
            let events = hawkes::simulate_hawkes(&hawkes, &law, horizon, &mut rng)?;
            let vpath = sde::simulate_variance(&model, &events, &grid, Scheme::Exact, &mut rng)?;
            Ok(times
                .iter()
                .map(|&t| vpath.value_at(t).expect("checkpoint is a grid node"))
                .collect::<Vec<f64>>())
        }))?
    };

    // Jump-free companion: same coefficients, no events, decoupled seed.
    let free_seed = seed ^ 0x9E37_79B9_7F4A_7C15;
    let empty = MarkedPointPath {
        params: hawkes,
        horizon,
        times: Vec::new(),
        marks: Vec::new(),
        lambda_after: Vec::new(),
    };
    let free = {
        let model = model.clone();
        let times = times.clone();
        collect(exec::map_paths(n, move |i| {
            let mut rng = exec::path_rng(free_seed, i as u64);
            let vpath = sde::simulate_variance(&model, &empty, &grid, Scheme::Exact, &mut rng)?;
            Ok(times
                .iter()
                .map(|&t| vpath.value_at(t).expect("checkpoint is a grid node"))
                .collect::<Vec<f64>>())
        }))?
    };

    let mut checks = Vec::with_capacity(10);
    for (k, &(_, t)) in points.iter().enumerate() {
        let samples: Vec<f64> = free.iter().map(|row| row[k]).collect();
        let (est, se) = exec::mean_and_se(&samples);
        let target = mean_variance_jump_free(&model, t);
        let label = (k + 1) as f64 / 5.0;
        checks.push(Check {
            name: format!("jump_free_mean_v_at_{label:.1}T"),
            report: McReport::two_sided(est, se, target, n),
        });
    }
    for (k, &(_, t)) in points.iter().enumerate() {
        let samples: Vec<f64> = full.iter().map(|row| row[k]).collect();
        let (est, se) = exec::mean_and_se(&samples);
        let target = mean_variance_ode(&exp.config, t);
        let label = (k + 1) as f64 / 5.0;
        checks.push(Check {
            name: format!("full_model_mean_v_at_{label:.1}T"),
            report: McReport::two_sided(est, se, target, n),
        });
    }
    let elapsed = started.elapsed();
    for c in &mut checks {
        c.report.wall_time = elapsed;
    }
    Ok(checks)
}

/// Coupled-path ordering check: fraction of paths on which the jump-free
/// variance ever exceeds the jump-carrying one beyond 1e-12.
pub fn run_comparison(exp: &Experiment) -> Result<McReport, McError> {
    let started = Instant::now();
    exp.validate()?;
    let grid = exp.grid();
    let model = exp.config.model.clone();
    let hawkes = exp.config.hawkes;
    let law = exp.config.jump_law.clone();
    let horizon = model.horizon;
    let seed = exp.master_seed;

    let samples = collect(exec::map_paths(exp.n_paths, move |i| {
        let mut rng = exec::path_rng(seed, i as u64);
        let events = hawkes::simulate_hawkes(&hawkes, &law, horizon, &mut rng)?;
        let pair = sde::simulate_comparison_pair(&model, &events, &grid, &mut rng)?;
        Ok(if pair.violations(1e-12) > 0 { 1.0 } else { 0.0 })
    }))?;
    let (estimate, std_error) = exec::mean_and_se(&samples);
    // A nonzero fraction is a conclusive observation of mis-ordered paths,
    // not sampling noise around a positive target, so this check never
    // reports inconclusive: pass iff the observed fraction is exactly zero.
    let mut report = McReport::bound(estimate, std_error, 0.0, exp.n_paths);
    report.pass = estimate == 0.0;
    report.conclusive = true;
    report.wall_time = started.elapsed();
    Ok(report)
}

/// Event-side identities: mean intensity at five checkpoints against the
/// renewal mean, and compensated counting/compound processes centered on 0.
pub fn run_hawkes_moments(exp: &Experiment) -> Result<Vec<Check>, McError> {
    let started = Instant::now();
    exp.validate()?;
    if exp.grid_steps < 5 {
        return Err(McError::GridTooCoarse { steps: exp.grid_steps, min: 5 });
    }
    let grid = exp.grid();
    let points = checkpoints(&grid);
    let hawkes = exp.config.hawkes;
    let law = exp.config.jump_law.clone();
    let horizon = exp.config.model.horizon;
    let seed = exp.master_seed;
    let n = exp.n_paths;
    let times: Vec<f64> = points.iter().map(|&(_, t)| t).collect();
    let terminal_grid = TimeGrid::new(0.0, horizon, 1).expect("two-node grid");

    let rows = {
        let law = law.clone();
        let times = times.clone();
        collect(exec::map_paths(n, move |i| {
            let mut rng = exec::path_rng(seed, i as u64);
            let events = hawkes::simulate_hawkes(&hawkes, &law, horizon, &mut rng)?;
            let mut row = Vec::with_capacity(times.len() + 2);
            for &t in &times {
                row.push(events.intensity_at(t)?);
            }
            let comp = events.compensators(&law, &terminal_grid)?;
            row.push(events.count_up_to(horizon) as f64 - comp.counting[1]);
            row.push(events.compound_up_to(horizon) - comp.compound[1]);
            Ok(row)
        }))?
    };

    let mut checks = Vec::with_capacity(7);
    for (k, &(_, t)) in points.iter().enumerate() {
        let samples: Vec<f64> = rows.iter().map(|row| row[k]).collect();
        let (est, se) = exec::mean_and_se(&samples);
        let label = (k + 1) as f64 / 5.0;
        checks.push(Check {
            name: format!("mean_intensity_at_{label:.1}T"),
            report: McReport::two_sided(est, se, mean_intensity(&hawkes, t), n),
        });
    }
    let idx = times.len();
    for (offset, name) in [(0usize, "compensated_counting_mean"), (1, "compensated_compound_mean")]
    {
        let samples: Vec<f64> = rows.iter().map(|row| row[idx + offset]).collect();
        let (est, se) = exec::mean_and_se(&samples);
        checks.push(Check {
            name: name.to_string(),
            report: McReport::two_sided(est, se, 0.0, n),
        });
    }
    let elapsed = started.elapsed();
    for c in &mut checks {
        c.report.wall_time = elapsed;
    }
    Ok(checks)
}

/// Density-martingale check: sample means of `X_T` and `Z_T` against 1 for a
/// parameter `a` inside the local-martingale range.
pub fn run_martingale(a: f64, exp: &Experiment) -> Result<Vec<Check>, McError> {
    let started = Instant::now();
    exp.validate()?;
    let model = exp.config.model.clone();
    let hawkes = exp.config.hawkes;
    let law = exp.config.jump_law.clone();
    let c_l = odes::compute_c_l(&model, &hawkes, &law, odes::BRACKET_TOL)?;
    let label = measures::classify(a, c_l, model.rho);
    if label == Classification::Inadmissible {
        return Err(MeasureError::ClassificationMismatch {
            a,
            found: label,
            required: Classification::Elmm,
        }
        .into());
    }
    let grid = exp.grid();
    let seed = exp.master_seed;
    let horizon = model.horizon;
    let n = exp.n_paths;

    let pairs = collect(exec::map_paths(n, move |i| {
        let mut rng = exec::path_rng(seed, i as u64);
        let events = hawkes::simulate_hawkes(&hawkes, &law, horizon, &mut rng)?;
        let vpath = sde::simulate_variance(&model, &events, &grid, Scheme::Exact, &mut rng)?;
        let spath = sde::simulate_stock(&model, &vpath, DriftSpec::Objective, &mut rng);
        let f = measures::density_factors(&model, &vpath, &spath, a)?;
        Ok((f.x, f.z))
    }))?;
    let xs: Vec<f64> = pairs.iter().map(|&(x, _)| x).collect();
    let zs: Vec<f64> = pairs.iter().map(|&(_, z)| z).collect();
    let (xm, xs_se) = exec::mean_and_se(&xs);
    let (zm, zs_se) = exec::mean_and_se(&zs);
    let elapsed = started.elapsed();
    let mut checks = vec![
        Check {
            name: format!("density_x_mean_a_{a:.6}"),
            report: McReport::two_sided(xm, xs_se, 1.0, n),
        },
        Check {
            name: format!("density_z_mean_a_{a:.6}"),
            report: McReport::two_sided(zm, zs_se, 1.0, n),
        },
    ];
    for c in &mut checks {
        c.report.wall_time = elapsed;
    }
    Ok(checks)
}

/// Pricing-measure check for an `a` in the true-martingale range: direct
/// simulation under the transformed coefficients, the importance-weighted
/// estimator under the original ones, and their agreement.
pub fn run_emm(a: f64, exp: &Experiment) -> Result<Vec<Check>, McError> {
    let started = Instant::now();
    exp.validate()?;
    let direct =
        measures::emm_check_direct(&exp.config, a, exp.n_paths, exp.grid_steps, exp.master_seed)?;
    let weighted = measures::emm_check_importance(
        &exp.config,
        a,
        exp.n_paths,
        exp.grid_steps,
        exp.master_seed ^ 0x9E37_79B9_7F4A_7C15,
    )?;
    let joint = (direct.mc.std_error.powi(2) + weighted.mc.std_error.powi(2)).sqrt();
    let agreement = McReport::two_sided(
        direct.mc.estimate - weighted.mc.estimate,
        joint,
        0.0,
        exp.n_paths,
    );
    let mut checks = vec![
        Check { name: format!("emm_direct_discounted_mean_a_{a:.6}"), report: direct.mc },
        Check { name: format!("emm_importance_weighted_mean_a_{a:.6}"), report: weighted.mc },
        Check { name: format!("emm_estimator_agreement_a_{a:.6}"), report: agreement },
    ];
    let elapsed = started.elapsed();
    for c in &mut checks {
        c.report.wall_time = elapsed;
    }
    Ok(checks)
}

/// Everything a suite run produces; serializes deterministically for a fixed
/// configuration and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
}

impl SuiteReport {
    /// Suite verdict: no conclusive check failed.
    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }
}

struct SuiteSizes {
    moment_paths: usize,
    mean_paths: usize,
    comparison_paths: usize,
    comparison_steps: usize,
    hawkes_paths: usize,
    density_paths: usize,
    emm_paths: usize,
    grid_steps: usize,
}

fn suite_sizes(name: &str) -> Result<SuiteSizes, McError> {
    match name {
        "full" => Ok(SuiteSizes {
            moment_paths: 100_000,
            mean_paths: 100_000,
            comparison_paths: 10_000,
            comparison_steps: 1_000,
            hawkes_paths: 100_000,
            density_paths: 100_000,
            emm_paths: 100_000,
            grid_steps: 200,
        }),
        "quick" => Ok(SuiteSizes {
            moment_paths: 4_000,
            mean_paths: 4_000,
            comparison_paths: 500,
            comparison_steps: 1_000,
            hawkes_paths: 4_000,
            density_paths: 4_000,
            emm_paths: 4_000,
            grid_steps: 100,
        }),
        other => Err(McError::UnknownSuite { name: other.to_string() }),
    }
}

fn stride_seed(master: u64, item: u64) -> u64 {
    master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(item))
}

/// Run a named verification suite against one configuration.
///
/// The "full" suite runs at the path counts the acceptance gate quotes; the
/// "quick" suite keeps every check but at desk-scale sizes.
pub fn run_suite(
    config: &ModelConfig,
    name: &str,
    master_seed: u64,
) -> Result<SuiteReport, McError> {
    config.validate()?;
    let sizes = suite_sizes(name)?;
    let model = &config.model;
    let c_l = odes::compute_c_l(model, &config.hawkes, &config.jump_law, odes::BRACKET_TOL)?;
    let mut checks = Vec::new();
    let mut item = 0u64;
    let mut next_seed = || {
        item += 1;
        stride_seed(master_seed, item)
    };

    for frac in [0.25, 0.5, 0.75] {
        let exp = Experiment::new(config.clone(), sizes.moment_paths, next_seed(), sizes.grid_steps);
        let report = run_exp_moment(frac * c_l, &exp)?;
        checks.push(Check { name: format!("exp_moment_at_{frac}cl"), report });
    }

    let exp = Experiment::new(config.clone(), sizes.mean_paths, next_seed(), sizes.grid_steps);
    checks.extend(run_mean_variance(&exp)?);

    let exp = Experiment::new(
        config.clone(),
        sizes.comparison_paths,
        next_seed(),
        sizes.comparison_steps,
    );
    let report = run_comparison(&exp)?;
    checks.push(Check { name: "comparison_violation_fraction".to_string(), report });

    let exp = Experiment::new(config.clone(), sizes.hawkes_paths, next_seed(), sizes.grid_steps);
    checks.extend(run_hawkes_moments(&exp)?);

    let elmm_edge = measures::elmm_bound(c_l);
    for frac in [0.3, 0.6, 0.9] {
        let exp =
            Experiment::new(config.clone(), sizes.density_paths, next_seed(), sizes.grid_steps);
        checks.extend(run_martingale(frac * elmm_edge, &exp)?);
    }

    if let Some(bound) = measures::emm_bound(c_l, model.rho) {
        let exp = Experiment::new(config.clone(), sizes.emm_paths, next_seed(), sizes.grid_steps);
        checks.extend(run_emm(0.5 * bound, &exp)?);
    }

    let passed = checks.iter().filter(|c| c.report.pass && c.report.conclusive).count();
    let failed = checks.iter().filter(|c| !c.report.pass && c.report.conclusive).count();
    let inconclusive = checks.iter().filter(|c| !c.report.conclusive).count();
    let descriptor = (config, name, master_seed);
    Ok(SuiteReport {
        suite: name.to_string(),
        master_seed,
        config_hash: config_hash(&descriptor),
        checks,
        passed,
        failed,
        inconclusive,
    })
}
