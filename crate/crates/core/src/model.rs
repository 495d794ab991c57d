//! Model parameters, time grids, and validation.
//!
//! Admissible parameters satisfy three structural conditions on top of plain
//! domain requirements:
//!
//! ```text
//! Feller:    2 kappa vbar >= sigma^2          (variance stays positive)
//! stability: alpha < beta                     (Hawkes intensity non-explosive)
//! domain:    all rates/scales positive, |rho| < 1, horizon > 0
//! ```
//!
//! `validate` checks everything at once and reports every violated condition,
//! not just the first one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distribution of the i.i.d. jump marks `J_i > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpLaw {
    /// Exponential with the given rate; mean `1/rate`.
    Exponential { rate: f64 },
    /// Gamma with shape and rate; mean `shape/rate`.
    Gamma { shape: f64, rate: f64 },
    /// Degenerate law: every mark equals `value`.
    Constant { value: f64 },
}

/// One breakpoint of a piecewise-constant drift: `value` applies from `t_from`
/// (inclusive) until the next breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuSegment {
    pub t_from: f64,
    pub value: f64,
}

/// Piecewise-constant deterministic drift `mu_t` for the stock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PiecewiseFlat {
    segments: Vec<MuSegment>,
}

impl PiecewiseFlat {
    /// A single segment starting at `t = 0`.
    pub fn constant(value: f64) -> Self {
        Self {
            segments: vec![MuSegment { t_from: 0.0, value }],
        }
    }

    pub fn new(segments: Vec<MuSegment>) -> Self {
        Self { segments }
    }

    pub fn segments(&self) -> &[MuSegment] {
        &self.segments
    }

    /// Value in force at time `t` (the last breakpoint with `t_from <= t`).
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self
            .segments
            .partition_point(|seg| seg.t_from <= t)
            .saturating_sub(1);
        self.segments[idx].value
    }

    fn check(&self, errors: &mut Vec<ValidationError>) {
        if self.segments.is_empty() {
            errors.push(ValidationError::domain("mu must have at least one segment"));
            return;
        }
        if self.segments[0].t_from != 0.0 {
            errors.push(ValidationError::domain("mu's first segment must start at t = 0"));
        }
        for pair in self.segments.windows(2) {
            if pair[1].t_from <= pair[0].t_from {
                errors.push(ValidationError::domain(
                    "mu breakpoints must be strictly increasing",
                ));
                break;
            }
        }
        if self.segments.iter().any(|s| !s.t_from.is_finite() || !s.value.is_finite()) {
            errors.push(ValidationError::domain("mu segments must be finite"));
        }
    }
}

/// Diffusion-side parameters of the stock/variance pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Initial stock price.
    pub s0: f64,
    /// Initial variance.
    pub v0: f64,
    /// Variance mean-reversion speed.
    pub kappa: f64,
    /// Variance long-run level.
    pub vbar: f64,
    /// Variance vol-of-vol.
    pub sigma: f64,
    /// Scale applied to jump marks before they enter the variance.
    pub eta: f64,
    /// Correlation between the stock's Brownian driver and the variance's.
    pub rho: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Piecewise-constant stock drift under the objective measure.
    pub mu: PiecewiseFlat,
    /// Terminal time `T`.
    pub horizon: f64,
}

impl ModelParams {
    /// Whether `2 kappa vbar >= sigma^2` (equality counts as satisfied).
    pub fn feller_ok(&self) -> bool {
        2.0 * self.kappa * self.vbar >= self.sigma * self.sigma
    }
}

/// Hawkes intensity parameters: `lambda_t = lambda0 + alpha sum e^{-beta (t - t_i)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    /// Baseline intensity.
    pub lambda0: f64,
    /// Self-excitation jump added to the intensity at each event.
    pub alpha: f64,
    /// Exponential decay rate of the excitation.
    pub beta: f64,
}

impl HawkesParams {
    /// Branching ratio `alpha/beta`; stability requires it below one.
    pub fn branching_ratio(&self) -> f64 {
        self.alpha / self.beta
    }
}

/// Uniform time grid on `[start, end]` with `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, steps: usize) -> Result<Self, ValidationError> {
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(ValidationError::domain("time grid needs finite end > start"));
        }
        if steps == 0 {
            return Err(ValidationError::domain("time grid needs at least one step"));
        }
        Ok(Self { start, end, steps })
    }

    pub fn dt(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }

    /// The i-th node, `i` in `0..=steps`. Endpoints are exact.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.steps {
            self.end
        } else {
            self.start + self.dt() * i as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |i| self.node(i))
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A single violated admissibility condition.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("Feller condition violated: 2*kappa*vbar = {lhs} < sigma^2 = {rhs}")]
    FellerViolated { lhs: f64, rhs: f64 },
    #[error("Hawkes stability violated: alpha = {alpha} must be < beta = {beta}")]
    StabilityViolated { alpha: f64, beta: f64 },
    #[error("domain violation: {0}")]
    DomainViolated(String),
}

impl ValidationError {
    fn domain(msg: impl Into<String>) -> Self {
        ValidationError::DomainViolated(msg.into())
    }
}

/// Every violated condition found by [`validate`], in check order.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameters: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationReport {
    pub violations: Vec<ValidationError>,
}

/// Check a full parameter set; `Ok(())` iff every condition holds.
pub fn validate(
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
) -> Result<(), ValidationReport> {
    fn need(errors: &mut Vec<ValidationError>, ok: bool, msg: &str) {
        if !ok {
            errors.push(ValidationError::domain(msg));
        }
    }

    let mut errors = Vec::new();
    need(&mut errors, model.s0.is_finite() && model.s0 > 0.0, "s0 must be > 0");
    need(&mut errors, model.v0.is_finite() && model.v0 > 0.0, "v0 must be > 0");
    need(&mut errors, model.kappa.is_finite() && model.kappa > 0.0, "kappa must be > 0");
    need(&mut errors, model.vbar.is_finite() && model.vbar > 0.0, "vbar must be > 0");
    need(&mut errors, model.sigma.is_finite() && model.sigma > 0.0, "sigma must be > 0");
    need(&mut errors, model.eta.is_finite() && model.eta > 0.0, "eta must be > 0");
    need(
        &mut errors,
        model.rho.is_finite() && model.rho.abs() < 1.0,
        "rho must lie in (-1, 1)",
    );
    need(&mut errors, model.r.is_finite(), "r must be finite");
    need(
        &mut errors,
        model.horizon.is_finite() && model.horizon > 0.0,
        "horizon must be > 0",
    );
    model.mu.check(&mut errors);

    need(
        &mut errors,
        hawkes.lambda0.is_finite() && hawkes.lambda0 > 0.0,
        "lambda0 must be > 0",
    );
    need(&mut errors, hawkes.alpha.is_finite() && hawkes.alpha >= 0.0, "alpha must be >= 0");
    need(&mut errors, hawkes.beta.is_finite() && hawkes.beta > 0.0, "beta must be > 0");

    match *law {
        JumpLaw::Exponential { rate } => need(
            &mut errors,
            rate.is_finite() && rate > 0.0,
            "exponential jump rate must be > 0",
        ),
        JumpLaw::Gamma { shape, rate } => {
            need(&mut errors, shape.is_finite() && shape > 0.0, "gamma jump shape must be > 0");
            need(&mut errors, rate.is_finite() && rate > 0.0, "gamma jump rate must be > 0");
        }
        JumpLaw::Constant { value } => need(
            &mut errors,
            value.is_finite() && value > 0.0,
            "constant jump value must be > 0",
        ),
    }

    // Structural conditions only make sense once the plain domains hold.
    if model.kappa > 0.0 && model.vbar > 0.0 && model.sigma > 0.0 && !model.feller_ok() {
        errors.push(ValidationError::FellerViolated {
            lhs: 2.0 * model.kappa * model.vbar,
            rhs: model.sigma * model.sigma,
        });
    }
    if hawkes.beta > 0.0 && hawkes.alpha >= hawkes.beta {
        errors.push(ValidationError::StabilityViolated {
            alpha: hawkes.alpha,
            beta: hawkes.beta,
        });
    }

    if errors.is_empty() {
        Ok(())
    } else {
        Err(ValidationReport { violations: errors })
    }
}

/// Full configuration as read from a JSON file: model, Hawkes, and jump law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelParams,
    pub hawkes: HawkesParams,
    pub jump_law: JumpLaw,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ValidationReport> {
        validate(&self.model, &self.hawkes, &self.jump_law)
    }
}

impl Default for ModelConfig {
    /// Reference parameter set used across the verification suite.
    fn default() -> Self {
        Self {
            model: ModelParams {
                s0: 100.0,
                v0: 0.04,
                kappa: 2.0,
                vbar: 0.04,
                sigma: 0.3,
                eta: 0.5,
                rho: -0.3,
                r: 0.02,
                mu: PiecewiseFlat::constant(0.05),
                horizon: 1.0,
            },
            hawkes: HawkesParams {
                lambda0: 1.0,
                alpha: 1.0,
                beta: 2.0,
            },
            jump_law: JumpLaw::Exponential { rate: 10.0 },
        }
    }
}
