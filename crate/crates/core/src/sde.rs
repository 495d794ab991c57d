//! Variance and stock path simulation.
//!
//! The variance follows a square-root diffusion pushed up by scaled jump
//! marks at Hawkes event times:
//!
//! ```text
//! dv_t = -kappa (v_t - vbar) dt + sigma sqrt(v_t) dW_t + eta dL_t
//! ```
//!
//! Between consecutive nodes of the merged timeline (grid nodes plus event
//! times) the jump term is silent and the transition is the classical CIR
//! one: `v_{t+d} ~ scale * chi'^2_delta(nc)` with
//!
//! ```text
//! scale = sigma^2 (1 - e^{-kappa d}) / (4 kappa)
//! delta = 4 kappa vbar / sigma^2
//! nc    = v_t e^{-kappa d} / scale
//! ```
//!
//! so that `E[v_{t+d} | v_t] = v_t e^{-kappa d} + vbar (1 - e^{-kappa d})`.
//! The exact sampler never materializes the Brownian increments, so the
//! W-channel integral needed by the stock's correlation channel and by the
//! Girsanov factors is recovered per interval from the SDE identity
//!
//! ```text
//! sigma int sqrt(v) dW = dv + kappa int (v - vbar) ds - eta dL
//! ```
//!
//! with the time integral approximated by the trapezoid rule on the interval
//! endpoints. Under the Euler scheme the increment is explicit and the
//! literal left-endpoint `sqrt(v) dW` is used instead.

use crate::hawkes::MarkedPointPath;
use crate::model::{ModelParams, TimeGrid};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SdeError {
    #[error("step size must be positive and finite, got {dt}")]
    BadStep { dt: f64 },
    #[error("variance start must be nonnegative and finite, got {v}")]
    BadStart { v: f64 },
    #[error("exact transition needs kappa > 0, got {kappa}")]
    BadMeanReversion { kappa: f64 },
    #[error("grid [{start}, {end}] incompatible with the event span [0, {horizon}]")]
    GridMismatch { start: f64, end: f64, horizon: f64 },
}

/// Discretization scheme for the variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Noncentral chi-square transition between nodes; exact in law.
    Exact,
    /// Euler step with negative values truncated to zero.
    EulerTruncated,
}

/// Exact one-step CIR transition without jumps.
pub fn cir_transition<R: Rng + ?Sized>(
    v_start: f64,
    dt: f64,
    kappa: f64,
    vbar: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<f64, SdeError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SdeError::BadStep { dt });
    }
    if !(v_start >= 0.0) || !v_start.is_finite() {
        return Err(SdeError::BadStart { v: v_start });
    }
    if !(kappa > 0.0) {
        return Err(SdeError::BadMeanReversion { kappa });
    }
    let decay = (-kappa * dt).exp();
    let scale = sigma * sigma * (1.0 - decay) / (4.0 * kappa);
    let delta = 4.0 * kappa * vbar / (sigma * sigma);
    let nc = v_start * decay / scale;
    Ok(scale * noncentral_chisq(delta, nc, rng))
}

/// Sample chi'^2_delta(nc). For delta >= 1 use the decomposition
/// `(Z + sqrt(nc))^2 + chi^2_{delta-1}`; otherwise the Poisson mixture of
/// central chi-squares.
fn noncentral_chisq<R: Rng + ?Sized>(delta: f64, nc: f64, rng: &mut R) -> f64 {
    if delta >= 1.0 {
        let z: f64 = StandardNormal.sample(rng);
        let shifted = (z + nc.sqrt()).powi(2);
        if delta > 1.0 {
            shifted + Gamma::new((delta - 1.0) / 2.0, 2.0).expect("positive dof").sample(rng)
        } else {
            shifted
        }
    } else {
        let k: f64 = if nc > 0.0 {
            Poisson::new(nc / 2.0).expect("positive mean").sample(rng)
        } else {
            0.0
        };
        let shape = delta / 2.0 + k;
        if shape == 0.0 {
            0.0
        } else {
            Gamma::new(shape, 2.0).expect("positive shape").sample(rng)
        }
    }
}

/// One Euler step with full truncation: negative state enters drift and
/// diffusion clamped at zero.
pub fn euler_ft_step(v: f64, dt: f64, dw: f64, kappa: f64, vbar: f64, sigma: f64) -> f64 {
    let vp = v.max(0.0);
    v - kappa * (vp - vbar) * dt + sigma * vp.sqrt() * dw
}

/// A jump event registered on the merged timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    /// Index into `times`/`values` where the jump lands.
    pub node: usize,
    /// Left limit of the variance at the event time.
    pub pre_value: f64,
    /// Raw mark `J`; the variance jumps by `eta * J`.
    pub mark: f64,
}

/// Variance path on the merged timeline (grid nodes plus event times).
///
/// `values` are right-continuous: at an event node the stored value includes
/// the jump, the left limit sits in [`PathEvent::pre_value`]. `dw_int[i]`
/// carries `int sqrt(v) dW` over `[times[i], times[i+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub events: Vec<PathEvent>,
    pub dw_int: Vec<f64>,
    pub scheme: Scheme,
    pub eta: f64,
}

impl VariancePath {
    /// Left limits at every node (equal to `values` except at event nodes).
    pub fn left_limits(&self) -> Vec<f64> {
        let mut left = self.values.clone();
        for ev in &self.events {
            left[ev.node] = ev.pre_value;
        }
        left
    }

    /// Trapezoid integral of the variance over the whole span, treating the
    /// path as cadlag (right value at the left node, left limit at the right
    /// node of each interval).
    pub fn integral_v(&self) -> f64 {
        let left = self.left_limits();
        let mut acc = 0.0;
        for i in 0..self.times.len() - 1 {
            let d = self.times[i + 1] - self.times[i];
            acc += 0.5 * (self.values[i] + left[i + 1]) * d;
        }
        acc
    }

    /// Value at a node matching `t` up to `1e-9`; `None` if `t` is not a node.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&x| x < t - 1e-9);
        if i < self.times.len() && (self.times[i] - t).abs() <= 1e-9 {
            Some(self.values[i])
        } else {
            None
        }
    }

    /// Terminal variance.
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("nonempty path")
    }
}

/// Merge grid nodes with event times; both endpoints kept, exact duplicates
/// collapsed. Returns the timeline and, for each event, its node index.
fn merged_timeline(grid: &TimeGrid, events: &MarkedPointPath) -> (Vec<f64>, Vec<usize>) {
    let mut times: Vec<f64> = Vec::with_capacity(grid.len() + events.len());
    let mut event_nodes = Vec::with_capacity(events.len());
    let mut gi = 0usize;
    let mut ei = 0usize;
    while gi < grid.len() || ei < events.len() {
        let g = if gi < grid.len() { grid.node(gi) } else { f64::INFINITY };
        let e = if ei < events.len() { events.times[ei] } else { f64::INFINITY };
        if e < g {
            times.push(e);
            event_nodes.push(times.len() - 1);
            ei += 1;
        } else if g < e {
            times.push(g);
            gi += 1;
        } else {
            // Event exactly on a grid node.
            times.push(g);
            event_nodes.push(times.len() - 1);
            gi += 1;
            ei += 1;
        }
    }
    (times, event_nodes)
}

/// Simulate the variance along `grid`, injecting the marked events.
///
/// The grid must start at 0 (where `v0` applies) and end within the event
/// path's span.
pub fn simulate_variance<R: Rng + ?Sized>(
    model: &ModelParams,
    events: &MarkedPointPath,
    grid: &TimeGrid,
    scheme: Scheme,
    rng: &mut R,
) -> Result<VariancePath, SdeError> {
    if grid.start != 0.0 || grid.end > events.horizon * (1.0 + 1e-12) {
        return Err(SdeError::GridMismatch {
            start: grid.start,
            end: grid.end,
            horizon: events.horizon,
        });
    }
    let (times, event_nodes) = merged_timeline(grid, events);
    let n = times.len();
    let mut values = Vec::with_capacity(n);
    let mut dw_int = Vec::with_capacity(n - 1);
    let mut path_events = Vec::with_capacity(events.len());
    values.push(model.v0);

    let mut next_event = 0usize;
    let mut v = model.v0;
    for i in 1..n {
        let d = times[i] - times[i - 1];
        let pre = match scheme {
            Scheme::Exact => {
                let next = cir_transition(v, d, model.kappa, model.vbar, model.sigma, rng)?;
                // sigma int sqrt(v) dW = dv + kappa int (v - vbar) ds over the
                // jump-free interval; trapezoid for the time integral.
                let time_int = 0.5 * (v + next) * d - model.vbar * d;
                dw_int.push((next - v + model.kappa * time_int) / model.sigma);
                next
            }
            Scheme::EulerTruncated => {
                let dw: f64 = rng.sample::<f64, _>(StandardNormal) * d.sqrt();
                dw_int.push(v.max(0.0).sqrt() * dw);
                euler_ft_step(v, d, dw, model.kappa, model.vbar, model.sigma).max(0.0)
            }
        };
        v = pre;
        if next_event < event_nodes.len() && event_nodes[next_event] == i {
            let mark = events.marks[next_event];
            v = pre + model.eta * mark;
            path_events.push(PathEvent { node: i, pre_value: pre, mark });
            next_event += 1;
        }
        values.push(v);
    }

    Ok(VariancePath { times, values, events: path_events, dw_int, scheme, eta: model.eta })
}

/// Which drift the stock carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSpec {
    /// Piecewise-constant `mu_t` (objective measure).
    Objective,
    /// Constant risk-free rate (martingale measures).
    RiskNeutral,
}

/// Log-price path on the same timeline as the variance path that drove it.
#[derive(Debug, Clone, PartialEq)]
pub struct StockPath {
    pub times: Vec<f64>,
    pub log_prices: Vec<f64>,
    /// Increments of the independent Brownian driver, one per interval; kept
    /// for density-factor computations.
    pub db: Vec<f64>,
    pub drift: DriftSpec,
}

impl StockPath {
    pub fn terminal_price(&self) -> f64 {
        self.log_prices.last().expect("nonempty path").exp()
    }
}

/// Evolve the log price over the variance path's timeline:
///
/// ```text
/// dlog S = (drift - v/2) dt + sqrt(1-rho^2) sqrt(v) dB + rho sqrt(v) dW
/// ```
///
/// with left-endpoint variance; the W-channel reuses the increments stored on
/// the variance path so the correlation is genuine.
pub fn simulate_stock<R: Rng + ?Sized>(
    model: &ModelParams,
    vpath: &VariancePath,
    drift: DriftSpec,
    rng: &mut R,
) -> StockPath {
    let n = vpath.times.len();
    let ortho = (1.0 - model.rho * model.rho).sqrt();
    let mut log_prices = Vec::with_capacity(n);
    let mut db = Vec::with_capacity(n - 1);
    let mut ls = model.s0.ln();
    log_prices.push(ls);
    for i in 0..n - 1 {
        let t = vpath.times[i];
        let d = vpath.times[i + 1] - t;
        let v = vpath.values[i];
        let mu = match drift {
            DriftSpec::Objective => model.mu.value_at(t),
            DriftSpec::RiskNeutral => model.r,
        };
        let dbi: f64 = rng.sample::<f64, _>(StandardNormal) * d.sqrt();
        ls += (mu - 0.5 * v) * d + ortho * v.sqrt() * dbi + model.rho * vpath.dw_int[i];
        log_prices.push(ls);
        db.push(dbi);
    }
    StockPath { times: vpath.times.clone(), log_prices, db, drift }
}

/// Coupled Euler paths sharing the Brownian increments: one with the jumps,
/// one without. States are full-truncation Euler (raw values stored, clamped
/// only inside drift and diffusion).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonPair {
    pub times: Vec<f64>,
    pub with_jumps: Vec<f64>,
    pub without_jumps: Vec<f64>,
}

impl ComparisonPair {
    /// Largest amount by which the jump-free path exceeds the jumped one
    /// (positive means an ordering violation of that size).
    pub fn max_excess(&self) -> f64 {
        self.without_jumps
            .iter()
            .zip(&self.with_jumps)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of nodes where the jump-free path exceeds the jumped one by
    /// more than `tol`.
    pub fn violations(&self, tol: f64) -> usize {
        self.without_jumps
            .iter()
            .zip(&self.with_jumps)
            .filter(|(a, b)| **a > **b + tol)
            .count()
    }
}

/// Simulate the comparison pair along `grid` against the given events.
pub fn simulate_comparison_pair<R: Rng + ?Sized>(
    model: &ModelParams,
    events: &MarkedPointPath,
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<ComparisonPair, SdeError> {
    if grid.start != 0.0 || grid.end > events.horizon * (1.0 + 1e-12) {
        return Err(SdeError::GridMismatch {
            start: grid.start,
            end: grid.end,
            horizon: events.horizon,
        });
    }
    let (times, event_nodes) = merged_timeline(grid, events);
    let n = times.len();
    let mut with_jumps = Vec::with_capacity(n);
    let mut without_jumps = Vec::with_capacity(n);
    with_jumps.push(model.v0);
    without_jumps.push(model.v0);

    let mut v_j = model.v0;
    let mut v_p = model.v0;
    let mut next_event = 0usize;
    for i in 1..n {
        let d = times[i] - times[i - 1];
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * d.sqrt();
        v_j = euler_ft_step(v_j, d, dw, model.kappa, model.vbar, model.sigma);
        v_p = euler_ft_step(v_p, d, dw, model.kappa, model.vbar, model.sigma);
        if next_event < event_nodes.len() && event_nodes[next_event] == i {
            v_j += model.eta * events.marks[next_event];
            next_event += 1;
        }
        with_jumps.push(v_j);
        without_jumps.push(v_p);
    }
    Ok(ComparisonPair { times, with_jumps, without_jumps })
}
