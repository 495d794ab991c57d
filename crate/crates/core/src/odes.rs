//! Affine ODE system behind the exponential-moment bound, and the
//! admissibility constants `c_s` / `c_l`.
//!
//! For an exponent `c` the bound `E[exp(c int_0^T v dt)] <= M(0)` with
//! `M(0) = exp(F(0) + G(0) v_0 + H(0) lambda_0)` rests on the terminal-value
//! system
//!
//! ```text
//! G' = -(sigma^2/2) G^2 + kappa G - c        G(T) = 0
//! H' = beta H + 1 - M_J(eta G) e^{alpha H}   H(T) = 0
//! F(t) = int_t^T (kappa vbar G + beta lambda0 H) ds
//! ```
//!
//! `G` has the closed form (time-to-go `tau = T - t`, `D = sqrt(kappa^2 - 2 sigma^2 c)`)
//!
//! ```text
//! G = 2 c (e^{D tau} - 1) / (D - kappa + (D + kappa) e^{D tau})
//! ```
//!
//! with the series limit `2 c tau / (2 + kappa tau)` taking over when
//! `|D| tau < 1e-6` (the expression is 0/0 at `D = 0`). `Lambda(c) = eta G(0)`
//! is the largest argument the jump mgf sees; feasibility of the whole system
//! at `c` means
//!
//! ```text
//! Lambda(c) < epsilon_J   and   U = M_J(Lambda(c)) <= (beta/alpha) e^{alpha/beta - 1}
//! ```
//!
//! under which `h(s) = H(T - s)` stays inside `[-1/beta, x_p]`,
//! `x_p = ln(beta/(alpha U))/alpha`. `H` is integrated by classical RK4 on a
//! half-step refinement of the requested grid (so Simpson's rule for `F` has
//! its midpoints available), `G` being evaluated in closed form at every
//! stage.
//!
//! `c_s` is the closed-form admissibility constant
//! `min{kappa eps_J/(2 eta), (kappa/(2 eta)) M_J^{-1}((beta/alpha) e^{alpha/beta-1}), kappa^2/(2 sigma^2)}`
//! and `c_l >= c_s` is the numeric feasibility edge, located by a geometric
//! scan plus bisection.

use crate::mgf::{self, MgfError};
use crate::model::{HawkesParams, JumpLaw, ModelParams, TimeGrid};
use thiserror::Error;

/// Tolerance band around the `[-1/beta, x_p]` bracket before the H solver
/// declares a violation.
pub const BRACKET_TOL: f64 = 1e-9;

/// Relative width below which the closed-form `G` switches to its series
/// limit to dodge the 0/0 at `D = 0`.
const SERIES_SWITCH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("c = {c} exceeds the diffusion cap kappa^2/(2 sigma^2) = {cap}")]
    AboveDiffusionCap { c: f64, cap: f64 },
    #[error("c = {c} is outside the feasible exponent range")]
    Infeasible { c: f64 },
    #[error("H left its bracket: h({s}) = {h}, allowed [{lo}, {hi}]")]
    BracketViolated { s: f64, h: f64, lo: f64, hi: f64 },
    #[error("tolerance must be positive and finite, got {tol}")]
    BadTol { tol: f64 },
    #[error("Lambda(c) failed to be nondecreasing on the scan grid near c = {c}")]
    NotMonotone { c: f64 },
    #[error(transparent)]
    Mgf(#[from] MgfError),
}

/// `kappa^2 / (2 sigma^2)`: largest exponent for which `D(c)` stays real.
pub fn diffusion_cap(model: &ModelParams) -> f64 {
    model.kappa * model.kappa / (2.0 * model.sigma * model.sigma)
}

/// `D(c) = sqrt(kappa^2 - 2 sigma^2 c)`; requires `c <= diffusion_cap`.
pub fn big_d(c: f64, model: &ModelParams) -> Result<f64, OdeError> {
    let cap = diffusion_cap(model);
    if c > cap {
        return Err(OdeError::AboveDiffusionCap { c, cap });
    }
    // At or just below the cap the discriminant can round to a tiny negative.
    let disc = model.kappa * model.kappa - 2.0 * model.sigma * model.sigma * c;
    Ok(disc.max(0.0).sqrt())
}

/// Ceiling on `U = M_J(Lambda(c))` imposed by the Hawkes feedback:
/// `(beta/alpha) e^{alpha/beta - 1}`, infinite when `alpha = 0`.
pub fn hawkes_ceiling(hawkes: &HawkesParams) -> f64 {
    if hawkes.alpha == 0.0 {
        f64::INFINITY
    } else {
        let x = hawkes.alpha / hawkes.beta;
        (1.0 / x) * (x - 1.0).exp()
    }
}

/// Closed-form `G` at time-to-go `tau`.
fn riccati_tail(c: f64, tau: f64, model: &ModelParams) -> Result<f64, OdeError> {
    let d = big_d(c, model)?;
    if d * tau < SERIES_SWITCH {
        // Limit of the expression as D tau -> 0.
        return Ok(2.0 * c * tau / (2.0 + model.kappa * tau));
    }
    let e = (d * tau).exp();
    Ok(2.0 * c * (e - 1.0) / (d - model.kappa + (d + model.kappa) * e))
}

/// `Lambda(c) = eta G(0)`: the argument fed to the jump mgf at time zero.
pub fn big_lambda(c: f64, model: &ModelParams) -> Result<f64, OdeError> {
    Ok(model.eta * riccati_tail(c, model.horizon, model)?)
}

/// Whether the exponential-moment system is well posed at `c`:
/// `Lambda(c)` below the mgf edge and `U` within the Hawkes ceiling.
pub fn feasible(
    c: f64,
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
) -> Result<bool, OdeError> {
    let lam = big_lambda(c, model)?;
    if !(lam < mgf::epsilon(law)) {
        return Ok(false);
    }
    let u = mgf::mgf(law, lam)?;
    Ok(u <= hawkes_ceiling(hawkes))
}

/// Closed-form `G` at every grid node.
pub fn solve_g(c: f64, model: &ModelParams, grid: &TimeGrid) -> Result<Vec<f64>, OdeError> {
    grid.nodes().map(|t| riccati_tail(c, grid.end - t, model)).collect()
}

/// Classical RK4 for `y' = f(s, y)`, `y(0) = 0`, over `n_steps` uniform steps
/// of size `step`; returns values at every node.
fn rk4_forward<F>(n_steps: usize, step: f64, f: F) -> Result<Vec<f64>, OdeError>
where
    F: Fn(f64, f64) -> Result<f64, OdeError>,
{
    let mut ys = Vec::with_capacity(n_steps + 1);
    let mut y = 0.0;
    ys.push(y);
    for i in 0..n_steps {
        let s = step * i as f64;
        let k1 = f(s, y)?;
        let k2 = f(s + 0.5 * step, y + 0.5 * step * k1)?;
        let k3 = f(s + 0.5 * step, y + 0.5 * step * k2)?;
        let k4 = f(s + step, y + step * k3)?;
        y += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ys.push(y);
    }
    Ok(ys)
}

/// `h(s) = H(T - s)` on the half-step refinement of `grid` (2n steps), after
/// checking feasibility and the `[-1/beta, x_p]` bracket.
fn integrate_h_half(
    c: f64,
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
    grid: &TimeGrid,
) -> Result<Vec<f64>, OdeError> {
    if !feasible(c, model, hawkes, law)? {
        return Err(OdeError::Infeasible { c });
    }
    let (alpha, beta) = (hawkes.alpha, hawkes.beta);
    let u = mgf::mgf(law, big_lambda(c, model)?)?;
    let x_p = bracket_ceiling(u, hawkes);

    let n_half = 2 * grid.steps;
    let step = (grid.end - grid.start) / n_half as f64;
    let f = |s: f64, y: f64| -> Result<f64, OdeError> {
        let g = riccati_tail(c, s, model)?;
        let m = mgf::mgf(law, model.eta * g)?;
        Ok(m * (alpha * y).exp() - beta * y - 1.0)
    };
    let hs = rk4_forward(n_half, step, f)?;

    let lo = -1.0 / beta - BRACKET_TOL;
    let hi = x_p + BRACKET_TOL;
    for (j, &h) in hs.iter().enumerate() {
        if h < lo || h > hi {
            return Err(OdeError::BracketViolated { s: step * j as f64, h, lo, hi });
        }
    }
    Ok(hs)
}

/// Ceiling `x_p = ln(beta/(alpha U))/alpha` of the H bracket (infinite when
/// `alpha = 0`).
pub fn bracket_ceiling(u: f64, hawkes: &HawkesParams) -> f64 {
    if hawkes.alpha == 0.0 {
        f64::INFINITY
    } else {
        (hawkes.beta / (hawkes.alpha * u)).ln() / hawkes.alpha
    }
}

/// `H` at every grid node (terminal condition `H(T) = 0`).
pub fn solve_h(
    c: f64,
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
    grid: &TimeGrid,
) -> Result<Vec<f64>, OdeError> {
    let hs = integrate_h_half(c, model, hawkes, law, grid)?;
    Ok((0..grid.len()).map(|i| hs[2 * (grid.steps - i)]).collect())
}

/// `F(t) = int_t^T (kappa vbar G + beta lambda0 H) ds` at every grid node,
/// by composite Simpson on the half-step refinement.
pub fn solve_f(
    c: f64,
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
    grid: &TimeGrid,
) -> Result<Vec<f64>, OdeError> {
    let hs = integrate_h_half(c, model, hawkes, law, grid)?;
    simpson_f(c, model, hawkes, grid, &hs)
}

/// Cumulative Simpson of `kappa vbar G + beta lambda0 h` in the time-to-go
/// variable, mapped back to grid nodes.
fn simpson_f(
    c: f64,
    model: &ModelParams,
    hawkes: &HawkesParams,
    grid: &TimeGrid,
    h_half: &[f64],
) -> Result<Vec<f64>, OdeError> {
    let n = grid.steps;
    let step = (grid.end - grid.start) / (2 * n) as f64;
    let w = |j: usize| -> Result<f64, OdeError> {
        let s = step * j as f64;
        let g = riccati_tail(c, s, model)?;
        Ok(model.kappa * model.vbar * g + hawkes.beta * hawkes.lambda0 * h_half[j])
    };
    // cum[k] = integral from 0 to s_{2k} (full grid strides, Simpson panels).
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for k in 0..n {
        let (a, m, b) = (w(2 * k)?, w(2 * k + 1)?, w(2 * k + 2)?);
        acc += step / 3.0 * (a + 4.0 * m + b);
        cum.push(acc);
    }
    Ok((0..=n).map(|i| cum[n - i]).collect())
}

/// Everything the bound needs at a single exponent `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub c: f64,
    pub grid: TimeGrid,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub f: Vec<f64>,
    pub big_d: f64,
    pub lambda_c: f64,
    pub u: f64,
    pub x_p: f64,
    /// `exp(F(0) + G(0) v0 + H(0) lambda0)`.
    pub bound_m0: f64,
}

/// Solve the full system at `c` and assemble the supermartingale bound
/// `M(0) = exp(F(0) + G(0) v0 + H(0) lambda0)`.
pub fn supermartingale_bound(
    c: f64,
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
    grid: &TimeGrid,
) -> Result<OdeSolution, OdeError> {
    let hs = integrate_h_half(c, model, hawkes, law, grid)?;
    let g = solve_g(c, model, grid)?;
    let h: Vec<f64> = (0..grid.len()).map(|i| hs[2 * (grid.steps - i)]).collect();
    let f = simpson_f(c, model, hawkes, grid, &hs)?;
    let big_d = big_d(c, model)?;
    let lambda_c = big_lambda(c, model)?;
    let u = mgf::mgf(law, lambda_c)?;
    let x_p = bracket_ceiling(u, hawkes);
    let bound_m0 = (f[0] + g[0] * model.v0 + h[0] * hawkes.lambda0).exp();
    Ok(OdeSolution { c, grid: *grid, g, h, f, big_d, lambda_c, u, x_p, bound_m0 })
}

/// Pointwise envelopes for `H` in grid-node alignment: the lower one is the
/// jump-free closed form `(e^{-beta (T-t)} - 1)/beta`, the upper one freezes
/// the mgf factor at its maximum `U` and integrates
/// `h_M' = U e^{alpha h_M} - beta h_M - 1` with the same stepper.
pub fn bracket_envelopes(
    c: f64,
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
    grid: &TimeGrid,
) -> Result<(Vec<f64>, Vec<f64>), OdeError> {
    let u = mgf::mgf(law, big_lambda(c, model)?)?;
    let beta = hawkes.beta;
    let lower: Vec<f64> = grid
        .nodes()
        .map(|t| ((-beta * (grid.end - t)).exp() - 1.0) / beta)
        .collect();
    let n_half = 2 * grid.steps;
    let step = (grid.end - grid.start) / n_half as f64;
    let upper_half = rk4_forward(n_half, step, |_s, y| {
        Ok(u * (hawkes.alpha * y).exp() - beta * y - 1.0)
    })?;
    let upper: Vec<f64> =
        (0..grid.len()).map(|i| upper_half[2 * (grid.steps - i)]).collect();
    Ok((lower, upper))
}

/// Closed-form admissibility constant
/// `c_s = min{kappa eps_J/(2 eta), (kappa/(2 eta)) M_J^{-1}(ceiling), kappa^2/(2 sigma^2)}`.
pub fn compute_c_s(
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
) -> Result<f64, OdeError> {
    let eps = mgf::epsilon(law);
    let half_slope = model.kappa / (2.0 * model.eta);
    let term_edge = if eps.is_finite() { half_slope * eps } else { f64::INFINITY };
    let ceiling = hawkes_ceiling(hawkes);
    let term_ceiling = if ceiling.is_finite() {
        half_slope * mgf::mgf_inverse(law, ceiling)?
    } else {
        // alpha = 0: the ceiling is vacuous and the constraint degenerates to
        // the mgf edge itself.
        term_edge
    };
    Ok(term_edge.min(term_ceiling).min(diffusion_cap(model)))
}

/// Numeric feasibility edge: the largest `c <= kappa^2/(2 sigma^2)` with
/// `Lambda(c) < eps_J` and `M_J(Lambda(c))` within the Hawkes ceiling,
/// bracketed by a geometric scan and bisected to absolute width `tol`.
pub fn compute_c_l(
    model: &ModelParams,
    hawkes: &HawkesParams,
    law: &JumpLaw,
    tol: f64,
) -> Result<f64, OdeError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(OdeError::BadTol { tol });
    }
    let cap = diffusion_cap(model);
    if feasible(cap, model, hawkes, law)? {
        return Ok(cap);
    }

    // Geometric scan from cap * 1e-9 up to cap; Lambda must be nondecreasing
    // along the way or the bracket-then-bisect logic is unsound.
    const POINTS: usize = 256;
    let ratio = 1e-9f64.powf(-1.0 / (POINTS as f64 - 1.0));
    let mut last_feasible: Option<f64> = None;
    let mut first_infeasible = cap;
    let mut prev_lambda = f64::NEG_INFINITY;
    let mut c = cap * 1e-9;
    for _ in 0..POINTS {
        let c_clamped = c.min(cap);
        let lam = big_lambda(c_clamped, model)?;
        if lam < prev_lambda * (1.0 - 1e-12) {
            return Err(OdeError::NotMonotone { c: c_clamped });
        }
        prev_lambda = lam;
        if feasible(c_clamped, model, hawkes, law)? {
            last_feasible = Some(c_clamped);
        } else {
            first_infeasible = c_clamped;
            break;
        }
        c *= ratio;
    }
    let mut lo = match last_feasible {
        Some(x) => x,
        None => return Err(OdeError::Infeasible { c: cap * 1e-9 }),
    };
    let mut hi = first_infeasible;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid, model, hawkes, law)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
