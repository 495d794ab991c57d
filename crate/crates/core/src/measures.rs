//! Change-of-measure machinery for the jump-augmented Heston model.
//!
//! A scalar `a` indexes a family of candidate pricing measures built from two
//! stochastic exponentials driven by the market price of risk and by the
//! variance channel:
//!
//! ```text
//! theta_t = (1/sqrt(1-rho^2)) ((mu_t - r)/sqrt(v_t) - a rho sqrt(v_t))
//! Y_T = exp(-int theta dB - 1/2 int theta^2 dt)
//! Z_T = exp(-a int sqrt(v) dW - 1/2 a^2 int v dt)
//! X_T = Y_T Z_T
//! ```
//!
//! Admissibility is decided against the feasibility edge `c_l`:
//!
//! ```text
//! local martingale measure:  |a| < sqrt(2 c_l)
//! true martingale measure:   rho^2 < c_l  and
//!                            |a| < min{ sqrt(2 c_l)/2, sqrt(c_l - rho^2) }
//! ```
//!
//! Under the transformed measure the variance keeps its form with
//! `kappa_a = kappa + a sigma` and `vbar_a = kappa vbar / kappa_a`; the
//! product `kappa_a vbar_a = kappa vbar` is untouched, so the positivity
//! condition on the variance survives the change of measure. The Hawkes
//! street (kernel, baseline, mark law) is unchanged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::hawkes::{self, HawkesError};
use crate::mc::McReport;
use crate::model::{ModelConfig, ModelParams, PiecewiseFlat, TimeGrid, ValidationReport};
use crate::odes::{self, OdeError};
use crate::sde::{self, DriftSpec, Scheme, SdeError, StockPath, VariancePath};

/// Nodes with variance at or below this are rejected by the density factors:
/// `theta` divides by `sqrt(v)` and the discretized integrands degenerate.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("variance {v} at t = {t} is not usable for density work (must exceed {VARIANCE_FLOOR})")]
    NonpositiveVariance { t: f64, v: f64 },
    #[error("a = {a} classifies as {found}, but this check requires {required}")]
    ClassificationMismatch { a: f64, found: Classification, required: Classification },
    #[error("kappa + a sigma = {kappa_a} <= 0: direct simulation under the transformed measure is unavailable, use the importance-weighted estimator")]
    NonpositiveMeanReversion { kappa_a: f64 },
    #[error("density factors require the exact-transition variance scheme")]
    SchemeMismatch,
    #[error("variance and stock paths do not share a timeline")]
    PathMismatch,
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Hawkes(#[from] HawkesError),
    #[error(transparent)]
    Invalid(#[from] ValidationReport),
}

/// How the candidate measure indexed by `a` relates to the discounted stock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// `X^{(a)}` fails to be a density: no equivalent measure.
    Inadmissible,
    /// Equivalent measure under which the discounted stock is a local
    /// martingale, possibly a strict one.
    Elmm,
    /// Equivalent measure under which the discounted stock is a true
    /// martingale.
    Emm,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Classification::Inadmissible => write!(f, "inadmissible"),
            Classification::Elmm => write!(f, "ELMM"),
            Classification::Emm => write!(f, "EMM"),
        }
    }
}

/// Largest |a| that still yields a local martingale measure.
pub fn elmm_bound(c_l: f64) -> f64 {
    (2.0 * c_l).sqrt()
}

/// Largest |a| that yields a true martingale measure, when one exists at all
/// (requires `rho^2 < c_l`).
pub fn emm_bound(c_l: f64, rho: f64) -> Option<f64> {
    let gap = c_l - rho * rho;
    if gap > 0.0 {
        Some((elmm_bound(c_l) / 2.0).min(gap.sqrt()))
    } else {
        None
    }
}

/// Strongest label the parameter `a` earns against the feasibility edge.
pub fn classify(a: f64, c_l: f64, rho: f64) -> Classification {
    let abs = a.abs();
    if let Some(bound) = emm_bound(c_l, rho) {
        if abs < bound {
            return Classification::Emm;
        }
    }
    if abs < elmm_bound(c_l) {
        Classification::Elmm
    } else {
        Classification::Inadmissible
    }
}

/// A candidate measure: the Girsanov parameter together with its label and
/// the variance coefficients it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub a: f64,
    pub classification: Classification,
    /// Mean-reversion speed under the new measure, `kappa + a sigma`.
    pub kappa_a: f64,
    /// Long-run level under the new measure, `kappa vbar / kappa_a`.
    pub vbar_a: f64,
    /// Feasibility edge the classification was decided against.
    pub c_l: f64,
}

/// Assemble the [`MeasureSpec`] for `a` given the precomputed edge.
pub fn measure_spec(model: &ModelParams, a: f64, c_l: f64) -> MeasureSpec {
    let kappa_a = model.kappa + a * model.sigma;
    MeasureSpec {
        a,
        classification: classify(a, c_l, model.rho),
        kappa_a,
        vbar_a: model.kappa * model.vbar / kappa_a,
        c_l,
    }
}

/// Market price of risk carried by the stock's independent Brownian driver.
pub fn theta(model: &ModelParams, a: f64, t: f64, v: f64) -> Result<f64, MeasureError> {
    if !(v > 0.0) {
        return Err(MeasureError::NonpositiveVariance { t, v });
    }
    let ortho = (1.0 - model.rho * model.rho).sqrt();
    let sqrt_v = v.sqrt();
    Ok(((model.mu.value_at(t) - model.r) / sqrt_v - a * model.rho * sqrt_v) / ortho)
}

/// Model coefficients under the measure indexed by `a`: only the variance
/// drift changes, and the stock drift becomes the risk-free rate.
pub fn q_model(model: &ModelParams, a: f64) -> Result<ModelParams, MeasureError> {
    let kappa_a = model.kappa + a * model.sigma;
    if !(kappa_a > 0.0) {
        return Err(MeasureError::NonpositiveMeanReversion { kappa_a });
    }
    Ok(ModelParams {
        kappa: kappa_a,
        vbar: model.kappa * model.vbar / kappa_a,
        mu: PiecewiseFlat::constant(model.r),
        ..model.clone()
    })
}

/// Terminal values of the two density factors and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityFactors {
    pub y: f64,
    pub z: f64,
    pub x: f64,
}

/// Discretize the density exponents along a simulated path pair with
/// left-endpoint sums and return `(Y_T, Z_T, X_T = Y_T Z_T)`.
///
/// The variance path must come from the exact-transition scheme: its stored
/// `int sqrt(v) dW` increments are what the `Z` exponent integrates, and the
/// truncation in the Euler scheme would silently bias the factors.
pub fn density_factors(
    model: &ModelParams,
    vpath: &VariancePath,
    spath: &StockPath,
    a: f64,
) -> Result<DensityFactors, MeasureError> {
    if vpath.scheme != Scheme::Exact {
        return Err(MeasureError::SchemeMismatch);
    }
    let n = vpath.times.len();
    if spath.times.len() != n || spath.db.len() + 1 != n || vpath.dw_int.len() + 1 != n {
        return Err(MeasureError::PathMismatch);
    }
    let mut ey = 0.0;
    let mut ez = 0.0;
    for i in 0..n - 1 {
        let t = vpath.times[i];
        let d = vpath.times[i + 1] - t;
        let v = vpath.values[i];
        if !(v > VARIANCE_FLOOR) {
            return Err(MeasureError::NonpositiveVariance { t, v });
        }
        let th = theta(model, a, t, v)?;
        ey -= th * spath.db[i] + 0.5 * th * th * d;
        ez -= a * vpath.dw_int[i] + 0.5 * a * a * v * d;
    }
    let y = ey.exp();
    let z = ez.exp();
    Ok(DensityFactors { y, z, x: y * z })
}

/// Outcome of a martingale verification for one candidate measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmmReport {
    pub a: f64,
    pub classification: Classification,
    #[serde(flatten)]
    pub mc: McReport,
}

fn emm_precheck(
    config: &ModelConfig,
    a: f64,
) -> Result<(f64, Classification), MeasureError> {
    config.validate()?;
    let c_l = odes::compute_c_l(&config.model, &config.hawkes, &config.jump_law, odes::BRACKET_TOL)?;
    let label = classify(a, c_l, config.model.rho);
    if label != Classification::Emm {
        return Err(MeasureError::ClassificationMismatch {
            a,
            found: label,
            required: Classification::Emm,
        });
    }
    Ok((c_l, label))
}

/// Estimate `E[e^{-rT} S_T]` by simulating directly under the measure
/// indexed by `a` and compare against `s0`.
///
/// Requires `a` to classify as a true-martingale parameter and
/// `kappa + a sigma > 0`; otherwise the transformed variance drift is not a
/// well-posed square-root diffusion and [`emm_check_importance`] is the way
/// to estimate the same expectation.
pub fn emm_check_direct(
    config: &ModelConfig,
    a: f64,
    n_paths: usize,
    grid_steps: usize,
    master_seed: u64,
) -> Result<EmmReport, MeasureError> {
    let (_, label) = emm_precheck(config, a)?;
    let q = q_model(&config.model, a)?;
    let grid = TimeGrid::new(0.0, q.horizon, grid_steps)
        .map_err(|e| ValidationReport { violations: vec![e] })?;
    let hawkes = config.hawkes;
    let law = config.jump_law.clone();
    let discount = (-q.r * q.horizon).exp();

    let samples: Vec<Result<f64, MeasureError>> = exec::map_paths(n_paths, move |i| {
        let mut rng = exec::path_rng(master_seed, i as u64);
        let events = hawkes::simulate_hawkes(&hawkes, &law, q.horizon, &mut rng)?;
        let vpath = sde::simulate_variance(&q, &events, &grid, Scheme::Exact, &mut rng)?;
        let spath = sde::simulate_stock(&q, &vpath, DriftSpec::RiskNeutral, &mut rng);
        Ok(discount * spath.terminal_price())
    });
    let samples = samples.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let (estimate, std_error) = exec::mean_and_se(&samples);
    Ok(EmmReport {
        a,
        classification: label,
        mc: McReport::two_sided(estimate, std_error, config.model.s0, n_paths),
    })
}

/// Estimate the same expectation as [`emm_check_direct`] without leaving the
/// objective measure: simulate under the original coefficients and weight the
/// discounted terminal price by the density `X_T`.
pub fn emm_check_importance(
    config: &ModelConfig,
    a: f64,
    n_paths: usize,
    grid_steps: usize,
    master_seed: u64,
) -> Result<EmmReport, MeasureError> {
    let (_, label) = emm_precheck(config, a)?;
    let model = config.model.clone();
    let grid = TimeGrid::new(0.0, model.horizon, grid_steps)
        .map_err(|e| ValidationReport { violations: vec![e] })?;
    let hawkes = config.hawkes;
    let law = config.jump_law.clone();
    let discount = (-model.r * model.horizon).exp();

    let samples: Vec<Result<f64, MeasureError>> = exec::map_paths(n_paths, move |i| {
        let mut rng = exec::path_rng(master_seed, i as u64);
        let events = hawkes::simulate_hawkes(&hawkes, &law, model.horizon, &mut rng)?;
        let vpath = sde::simulate_variance(&model, &events, &grid, Scheme::Exact, &mut rng)?;
        let spath = sde::simulate_stock(&model, &vpath, DriftSpec::Objective, &mut rng);
        let factors = density_factors(&model, &vpath, &spath, a)?;
        Ok(factors.x * discount * spath.terminal_price())
    });
    let samples = samples.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let (estimate, std_error) = exec::mean_and_se(&samples);
    Ok(EmmReport {
        a,
        classification: label,
        mc: McReport::two_sided(estimate, std_error, config.model.s0, n_paths),
    })
}

/// Whether two independent estimates of one expectation agree within a joint
/// four-standard-error band.
pub fn estimates_agree(first: &McReport, second: &McReport) -> bool {
    let joint =
        (first.std_error * first.std_error + second.std_error * second.std_error).sqrt();
    (first.estimate - second.estimate).abs() <= 4.0 * joint
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HawkesParams, JumpLaw};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn default_config() -> ModelConfig {
        ModelConfig::default()
    }

    #[test]
    fn theta_vanishes_when_a_zero_and_mu_equals_r() {
        let mut model = default_config().model;
        model.mu = PiecewiseFlat::constant(model.r);
        assert_eq!(theta(&model, 0.0, 0.3, 0.04).unwrap(), 0.0);
    }

    #[test]
    fn theta_matches_direct_substitution_when_uncorrelated() {
        let mut model = default_config().model;
        model.rho = 0.0;
        model.r = 0.02;
        model.mu = PiecewiseFlat::constant(0.04);
        let th = theta(&model, 1.7, 0.5, 0.04).unwrap();
        assert_abs_diff_eq!(th, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn theta_rejects_nonpositive_variance() {
        let model = default_config().model;
        assert!(matches!(
            theta(&model, 0.0, 0.1, 0.0),
            Err(MeasureError::NonpositiveVariance { .. })
        ));
    }

    #[test]
    fn classify_matches_hand_worked_example() {
        // c_l = 0.18, rho = 0.3: the true-martingale bound is
        // min{sqrt(0.36)/2, sqrt(0.18 - 0.09)} = min{0.3, 0.3} = 0.3 and the
        // local bound is sqrt(0.36) = 0.6.
        assert_eq!(classify(0.29, 0.18, 0.3), Classification::Emm);
        assert_eq!(classify(0.35, 0.18, 0.3), Classification::Elmm);
        assert_eq!(classify(-0.35, 0.18, 0.3), Classification::Elmm);
        assert_eq!(classify(0.61, 0.18, 0.3), Classification::Inadmissible);
        assert_eq!(emm_bound(0.18, 0.3), Some(0.3));
    }

    #[test]
    fn classify_zero_is_strongest_when_correlation_allows() {
        assert_eq!(classify(0.0, 0.5, 0.3), Classification::Emm);
        // rho^2 >= c_l shuts the true-martingale door for every a.
        assert_eq!(classify(0.0, 0.08, 0.3), Classification::Elmm);
        assert_eq!(emm_bound(0.08, 0.3), None);
        assert_eq!(classify(1e-9, 0.08, 0.3), Classification::Elmm);
    }

    #[test]
    fn q_model_preserves_drift_product_and_feller() {
        let model = default_config().model;
        let q = q_model(&model, 0.3).unwrap();
        assert_relative_eq!(q.kappa * q.vbar, model.kappa * model.vbar, max_relative = 1e-15);
        assert!(q.feller_ok());
        assert_eq!(q.mu.value_at(0.5), model.r);
        assert_eq!(q.sigma, model.sigma);
        assert_eq!(q.eta, model.eta);
    }

    #[test]
    fn q_model_refuses_nonpositive_mean_reversion() {
        let model = default_config().model;
        let a = -(model.kappa / model.sigma) - 0.1;
        assert!(matches!(
            q_model(&model, a),
            Err(MeasureError::NonpositiveMeanReversion { .. })
        ));
    }

    fn simulate_bundle(
        config: &ModelConfig,
        drift: DriftSpec,
        steps: usize,
        seed: u64,
    ) -> (VariancePath, StockPath) {
        let mut rng = exec::path_rng(seed, 0);
        let grid = TimeGrid::new(0.0, config.model.horizon, steps).unwrap();
        let events =
            hawkes::simulate_hawkes(&config.hawkes, &config.jump_law, config.model.horizon, &mut rng)
                .unwrap();
        let vpath =
            sde::simulate_variance(&config.model, &events, &grid, Scheme::Exact, &mut rng).unwrap();
        let spath = sde::simulate_stock(&config.model, &vpath, drift, &mut rng);
        (vpath, spath)
    }

    #[test]
    fn density_factors_are_one_when_nothing_changes() {
        let mut config = default_config();
        config.model.mu = PiecewiseFlat::constant(config.model.r);
        for seed in 0..20 {
            let (vpath, spath) = simulate_bundle(&config, DriftSpec::Objective, 64, seed);
            let f = density_factors(&config.model, &vpath, &spath, 0.0).unwrap();
            assert_eq!(f.y, 1.0);
            assert_eq!(f.z, 1.0);
            assert_eq!(f.x, 1.0);
        }
    }

    #[test]
    fn density_factors_multiply_and_stay_positive() {
        let config = default_config();
        for seed in 0..20 {
            let (vpath, spath) = simulate_bundle(&config, DriftSpec::Objective, 64, seed);
            let f = density_factors(&config.model, &vpath, &spath, 1.3).unwrap();
            assert!(f.x > 0.0 && f.y > 0.0 && f.z > 0.0);
            assert_eq!(f.x, f.y * f.z);
        }
    }

    #[test]
    fn density_factors_reject_euler_paths() {
        let config = default_config();
        let mut rng = exec::path_rng(9, 0);
        let grid = TimeGrid::new(0.0, config.model.horizon, 64).unwrap();
        let events =
            hawkes::simulate_hawkes(&config.hawkes, &config.jump_law, config.model.horizon, &mut rng)
                .unwrap();
        let vpath =
            sde::simulate_variance(&config.model, &events, &grid, Scheme::EulerTruncated, &mut rng)
                .unwrap();
        let spath = sde::simulate_stock(&config.model, &vpath, DriftSpec::Objective, &mut rng);
        assert!(matches!(
            density_factors(&config.model, &vpath, &spath, 0.5),
            Err(MeasureError::SchemeMismatch)
        ));
    }

    #[test]
    fn drift_identity_recovers_r_at_every_node() {
        let config = default_config();
        let a = 0.7;
        let (vpath, _) = simulate_bundle(&config, DriftSpec::Objective, 64, 3);
        let model = &config.model;
        let ortho = (1.0 - model.rho * model.rho).sqrt();
        for (i, &t) in vpath.times.iter().enumerate() {
            let v = vpath.values[i];
            let th = theta(model, a, t, v).unwrap();
            let removed = v.sqrt() * (ortho * th + a * model.rho * v.sqrt());
            let residual = model.mu.value_at(t) - removed - model.r;
            assert!(residual.abs() < 1e-12, "residual {residual} at t = {t}");
        }
    }

    #[test]
    fn emm_check_requires_emm_classification() {
        let config = default_config();
        let err = emm_check_direct(&config, 50.0, 200, 16, 1).unwrap_err();
        assert!(matches!(err, MeasureError::ClassificationMismatch { .. }));
    }

    #[test]
    fn emm_check_direct_recovers_s0_when_p_equals_q() {
        let mut config = default_config();
        config.model.mu = PiecewiseFlat::constant(config.model.r);
        let report = emm_check_direct(&config, 0.0, 2_000, 64, 11).unwrap();
        assert_eq!(report.classification, Classification::Emm);
        assert!(report.mc.pass, "estimate {} se {}", report.mc.estimate, report.mc.std_error);
        assert!((report.mc.estimate - 100.0).abs() <= 4.0 * report.mc.std_error);
    }

    #[test]
    fn importance_check_matches_direct_target_shape() {
        let config = default_config();
        let report = emm_check_importance(&config, 0.2, 2_000, 64, 17).unwrap();
        assert_eq!(report.mc.target, config.model.s0);
        assert!(report.mc.std_error > 0.0);
    }

    proptest! {
        #[test]
        fn classification_is_monotone_in_magnitude(
            c_l in 0.05f64..5.0,
            rho in -0.9f64..0.9,
            a in -3.0f64..3.0,
            shrink in 0.0f64..1.0,
        ) {
            let inner = a * shrink;
            let outer = classify(a, c_l, rho);
            let stronger = classify(inner, c_l, rho);
            prop_assert!(stronger >= outer);
        }

        #[test]
        fn emm_parameters_satisfy_both_novikov_preconditions(
            c_l in 0.05f64..5.0,
            rho in -0.9f64..0.9,
            frac in 0.0f64..0.999,
        ) {
            if let Some(bound) = emm_bound(c_l, rho) {
                let a = frac * bound;
                prop_assert!(2.0 * a * a < c_l);
                prop_assert!(a * a + rho * rho < c_l);
            }
        }

        #[test]
        fn drift_identity_holds_for_random_coefficients(
            a in -2.0f64..2.0,
            rho in -0.95f64..0.95,
            v in 1e-6f64..2.0,
            mu in -0.5f64..0.5,
            r in -0.1f64..0.1,
        ) {
            let mut model = ModelConfig::default().model;
            model.rho = rho;
            model.r = r;
            model.mu = PiecewiseFlat::constant(mu);
            let th = theta(&model, a, 0.0, v).unwrap();
            let ortho = (1.0 - rho * rho).sqrt();
            let removed = v.sqrt() * (ortho * th + a * rho * v.sqrt());
            prop_assert!((mu - removed - r).abs() < 1e-10);
        }
    }

    #[test]
    fn measure_spec_reports_transformed_coefficients() {
        let model = default_config().model;
        let spec = measure_spec(&model, 0.5, 2.0);
        assert_eq!(spec.kappa_a, model.kappa + 0.5 * model.sigma);
        assert_relative_eq!(
            spec.kappa_a * spec.vbar_a,
            model.kappa * model.vbar,
            max_relative = 1e-15
        );
        assert_eq!(spec.classification, Classification::Emm);
    }

    #[test]
    fn hawkes_street_is_untouched_by_the_measure_change() {
        // The transformed dynamics only alter the variance drift; the event
        // law stays as configured, which the direct simulator relies on.
        let config = default_config();
        let q = q_model(&config.model, 0.4).unwrap();
        assert_eq!(q.s0, config.model.s0);
        assert_eq!(q.rho, config.model.rho);
        assert_eq!(q.horizon, config.model.horizon);
        let _ = HawkesParams { ..config.hawkes };
        match &config.jump_law {
            JumpLaw::Exponential { rate } => assert_eq!(*rate, 10.0),
            _ => panic!("default law changed"),
        }
    }
}
