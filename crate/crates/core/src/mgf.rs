//! Moment generating functions of the jump marks.
//!
//! For a mark `J` the mgf is `M(t) = E[e^{t J}]`, finite for `t` strictly
//! below a law-specific abscissa `epsilon`:
//!
//! ```text
//! Exponential(rate l):    M(t) = l/(l-t)          epsilon = l
//! Gamma(shape m, rate l): M(t) = (1 - t/l)^{-m}   epsilon = l
//! Constant(j):            M(t) = e^{t j}          epsilon = +inf
//! ```
//!
//! Each mgf is continuous, strictly increasing, and maps `(-inf, epsilon)`
//! onto `(0, inf)`, so the inverse is globally defined on positive reals.

use crate::model::JumpLaw;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MgfError {
    #[error("mgf argument {t} is at or beyond the finiteness edge {epsilon}")]
    DomainExceeded { t: f64, epsilon: f64 },
    #[error("mgf inverse needs a value in (0, inf), got {y}")]
    InverseOutOfRange { y: f64 },
}

/// Largest `t`-edge at which the mgf stays finite (exclusive).
pub fn epsilon(law: &JumpLaw) -> f64 {
    match *law {
        JumpLaw::Exponential { rate } => rate,
        JumpLaw::Gamma { rate, .. } => rate,
        JumpLaw::Constant { .. } => f64::INFINITY,
    }
}

/// `E[e^{t J}]`; defined for `t < epsilon(law)`.
pub fn mgf(law: &JumpLaw, t: f64) -> Result<f64, MgfError> {
    let eps = epsilon(law);
    if !(t < eps) {
        return Err(MgfError::DomainExceeded { t, epsilon: eps });
    }
    Ok(match *law {
        JumpLaw::Exponential { rate } => rate / (rate - t),
        JumpLaw::Gamma { shape, rate } => (1.0 - t / rate).powf(-shape),
        JumpLaw::Constant { value } => (t * value).exp(),
    })
}

/// Inverse of [`mgf`]: the unique `t < epsilon(law)` with `M(t) = y`, `y > 0`.
pub fn mgf_inverse(law: &JumpLaw, y: f64) -> Result<f64, MgfError> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(MgfError::InverseOutOfRange { y });
    }
    Ok(match *law {
        JumpLaw::Exponential { rate } => rate * (1.0 - 1.0 / y),
        JumpLaw::Gamma { shape, rate } => rate * (1.0 - y.powf(-1.0 / shape)),
        JumpLaw::Constant { value } => y.ln() / value,
    })
}

/// Mean mark size `E[J]`.
pub fn mean(law: &JumpLaw) -> f64 {
    match *law {
        JumpLaw::Exponential { rate } => 1.0 / rate,
        JumpLaw::Gamma { shape, rate } => shape / rate,
        JumpLaw::Constant { value } => value,
    }
}
