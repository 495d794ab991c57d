//! Heston stochastic volatility with compound-Hawkes jumps in the variance.
//!
//! The model under the objective measure:
//!
//! ```text
//! dS_t/S_t = mu_t dt + sqrt(v_t) (sqrt(1-rho^2) dB_t + rho dW_t)
//! dv_t     = -kappa (v_t - vbar) dt + sigma sqrt(v_t) dW_t + eta dL_t
//! L_t      = sum_{i: t_i <= t} J_i,   J_i > 0 iid marks
//! lambda_t = lambda0 + alpha * int_0^t e^{-beta (t-s)} dN_s
//! ```
//!
//! where `N` is the Hawkes counting process with intensity `lambda` and `L` its
//! compound (marked) version. The crate simulates the model, solves the affine
//! ODE system behind the exponential-moment bound
//! `E[exp(c int_0^T v dt)] <= exp(F(0) + G(0) v_0 + H(0) lambda_0)`,
//! computes the admissibility constants `c_s` (closed form) and `c_l` (numeric)
//! that delimit equivalent (local) martingale measures, and verifies the whole
//! stack by Monte Carlo.
//!
//! Modules follow the pipeline: [`model`] (parameters and validation),
//! [`mgf`] (jump-size moment generating functions), [`hawkes`] (marked point
//! process), [`sde`] (variance and stock paths), [`odes`] (affine system and
//! admissibility constants), [`measures`] (Girsanov factors and measure
//! classification), [`mc`] (experiment harness and reports), [`exec`]
//! (deterministic parallel fan-out).

pub mod exec;
pub mod hawkes;
pub mod mc;
pub mod measures;
pub mod mgf;
pub mod model;
pub mod odes;
pub mod sde;
