//! Marked Hawkes process simulation by Ogata thinning.
//!
//! Intensity with exponential kernel:
//!
//! ```text
//! lambda_t = lambda0 + alpha * sum_{t_i <= t} e^{-beta (t - t_i)}
//! ```
//!
//! Between events the intensity decays monotonically toward `lambda0`, so the
//! value right after the latest event dominates the whole inter-event
//! interval and serves as the thinning bound; it is re-drawn after every
//! accepted event and tightened to the decayed value after every rejection.
//! Event values are tracked with the decay-and-jump recurrence
//!
//! ```text
//! lambda(t_{i+1}) = lambda0 + (lambda(t_i) - lambda0) e^{-beta (t_{i+1} - t_i)} + alpha
//! ```
//!
//! (post-event values) instead of re-summing the kernel. Compensators come in
//! closed form: the integral of the intensity over an event-free interval is
//! `lambda0 d + (lambda_after - lambda0)(1 - e^{-beta d})/beta`.

use crate::model::{HawkesParams, JumpLaw, TimeGrid};
use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Gamma};
use thiserror::Error;

/// Hard cap on thinning candidates per path, to turn a runaway intensity
/// (which validated parameters cannot produce) into an error instead of a hang.
const CANDIDATE_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HawkesError {
    #[error("unstable Hawkes parameters: alpha = {alpha} must be < beta = {beta}")]
    Unstable { alpha: f64, beta: f64 },
    #[error("time {t} outside the path's span [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("horizon must be a positive finite number, got {horizon}")]
    BadHorizon { horizon: f64 },
    #[error("thinning produced more than {budget} candidates; intensity looks explosive")]
    CandidateBudgetExhausted { budget: u64 },
    #[error("events must be strictly increasing inside (0, horizon], marks positive")]
    MalformedEvents,
}

/// One realization of the marked process on `[0, horizon]`.
///
/// `lambda_after[i]` is the right-continuous intensity at `times[i]`, i.e.
/// including the jump contributed by event `i` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointPath {
    pub params: HawkesParams,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub marks: Vec<f64>,
    pub lambda_after: Vec<f64>,
}

/// Compensators of the counting process and of the compound (mark) sum,
/// evaluated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensators {
    /// `int_0^t lambda_s ds` at each grid node.
    pub counting: Vec<f64>,
    /// Mean mark times the counting compensator.
    pub compound: Vec<f64>,
}

/// Draw one jump mark.
pub fn sample_mark<R: Rng + ?Sized>(law: &JumpLaw, rng: &mut R) -> f64 {
    match *law {
        JumpLaw::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
        JumpLaw::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
            .expect("validated shape/rate")
            .sample(rng),
        JumpLaw::Constant { value } => value,
    }
}

/// Simulate one path by thinning. Events falling exactly on the horizon are
/// kept (the path is right-continuous at `T`).
pub fn simulate_hawkes<R: Rng + ?Sized>(
    params: &HawkesParams,
    law: &JumpLaw,
    horizon: f64,
    rng: &mut R,
) -> Result<MarkedPointPath, HawkesError> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(HawkesError::BadHorizon { horizon });
    }
    if params.alpha >= params.beta {
        return Err(HawkesError::Unstable { alpha: params.alpha, beta: params.beta });
    }

    let lambda0 = params.lambda0;
    let mut times = Vec::new();
    let mut marks = Vec::new();
    let mut lambda_after = Vec::new();

    let mut t = 0.0;
    // Current intensity value; dominates the interval up to the next event.
    let mut bound = lambda0;
    let mut candidates: u64 = 0;

    loop {
        candidates += 1;
        if candidates > CANDIDATE_BUDGET {
            return Err(HawkesError::CandidateBudgetExhausted { budget: CANDIDATE_BUDGET });
        }
        let e: f64 = Exp1.sample(rng);
        let cand = t + e / bound;
        if cand > horizon {
            break;
        }
        let decayed = lambda0 + (bound - lambda0) * (-params.beta * (cand - t)).exp();
        t = cand;
        if rng.random::<f64>() * bound <= decayed {
            let mark = sample_mark(law, rng);
            let post = decayed + params.alpha;
            times.push(cand);
            marks.push(mark);
            lambda_after.push(post);
            bound = post;
        } else {
            bound = decayed;
        }
    }

    Ok(MarkedPointPath { params: *params, horizon, times, marks, lambda_after })
}

impl MarkedPointPath {
    /// Build a path from given events, computing the post-event intensities
    /// with the decay-and-jump recurrence.
    pub fn from_events(
        params: HawkesParams,
        horizon: f64,
        times: Vec<f64>,
        marks: Vec<f64>,
    ) -> Result<Self, HawkesError> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(HawkesError::BadHorizon { horizon });
        }
        let increasing = times.windows(2).all(|w| w[1] > w[0]);
        let in_span = times.iter().all(|&t| t > 0.0 && t <= horizon);
        let marks_ok = marks.len() == times.len() && marks.iter().all(|&j| j > 0.0);
        if !increasing || !in_span || !marks_ok {
            return Err(HawkesError::MalformedEvents);
        }

        let mut lambda_after = Vec::with_capacity(times.len());
        let mut prev_t = 0.0;
        let mut prev_post = params.lambda0;
        for &ti in &times {
            let decayed =
                params.lambda0 + (prev_post - params.lambda0) * (-params.beta * (ti - prev_t)).exp();
            let post = decayed + params.alpha;
            lambda_after.push(post);
            prev_t = ti;
            prev_post = post;
        }
        Ok(Self { params, horizon, times, marks, lambda_after })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of events with `t_i <= t`.
    pub fn count_up_to(&self, t: f64) -> usize {
        self.times.partition_point(|&ti| ti <= t)
    }

    /// Sum of marks of events with `t_i <= t` (the compound process `L_t`).
    pub fn compound_up_to(&self, t: f64) -> f64 {
        let k = self.count_up_to(t);
        // fold from +0.0: an empty `Sum::<f64>` yields -0.0, which would leak
        // into serialized output.
        self.marks[..k].iter().fold(0.0, |acc, &m| acc + m)
    }

    /// Right-continuous intensity at `t in [0, horizon]`.
    pub fn intensity_at(&self, t: f64) -> Result<f64, HawkesError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(HawkesError::OutOfRange { t, horizon: self.horizon });
        }
        let k = self.count_up_to(t);
        if k == 0 {
            return Ok(self.params.lambda0);
        }
        let lambda0 = self.params.lambda0;
        let decay = (-self.params.beta * (t - self.times[k - 1])).exp();
        Ok(lambda0 + (self.lambda_after[k - 1] - lambda0) * decay)
    }

    /// Compensators of `N` and `L` at each node of `grid`, which must lie
    /// inside the path's span.
    pub fn compensators(
        &self,
        law: &JumpLaw,
        grid: &TimeGrid,
    ) -> Result<Compensators, HawkesError> {
        if grid.start < 0.0 || grid.end > self.horizon {
            return Err(HawkesError::OutOfRange { t: grid.end, horizon: self.horizon });
        }
        let lambda0 = self.params.lambda0;
        let beta = self.params.beta;

        // Integral of the intensity from 0 up to each event time.
        let mut upto_event = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        let mut prev_t = 0.0;
        let mut prev_post = lambda0;
        for (&ti, &post) in self.times.iter().zip(&self.lambda_after) {
            let d = ti - prev_t;
            acc += lambda0 * d + (prev_post - lambda0) * (1.0 - (-beta * d).exp()) / beta;
            upto_event.push(acc);
            prev_t = ti;
            prev_post = post;
        }

        let mean_mark = crate::mgf::mean(law);
        let mut counting = Vec::with_capacity(grid.len());
        let mut compound = Vec::with_capacity(grid.len());
        for t in grid.nodes() {
            let k = self.count_up_to(t);
            let (base, t_k, post) = if k == 0 {
                (0.0, 0.0, lambda0)
            } else {
                (upto_event[k - 1], self.times[k - 1], self.lambda_after[k - 1])
            };
            let d = t - t_k;
            let lam_int = base + lambda0 * d + (post - lambda0) * (1.0 - (-beta * d).exp()) / beta;
            counting.push(lam_int);
            compound.push(mean_mark * lam_int);
        }
        Ok(Compensators { counting, compound })
    }
}
