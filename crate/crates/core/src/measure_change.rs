//! Cameron-Martin-Girsanov reweighting.
//!
//! The sticky construction lives under an auxiliary measure Q in which the
//! driving noise `B` is a standard Brownian motion. The equation itself holds
//! under the measure P in which `W(t) = B(t) - lambda t` is Brownian; on the
//! horizon sigma-field the density is the terminal-value exponential
//!
//! ```text
//! dP/dQ |_{F_T} = exp(lambda B(T) - lambda^2 T / 2),
//! ```
//!
//! exact for constant drift, so per-path weights need only `B(T)`.

use crate::error::{SimError, SimResult};
use crate::numeric::NeumaierSum;

/// A path functional together with its likelihood ratio `dP/dQ` on `F_T`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSample {
    pub value: f64,
    pub weight: f64,
}

/// Self-normalized weighted mean with its delta-method standard error and
/// effective sample size `(sum w)^2 / sum w^2`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedMean {
    pub estimate: f64,
    pub stderr: f64,
    pub ess: f64,
}

/// Likelihood ratio `exp(lambda b_terminal - lambda^2 horizon / 2)`.
///
/// `horizon` must be nonnegative (debug-asserted; there is no error path).
pub fn girsanov_weight(b_terminal: f64, lambda: f64, horizon: f64) -> f64 {
    debug_assert!(horizon >= 0.0, "horizon must be nonnegative");
    (lambda * b_terminal - 0.5 * lambda * lambda * horizon).exp()
}

/// Ratio estimator `sum(w v) / sum(w)` with delta-method standard error.
///
/// Reductions are compensated, so permuting the input moves the result by
/// less than 1e-12 relative.
pub fn weighted_mean(samples: &[WeightedSample]) -> SimResult<WeightedMean> {
    if samples.is_empty() {
        return Err(SimError::EmptySamples);
    }
    let mut sw = NeumaierSum::new();
    let mut swv = NeumaierSum::new();
    let mut sw2 = NeumaierSum::new();
    for s in samples {
        if !(s.weight > 0.0) || !s.weight.is_finite() || !s.value.is_finite() {
            return Err(SimError::InvalidParameter(
                "weights must be positive and finite, values finite".into(),
            ));
        }
        sw.add(s.weight);
        swv.add(s.weight * s.value);
        sw2.add(s.weight * s.weight);
    }
    let sum_w = sw.total();
    let estimate = swv.total() / sum_w;
    // Delta method for the ratio estimator: Var ~ sum(w_i^2 (v_i - est)^2) / (sum w)^2.
    let mut res = NeumaierSum::new();
    for s in samples {
        let d = s.weight * (s.value - estimate);
        res.add(d * d);
    }
    let stderr = res.total().sqrt() / sum_w;
    let ess = sum_w * sum_w / sw2.total();
    Ok(WeightedMean {
        estimate,
        stderr,
        ess,
    })
}
