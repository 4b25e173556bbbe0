//! Skorokhod reflection and local time at the origin.
//!
//! The Skorokhod map adds the minimal nondecreasing regulator keeping a path
//! nonnegative:
//!
//! ```text
//! l(t) = max(0, max_{s <= t} (-psi(s))),    z = psi + l.
//! ```
//!
//! Applied to `psi(t) = x0 - lambda t + W(t)` it yields reflected Brownian
//! motion with drift `-lambda`, whose invariant law is exponential with
//! density `2 lambda exp(-2 lambda xi)`.
//!
//! Local time is estimated in the symmetric-limit convention
//! `L = lim (1/(4 eps)) int 1{|Theta| < eps} d<Theta>`, sampling the indicator
//! at the left endpoint of each step (Ito convention). The window `eps` is
//! always an explicit parameter: it is the bias-variance knob of the
//! estimator.

use std::sync::Arc;

use crate::error::{SimError, SimResult};
use crate::path_core::{
    normal_increment, sample_bridge_min, uniform_open, GridPath, RngStream,
};

/// Reflected path and its regulator: `z = psi + l`, `z >= 0`, `l` nondecreasing
/// and flat while `z` stays away from 0.
#[derive(Debug, Clone)]
pub struct SkorokhodDecomposition {
    pub z: GridPath,
    pub l: GridPath,
}

/// Grid Skorokhod map.
pub fn skorokhod_map(psi: &GridPath) -> SkorokhodDecomposition {
    let grid = Arc::clone(psi.grid_arc());
    let mut running = 0.0f64;
    let mut l_values = Vec::with_capacity(psi.len());
    let mut z_values = Vec::with_capacity(psi.len());
    for &p in psi.values() {
        running = running.max(-p);
        l_values.push(running);
        z_values.push(p + running);
    }
    SkorokhodDecomposition {
        z: GridPath::new(Arc::clone(&grid), z_values).expect("same grid"),
        l: GridPath::new(grid, l_values).expect("same grid"),
    }
}

/// Reflected Brownian motion with drift `-lambda` started at `x0 >= 0`:
/// the Skorokhod map of `psi(t) = x0 - lambda t + w(t)`.
pub fn reflected_drifted_bm(
    x0: f64,
    lambda: f64,
    w: &GridPath,
) -> SimResult<SkorokhodDecomposition> {
    if !(lambda > 0.0) {
        return Err(SimError::InvalidParameter("lambda must be positive".into()));
    }
    if x0 < 0.0 {
        return Err(SimError::InvalidParameter("x0 must be nonnegative".into()));
    }
    let times = w.grid().times();
    let psi_values: Vec<f64> = w
        .values()
        .iter()
        .zip(times)
        .map(|(&wv, &t)| x0 - lambda * t + wv)
        .collect();
    let psi = GridPath::new(Arc::clone(w.grid_arc()), psi_values)?;
    Ok(skorokhod_map(&psi))
}

/// Discrete local-time estimator
/// `L(t) = (1/(4 eps)) sum_{steps before t} 1{|theta| < eps} d<Theta>`,
/// indicator at the left endpoint.
pub fn local_time_estimate(
    theta: &GridPath,
    qv_increments: &[f64],
    epsilon: f64,
) -> SimResult<GridPath> {
    if !(epsilon > 0.0) {
        return Err(SimError::InvalidParameter("epsilon must be positive".into()));
    }
    if qv_increments.len() != theta.len() - 1 {
        return Err(SimError::GridMismatch);
    }
    let scale = 1.0 / (4.0 * epsilon);
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(theta.len());
    values.push(0.0);
    for (i, &qv) in qv_increments.iter().enumerate() {
        if theta.value(i).abs() < epsilon {
            acc += scale * qv;
        }
        values.push(acc);
    }
    GridPath::new(Arc::clone(theta.grid_arc()), values)
}

/// Summary of one reflected path sampled without discretization bias in law.
#[derive(Debug, Clone, Copy)]
pub struct ReflectedSummary {
    /// Value at the horizon.
    pub terminal: f64,
    /// Grid average of the reflected path over `[window_start, horizon]`.
    pub window_average: f64,
}

/// Streams reflected Brownian motion with drift `-lambda` and returns its
/// terminal value plus a late-window average.
///
/// The regulator is driven by exactly sampled per-step bridge minima of the
/// free path, so the reflected values at grid points carry no discretization
/// bias in law (the plain grid map understates the regulator by O(sqrt(dt)),
/// which a KS test at 1e4 paths resolves).
pub fn reflected_terminal_exact(
    x0: f64,
    lambda: f64,
    horizon: f64,
    dt: f64,
    window_start: f64,
    stream: RngStream,
) -> SimResult<ReflectedSummary> {
    if !(lambda > 0.0) || x0 < 0.0 {
        return Err(SimError::InvalidParameter(
            "lambda must be positive and x0 nonnegative".into(),
        ));
    }
    if !(dt > 0.0) || !(horizon > 0.0) || window_start >= horizon {
        return Err(SimError::InvalidParameter(
            "need 0 < dt, 0 <= window_start < horizon".into(),
        ));
    }
    let n = (horizon / dt).round().max(1.0) as usize;
    let mut rng = stream.rng();
    let mut psi = x0;
    let mut l = 0.0f64;
    let mut z = x0;
    let mut win_sum = 0.0;
    let mut win_count = 0u64;
    for i in 1..=n {
        let t = i as f64 * dt;
        let next = psi - lambda * dt + normal_increment(&mut rng, dt);
        let step_min = sample_bridge_min(psi, next, dt, uniform_open(&mut rng));
        l = l.max(-step_min);
        psi = next;
        z = psi + l;
        if t >= window_start {
            win_sum += z;
            win_count += 1;
        }
    }
    Ok(ReflectedSummary {
        terminal: z,
        window_average: win_sum / win_count as f64,
    })
}
