//! Euler-Maruyama schemes for the indicator-coefficient equations and the
//! Brownian-perturbation construction.
//!
//! All indicators and the drift are evaluated at the left endpoint of each
//! step (Ito convention); with a degenerate diffusion coefficient the
//! evaluation point changes the limit law, so no alternatives are exposed.
//! The signum convention is `sgn(0) = -1`, which matters on the zero set.
//!
//! For positive drift the Euler scheme on the unperturbed equation is a
//! diagnostic only: its `dt -> 0` limit is delicate because the equation has
//! no strong solution there. The sticky construction is the authoritative
//! sampler of that weak law.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{SimError, SimResult};
use crate::path_core::{GridPath, RngStream, TimeGrid};

/// Sign function with `sgn(0) = -1`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// How the driving noise of an [`SdeSpec`] is wired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverMode {
    /// One Brownian motion, no perturbation term.
    Single,
    /// Perturbing driver with `<W, V>(t) = -(t / eta)`; requires `eta` outside `[-1, 1]`.
    Correlated,
    /// Independent perturbing driver; requires `eta != 0`.
    Independent,
}

/// Coefficients of `dX = drift(X) dt + 1{X > 0} dW + (eta/2) dV`, with
/// `drift(x) = kappa` for `x > 0` and `lambda` for `x <= 0`.
#[derive(Debug, Clone, Copy)]
pub struct SdeSpec {
    pub kappa: f64,
    pub lambda: f64,
    pub eta: Option<f64>,
    pub driver_mode: DriverMode,
}

impl SdeSpec {
    /// Validates the mode/eta invariants.
    pub fn new(
        kappa: f64,
        lambda: f64,
        eta: Option<f64>,
        driver_mode: DriverMode,
    ) -> SimResult<Self> {
        match (driver_mode, eta) {
            (DriverMode::Single, None) => {}
            (DriverMode::Single, Some(_)) => {
                return Err(SimError::InvalidParameter(
                    "single-driver mode takes no eta".into(),
                ))
            }
            (DriverMode::Correlated, Some(e)) if e.abs() > 1.0 => {}
            (DriverMode::Correlated, _) => {
                return Err(SimError::InvalidParameter(
                    "correlated mode requires eta outside [-1, 1]".into(),
                ))
            }
            (DriverMode::Independent, Some(e)) if e != 0.0 => {}
            (DriverMode::Independent, _) => {
                return Err(SimError::InvalidParameter(
                    "independent mode requires nonzero eta".into(),
                ))
            }
        }
        Ok(Self {
            kappa,
            lambda,
            eta,
            driver_mode,
        })
    }

    /// Constant drift `lambda` on both half-lines, single driver.
    pub fn tanaka(lambda: f64) -> Self {
        Self {
            kappa: lambda,
            lambda,
            eta: None,
            driver_mode: DriverMode::Single,
        }
    }

    /// Drift `kappa` on `{x > 0}` and `lambda` on `{x <= 0}`, single driver.
    pub fn two_sided(kappa: f64, lambda: f64) -> Self {
        Self {
            kappa,
            lambda,
            eta: None,
            driver_mode: DriverMode::Single,
        }
    }

    /// Perturbed equation with constant drift `lambda`.
    pub fn perturbed(lambda: f64, eta: f64, driver_mode: DriverMode) -> SimResult<Self> {
        Self::new(lambda, lambda, Some(eta), driver_mode)
    }

    #[inline]
    fn drift(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.kappa
        } else {
            self.lambda
        }
    }
}

/// A pair of Brownian drivers with a target cross-variation rate.
#[derive(Debug, Clone)]
pub struct DriverPair {
    pub w: GridPath,
    pub v: GridPath,
    pub cross_variation_rate: f64,
}

/// Driving noise accepted by [`euler_step_path`].
#[derive(Debug, Clone, Copy)]
pub enum Drivers<'a> {
    Single(&'a GridPath),
    Pair(&'a DriverPair),
}

/// Euler path `X[i+1] = X[i] + drift(X[i]) dt + 1{X[i] > 0} dW + (eta/2) dV`.
pub fn euler_step_path(spec: &SdeSpec, x0: f64, drivers: Drivers) -> SimResult<GridPath> {
    let (w, v): (&GridPath, Option<&GridPath>) = match (drivers, spec.eta) {
        (Drivers::Single(w), None) => (w, None),
        (Drivers::Pair(pair), Some(_)) => {
            if !pair.w.same_grid(&pair.v) {
                return Err(SimError::GridMismatch);
            }
            (&pair.w, Some(&pair.v))
        }
        _ => {
            return Err(SimError::InvalidParameter(
                "driver shape does not match the spec's eta".into(),
            ))
        }
    };
    let grid = w.grid();
    let half_eta = spec.eta.map_or(0.0, |e| 0.5 * e);
    let mut x = x0;
    let mut values = Vec::with_capacity(grid.len());
    values.push(x);
    for i in 0..grid.n_steps() {
        let dw = w.value(i + 1) - w.value(i);
        let dv = v.map_or(0.0, |v| v.value(i + 1) - v.value(i));
        let diffusion = if x > 0.0 { dw } else { 0.0 };
        x += spec.drift(x) * grid.dt(i) + diffusion + half_eta * dv;
        values.push(x);
    }
    GridPath::new(Arc::clone(w.grid_arc()), values)
}

/// Generates a driver pair with per-unit-time cross-variation `-1/eta`
/// (correlated mode) or `0` (independent mode).
///
/// Each step uses a 2x2 lower-triangular factor of the step covariance, so
/// the covariance is exact per step. The two Gaussian coordinates come from
/// two deterministic substreams of `stream`.
pub fn correlated_drivers(
    eta: f64,
    mode: DriverMode,
    grid: &Arc<TimeGrid>,
    stream: RngStream,
) -> SimResult<DriverPair> {
    let (rho, rate) = match mode {
        DriverMode::Correlated => {
            if eta.abs() <= 1.0 {
                return Err(SimError::InvalidParameter(
                    "correlated mode requires eta outside [-1, 1]".into(),
                ));
            }
            (-1.0 / eta, -1.0 / eta)
        }
        DriverMode::Independent => {
            if eta == 0.0 {
                return Err(SimError::InvalidParameter(
                    "independent mode requires nonzero eta".into(),
                ));
            }
            (0.0, 0.0)
        }
        DriverMode::Single => {
            return Err(SimError::InvalidParameter(
                "driver pairs need correlated or independent mode".into(),
            ))
        }
    };
    let ortho = (1.0 - rho * rho).sqrt();
    let mut rng_a = stream.substream(0).rng();
    let mut rng_b = stream.substream(1).rng();
    let mut w_values = Vec::with_capacity(grid.len());
    let mut v_values = Vec::with_capacity(grid.len());
    let (mut w, mut v) = (0.0, 0.0);
    w_values.push(0.0);
    v_values.push(0.0);
    for i in 0..grid.n_steps() {
        let sd = grid.dt(i).sqrt();
        let z1: f64 = StandardNormal.sample(&mut rng_a);
        let z2: f64 = StandardNormal.sample(&mut rng_b);
        w += sd * z1;
        v += sd * (rho * z1 + ortho * z2);
        w_values.push(w);
        v_values.push(v);
    }
    Ok(DriverPair {
        w: GridPath::new(Arc::clone(grid), w_values)?,
        v: GridPath::new(Arc::clone(grid), v_values)?,
        cross_variation_rate: rate,
    })
}

/// Orthogonal martingale pair `M = W/2`, `N = (W + eta V)/2`.
pub fn martingale_transform(
    w: &GridPath,
    v: &GridPath,
    eta: f64,
) -> SimResult<(GridPath, GridPath)> {
    if !w.same_grid(v) {
        return Err(SimError::GridMismatch);
    }
    let m_values = w.values().iter().map(|&x| 0.5 * x).collect();
    let n_values = w
        .values()
        .iter()
        .zip(v.values())
        .map(|(&wv, &vv)| 0.5 * (wv + eta * vv))
        .collect();
    Ok((
        GridPath::new(Arc::clone(w.grid_arc()), m_values)?,
        GridPath::new(Arc::clone(w.grid_arc()), n_values)?,
    ))
}

/// Weak solution of the perturbed Tanaka equation from independent drivers
/// `U`, `N`: `X = zeta + U + N` and `M = int sgn(X) dU` (left endpoints).
pub fn prokaj_weak_solution(
    zeta: f64,
    u: &GridPath,
    n: &GridPath,
) -> SimResult<(GridPath, GridPath)> {
    if !u.same_grid(n) {
        return Err(SimError::GridMismatch);
    }
    let x_values: Vec<f64> = u
        .values()
        .iter()
        .zip(n.values())
        .map(|(&uv, &nv)| zeta + uv + nv)
        .collect();
    let mut m = 0.0;
    let mut m_values = Vec::with_capacity(u.len());
    m_values.push(0.0);
    for i in 0..u.len() - 1 {
        m += sgn(x_values[i]) * (u.value(i + 1) - u.value(i));
        m_values.push(m);
    }
    Ok((
        GridPath::new(Arc::clone(u.grid_arc()), x_values)?,
        GridPath::new(Arc::clone(u.grid_arc()), m_values)?,
    ))
}

/// Maximum pointwise distance between two paths on a common grid.
pub fn pathwise_gap(x1: &GridPath, x2: &GridPath) -> SimResult<f64> {
    if !x1.same_grid(x2) {
        return Err(SimError::GridMismatch);
    }
    Ok(x1
        .values()
        .iter()
        .zip(x2.values())
        .map(|(&a, &b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Sample cross-variation rate `sum(da db) / T` of two paths.
pub fn sample_cross_variation(a: &GridPath, b: &GridPath) -> SimResult<f64> {
    if !a.same_grid(b) {
        return Err(SimError::GridMismatch);
    }
    let mut acc = 0.0;
    for i in 0..a.len() - 1 {
        acc += (a.value(i + 1) - a.value(i)) * (b.value(i + 1) - b.value(i));
    }
    Ok(acc / a.grid().horizon())
}

/// Sample quadratic-variation rate `sum(da^2) / T` of one path.
pub fn sample_quadratic_variation(a: &GridPath) -> f64 {
    sample_cross_variation(a, a).expect("same path")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_core::sample_brownian;

    fn grid(horizon: f64, dt: f64) -> Arc<TimeGrid> {
        Arc::new(TimeGrid::uniform(horizon, dt).unwrap())
    }

    fn zeros(grid: &Arc<TimeGrid>) -> GridPath {
        GridPath::new(Arc::clone(grid), vec![0.0; grid.len()]).unwrap()
    }

    #[test]
    fn constant_drift_is_exact_with_zero_drivers() {
        let g = grid(2.0, 0.25);
        let w = zeros(&g);
        let spec = SdeSpec::tanaka(2.0);
        let x = euler_step_path(&spec, 1.0, Drivers::Single(&w)).unwrap();
        for (i, &t) in g.times().iter().enumerate() {
            assert_eq!(x.value(i), 1.0 + 2.0 * t);
        }
    }

    #[test]
    fn diffusion_is_off_below_zero() {
        // Two-sided drift with x0 = -1, lambda = 2: X(t) = -1 + 2t while X <= 0.
        let g = grid(1.0, 0.25);
        let w = sample_brownian(&g, RngStream::new(4, 0));
        let spec = SdeSpec::two_sided(-3.0, 2.0);
        let x = euler_step_path(&spec, -1.0, Drivers::Single(&w)).unwrap();
        assert_eq!(x.value(0), -1.0);
        assert_eq!(x.value(1), -0.5);
        assert_eq!(x.value(2), 0.0);
        // At X = 0 the drift is still lambda (x <= 0) and diffusion stays off.
        assert_eq!(x.value(3), 0.5);
        // Once strictly positive, drift switches to kappa and diffusion turns on.
        assert_eq!(x.value(4), 0.5 - 3.0 * 0.25 + (w.value(4) - w.value(3)));
    }

    #[test]
    fn spec_invariants_are_enforced() {
        assert!(SdeSpec::perturbed(1.0, 0.5, DriverMode::Correlated).is_err());
        assert!(SdeSpec::perturbed(1.0, -1.0, DriverMode::Correlated).is_err());
        assert!(SdeSpec::perturbed(1.0, 2.0, DriverMode::Correlated).is_ok());
        assert!(SdeSpec::perturbed(1.0, 0.0, DriverMode::Independent).is_err());
        assert!(SdeSpec::perturbed(1.0, 0.3, DriverMode::Independent).is_ok());
    }

    #[test]
    fn correlated_drivers_hit_their_target() {
        // eta = -2: increment correlation -1/eta = +0.5 within +-0.01 at 1e6 steps.
        let g = grid(100.0, 1e-4);
        let pair = correlated_drivers(-2.0, DriverMode::Correlated, &g, RngStream::new(6, 0))
            .unwrap();
        assert_eq!(pair.cross_variation_rate, 0.5);
        let cross = sample_cross_variation(&pair.w, &pair.v).unwrap();
        assert!((cross - 0.5).abs() < 0.01, "cross rate {cross}");
        let qw = sample_quadratic_variation(&pair.w);
        let qv = sample_quadratic_variation(&pair.v);
        assert!((qw - 1.0).abs() < 0.01, "w qv rate {qw}");
        assert!((qv - 1.0).abs() < 0.01, "v qv rate {qv}");
    }

    #[test]
    fn independent_drivers_are_uncorrelated() {
        let g = grid(100.0, 1e-4);
        let pair = correlated_drivers(2.0, DriverMode::Independent, &g, RngStream::new(7, 0))
            .unwrap();
        let cross = sample_cross_variation(&pair.w, &pair.v).unwrap();
        assert!(cross.abs() < 0.01, "cross rate {cross}");
        assert!(correlated_drivers(0.0, DriverMode::Independent, &g, RngStream::new(7, 1)).is_err());
        assert!(correlated_drivers(0.5, DriverMode::Correlated, &g, RngStream::new(7, 2)).is_err());
    }

    #[test]
    fn transform_produces_orthogonal_martingales() {
        let g = grid(100.0, 1e-4);
        let eta = 2.0;
        let pair =
            correlated_drivers(eta, DriverMode::Correlated, &g, RngStream::new(8, 0)).unwrap();
        let (m, n) = martingale_transform(&pair.w, &pair.v, eta).unwrap();
        let qm = sample_quadratic_variation(&m);
        let qn = sample_quadratic_variation(&n);
        let cross = sample_cross_variation(&m, &n).unwrap();
        assert!((qm - 0.25).abs() < 0.01, "m qv rate {qm}");
        assert!((qn - 0.75).abs() < 0.01, "n qv rate {qn}");
        assert!(cross.abs() < 0.01, "m,n cross rate {cross}");
    }

    #[test]
    fn transform_is_linear_and_kills_zero_input() {
        let g = grid(1.0, 0.25);
        let w = sample_brownian(&g, RngStream::new(9, 0));
        let v = sample_brownian(&g, RngStream::new(9, 1));
        let (m, n) = martingale_transform(&w, &v, 2.0).unwrap();
        let w3 = GridPath::new(Arc::clone(&g), w.values().iter().map(|x| 3.0 * x).collect())
            .unwrap();
        let v3 = GridPath::new(Arc::clone(&g), v.values().iter().map(|x| 3.0 * x).collect())
            .unwrap();
        let (m3, n3) = martingale_transform(&w3, &v3, 2.0).unwrap();
        for i in 0..g.len() {
            assert!((m3.value(i) - 3.0 * m.value(i)).abs() < 1e-12);
            assert!((n3.value(i) - 3.0 * n.value(i)).abs() < 1e-12);
        }
        let z = zeros(&g);
        let (mz, nz) = martingale_transform(&z, &z, 2.0).unwrap();
        assert!(mz.values().iter().all(|&x| x == 0.0));
        assert!(nz.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn prokaj_trivial_cases() {
        let g = grid(1.0, 0.25);
        let z = zeros(&g);
        let (x, m) = prokaj_weak_solution(0.7, &z, &z).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.7));
        assert!(m.values().iter().all(|&v| v == 0.0));

        // A path that stays positive has sgn = +1 throughout, so M = U.
        let up = GridPath::new(Arc::clone(&g), g.times().to_vec()).unwrap();
        let (_, m) = prokaj_weak_solution(1.0, &up, &z).unwrap();
        for i in 0..g.len() {
            assert!((m.value(i) - up.value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn sgn_convention() {
        assert_eq!(sgn(1e-300), 1.0);
        assert_eq!(sgn(0.0), -1.0);
        assert_eq!(sgn(-2.0), -1.0);
    }

    #[test]
    fn pathwise_gap_basics() {
        let g = grid(1.0, 0.25);
        let a = zeros(&g);
        let ones = GridPath::new(Arc::clone(&g), vec![1.0; g.len()]).unwrap();
        assert_eq!(pathwise_gap(&a, &a).unwrap(), 0.0);
        assert_eq!(pathwise_gap(&a, &ones).unwrap(), 1.0);
        let other = zeros(&grid(1.0, 0.5));
        assert!(pathwise_gap(&a, &other).is_err());
    }
}
