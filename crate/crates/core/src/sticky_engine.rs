//! Sticky-Brownian weak solution of the positive-drift equation, built
//! jointly with its driving Brownian motion.
//!
//! Under the auxiliary measure the process solves
//!
//! ```text
//! dX(t) = lambda 1{X(t) = 0} dt + 1{X(t) > 0} dB(t),    X >= 0,
//! ```
//!
//! realized by a local-time change of clock of reflected Brownian motion:
//! with `rho = M - w` (reflected) and `ell = M` (Skorokhod regulator, the
//! running maximum of `w`), the additive clock
//!
//! ```text
//! A(s) = s + ell(s) / lambda,        T = A^{-1},        X(t) = rho(T(t))
//! ```
//!
//! inserts Lebesgue time at the origin at exactly the rate that makes
//! `lambda * Leb{u <= t : X(u) = 0} = ell(T(t))` hold pathwise, which is the
//! semimartingale decomposition of the sticky equation. Equivalently the
//! clock is `s + ell_plus(s) / (2 lambda)` for the one-sided occupation
//! density `ell_plus = 2 ell`; the Warren conditional-law checks pin this
//! normalization empirically.
//!
//! The driving noise is assembled as `B = -w` on the moving time scale plus
//! an independent Brownian filler on the sticky stretches, so `B` has full
//! quadratic variation. Per-piece extremes of both `w` and the filler are
//! drawn exactly from the Brownian-bridge extreme law, so the regulator and
//! the running maximum of `-B` carry no O(sqrt(dt)) discretization deficit;
//! the remaining error is O(dt) event-placement skew.

use std::sync::Arc;

use crate::error::{SimError, SimResult};
use crate::path_core::{
    normal_increment, running_max, sample_bridge_max, sample_bridge_min, uniform_open, GridPath,
    RngStream, TimeGrid,
};

/// Reflected Brownian motion with its regulator under the Levy identity:
/// `rho = running_max(w) - w`, `ell = running_max(w)`.
#[derive(Debug, Clone)]
pub struct ReflectedPair {
    pub rho: GridPath,
    pub ell: GridPath,
}

/// Levy construction of reflected Brownian motion from a path with `w(0) = 0`.
pub fn reflect_levy(w: &GridPath) -> SimResult<ReflectedPair> {
    if w.value(0) != 0.0 {
        return Err(SimError::InvalidParameter(
            "Levy reflection requires w(0) = 0".into(),
        ));
    }
    let m = running_max(w);
    let rho_values: Vec<f64> = m
        .values()
        .iter()
        .zip(w.values())
        .map(|(&mv, &wv)| mv - wv)
        .collect();
    Ok(ReflectedPair {
        rho: GridPath::new(Arc::clone(w.grid_arc()), rho_values)?,
        ell: m,
    })
}

/// Additive clock `A(s) = s + ell(s) / (2 lambda)`.
///
/// `ell` here is the local time in the one-sided occupation-density
/// convention `lim (1/eps) Leb{u <= s : rho(u) < eps}`, which is twice the
/// Skorokhod regulator returned by [`reflect_levy`]. The clock is strictly
/// increasing and piecewise linear on the grid, so its inverse is exact for
/// grid-representable inputs.
pub fn time_change(ell: &GridPath, lambda: f64) -> SimResult<GridPath> {
    if !(lambda > 0.0) {
        return Err(SimError::InvalidParameter("lambda must be positive".into()));
    }
    let mut prev = f64::NEG_INFINITY;
    for &v in ell.values() {
        if v < prev {
            return Err(SimError::InvalidParameter(
                "ell must be nondecreasing".into(),
            ));
        }
        prev = v;
    }
    let scale = 1.0 / (2.0 * lambda);
    let values = ell
        .grid()
        .times()
        .iter()
        .zip(ell.values())
        .map(|(&s, &l)| s + scale * l)
        .collect();
    GridPath::new(Arc::clone(ell.grid_arc()), values)
}

/// Joint realization of the sticky solution, its driving Brownian motion,
/// and the occupation time at the origin, all on one output grid.
///
/// Beyond the defining triple `(x, b, occ0)` the struct carries construction
/// diagnostics: the running maximum of `-B` tracked at full internal
/// resolution (for conditional-law checks), the consumed internal clock
/// `T(t)`, the regulator `ell(T(t))`, and the sticky time still pending at
/// the horizon.
#[derive(Debug, Clone)]
pub struct StickyTriple {
    pub x: GridPath,
    pub b: GridPath,
    pub occ0: GridPath,
    /// `S(t) = max_{u <= t} (-B(u))`, sampled with exact per-piece minima of `B`.
    pub neg_b_running_max: GridPath,
    /// Internal (moving) clock `T(t)` consumed by each output time.
    pub internal_clock: GridPath,
    /// Regulator `ell(T(t))` of the reflected component.
    pub local_time: GridPath,
    /// Sticky time booked by the regulator but not yet elapsed at the horizon.
    pub pending_stick: f64,
}

/// Simulates the sticky weak solution started at `x0`.
///
/// For `x0 < 0` the path is the deterministic ramp `x0 + lambda t` until it
/// reaches the origin, then a sticky segment started at 0. For `x0 >= 0` the
/// reflection base is `x0`. `dt` is both the output spacing and the internal
/// moving-piece cap; the internal clock runs exactly as long as needed to
/// cover the horizon.
pub fn sticky_solution(
    x0: f64,
    lambda: f64,
    stream: RngStream,
    horizon: f64,
    dt: f64,
) -> SimResult<StickyTriple> {
    if !(lambda > 0.0) {
        return Err(SimError::InvalidParameter("lambda must be positive".into()));
    }
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(SimError::InvalidParameter(
            "horizon and dt must be positive".into(),
        ));
    }
    let grid = Arc::new(TimeGrid::uniform(horizon, dt)?);
    let times = grid.times();
    let n = grid.len();

    let x_base = x0.max(0.0);
    let prefix_end = if x0 < 0.0 { -x0 / lambda } else { 0.0 };

    let mut rng_move = stream.substream(0).rng();
    let mut rng_fill = stream.substream(1).rng();

    let mut t_cur = 0.0f64; // external time
    let mut s = 0.0f64; // internal (moving) clock
    let mut w = 0.0f64; // internal driving BM of the reflected component
    let mut w_max = 0.0f64; // exact running max of w (bridge-refined)
    let mut l = 0.0f64; // regulator max(0, w_max - x_base)
    let mut stuck_left = 0.0f64;
    let mut occ = 0.0f64;
    let mut b = 0.0f64;
    let mut b_min = 0.0f64; // exact running min of B (bridge-refined)

    let mut x_out = Vec::with_capacity(n);
    let mut b_out = Vec::with_capacity(n);
    let mut occ_out = Vec::with_capacity(n);
    let mut smax_out = Vec::with_capacity(n);
    let mut clock_out = Vec::with_capacity(n);
    let mut ell_out = Vec::with_capacity(n);

    x_out.push(x0);
    b_out.push(0.0);
    occ_out.push(0.0);
    smax_out.push(0.0);
    clock_out.push(0.0);
    ell_out.push(0.0);

    // Independent Brownian filler piece of length `tau` for B.
    let advance_filler = |b: &mut f64, b_min: &mut f64, tau: f64, rng: &mut _| {
        let zb = normal_increment(rng, tau);
        let piece_min = sample_bridge_min(*b, *b + zb, tau, uniform_open(rng));
        *b_min = b_min.min(piece_min);
        *b += zb;
    };

    for j in 1..n {
        let t_target = times[j];
        while t_cur < t_target {
            let remaining = t_target - t_cur;
            if remaining <= dt * 1e-12 {
                break;
            }
            if t_cur < prefix_end && prefix_end - t_cur > dt * 1e-12 {
                // Linear prefix: X deterministic, B runs free.
                let delta = remaining.min(prefix_end - t_cur);
                advance_filler(&mut b, &mut b_min, delta, &mut rng_fill);
                t_cur += delta;
            } else if stuck_left > 0.0 {
                // Sticky stretch: X sits at 0, B runs on the filler.
                let tau = stuck_left.min(remaining);
                advance_filler(&mut b, &mut b_min, tau, &mut rng_fill);
                occ += tau;
                stuck_left -= tau;
                t_cur += tau;
            } else {
                // Moving piece: X follows the reflected path, B mirrors -w.
                let delta = remaining.min(dt);
                let zw = normal_increment(&mut rng_move, delta);
                let w_new = w + zw;
                let piece_max =
                    sample_bridge_max(w, w_new, delta, uniform_open(&mut rng_move));
                b_min = b_min.min(b - (piece_max - w));
                b -= zw;
                w = w_new;
                if piece_max > w_max {
                    w_max = piece_max;
                    let l_new = (w_max - x_base).max(0.0);
                    if l_new > l {
                        stuck_left += (l_new - l) / lambda;
                        l = l_new;
                    }
                }
                s += delta;
                t_cur += delta;
            }
        }
        t_cur = t_target; // snap: rounding must not accumulate across steps

        let x_val = if t_cur < prefix_end && prefix_end - t_cur > dt * 1e-12 {
            x0 + lambda * t_cur
        } else if stuck_left > 0.0 {
            0.0
        } else {
            x_base - w + l
        };
        x_out.push(x_val);
        b_out.push(b);
        occ_out.push(occ);
        smax_out.push(-b_min);
        clock_out.push(s);
        ell_out.push(l);
    }

    Ok(StickyTriple {
        x: GridPath::new(Arc::clone(&grid), x_out)?,
        b: GridPath::new(Arc::clone(&grid), b_out)?,
        occ0: GridPath::new(Arc::clone(&grid), occ_out)?,
        neg_b_running_max: GridPath::new(Arc::clone(&grid), smax_out)?,
        internal_clock: GridPath::new(Arc::clone(&grid), clock_out)?,
        local_time: GridPath::new(Arc::clone(&grid), ell_out)?,
        pending_stick: stuck_left,
    })
}

/// Cumulative left-endpoint occupation time of the band `|x| <= tol_zero`.
pub fn occupation_time(x: &GridPath, tol_zero: f64) -> GridPath {
    let grid = x.grid();
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(x.len());
    values.push(0.0);
    for i in 0..grid.n_steps() {
        if x.value(i).abs() <= tol_zero {
            acc += grid.dt(i);
        }
        values.push(acc);
    }
    GridPath::new(Arc::clone(x.grid_arc()), values).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lawcheck::{ks_test, EmpiricalLaw};
    use crate::numeric::mean_and_stderr;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn path(values: Vec<f64>) -> GridPath {
        let times = (0..values.len()).map(|i| i as f64).collect();
        let grid = Arc::new(TimeGrid::new(times).unwrap());
        GridPath::new(grid, values).unwrap()
    }

    #[test]
    fn reflect_levy_examples() {
        let p = reflect_levy(&path(vec![0.0, 1.0, -1.0])).unwrap();
        assert_eq!(p.rho.values(), &[0.0, 0.0, 2.0]);
        assert_eq!(p.ell.values(), &[0.0, 1.0, 1.0]);

        let z = reflect_levy(&path(vec![0.0, 0.0, 0.0])).unwrap();
        assert!(z.rho.values().iter().all(|&v| v == 0.0));
        assert!(z.ell.values().iter().all(|&v| v == 0.0));

        assert!(reflect_levy(&path(vec![0.5, 1.0])).is_err());
    }

    #[test]
    fn regulator_terminal_is_half_normal() {
        // ell(1) is the running maximum of a standard Brownian motion, i.e.
        // |N(0,1)| in law; KS against 2 Phi(x) - 1 over 1e4 paths.
        let grid = Arc::new(TimeGrid::uniform(1.0, 1e-4).unwrap());
        let samples: Vec<f64> = (0..10_000)
            .map(|k| {
                let w = crate::path_core::sample_brownian(&grid, RngStream::new(303, k));
                reflect_levy(&w).unwrap().ell.terminal()
            })
            .collect();
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let verdict = ks_test(&EmpiricalLaw::new(samples, None).unwrap(), |x| {
            if x <= 0.0 {
                0.0
            } else {
                2.0 * std_normal.cdf(x) - 1.0
            }
        })
        .unwrap();
        assert!(
            verdict.p_value.unwrap() > 1e-4,
            "KS p-value {:?} too small",
            verdict.p_value
        );
    }

    #[test]
    fn time_change_examples() {
        let ell = path(vec![0.0, 1.0, 1.0]);
        let a = time_change(&ell, 0.5).unwrap();
        assert_eq!(a.values(), &[0.0, 2.0, 3.0]);

        let zero = path(vec![0.0, 0.0, 0.0]);
        let id = time_change(&zero, 0.5).unwrap();
        assert_eq!(id.values(), id.grid().times());

        // Clock increments dominate elapsed internal time.
        let vals = a.values();
        for i in 0..vals.len() - 1 {
            assert!(vals[i + 1] - vals[i] >= 1.0 - 1e-15);
        }

        assert!(time_change(&ell, 0.0).is_err());
        assert!(time_change(&ell, -1.0).is_err());
        assert!(time_change(&path(vec![0.0, 1.0, 0.5]), 0.5).is_err());
    }

    #[test]
    fn negative_start_ramps_to_zero() {
        let t = sticky_solution(-1.0, 2.0, RngStream::new(5, 0), 1.0, 0.125).unwrap();
        let times = t.x.grid().times();
        for (i, &ti) in times.iter().enumerate() {
            if ti < 0.5 {
                assert_eq!(t.x.value(i), -1.0 + 2.0 * ti, "prefix at t = {ti}");
                assert_eq!(t.occ0.value(i), 0.0);
            }
        }
        let at_half = t.x.grid().index_of(0.5).unwrap();
        assert_eq!(t.x.value(at_half), 0.0);
        // Once positive time has passed the origin, x stays nonnegative.
        for i in at_half..times.len() {
            assert!(t.x.value(i) >= 0.0);
        }
    }

    #[test]
    fn occupation_identity_ties_occ_to_regulator() {
        for k in 0..20 {
            let t = sticky_solution(0.0, 1.0, RngStream::new(11, k), 1.0, 1e-3).unwrap();
            // Terminal bookkeeping is exact: lambda (occ + pending) = ell.
            let lhs = t.occ0.terminal() + t.pending_stick;
            let rhs = t.local_time.terminal();
            assert!(
                (lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()),
                "path {k}: occ + pending {lhs} vs ell {rhs}"
            );
            // Pointwise, occ lags ell only by the pending piece jump.
            let bound = 10.0 * (1e-3f64).sqrt();
            for i in 0..t.x.len() {
                let diff = t.local_time.value(i) - t.occ0.value(i);
                assert!(
                    (-1e-12..=bound).contains(&diff),
                    "path {k} index {i}: ell - lambda occ = {diff}"
                );
            }
        }
    }

    #[test]
    fn solution_is_deterministic_per_stream() {
        let a = sticky_solution(0.0, 1.0, RngStream::new(7, 3), 1.0, 1e-2).unwrap();
        let b = sticky_solution(0.0, 1.0, RngStream::new(7, 3), 1.0, 1e-2).unwrap();
        assert_eq!(a.x.values(), b.x.values());
        assert_eq!(a.b.values(), b.b.values());
        assert_eq!(a.occ0.values(), b.occ0.values());
    }

    #[test]
    fn invalid_parameters_error() {
        let s = RngStream::new(1, 0);
        assert!(sticky_solution(0.0, 0.0, s, 1.0, 1e-2).is_err());
        assert!(sticky_solution(0.0, -1.0, s, 1.0, 1e-2).is_err());
        assert!(sticky_solution(0.0, 1.0, s, 0.0, 1e-2).is_err());
        assert!(sticky_solution(0.0, 1.0, s, 1.0, 0.0).is_err());
    }

    #[test]
    fn mean_occupation_matches_conditional_law_quadrature() {
        // Under the conditional law of the sticky solution given its driver,
        // P(X(t) = 0) = E exp(-2 lambda (B(t) + S(t))) with B + S reflected
        // Brownian, so for lambda = 1:
        //   E occ0(1) = int_0^1 2 exp(2t) Phi(-2 sqrt(t)) dt,
        // evaluated by Simpson after t = v^2 (integrand smooth in v).
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let f = |v: f64| 4.0 * v * (2.0 * v * v).exp() * std_normal.cdf(-2.0 * v);
        let m = 400;
        let h = 1.0 / m as f64;
        let mut quad = 0.0;
        for i in 0..m {
            let a = i as f64 * h;
            quad += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
        }

        let n_paths = 4_000;
        let occs: Vec<f64> = (0..n_paths)
            .map(|k| {
                sticky_solution(0.0, 1.0, RngStream::new(2024, k), 1.0, 1e-3)
                    .unwrap()
                    .occ0
                    .terminal()
            })
            .collect();
        let (mean, se) = mean_and_stderr(&occs);
        assert!(
            (mean - quad).abs() < 4.0 * se,
            "mean occupation {mean} vs quadrature {quad} (se {se})"
        );
        // Stickiness itself: the mean occupation is many stderrs above zero.
        assert!(mean / se > 5.0);
    }

    #[test]
    fn driver_has_full_quadratic_variation_and_normal_terminal() {
        let n_paths = 4_000u64;
        let mut terminals = Vec::with_capacity(n_paths as usize);
        for k in 0..n_paths {
            let t = sticky_solution(0.0, 1.0, RngStream::new(909, k), 1.0, 1e-3).unwrap();
            if k < 50 {
                let qv = crate::schemes::sample_quadratic_variation(&t.b);
                assert!((qv - 1.0).abs() < 0.2, "path {k}: B qv rate {qv}");
            }
            terminals.push(t.b.terminal());
        }
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let verdict = ks_test(&EmpiricalLaw::new(terminals, None).unwrap(), |x| {
            std_normal.cdf(x)
        })
        .unwrap();
        assert!(
            verdict.p_value.unwrap() > 1e-4,
            "B(1) KS p-value {:?}",
            verdict.p_value
        );
    }

    #[test]
    fn occupation_time_examples() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 0.25).unwrap());
        let zeros = GridPath::new(Arc::clone(&grid), vec![0.0; grid.len()]).unwrap();
        let occ = occupation_time(&zeros, 0.0);
        assert_eq!(occ.terminal(), 1.0);

        let pos = GridPath::new(Arc::clone(&grid), vec![0.5; grid.len()]).unwrap();
        assert!(occupation_time(&pos, 0.0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn occupation_time_matches_construction_on_sticky_paths() {
        // Time-change paths hit 0 exactly, so the tol = 0 left sum converges
        // to the construction's occ0; the residual is the zero-run boundary
        // accounting at the output resolution.
        for k in 0..10 {
            let diff_at = |dt: f64| {
                let t = sticky_solution(0.0, 1.0, RngStream::new(33, k), 1.0, dt).unwrap();
                (occupation_time(&t.x, 0.0).terminal() - t.occ0.terminal()).abs()
            };
            let coarse = diff_at(1e-3);
            let fine = diff_at(1e-4);
            assert!(coarse <= 0.06, "path {k}: coarse mismatch {coarse}");
            assert!(fine <= 0.02, "path {k}: fine mismatch {fine}");
            assert!(
                fine <= coarse + 1e-6,
                "path {k}: refinement did not shrink the mismatch ({coarse} -> {fine})"
            );
        }
    }
}
