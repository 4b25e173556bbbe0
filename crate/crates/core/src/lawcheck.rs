//! Statistical verification machinery.
//!
//! Pass thresholds default to 4 combined standard errors rather than 3:
//! discretization bias rides on top of Monte Carlo noise, and each scenario
//! documents its extra allowance. Verdict statistics are permutation
//! invariant (compensated reductions throughout).

use crate::error::{SimError, SimResult};
use crate::measure_change::{weighted_mean, WeightedSample};
use crate::numeric::{mean_and_stderr, z_statistic, NeumaierSum, Z_CAP};
use crate::path_core::GridPath;
use crate::sticky_engine::StickyTriple;

/// Samples with optional positive weights.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw {
    samples: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl EmpiricalLaw {
    pub fn new(samples: Vec<f64>, weights: Option<Vec<f64>>) -> SimResult<Self> {
        if samples.is_empty() {
            return Err(SimError::EmptySamples);
        }
        if let Some(w) = &weights {
            if w.len() != samples.len() {
                return Err(SimError::InvalidParameter(
                    "weights must match samples in length".into(),
                ));
            }
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(SimError::InvalidParameter(
                    "weights must be positive and finite".into(),
                ));
            }
        }
        Ok(Self { samples, weights })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Outcome of one statistical check. `threshold` is the pass boundary for
/// `statistic`; most checks pass below it, the one-sided positivity check
/// passes above it (documented at each constructor).
#[derive(Debug, Clone, Copy)]
pub struct TestVerdict {
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
}

/// Survival function `1 - K(x)` of the asymptotic Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-theta form, accurate for small arguments.
        let t = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x
            * ((-t).exp() + (-9.0 * t).exp() + (-25.0 * t).exp() + (-49.0 * t).exp());
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        let mut sign = 1.0;
        for k in 1..100 {
            let term = (-2.0 * (k * k) as f64 * x * x).exp();
            sf += sign * term;
            if term < 1e-16 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// Critical value of the one-sample KS statistic at significance `alpha`,
/// from the one-term inversion of the asymptotic distribution.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// One-sample KS test at the default 1e-4 significance.
///
/// The statistic is `sup |F_hat - cdf|` over the sample points, with the
/// weighted empirical CDF when weights are present. The p-value comes from
/// the asymptotic Kolmogorov distribution and is reported for the unweighted
/// case only; weighted runs report the statistic and an advisory threshold.
pub fn ks_test(law: &EmpiricalLaw, cdf: impl Fn(f64) -> f64) -> SimResult<TestVerdict> {
    ks_test_at(law, cdf, 1e-4)
}

/// One-sample KS test at significance `alpha`.
pub fn ks_test_at(
    law: &EmpiricalLaw,
    cdf: impl Fn(f64) -> f64,
    alpha: f64,
) -> SimResult<TestVerdict> {
    let n = law.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| law.samples[a].total_cmp(&law.samples[b]));

    let total_weight = match &law.weights {
        Some(w) => {
            let mut acc = NeumaierSum::new();
            for &x in w {
                acc.add(x);
            }
            acc.total()
        }
        None => n as f64,
    };

    let mut statistic = 0.0f64;
    let mut cum = NeumaierSum::new();
    let mut i = 0;
    while i < n {
        let x = law.samples[order[i]];
        // Advance through ties so F_hat is evaluated right-continuously.
        let mut j = i;
        while j < n && law.samples[order[j]] == x {
            cum.add(law.weights.as_ref().map_or(1.0, |w| w[order[j]]));
            j += 1;
        }
        let f_hat = cum.total() / total_weight;
        let diff = (f_hat - cdf(x)).abs();
        if diff > statistic {
            statistic = diff;
        }
        i = j;
    }

    let threshold = ks_critical(alpha, n);
    let p_value = if law.weights.is_none() {
        Some(kolmogorov_sf((n as f64).sqrt() * statistic))
    } else {
        None
    };
    Ok(TestVerdict {
        statistic,
        threshold,
        p_value,
        pass: statistic <= threshold,
    })
}

/// One evaluation point of the Warren conditional-law identity.
#[derive(Debug, Clone, Copy)]
pub struct WarrenPoint {
    /// `X(t)` of the sticky solution.
    pub x_t: f64,
    /// Driving Brownian motion `B(t)`.
    pub b_t: f64,
    /// `S(t) = max_{u <= t} (-B(u))`.
    pub s_t: f64,
}

/// Warren conditional-law check on extracted points: compares the frequency
/// of `{X(t) <= x}` with the conditional probability
/// `min(1, exp(-2 lambda (B(t) + S(t) - x)))` (the min saturates the formula
/// at the boundary `x >= B(t) + S(t)`), both as a paired mean test and as
/// regression tests against the moments `g(B(t)) = 1, B(t), B(t)^2`.
///
/// The statistic is the largest z-score across the moment functionals;
/// passes below 4.
pub fn warren_from_points(
    points: &[WarrenPoint],
    lambda: f64,
    x: f64,
) -> SimResult<TestVerdict> {
    if points.is_empty() {
        return Err(SimError::EmptySamples);
    }
    if x < 0.0 {
        return Err(SimError::InvalidParameter("x must be nonnegative".into()));
    }
    let diffs: Vec<f64> = points
        .iter()
        .map(|p| {
            let indicator = if p.x_t <= x { 1.0 } else { 0.0 };
            let conditional = (-2.0 * lambda * (p.b_t + p.s_t - x)).exp().min(1.0);
            indicator - conditional
        })
        .collect();
    let mut statistic = 0.0f64;
    for moment in 0..3u32 {
        let weighted: Vec<f64> = diffs
            .iter()
            .zip(points)
            .map(|(&d, p)| d * p.b_t.powi(moment as i32))
            .collect();
        let (mean, se) = mean_and_stderr(&weighted);
        statistic = statistic.max(z_statistic(mean, se));
    }
    Ok(TestVerdict {
        statistic,
        threshold: 4.0,
        p_value: None,
        pass: statistic < 4.0,
    })
}

/// Warren check on full sticky triples at grid time `t`.
pub fn warren_check(
    triples: &[StickyTriple],
    lambda: f64,
    t: f64,
    x: f64,
) -> SimResult<TestVerdict> {
    if triples.is_empty() {
        return Err(SimError::EmptySamples);
    }
    let idx = triples[0].x.grid().index_of(t)?;
    let points: Vec<WarrenPoint> = triples
        .iter()
        .map(|tr| WarrenPoint {
            x_t: tr.x.value(idx),
            b_t: tr.b.value(idx),
            s_t: tr.neg_b_running_max.value(idx),
        })
        .collect();
    warren_from_points(&points, lambda, x)
}

/// A C^2 test function vanishing (with derivatives) outside its support.
pub struct TestFunction {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    d2f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    support: (f64, f64),
}

impl TestFunction {
    pub fn from_parts(
        f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        df: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        d2f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        support: (f64, f64),
    ) -> Self {
        Self { f, df, d2f, support }
    }

    /// Polynomial bump `(1 - y^2)^4` with `y = (x - center)/radius`, supported
    /// on `[center - radius, center + radius]`; C^3 across the boundary.
    pub fn bump(center: f64, radius: f64) -> Self {
        let y = move |x: f64| (x - center) / radius;
        let f = Box::new(move |x: f64| {
            let y = y(x);
            if y.abs() >= 1.0 {
                0.0
            } else {
                let q = 1.0 - y * y;
                q * q * q * q
            }
        });
        let df = Box::new(move |x: f64| {
            let y = (x - center) / radius;
            if y.abs() >= 1.0 {
                0.0
            } else {
                let q = 1.0 - y * y;
                -8.0 * y * q * q * q / radius
            }
        });
        let d2f = Box::new(move |x: f64| {
            let y = (x - center) / radius;
            if y.abs() >= 1.0 {
                0.0
            } else {
                let q = 1.0 - y * y;
                8.0 * q * q * (7.0 * y * y - 1.0) / (radius * radius)
            }
        });
        Self::from_parts(f, df, d2f, (center - radius, center + radius))
    }

    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn df(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    pub fn d2f(&self, x: f64) -> f64 {
        (self.d2f)(x)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    fn vanishes_at_support(&self) -> bool {
        let (lo, hi) = self.support;
        [lo, hi].iter().all(|&e| {
            self.f(e).abs() < 1e-12 && self.df(e).abs() < 1e-12 && self.d2f(e).abs() < 1e-12
        })
    }
}

/// Per-path Dynkin functional
/// `f(X(T)) - f(X(0)) - sum (drift(X) f'(X) + diff2(X) f''(X) / 2) dt`
/// with coefficients sampled at left endpoints up to `horizon_index`.
pub fn dynkin_path_functional(
    x: &GridPath,
    drift: &impl Fn(f64) -> f64,
    diff2: &impl Fn(f64) -> f64,
    f: &TestFunction,
    horizon_index: usize,
) -> f64 {
    let mut gen_sum = NeumaierSum::new();
    for j in 0..horizon_index {
        let xj = x.value(j);
        gen_sum.add((drift(xj) * f.df(xj) + 0.5 * diff2(xj) * f.d2f(xj)) * x.grid().dt(j));
    }
    f.f(x.value(horizon_index)) - f.f(x.value(0)) - gen_sum.total()
}

/// Weak-form generator identity test: the mean Dynkin functional over paths
/// should vanish. Passes when `|mean| <= 4 stderr + allowance`, where
/// `allowance` covers the O(dt) left-endpoint discretization of the
/// generator integral.
pub fn dynkin_residual(
    paths: &[GridPath],
    drift: impl Fn(f64) -> f64,
    diff2: impl Fn(f64) -> f64,
    f: &TestFunction,
    horizon: f64,
    allowance: f64,
) -> SimResult<TestVerdict> {
    if paths.is_empty() {
        return Err(SimError::EmptySamples);
    }
    if !f.vanishes_at_support() {
        return Err(SimError::InvalidParameter(
            "test function must vanish (with derivatives) at its support bound".into(),
        ));
    }
    let idx = paths[0].grid().index_of(horizon)?;
    let residuals: Vec<f64> = paths
        .iter()
        .map(|p| dynkin_path_functional(p, &drift, &diff2, f, idx))
        .collect();
    dynkin_verdict_from(&residuals, allowance)
}

/// Verdict from precomputed per-path Dynkin functionals.
pub fn dynkin_verdict_from(residuals: &[f64], allowance: f64) -> SimResult<TestVerdict> {
    if residuals.is_empty() {
        return Err(SimError::EmptySamples);
    }
    let (mean, se) = mean_and_stderr(residuals);
    let statistic = z_statistic(mean, se);
    let threshold = if se > 0.0 {
        4.0 + allowance / se
    } else {
        f64::INFINITY
    };
    Ok(TestVerdict {
        statistic,
        threshold,
        p_value: None,
        pass: statistic <= threshold,
    })
}

/// One-sided z-test that the (weighted) mean occupation is strictly positive;
/// passes when the statistic exceeds 5.
pub fn occupation_positivity(occ_samples: &EmpiricalLaw) -> SimResult<TestVerdict> {
    let (mean, se) = match occ_samples.weights() {
        None => mean_and_stderr(occ_samples.samples()),
        Some(w) => {
            let samples: Vec<WeightedSample> = occ_samples
                .samples()
                .iter()
                .zip(w)
                .map(|(&value, &weight)| WeightedSample { value, weight })
                .collect();
            let m = weighted_mean(&samples)?;
            (m.estimate, m.stderr)
        }
    };
    let statistic = if se > 0.0 {
        (mean / se).clamp(-Z_CAP, Z_CAP)
    } else if mean > 0.0 {
        Z_CAP
    } else {
        0.0
    };
    Ok(TestVerdict {
        statistic,
        threshold: 5.0,
        p_value: None,
        pass: statistic > 5.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_core::{RngStream, TimeGrid};
    use rand::Rng;
    use std::sync::Arc;

    #[test]
    fn kolmogorov_sf_known_values() {
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 2e-3);
        assert!((kolmogorov_sf(1.2238) - 0.10).abs() < 2e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 1e-3);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_critical_matches_tabulated_constant() {
        // alpha = 0.05 at n = 1: c = 1.3581.
        assert!((ks_critical(0.05, 1) - 1.3581).abs() < 1e-3);
    }

    #[test]
    fn ks_singleton_at_median() {
        let law = EmpiricalLaw::new(vec![0.0], None).unwrap();
        let v = ks_test_at(&law, |_| 0.5, 0.05).unwrap();
        assert!((v.statistic - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_against_own_empirical_cdf_is_zero() {
        let samples = vec![0.3, 1.0, 2.5, 7.0];
        let law = EmpiricalLaw::new(samples.clone(), None).unwrap();
        let sorted = {
            let mut s = samples.clone();
            s.sort_by(f64::total_cmp);
            s
        };
        let own_cdf = move |x: f64| {
            sorted.iter().filter(|&&v| v <= x).count() as f64 / sorted.len() as f64
        };
        let v = ks_test_at(&law, own_cdf, 0.05).unwrap();
        assert_eq!(v.statistic, 0.0);
    }

    #[test]
    fn ks_null_rejection_rate_is_calibrated() {
        // 200 repetitions of n = 1e4 standard exponentials against their own
        // CDF: rejections at alpha = 0.05 land in 0.05 +- 0.04.
        let mut rejections = 0;
        for rep in 0..200 {
            let mut rng = RngStream::new(505, rep).rng();
            let samples: Vec<f64> = (0..10_000)
                .map(|_| -(1.0 - rng.random::<f64>()).ln())
                .collect();
            let law = EmpiricalLaw::new(samples, None).unwrap();
            let v = ks_test_at(&law, |x: f64| 1.0 - (-x).exp(), 0.05).unwrap();
            if v.p_value.unwrap() < 0.05 {
                rejections += 1;
            }
        }
        assert!(
            (2..=18).contains(&rejections),
            "{rejections} rejections out of 200 at alpha = 0.05"
        );
    }

    #[test]
    fn weighted_ks_reports_statistic_only() {
        let law = EmpiricalLaw::new(vec![1.0, 2.0], Some(vec![1.0, 3.0])).unwrap();
        let v = ks_test(&law, |x| if x < 1.5 { 0.25 } else { 1.0 }).unwrap();
        assert!(v.p_value.is_none());
        // F_hat(1) = 0.25 matches, F_hat(2) = 1 matches.
        assert_eq!(v.statistic, 0.0);
    }

    #[test]
    fn warren_saturates_for_large_x() {
        let points: Vec<WarrenPoint> = (0..100)
            .map(|i| WarrenPoint {
                x_t: i as f64 * 0.01,
                b_t: 0.1 * i as f64,
                s_t: 0.05,
            })
            .collect();
        let big_x = 100.0;
        let v = warren_from_points(&points, 1.0, big_x).unwrap();
        assert_eq!(v.statistic, 0.0);
        assert!(v.pass);
        assert!(warren_from_points(&points, 1.0, -0.1).is_err());
    }

    #[test]
    fn bump_function_is_consistent_with_finite_differences() {
        let f = TestFunction::bump(0.5, 1.0);
        let h = 1e-6;
        for &x in &[-0.3, 0.0, 0.2, 0.5, 1.1, 1.4999] {
            let fd1 = (f.f(x + h) - f.f(x - h)) / (2.0 * h);
            let fd2 = (f.f(x + h) - 2.0 * f.f(x) + f.f(x - h)) / (h * h);
            assert!((f.df(x) - fd1).abs() < 1e-6, "df mismatch at {x}");
            assert!((f.d2f(x) - fd2).abs() < 1e-3, "d2f mismatch at {x}");
        }
        assert!(f.vanishes_at_support());
        assert_eq!(f.f(2.0), 0.0);
        assert_eq!(f.df(-0.6), 0.0);
    }

    #[test]
    fn dynkin_zero_for_deterministic_paths() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 0.25).unwrap());
        let paths: Vec<GridPath> = (0..5)
            .map(|_| GridPath::new(Arc::clone(&grid), vec![0.7; grid.len()]).unwrap())
            .collect();
        let f = TestFunction::bump(0.5, 1.0);
        let v = dynkin_residual(&paths, |_| 0.0, |_| 0.0, &f, 1.0, 0.0).unwrap();
        assert_eq!(v.statistic, 0.0);
        assert!(v.pass);
    }

    #[test]
    fn dynkin_all_terms_vanish_off_support() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 0.25).unwrap());
        // Paths live at 10, far right of the bump support.
        let paths: Vec<GridPath> = (0..5)
            .map(|_| GridPath::new(Arc::clone(&grid), vec![10.0; grid.len()]).unwrap())
            .collect();
        let f = TestFunction::bump(0.5, 1.0);
        let v = dynkin_residual(&paths, |_| 1.0, |_| 1.0, &f, 1.0, 0.0).unwrap();
        assert_eq!(v.statistic, 0.0);
    }

    #[test]
    fn dynkin_rejects_non_vanishing_function() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 0.25).unwrap());
        let paths = vec![GridPath::new(Arc::clone(&grid), vec![0.0; grid.len()]).unwrap()];
        let bad = TestFunction::from_parts(
            Box::new(|_| 1.0),
            Box::new(|_| 0.0),
            Box::new(|_| 0.0),
            (-1.0, 1.0),
        );
        assert!(dynkin_residual(&paths, |_| 0.0, |_| 0.0, &bad, 1.0, 0.0).is_err());
    }

    #[test]
    fn occupation_positivity_edge_cases() {
        let zeros = EmpiricalLaw::new(vec![0.0; 50], None).unwrap();
        let v = occupation_positivity(&zeros).unwrap();
        assert!(!v.pass);
        assert_eq!(v.statistic, 0.0);

        let ones = EmpiricalLaw::new(vec![1.0; 50], None).unwrap();
        let v = occupation_positivity(&ones).unwrap();
        assert!(v.pass);
        assert_eq!(v.statistic, Z_CAP);
    }

    #[test]
    fn verdict_statistics_are_permutation_invariant() {
        let mut rng = RngStream::new(606, 0).rng();
        let samples: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let mut reversed = samples.clone();
        reversed.reverse();
        let a = ks_test_at(&EmpiricalLaw::new(samples, None).unwrap(), |x| x, 0.05).unwrap();
        let b = ks_test_at(&EmpiricalLaw::new(reversed, None).unwrap(), |x| x, 0.05).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
    }
}
