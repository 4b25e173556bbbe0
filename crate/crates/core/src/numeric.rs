//! Compensated summation and small statistical reducers.
//!
//! All cross-path reductions in this crate go through [`NeumaierSum`] so that
//! results are insensitive to summation order well below the 1e-12 relative
//! level required by the concurrency contracts.

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn csum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.total()
}

/// Sample mean and standard error of the mean.
///
/// Returns (0, 0) for an empty slice; stderr is 0 for a single sample.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = csum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut sq = NeumaierSum::new();
    for &x in xs {
        let d = x - mean;
        sq.add(d * d);
    }
    let var = sq.total() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// z-statistic |mean| / stderr, with the 0/0 case mapped to 0 and a finite cap
/// for degenerate (zero-variance, nonzero-mean) inputs.
pub fn z_statistic(mean: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        (mean / stderr).abs()
    } else if mean == 0.0 {
        0.0
    } else {
        Z_CAP
    }
}

/// Cap used for "infinite" z-scores on zero-variance samples.
pub const Z_CAP: f64 = 1e6;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_handles_cancellation() {
        // 1 + 1e16 - 1e16 naively loses the 1.
        let xs = [1.0, 1e16, -1e16];
        assert_eq!(csum(&xs), 1.0);
    }

    #[test]
    fn mean_stderr_basic() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn z_statistic_degenerate_cases() {
        assert_eq!(z_statistic(0.0, 0.0), 0.0);
        assert_eq!(z_statistic(1.0, 0.0), Z_CAP);
        assert!((z_statistic(-2.0, 1.0) - 2.0).abs() < 1e-15);
    }
}
