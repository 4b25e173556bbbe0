//! Time grids, Brownian path generation, and path algebra.
//!
//! Every process in the library lives on a [`TimeGrid`] as a [`GridPath`].
//! Randomness flows through [`RngStream`], a counter-style splittable source:
//! path `k` of a scenario uses `stream_index = k`, so parallel Monte Carlo is
//! reproducible independent of thread count.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{SimError, SimResult};

/// A nondecreasing sequence of times with `t[0] = 0` and strictly positive steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Builds a grid from explicit times, validating the invariants.
    pub fn new(times: Vec<f64>) -> SimResult<Self> {
        if times.is_empty() {
            return Err(SimError::InvalidGrid("grid is empty".into()));
        }
        if times[0] != 0.0 {
            return Err(SimError::InvalidGrid("first entry must be exactly 0".into()));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(SimError::InvalidGrid(
                    "times must be finite and strictly increasing".into(),
                ));
            }
        }
        Ok(Self { times })
    }

    /// Uniform grid `0, dt, 2 dt, ...` covering `[0, horizon]`.
    ///
    /// Uses `i * dt` rather than cumulative addition so grid times carry one
    /// rounding each.
    pub fn uniform(horizon: f64, dt: f64) -> SimResult<Self> {
        if !(dt > 0.0) || !(horizon > 0.0) || !dt.is_finite() || !horizon.is_finite() {
            return Err(SimError::InvalidGrid(
                "horizon and dt must be positive and finite".into(),
            ));
        }
        let n = (horizon / dt).round().max(1.0);
        if n > 1e9 {
            return Err(SimError::InvalidGrid("grid would exceed 1e9 steps".into()));
        }
        let n = n as usize;
        let times = (0..=n).map(|i| i as f64 * dt).collect();
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of grid points (steps + 1).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // enforced nonempty at construction
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Step length `t[i+1] - t[i]`.
    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the grid point equal to `t` (within 1e-9 relative slack).
    pub fn index_of(&self, t: f64) -> SimResult<usize> {
        let idx = self
            .times
            .partition_point(|&u| u < t - 1e-12 - 1e-9 * t.abs());
        if idx < self.times.len() && (self.times[idx] - t).abs() <= 1e-9 * (1.0 + t.abs()) {
            Ok(idx)
        } else {
            Err(SimError::InvalidParameter(format!(
                "time {t} is not a grid point"
            )))
        }
    }
}

/// A real value per grid point of a shared [`TimeGrid`].
#[derive(Debug, Clone)]
pub struct GridPath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>) -> SimResult<Self> {
        if values.len() != grid.len() {
            return Err(SimError::InvalidGrid(
                "value count must match grid length".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// True when both paths live on the same grid (pointer or value equality).
    pub fn same_grid(&self, other: &GridPath) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }
}

/// Seedable, splittable random source.
///
/// `(seed, stream_index)` fully determines the output sequence. Distinct
/// stream indices select distinct ChaCha streams of the same key; substreams
/// re-key deterministically so they collide with no counter-style stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Derives an independent generator for auxiliary draws (`slot` = 0, 1, ...)
    /// belonging to the same logical path.
    pub fn substream(&self, slot: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(slot.wrapping_add(0x9e37))),
            stream_index: self.stream_index,
        }
    }

    /// Instantiates the generator.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// One N(0, var) increment.
#[inline]
pub fn normal_increment<R: Rng>(rng: &mut R, var: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * var.sqrt()
}

/// Uniform draw in (0, 1], safe to feed to `ln`.
#[inline]
pub fn uniform_open<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Samples a standard Brownian path on `grid`: `W(0) = 0` and independent
/// Gaussian increments of variance `dt[i]`.
pub fn sample_brownian(grid: &Arc<TimeGrid>, stream: RngStream) -> GridPath {
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    let mut w = 0.0;
    for i in 0..grid.n_steps() {
        w += normal_increment(&mut rng, grid.dt(i));
        values.push(w);
    }
    GridPath::new(Arc::clone(grid), values).expect("grid length matches by construction")
}

/// Running maximum: `out[i] = max(values[0..=i])`.
pub fn running_max(path: &GridPath) -> GridPath {
    let mut m = f64::NEG_INFINITY;
    let values = path
        .values()
        .iter()
        .map(|&v| {
            m = m.max(v);
            m
        })
        .collect();
    GridPath::new(Arc::clone(path.grid_arc()), values).expect("same grid")
}

/// Probability that a Brownian bridge from `x0` to `x1` over `dt` dips to
/// `barrier`: `exp(-2 (x0 - barrier)(x1 - barrier) / dt)`.
///
/// Both endpoints must lie strictly above the barrier; a step with an endpoint
/// at or below the barrier is already crossed and must not be passed here.
pub fn bridge_lower_crossing_prob(x0: f64, x1: f64, barrier: f64, dt: f64) -> SimResult<f64> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidParameter("dt must be positive".into()));
    }
    let a = x0 - barrier;
    let b = x1 - barrier;
    if !(a > 0.0) || !(b > 0.0) {
        return Err(SimError::InvalidParameter(
            "endpoints must lie strictly above the barrier".into(),
        ));
    }
    Ok((-2.0 * a * b / dt).exp())
}

/// Exact sample of the minimum of a Brownian bridge from `a` to `b` over `dt`,
/// by inverting `P(min <= m) = exp(-2 (a - m)(b - m) / dt)` at the uniform `u`.
#[inline]
pub fn sample_bridge_min(a: f64, b: f64, dt: f64, u: f64) -> f64 {
    let d = a - b;
    0.5 * (a + b - (d * d - 2.0 * dt * u.ln()).sqrt())
}

/// Exact sample of the maximum of a Brownian bridge from `a` to `b` over `dt`.
#[inline]
pub fn sample_bridge_max(a: f64, b: f64, dt: f64, u: f64) -> f64 {
    let d = a - b;
    0.5 * (a + b + (d * d - 2.0 * dt * u.ln()).sqrt())
}
