//! Simulation and statistical verification of the one-sided Tanaka equation
//!
//! ```text
//! dX(t) = lambda dt + 1{X(t) > 0} dW(t)
//! ```
//!
//! The drift sign splits the equation's character, and the library mirrors
//! that split:
//!
//! - `closed_solutions` — closed-form strong solutions for `lambda <= 0`
//!   (stop the driving noise at the first visit of the nonpositive half-line)
//!   and the exact hitting probability `exp(-2 lambda x0)` used as ground
//!   truth for `lambda > 0`.
//! - `sticky_engine` — for `lambda > 0` the equation only has a weak solution,
//!   a sticky Brownian motion; built jointly with its driving noise by a
//!   local-time change of clock of reflected Brownian motion.
//! - `measure_change` — Girsanov reweighting transporting sticky statistics
//!   from the auxiliary measure to the one under which the equation holds.
//! - `reflection` — Skorokhod map, reflected Brownian motion with drift and
//!   its exponential invariant law, and a discrete local-time estimator.
//! - `schemes` — Euler-Maruyama for the indicator-coefficient equations,
//!   correlated driver pairs, and the perturbed-equation construction that
//!   restores strong solvability.
//! - `lawcheck` — KS tests, the Warren conditional-law check, Dynkin residual
//!   tests, and occupation-positivity tests.
//! - `harness` — named scenarios, config resolution, and reports behind the
//!   `tanaka-sim` CLI.

pub mod closed_solutions;
pub mod error;
pub mod harness;
pub mod lawcheck;
pub mod measure_change;
pub mod numeric;
pub mod path_core;
pub mod reflection;
pub mod schemes;
pub mod sticky_engine;

pub use error::{SimError, SimResult};
