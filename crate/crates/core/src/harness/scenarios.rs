//! Scenario registry and runners.
//!
//! Each scenario binds the library modules into one named experiment with
//! deterministic seeding (path `k` uses stream index `k`) and emits a
//! [`Report`] whose verdicts map onto the library's acceptance checks.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use super::config::ScenarioConfig;
use super::report::{EstimateRecord, PathRecord, Report, VerdictRecord};
use crate::closed_solutions::{hitting_probability, simulate_first_passage, solve_stopped};
use crate::error::SimError;
use crate::lawcheck::{
    dynkin_verdict_from, ks_test_at, occupation_positivity, warren_from_points, EmpiricalLaw,
    TestFunction, WarrenPoint,
};
use crate::measure_change::{girsanov_weight, weighted_mean, WeightedSample};
use crate::numeric::{mean_and_stderr, NeumaierSum};
use crate::path_core::{sample_brownian, GridPath, RngStream, TimeGrid};
use crate::reflection::{reflected_terminal_exact, skorokhod_map};
use crate::schemes::{
    correlated_drivers, euler_step_path, martingale_transform, pathwise_gap,
    prokaj_weak_solution, sample_cross_variation, sample_quadratic_variation, DriverMode,
    Drivers, SdeSpec,
};
use crate::sticky_engine::{occupation_time, sticky_solution};

/// Registry entry: scenario name, what it verifies, and the result it cites.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub theorem: &'static str,
}

static SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "remark1-hitting",
        description: "Monte Carlo first-passage frequency brackets exp(-2 lambda x0)",
        theorem: "Remark 1",
    },
    ScenarioInfo {
        name: "thm1-closed-form",
        description: "closed-form strong solution: construction identity, Euler convergence, never-return",
        theorem: "Theorem 1",
    },
    ScenarioInfo {
        name: "thm2-absorption",
        description: "zero-drift case: absorption at the origin and Euler convergence",
        theorem: "Theorem 2",
    },
    ScenarioInfo {
        name: "thm3-warren",
        description: "sticky law under the auxiliary measure: conditional-law and Dynkin checks",
        theorem: "Theorem 3",
    },
    ScenarioInfo {
        name: "thm4-occupation",
        description: "Girsanov-weighted occupation at the origin is strictly positive",
        theorem: "Theorems 3-4",
    },
    ScenarioInfo {
        name: "thm4-invariant",
        description: "reflected drifted Brownian motion has the exponential invariant law",
        theorem: "Theorem 4 (Step 2)",
    },
    ScenarioInfo {
        name: "localtime-levy",
        description: "discrete local-time estimator matches the Levy running-max law",
        theorem: "Theorem 4 (Step 2)",
    },
    ScenarioInfo {
        name: "thm5-corr",
        description: "perturbed equation, correlated case: drivers, transform, representation, contraction",
        theorem: "Theorem 5 (i)",
    },
    ScenarioInfo {
        name: "thm5-indep",
        description: "perturbed equation, independent case: driver statistics",
        theorem: "Theorem 5 (ii)",
    },
    ScenarioInfo {
        name: "properties",
        description: "module invariants: Skorokhod properties, reductions, determinism, null calibration",
        theorem: "library invariants",
    },
];

pub fn list_scenarios() -> &'static [ScenarioInfo] {
    SCENARIOS
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("effective sample size collapsed: ess {ess:.1} of {n} paths")]
    EssCollapse { ess: f64, n: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Spec-scale default configuration of a scenario.
pub fn default_config(name: &str) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = ScenarioConfig {
        scenario: name.to_string(),
        lambda: 1.0,
        kappa: 1.0,
        eta: 2.0,
        x0: 0.0,
        horizon: 1.0,
        dt: 1e-4,
        n_paths: 10_000,
        seed: 1,
        bridge_correction: true,
        tol: BTreeMap::new(),
    };
    match name {
        "remark1-hitting" => {
            cfg.x0 = 0.5;
            cfg.horizon = 20.0;
            cfg.n_paths = 100_000;
        }
        "thm1-closed-form" => {
            cfg.lambda = -1.0;
            cfg.kappa = -1.0;
            cfg.x0 = 1.0;
            cfg.n_paths = 200;
        }
        "thm2-absorption" => {
            cfg.lambda = 0.0;
            cfg.kappa = 0.0;
            cfg.x0 = 1.0;
            cfg.horizon = 4.0;
        }
        "thm3-warren" => {
            cfg.n_paths = 100_000;
        }
        "thm4-occupation" => {}
        "thm4-invariant" => {
            cfg.horizon = 50.0;
            cfg.dt = 1e-3;
        }
        "localtime-levy" => {
            cfg.dt = 1e-6;
            cfg.n_paths = 1_000;
        }
        "thm5-corr" | "thm5-indep" => {
            cfg.n_paths = 500;
        }
        "properties" => {
            cfg.n_paths = 100;
        }
        other => return Err(HarnessError::UnknownScenario(other.to_string())),
    }
    Ok(cfg)
}

/// Report plus optional per-path summary rows for the CSV table.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub report: Report,
    pub path_records: Vec<PathRecord>,
}

type ScenarioParts = (Vec<EstimateRecord>, Vec<VerdictRecord>, Vec<PathRecord>);

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput, HarnessError> {
    let start = Instant::now();
    let (estimates, verdicts, path_records) = match cfg.scenario.as_str() {
        "remark1-hitting" => remark1_hitting(cfg)?,
        "thm1-closed-form" => thm1_closed_form(cfg)?,
        "thm2-absorption" => thm2_absorption(cfg)?,
        "thm3-warren" => thm3_warren(cfg)?,
        "thm4-occupation" => thm4_occupation(cfg)?,
        "thm4-invariant" => thm4_invariant(cfg)?,
        "localtime-levy" => localtime_levy(cfg)?,
        "thm5-corr" => thm5_corr(cfg)?,
        "thm5-indep" => thm5_indep(cfg)?,
        "properties" => properties(cfg)?,
        other => return Err(HarnessError::UnknownScenario(other.to_string())),
    };
    let report = Report {
        scenario: cfg.scenario.clone(),
        config: cfg.clone(),
        estimates,
        verdicts,
        duration_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(ScenarioOutput {
        report,
        path_records,
    })
}

/// Deterministic parallel map over path indices.
fn par_paths<T: Send>(n: usize, seed: u64, f: impl Fn(RngStream) -> T + Sync) -> Vec<T> {
    (0..n)
        .into_par_iter()
        .map(|k| f(RngStream::new(seed, k as u64)))
        .collect()
}

// ---------------------------------------------------------------------------
// Frozen oracle values. Each constant is produced by the matching #[ignore]d
// generator in tests/oracle_gen.rs; the generating command is quoted there.
// ---------------------------------------------------------------------------

/// Mean sup-gap on [0, 1] between the bridge-corrected closed form and plain
/// Euler on the same driver at dt = 1e-5 (200 paths), tripled.
const THM1_EULER_GAP_BOUND: f64 = 3.0 * 0.008_691;

/// Girsanov-weighted mean occupation at the origin over [0, 1] for
/// lambda = 1, x0 = 0: fine-grid oracle (internal dt = 1e-5, 1e5 paths).
const THM4_OCC_P_MEAN: f64 = 0.275_86;
const THM4_OCC_P_SE: f64 = 0.001_33;

/// Mean absolute terminal representation residual of the perturbed-equation
/// construction at dt = 1e-5 (1e3 paths), tripled, plus a rounding floor.
const THM5_PROKAJ_RESIDUAL_BOUND: f64 = 3.0 * 2.663e-15 + 1e-12;

// ---------------------------------------------------------------------------
// Scenario implementations
// ---------------------------------------------------------------------------

/// Remark 1: first-passage frequency of `lambda t + W(t)` below `-x0` over a
/// long horizon brackets `exp(-2 lambda x0)` within 3 standard errors plus a
/// truncation allowance for the finite horizon.
fn remark1_hitting(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    if !(cfg.lambda > 0.0) {
        return Err(HarnessError::InvalidParameter(
            "remark1-hitting requires lambda > 0".into(),
        ));
    }
    if cfg.x0 < 0.0 {
        return Err(HarnessError::InvalidParameter(
            "remark1-hitting requires x0 >= 0".into(),
        ));
    }
    let exact = hitting_probability(cfg.lambda, cfg.x0)?;
    let crossings = par_paths(cfg.n_paths, cfg.seed, |stream| {
        simulate_first_passage(
            cfg.x0,
            cfg.lambda,
            cfg.horizon,
            cfg.dt,
            cfg.bridge_correction,
            stream,
        )
        .expect("validated parameters")
    });
    let n = cfg.n_paths as f64;
    let hits = crossings.iter().filter(|c| c.is_some()).count() as f64;
    let p_hat = hits / n;
    let se = (p_hat * (1.0 - p_hat) / n).sqrt();
    let allowance = cfg.tol_or("truncation_allowance", 1e-3);
    let records = crossings
        .iter()
        .enumerate()
        .map(|(i, c)| PathRecord {
            path_index: i,
            terminal_value: if c.is_some() { 1.0 } else { 0.0 },
            occupation_at_zero: None,
            weight: None,
        })
        .collect();
    Ok((
        vec![
            EstimateRecord::with_stderr("mc_hitting_probability", p_hat, se),
            EstimateRecord::plain("exact_hitting_probability", exact),
        ],
        vec![VerdictRecord::upper_bound(
            "hitting_probability_brackets_exact",
            (p_hat - exact).abs(),
            3.0 * se + allowance,
        )],
        records,
    ))
}

/// Shared by the Theorem 1 and Theorem 2 scenarios: mean sup-gap between the
/// bridge-corrected closed form and plain Euler on the same driver, per dt.
fn euler_gap_ladder(
    lambda: f64,
    zeta: f64,
    n_paths: usize,
    seed: u64,
    dts: &[f64],
) -> Result<Vec<(f64, f64)>, HarnessError> {
    let mut out = Vec::new();
    for (level, &dt) in dts.iter().enumerate() {
        let grid = Arc::new(TimeGrid::uniform(1.0, dt)?);
        let gaps = par_paths(n_paths, seed.wrapping_add(1000 + level as u64), |stream| {
            let w = sample_brownian(&grid, stream);
            let closed = solve_stopped(zeta, lambda, &w, true, stream.substream(1))
                .expect("lambda <= 0");
            let euler = euler_step_path(
                &SdeSpec::tanaka(lambda),
                zeta,
                Drivers::Single(&w),
            )
            .expect("single driver");
            pathwise_gap(&closed.x, &euler).expect("same grid")
        });
        out.push(mean_and_stderr(&gaps));
    }
    Ok(out)
}

fn gap_ladder_verdicts(
    ladder: &[(f64, f64)],
    dts: &[f64],
    estimates: &mut Vec<EstimateRecord>,
    verdicts: &mut Vec<VerdictRecord>,
) {
    let mut worst = f64::NEG_INFINITY;
    for (i, ((gap, se), dt)) in ladder.iter().zip(dts).enumerate() {
        estimates.push(EstimateRecord::with_stderr(
            &format!("euler_sup_gap_dt_{dt:.0e}"),
            *gap,
            *se,
        ));
        if i > 0 {
            let (prev_gap, prev_se) = ladder[i - 1];
            let combined = (se * se + prev_se * prev_se).sqrt().max(1e-300);
            worst = worst.max((gap - prev_gap) / combined);
        }
    }
    // Monotone decrease across the ladder, up to one combined stderr.
    verdicts.push(VerdictRecord::upper_bound(
        "euler_gap_monotone_decrease",
        worst,
        1.0,
    ));
}

/// Theorem 1: exact construction identity on every path, Euler sup-gap
/// decreasing across dt, and the never-return property below `-eps`.
fn thm1_closed_form(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    if !(cfg.lambda < 0.0) {
        return Err(HarnessError::InvalidParameter(
            "thm1-closed-form requires lambda < 0".into(),
        ));
    }
    let grid = Arc::new(TimeGrid::uniform(cfg.horizon, cfg.dt)?);
    let eps = cfg.tol_or("never_return_eps", 1e-2);

    struct PathCheck {
        identity_dev: f64,
        never_return_violation: bool,
        terminal: f64,
    }
    let checks = par_paths(cfg.n_paths, cfg.seed, |stream| {
        let w = sample_brownian(&grid, stream);
        let s = solve_stopped(cfg.x0, cfg.lambda, &w, cfg.bridge_correction, stream.substream(1))
            .expect("lambda < 0");
        let stop = s.tau_index.unwrap_or(grid.len() - 1);
        let mut identity_dev = 0.0f64;
        for (i, &t) in grid.times().iter().enumerate() {
            let expected = cfg.x0 + cfg.lambda * t + w.value(i.min(stop));
            identity_dev = identity_dev.max((s.x.value(i) - expected).abs());
        }
        let vals = s.x.values();
        let never_return_violation = vals
            .iter()
            .position(|&v| v <= -eps)
            .is_some_and(|first| vals[first..].iter().any(|&v| v >= 0.0));
        PathCheck {
            identity_dev,
            never_return_violation,
            terminal: s.x.terminal(),
        }
    });

    let identity_max = checks.iter().map(|c| c.identity_dev).fold(0.0, f64::max);
    let violations = checks.iter().filter(|c| c.never_return_violation).count();

    let mut estimates = vec![EstimateRecord::plain("identity_max_deviation", identity_max)];
    let mut verdicts = vec![
        VerdictRecord::upper_bound(
            "construction_identity_exact",
            identity_max,
            cfg.tol_or("identity_tol", 0.0),
        ),
        VerdictRecord::upper_bound("never_return_below_eps", violations as f64, 0.0),
    ];

    let dts = [1e-2, 1e-3, 1e-4];
    let ladder = euler_gap_ladder(cfg.lambda, cfg.x0, cfg.n_paths, cfg.seed, &dts)?;
    gap_ladder_verdicts(&ladder, &dts, &mut estimates, &mut verdicts);
    verdicts.push(VerdictRecord::upper_bound(
        "euler_gap_within_oracle_bound",
        ladder.last().unwrap().0,
        THM1_EULER_GAP_BOUND,
    ));

    let records = checks
        .iter()
        .enumerate()
        .map(|(i, c)| PathRecord {
            path_index: i,
            terminal_value: c.terminal,
            occupation_at_zero: None,
            weight: None,
        })
        .collect();
    Ok((estimates, verdicts, records))
}

/// Theorem 2 (`lambda = 0`): the path is frozen from the absorption time on,
/// at a level within grid resolution of 0, and the Euler ladder still
/// converges.
fn thm2_absorption(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    if cfg.lambda != 0.0 {
        return Err(HarnessError::InvalidParameter(
            "thm2-absorption requires lambda = 0".into(),
        ));
    }
    let grid = Arc::new(TimeGrid::uniform(cfg.horizon, cfg.dt)?);
    // Absorption happens at 0 only up to grid resolution: the frozen level is
    // the first nonpositive grid value (or a bridge-coin endpoint), of size
    // O(sqrt(dt)); 10 sqrt(dt) covers the worst overshoot across paths.
    let level_tol = cfg.tol_or("absorption_level_tol", 10.0 * cfg.dt.sqrt());

    struct Absorption {
        constancy_violation: bool,
        level: f64,
        terminal: f64,
        crossed: bool,
    }
    let checks = par_paths(cfg.n_paths, cfg.seed, |stream| {
        let w = sample_brownian(&grid, stream);
        let s = solve_stopped(cfg.x0, 0.0, &w, cfg.bridge_correction, stream.substream(1))
            .expect("lambda = 0");
        match s.tau_index {
            None => Absorption {
                constancy_violation: false,
                level: 0.0,
                terminal: s.x.terminal(),
                crossed: false,
            },
            Some(idx) => {
                let frozen = s.x.value(idx);
                Absorption {
                    constancy_violation: s.x.values()[idx..].iter().any(|&v| v != frozen),
                    level: frozen.abs(),
                    terminal: s.x.terminal(),
                    crossed: true,
                }
            }
        }
    });

    let constancy_violations = checks.iter().filter(|c| c.constancy_violation).count();
    let worst_level = checks.iter().map(|c| c.level).fold(0.0, f64::max);
    let crossed = checks.iter().filter(|c| c.crossed).count();

    let mut estimates = vec![
        EstimateRecord::plain("absorbed_fraction", crossed as f64 / cfg.n_paths as f64),
        EstimateRecord::plain("worst_absorption_level", worst_level),
    ];
    let mut verdicts = vec![
        VerdictRecord::upper_bound(
            "absorbed_paths_stay_constant",
            constancy_violations as f64,
            0.0,
        ),
        VerdictRecord::upper_bound("absorption_level_within_grid_tol", worst_level, level_tol),
    ];

    let dts = [1e-2, 1e-3, 1e-4];
    let ladder = euler_gap_ladder(0.0, cfg.x0, 200, cfg.seed, &dts)?;
    gap_ladder_verdicts(&ladder, &dts, &mut estimates, &mut verdicts);

    let records = checks
        .iter()
        .enumerate()
        .map(|(i, c)| PathRecord {
            path_index: i,
            terminal_value: c.terminal,
            occupation_at_zero: None,
            weight: None,
        })
        .collect();
    Ok((estimates, verdicts, records))
}

/// Theorem 3, auxiliary-measure side: Warren conditional-law checks at
/// several levels (with moment regressions) and Dynkin residual tests for two
/// bump functions.
fn thm3_warren(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    if !(cfg.lambda > 0.0) {
        return Err(HarnessError::InvalidParameter(
            "thm3-warren requires lambda > 0".into(),
        ));
    }
    let lambda = cfg.lambda;
    let bumps = [TestFunction::bump(0.5, 1.0), TestFunction::bump(0.25, 0.75)];

    struct WarrenPath {
        point: WarrenPoint,
        occ: f64,
        dynkin: [f64; 2],
    }
    let paths = par_paths(cfg.n_paths, cfg.seed, |stream| {
        let t = sticky_solution(cfg.x0, lambda, stream, cfg.horizon, cfg.dt)
            .expect("validated parameters");
        let end = t.x.len() - 1;
        let drift = |x: f64| if x == 0.0 { lambda } else { 0.0 };
        let diff2 = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };
        let dynkin = [
            crate::lawcheck::dynkin_path_functional(&t.x, &drift, &diff2, &bumps[0], end),
            crate::lawcheck::dynkin_path_functional(&t.x, &drift, &diff2, &bumps[1], end),
        ];
        WarrenPath {
            point: WarrenPoint {
                x_t: t.x.terminal(),
                b_t: t.b.terminal(),
                s_t: t.neg_b_running_max.terminal(),
            },
            occ: t.occ0.terminal(),
            dynkin,
        }
    });

    let points: Vec<WarrenPoint> = paths.iter().map(|p| p.point).collect();
    let mut estimates = Vec::new();
    let mut verdicts = Vec::new();
    for &x in &[0.1, 0.3, 1.0] {
        let v = warren_from_points(&points, lambda, x)?;
        verdicts.push(VerdictRecord::from_verdict(
            &format!("warren_conditional_law_x_{x}"),
            &v,
        ));
    }

    // Dynkin allowance: the left-endpoint occupation sum misses zero-run
    // boundaries at scale sqrt(dt) per path, entering through the drift term.
    for (i, bump) in bumps.iter().enumerate() {
        let sup_df = (0..=400)
            .map(|j| {
                let (lo, hi) = bump.support();
                bump.df(lo + (hi - lo) * j as f64 / 400.0).abs()
            })
            .fold(0.0, f64::max);
        let allowance = 4.0 * lambda * cfg.dt.sqrt() * sup_df;
        let residuals: Vec<f64> = paths.iter().map(|p| p.dynkin[i]).collect();
        let v = dynkin_verdict_from(&residuals, allowance)?;
        let (mean, se) = mean_and_stderr(&residuals);
        estimates.push(EstimateRecord::with_stderr(
            &format!("dynkin_residual_bump{}", i + 1),
            mean,
            se,
        ));
        verdicts.push(VerdictRecord::from_verdict(
            &format!("dynkin_identity_bump{}", i + 1),
            &v,
        ));
    }

    let (occ_mean, occ_se) = mean_and_stderr(&paths.iter().map(|p| p.occ).collect::<Vec<_>>());
    estimates.push(EstimateRecord::with_stderr(
        "mean_occupation_at_horizon",
        occ_mean,
        occ_se,
    ));

    let records = paths
        .iter()
        .enumerate()
        .map(|(i, p)| PathRecord {
            path_index: i,
            terminal_value: p.point.x_t,
            occupation_at_zero: Some(p.occ),
            weight: None,
        })
        .collect();
    Ok((estimates, verdicts, records))
}

/// Theorems 3-4, physical-measure side: Girsanov-weighted occupation is
/// strictly positive (the non-stickiness condition fails), the effective
/// sample size stays healthy, and the weighted mean matches the fine-grid
/// oracle value.
fn thm4_occupation(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    if !(cfg.lambda > 0.0) {
        return Err(HarnessError::InvalidParameter(
            "thm4-occupation requires lambda > 0".into(),
        ));
    }
    let samples = par_paths(cfg.n_paths, cfg.seed, |stream| {
        let t = sticky_solution(cfg.x0, cfg.lambda, stream, cfg.horizon, cfg.dt)
            .expect("validated parameters");
        (
            t.occ0.terminal(),
            girsanov_weight(t.b.terminal(), cfg.lambda, cfg.horizon),
            t.x.terminal(),
        )
    });

    let weighted: Vec<WeightedSample> = samples
        .iter()
        .map(|&(occ, w, _)| WeightedSample { value: occ, weight: w })
        .collect();
    let wm = weighted_mean(&weighted)?;
    let n = cfg.n_paths as f64;
    if wm.ess < 0.01 * n {
        return Err(HarnessError::EssCollapse {
            ess: wm.ess,
            n: cfg.n_paths,
        });
    }

    let law = EmpiricalLaw::new(
        samples.iter().map(|s| s.0).collect(),
        Some(samples.iter().map(|s| s.1).collect()),
    )?;
    let positivity = occupation_positivity(&law)?;

    let combined_se = (wm.stderr * wm.stderr + THM4_OCC_P_SE * THM4_OCC_P_SE).sqrt();
    let estimates = vec![
        EstimateRecord {
            name: "weighted_mean_occupation".into(),
            value: wm.estimate,
            stderr: Some(wm.stderr),
            ess: Some(wm.ess),
        },
        EstimateRecord::plain("oracle_mean_occupation", THM4_OCC_P_MEAN),
    ];
    let verdicts = vec![
        VerdictRecord::from_verdict("occupation_strictly_positive", &positivity),
        VerdictRecord::lower_bound("ess_fraction_healthy", wm.ess / n, 0.05),
        VerdictRecord::upper_bound(
            "weighted_occupation_matches_oracle",
            (wm.estimate - THM4_OCC_P_MEAN).abs(),
            4.0 * combined_se,
        ),
    ];
    let records = samples
        .iter()
        .enumerate()
        .map(|(i, &(occ, w, x_t))| PathRecord {
            path_index: i,
            terminal_value: x_t,
            occupation_at_zero: Some(occ),
            weight: Some(w),
        })
        .collect();
    Ok((estimates, verdicts, records))
}

/// Theorem 4, Step 2: reflected drifted Brownian motion settles into the
/// exponential invariant law.
fn thm4_invariant(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    if !(cfg.lambda > 0.0) {
        return Err(HarnessError::InvalidParameter(
            "thm4-invariant requires lambda > 0".into(),
        ));
    }
    let window_start = cfg.horizon / 2.0;
    let summaries = par_paths(cfg.n_paths, cfg.seed, |stream| {
        reflected_terminal_exact(
            cfg.x0.max(0.0),
            cfg.lambda,
            cfg.horizon,
            cfg.dt,
            window_start,
            stream,
        )
        .expect("validated parameters")
    });

    let terminals: Vec<f64> = summaries.iter().map(|s| s.terminal).collect();
    let lambda = cfg.lambda;
    let ks = ks_test_at(
        &EmpiricalLaw::new(terminals.clone(), None)?,
        move |x| if x <= 0.0 { 0.0 } else { 1.0 - (-2.0 * lambda * x).exp() },
        cfg.tol_or("ks_alpha", 1e-4),
    )?;
    let (avg_mean, avg_se) =
        mean_and_stderr(&summaries.iter().map(|s| s.window_average).collect::<Vec<_>>());
    let target = 1.0 / (2.0 * cfg.lambda);

    let estimates = vec![
        EstimateRecord::with_stderr("late_window_time_average", avg_mean, avg_se),
        EstimateRecord::plain("stationary_mean", target),
    ];
    let verdicts = vec![
        VerdictRecord::from_verdict("terminal_law_is_exponential", &ks),
        VerdictRecord::upper_bound(
            "time_average_matches_stationary_mean",
            (avg_mean - target).abs(),
            cfg.tol_or("time_average_tol", 0.02),
        ),
    ];
    let records = summaries
        .iter()
        .enumerate()
        .map(|(i, s)| PathRecord {
            path_index: i,
            terminal_value: s.terminal,
            occupation_at_zero: None,
            weight: None,
        })
        .collect();
    Ok((estimates, verdicts, records))
}

/// Local-time estimator versus the Levy oracle: in the symmetric convention
/// used throughout, the local time of standard Brownian motion at the origin
/// over [0, 1] is distributed as half the running maximum, i.e. half-normal
/// with scale 1/2 and CDF `2 Phi(2x) - 1`.
fn localtime_levy(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    let epsilon = cfg.tol_or("epsilon", 1e-2);
    if !(epsilon > 0.0) {
        return Err(HarnessError::InvalidParameter(
            "epsilon must be positive".into(),
        ));
    }
    let n_steps = (cfg.horizon / cfg.dt).round() as usize;
    let estimates_per_path = par_paths(cfg.n_paths, cfg.seed, |stream| {
        let mut rng = stream.rng();
        let scale = 1.0 / (4.0 * epsilon);
        let mut w = 0.0f64;
        let mut acc = 0.0f64;
        for _ in 0..n_steps {
            if w.abs() < epsilon {
                acc += scale * cfg.dt;
            }
            w += crate::path_core::normal_increment(&mut rng, cfg.dt);
        }
        acc
    });

    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("standard normal");
    let ks = ks_test_at(
        &EmpiricalLaw::new(estimates_per_path.clone(), None)?,
        move |x| {
            if x <= 0.0 {
                0.0
            } else {
                2.0 * statrs::distribution::ContinuousCDF::cdf(&normal, 2.0 * x) - 1.0
            }
        },
        cfg.tol_or("ks_alpha", 1e-4),
    )?;
    let (mean, se) = mean_and_stderr(&estimates_per_path);
    // E[M/2] = sqrt(2/pi)/2 for the standard running maximum.
    let exact_mean = (2.0 / std::f64::consts::PI).sqrt() / 2.0;

    let estimates = vec![
        EstimateRecord::with_stderr("mean_local_time_estimate", mean, se),
        EstimateRecord::plain("exact_mean_local_time", exact_mean),
    ];
    let verdicts = vec![
        VerdictRecord::from_verdict("local_time_law_matches_levy_oracle", &ks),
        VerdictRecord::upper_bound(
            "mean_local_time_within_5_se",
            (mean - exact_mean).abs(),
            5.0 * se,
        ),
    ];
    let records = estimates_per_path
        .iter()
        .enumerate()
        .map(|(i, &l)| PathRecord {
            path_index: i,
            terminal_value: l,
            occupation_at_zero: None,
            weight: None,
        })
        .collect();
    Ok((estimates, verdicts, records))
}

/// Theorem 5, case (i): driver cross-variation, orthogonal martingale
/// transform rates, representation residual, and contraction of the terminal
/// gap in the initial gap.
fn thm5_corr(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    let eta = cfg.eta;
    if eta.abs() <= 1.0 {
        return Err(HarnessError::InvalidParameter(
            "thm5-corr requires eta outside [-1, 1]".into(),
        ));
    }
    let mut estimates = Vec::new();
    let mut verdicts = Vec::new();

    // (a) + (b): one long pair gives 1e6 increments for the moment checks.
    let grid_long = Arc::new(TimeGrid::uniform(100.0, 1e-4)?);
    let pair = correlated_drivers(eta, DriverMode::Correlated, &grid_long, RngStream::new(cfg.seed, 0))?;
    let cross = sample_cross_variation(&pair.w, &pair.v)?;
    let qw = sample_quadratic_variation(&pair.w);
    let qv = sample_quadratic_variation(&pair.v);
    estimates.push(EstimateRecord::plain("driver_cross_variation_rate", cross));
    verdicts.push(VerdictRecord::upper_bound(
        "driver_cross_variation_target",
        (cross - (-1.0 / eta)).abs(),
        0.01,
    ));
    verdicts.push(VerdictRecord::upper_bound(
        "driver_marginal_variance",
        (qw - 1.0).abs().max((qv - 1.0).abs()),
        0.01,
    ));

    let (m, n_mart) = martingale_transform(&pair.w, &pair.v, eta)?;
    let qm = sample_quadratic_variation(&m);
    let qn = sample_quadratic_variation(&n_mart);
    let mn = sample_cross_variation(&m, &n_mart)?;
    let n_rate = (eta * eta - 1.0) / 4.0;
    estimates.push(EstimateRecord::plain("transform_m_qv_rate", qm));
    estimates.push(EstimateRecord::plain("transform_n_qv_rate", qn));
    estimates.push(EstimateRecord::plain("transform_cross_rate", mn));
    verdicts.push(VerdictRecord::upper_bound(
        "transform_m_quarter_rate",
        (qm - 0.25).abs(),
        0.01,
    ));
    verdicts.push(VerdictRecord::upper_bound(
        "transform_n_rate",
        (qn - n_rate).abs(),
        0.01,
    ));
    verdicts.push(VerdictRecord::upper_bound(
        "transform_orthogonality",
        mn.abs(),
        0.01,
    ));

    // (c) Representation residual of the weak-solution construction.
    let grid = Arc::new(TimeGrid::uniform(cfg.horizon, cfg.dt)?);
    let residuals = par_paths(1000, cfg.seed.wrapping_add(77), |stream| {
        let u_rate = 0.25f64.sqrt();
        let n_rate_s = ((eta * eta - 1.0) / 4.0).sqrt();
        let u_raw = sample_brownian(&grid, stream.substream(0));
        let n_raw = sample_brownian(&grid, stream.substream(1));
        let u = GridPath::new(
            Arc::clone(&grid),
            u_raw.values().iter().map(|&x| u_rate * x).collect(),
        )
        .expect("same grid");
        let nn = GridPath::new(
            Arc::clone(&grid),
            n_raw.values().iter().map(|&x| n_rate_s * x).collect(),
        )
        .expect("same grid");
        let (x, m) = prokaj_weak_solution(cfg.x0, &u, &nn).expect("same grid");
        // Reconstruct U = int sgn(X) dM and compare the terminal representation.
        let mut recon = 0.0;
        for i in 0..x.len() - 1 {
            recon += crate::schemes::sgn(x.value(i)) * (m.value(i + 1) - m.value(i));
        }
        (x.terminal() - cfg.x0 - nn.terminal() - recon).abs()
    });
    let (res_mean, res_se) = mean_and_stderr(&residuals);
    estimates.push(EstimateRecord::with_stderr(
        "prokaj_representation_residual",
        res_mean,
        res_se,
    ));
    verdicts.push(VerdictRecord::upper_bound(
        "prokaj_residual_within_oracle_bound",
        res_mean,
        THM5_PROKAJ_RESIDUAL_BOUND,
    ));

    // (d) Contraction of the terminal gap in the initial gap. The indicator
    // coefficient gives the Euler chain a gap floor of order sqrt(dt) when
    // paths straddle the origin, so the probe runs on its own finer step to
    // keep the floor below the smallest initial gap's response.
    let deltas = [1e-1, 1e-2, 1e-3];
    let spec = SdeSpec::perturbed(cfg.lambda, eta, DriverMode::Correlated)?;
    let probe_grid = Arc::new(TimeGrid::uniform(
        cfg.horizon,
        cfg.tol_or("contraction_dt", 1e-5),
    )?);
    let gaps_by_delta: Vec<Vec<f64>> = {
        let per_pair = par_paths(cfg.n_paths, cfg.seed.wrapping_add(177), |stream| {
            let pair = correlated_drivers(eta, DriverMode::Correlated, &probe_grid, stream)
                .expect("validated eta");
            let base = euler_step_path(&spec, 0.0, Drivers::Pair(&pair)).expect("pair");
            let mut row = [0.0; 3];
            for (j, &d) in deltas.iter().enumerate() {
                let shifted = euler_step_path(&spec, d, Drivers::Pair(&pair)).expect("pair");
                row[j] = (shifted.terminal() - base.terminal()).abs();
            }
            row
        });
        (0..3)
            .map(|j| per_pair.iter().map(|r| r[j]).collect())
            .collect()
    };
    let medians: Vec<f64> = gaps_by_delta
        .iter()
        .map(|g| {
            let mut s = g.clone();
            s.sort_by(f64::total_cmp);
            s[s.len() / 2]
        })
        .collect();
    for (d, m) in deltas.iter().zip(&medians) {
        estimates.push(EstimateRecord::plain(
            &format!("median_terminal_gap_delta_{d:.0e}"),
            *m,
        ));
    }
    let worst_ratio = medians
        .windows(2)
        .map(|w| w[1] / w[0].max(1e-300))
        .fold(0.0, f64::max);
    verdicts.push(VerdictRecord::upper_bound(
        "terminal_gap_contracts_with_initial_gap",
        worst_ratio,
        1.0,
    ));

    Ok((estimates, verdicts, Vec::new()))
}

/// Theorem 5, case (ii): independent drivers have vanishing cross-variation
/// and standard marginals.
fn thm5_indep(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    if cfg.eta == 0.0 {
        return Err(HarnessError::InvalidParameter(
            "thm5-indep requires nonzero eta".into(),
        ));
    }
    let grid = Arc::new(TimeGrid::uniform(100.0, 1e-4)?);
    let pair = correlated_drivers(
        cfg.eta,
        DriverMode::Independent,
        &grid,
        RngStream::new(cfg.seed, 0),
    )?;
    let cross = sample_cross_variation(&pair.w, &pair.v)?;
    let qw = sample_quadratic_variation(&pair.w);
    let qv = sample_quadratic_variation(&pair.v);
    let estimates = vec![
        EstimateRecord::plain("driver_cross_variation_rate", cross),
        EstimateRecord::plain("driver_w_qv_rate", qw),
        EstimateRecord::plain("driver_v_qv_rate", qv),
    ];
    let verdicts = vec![
        VerdictRecord::upper_bound("driver_independence", cross.abs(), 0.01),
        VerdictRecord::upper_bound(
            "driver_marginal_variance",
            (qw - 1.0).abs().max((qv - 1.0).abs()),
            0.01,
        ),
    ];
    Ok((estimates, verdicts, Vec::new()))
}

/// Library invariants bundled as one scenario.
fn properties(cfg: &ScenarioConfig) -> Result<ScenarioParts, HarnessError> {
    let mut verdicts = Vec::new();
    let seed = cfg.seed;

    // running_max is idempotent.
    {
        let grid = Arc::new(TimeGrid::uniform(1.0, 1e-3)?);
        let violations = par_paths(100, seed, |stream| {
            let w = sample_brownian(&grid, stream);
            let m1 = crate::path_core::running_max(&w);
            let m2 = crate::path_core::running_max(&m1);
            m1.values() != m2.values()
        })
        .iter()
        .filter(|&&v| v)
        .count();
        verdicts.push(VerdictRecord::upper_bound(
            "running_max_idempotent",
            violations as f64,
            0.0,
        ));
    }

    // Skorokhod minimality (brute-force pointwise minimum + dominated
    // perturbations), monotonicity, and flatness.
    {
        let grid = Arc::new(TimeGrid::uniform(1.0, 5e-3)?);
        let results = par_paths(100, seed.wrapping_add(1), |stream| {
            let w = sample_brownian(&grid, stream);
            let d = skorokhod_map(&w);
            // Brute-force minimal regulator.
            let mut brute_ok = true;
            let mut run = 0.0f64;
            for i in 0..w.len() {
                run = run.max(-w.value(i));
                if (d.l.value(i) - run.max(0.0)).abs() > 1e-12 {
                    brute_ok = false;
                }
            }
            // Random feasible perturbations dominate l.
            let mut rng = stream.substream(1).rng();
            let mut dominated = true;
            for _ in 0..100 {
                let mut extra = 0.0;
                for i in 0..w.len() {
                    extra += rand::Rng::random::<f64>(&mut rng) * 1e-3;
                    let g = d.l.value(i) + extra;
                    if g < d.l.value(i) || w.value(i) + g < 0.0 {
                        dominated = false;
                    }
                }
            }
            // Monotonicity of the map.
            let lowered = GridPath::new(
                Arc::clone(&grid),
                w.values().iter().map(|&v| v - 0.1).collect(),
            )
            .expect("same grid");
            let z_low = skorokhod_map(&lowered).z;
            let monotone = z_low
                .values()
                .iter()
                .zip(d.z.values())
                .all(|(&a, &b)| a <= b + 1e-12);
            // Flatness off the zero set.
            let mut flat_ok = true;
            for i in 0..w.len() - 1 {
                if d.l.value(i + 1) > d.l.value(i)
                    && d.z.value(i) != 0.0
                    && d.z.value(i + 1) != 0.0
                {
                    flat_ok = false;
                }
            }
            (brute_ok, dominated, monotone, flat_ok)
        });
        let count_fail = |f: &dyn Fn(&(bool, bool, bool, bool)) -> bool| {
            results.iter().filter(|r| !f(r)).count() as f64
        };
        verdicts.push(VerdictRecord::upper_bound(
            "skorokhod_regulator_minimal",
            count_fail(&|r| r.0 && r.1),
            0.0,
        ));
        verdicts.push(VerdictRecord::upper_bound(
            "skorokhod_map_monotone",
            count_fail(&|r| r.2),
            0.0,
        ));
        verdicts.push(VerdictRecord::upper_bound(
            "regulator_flat_off_zero_set",
            count_fail(&|r| r.3),
            0.0,
        ));
    }

    // Girsanov mean weight equals 1 within 3 stderr.
    {
        let weights = par_paths(100_000, seed.wrapping_add(2), |stream| {
            let mut rng = stream.rng();
            girsanov_weight(crate::path_core::normal_increment(&mut rng, 1.0), 1.0, 1.0)
        });
        let (mean, se) = mean_and_stderr(&weights);
        verdicts.push(VerdictRecord::upper_bound(
            "girsanov_mean_weight_is_one",
            (mean - 1.0).abs(),
            3.0 * se,
        ));
    }

    // KS null calibration: rejection rate at alpha = 0.05 in 0.05 +- 0.04.
    {
        let rejections: usize = par_paths(200, seed.wrapping_add(3), |stream| {
            let mut rng = stream.rng();
            let samples: Vec<f64> = (0..10_000)
                .map(|_| -crate::path_core::uniform_open(&mut rng).ln())
                .collect();
            let law = EmpiricalLaw::new(samples, None).expect("nonempty");
            let v = ks_test_at(&law, |x: f64| 1.0 - (-x).exp(), 0.05).expect("valid");
            usize::from(v.p_value.expect("unweighted") < 0.05)
        })
        .iter()
        .sum();
        verdicts.push(VerdictRecord {
            name: "ks_null_rejection_rate_calibrated".into(),
            statistic: rejections as f64 / 200.0,
            threshold: 0.09,
            p_value: None,
            pass: (2..=18).contains(&rejections),
        });
    }

    // Compensated reductions are order-insensitive to 1e-12 relative.
    {
        let mut rng = RngStream::new(seed, 4).rng();
        let mut samples: Vec<WeightedSample> = (0..100_000)
            .map(|_| WeightedSample {
                value: rand::Rng::random::<f64>(&mut rng) * 2.0 - 1.0,
                weight: crate::path_core::uniform_open(&mut rng) * 10.0,
            })
            .collect();
        let a = weighted_mean(&samples)?;
        samples.reverse();
        let b = weighted_mean(&samples)?;
        let rel = (a.estimate - b.estimate).abs() / a.estimate.abs().max(1e-300);
        verdicts.push(VerdictRecord::upper_bound(
            "weighted_mean_order_insensitive",
            rel,
            1e-12,
        ));
        verdicts.push(VerdictRecord::upper_bound(
            "ess_at_most_n",
            a.ess / samples.len() as f64,
            1.0 + 1e-12,
        ));
    }

    // Brownian increments pass the KS normality check.
    {
        let grid = Arc::new(TimeGrid::uniform(10.0, 1e-4)?);
        let w = sample_brownian(&grid, RngStream::new(seed, 5));
        let sd = 1e-4f64.sqrt();
        let incs: Vec<f64> = w.values().windows(2).map(|p| (p[1] - p[0]) / sd).collect();
        let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("standard normal");
        let v = ks_test_at(
            &EmpiricalLaw::new(incs, None)?,
            move |x| statrs::distribution::ContinuousCDF::cdf(&normal, x),
            1e-4,
        )?;
        verdicts.push(VerdictRecord {
            name: "brownian_increments_normal".into(),
            statistic: v.statistic,
            threshold: v.threshold,
            p_value: v.p_value,
            pass: v.p_value.expect("unweighted") > 1e-4,
        });
    }

    // Determinism: identical estimates under different thread counts.
    {
        let run_batch = |threads: usize| -> f64 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("pool");
            pool.install(|| {
                let occs = par_paths(64, seed.wrapping_add(6), |stream| {
                    sticky_solution(0.0, 1.0, stream, 1.0, 1e-3)
                        .expect("valid")
                        .occ0
                        .terminal()
                });
                let mut acc = NeumaierSum::new();
                for &o in &occs {
                    acc.add(o);
                }
                acc.total()
            })
        };
        let single = run_batch(1);
        let multi = run_batch(4);
        verdicts.push(VerdictRecord::upper_bound(
            "determinism_across_thread_counts",
            (single - multi).abs(),
            0.0,
        ));
    }

    // Euler stickiness signature: band occupation stays bounded away from 0
    // for positive drift as dt shrinks, and matches the closed form for
    // negative drift.
    {
        let band = 0.05;
        let mut min_mean_pos = f64::INFINITY;
        let mut neg_gap = 0.0f64;
        let mut neg_tol = 0.0f64;
        for &dt in &[1e-2, 1e-3, 1e-4] {
            let grid = Arc::new(TimeGrid::uniform(1.0, dt)?);
            let occ_pos = par_paths(200, seed.wrapping_add(7), |stream| {
                let w = sample_brownian(&grid, stream);
                let x = euler_step_path(&SdeSpec::tanaka(1.0), 0.0, Drivers::Single(&w))
                    .expect("single");
                occupation_time(&x, band).terminal()
            });
            let (mean_pos, _) = mean_and_stderr(&occ_pos);
            min_mean_pos = min_mean_pos.min(mean_pos);

            if dt == 1e-4 {
                let diffs = par_paths(200, seed.wrapping_add(8), |stream| {
                    let w = sample_brownian(&grid, stream);
                    // Bridge-corrected closed form vs plain Euler, started
                    // above the band so paths actually diffuse through it;
                    // without the correction the two recursions coincide
                    // identically and the comparison is vacuous.
                    let closed =
                        solve_stopped(0.3, -1.0, &w, true, stream.substream(1)).expect("neg");
                    let euler =
                        euler_step_path(&SdeSpec::tanaka(-1.0), 0.3, Drivers::Single(&w))
                            .expect("single");
                    occupation_time(&euler, band).terminal()
                        - occupation_time(&closed.x, band).terminal()
                });
                let (mean_diff, se_diff) = mean_and_stderr(&diffs);
                neg_gap = mean_diff.abs();
                // Band occupation of plain Euler exceeds the coin-stopped
                // closed form by O(sqrt(dt)); allow that scale on top of the
                // Monte Carlo error.
                neg_tol = 4.0 * se_diff + dt.sqrt();
            }
        }
        verdicts.push(VerdictRecord::lower_bound(
            "euler_positive_drift_band_occupation",
            min_mean_pos,
            0.02,
        ));
        verdicts.push(VerdictRecord::upper_bound(
            "euler_negative_drift_matches_closed_form_occupation",
            neg_gap,
            neg_tol,
        ));
    }

    Ok((Vec::new(), verdicts, Vec::new()))
}
