//! Per-timestep constrained minimization of total plant power under the
//! three operational strategies, with warm starts, convergence fallback, and
//! independent closed-form oracles.

mod barrier;
mod fractions;
mod oracle;

pub use fractions::{proportional_fractions, waterfill_fractions};
pub use oracle::{oracle_reduced_1d, oracle_strategy_a};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant_model::{
    FRACTION_SUM_TOL, ModelError, OperatingPoint, PlantParams, SubloopLoads, total_power,
};

use barrier::{BarrierOutcome, BarrierProblem, diagnostic_power};

/// Feasibility slack applied when classifying solutions.
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("total load must be positive, got {0} kW")]
    NonPositiveLoad(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid fractions: {0}")]
    InvalidFractions(String),
    #[error("no feasible fraction split for {k} subloops under the box bounds")]
    FractionBoxInfeasible { k: usize },
    #[error("strategy B requires a pinned fraction sequence")]
    MissingFractions,
    #[error("problem is infeasible")]
    Infeasible,
    #[error("could not construct a strictly feasible start: {0}")]
    InteriorStart(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Operational strategy.
///
/// A pins the supply setpoint at the measured baseline and the fractions at
/// the proportional split, optimizing flow only. B co-optimizes flow and
/// setpoint with pinned proportional fractions. C additionally frees the
/// fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    A,
    B,
    C,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::A => "A",
            Strategy::B => "B",
            Strategy::C => "C",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Strategy::A),
            "B" | "b" => Ok(Strategy::B),
            "C" | "c" => Ok(Strategy::C),
            other => Err(format!("unknown strategy {other:?}, expected A, B, or C")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// All constraints satisfied within [`CONSTRAINT_TOL`].
    Converged,
    /// Iteration budget exhausted; the previous-timestep solution is returned.
    FallbackPrevious,
    /// Thermally infeasible even at the clamp point; returned for accounting.
    ClampedInfeasible,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::FallbackPrevious => "fallback_previous",
            SolveStatus::ClampedInfeasible => "clamped_infeasible",
        }
    }
}

/// Outcome of one per-timestep solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub op: OperatingPoint,
    /// Total plant power at `op`, kW.
    pub power: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Hottest subloop return temperature at `op`, °C.
    pub max_return_temp: f64,
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Function tolerance driving the final barrier accuracy.
    pub ftol: f64,
    /// Total Newton-step budget per timestep before falling back.
    pub max_iter: usize,
    /// Chain the previous-timestep solution as the initial iterate.
    pub warm_start: bool,
    /// In sweeps, cross-check each solve against the 1-D oracle and keep the
    /// better feasible point.
    pub oracle_guard: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            max_iter: 200,
            warm_start: true,
            oracle_guard: false,
        }
    }
}

/// Residuals of the full constraint set at a point, ordered as: K thermal
/// slacks (T_limit − T_ret,k), flow bounds (lower, upper), setpoint bounds
/// (lower, upper), per-subloop fraction bounds (lower, upper alternating),
/// and finally the mass-balance residual 1 − Σf. The point is feasible iff
/// every inequality entry is non-negative and the last entry is zero within
/// 1e-9.
pub fn constraint_values(
    op: &OperatingPoint,
    loads: &SubloopLoads,
    params: &PlantParams,
) -> Vec<f64> {
    let k = loads.k();
    let mut out = Vec::with_capacity(k + 4 + 2 * k + 1);
    for (&q, &f) in loads.q.iter().zip(&op.fractions) {
        let branch = f * op.flow;
        let t_ret = if q == 0.0 {
            op.t_sup
        } else if branch > 0.0 {
            op.t_sup + q * 1000.0 / (branch * params.cp)
        } else {
            f64::INFINITY
        };
        out.push(params.t_limit - t_ret);
    }
    out.push(op.flow - params.flow_min);
    out.push(params.flow_max - op.flow);
    out.push(op.t_sup - params.t_sup_min);
    out.push(params.t_sup_max - op.t_sup);
    for &f in &op.fractions {
        out.push(f - params.f_min);
        out.push(params.f_max - f);
    }
    out.push(1.0 - op.fractions.iter().sum::<f64>());
    out
}

/// Worst inequality violation for the constraint set a strategy enforces
/// (fraction-box rows only bind where fractions are decision variables).
/// Non-positive iff the point is feasible for that strategy.
pub fn strategy_violation(
    strategy: Strategy,
    op: &OperatingPoint,
    loads: &SubloopLoads,
    params: &PlantParams,
) -> f64 {
    let values = constraint_values(op, loads, params);
    let k = loads.k();
    let ineq_end = match strategy {
        Strategy::A | Strategy::B => k + 4,
        Strategy::C => k + 4 + 2 * k,
    };
    let mut worst: f64 = 0.0;
    for v in &values[..ineq_end] {
        worst = worst.max(-v);
    }
    let eq = values.last().copied().unwrap_or(0.0);
    worst.max(eq.abs() - FRACTION_SUM_TOL)
}

fn max_return_temp(op: &OperatingPoint, loads: &SubloopLoads, params: &PlantParams) -> f64 {
    loads
        .q
        .iter()
        .zip(&op.fractions)
        .map(|(&q, &f)| {
            if q == 0.0 {
                op.t_sup
            } else {
                let branch = f * op.flow;
                if branch > 0.0 {
                    op.t_sup + q * 1000.0 / (branch * params.cp)
                } else {
                    f64::INFINITY
                }
            }
        })
        .fold(f64::MIN, f64::max)
}

fn validate_inputs(
    loads: &SubloopLoads,
    fractions: &[f64],
    warm: Option<&OperatingPoint>,
) -> Result<(), SolverError> {
    if loads.q_tot <= 0.0 {
        return Err(SolverError::NonPositiveLoad(loads.q_tot));
    }
    if fractions.len() != loads.k() {
        return Err(SolverError::DimensionMismatch {
            expected: loads.k(),
            got: fractions.len(),
        });
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(SolverError::InvalidFractions(format!(
            "pinned fractions sum to {sum}"
        )));
    }
    if let Some(w) = warm
        && w.fractions.len() != loads.k()
    {
        return Err(SolverError::DimensionMismatch {
            expected: loads.k(),
            got: w.fractions.len(),
        });
    }
    Ok(())
}

fn clamped_result(op: OperatingPoint, loads: &SubloopLoads, params: &PlantParams) -> SolveResult {
    let power = diagnostic_power(&op, loads, params);
    let max_ret = max_return_temp(&op, loads, params);
    SolveResult {
        op,
        power,
        status: SolveStatus::ClampedInfeasible,
        iterations: 0,
        max_return_temp: max_ret,
    }
}

/// Strategy A: minimal feasible flow at the pinned baseline setpoint, found
/// by bisection on the hottest-subloop return temperature.
fn solve_strategy_a(
    loads: &SubloopLoads,
    fractions: &[f64],
    baseline_t_sup: f64,
    params: &PlantParams,
) -> Result<SolveResult, SolverError> {
    for (&q, &f) in loads.q.iter().zip(fractions) {
        if q > 0.0 && f <= 0.0 {
            return Err(SolverError::InvalidFractions(
                "loaded subloop with non-positive fraction".into(),
            ));
        }
    }
    let op_at = |flow: f64| OperatingPoint::new(flow, baseline_t_sup, fractions.to_vec());
    if baseline_t_sup >= params.t_limit {
        return Ok(clamped_result(op_at(params.flow_max), loads, params));
    }

    let violation_at = |flow: f64| max_return_temp(&op_at(flow), loads, params) - params.t_limit;
    if violation_at(params.flow_max) > 0.0 {
        return Ok(clamped_result(op_at(params.flow_max), loads, params));
    }

    let (flow, iterations) = if violation_at(params.flow_min) <= 0.0 {
        (params.flow_min, 0)
    } else {
        let mut lo = params.flow_min; // violated side
        let mut hi = params.flow_max; // feasible side
        let mut iters = 0usize;
        while hi - lo > f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if violation_at(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
            if iters >= 200 {
                break;
            }
        }
        (hi, iters)
    };

    let op = op_at(flow);
    let power = total_power(&op, loads, params)?;
    let max_ret = max_return_temp(&op, loads, params);
    Ok(SolveResult {
        op,
        power,
        status: SolveStatus::Converged,
        iterations,
        max_return_temp: max_ret,
    })
}

/// Deterministic strictly-interior start for the barrier stages. Prefers the
/// hinted (warm or cold-start) values and walks them inward until every
/// constraint holds with margin.
fn interior_start(
    hint_flow: f64,
    hint_t_sup: f64,
    start_fractions: Vec<f64>,
    intensity: f64,
    params: &PlantParams,
) -> Option<OperatingPoint> {
    let t_floor = params.t_sup_min.max(params.approach_base);
    let dt_margin = 0.01 * (params.t_sup_max - t_floor);
    let dm_margin = 0.005 * (params.flow_max - params.flow_min);

    let mut t = hint_t_sup.clamp(t_floor + dt_margin, params.t_sup_max - dt_margin);
    let mut m = hint_flow.clamp(params.flow_min + dm_margin, params.flow_max - dm_margin);
    let required = |t: f64| intensity * 1000.0 / (params.cp * (params.t_limit - t));

    for _ in 0..64 {
        let need = required(t);
        if m > need * (1.0 + 1e-9) {
            return Some(OperatingPoint::new(m, t, start_fractions));
        }
        let lifted = (need * 1.05).min(params.flow_max - dm_margin);
        if lifted > need * (1.0 + 1e-9) {
            m = m.max(lifted);
            continue;
        }
        // Even near the flow ceiling the setpoint is too high; cool it down.
        t = t_floor + (t - t_floor) * 0.5;
        if t - t_floor < 1e-9 {
            break;
        }
    }
    None
}

/// Pulls fractions strictly inside the box by blending toward the uniform
/// split (which preserves Σf = 1).
fn interior_fractions(fractions: &[f64], params: &PlantParams) -> Vec<f64> {
    let k = fractions.len() as f64;
    let margin = 0.02 * (params.f_max - params.f_min);
    for theta in [0.0, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0] {
        let blended: Vec<f64> = fractions
            .iter()
            .map(|&f| (1.0 - theta) * f + theta / k)
            .collect();
        let ok = blended
            .iter()
            .all(|&f| f >= params.f_min + margin && f <= params.f_max - margin);
        if ok {
            return blended;
        }
    }
    vec![1.0 / k; fractions.len()]
}

/// Minimizes total plant power for one timestep.
///
/// `fractions` is the pinned split for Strategies A and B and the cold-start
/// split for Strategy C. `warm`, when feasible for the current constraint
/// set, seeds the iteration; otherwise a deterministic cold start is used
/// (nominal flow, baseline setpoint). Non-convergence within the iteration
/// budget returns the warm point with [`SolveStatus::FallbackPrevious`];
/// thermal infeasibility even at the clamp point returns
/// [`SolveStatus::ClampedInfeasible`].
pub fn solve_timestep(
    strategy: Strategy,
    loads: &SubloopLoads,
    fractions: &[f64],
    baseline_t_sup: f64,
    params: &PlantParams,
    warm: Option<&OperatingPoint>,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    validate_inputs(loads, fractions, warm)?;

    if strategy == Strategy::A {
        return solve_strategy_a(loads, fractions, baseline_t_sup, params);
    }

    // Feasibility screen at the clamp point (flow ceiling, setpoint floor,
    // most favorable admissible fractions).
    let best_fractions = match strategy {
        Strategy::B => fractions.to_vec(),
        Strategy::C => waterfill_fractions(&loads.q, params.f_min, params.f_max)?,
        Strategy::A => unreachable!(),
    };
    let intensity_best = loads
        .q
        .iter()
        .zip(&best_fractions)
        .map(|(&q, &f)| if q > 0.0 { q / f } else { 0.0 })
        .fold(0.0f64, f64::max);
    if intensity_best * 1000.0 / (params.cp * (params.t_limit - params.t_sup_min)) > params.flow_max
    {
        let op = OperatingPoint::new(params.flow_max, params.t_sup_min, best_fractions);
        return Ok(clamped_result(op, loads, params));
    }

    let pinned: Option<Vec<f64>> = match strategy {
        Strategy::B => Some(fractions.to_vec()),
        _ => None,
    };
    let problem = BarrierProblem::new(loads, pinned.as_deref(), params)?;

    // Warm start if usable, else the deterministic cold start.
    let warm_usable = cfg.warm_start
        && warm.is_some_and(|w| strategy_violation(strategy, w, loads, params) <= CONSTRAINT_TOL);
    let (hint_flow, hint_t, start_frac) = if warm_usable {
        let w = warm.unwrap();
        let f = match strategy {
            Strategy::B => fractions.to_vec(),
            _ => interior_fractions(&w.fractions, params),
        };
        (w.flow, w.t_sup, f)
    } else {
        let f = match strategy {
            Strategy::B => fractions.to_vec(),
            _ => interior_fractions(fractions, params),
        };
        (params.flow_nom, baseline_t_sup.min(params.t_sup_max), f)
    };
    let start_intensity = loads
        .q
        .iter()
        .zip(&start_frac)
        .map(|(&q, &f)| if q > 0.0 { q / f } else { 0.0 })
        .fold(0.0f64, f64::max);

    let Some(start) = interior_start(hint_flow, hint_t, start_frac, start_intensity, params) else {
        // No strict interior reachable: feasible set is degenerate-thin.
        let op = OperatingPoint::new(params.flow_max, params.t_sup_min, best_fractions);
        return Ok(clamped_result(op, loads, params));
    };

    match problem.solve(&start, cfg)? {
        BarrierOutcome::Converged { op, iterations } => {
            let power = total_power(&op, loads, params)?;
            let max_ret = max_return_temp(&op, loads, params);
            debug_assert!(strategy_violation(strategy, &op, loads, params) <= CONSTRAINT_TOL);
            Ok(SolveResult {
                op,
                power,
                status: SolveStatus::Converged,
                iterations,
                max_return_temp: max_ret,
            })
        }
        BarrierOutcome::IterLimit { op, iterations } => {
            let op = match warm {
                Some(w) => w.clone(),
                None => op,
            };
            let power = diagnostic_power(&op, loads, params);
            let max_ret = max_return_temp(&op, loads, params);
            Ok(SolveResult {
                op,
                power,
                status: SolveStatus::FallbackPrevious,
                iterations,
                max_return_temp: max_ret,
            })
        }
    }
}

/// [`solve_timestep`] cross-checked against the matching oracle: whichever
/// feasible point has lower power wins. This is the oracle-guarded mode used
/// by annual sweeps; the raw routes stay independent for verification.
pub fn solve_timestep_guarded(
    strategy: Strategy,
    loads: &SubloopLoads,
    fractions: &[f64],
    baseline_t_sup: f64,
    params: &PlantParams,
    warm: Option<&OperatingPoint>,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let primary = solve_timestep(
        strategy,
        loads,
        fractions,
        baseline_t_sup,
        params,
        warm,
        cfg,
    );

    let oracle_op = match strategy {
        Strategy::A => oracle_strategy_a(loads, fractions, baseline_t_sup, params),
        Strategy::B => oracle_reduced_1d(Strategy::B, loads, Some(fractions), params),
        Strategy::C => oracle_reduced_1d(Strategy::C, loads, None, params),
    };
    let oracle_result = oracle_op.and_then(|op| {
        let power = total_power(&op, loads, params)?;
        let max_ret = max_return_temp(&op, loads, params);
        Ok(SolveResult {
            op,
            power,
            status: SolveStatus::Converged,
            iterations: 0,
            max_return_temp: max_ret,
        })
    });

    match (primary, oracle_result) {
        (Ok(p), Ok(o)) => {
            let take_oracle = p.status != SolveStatus::Converged || o.power < p.power;
            Ok(if take_oracle {
                SolveResult {
                    iterations: p.iterations,
                    ..o
                }
            } else {
                p
            })
        }
        (Ok(p), Err(_)) => Ok(p),
        (Err(_), Ok(o)) => Ok(o),
        (Err(e), Err(_)) => Err(e),
    }
}
