//! Independent verification oracles for the per-timestep solves.
//!
//! These exploit problem structure the main solver never assumes: fan power
//! is strictly decreasing in the supply setpoint, so the thermal constraint
//! (or the setpoint ceiling) binds at the optimum, collapsing the problem to
//! one dimension in total flow.

use crate::plant_model::{OperatingPoint, PlantParams, SubloopLoads, ct_fan_power, pump_power};

use super::fractions::waterfill_fractions;
use super::{SolverError, Strategy};

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`,
/// run to bracket width `tol_x`. Returns `(x_min, f_min)`.
pub(super) fn golden_section_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol_x: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    if b - a <= tol_x {
        let x = 0.5 * (a + b);
        return (x, f(x));
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol_x {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 { (x1, f1) } else { (x2, f2) }
}

/// Closed-form flow-only optimum: the minimum total flow keeping every
/// subloop return temperature at or below the limit with the supply setpoint
/// pinned at the measured baseline.
///
/// Errors with [`SolverError::Infeasible`] when the baseline setpoint leaves
/// no thermal headroom or the required flow exceeds the flow ceiling.
pub fn oracle_strategy_a(
    loads: &SubloopLoads,
    fractions: &[f64],
    baseline_t_sup: f64,
    params: &PlantParams,
) -> Result<OperatingPoint, SolverError> {
    if fractions.len() != loads.k() {
        return Err(SolverError::DimensionMismatch {
            expected: loads.k(),
            got: fractions.len(),
        });
    }
    let headroom = params.t_limit - baseline_t_sup;
    if headroom <= 0.0 {
        return Err(SolverError::Infeasible);
    }
    let mut required: f64 = 0.0;
    for (&q, &f) in loads.q.iter().zip(fractions) {
        if q > 0.0 && f <= 0.0 {
            return Err(SolverError::InvalidFractions(
                "loaded subloop with non-positive fraction".into(),
            ));
        }
        if q > 0.0 {
            required = required.max(q * 1000.0 / (f * params.cp * headroom));
        }
    }
    if required > params.flow_max {
        return Err(SolverError::Infeasible);
    }
    let flow = required.clamp(params.flow_min, params.flow_max);
    Ok(OperatingPoint::new(
        flow,
        baseline_t_sup,
        fractions.to_vec(),
    ))
}

/// One-dimensional reduction oracle for Strategies B and C.
///
/// The effective intensity is max_k Q_k/f_k with f pinned (B) or set by the
/// max-intensity-minimizing water-filling allocation (C). For each flow the
/// best admissible setpoint is `min(T_limit − rise, t_sup_max)`, leaving a
/// unimodal 1-D power curve minimized by golden-section search to a bracket
/// width of 1e-6 kg/s.
pub fn oracle_reduced_1d(
    strategy: Strategy,
    loads: &SubloopLoads,
    fractions: Option<&[f64]>,
    params: &PlantParams,
) -> Result<OperatingPoint, SolverError> {
    if loads.q_tot <= 0.0 {
        return Err(SolverError::NonPositiveLoad(loads.q_tot));
    }
    let f: Vec<f64> = match strategy {
        Strategy::B => {
            let f = fractions.ok_or(SolverError::MissingFractions)?;
            if f.len() != loads.k() {
                return Err(SolverError::DimensionMismatch {
                    expected: loads.k(),
                    got: f.len(),
                });
            }
            f.to_vec()
        }
        Strategy::C => waterfill_fractions(&loads.q, params.f_min, params.f_max)?,
        Strategy::A => {
            return Err(SolverError::InvalidFractions(
                "the 1-D reduction applies to strategies B and C".into(),
            ));
        }
    };

    let mut intensity: f64 = 0.0;
    for (&q, &fk) in loads.q.iter().zip(&f) {
        if q > 0.0 {
            if fk <= 0.0 {
                return Err(SolverError::InvalidFractions(
                    "loaded subloop with non-positive fraction".into(),
                ));
            }
            intensity = intensity.max(q / fk);
        }
    }

    // Below this flow the admissible setpoint would drop under its floor.
    let m_lo = params
        .flow_min
        .max(intensity * 1000.0 / (params.cp * (params.t_limit - params.t_sup_min)));
    if m_lo > params.flow_max {
        return Err(SolverError::Infeasible);
    }

    let t_of = |m: f64| -> f64 {
        (params.t_limit - intensity * 1000.0 / (m * params.cp)).min(params.t_sup_max)
    };
    let power_of = |m: f64| -> f64 {
        let t = t_of(m);
        if t <= params.approach_base {
            return f64::INFINITY;
        }
        pump_power(m, params).unwrap() + ct_fan_power(loads.q_tot, t, params).unwrap()
    };

    let (m_star, p_star) = golden_section_min(power_of, m_lo, params.flow_max, 1e-6);
    if !p_star.is_finite() {
        return Err(SolverError::Infeasible);
    }
    Ok(OperatingPoint::new(m_star, t_of(m_star), f))
}
