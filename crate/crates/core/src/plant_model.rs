//! Reduced-order plant physics: pump affinity law, cooling tower fan power,
//! and the per-subloop steady-state energy balance.
//!
//! All powers and heat rates are in kW, flows in kg/s, temperatures in °C.
//! Only temperature differences enter the physics, so no absolute-scale
//! conversion is needed. Every function here is pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on Σf_k = 1 for a valid operating point.
pub const FRACTION_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("flow must be non-negative, got {0}")]
    NegativeFlow(f64),
    #[error("supply temperature {t_sup} °C is at or below the approach base {base} °C")]
    ApproachDomain { t_sup: f64, base: f64 },
    #[error("subloop {k} has zero effective flow (f_k * flow = 0)")]
    ZeroSubloopFlow { k: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("invalid operating point: {0}")]
    InvalidOperatingPoint(String),
    #[error("invalid subloop loads: {0}")]
    InvalidLoads(String),
}

/// Calibrated plant constants and actuator bounds.
///
/// `Default` carries the calibrated values for the reference plant; any field
/// can be overridden through the JSON config (missing fields keep defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// Nominal aggregate pump power at `flow_nom`, kW.
    pub pump_power_nom: f64,
    /// Nominal total mass flow, kg/s.
    pub flow_nom: f64,
    /// Pump affinity-law exponent (cubic for variable-speed centrifugal pumps).
    pub pump_exponent: f64,
    /// Nominal cooling tower fan power, kW.
    pub ct_power_nom: f64,
    /// Nominal heat rejection rate, kW.
    pub q_rej_nom: f64,
    /// Nominal cooling tower approach, °C.
    pub approach_nom: f64,
    /// Offset subtracted from the supply setpoint to form the approach, °C.
    pub approach_base: f64,
    /// Coolant specific heat, J/(kg·K).
    pub cp: f64,
    /// Per-subloop return temperature limit, °C.
    pub t_limit: f64,
    /// Total flow lower bound, kg/s.
    pub flow_min: f64,
    /// Total flow upper bound, kg/s.
    pub flow_max: f64,
    /// Supply temperature lower bound, °C.
    pub t_sup_min: f64,
    /// Supply temperature upper bound, °C.
    pub t_sup_max: f64,
    /// Per-subloop flow fraction lower bound.
    pub f_min: f64,
    /// Per-subloop flow fraction upper bound.
    pub f_max: f64,
    /// Number of CDUs in the plant.
    pub n_cdus: usize,
    /// Telemetry timestep length, s.
    pub dt: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            pump_power_nom: 17.18,
            flow_nom: 190.0,
            pump_exponent: 3.0,
            ct_power_nom: 950.13,
            q_rej_nom: 9170.7,
            approach_nom: 4.0,
            approach_base: 23.5,
            cp: 3500.0,
            t_limit: 42.0,
            flow_min: 50.0,
            flow_max: 450.0,
            t_sup_min: 10.0,
            t_sup_max: 35.0,
            f_min: 0.05,
            f_max: 0.95,
            n_cdus: 25,
            dt: 600.0,
        }
    }
}

impl PlantParams {
    /// Checks the structural invariants of the parameter set.
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("pump_power_nom", self.pump_power_nom),
            ("flow_nom", self.flow_nom),
            ("ct_power_nom", self.ct_power_nom),
            ("q_rej_nom", self.q_rej_nom),
            ("approach_nom", self.approach_nom),
            ("cp", self.cp),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidParams(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(self.pump_exponent >= 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "pump_exponent must be >= 1, got {}",
                self.pump_exponent
            )));
        }
        if !(self.flow_min > 0.0 && self.flow_min < self.flow_nom && self.flow_nom < self.flow_max)
        {
            return Err(ModelError::InvalidParams(format!(
                "need 0 < flow_min < flow_nom < flow_max, got ({}, {}, {})",
                self.flow_min, self.flow_nom, self.flow_max
            )));
        }
        if !(self.t_sup_min < self.t_sup_max && self.t_sup_max < self.t_limit) {
            return Err(ModelError::InvalidParams(format!(
                "need t_sup_min < t_sup_max < t_limit, got ({}, {}, {})",
                self.t_sup_min, self.t_sup_max, self.t_limit
            )));
        }
        // The fan model must be evaluable somewhere inside the setpoint box.
        if !(self.t_sup_max > self.approach_base) {
            return Err(ModelError::InvalidParams(format!(
                "t_sup_max ({}) must exceed approach_base ({})",
                self.t_sup_max, self.approach_base
            )));
        }
        if !(0.0 < self.f_min && self.f_min < self.f_max && self.f_max < 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "need 0 < f_min < f_max < 1, got ({}, {})",
                self.f_min, self.f_max
            )));
        }
        if self.n_cdus < 2 {
            return Err(ModelError::InvalidParams(format!(
                "n_cdus must be >= 2, got {}",
                self.n_cdus
            )));
        }
        Ok(())
    }

    /// Largest subloop count the fraction box admits (Σf_k = 1 with f_k >= f_min).
    pub fn max_subloops(&self) -> usize {
        (1.0 / self.f_min).floor() as usize
    }
}

/// Decision variables of the per-timestep problem: total flow, supply
/// temperature setpoint, and the per-subloop flow split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Total mass flow, kg/s.
    pub flow: f64,
    /// Supply temperature setpoint, °C.
    pub t_sup: f64,
    /// Flow fractions f_1..f_K, summing to one.
    pub fractions: Vec<f64>,
}

impl OperatingPoint {
    pub fn new(flow: f64, t_sup: f64, fractions: Vec<f64>) -> Self {
        Self {
            flow,
            t_sup,
            fractions,
        }
    }

    /// Validates flow/temperature bounds, fraction positivity, and Σf = 1.
    ///
    /// The fraction box (f_min/f_max) is deliberately not checked here:
    /// pinned proportional splits for partitions with a unit-sized subloop
    /// fall outside it, and the box only binds where fractions are decision
    /// variables. Use [`constraint_residuals`](crate::solver::constraint_values)
    /// when the full constraint set matters.
    pub fn validate(&self, params: &PlantParams) -> Result<(), ModelError> {
        if self.fractions.is_empty() {
            return Err(ModelError::InvalidOperatingPoint(
                "fractions must be non-empty".into(),
            ));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > FRACTION_SUM_TOL {
            return Err(ModelError::InvalidOperatingPoint(format!(
                "fractions sum to {sum}, expected 1 within {FRACTION_SUM_TOL}"
            )));
        }
        if self.fractions.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(ModelError::InvalidOperatingPoint(
                "every fraction must be strictly positive and finite".into(),
            ));
        }
        if !(self.flow >= params.flow_min && self.flow <= params.flow_max) {
            return Err(ModelError::InvalidOperatingPoint(format!(
                "flow {} outside [{}, {}]",
                self.flow, params.flow_min, params.flow_max
            )));
        }
        if !(self.t_sup >= params.t_sup_min && self.t_sup <= params.t_sup_max) {
            return Err(ModelError::InvalidOperatingPoint(format!(
                "t_sup {} outside [{}, {}]",
                self.t_sup, params.t_sup_min, params.t_sup_max
            )));
        }
        Ok(())
    }

    /// True when every fraction lies inside [f_min, f_max].
    pub fn fractions_within_box(&self, params: &PlantParams) -> bool {
        self.fractions
            .iter()
            .all(|f| *f >= params.f_min && *f <= params.f_max)
    }
}

/// Per-subloop heat loads for one timestep, kW.
#[derive(Debug, Clone, PartialEq)]
pub struct SubloopLoads {
    /// Heat load per subloop, kW.
    pub q: Vec<f64>,
    /// Total heat load, kW.
    pub q_tot: f64,
}

impl SubloopLoads {
    /// Builds loads from per-subloop values, computing the total.
    pub fn from_loads(q: Vec<f64>) -> Result<Self, ModelError> {
        if q.is_empty() {
            return Err(ModelError::InvalidLoads("no subloops".into()));
        }
        if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::InvalidLoads(
                "loads must be finite and non-negative".into(),
            ));
        }
        let q_tot = q.iter().sum();
        Ok(Self { q, q_tot })
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }
}

/// Gradient of total plant power with respect to (flow, t_sup, f_1..f_K).
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    /// ∂P/∂ṁ, kW per kg/s.
    pub d_flow: f64,
    /// ∂P/∂T_sup, kW per °C.
    pub d_t_sup: f64,
    /// ∂P/∂f_k — identically zero; fractions enter only the constraints.
    pub d_fractions: Vec<f64>,
}

/// Aggregate pump power from the affinity law, kW.
pub fn pump_power(flow: f64, params: &PlantParams) -> Result<f64, ModelError> {
    if !(flow >= 0.0) {
        return Err(ModelError::NegativeFlow(flow));
    }
    Ok(params.pump_power_nom * (flow / params.flow_nom).powf(params.pump_exponent))
}

/// ∂P_pump/∂ṁ, kW per kg/s.
pub fn pump_power_flow_derivative(flow: f64, params: &PlantParams) -> f64 {
    params.pump_exponent
        * params.pump_power_nom
        * (flow / params.flow_nom).powf(params.pump_exponent - 1.0)
        / params.flow_nom
}

/// Cooling tower fan power for a given heat rejection rate and supply
/// setpoint, kW. The approach is `t_sup - approach_base` and must be positive.
pub fn ct_fan_power(q_rej: f64, t_sup: f64, params: &PlantParams) -> Result<f64, ModelError> {
    let approach = t_sup - params.approach_base;
    if !(approach > 0.0) {
        return Err(ModelError::ApproachDomain {
            t_sup,
            base: params.approach_base,
        });
    }
    Ok(params.ct_power_nom * (q_rej / params.q_rej_nom) * (params.approach_nom / approach))
}

/// ∂P_ct/∂T_sup, kW per °C (negative: a wider approach lowers fan duty).
pub fn ct_fan_power_t_sup_derivative(q_rej: f64, t_sup: f64, params: &PlantParams) -> f64 {
    let approach = t_sup - params.approach_base;
    -params.ct_power_nom * (q_rej / params.q_rej_nom) * params.approach_nom / (approach * approach)
}

/// Per-subloop return temperatures from the steady-state energy balance, °C.
///
/// Element k is `t_sup + Q_k·1000 / (f_k · flow · cp)` (loads are stored in
/// kW; the energy balance needs W).
pub fn subloop_return_temps(
    op: &OperatingPoint,
    loads: &SubloopLoads,
    params: &PlantParams,
) -> Result<Vec<f64>, ModelError> {
    if op.fractions.len() != loads.q.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} fractions vs {} subloop loads",
            op.fractions.len(),
            loads.q.len()
        )));
    }
    loads
        .q
        .iter()
        .zip(&op.fractions)
        .enumerate()
        .map(|(k, (&q_k, &f_k))| {
            let branch_flow = f_k * op.flow;
            if branch_flow == 0.0 {
                return Err(ModelError::ZeroSubloopFlow { k });
            }
            Ok(op.t_sup + q_k * 1000.0 / (branch_flow * params.cp))
        })
        .collect()
}

/// Total plant power: pump plus fan, kW. The fan sees the full timestep heat
/// load (`loads.q_tot`) as its rejection rate.
pub fn total_power(
    op: &OperatingPoint,
    loads: &SubloopLoads,
    params: &PlantParams,
) -> Result<f64, ModelError> {
    Ok(pump_power(op.flow, params)? + ct_fan_power(loads.q_tot, op.t_sup, params)?)
}

/// Analytic gradient of [`total_power`] over (flow, t_sup, f_1..f_K).
pub fn objective_gradient(
    op: &OperatingPoint,
    loads: &SubloopLoads,
    params: &PlantParams,
) -> Result<ObjectiveGradient, ModelError> {
    if !(op.flow >= 0.0) {
        return Err(ModelError::NegativeFlow(op.flow));
    }
    if !(op.t_sup > params.approach_base) {
        return Err(ModelError::ApproachDomain {
            t_sup: op.t_sup,
            base: params.approach_base,
        });
    }
    Ok(ObjectiveGradient {
        d_flow: pump_power_flow_derivative(op.flow, params),
        d_t_sup: ct_fan_power_t_sup_derivative(loads.q_tot, op.t_sup, params),
        d_fractions: vec![0.0; op.fractions.len()],
    })
}
