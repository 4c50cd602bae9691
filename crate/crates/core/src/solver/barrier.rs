//! Log-barrier interior-point Newton solver for the per-timestep problem.
//!
//! Variables are (flow, t_sup) plus, when fractions are free, f_1..f_{K-1}
//! with f_K eliminated through the mass balance. The subproblem is convex on
//! the fan model's domain: the pump and fan terms are convex and every slack
//! function is concave, so damped Newton on the barrier converges globally
//! and the path-followed minimum is unique in power.

// Indexed loops here walk several fixed-size arrays under one index.
#![allow(clippy::needless_range_loop)]

use crate::plant_model::{
    OperatingPoint, PlantParams, SubloopLoads, ct_fan_power, ct_fan_power_t_sup_derivative,
    pump_power, pump_power_flow_derivative,
};

use super::{SolverConfig, SolverError};

/// Largest subloop count the fraction box can admit (f_min ≥ 0.05 ⇒ K ≤ 20).
pub(super) const MAX_K: usize = 20;
const MAX_N: usize = MAX_K + 1;

const MU_INITIAL: f64 = 10.0;
const MU_SHRINK: f64 = 0.2;
const MAX_INNER_STEPS: usize = 50;
const ARMIJO: f64 = 1e-4;

type Vecn = [f64; MAX_N];
type Matn = [[f64; MAX_N]; MAX_N];

pub(super) struct BarrierProblem<'a> {
    k: usize,
    /// Variable count: 2 when fractions are pinned, 2 + (K-1) otherwise.
    n: usize,
    optimize_fractions: bool,
    /// Thermal rise coefficients Q_k·1000/cp, K·kg/s.
    rise: [f64; MAX_K],
    pinned: [f64; MAX_K],
    q_tot: f64,
    /// Fan coefficient P_ct,nom·(q_tot/Q_rej,nom)·ΔT_app,nom.
    c_q: f64,
    p: &'a PlantParams,
}

pub(super) enum BarrierOutcome {
    Converged {
        op: OperatingPoint,
        iterations: usize,
    },
    IterLimit {
        op: OperatingPoint,
        iterations: usize,
    },
}

impl<'a> BarrierProblem<'a> {
    pub(super) fn new(
        loads: &SubloopLoads,
        pinned_fractions: Option<&[f64]>,
        params: &'a PlantParams,
    ) -> Result<Self, SolverError> {
        let k = loads.k();
        if k > MAX_K {
            return Err(SolverError::FractionBoxInfeasible { k });
        }
        let mut rise = [0.0; MAX_K];
        for (r, &q) in rise.iter_mut().zip(&loads.q) {
            *r = q * 1000.0 / params.cp;
        }
        let mut pinned = [0.0; MAX_K];
        let optimize_fractions = pinned_fractions.is_none();
        if let Some(f) = pinned_fractions {
            if f.len() != k {
                return Err(SolverError::DimensionMismatch {
                    expected: k,
                    got: f.len(),
                });
            }
            pinned[..k].copy_from_slice(f);
        }
        Ok(Self {
            k,
            n: if optimize_fractions { 2 + k - 1 } else { 2 },
            optimize_fractions,
            rise,
            pinned,
            q_tot: loads.q_tot,
            c_q: params.ct_power_nom * (loads.q_tot / params.q_rej_nom) * params.approach_nom,
            p: params,
        })
    }

    fn fractions_of(&self, x: &Vecn, out: &mut [f64; MAX_K]) {
        if self.optimize_fractions {
            let mut sum = 0.0;
            for j in 0..self.k - 1 {
                out[j] = x[2 + j];
                sum += x[2 + j];
            }
            out[self.k - 1] = 1.0 - sum;
        } else {
            out[..self.k].copy_from_slice(&self.pinned[..self.k]);
        }
    }

    fn objective(&self, m: f64, t: f64) -> f64 {
        self.p.pump_power_nom * (m / self.p.flow_nom).powf(self.p.pump_exponent)
            + self.c_q / (t - self.p.approach_base)
    }

    /// Barrier value; `None` when any slack is non-positive or the fan model
    /// domain is violated.
    fn phi(&self, x: &Vecn, mu: f64) -> Option<f64> {
        let m = x[0];
        let t = x[1];
        let p = self.p;
        if !(t > p.approach_base) {
            return None;
        }
        let mut acc = self.objective(m, t);
        let mut add = |s: f64| -> bool {
            if s > 0.0 {
                acc -= mu * s.ln();
                true
            } else {
                false
            }
        };
        if !add(m - p.flow_min) || !add(p.flow_max - m) {
            return None;
        }
        if !add(t - p.t_sup_min) || !add(p.t_sup_max - t) {
            return None;
        }
        let mut f = [0.0; MAX_K];
        self.fractions_of(x, &mut f);
        if self.optimize_fractions {
            for &fk in &f[..self.k] {
                if !add(fk - p.f_min) || !add(p.f_max - fk) {
                    return None;
                }
            }
        }
        for kk in 0..self.k {
            let s = p.t_limit - t - self.rise[kk] / (f[kk] * m);
            if !add(s) {
                return None;
            }
        }
        acc.is_finite().then_some(acc)
    }

    /// Gradient and Hessian of the barrier at a strictly feasible point.
    fn grad_hess(&self, x: &Vecn, mu: f64, g: &mut Vecn, h: &mut Matn) {
        let p = self.p;
        let n = self.n;
        let m = x[0];
        let t = x[1];
        g.fill(0.0);
        for row in h.iter_mut() {
            row.fill(0.0);
        }

        // Objective: same analytic derivatives the public gradient exposes.
        g[0] = pump_power_flow_derivative(m, p);
        g[1] = ct_fan_power_t_sup_derivative(self.q_tot, t, p);
        let np = p.pump_exponent;
        h[0][0] = np * (np - 1.0) * p.pump_power_nom * (m / p.flow_nom).powf(np - 2.0)
            / (p.flow_nom * p.flow_nom);
        let approach = t - p.approach_base;
        h[1][1] = 2.0 * self.c_q / (approach * approach * approach);

        // Affine box slacks: -mu ln(s) adds mu/s^2 curvature on the diagonal.
        let mut box_term = |idx: usize, s: f64, sign: f64| {
            g[idx] += -mu * sign / s;
            h[idx][idx] += mu / (s * s);
        };
        box_term(0, m - p.flow_min, 1.0);
        box_term(0, p.flow_max - m, -1.0);
        box_term(1, t - p.t_sup_min, 1.0);
        box_term(1, p.t_sup_max - t, -1.0);

        let mut f = [0.0; MAX_K];
        self.fractions_of(x, &mut f);

        if self.optimize_fractions {
            for j in 0..self.k - 1 {
                box_term(2 + j, f[j] - p.f_min, 1.0);
                box_term(2 + j, p.f_max - f[j], -1.0);
            }
            // Eliminated fraction: s = f_K - f_min and s = f_max - f_K with
            // ∂f_K/∂x_j = -1 across the fraction block.
            let f_last = f[self.k - 1];
            for (s, sign) in [(f_last - p.f_min, -1.0), (p.f_max - f_last, 1.0)] {
                for j in 2..n {
                    g[j] += -mu * sign / s;
                    for i in 2..n {
                        h[j][i] += mu / (s * s);
                    }
                }
            }
        }

        // Thermal slacks s_k = t_limit - t - rise_k/(f_k m).
        let mut gs: Vecn = [0.0; MAX_N];
        for kk in 0..self.k {
            let fk = f[kk];
            let u = self.rise[kk] / (fk * m);
            let s = p.t_limit - t - u;

            gs.fill(0.0);
            gs[0] = u / m;
            gs[1] = -1.0;
            // ∂f_k/∂x_j: e_j for k < K-1, -1 over the block for k = K-1.
            let df = |j: usize| -> f64 {
                if !self.optimize_fractions {
                    return 0.0;
                }
                let jf = j - 2;
                if kk + 1 == self.k {
                    -1.0
                } else if jf == kk {
                    1.0
                } else {
                    0.0
                }
            };
            if self.optimize_fractions {
                for j in 2..n {
                    gs[j] = (u / fk) * df(j);
                }
            }

            // -mu ln(s): gradient -mu gs/s, Hessian mu (gs gsᵀ/s² - Hs/s).
            let inv_s = 1.0 / s;
            for j in 0..n {
                if gs[j] != 0.0 {
                    g[j] += -mu * gs[j] * inv_s;
                }
            }
            let w_outer = mu * inv_s * inv_s;
            let w_curv = mu * inv_s;
            for j in 0..n {
                if gs[j] == 0.0 {
                    continue;
                }
                for i in 0..n {
                    if gs[i] != 0.0 {
                        h[j][i] += w_outer * gs[j] * gs[i];
                    }
                }
            }
            // Hs entries: d²s/dm² = -2u/m², d²s/dm df = -u/(m f)·df,
            // d²s/df df = -2u/f²·df_i·df_j.
            h[0][0] += w_curv * 2.0 * u / (m * m);
            if self.optimize_fractions {
                for j in 2..n {
                    let dj = df(j);
                    if dj == 0.0 {
                        continue;
                    }
                    let cross = w_curv * u / (m * fk) * dj;
                    h[0][j] += cross;
                    h[j][0] += cross;
                    for i in 2..n {
                        let di = df(i);
                        if di != 0.0 {
                            h[j][i] += w_curv * 2.0 * u / (fk * fk) * dj * di;
                        }
                    }
                }
            }
        }
    }

    fn operating_point(&self, x: &Vecn) -> OperatingPoint {
        let mut f = [0.0; MAX_K];
        self.fractions_of(x, &mut f);
        OperatingPoint::new(x[0], x[1], f[..self.k].to_vec())
    }

    /// Damped-Newton path following from a strictly feasible start.
    pub(super) fn solve(
        &self,
        start: &OperatingPoint,
        cfg: &SolverConfig,
    ) -> Result<BarrierOutcome, SolverError> {
        let mut x: Vecn = [0.0; MAX_N];
        x[0] = start.flow;
        x[1] = start.t_sup;
        if self.optimize_fractions {
            x[2..1 + self.k].copy_from_slice(&start.fractions[..self.k - 1]);
        }
        if self.phi(&x, MU_INITIAL).is_none() {
            return Err(SolverError::InteriorStart(
                "start point is not strictly feasible".into(),
            ));
        }

        let mu_final = (cfg.ftol * 0.1).clamp(1e-12, 1.0);
        let mut mu = MU_INITIAL;
        let mut iterations = 0usize;
        let mut g: Vecn = [0.0; MAX_N];
        let mut h: Matn = [[0.0; MAX_N]; MAX_N];

        loop {
            for _ in 0..MAX_INNER_STEPS {
                self.grad_hess(&x, mu, &mut g, &mut h);
                let Some(d) = newton_direction(&h, &g, self.n) else {
                    break;
                };
                let slope: f64 = (0..self.n).map(|i| g[i] * d[i]).sum();
                // Newton decrement²/2 below the stage tolerance: centered.
                if -slope * 0.5 <= (0.1 * mu).max(1e-14) {
                    break;
                }
                if iterations >= cfg.max_iter {
                    return Ok(BarrierOutcome::IterLimit {
                        op: self.operating_point(&x),
                        iterations,
                    });
                }

                let phi0 = self.phi(&x, mu).expect("iterate stays feasible");
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..60 {
                    let mut xt = x;
                    for i in 0..self.n {
                        xt[i] += alpha * d[i];
                    }
                    if let Some(phi1) = self.phi(&xt, mu)
                        && phi1 <= phi0 + ARMIJO * alpha * slope
                    {
                        x = xt;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                iterations += 1;
                if !accepted {
                    break;
                }
            }
            if mu <= mu_final {
                break;
            }
            mu = (mu * MU_SHRINK).max(mu_final);
        }

        Ok(BarrierOutcome::Converged {
            op: self.operating_point(&x),
            iterations,
        })
    }
}

/// Solves H d = -g by Gaussian elimination with partial pivoting, adding a
/// Levenberg shift when the system is numerically singular.
fn newton_direction(h: &Matn, g: &Vecn, n: usize) -> Option<Vecn> {
    let mut shift = 0.0;
    let max_diag = (0..n).map(|i| h[i][i].abs()).fold(0.0f64, f64::max);
    for _ in 0..20 {
        if let Some(d) = solve_lu(h, g, n, shift) {
            return Some(d);
        }
        shift = if shift == 0.0 {
            1e-10 * max_diag.max(1.0)
        } else {
            shift * 100.0
        };
    }
    None
}

fn solve_lu(h: &Matn, g: &Vecn, n: usize, shift: f64) -> Option<Vecn> {
    let mut a = [[0.0f64; MAX_N + 1]; MAX_N];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = h[i][j];
        }
        a[i][i] += shift;
        a[i][n] = -g[i];
    }
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for j in col..=n {
                a[row][j] -= factor * a[col][j];
            }
        }
    }
    let mut d: Vecn = [0.0; MAX_N];
    for col in (0..n).rev() {
        let mut v = a[col][n];
        for j in col + 1..n {
            v -= a[col][j] * d[j];
        }
        d[col] = v / a[col][col];
        if !d[col].is_finite() {
            return None;
        }
    }
    Some(d)
}

/// Diagnostic power that stays defined outside the fan-model domain: equals
/// the true total power whenever the supply setpoint is evaluable, and falls
/// back to the nominal-approach fan duty below it (clamped-infeasible points).
pub(super) fn diagnostic_power(
    op: &OperatingPoint,
    loads: &SubloopLoads,
    params: &PlantParams,
) -> f64 {
    let t_eval = if op.t_sup > params.approach_base {
        op.t_sup
    } else {
        params.approach_base + params.approach_nom
    };
    pump_power(op.flow.max(0.0), params).unwrap_or(f64::INFINITY)
        + ct_fan_power(loads.q_tot, t_eval, params).unwrap_or(f64::INFINITY)
}
