//! Flow-fraction allocation rules shared by the strategies and oracles.

use super::SolverError;

/// Max-intensity-minimizing allocation over the fraction box and simplex:
/// `f_k = clamp(λ·w_k, f_min, f_max)` with λ chosen so Σf = 1 (water-filling).
///
/// For weights proportional to the loads this equalizes the per-subloop
/// thermal intensity Q_k/f_k wherever no bound binds, and it degrades
/// gracefully when bounds do bind. Weights may be loads (kW) or CDU counts;
/// only their ratios matter. Zero weights receive f_min.
pub fn waterfill_fractions(
    weights: &[f64],
    f_min: f64,
    f_max: f64,
) -> Result<Vec<f64>, SolverError> {
    let k = weights.len();
    if k == 0 {
        return Err(SolverError::InvalidFractions("no subloops".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(SolverError::InvalidFractions(
            "weights must be finite and non-negative".into(),
        ));
    }
    let kf = k as f64;
    if kf * f_min > 1.0 + 1e-12 || kf * f_max < 1.0 - 1e-12 {
        return Err(SolverError::FractionBoxInfeasible { k });
    }

    let w_max = weights.iter().fold(0.0f64, |a, &b| a.max(b));
    if w_max == 0.0 {
        return Ok(vec![1.0 / kf; k]);
    }
    // A tiny weight floor keeps zero-load subloops clamped at f_min while
    // guaranteeing Σf can reach 1 as λ grows.
    let floor = 1e-12 * w_max;
    let w: Vec<f64> = weights.iter().map(|&v| v.max(floor)).collect();

    let sum_at = |lambda: f64| -> f64 { w.iter().map(|&v| (lambda * v).clamp(f_min, f_max)).sum() };

    let mut lo = 0.0;
    let mut hi = f_max / w.iter().cloned().fold(f64::MAX, f64::min);
    debug_assert!(sum_at(hi) >= 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let lambda = hi;

    // Classify against the bisected λ, then rescale the free components so
    // the sum is exactly one.
    let mut f = vec![0.0; k];
    let mut clamped_sum = 0.0;
    let mut free_weight = 0.0;
    for (i, &v) in w.iter().enumerate() {
        let raw = lambda * v;
        if raw <= f_min {
            f[i] = f_min;
            clamped_sum += f_min;
        } else if raw >= f_max {
            f[i] = f_max;
            clamped_sum += f_max;
        } else {
            f[i] = f64::NAN; // free, filled below
            free_weight += v;
        }
    }
    if free_weight > 0.0 {
        let budget = 1.0 - clamped_sum;
        for (i, &v) in w.iter().enumerate() {
            if f[i].is_nan() {
                f[i] = (v * budget / free_weight).clamp(f_min, f_max);
            }
        }
    }
    // Residual fix-up: spread any leftover across components with box slack,
    // largest weight first. With a free set this is already ~1e-16.
    let mut residual = 1.0 - f.iter().sum::<f64>();
    if residual.abs() > 1e-15 {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
        for &i in &order {
            if residual.abs() <= 1e-15 {
                break;
            }
            let adjusted = (f[i] + residual).clamp(f_min, f_max);
            residual -= adjusted - f[i];
            f[i] = adjusted;
        }
    }
    Ok(f)
}

/// Pinned proportional fractions for a partition, projected into the box by
/// the same λ-scaling. Equals n_k/N whenever that already respects the box.
pub fn proportional_fractions(
    counts: &[usize],
    f_min: f64,
    f_max: f64,
) -> Result<Vec<f64>, SolverError> {
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    waterfill_fractions(&weights, f_min, f_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F_MIN: f64 = 0.05;
    const F_MAX: f64 = 0.95;

    fn max_intensity(q: &[f64], f: &[f64]) -> f64 {
        q.iter()
            .zip(f)
            .map(|(&q, &f)| q / f)
            .fold(f64::MIN, f64::max)
    }

    #[test]
    fn unconstrained_case_is_load_proportional() {
        let f = waterfill_fractions(&[4000.0, 3000.0], F_MIN, F_MAX).unwrap();
        assert!((f[0] - 4.0 / 7.0).abs() < 1e-12);
        assert!((f[1] - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_and_renormalizes_inside_box() {
        // Shares (0.92, 0.04, 0.04): plain clip-and-rescale would push the
        // small components back below f_min.
        let f = waterfill_fractions(&[9200.0, 400.0, 400.0], F_MIN, F_MAX).unwrap();
        assert!((f[0] - 0.90).abs() < 1e-9, "{f:?}");
        assert!((f[1] - 0.05).abs() < 1e-9);
        assert!((f[2] - 0.05).abs() < 1e-9);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_get_f_min() {
        let f = waterfill_fractions(&[100.0, 0.0, 100.0], F_MIN, F_MAX).unwrap();
        assert!((f[1] - F_MIN).abs() < 1e-12);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let f = waterfill_fractions(&[0.0, 0.0, 0.0, 0.0], F_MIN, F_MAX).unwrap();
        assert_eq!(f, vec![0.25; 4]);
    }

    #[test]
    fn proportional_projects_unit_parts() {
        let f = proportional_fractions(&[24, 1], F_MIN, F_MAX).unwrap();
        assert!((f[0] - 0.95).abs() < 1e-12, "{f:?}");
        assert!((f[1] - 0.05).abs() < 1e-12);
        let f = proportional_fractions(&[19, 6], F_MIN, F_MAX).unwrap();
        assert!((f[0] - 0.76).abs() < 1e-12);
        assert!((f[1] - 0.24).abs() < 1e-12);
    }

    #[test]
    fn rejects_impossible_boxes() {
        assert!(
            waterfill_fractions(&[1.0; 30], F_MIN, F_MAX).is_err(),
            "k*f_min > 1"
        );
        assert!(
            waterfill_fractions(&[1.0], F_MIN, F_MAX).is_err(),
            "k*f_max < 1"
        );
    }

    proptest! {
        #[test]
        fn waterfill_output_is_feasible(
            q in prop::collection::vec(0.0f64..5000.0, 2..=6),
        ) {
            let f = waterfill_fractions(&q, F_MIN, F_MAX).unwrap();
            prop_assert!((f.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for &v in &f {
                prop_assert!((F_MIN - 1e-12..=F_MAX + 1e-12).contains(&v));
            }
        }

        /// Water-filling minimizes max_k Q_k/f_k over the box∩simplex: no
        /// random feasible allocation beats it.
        #[test]
        fn waterfill_minimizes_max_intensity(
            q in prop::collection::vec(1.0f64..5000.0, 2..=6),
            raw in prop::collection::vec(0.05f64..1.0, 6),
        ) {
            let k = q.len();
            let f_star = waterfill_fractions(&q, F_MIN, F_MAX).unwrap();
            let best = max_intensity(&q, &f_star);

            // Random competitor: normalize raw weights, project into the box.
            let competitor = waterfill_fractions(&raw[..k], F_MIN, F_MAX).unwrap();
            prop_assert!(best <= max_intensity(&q, &competitor) + 1e-9 * best.abs());
        }
    }
}
