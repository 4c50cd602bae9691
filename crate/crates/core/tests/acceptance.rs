//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them; the per-test ok/FAILED
//! lines carry the same verdicts).
//!
//! The plant-scale reference dataset is optional: criterion 13 runs only
//! when `COOLSWEEP_FRONTIER_CSV` points at a file in the canonical schema,
//! and reports SKIP otherwise.

use std::sync::LazyLock;
use std::time::Instant;

use coolsweep_core::plant_model::{
    OperatingPoint, PlantParams, SubloopLoads, ct_fan_power, objective_gradient, pump_power,
    subloop_return_temps, total_power,
};
use coolsweep_core::solver::{
    SolveStatus, SolverConfig, Strategy, oracle_reduced_1d, oracle_strategy_a,
    proportional_fractions, solve_timestep,
};
use coolsweep_core::sweep::{
    AssignmentPolicy, EvalSpec, FractionMode, SweepGrid, SweepOptions, SweepResult,
    evaluate_partition, report, run_sweep,
};
use coolsweep_core::telemetry::{Dataset, generate_synthetic, read_dataset};
use coolsweep_core::topology::{Partition, enumerate_partitions};

fn params() -> PlantParams {
    PlantParams::default()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Deterministic test RNG (SplitMix64).
struct Rng(u64);

impl Rng {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * u
    }
}

/// Random feasible timestep: K in 2..=6, per-CDU-style spread up to 40%,
/// proportional fractions from a random partition of 25.
fn random_timestep(rng: &mut Rng) -> (SubloopLoads, Vec<f64>, f64) {
    let k = 2 + (rng.next_u64() % 5) as usize;
    let all = enumerate_partitions(25, k);
    let partition = &all[(rng.next_u64() % all.len() as u64) as usize];
    let p = params();
    let fractions = proportional_fractions(partition.counts(), p.f_min, p.f_max).unwrap();

    let spread = rng.uniform(0.0, 0.4);
    let q_tot = rng.uniform(3000.0, 9000.0);
    // Linearly spaced per-CDU base loads with noise, summed per subloop.
    let n = 25usize;
    let mut cdu = Vec::with_capacity(n);
    for j in 0..n {
        let base = 1.0 + spread * j as f64 / (n - 1) as f64;
        cdu.push(base * rng.uniform(0.95, 1.05));
    }
    let total: f64 = cdu.iter().sum();
    cdu.iter_mut().for_each(|v| *v *= q_tot / total);

    let mut q = vec![0.0; k];
    let mut idx = 0usize;
    for (s, &count) in partition.counts().iter().enumerate() {
        for _ in 0..count {
            q[s] += cdu[idx];
            idx += 1;
        }
    }
    let loads = SubloopLoads::from_loads(q).unwrap();
    let baseline_t_sup = rng.uniform(26.0, 33.0);
    (loads, fractions, baseline_t_sup)
}

static YEAR: LazyLock<Dataset> =
    LazyLock::new(|| generate_synthetic(1000, 25, 0.24, 7, &params()).unwrap());

static ALL_PARTITIONS: LazyLock<Vec<Partition>> = LazyLock::new(|| {
    let mut v = Vec::new();
    for k in 2..=6 {
        v.extend(enumerate_partitions(25, k));
    }
    v
});

/// Shared full design-space sweep over the synthetic year with the
/// oracle-guarded solver (criteria 5–8 and 10 read from it).
static FULL_SWEEP: LazyLock<SweepResult> = LazyLock::new(|| {
    let cfg = SolverConfig {
        oracle_guard: true,
        ..SolverConfig::default()
    };
    run_sweep(
        &ALL_PARTITIONS,
        &YEAR,
        &params(),
        &cfg,
        &SweepGrid::default(),
        &SweepOptions::default(),
    )
    .unwrap()
});

#[test]
fn c01_partition_space_exactness() {
    let started = Instant::now();
    let expected = [(2usize, 12usize), (3, 52), (4, 120), (5, 192), (6, 235)];
    let mut total = 0usize;
    for (k, count) in expected {
        let parts = enumerate_partitions(25, k);
        assert_eq!(parts.len(), count, "cardinality for K={k}");
        assert_eq!(
            parts.len(),
            brute_force_count(25, k),
            "brute-force oracle disagrees for K={k}"
        );
        for p in &parts {
            assert_eq!(p.total(), 25);
            assert!(p.counts().windows(2).all(|w| w[0] >= w[1]));
        }
        total += parts.len();
    }
    assert_eq!(total, 611);
    assert!(
        started.elapsed().as_secs_f64() < 1.0,
        "enumeration took {:?}",
        started.elapsed()
    );
    println!("criterion 01 partition-space exactness: PASS");
}

fn brute_force_count(n: usize, k: usize) -> usize {
    // p(n, k) = p(n-1, k-1) + p(n-k, k), checked independently of the
    // enumerator's recursion structure.
    fn p(n: i64, k: i64) -> usize {
        if k <= 0 || n < k {
            return 0;
        }
        if k == 1 {
            return 1;
        }
        p(n - 1, k - 1) + p(n - k, k)
    }
    p(n as i64, k as i64)
}

#[test]
fn c02_physics_unit_checks() {
    let p = params();
    assert_eq!(pump_power(190.0, &p).unwrap(), 17.18);
    assert_eq!(ct_fan_power(9170.7, 27.5, &p).unwrap(), 950.13);

    let op = OperatingPoint::new(190.0, 30.0, vec![0.5, 0.5]);
    let loads = SubloopLoads::from_loads(vec![1000.0, 1000.0]).unwrap();
    let temps = subloop_return_temps(&op, &loads, &p).unwrap();
    let rise = 1_000_000.0 / (0.5 * 190.0 * 3500.0);
    for t in temps {
        assert!(rel_diff(t - 30.0, rise) <= 1e-9, "rise {t}");
    }
    let op = OperatingPoint::new(190.0, 30.0, vec![0.75, 0.25]);
    let loads = SubloopLoads::from_loads(vec![1500.0, 500.0]).unwrap();
    let temps = subloop_return_temps(&op, &loads, &p).unwrap();
    assert!(rel_diff(temps[0] - 30.0, rise) <= 1e-9);
    assert!(rel_diff(temps[1] - 30.0, rise) <= 1e-9);
    println!("criterion 02 physics unit checks: PASS");
}

#[test]
fn c03_gradient_correctness() {
    let p = params();
    let mut rng = Rng(303);
    let step = 1e-4;
    let mut checked = 0usize;
    while checked < 120 {
        let k = 2 + (rng.next_u64() % 5) as usize;
        let mut q = Vec::with_capacity(k);
        for _ in 0..k {
            q.push(rng.uniform(100.0, 3000.0));
        }
        let loads = SubloopLoads::from_loads(q).unwrap();
        let mut fr = Vec::with_capacity(k);
        for _ in 0..k {
            fr.push(rng.uniform(0.1, 1.0));
        }
        let sum: f64 = fr.iter().sum();
        fr.iter_mut().for_each(|f| *f /= sum);
        let op = OperatingPoint::new(
            rng.uniform(55.0, 445.0),
            rng.uniform(24.5, 34.9),
            fr.clone(),
        );

        let g = objective_gradient(&op, &loads, &p).unwrap();
        let eval = |flow: f64, t_sup: f64| {
            total_power(&OperatingPoint::new(flow, t_sup, fr.clone()), &loads, &p).unwrap()
        };
        let fd_flow =
            (eval(op.flow + step, op.t_sup) - eval(op.flow - step, op.t_sup)) / (2.0 * step);
        let fd_t = (eval(op.flow, op.t_sup + step) - eval(op.flow, op.t_sup - step)) / (2.0 * step);
        assert!(
            rel_diff(g.d_flow, fd_flow) <= 1e-5,
            "flow gradient {} vs fd {}",
            g.d_flow,
            fd_flow
        );
        assert!(
            rel_diff(g.d_t_sup, fd_t) <= 1e-5,
            "t_sup gradient {} vs fd {}",
            g.d_t_sup,
            fd_t
        );
        assert!(g.d_fractions.iter().all(|&v| v == 0.0));
        checked += 1;
    }
    println!("criterion 03 gradient correctness: PASS ({checked} points)");
}

#[test]
fn c04_solver_oracle_equivalence_and_speed() {
    let p = params();
    let cfg = SolverConfig::default();
    let mut rng = Rng(404);
    let n_cases = 1000usize;
    let mut solve_time = 0.0f64;
    let mut solves = 0usize;
    for _ in 0..n_cases {
        let (loads, fractions, baseline) = random_timestep(&mut rng);

        let t0 = Instant::now();
        let a = solve_timestep(Strategy::A, &loads, &fractions, baseline, &p, None, &cfg).unwrap();
        let b = solve_timestep(Strategy::B, &loads, &fractions, baseline, &p, None, &cfg).unwrap();
        let c = solve_timestep(Strategy::C, &loads, &fractions, baseline, &p, None, &cfg).unwrap();
        solve_time += t0.elapsed().as_secs_f64();
        solves += 3;

        assert_eq!(a.status, SolveStatus::Converged);
        assert_eq!(b.status, SolveStatus::Converged);
        assert_eq!(c.status, SolveStatus::Converged);

        let oa = oracle_strategy_a(&loads, &fractions, baseline, &p).unwrap();
        let ob = oracle_reduced_1d(Strategy::B, &loads, Some(&fractions), &p).unwrap();
        let oc = oracle_reduced_1d(Strategy::C, &loads, None, &p).unwrap();
        let pa = total_power(&oa, &loads, &p).unwrap();
        let pb = total_power(&ob, &loads, &p).unwrap();
        let pc = total_power(&oc, &loads, &p).unwrap();
        assert!(rel_diff(a.power, pa) <= 1e-6, "A {} vs {}", a.power, pa);
        assert!(rel_diff(b.power, pb) <= 1e-6, "B {} vs {}", b.power, pb);
        assert!(rel_diff(c.power, pc) <= 1e-6, "C {} vs {}", c.power, pc);
    }
    let avg_ms = solve_time * 1000.0 / solves as f64;
    assert!(avg_ms <= 50.0, "average solve took {avg_ms:.3} ms");
    println!(
        "criterion 04 solver-oracle equivalence: PASS ({n_cases} timesteps, avg {avg_ms:.3} ms/solve)"
    );
}

#[test]
fn c05_nesting_property() {
    let p = params();
    let cfg = SolverConfig::default();
    let mut rng = Rng(404); // same suite as criterion 4
    for _ in 0..1000 {
        let (loads, fractions, baseline) = random_timestep(&mut rng);
        let a = solve_timestep(Strategy::A, &loads, &fractions, baseline, &p, None, &cfg).unwrap();
        let b = solve_timestep(Strategy::B, &loads, &fractions, baseline, &p, None, &cfg).unwrap();
        let c = solve_timestep(Strategy::C, &loads, &fractions, baseline, &p, None, &cfg).unwrap();
        assert!(
            a.power >= b.power * (1.0 - 1e-6),
            "A {} < B {}",
            a.power,
            b.power
        );
        assert!(
            b.power >= c.power * (1.0 - 1e-6),
            "B {} < C {}",
            b.power,
            c.power
        );
    }

    // Annual nesting over the full sweep.
    let sweep = &*FULL_SWEEP;
    for partition in sweep.partitions() {
        for assignment in [AssignmentPolicy::Balanced, AssignmentPolicy::WorstCase] {
            let s_a = sweep
                .lookup(
                    &partition,
                    assignment,
                    Strategy::A,
                    FractionMode::Proportional,
                    0.0,
                )
                .unwrap()
                .savings_fraction;
            let s_b = sweep
                .lookup(
                    &partition,
                    assignment,
                    Strategy::B,
                    FractionMode::Proportional,
                    0.0,
                )
                .unwrap()
                .savings_fraction;
            let s_c = sweep
                .lookup(
                    &partition,
                    assignment,
                    Strategy::C,
                    FractionMode::Optimized,
                    0.0,
                )
                .unwrap()
                .savings_fraction;
            assert!(
                s_a <= s_b + 1e-6,
                "{partition} {assignment:?}: {s_a} > {s_b}"
            );
            assert!(
                s_b <= s_c + 1e-6,
                "{partition} {assignment:?}: {s_b} > {s_c}"
            );
        }
    }
    println!("criterion 05 nesting property: PASS");
}

#[test]
fn c06_constraint_safety() {
    let sweep = &*FULL_SWEEP;
    assert!(sweep.failures.is_empty(), "{:?}", sweep.failures);
    let mut worst = 0.0f64;
    for (spec, r) in &sweep.cells {
        assert!(
            r.max_violation <= 1e-6,
            "violation {} in cell {spec}",
            r.max_violation
        );
        worst = worst.max(r.max_violation);
    }
    println!("criterion 06 constraint safety: PASS (worst converged violation {worst:.2e})");
}

#[test]
fn c07_monotone_k_and_distribution_width() {
    let sweep = &*FULL_SWEEP;
    let mut best = Vec::new();
    let mut range = Vec::new();
    for k in 2..=6usize {
        let pool: Vec<f64> = sweep
            .cells
            .iter()
            .filter(|(s, _)| {
                s.partition.k() == k
                    && s.assignment == AssignmentPolicy::Balanced
                    && s.strategy == Strategy::C
                    && s.fraction_mode == FractionMode::Optimized
                    && s.alpha == 0.0
            })
            .map(|(_, r)| r.savings_fraction)
            .collect();
        assert!(!pool.is_empty());
        let hi = pool.iter().cloned().fold(f64::MIN, f64::max);
        let lo = pool.iter().cloned().fold(f64::MAX, f64::min);
        best.push(hi);
        range.push(hi - lo);
    }
    for w in best.windows(2) {
        assert!(
            w[1] <= w[0] + 0.001,
            "best-per-K savings increased beyond tolerance: {best:?}"
        );
    }
    for w in range.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-9,
            "within-K savings range must grow with K: {range:?}"
        );
    }
    assert!(
        range[4] > range[0],
        "range at K=6 must exceed range at K=2: {range:?}"
    );
    println!(
        "criterion 07 monotone-K trend: PASS (best {:?}, ranges {:?})",
        best.iter()
            .map(|v| (v * 1e4).round() / 1e2)
            .collect::<Vec<_>>(),
        range
            .iter()
            .map(|v| (v * 1e4).round() / 1e2)
            .collect::<Vec<_>>()
    );
}

#[test]
fn c08_assignment_gap_collapse() {
    let sweep = &*FULL_SWEEP;
    let fixed = sweep.assignment_gap(FractionMode::Proportional);
    let optimized = sweep.assignment_gap(FractionMode::Optimized);

    for (p, gap) in &optimized.per_partition {
        assert!(
            gap.abs() <= 0.003,
            "optimized-fraction gap {gap} too large for {p}"
        );
    }
    for k in 2..=6usize {
        let mean_abs = |table: &coolsweep_core::sweep::AssignmentGapTable| {
            let gaps: Vec<f64> = table
                .per_partition
                .iter()
                .filter(|(p, _)| p.k() == k)
                .map(|(_, g)| g.abs())
                .collect();
            gaps.iter().sum::<f64>() / gaps.len() as f64
        };
        let fixed_mean = mean_abs(&fixed);
        let opt_mean = mean_abs(&optimized);
        assert!(
            fixed_mean >= 5.0 * opt_mean,
            "K={k}: fixed mean gap {fixed_mean} not 5x optimized {opt_mean}"
        );
    }
    println!("criterion 08 assignment-gap collapse: PASS");
}

#[test]
fn c09_equalization_sensitivity() {
    let p = params();
    let cfg = SolverConfig {
        oracle_guard: true,
        ..SolverConfig::default()
    };
    let partition = Partition::new(vec![19, 6]).unwrap();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut fixed = Vec::new();
    let mut optimized = Vec::new();
    for &alpha in &grid {
        let pinned = EvalSpec::new(
            partition.clone(),
            AssignmentPolicy::Balanced,
            Strategy::B,
            FractionMode::Proportional,
            alpha,
        )
        .unwrap();
        fixed.push(
            evaluate_partition(&pinned, &YEAR, &p, &cfg)
                .unwrap()
                .savings_fraction,
        );
        let opt = EvalSpec::new(
            partition.clone(),
            AssignmentPolicy::Balanced,
            Strategy::C,
            FractionMode::Optimized,
            alpha,
        )
        .unwrap();
        optimized.push(
            evaluate_partition(&opt, &YEAR, &p, &cfg)
                .unwrap()
                .savings_fraction,
        );
    }
    for w in fixed.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-3,
            "fixed-fraction savings must be non-decreasing in alpha: {fixed:?}"
        );
    }
    let hi = optimized.iter().cloned().fold(f64::MIN, f64::max);
    let lo = optimized.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        hi - lo < 0.01,
        "optimized-fraction savings varied by {} across alpha",
        hi - lo
    );
    println!(
        "criterion 09 equalization sensitivity: PASS (fixed {:.2}%..{:.2}%, optimized variation {:.2e})",
        fixed[0] * 100.0,
        fixed[4] * 100.0,
        hi - lo
    );
}

#[test]
fn c10_recovery_ratio() {
    let sweep = &*FULL_SWEEP;
    let ratios: Vec<f64> = sweep
        .recovery_ratios()
        .into_iter()
        .map(|(p, r)| r.unwrap_or_else(|| panic!("recovery undefined for {p}")))
        .collect();
    assert_eq!(ratios.len(), 611);
    let below = ratios.iter().filter(|&&r| r < 1.0 - 1e-4).count();
    assert_eq!(below, 0, "{below} partitions below the recovery threshold");
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    assert!(median >= 1.0, "median recovery {median}");
    println!(
        "criterion 10 recovery ratio: PASS (min {:.6}, median {median:.4})",
        sorted[0]
    );
}

#[test]
fn c11_determinism_across_workers_and_resume() {
    let p = params();
    // Full design space on a shorter horizon keeps the three-way comparison
    // inside the suite's time budget; determinism is horizon-independent.
    let dataset = generate_synthetic(60, 25, 0.24, 7, &p).unwrap();
    let cfg = SolverConfig::default();
    let grid = SweepGrid::default();
    let run = |workers: usize, cache: Option<&std::collections::HashMap<String, _>>| {
        run_sweep(
            &ALL_PARTITIONS,
            &dataset,
            &p,
            &cfg,
            &grid,
            &SweepOptions {
                workers,
                cache,
                ..SweepOptions::default()
            },
        )
        .unwrap()
    };
    let one = run(1, None);
    let four = run(4, None);
    let thirty_two = run(32, None);
    assert_eq!(one.cells, four.cells);
    assert_eq!(one.cells, thirty_two.cells);
    assert_eq!(report::long_csv(&one), report::long_csv(&four));
    assert_eq!(report::long_csv(&one), report::long_csv(&thirty_two));

    // Resume from a half-complete cache.
    let partial: Vec<_> = one
        .cells
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 0)
        .map(|(_, c)| c.clone())
        .collect();
    let cache = report::cache_from_str(&report::cache_to_string(&partial));
    let resumed = run(4, Some(&cache));
    assert_eq!(one.cells, resumed.cells);
    assert_eq!(report::long_csv(&one), report::long_csv(&resumed));
    println!("criterion 11 determinism: PASS (workers 1/4/32 and resume bit-identical)");
}

#[test]
fn c12_desk_scale_runtime() {
    let p = params();
    let cfg = SolverConfig {
        oracle_guard: true,
        ..SolverConfig::default()
    };
    let grid = SweepGrid {
        strategies: vec![Strategy::C],
        assignments: vec![AssignmentPolicy::Balanced],
        fraction_modes: vec![FractionMode::Proportional, FractionMode::Optimized],
        alpha_grid: vec![0.0],
    };
    let started = Instant::now();
    let result = run_sweep(
        &ALL_PARTITIONS,
        &YEAR,
        &p,
        &cfg,
        &grid,
        &SweepOptions::default(),
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(result.cells.len(), 611 * 2);
    assert!(result.failures.is_empty());
    assert!(
        elapsed <= 1800.0,
        "611-partition strategy C sweep took {elapsed:.0} s"
    );
    println!(
        "criterion 12 desk-scale runtime: PASS ({elapsed:.1} s for 611 partitions x 1000 steps)"
    );
}

#[test]
fn c13_reference_dataset_reproduction() {
    let Ok(path) = std::env::var("COOLSWEEP_FRONTIER_CSV") else {
        println!(
            "criterion 13 reference-dataset reproduction: SKIP \
             (set COOLSWEEP_FRONTIER_CSV to the converted telemetry CSV to enable)"
        );
        return;
    };
    let p = params();
    let outcome = read_dataset(&path, &p).expect("reference dataset must parse");
    let dataset = outcome.dataset;

    let baseline = coolsweep_core::sweep::baseline_energy(&dataset, &p).unwrap();
    assert!(
        rel_diff(baseline.pump_kwh, 488_857.0) <= 1e-3,
        "pump share {} kWh",
        baseline.pump_kwh
    );
    assert!(
        rel_diff(baseline.fan_kwh, 1_324_797.0) <= 1e-3,
        "fan share {} kWh",
        baseline.fan_kwh
    );

    let cfg = SolverConfig {
        oracle_guard: true,
        ..SolverConfig::default()
    };
    let k2 = enumerate_partitions(25, 2);
    let grid = SweepGrid {
        strategies: vec![Strategy::C],
        assignments: vec![AssignmentPolicy::Balanced],
        fraction_modes: vec![FractionMode::Optimized],
        alpha_grid: vec![0.0],
    };
    let sweep = run_sweep(&k2, &dataset, &p, &cfg, &grid, &SweepOptions::default()).unwrap();
    let best = sweep.best_per_k().remove(0);
    assert_eq!(best.partition, "(19, 6)", "best K=2 partition");
    let s_c = best.s_c.unwrap();
    assert!(
        (s_c - 0.3548).abs() <= 0.005,
        "best K=2 savings {s_c} vs 35.48% ± 0.5%"
    );

    let current = EvalSpec::new(
        Partition::new(vec![14, 6, 5]).unwrap(),
        AssignmentPolicy::Balanced,
        Strategy::C,
        FractionMode::Optimized,
        0.0,
    )
    .unwrap();
    let r = evaluate_partition(&current, &dataset, &p, &cfg).unwrap();
    assert!(
        (r.savings_fraction - 0.3530).abs() <= 0.005,
        "current design savings {} vs 35.30% ± 0.5%",
        r.savings_fraction
    );
    println!("criterion 13 reference-dataset reproduction: PASS");
}
