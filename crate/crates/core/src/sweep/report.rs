//! Sweep persistence (long-format CSV, JSON summary, resume cache) and the
//! plot-ready data series the report command emits.

use std::collections::HashMap;

use serde_json::json;

use super::{AnnualResult, AssignmentPolicy, FractionMode, SweepResult};
use crate::solver::Strategy;
use crate::topology::Partition;

/// Header of the long-format sweep CSV.
pub const LONG_CSV_HEADER: &str = "partition,K,assignment,strategy,fraction_mode,alpha,energy_kwh,savings,recovery,infeasible,fallback";

/// Long-format CSV, one row per evaluated cell. The partition is quoted
/// (its canonical rendering contains commas); the recovery column is filled
/// only on optimized-fraction rows.
pub fn long_csv(result: &SweepResult) -> String {
    let recovery: HashMap<String, Option<f64>> = result
        .recovery_ratios()
        .into_iter()
        .map(|(p, r)| (p.to_string(), r))
        .collect();
    let mut out = String::from(LONG_CSV_HEADER);
    out.push('\n');
    for (spec, r) in &result.cells {
        let rec = if spec.fraction_mode == FractionMode::Optimized
            && spec.assignment == AssignmentPolicy::Balanced
            && spec.alpha == 0.0
        {
            recovery
                .get(&spec.partition.to_string())
                .copied()
                .flatten()
                .map(|v| v.to_string())
                .unwrap_or_default()
        } else {
            String::new()
        };
        out.push_str(&format!(
            "\"{}\",{},{},{},{},{},{},{},{},{},{}\n",
            spec.partition,
            spec.partition.k(),
            spec.assignment.label(),
            spec.strategy.label(),
            spec.fraction_mode.label(),
            spec.alpha,
            r.energy_kwh,
            r.savings_fraction,
            rec,
            r.infeasible_count,
            r.fallback_count,
        ));
    }
    out
}

/// JSON summary mirroring the best-partition-per-K table plus baseline,
/// spread, gap, and run metadata.
pub fn summary_json(result: &SweepResult) -> String {
    let best = result.best_per_k();
    let gaps: Vec<_> = [FractionMode::Proportional, FractionMode::Optimized]
        .iter()
        .map(|&m| {
            let t = result.assignment_gap(m);
            json!({
                "fraction_mode": m.label(),
                "per_k": t.per_k.iter().map(|(k, mean, max)| json!({
                    "k": k, "mean_gap": mean, "max_gap": max,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let spreads: Vec<_> = [FractionMode::Proportional, FractionMode::Optimized]
        .iter()
        .map(|&m| {
            let s = result.spread_decomposition(m);
            json!({
                "fraction_mode": m.label(),
                "within_k": s.within_k,
                "between_k": s.between_k,
                "total": s.total,
                "within_k_mwh": s.within_k_mwh,
                "between_k_mwh": s.between_k_mwh,
                "total_mwh": s.total_mwh,
            })
        })
        .collect();
    let doc = json!({
        "baseline": {
            "pump_kwh": result.baseline.pump_kwh,
            "fan_kwh": result.baseline.fan_kwh,
            "total_kwh": result.baseline.total_kwh,
            "skipped_records": result.baseline.skipped_records,
        },
        "best_per_k": best.iter().map(|b| json!({
            "k": b.k,
            "partition": b.partition,
            "partitions_evaluated": b.partitions_evaluated,
            "s_a": b.s_a,
            "s_b": b.s_b,
            "s_c": b.s_c,
            "recovery": b.recovery,
        })).collect::<Vec<_>>(),
        "assignment_gap": gaps,
        "spread_decomposition": spreads,
        "cells_evaluated": result.cells.len(),
        "failures": result.failures.len(),
        "elapsed_secs": result.elapsed_secs,
    });
    serde_json::to_string_pretty(&doc).expect("summary serializes")
}

/// Resume-cache serialization: one `|`-separated line per cell. Float fields
/// use shortest round-trip formatting, so a resumed sweep reproduces the
/// uninterrupted result exactly.
pub fn cache_to_string(cells: &[(super::EvalSpec, AnnualResult)]) -> String {
    let mut out = String::new();
    for (spec, r) in cells {
        out.push_str(&cache_line(spec, r));
    }
    out
}

/// One resume-cache line for a completed cell.
pub fn cache_line(spec: &super::EvalSpec, r: &AnnualResult) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}\n",
        spec.cache_key(),
        r.energy_kwh,
        r.baseline_energy_kwh,
        r.infeasible_count,
        r.fallback_count,
        r.max_violation,
    )
}

/// Header line carrying the baseline split, written at the top of cell files.
pub fn cache_header(baseline: &super::BaselineEnergy) -> String {
    format!(
        "#baseline|{}|{}|{}|{}\n",
        baseline.pump_kwh, baseline.fan_kwh, baseline.total_kwh, baseline.skipped_records
    )
}

fn parse_cache_header(line: &str) -> Option<super::BaselineEnergy> {
    let parts: Vec<&str> = line.strip_prefix("#baseline|")?.split('|').collect();
    if parts.len() != 4 {
        return None;
    }
    Some(super::BaselineEnergy {
        pump_kwh: parts[0].parse().ok()?,
        fan_kwh: parts[1].parse().ok()?,
        total_kwh: parts[2].parse().ok()?,
        skipped_records: parts[3].parse().ok()?,
    })
}

/// Rebuilds a [`SweepResult`] from a completed cell file (header + lines),
/// e.g. for the report command. Cells are restored in canonical order;
/// unparseable lines are skipped.
pub fn result_from_cache(text: &str) -> Option<SweepResult> {
    let baseline = text.lines().find_map(parse_cache_header)?;
    let map = cache_from_str(text);
    let mut cells: Vec<(super::EvalSpec, AnnualResult)> = map
        .into_iter()
        .filter_map(|(key, r)| super::EvalSpec::from_cache_key(&key).map(|s| (s, r)))
        .collect();
    if cells.is_empty() {
        return None;
    }
    cells.sort_by_key(|a| a.0.key());
    Some(SweepResult {
        cells,
        failures: Vec::new(),
        baseline,
        elapsed_secs: 0.0,
    })
}

/// Parses a resume cache written by [`cache_to_string`]. Unparseable lines
/// are skipped (a truncated final line from an interrupted run is expected).
pub fn cache_from_str(text: &str) -> HashMap<String, AnnualResult> {
    let mut map = HashMap::new();
    for line in text.lines() {
        let parts: Vec<&str> = line.split('|').collect();
        if parts.len() != 10 {
            continue;
        }
        let key = parts[..5].join("|");
        let (Ok(energy), Ok(baseline), Ok(infeasible), Ok(fallback), Ok(max_violation)) = (
            parts[5].parse::<f64>(),
            parts[6].parse::<f64>(),
            parts[7].parse::<usize>(),
            parts[8].parse::<usize>(),
            parts[9].parse::<f64>(),
        ) else {
            continue;
        };
        map.insert(
            key,
            AnnualResult {
                energy_kwh: energy,
                baseline_energy_kwh: baseline,
                savings_fraction: 1.0 - energy / baseline,
                infeasible_count: infeasible,
                fallback_count: fallback,
                max_violation,
            },
        );
    }
    map
}

fn quartiles(sorted: &[f64]) -> (f64, f64, f64, f64, f64) {
    let interp = |q: f64| -> f64 {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    (
        sorted[0],
        interp(0.25),
        interp(0.5),
        interp(0.75),
        sorted[sorted.len() - 1],
    )
}

/// Savings distributions grouped by subloop count (Strategy C, optimized
/// fractions, alpha 0, both assignments).
pub fn savings_by_k_csv(result: &SweepResult) -> String {
    let mut out = String::from("k,partition,assignment,savings\n");
    for (spec, r) in &result.cells {
        if spec.strategy == Strategy::C
            && spec.fraction_mode == FractionMode::Optimized
            && spec.alpha == 0.0
        {
            out.push_str(&format!(
                "{},\"{}\",{},{}\n",
                spec.partition.k(),
                spec.partition,
                spec.assignment.label(),
                r.savings_fraction,
            ));
        }
    }
    out
}

/// Best-partition-per-K strategy comparison with the savings range across
/// partitions of that K (balanced assignment).
pub fn strategy_comparison_csv(result: &SweepResult) -> String {
    let mut out = String::from("k,partition,s_a,s_b,s_c,s_c_min,s_c_max\n");
    for row in result.best_per_k() {
        let pool: Vec<f64> = result
            .partitions()
            .into_iter()
            .filter(|p| p.k() == row.k)
            .filter_map(|p| result.optimized_savings(&p, AssignmentPolicy::Balanced, 0.0))
            .collect();
        let min = pool.iter().cloned().fold(f64::MAX, f64::min);
        let max = pool.iter().cloned().fold(f64::MIN, f64::max);
        out.push_str(&format!(
            "{},\"{}\",{},{},{},{},{}\n",
            row.k,
            row.partition,
            row.s_a.map(|v| v.to_string()).unwrap_or_default(),
            row.s_b.map(|v| v.to_string()).unwrap_or_default(),
            row.s_c.map(|v| v.to_string()).unwrap_or_default(),
            min,
            max,
        ));
    }
    out
}

/// Fixed-vs-optimized distributions: box rows carry the savings quartiles per
/// (fraction mode, K); decomposition rows carry the within-K / between-K /
/// total spreads per mode.
pub fn fraction_mode_spread_csv(result: &SweepResult) -> String {
    let mut out =
        String::from("panel,fraction_mode,k,min,q1,median,q3,max,within_k,between_k,total\n");
    for mode in [FractionMode::Proportional, FractionMode::Optimized] {
        for k in result.k_values() {
            let mut pool = result.savings_pool(k, mode);
            if pool.is_empty() {
                continue;
            }
            pool.sort_by(f64::total_cmp);
            let (min, q1, med, q3, max) = quartiles(&pool);
            out.push_str(&format!(
                "box,{},{},{},{},{},{},{},,,\n",
                mode.label(),
                k,
                min,
                q1,
                med,
                q3,
                max
            ));
        }
    }
    for mode in [FractionMode::Proportional, FractionMode::Optimized] {
        let s = result.spread_decomposition(mode);
        out.push_str(&format!(
            "decomposition,{},,,,,,,{},{},{}\n",
            mode.label(),
            s.within_k,
            s.between_k,
            s.total
        ));
    }
    out
}

/// Assignment gap (balanced minus worst-case savings) statistics per K and
/// fraction mode.
pub fn assignment_gap_csv(result: &SweepResult) -> String {
    let mut out = String::from("k,fraction_mode,mean_gap,max_gap\n");
    for mode in [FractionMode::Proportional, FractionMode::Optimized] {
        let table = result.assignment_gap(mode);
        for (k, mean, max) in table.per_k {
            out.push_str(&format!("{},{},{},{}\n", k, mode.label(), mean, max));
        }
    }
    out
}

/// Top partitions ranked by balanced-assignment savings (Strategy C,
/// optimized fractions), with the worst-case assignment endpoint.
pub fn top_partitions_csv(result: &SweepResult, top_n: usize) -> String {
    let mut rows: Vec<(Partition, f64, Option<f64>)> = result
        .partitions()
        .into_iter()
        .filter_map(|p| {
            result
                .optimized_savings(&p, AssignmentPolicy::Balanced, 0.0)
                .map(|bal| {
                    let worst = result.optimized_savings(&p, AssignmentPolicy::WorstCase, 0.0);
                    (p, bal, worst)
                })
        })
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));
    rows.truncate(top_n);
    let mut out = String::from("rank,partition,k,savings_balanced,savings_worst_case\n");
    for (rank, (p, bal, worst)) in rows.into_iter().enumerate() {
        out.push_str(&format!(
            "{},\"{}\",{},{},{}\n",
            rank + 1,
            p,
            p.k(),
            bal,
            worst.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    out
}

/// Savings against the workload equalization level, per fraction mode
/// (balanced assignment). One row per (partition, alpha, mode) present.
pub fn alpha_sensitivity_csv(result: &SweepResult) -> String {
    let mut out = String::from("partition,alpha,fraction_mode,savings\n");
    let mut rows: Vec<(String, f64, &str, f64)> = Vec::new();
    for p in result.partitions() {
        let mut alphas: Vec<f64> = result
            .cells
            .iter()
            .filter(|(s, _)| s.partition == p && s.assignment == AssignmentPolicy::Balanced)
            .map(|(s, _)| s.alpha)
            .collect();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        for alpha in alphas {
            if let Some(s) = self_pinned(result, &p, alpha) {
                rows.push((p.to_string(), alpha, FractionMode::Proportional.label(), s));
            }
            if let Some(s) = result.optimized_savings(&p, AssignmentPolicy::Balanced, alpha) {
                rows.push((p.to_string(), alpha, FractionMode::Optimized.label(), s));
            }
        }
    }
    for (partition, alpha, mode, savings) in rows {
        out.push_str(&format!("\"{partition}\",{alpha},{mode},{savings}\n"));
    }
    out
}

fn self_pinned(result: &SweepResult, p: &Partition, alpha: f64) -> Option<f64> {
    result
        .lookup(
            p,
            AssignmentPolicy::Balanced,
            Strategy::B,
            FractionMode::Proportional,
            alpha,
        )
        .or_else(|| {
            result.lookup(
                p,
                AssignmentPolicy::Balanced,
                Strategy::C,
                FractionMode::Proportional,
                alpha,
            )
        })
        .map(|r| r.savings_fraction)
}

/// Recovery ratio per partition (balanced assignment), histogram-ready.
pub fn recovery_histogram_csv(result: &SweepResult) -> String {
    let mut out = String::from("partition,k,recovery\n");
    for (p, r) in result.recovery_ratios() {
        out.push_str(&format!(
            "\"{}\",{},{}\n",
            p,
            p.k(),
            r.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    out
}

/// The seven report files as (name, contents) pairs.
pub fn report_files(result: &SweepResult, top_n: usize) -> Vec<(&'static str, String)> {
    vec![
        ("savings_by_k.csv", savings_by_k_csv(result)),
        ("strategy_comparison.csv", strategy_comparison_csv(result)),
        ("fraction_mode_spread.csv", fraction_mode_spread_csv(result)),
        ("assignment_gap.csv", assignment_gap_csv(result)),
        ("top_partitions.csv", top_partitions_csv(result, top_n)),
        ("alpha_sensitivity.csv", alpha_sensitivity_csv(result)),
        ("recovery_histogram.csv", recovery_histogram_csv(result)),
    ]
}
