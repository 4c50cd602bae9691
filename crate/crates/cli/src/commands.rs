//! Command implementations.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use coolsweep_core::plant_model::total_power;
use coolsweep_core::solver::{
    SolveResult, SolverConfig, constraint_values, oracle_reduced_1d, oracle_strategy_a,
    solve_timestep,
};
use coolsweep_core::sweep::{
    AnnualResult, AssignmentPolicy, EvalSpec, FractionMode, SweepGrid, SweepOptions, SweepResult,
    baseline_energy, evaluate_partition, report as sweep_report, run_sweep,
};
use coolsweep_core::telemetry::{Dataset, generate_synthetic, read_dataset, write_dataset};
use coolsweep_core::topology::{Partition, enumerate_partitions};
use coolsweep_core::{PlantParams, Strategy, SubloopLoads};

use crate::config::RunConfig;
use crate::{CliError, EnumerateArgs, EvaluateArgs, GenDataArgs, ReportArgs, SolveArgs, SweepArgs};

const CELLS_FILE: &str = "cells.partial.csv";
const LONG_FILE: &str = "sweep_long.csv";
const SUMMARY_FILE: &str = "summary.json";

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn data_err(message: impl std::fmt::Display) -> CliError {
    CliError::Data(message.to_string())
}

/// Inclusive K range like `3`, `2..6`, or `2-6`.
fn parse_k_range(text: &str) -> Result<(usize, usize), CliError> {
    let text = text.trim();
    let parts: Vec<&str> = if text.contains("..") {
        text.splitn(2, "..").collect()
    } else if text.contains('-') {
        text.splitn(2, '-').collect()
    } else {
        vec![text]
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| usage(format!("invalid subloop count {s:?}")))
    };
    let (lo, hi) = match parts.as_slice() {
        [one] => {
            let v = parse(one)?;
            (v, v)
        }
        [a, b] => (parse(a)?, parse(b)?),
        _ => return Err(usage(format!("invalid K range {text:?}"))),
    };
    if lo > hi {
        return Err(usage(format!("empty K range {text:?}")));
    }
    if lo <= 1 {
        return Err(usage(
            "K = 1 collapses the plant to a single hydraulic branch with no \
             partition or flow-split decision left to optimize; use K >= 2",
        ));
    }
    Ok((lo, hi))
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("invalid {what} entry {p:?}")))
        })
        .collect()
}

/// Partition list like `(19,6),(14,6,5)` or a single `(19,6)`.
fn parse_partition_list(text: &str) -> Result<Vec<Partition>, CliError> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| usage(format!("unbalanced parentheses in {text:?}")))?;
                current.push(ch);
            }
            ',' if depth == 0 => {
                if !current.trim().is_empty() {
                    out.push(parse_partition(current.trim())?);
                }
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    if depth != 0 {
        return Err(usage(format!("unbalanced parentheses in {text:?}")));
    }
    if !current.trim().is_empty() {
        out.push(parse_partition(current.trim())?);
    }
    if out.is_empty() {
        return Err(usage("no partitions given"));
    }
    Ok(out)
}

fn parse_partition(text: &str) -> Result<Partition, CliError> {
    text.parse::<Partition>()
        .map_err(|e| usage(format!("invalid partition {text:?}: {e}")))
}

fn load_dataset(path: &Path, params: &PlantParams) -> Result<Dataset, CliError> {
    let outcome = read_dataset(path, params).map_err(data_err)?;
    if !outcome.rejections.is_empty() {
        eprintln!(
            "note: dropped {} invalid row(s) from {}:",
            outcome.rejections.len(),
            path.display()
        );
        eprint!("{}", outcome.rejection_report());
    }
    Ok(outcome.dataset)
}

pub fn gen_data(args: &GenDataArgs, config: &RunConfig) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&args.spread) {
        return Err(usage(format!(
            "--spread must lie in [0, 1), got {}",
            args.spread
        )));
    }
    if args.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    if args.cdus < 2 {
        return Err(usage("--cdus must be at least 2"));
    }
    let dataset = generate_synthetic(args.steps, args.cdus, args.spread, args.seed, &config.plant)
        .map_err(data_err)?;
    write_dataset(&dataset, &args.out).map_err(data_err)?;
    println!(
        "wrote {} rows x {} CDUs to {}",
        dataset.records.len(),
        dataset.n_cdus,
        args.out.display()
    );
    Ok(())
}

pub fn enumerate(args: &EnumerateArgs) -> Result<(), CliError> {
    let (k_lo, k_hi) = parse_k_range(&args.k)?;
    let per_k: Vec<(usize, Vec<Partition>)> = (k_lo..=k_hi)
        .map(|k| (k, enumerate_partitions(args.n, k)))
        .collect();
    if args.count_only {
        let counts: Vec<String> = per_k.iter().map(|(_, p)| p.len().to_string()).collect();
        println!("{}", counts.join(" "));
        let total: usize = per_k.iter().map(|(_, p)| p.len()).sum();
        println!("total {total}");
    } else {
        for (_, partitions) in &per_k {
            for p in partitions {
                println!("{p}");
            }
        }
    }
    Ok(())
}

fn fractions_for_solve(
    args: &SolveArgs,
    k: usize,
    params: &PlantParams,
) -> Result<Vec<f64>, CliError> {
    if let Some(text) = &args.fractions {
        let f = parse_f64_list(text, "fraction")?;
        if f.len() != k {
            return Err(usage(format!(
                "{} fractions given for {k} subloop loads",
                f.len()
            )));
        }
        return Ok(f);
    }
    if let Some(text) = &args.partition {
        let p = parse_partition(text)?;
        if p.k() != k {
            return Err(usage(format!(
                "partition {p} has {} subloops but {k} loads were given",
                p.k()
            )));
        }
        return coolsweep_core::solver::proportional_fractions(
            p.counts(),
            params.f_min,
            params.f_max,
        )
        .map_err(data_err);
    }
    Ok(vec![1.0 / k as f64; k])
}

fn print_solve_result(prefix: &str, res: &SolveResult) {
    let fractions: Vec<String> = res.op.fractions.iter().map(|f| format!("{f:.6}")).collect();
    println!("{prefix}status: {}", res.status.label());
    println!("{prefix}flow_kg_s: {:.6}", res.op.flow);
    println!("{prefix}t_sup_c: {:.6}", res.op.t_sup);
    println!("{prefix}fractions: {}", fractions.join(", "));
    println!("{prefix}power_kw: {:.6}", res.power);
    println!("{prefix}iterations: {}", res.iterations);
    println!("{prefix}max_return_temp_c: {:.6}", res.max_return_temp);
}

pub fn solve(args: &SolveArgs, config: &RunConfig) -> Result<(), CliError> {
    let strategy: Strategy = args.strategy.parse().map_err(usage)?;
    let q = parse_f64_list(&args.loads, "load")?;
    if q.len() < 2 {
        return Err(usage("need at least two subloop loads"));
    }
    let loads = SubloopLoads::from_loads(q).map_err(|e| usage(e.to_string()))?;
    let fractions = fractions_for_solve(args, loads.k(), &config.plant)?;

    let res = solve_timestep(
        strategy,
        &loads,
        &fractions,
        args.baseline_t_sup,
        &config.plant,
        None,
        &config.solver,
    )
    .map_err(data_err)?;
    println!("strategy: {}", strategy.label());
    print_solve_result("", &res);
    let feasible = constraint_values(&res.op, &loads, &config.plant)
        .iter()
        .all(|&v| v >= -1e-6);
    println!("feasible: {feasible}");

    if args.oracle {
        let oracle_op = match strategy {
            Strategy::A => {
                oracle_strategy_a(&loads, &fractions, args.baseline_t_sup, &config.plant)
            }
            Strategy::B => oracle_reduced_1d(Strategy::B, &loads, Some(&fractions), &config.plant),
            Strategy::C => oracle_reduced_1d(Strategy::C, &loads, None, &config.plant),
        };
        match oracle_op {
            Ok(op) => {
                let power = total_power(&op, &loads, &config.plant).map_err(data_err)?;
                let fr: Vec<String> = op.fractions.iter().map(|f| format!("{f:.6}")).collect();
                println!("oracle_flow_kg_s: {:.6}", op.flow);
                println!("oracle_t_sup_c: {:.6}", op.t_sup);
                println!("oracle_fractions: {}", fr.join(", "));
                println!("oracle_power_kw: {power:.6}");
            }
            Err(e) => println!("oracle: {e}"),
        }
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, config: &RunConfig) -> Result<(), CliError> {
    let data_path = args
        .data
        .clone()
        .or_else(|| config.io.dataset.clone())
        .ok_or_else(|| usage("no dataset: pass --data or set io.dataset in the config"))?;
    let dataset = load_dataset(&data_path, &config.plant)?;

    let spec = EvalSpec::new(
        parse_partition(&args.partition)?,
        args.assignment.parse().map_err(usage)?,
        args.strategy.parse().map_err(usage)?,
        args.fraction_mode.parse().map_err(usage)?,
        args.alpha,
    )
    .map_err(|e| usage(e.to_string()))?;

    let solver_cfg = SolverConfig {
        oracle_guard: args.oracle_guard || config.solver.oracle_guard,
        ..config.solver.clone()
    };

    let result = match &args.dump {
        None => {
            evaluate_partition(&spec, &dataset, &config.plant, &solver_cfg).map_err(data_err)?
        }
        Some(path) => {
            let k = spec.partition.k();
            let mut dump = String::from("t,strategy,flow,t_sup");
            for i in 1..=k {
                dump.push_str(&format!(",f_{i}"));
            }
            dump.push_str(",power_kw,status,iters,max_tret\n");
            let mut on_step = |t: i64, strategy: Strategy, res: &SolveResult| {
                dump.push_str(&format!(
                    "{t},{},{},{}",
                    strategy.label(),
                    res.op.flow,
                    res.op.t_sup
                ));
                for f in &res.op.fractions {
                    dump.push_str(&format!(",{f}"));
                }
                dump.push_str(&format!(
                    ",{},{},{},{}\n",
                    res.power,
                    res.status.label(),
                    res.iterations,
                    res.max_return_temp
                ));
            };
            let result = coolsweep_core::sweep::evaluate_partition_traced(
                &spec,
                &dataset,
                &config.plant,
                &solver_cfg,
                Some(&mut on_step),
            )
            .map_err(data_err)?;
            fs::write(path, dump)
                .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))?;
            result
        }
    };
    println!("spec: {spec}");
    println!("energy_kwh: {:.3}", result.energy_kwh);
    println!("baseline_energy_kwh: {:.3}", result.baseline_energy_kwh);
    println!("savings_percent: {:.4}", result.savings_fraction * 100.0);
    println!("infeasible_timesteps: {}", result.infeasible_count);
    println!("fallback_timesteps: {}", result.fallback_count);
    println!("max_constraint_violation: {:.3e}", result.max_violation);
    Ok(())
}

fn parse_list<T: std::str::FromStr<Err = String>>(
    text: &str,
    what: &str,
) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|e| usage(format!("{what}: {e}")))
        })
        .collect()
}

fn resolve_workers(args_workers: Option<usize>, config: &RunConfig) -> usize {
    args_workers
        .or(config.parallelism)
        .or_else(|| {
            std::env::var("COOLSWEEP_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0)
}

pub fn sweep(args: &SweepArgs, config: &RunConfig) -> Result<(), CliError> {
    let data_path = args
        .data
        .clone()
        .or_else(|| config.io.dataset.clone())
        .ok_or_else(|| usage("no dataset: pass --data or set io.dataset in the config"))?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.io.out_dir.clone())
        .ok_or_else(|| usage("no output directory: pass --out or set io.out_dir in the config"))?;
    fs::create_dir_all(&out_dir)
        .map_err(|e| data_err(format!("cannot create {}: {e}", out_dir.display())))?;

    let dataset = load_dataset(&data_path, &config.plant)?;

    let partitions: Vec<Partition> = if let Some(text) = &args.partitions {
        parse_partition_list(text)?
    } else if let Some(list) = &config.sweep.partitions {
        list.iter()
            .map(|s| parse_partition(s))
            .collect::<Result<_, _>>()?
    } else {
        let (k_lo, k_hi) = match &args.k {
            Some(text) => parse_k_range(text)?,
            None => (config.sweep.k_min, config.sweep.k_max),
        };
        if k_lo <= 1 {
            return Err(usage("K = 1 is not a parallel-subloop design; use K >= 2"));
        }
        let mut all = Vec::new();
        for k in k_lo..=k_hi {
            all.extend(enumerate_partitions(dataset.n_cdus, k));
        }
        all
    };

    let grid = SweepGrid {
        strategies: match &args.strategies {
            Some(t) => parse_list::<Strategy>(t, "strategy")?,
            None => config.sweep.strategies.clone(),
        },
        assignments: match &args.assignments {
            Some(t) => parse_list::<AssignmentPolicy>(t, "assignment")?,
            None => config.sweep.assignments.clone(),
        },
        fraction_modes: match &args.fraction_modes {
            Some(t) => parse_list::<FractionMode>(t, "fraction mode")?,
            None => config.sweep.fraction_modes.clone(),
        },
        alpha_grid: match &args.alpha_grid {
            Some(t) => parse_f64_list(t, "alpha")?,
            None => config.sweep.alpha_grid.clone(),
        },
    };
    let solver_cfg = SolverConfig {
        oracle_guard: args.oracle_guard || config.solver.oracle_guard,
        ..config.solver.clone()
    };
    let workers = resolve_workers(args.workers, config);

    let cells_path = out_dir.join(CELLS_FILE);
    let cache: HashMap<String, AnnualResult> = if args.resume && cells_path.exists() {
        let text = fs::read_to_string(&cells_path)
            .map_err(|e| data_err(format!("cannot read {}: {e}", cells_path.display())))?;
        sweep_report::cache_from_str(&text)
    } else {
        HashMap::new()
    };
    if args.resume && !cache.is_empty() {
        eprintln!("resuming: {} cells already complete", cache.len());
    }

    let baseline = baseline_energy(&dataset, &config.plant).map_err(data_err)?;
    let flush_file = fs::File::create(out_dir.join(format!("{CELLS_FILE}.tmp")))
        .map_err(|e| data_err(format!("cannot write to {}: {e}", out_dir.display())))?;
    let mut flush_writer = std::io::BufWriter::new(flush_file);
    flush_writer
        .write_all(sweep_report::cache_header(&baseline).as_bytes())
        .map_err(data_err)?;
    let flush_writer = Mutex::new(flush_writer);
    let flush = |spec: &EvalSpec, result: &AnnualResult| {
        let mut w = flush_writer.lock().expect("flush writer lock");
        let _ = w.write_all(sweep_report::cache_line(spec, result).as_bytes());
        let _ = w.flush();
    };
    let progress = |done_count: usize, total: usize| {
        if !args.quiet {
            let step = (total / 20).max(1);
            if done_count.is_multiple_of(step) || done_count == total {
                eprintln!("progress: {done_count}/{total} cells");
            }
        }
    };

    let result = run_sweep(
        &partitions,
        &dataset,
        &config.plant,
        &solver_cfg,
        &grid,
        &SweepOptions {
            workers,
            cache: if cache.is_empty() { None } else { Some(&cache) },
            progress: Some(&progress),
            flush: Some(&flush),
        },
    )
    .map_err(data_err)?;
    drop(flush_writer);
    // Replace the incremental file with the canonical, complete cell list.
    let mut final_cells = sweep_report::cache_header(&result.baseline);
    final_cells.push_str(&sweep_report::cache_to_string(&result.cells));
    fs::write(&cells_path, final_cells).map_err(data_err)?;
    let _ = fs::remove_file(out_dir.join(format!("{CELLS_FILE}.tmp")));

    fs::write(out_dir.join(LONG_FILE), sweep_report::long_csv(&result)).map_err(data_err)?;
    fs::write(
        out_dir.join(SUMMARY_FILE),
        sweep_report::summary_json(&result),
    )
    .map_err(data_err)?;

    println!(
        "evaluated {} cells over {} partitions in {:.1}s ({} failure(s))",
        result.cells.len(),
        partitions.len(),
        result.elapsed_secs,
        result.failures.len(),
    );
    println!(
        "baseline: pump {:.0} kWh + fan {:.0} kWh = {:.0} kWh ({} record(s) skipped)",
        result.baseline.pump_kwh,
        result.baseline.fan_kwh,
        result.baseline.total_kwh,
        result.baseline.skipped_records,
    );
    print_best_table(&result);
    for (spec, message) in &result.failures {
        eprintln!("failed cell {spec}: {message}");
    }
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Internal(format!(
            "{} sweep cell(s) failed",
            result.failures.len()
        )))
    }
}

fn print_best_table(result: &SweepResult) {
    let rows = result.best_per_k();
    if rows.is_empty() {
        return;
    }
    println!("best partition per subloop count (strategy C, balanced, optimized fractions):");
    println!("  K  partition             |P_K|   s_A%     s_B%     s_C%   recovery%");
    for r in rows {
        let fmt = |v: Option<f64>| {
            v.map(|x| format!("{:7.3}", x * 100.0))
                .unwrap_or_else(|| "      -".into())
        };
        println!(
            "  {}  {:20} {:5}  {}  {}  {}  {}",
            r.k,
            r.partition,
            r.partitions_evaluated,
            fmt(r.s_a),
            fmt(r.s_b),
            fmt(r.s_c),
            fmt(r.recovery),
        );
    }
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let cells_path = args.sweep.join(CELLS_FILE);
    if !cells_path.exists() {
        return Err(data_err(format!(
            "missing sweep results: {} not found (run `coolsweep sweep` first)",
            cells_path.display()
        )));
    }
    let text = fs::read_to_string(&cells_path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", cells_path.display())))?;
    let result = sweep_report::result_from_cache(&text).ok_or_else(|| {
        data_err(format!(
            "{} holds no parseable sweep cells",
            cells_path.display()
        ))
    })?;

    let out_dir: PathBuf = args.out.clone().unwrap_or_else(|| args.sweep.clone());
    fs::create_dir_all(&out_dir)
        .map_err(|e| data_err(format!("cannot create {}: {e}", out_dir.display())))?;
    for (name, contents) in sweep_report::report_files(&result, args.top) {
        fs::write(out_dir.join(name), contents).map_err(data_err)?;
        println!("wrote {}", out_dir.join(name).display());
    }
    Ok(())
}
