//! Design-space sweep: evaluates every requested partition under every
//! (assignment, strategy, fraction mode, equalization level) combination over
//! a full dataset, aggregates annual energy, and derives the comparison
//! metrics.

pub mod report;

use std::collections::HashMap;
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant_model::{ModelError, PlantParams, ct_fan_power, pump_power};
use crate::solver::{
    SolveStatus, SolverConfig, SolverError, Strategy, proportional_fractions, solve_timestep,
    solve_timestep_guarded, strategy_violation,
};
use crate::telemetry::{Dataset, TimestepRecord};
use crate::topology::{
    CduAssignment, Partition, TopologyError, balanced_assignment, equalize_workload, subloop_loads,
    worst_case_assignment,
};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("no usable records: every baseline point violates the fan model domain")]
    NoUsableRecords,
    #[error("partition {partition} needs {expected} CDUs, dataset has {got}")]
    CduCountMismatch {
        partition: String,
        expected: usize,
        got: usize,
    },
    #[error("no partitions requested")]
    NoPartitions,
    #[error("invalid evaluation spec: {0}")]
    InvalidSpec(String),
    #[error("equalization level {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("cell {spec} failed after retry: {message}")]
    CellFailed { spec: String, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// How CDUs are mapped to subloops before the sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentPolicy {
    Balanced,
    WorstCase,
}

impl AssignmentPolicy {
    pub fn label(self) -> &'static str {
        match self {
            AssignmentPolicy::Balanced => "balanced",
            AssignmentPolicy::WorstCase => "worst_case",
        }
    }
}

impl std::str::FromStr for AssignmentPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "balanced" => Ok(AssignmentPolicy::Balanced),
            "worst_case" | "worst-case" | "worstcase" => Ok(AssignmentPolicy::WorstCase),
            other => Err(format!(
                "unknown assignment policy {other:?}, expected balanced or worst_case"
            )),
        }
    }
}

/// Whether subloop flow fractions stay pinned at the proportional split or
/// are re-optimized each timestep (Strategy C only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionMode {
    Proportional,
    Optimized,
}

impl FractionMode {
    pub fn label(self) -> &'static str {
        match self {
            FractionMode::Proportional => "proportional",
            FractionMode::Optimized => "optimized",
        }
    }
}

impl std::str::FromStr for FractionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "proportional" => Ok(FractionMode::Proportional),
            "optimized" => Ok(FractionMode::Optimized),
            other => Err(format!(
                "unknown fraction mode {other:?}, expected proportional or optimized"
            )),
        }
    }
}

/// One evaluation cell of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub partition: Partition,
    pub assignment: AssignmentPolicy,
    pub strategy: Strategy,
    pub fraction_mode: FractionMode,
    /// Workload equalization level in [0, 1].
    pub alpha: f64,
}

impl EvalSpec {
    pub fn new(
        partition: Partition,
        assignment: AssignmentPolicy,
        strategy: Strategy,
        fraction_mode: FractionMode,
        alpha: f64,
    ) -> Result<Self, SweepError> {
        let spec = Self {
            partition,
            assignment,
            strategy,
            fraction_mode,
            alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.fraction_mode == FractionMode::Optimized && self.strategy != Strategy::C {
            return Err(SweepError::InvalidSpec(format!(
                "optimized fractions require strategy C, got {}",
                self.strategy.label()
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SweepError::BadAlpha(self.alpha));
        }
        Ok(())
    }

    /// Canonical sort/cache key.
    fn key(
        &self,
    ) -> (
        usize,
        Vec<usize>,
        AssignmentPolicy,
        Strategy,
        FractionMode,
        u64,
    ) {
        (
            self.partition.k(),
            self.partition.counts().to_vec(),
            self.assignment,
            self.strategy,
            self.fraction_mode,
            self.alpha.to_bits(),
        )
    }

    /// Stable textual key used by the resume cache.
    pub fn cache_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{:016x}",
            self.partition,
            self.assignment.label(),
            self.strategy.label(),
            self.fraction_mode.label(),
            self.alpha.to_bits()
        )
    }

    /// Inverse of [`EvalSpec::cache_key`].
    pub fn from_cache_key(key: &str) -> Option<Self> {
        let parts: Vec<&str> = key.split('|').collect();
        if parts.len() != 5 {
            return None;
        }
        let spec = EvalSpec {
            partition: parts[0].parse().ok()?,
            assignment: parts[1].parse().ok()?,
            strategy: parts[2].parse().ok()?,
            fraction_mode: parts[3].parse().ok()?,
            alpha: f64::from_bits(u64::from_str_radix(parts[4], 16).ok()?),
        };
        spec.validate().ok()?;
        Some(spec)
    }
}

impl std::fmt::Display for EvalSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} strategy {} {} alpha={}",
            self.partition,
            self.assignment.label(),
            self.strategy.label(),
            self.fraction_mode.label(),
            self.alpha
        )
    }
}

/// Annual aggregate for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualResult {
    pub energy_kwh: f64,
    pub baseline_energy_kwh: f64,
    /// 1 − energy/baseline.
    pub savings_fraction: f64,
    pub infeasible_count: usize,
    pub fallback_count: usize,
    /// Worst constraint violation over converged timesteps (°C / kg/s /
    /// fraction units mixed; 0 when clean).
    pub max_violation: f64,
}

/// Model-evaluated baseline energy split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEnergy {
    pub pump_kwh: f64,
    pub fan_kwh: f64,
    pub total_kwh: f64,
    /// Records excluded because the measured setpoint breaks the fan model
    /// domain; the same records are excluded from every strategy cell.
    pub skipped_records: usize,
}

/// Grid of cell dimensions to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub strategies: Vec<Strategy>,
    pub assignments: Vec<AssignmentPolicy>,
    pub fraction_modes: Vec<FractionMode>,
    pub alpha_grid: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::A, Strategy::B, Strategy::C],
            assignments: vec![AssignmentPolicy::Balanced, AssignmentPolicy::WorstCase],
            fraction_modes: vec![FractionMode::Proportional, FractionMode::Optimized],
            alpha_grid: vec![0.0],
        }
    }
}

/// Cell-completion callback used for incremental result flushing.
pub type FlushFn<'a> = &'a (dyn Fn(&EvalSpec, &AnnualResult) + Sync);

/// Execution options for [`run_sweep`].
#[derive(Default)]
pub struct SweepOptions<'a> {
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Previously completed cells to skip (resume).
    pub cache: Option<&'a HashMap<String, AnnualResult>>,
    /// Called after each completed work item with (done, total).
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
    /// Called with every cell a completed work item serves, as it completes;
    /// lets callers flush partial results for later resume.
    pub flush: Option<FlushFn<'a>>,
}

/// Full sweep output: one result per requested cell plus derived tables.
#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Canonically ordered (partition, assignment, strategy, mode, alpha).
    pub cells: Vec<(EvalSpec, AnnualResult)>,
    /// Cells that failed after one retry.
    pub failures: Vec<(EvalSpec, String)>,
    pub baseline: BaselineEnergy,
    /// Wall-clock seconds for the evaluation phase.
    pub elapsed_secs: f64,
}

/// The solve path a cell actually runs: Strategy C with proportional
/// fractions is by definition the Strategy B solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum EffPath {
    FlowOnly,
    PinnedSetpointOpt,
    FullOpt,
}

fn eff_path(strategy: Strategy, mode: FractionMode) -> Option<EffPath> {
    match (strategy, mode) {
        (Strategy::A, FractionMode::Proportional) => Some(EffPath::FlowOnly),
        (Strategy::B, FractionMode::Proportional) => Some(EffPath::PinnedSetpointOpt),
        (Strategy::C, FractionMode::Proportional) => Some(EffPath::PinnedSetpointOpt),
        (Strategy::C, FractionMode::Optimized) => Some(EffPath::FullOpt),
        _ => None,
    }
}

fn solve_strategy_of(path: EffPath) -> Strategy {
    match path {
        EffPath::FlowOnly => Strategy::A,
        EffPath::PinnedSetpointOpt => Strategy::B,
        EffPath::FullOpt => Strategy::C,
    }
}

/// Records whose measured baseline point the fan model can evaluate.
fn usable_records<'a>(dataset: &'a Dataset, params: &PlantParams) -> Vec<&'a TimestepRecord> {
    dataset
        .records
        .iter()
        .filter(|r| r.baseline_t_sup > params.approach_base)
        .collect()
}

/// Model-evaluated annual baseline energy (Σ P·dt/3600 over usable records),
/// split into pump and fan shares. Records the model cannot evaluate are
/// excluded and counted.
pub fn baseline_energy(
    dataset: &Dataset,
    params: &PlantParams,
) -> Result<BaselineEnergy, SweepError> {
    if dataset.records.is_empty() {
        return Err(SweepError::EmptyDataset);
    }
    let usable = usable_records(dataset, params);
    if usable.is_empty() {
        return Err(SweepError::NoUsableRecords);
    }
    let mut pump_sum = 0.0;
    let mut fan_sum = 0.0;
    for rec in &usable {
        let q_tot: f64 = rec.cdu_loads.iter().sum();
        pump_sum += pump_power(rec.baseline_flow, params)?;
        fan_sum += ct_fan_power(q_tot, rec.baseline_t_sup, params)?;
    }
    let to_kwh = dataset.dt / 3600.0;
    Ok(BaselineEnergy {
        pump_kwh: pump_sum * to_kwh,
        fan_kwh: fan_sum * to_kwh,
        total_kwh: (pump_sum + fan_sum) * to_kwh,
        skipped_records: dataset.records.len() - usable.len(),
    })
}

fn assignment_for(
    spec_assignment: AssignmentPolicy,
    partition: &Partition,
    mean_loads: &[f64],
) -> Result<CduAssignment, TopologyError> {
    match spec_assignment {
        AssignmentPolicy::Balanced => balanced_assignment(partition, mean_loads),
        AssignmentPolicy::WorstCase => worst_case_assignment(partition, mean_loads),
    }
}

/// Per-timestep observer: record timestamp, solve strategy, and result.
pub type StepTrace<'a> = &'a mut dyn FnMut(i64, Strategy, &crate::solver::SolveResult);

/// Chains per-timestep solves over the record list for one cell.
#[allow(clippy::too_many_arguments)]
fn eval_cell(
    partition: &Partition,
    assignment_policy: AssignmentPolicy,
    path: EffPath,
    alpha: f64,
    records: &[&TimestepRecord],
    mean_loads: &[f64],
    params: &PlantParams,
    cfg: &SolverConfig,
    baseline_kwh: f64,
    mut trace: Option<StepTrace>,
) -> Result<AnnualResult, SweepError> {
    let strategy = solve_strategy_of(path);
    let equalized_means = equalize_workload(mean_loads, alpha)?;
    let assignment = assignment_for(assignment_policy, partition, &equalized_means)?;
    let pinned = proportional_fractions(partition.counts(), params.f_min, params.f_max)?;

    let mut power_sum = 0.0;
    let mut infeasible = 0usize;
    let mut fallback = 0usize;
    let mut max_violation = 0.0f64;
    let mut warm = None;

    for rec in records {
        let loads_t = if alpha == 0.0 {
            subloop_loads(&assignment, &rec.cdu_loads)?
        } else {
            subloop_loads(&assignment, &equalize_workload(&rec.cdu_loads, alpha)?)?
        };
        let res = if cfg.oracle_guard {
            solve_timestep_guarded(
                strategy,
                &loads_t,
                &pinned,
                rec.baseline_t_sup,
                params,
                warm.as_ref(),
                cfg,
            )?
        } else {
            solve_timestep(
                strategy,
                &loads_t,
                &pinned,
                rec.baseline_t_sup,
                params,
                warm.as_ref(),
                cfg,
            )?
        };
        power_sum += res.power;
        match res.status {
            SolveStatus::Converged => {
                max_violation =
                    max_violation.max(strategy_violation(strategy, &res.op, &loads_t, params));
            }
            SolveStatus::FallbackPrevious => fallback += 1,
            SolveStatus::ClampedInfeasible => infeasible += 1,
        }
        if let Some(cb) = trace.as_mut() {
            cb(rec.timestamp, strategy, &res);
        }
        if cfg.warm_start {
            warm = Some(res.op);
        }
    }

    let energy_kwh = power_sum * (params.dt / 3600.0);
    Ok(AnnualResult {
        energy_kwh,
        baseline_energy_kwh: baseline_kwh,
        savings_fraction: 1.0 - energy_kwh / baseline_kwh,
        infeasible_count: infeasible,
        fallback_count: fallback,
        max_violation,
    })
}

/// Evaluates one cell standalone (computes the baseline itself).
pub fn evaluate_partition(
    spec: &EvalSpec,
    dataset: &Dataset,
    params: &PlantParams,
    cfg: &SolverConfig,
) -> Result<AnnualResult, SweepError> {
    evaluate_partition_traced(spec, dataset, params, cfg, None)
}

/// [`evaluate_partition`] with a per-timestep observer, for debug dumps.
pub fn evaluate_partition_traced(
    spec: &EvalSpec,
    dataset: &Dataset,
    params: &PlantParams,
    cfg: &SolverConfig,
    trace: Option<StepTrace>,
) -> Result<AnnualResult, SweepError> {
    spec.validate()?;
    if spec.partition.total() != dataset.n_cdus {
        return Err(SweepError::CduCountMismatch {
            partition: spec.partition.to_string(),
            expected: spec.partition.total(),
            got: dataset.n_cdus,
        });
    }
    let path = eff_path(spec.strategy, spec.fraction_mode)
        .ok_or_else(|| SweepError::InvalidSpec(spec.to_string()))?;
    let baseline = baseline_energy(dataset, params)?;
    let records = usable_records(dataset, params);
    let mean_loads = dataset.mean_cdu_loads();
    eval_cell(
        &spec.partition,
        spec.assignment,
        path,
        spec.alpha,
        &records,
        &mean_loads,
        params,
        cfg,
        baseline.total_kwh,
        trace,
    )
}

struct WorkItem {
    partition: Partition,
    assignment: AssignmentPolicy,
    path: EffPath,
    alpha: f64,
    /// Every requested (strategy, mode) pair this solve serves.
    specs: Vec<EvalSpec>,
}

/// Runs the full grid over `partitions`, in parallel across cells.
///
/// Results are deterministic: identical for any worker count, and resumed
/// runs (via `options.cache`) reproduce uninterrupted ones bit-for-bit. A
/// panicking cell is retried once and then surfaced in `failures`.
pub fn run_sweep(
    partitions: &[Partition],
    dataset: &Dataset,
    params: &PlantParams,
    cfg: &SolverConfig,
    grid: &SweepGrid,
    options: &SweepOptions,
) -> Result<SweepResult, SweepError> {
    if partitions.is_empty() {
        return Err(SweepError::NoPartitions);
    }
    for p in partitions {
        if p.total() != dataset.n_cdus {
            return Err(SweepError::CduCountMismatch {
                partition: p.to_string(),
                expected: p.total(),
                got: dataset.n_cdus,
            });
        }
    }
    for &alpha in &grid.alpha_grid {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(SweepError::BadAlpha(alpha));
        }
    }

    let baseline = baseline_energy(dataset, params)?;
    let records = usable_records(dataset, params);
    let mean_loads = dataset.mean_cdu_loads();

    // Group requested cells into work items; (B, proportional) and
    // (C, proportional) are the same solve and share one item.
    let mut items: Vec<WorkItem> = Vec::new();
    for partition in partitions {
        for &assignment in &grid.assignments {
            for &alpha in &grid.alpha_grid {
                let mut by_path: HashMap<EffPath, Vec<EvalSpec>> = HashMap::new();
                for &strategy in &grid.strategies {
                    for &mode in &grid.fraction_modes {
                        let Some(path) = eff_path(strategy, mode) else {
                            continue;
                        };
                        let spec = EvalSpec {
                            partition: partition.clone(),
                            assignment,
                            strategy,
                            fraction_mode: mode,
                            alpha,
                        };
                        by_path.entry(path).or_default().push(spec);
                    }
                }
                let mut paths: Vec<(EffPath, Vec<EvalSpec>)> = by_path.into_iter().collect();
                paths.sort_by_key(|(p, _)| *p);
                for (path, specs) in paths {
                    items.push(WorkItem {
                        partition: partition.clone(),
                        assignment,
                        path,
                        alpha,
                        specs,
                    });
                }
            }
        }
    }
    if items.is_empty() {
        return Err(SweepError::InvalidSpec(
            "the requested grid contains no valid (strategy, fraction mode) pairs".into(),
        ));
    }

    let total = items.len();
    let done = AtomicUsize::new(0);
    let started = Instant::now();

    let eval_item = |item: &WorkItem| -> Result<AnnualResult, String> {
        let cached = options
            .cache
            .and_then(|c| item.specs.iter().find_map(|s| c.get(&s.cache_key())))
            .cloned();
        let outcome = match cached {
            Some(hit) => Ok(hit),
            None => {
                let run = || {
                    eval_cell(
                        &item.partition,
                        item.assignment,
                        item.path,
                        item.alpha,
                        &records,
                        &mean_loads,
                        params,
                        cfg,
                        baseline.total_kwh,
                        None,
                    )
                };
                match catch_unwind(AssertUnwindSafe(&run)) {
                    Ok(r) => r.map_err(|e| e.to_string()),
                    // One retry after a panic, then surface the failure.
                    Err(_) => match catch_unwind(AssertUnwindSafe(&run)) {
                        Ok(r) => r.map_err(|e| e.to_string()),
                        Err(_) => Err("worker panicked twice".into()),
                    },
                }
            }
        };
        if let (Some(cb), Ok(result)) = (options.flush, &outcome) {
            for spec in &item.specs {
                cb(spec, result);
            }
        }
        if let Some(cb) = options.progress {
            cb(done.fetch_add(1, Ordering::Relaxed) + 1, total);
        }
        outcome
    };

    let outcomes: Vec<Result<AnnualResult, String>> = if options.workers == 0 {
        items.par_iter().map(eval_item).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| SweepError::ThreadPool(e.to_string()))?;
        pool.install(|| items.par_iter().map(eval_item).collect())
    };

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (item, outcome) in items.iter().zip(outcomes) {
        match outcome {
            Ok(result) => {
                for spec in &item.specs {
                    cells.push((spec.clone(), result.clone()));
                }
            }
            Err(message) => {
                for spec in &item.specs {
                    failures.push((spec.clone(), message.clone()));
                }
            }
        }
    }
    cells.sort_by_key(|a| a.0.key());
    failures.sort_by_key(|a| a.0.key());

    Ok(SweepResult {
        cells,
        failures,
        baseline,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Row of the best-partition-per-subloop-count summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestPerK {
    pub k: usize,
    pub partition: String,
    pub partitions_evaluated: usize,
    pub s_a: Option<f64>,
    pub s_b: Option<f64>,
    pub s_c: Option<f64>,
    pub recovery: Option<f64>,
}

/// Per-partition and per-K assignment gaps (balanced minus worst-case
/// savings) for one fraction mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentGapTable {
    pub fraction_mode: FractionMode,
    /// (partition, gap in savings fraction).
    pub per_partition: Vec<(Partition, f64)>,
    /// (k, mean gap, max gap).
    pub per_k: Vec<(usize, f64, f64)>,
}

/// Spread of savings across the design space for one fraction mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadDecomposition {
    pub fraction_mode: FractionMode,
    /// Largest best-to-worst range inside any single K.
    pub within_k: f64,
    /// Range across the per-K best values.
    pub between_k: f64,
    /// Overall best minus overall worst.
    pub total: f64,
    pub within_k_mwh: f64,
    pub between_k_mwh: f64,
    pub total_mwh: f64,
}

impl SweepResult {
    /// Finds a cell by coordinates.
    pub fn lookup(
        &self,
        partition: &Partition,
        assignment: AssignmentPolicy,
        strategy: Strategy,
        mode: FractionMode,
        alpha: f64,
    ) -> Option<&AnnualResult> {
        self.cells
            .iter()
            .find(|(s, _)| {
                &s.partition == partition
                    && s.assignment == assignment
                    && s.strategy == strategy
                    && s.fraction_mode == mode
                    && s.alpha.to_bits() == alpha.to_bits()
            })
            .map(|(_, r)| r)
    }

    /// Savings of the pinned-fraction setpoint co-optimization (the recovery
    /// denominator): the Strategy B row, or the equivalent (C, proportional).
    fn pinned_savings(
        &self,
        partition: &Partition,
        assignment: AssignmentPolicy,
        alpha: f64,
    ) -> Option<f64> {
        self.lookup(
            partition,
            assignment,
            Strategy::B,
            FractionMode::Proportional,
            alpha,
        )
        .or_else(|| {
            self.lookup(
                partition,
                assignment,
                Strategy::C,
                FractionMode::Proportional,
                alpha,
            )
        })
        .map(|r| r.savings_fraction)
    }

    fn optimized_savings(
        &self,
        partition: &Partition,
        assignment: AssignmentPolicy,
        alpha: f64,
    ) -> Option<f64> {
        self.lookup(
            partition,
            assignment,
            Strategy::C,
            FractionMode::Optimized,
            alpha,
        )
        .map(|r| r.savings_fraction)
    }

    /// Partitions present in the sweep, deduplicated, canonical order.
    pub fn partitions(&self) -> Vec<Partition> {
        let mut seen = Vec::new();
        for (spec, _) in &self.cells {
            if !seen.contains(&spec.partition) {
                seen.push(spec.partition.clone());
            }
        }
        seen
    }

    /// Recovery ratio r = s_C / s_B per partition (balanced assignment,
    /// alpha = 0). `None` marks an undefined ratio (s_B ≤ 0 or missing rows).
    pub fn recovery_ratios(&self) -> Vec<(Partition, Option<f64>)> {
        self.partitions()
            .into_iter()
            .map(|p| {
                let r = match (
                    self.pinned_savings(&p, AssignmentPolicy::Balanced, 0.0),
                    self.optimized_savings(&p, AssignmentPolicy::Balanced, 0.0),
                ) {
                    (Some(s_b), Some(s_c)) if s_b > 0.0 => Some(s_c / s_b),
                    _ => None,
                };
                (p, r)
            })
            .collect()
    }

    /// Assignment gap table for one fraction mode at alpha = 0.
    pub fn assignment_gap(&self, mode: FractionMode) -> AssignmentGapTable {
        let savings = |p: &Partition, a: AssignmentPolicy| match mode {
            FractionMode::Proportional => self.pinned_savings(p, a, 0.0),
            FractionMode::Optimized => self.optimized_savings(p, a, 0.0),
        };
        let mut per_partition = Vec::new();
        for p in self.partitions() {
            if let (Some(bal), Some(worst)) = (
                savings(&p, AssignmentPolicy::Balanced),
                savings(&p, AssignmentPolicy::WorstCase),
            ) {
                per_partition.push((p, bal - worst));
            }
        }
        let mut per_k: Vec<(usize, f64, f64)> = Vec::new();
        let ks: Vec<usize> = {
            let mut v: Vec<usize> = per_partition.iter().map(|(p, _)| p.k()).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        for k in ks {
            let gaps: Vec<f64> = per_partition
                .iter()
                .filter(|(p, _)| p.k() == k)
                .map(|(_, g)| *g)
                .collect();
            let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let max = gaps.iter().cloned().fold(f64::MIN, f64::max);
            per_k.push((k, mean, max));
        }
        AssignmentGapTable {
            fraction_mode: mode,
            per_partition,
            per_k,
        }
    }

    /// Savings pool for one (K, mode) at alpha 0, both assignments.
    fn savings_pool(&self, k: usize, mode: FractionMode) -> Vec<f64> {
        let mut pool = Vec::new();
        for p in self.partitions() {
            if p.k() != k {
                continue;
            }
            for a in [AssignmentPolicy::Balanced, AssignmentPolicy::WorstCase] {
                let s = match mode {
                    FractionMode::Proportional => self.pinned_savings(&p, a, 0.0),
                    FractionMode::Optimized => self.optimized_savings(&p, a, 0.0),
                };
                if let Some(s) = s {
                    pool.push(s);
                }
            }
        }
        pool
    }

    pub fn k_values(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.partitions().iter().map(|p| p.k()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Decomposes the design-space savings spread for one fraction mode.
    pub fn spread_decomposition(&self, mode: FractionMode) -> SpreadDecomposition {
        let mut within_k = 0.0f64;
        let mut best_per_k = Vec::new();
        let mut overall_best = f64::MIN;
        let mut overall_worst = f64::MAX;
        for k in self.k_values() {
            let pool = self.savings_pool(k, mode);
            if pool.is_empty() {
                continue;
            }
            let best = pool.iter().cloned().fold(f64::MIN, f64::max);
            let worst = pool.iter().cloned().fold(f64::MAX, f64::min);
            within_k = within_k.max(best - worst);
            best_per_k.push(best);
            overall_best = overall_best.max(best);
            overall_worst = overall_worst.min(worst);
        }
        let between_k = if best_per_k.is_empty() {
            0.0
        } else {
            best_per_k.iter().cloned().fold(f64::MIN, f64::max)
                - best_per_k.iter().cloned().fold(f64::MAX, f64::min)
        };
        let total = if overall_best > overall_worst {
            overall_best - overall_worst
        } else {
            0.0
        };
        let to_mwh = self.baseline.total_kwh / 1000.0;
        SpreadDecomposition {
            fraction_mode: mode,
            within_k,
            between_k,
            total,
            within_k_mwh: within_k * to_mwh,
            between_k_mwh: between_k * to_mwh,
            total_mwh: total * to_mwh,
        }
    }

    /// Best partition per subloop count under Strategy C with optimized
    /// fractions, balanced assignment, alpha = 0.
    pub fn best_per_k(&self) -> Vec<BestPerK> {
        let mut rows = Vec::new();
        for k in self.k_values() {
            let candidates: Vec<Partition> = self
                .partitions()
                .into_iter()
                .filter(|p| p.k() == k)
                .collect();
            let best = candidates
                .iter()
                .filter_map(|p| {
                    self.optimized_savings(p, AssignmentPolicy::Balanced, 0.0)
                        .map(|s| (p.clone(), s))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1));
            let Some((partition, s_c)) = best else {
                continue;
            };
            let s_a = self
                .lookup(
                    &partition,
                    AssignmentPolicy::Balanced,
                    Strategy::A,
                    FractionMode::Proportional,
                    0.0,
                )
                .map(|r| r.savings_fraction);
            let s_b = self.pinned_savings(&partition, AssignmentPolicy::Balanced, 0.0);
            let recovery = s_b.and_then(|b| if b > 0.0 { Some(s_c / b) } else { None });
            rows.push(BestPerK {
                k,
                partition: partition.to_string(),
                partitions_evaluated: candidates.len(),
                s_a,
                s_b,
                s_c: Some(s_c),
                recovery,
            });
        }
        rows
    }
}
