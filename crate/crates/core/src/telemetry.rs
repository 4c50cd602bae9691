//! Timestep dataset schema, CSV ingestion with drop-and-report filtering,
//! and the seeded synthetic-year generator.
//!
//! Canonical CSV schema (UTF-8, decimal point, no thousands separators):
//!
//! ```text
//! timestamp,q_cdu_01,...,q_cdu_NN,baseline_flow_kg_s,baseline_t_sup_c
//! ```
//!
//! `timestamp` is epoch seconds; loads are kW. Invalid rows are dropped and
//! reported with a reason code, never repaired. Structural problems
//! (unreadable file, malformed header, wrong column count) abort with a parse
//! error carrying the line number.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::plant_model::PlantParams;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty after filtering ({rejected} rows rejected)")]
    Empty { rejected: usize },
    #[error("invalid generator input: {0}")]
    InvalidGeneratorInput(String),
}

/// One accepted telemetry interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepRecord {
    /// Epoch seconds.
    pub timestamp: i64,
    /// Per-CDU heat loads, kW.
    pub cdu_loads: Vec<f64>,
    /// Measured total flow at the baseline operating point, kg/s.
    pub baseline_flow: f64,
    /// Measured supply temperature setpoint, °C.
    pub baseline_t_sup: f64,
}

/// Why a row was dropped during ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// A field was empty or not a finite number.
    MissingValue,
    /// A CDU load was negative, or every load was zero.
    NonPositiveLoad,
    /// Baseline flow or supply temperature outside the actuator bounds.
    OutOfBoundsBaseline,
    /// Timestamp not strictly greater than the previous accepted row.
    NonIncreasingTimestamp,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::MissingValue => "missing value",
            RejectReason::NonPositiveLoad => "non-positive or negative load",
            RejectReason::OutOfBoundsBaseline => "out-of-bounds baseline",
            RejectReason::NonIncreasingTimestamp => "non-increasing timestamp",
        };
        f.write_str(s)
    }
}

/// A dropped row: 1-based file line number plus the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub reason: RejectReason,
}

/// Time-ordered accepted records plus the plant's interval length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<TimestepRecord>,
    /// Interval length, s.
    pub dt: f64,
    pub n_cdus: usize,
}

impl Dataset {
    /// Per-CDU mean loads over the whole dataset, kW.
    pub fn mean_cdu_loads(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cdus];
        for rec in &self.records {
            for (s, &q) in sums.iter_mut().zip(&rec.cdu_loads) {
                *s += q;
            }
        }
        let n = self.records.len() as f64;
        sums.iter_mut().for_each(|s| *s /= n);
        sums
    }
}

/// Dataset plus the rejection report from ingestion.
#[derive(Debug)]
pub struct ReadOutcome {
    pub dataset: Dataset,
    pub rejections: Vec<Rejection>,
}

impl ReadOutcome {
    /// Line-oriented rejection report: `line_no,reason` per dropped row.
    pub fn rejection_report(&self) -> String {
        let mut out = String::new();
        for r in &self.rejections {
            out.push_str(&format!("{},{}\n", r.line, r.reason));
        }
        out
    }
}

fn record_reject_reason(rec: &TimestepRecord, params: &PlantParams) -> Option<RejectReason> {
    if rec.cdu_loads.iter().any(|q| !q.is_finite())
        || !rec.baseline_flow.is_finite()
        || !rec.baseline_t_sup.is_finite()
    {
        return Some(RejectReason::MissingValue);
    }
    if rec.cdu_loads.iter().any(|&q| q < 0.0) || rec.cdu_loads.iter().all(|&q| q == 0.0) {
        return Some(RejectReason::NonPositiveLoad);
    }
    if rec.baseline_flow < params.flow_min
        || rec.baseline_flow > params.flow_max
        || rec.baseline_t_sup < params.t_sup_min
        || rec.baseline_t_sup > params.t_sup_max
    {
        return Some(RejectReason::OutOfBoundsBaseline);
    }
    None
}

/// Expected header for a plant with `n_cdus` CDUs.
pub fn csv_header(n_cdus: usize) -> String {
    let width = n_cdus.to_string().len().max(2);
    let mut h = String::from("timestamp");
    for j in 1..=n_cdus {
        h.push_str(&format!(",q_cdu_{j:0width$}"));
    }
    h.push_str(",baseline_flow_kg_s,baseline_t_sup_c");
    h
}

/// Reads and validates a dataset file. Rows failing record invariants are
/// dropped and reported in order; structural problems abort.
pub fn read_dataset(
    path: impl AsRef<Path>,
    params: &PlantParams,
) -> Result<ReadOutcome, TelemetryError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TelemetryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset_from(BufReader::new(file), params)
}

/// Reader-based variant of [`read_dataset`].
pub fn read_dataset_from(
    reader: impl Read,
    params: &PlantParams,
) -> Result<ReadOutcome, TelemetryError> {
    let mut lines = BufReader::new(reader).lines().enumerate();

    let (_, header) = lines.next().ok_or(TelemetryError::Parse {
        line: 1,
        message: "empty file, expected header".into(),
    })?;
    let header = header.map_err(|e| TelemetryError::Parse {
        line: 1,
        message: format!("unreadable header: {e}"),
    })?;
    let cols: Vec<&str> = header.trim_end_matches(['\r', '\n']).split(',').collect();
    if cols.len() < 4
        || cols[0] != "timestamp"
        || cols[cols.len() - 2] != "baseline_flow_kg_s"
        || cols[cols.len() - 1] != "baseline_t_sup_c"
    {
        return Err(TelemetryError::Parse {
            line: 1,
            message: format!("malformed header: {header:?}"),
        });
    }
    let n_cdus = cols.len() - 3;
    let expected = csv_header(n_cdus);
    if header.trim_end_matches(['\r', '\n']) != expected {
        return Err(TelemetryError::Parse {
            line: 1,
            message: format!("malformed header: expected {expected:?}"),
        });
    }

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut last_ts: Option<i64> = None;

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| TelemetryError::Parse {
            line: line_no,
            message: format!("unreadable line: {e}"),
        })?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != n_cdus + 3 {
            return Err(TelemetryError::Parse {
                line: line_no,
                message: format!("expected {} columns, got {}", n_cdus + 3, fields.len()),
            });
        }

        let Ok(timestamp) = fields[0].trim().parse::<i64>() else {
            rejections.push(Rejection {
                line: line_no,
                reason: RejectReason::MissingValue,
            });
            continue;
        };
        let mut numeric_ok = true;
        let mut values = Vec::with_capacity(n_cdus + 2);
        for f in &fields[1..] {
            match f.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    numeric_ok = false;
                    break;
                }
            }
        }
        if !numeric_ok {
            rejections.push(Rejection {
                line: line_no,
                reason: RejectReason::MissingValue,
            });
            continue;
        }

        let rec = TimestepRecord {
            timestamp,
            cdu_loads: values[..n_cdus].to_vec(),
            baseline_flow: values[n_cdus],
            baseline_t_sup: values[n_cdus + 1],
        };
        if let Some(reason) = record_reject_reason(&rec, params) {
            rejections.push(Rejection {
                line: line_no,
                reason,
            });
            continue;
        }
        if let Some(prev) = last_ts
            && timestamp <= prev
        {
            rejections.push(Rejection {
                line: line_no,
                reason: RejectReason::NonIncreasingTimestamp,
            });
            continue;
        }
        last_ts = Some(timestamp);
        records.push(rec);
    }

    if records.is_empty() {
        return Err(TelemetryError::Empty {
            rejected: rejections.len(),
        });
    }
    Ok(ReadOutcome {
        dataset: Dataset {
            records,
            dt: params.dt,
            n_cdus,
        },
        rejections,
    })
}

/// Writes a dataset in the canonical schema. Floats use Rust's shortest
/// round-trip formatting, so write → read → write is byte-stable.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), TelemetryError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| TelemetryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    write_dataset_to(dataset, &mut w).map_err(|source| TelemetryError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writer-based variant of [`write_dataset`].
pub fn write_dataset_to(dataset: &Dataset, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "{}", csv_header(dataset.n_cdus))?;
    for rec in &dataset.records {
        write!(w, "{}", rec.timestamp)?;
        for q in &rec.cdu_loads {
            write!(w, ",{q}")?;
        }
        writeln!(w, ",{},{}", rec.baseline_flow, rec.baseline_t_sup)?;
    }
    w.flush()
}

/// Deterministic 64-bit generator (SplitMix64). Embedded so seeded noise is
/// bit-stable regardless of external crate versions.
#[derive(Debug, Clone)]
pub(crate) struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub(crate) fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub(crate) fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Start of the synthetic year, epoch seconds (2023-01-01T00:00:00Z).
const SYNTHETIC_EPOCH: i64 = 1_672_531_200;
/// Diurnal period in steps (24 h at dt = 600 s).
const DIURNAL_PERIOD_STEPS: f64 = 144.0;
const DIURNAL_AMPLITUDE: f64 = 0.15;
const NOISE_AMPLITUDE: f64 = 0.05;
/// Design temperature rise for the synthetic proportional flow controller, K.
const DELTA_T_DESIGN: f64 = 12.0;
const BASELINE_T_SUP: f64 = 30.0;

/// Generates a synthetic dataset with a configurable per-CDU load spread.
///
/// Per-CDU base loads are linearly spaced so the hottest is `1 + spread`
/// times the coldest, scaled by a shared diurnal sinusoid and seeded ±5%
/// multiplicative noise; total plant load is centered near the nominal heat
/// rejection rate. The baseline operating point mimics a proportional flow
/// controller at a 12 K design rise with a constant 30 °C supply setpoint.
/// Bit-identical output for a fixed seed.
pub fn generate_synthetic(
    n_timesteps: usize,
    n_cdus: usize,
    spread: f64,
    seed: u64,
    params: &PlantParams,
) -> Result<Dataset, TelemetryError> {
    if n_timesteps < 1 {
        return Err(TelemetryError::InvalidGeneratorInput(
            "n_timesteps must be >= 1".into(),
        ));
    }
    if n_cdus < 2 {
        return Err(TelemetryError::InvalidGeneratorInput(
            "n_cdus must be >= 2".into(),
        ));
    }
    if !(0.0..1.0).contains(&spread) {
        return Err(TelemetryError::InvalidGeneratorInput(format!(
            "spread must lie in [0, 1), got {spread}"
        )));
    }

    let mean_base = params.q_rej_nom / n_cdus as f64;
    let base_min = 2.0 * mean_base / (2.0 + spread);
    let base: Vec<f64> = (0..n_cdus)
        .map(|j| base_min * (1.0 + spread * j as f64 / (n_cdus - 1) as f64))
        .collect();

    let mut rng = SplitMix64::new(seed);
    let mut records = Vec::with_capacity(n_timesteps);
    for t in 0..n_timesteps {
        let diurnal = 1.0
            + DIURNAL_AMPLITUDE
                * (2.0 * std::f64::consts::PI * t as f64 / DIURNAL_PERIOD_STEPS).sin();
        let loads: Vec<f64> = base
            .iter()
            .map(|b| b * diurnal * (1.0 + rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE)))
            .collect();
        let q_tot: f64 = loads.iter().sum();
        let baseline_flow =
            (q_tot * 1000.0 / (params.cp * DELTA_T_DESIGN)).clamp(params.flow_min, params.flow_max);
        records.push(TimestepRecord {
            timestamp: SYNTHETIC_EPOCH + (t as i64) * params.dt as i64,
            cdu_loads: loads,
            baseline_flow,
            baseline_t_sup: BASELINE_T_SUP,
        });
    }

    Ok(Dataset {
        records,
        dt: params.dt,
        n_cdus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> PlantParams {
        PlantParams::default()
    }

    fn tiny_csv(rows: &[&str]) -> String {
        let mut s = csv_header(2);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn single_valid_row() {
        let csv = tiny_csv(&["1000,100.0,200.0,190.0,30.0"]);
        let out = read_dataset_from(csv.as_bytes(), &params()).unwrap();
        assert_eq!(out.dataset.records.len(), 1);
        assert!(out.rejections.is_empty());
        assert_eq!(out.dataset.n_cdus, 2);
        assert_eq!(out.dataset.records[0].cdu_loads, vec![100.0, 200.0]);
    }

    #[test]
    fn negative_load_dropped_with_reason() {
        let csv = tiny_csv(&["1000,-5.0,200.0,190.0,30.0", "1600,10.0,20.0,190.0,30.0"]);
        let out = read_dataset_from(csv.as_bytes(), &params()).unwrap();
        assert_eq!(out.dataset.records.len(), 1);
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(out.rejections[0].line, 2);
        assert_eq!(out.rejections[0].reason, RejectReason::NonPositiveLoad);
        assert_eq!(out.rejection_report(), "2,non-positive or negative load\n");
    }

    #[test]
    fn mixed_file_preserves_order_and_counts() {
        let rows = [
            "1000,10,20,190,30", // ok
            "1600,,20,190,30",   // missing value
            "2200,10,20,500,30", // flow out of bounds
            "2800,10,20,190,30", // ok
            "3400,0,0,190,30",   // all-zero loads
            "4000,10,20,190,30", // ok
            "4600,10,20,190,30", // ok
            "4000,10,20,190,30", // non-increasing timestamp
            "5800,10,20,190,45", // t_sup out of bounds
            "6400,10,20,190,30", // ok
        ];
        let csv = tiny_csv(&rows);
        let out = read_dataset_from(csv.as_bytes(), &params()).unwrap();
        assert_eq!(out.dataset.records.len(), 5);
        assert_eq!(out.rejections.len(), 5);
        let lines: Vec<usize> = out.rejections.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 6, 9, 10]);
        let ts: Vec<i64> = out.dataset.records.iter().map(|r| r.timestamp).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn structural_errors_abort_with_line_numbers() {
        let bad_header = "time,foo\n1,2\n";
        let err = read_dataset_from(bad_header.as_bytes(), &params()).unwrap_err();
        assert!(
            matches!(err, TelemetryError::Parse { line: 1, .. }),
            "{err}"
        );

        let wrong_cols = tiny_csv(&["1000,10,20,190,30", "1600,10,20,190"]);
        let err = read_dataset_from(wrong_cols.as_bytes(), &params()).unwrap_err();
        assert!(
            matches!(err, TelemetryError::Parse { line: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn header_shape_for_25_cdus() {
        let h = csv_header(25);
        assert!(h.starts_with("timestamp,q_cdu_01,q_cdu_02,"));
        assert!(h.contains(",q_cdu_25,baseline_flow_kg_s,baseline_t_sup_c"));
    }

    #[test]
    fn generator_is_deterministic() {
        let p = params();
        let a = generate_synthetic(50, 25, 0.24, 7, &p).unwrap();
        let b = generate_synthetic(50, 25, 0.24, 7, &p).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(50, 25, 0.24, 8, &p).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_spread_equalizes_base_loads() {
        let p = params();
        let d = generate_synthetic(200, 25, 0.0, 3, &p).unwrap();
        let means = d.mean_cdu_loads();
        let lo = means.iter().fold(f64::MAX, |a, &b| a.min(b));
        let hi = means.iter().fold(f64::MIN, |a, &b| a.max(b));
        // Only the ±5% noise separates CDUs; means over 200 steps stay close.
        assert!(hi / lo < 1.02, "ratio {}", hi / lo);
    }

    #[test]
    fn spread_sets_hot_cold_mean_ratio() {
        let p = params();
        let d = generate_synthetic(1000, 25, 0.24, 7, &p).unwrap();
        let means = d.mean_cdu_loads();
        let lo = means.iter().fold(f64::MAX, |a, &b| a.min(b));
        let hi = means.iter().fold(f64::MIN, |a, &b| a.max(b));
        assert!((hi / lo - 1.24).abs() < 0.01, "ratio {}", hi / lo);
        // Total load centered near the nominal rejection rate.
        let mean_total: f64 = d
            .records
            .iter()
            .map(|r| r.cdu_loads.iter().sum::<f64>())
            .sum::<f64>()
            / d.records.len() as f64;
        assert!((mean_total / p.q_rej_nom - 1.0).abs() < 0.03);
    }

    #[test]
    fn generator_rejects_bad_input() {
        let p = params();
        assert!(generate_synthetic(0, 25, 0.2, 1, &p).is_err());
        assert!(generate_synthetic(10, 1, 0.2, 1, &p).is_err());
        assert!(generate_synthetic(10, 25, 1.0, 1, &p).is_err());
        assert!(generate_synthetic(10, 25, -0.1, 1, &p).is_err());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = params();
        let d = generate_synthetic(20, 5, 0.3, 11, &p).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf).unwrap();
        let again = read_dataset_from(buf.as_slice(), &p).unwrap();
        assert!(again.rejections.is_empty());
        assert_eq!(again.dataset, d);
        let mut buf2 = Vec::new();
        write_dataset_to(&again.dataset, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    proptest! {
        #[test]
        fn synthetic_records_satisfy_invariants(
            steps in 1usize..80,
            n_cdus in 2usize..30,
            spread in 0.0f64..0.99,
            seed in any::<u64>(),
        ) {
            let p = params();
            let d = generate_synthetic(steps, n_cdus, spread, seed, &p).unwrap();
            prop_assert_eq!(d.records.len(), steps);
            for rec in &d.records {
                prop_assert!(record_reject_reason(rec, &p).is_none());
            }
            let ts: Vec<i64> = d.records.iter().map(|r| r.timestamp).collect();
            prop_assert!(ts.windows(2).all(|w| w[1] - w[0] == p.dt as i64));
        }

        #[test]
        fn round_trip_accepts_everything_it_wrote(
            steps in 1usize..40,
            seed in any::<u64>(),
        ) {
            let p = params();
            let d = generate_synthetic(steps, 4, 0.4, seed, &p).unwrap();
            let mut buf = Vec::new();
            write_dataset_to(&d, &mut buf).unwrap();
            let out = read_dataset_from(buf.as_slice(), &p).unwrap();
            prop_assert!(out.rejections.is_empty());
            prop_assert_eq!(out.dataset, d);
        }
    }
}
