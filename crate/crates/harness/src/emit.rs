//! Result files: metrics CSV, bound-report JSON, scenario echo, density
//! plot data and wall-clock timings.
//!
//! Every float is written with 17 significant digits so that a file
//! round-trips to the exact value. Timings live in their own file, so every
//! other artifact is byte-identical for a fixed scenario and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bounds::monitors::Violation;
use bounds::BoundReport;
use ctm::Trajectory;
use dlkcf::metrics::RunMetrics;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::run::{RunRecord, Timings};
use crate::scenario::{FilterKind, Scenario};
use crate::studies::NeesStudy;
use crate::HarnessError;

/// Schema of the per-step metrics CSV.
pub const METRICS_SCHEMA: &str = "dlkcf-metrics/1";
/// Schema of the density plot-data CSV.
pub const DENSITY_SCHEMA: &str = "dlkcf-density/1";
/// Schema of the per-step NEES CSV.
pub const NEES_SCHEMA: &str = "dlkcf-nees/1";
/// Schema of the bound-report and summary JSON files.
pub const REPORT_SCHEMA: &str = "dlkcf-report/1";

/// Formats a float with 17 significant digits; non-finite values are
/// written as `NaN`, `inf` and `-inf`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

/// Pretty JSON formatter writing floats with 17 significant digits.
struct SigFormatter(PrettyFormatter<'static>);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(format!("{value:.16e}").as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Pretty JSON with 17-significant-digit floats. Non-finite floats become
/// `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("JSON output is UTF-8"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.to_path_buf(), source }
}

/// Writes `value` as JSON to `path`.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = to_json(value).map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })?;
    std::fs::write(path, text).map_err(io_err(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<(), HarnessError> {
    w.flush().map_err(io_err(path))
}

/// Creates `dir` and its parents.
pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Per-step metrics of one run. The first column holds the schema id.
pub fn write_metrics_csv(path: &Path, record: &RunRecord) -> Result<(), HarnessError> {
    let sections = record.steps.first().map_or(0, |s| s.nees.len());
    let mut header = vec!["schema".to_string(), "k".into(), "disagreement".into(), "error".into(), "lyapunov".into()];
    for i in 0..sections {
        header.extend([format!("nees_{i}"), format!("inv_cov_min_{i}"), format!("inv_cov_max_{i}"), format!("gain_inf_{i}")]);
    }
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(csv_err(path))?;
    for st in &record.steps {
        let mut row = vec![METRICS_SCHEMA.to_string(), st.k.to_string(), format_opt(st.disagreement), format_f64(st.error), format_opt(st.lyapunov)];
        for i in 0..sections {
            row.push(format_opt(st.nees.get(i).copied().flatten()));
            row.push(format_opt(st.inv_cov_min.get(i).copied()));
            row.push(format_opt(st.inv_cov_max.get(i).copied()));
            row.push(format_opt(st.gain_inf.get(i).copied()));
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(path, w)
}

/// Density field per step (rows) and cell (columns) for heatmap plotting.
pub fn write_density_csv(path: &Path, trajectory: &Trajectory) -> Result<(), HarnessError> {
    let n = trajectory.profiles.first().map_or(0, |p| p.rho.len());
    let mut header = vec!["schema".to_string(), "k".into()];
    header.extend((0..n).map(|l| format!("cell_{l}")));
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(csv_err(path))?;
    for (k, p) in trajectory.profiles.iter().enumerate() {
        let mut row = vec![DENSITY_SCHEMA.to_string(), k.to_string()];
        row.extend(p.rho.iter().map(|&x| format_f64(x)));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(path, w)
}

/// Run-averaged NEES per step and section.
pub fn write_nees_csv(path: &Path, study: &NeesStudy) -> Result<(), HarnessError> {
    let sections = study.averages.len();
    let steps = study.averages.first().map_or(0, Vec::len);
    let mut header = vec!["schema".to_string(), "step".into()];
    header.extend((0..sections).map(|i| format!("nees_{i}")));
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(csv_err(path))?;
    for s in 0..steps {
        let mut row = vec![NEES_SCHEMA.to_string(), s.to_string()];
        row.extend(study.averages.iter().map(|a| format_opt(a[s])));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(path, w)
}

/// Bound reports, monitor violations and run totals of one record.
#[derive(Debug, Clone, Serialize)]
pub struct BoundFile<'a> {
    /// Always [`REPORT_SCHEMA`].
    pub schema: &'static str,
    /// Scenario hash.
    pub scenario_hash: &'a str,
    /// Estimator.
    pub filter: FilterKind,
    /// Run seed.
    pub seed: u64,
    /// Per-section bound reports.
    pub reports: &'a [BoundReport],
    /// Monitor violations.
    pub violations: &'a [Violation],
    /// Run totals without timings.
    pub totals: RunMetrics,
}

/// Wall-clock data of one record.
#[derive(Debug, Clone, Serialize)]
pub struct TimingFile<'a> {
    /// Always [`REPORT_SCHEMA`].
    pub schema: &'static str,
    /// Estimator.
    pub filter: FilterKind,
    /// Run seed.
    pub seed: u64,
    /// Timings.
    pub timings: &'a Timings,
}

/// Paths written for one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordFiles {
    /// Per-step metrics CSV.
    pub metrics: PathBuf,
    /// Bound-report JSON.
    pub bounds: PathBuf,
    /// Timings JSON.
    pub timings: PathBuf,
}

/// File stem of a record: `<filter>-seed<seed>`.
pub fn record_stem(filter: FilterKind, seed: u64) -> String {
    format!("{}-seed{seed}", filter.name())
}

/// Writes the metrics CSV, bound-report JSON and timings JSON of `record`
/// into `dir`.
pub fn emit(record: &RunRecord, dir: &Path) -> Result<RecordFiles, HarnessError> {
    ensure_dir(dir)?;
    let stem = record_stem(record.filter, record.seed);
    let files = RecordFiles {
        metrics: dir.join(format!("{stem}-metrics.csv")),
        bounds: dir.join(format!("{stem}-bounds.json")),
        timings: dir.join(format!("{stem}-timings.json")),
    };
    write_metrics_csv(&files.metrics, record)?;
    let mut totals = record.totals.clone();
    totals.agent_seconds = Vec::new();
    let bound_file = BoundFile {
        schema: REPORT_SCHEMA,
        scenario_hash: &record.scenario_hash,
        filter: record.filter,
        seed: record.seed,
        reports: &record.bounds,
        violations: &record.violations,
        totals,
    };
    write_json(&files.bounds, &bound_file)?;
    write_json(&files.timings, &TimingFile { schema: REPORT_SCHEMA, filter: record.filter, seed: record.seed, timings: &record.timings })?;
    Ok(files)
}

/// Writes the scenario echo `scenario.json` into `dir`.
pub fn emit_scenario(scenario: &Scenario, dir: &Path) -> Result<PathBuf, HarnessError> {
    ensure_dir(dir)?;
    let path = dir.join("scenario.json");
    write_json(&path, scenario)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(format_f64(f64::NAN), "NaN");
        assert_eq!(format_f64(f64::NEG_INFINITY), "-inf");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-300] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_floats_round_trip() {
        let v = vec![0.1, 1.0 / 3.0, 2.5e-17];
        let text = to_json(&v).unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(to_json(&f64::NAN).unwrap(), "null\n");
    }
}
