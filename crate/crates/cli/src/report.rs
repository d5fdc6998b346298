//! Deterministic report emission: schema-versioned JSON documents plus
//! companion CSV tables. Field order, float formatting, and row order are
//! all fixed, so identical runs produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tevim::estimands::{AnalysisSummary, NullTestResult, ScalarEstimate, TevimEstimate};
use tevim::simulation::{write_metrics_csv, McRow, Truths};
use tevim::{Error, Result};

use crate::config::{RunConfig, SimulateConfig, SubsetNames};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

fn tool() -> Tool {
    Tool { name: "tevim", version: env!("CARGO_PKG_VERSION") }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    io_err(path, std::io::Error::other(e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Pretty JSON with a trailing newline. serde_json prints floats in their
/// shortest round-trip form, so values read back bit-exactly.
pub fn to_json_text(value: &impl Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numeric(format!("serializing report: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Shortest round-trip float formatting for CSV cells.
fn fnum(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Serialize)]
struct ScalarOut {
    value: f64,
    se: f64,
    ci: [f64; 2],
    p_value: f64,
}

impl From<&ScalarEstimate<f64>> for ScalarOut {
    fn from(est: &ScalarEstimate<f64>) -> Self {
        ScalarOut { value: est.value, se: est.se, ci: [est.ci.0, est.ci.1], p_value: est.p_value }
    }
}

#[derive(Debug, Clone, Serialize)]
struct VteOut {
    value: f64,
    se: f64,
    ci: [f64; 2],
    /// One-sided: evidence of any effect heterogeneity at all.
    p_value: f64,
    /// Effect-scale standard deviation sqrt(max(value, 0)).
    root_value: f64,
    root_ci: [f64; 2],
    negative: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SubsetRow {
    name: String,
    columns: Vec<String>,
    /// Unscaled heterogeneity attributable to this subset.
    theta: f64,
    /// Share of the total effect variance, theta / vte.
    share: f64,
    se: f64,
    ci_raw: [f64; 2],
    ci_truncated: [f64; 2],
    p_value: f64,
    negative_vte: bool,
}

#[derive(Debug, Clone, Serialize)]
struct NullTestRow {
    name: String,
    columns: Vec<String>,
    statistic: f64,
    p_value: f64,
    effect_variance: ScalarOut,
    explained_variance: ScalarOut,
    half_sizes: [usize; 2],
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    schema_version: u32,
    tool: Tool,
    seed: u64,
    config: &'a RunConfig,
    n: usize,
    notes: Vec<String>,
    warnings: &'a [String],
    ate: ScalarOut,
    vte: VteOut,
    /// vte / ate^2, bounding the fraction of the population harmed by
    /// treatment; present only when the average effect is positive.
    negative_effect_bound: Option<ScalarOut>,
    /// Sorted by share, largest first.
    subsets: Vec<SubsetRow>,
    null_tests: Option<Vec<NullTestRow>>,
}

fn subset_row(est: &TevimEstimate<f64>, names: &SubsetNames) -> SubsetRow {
    let (name, columns) = names
        .get(&est.subset)
        .cloned()
        .unwrap_or_else(|| (est.subset.to_string(), Vec::new()));
    SubsetRow {
        name,
        columns,
        theta: est.unscaled,
        share: est.value,
        se: est.se,
        ci_raw: [est.ci_raw.0, est.ci_raw.1],
        ci_truncated: [est.ci_truncated.0, est.ci_truncated.1],
        p_value: est.p_value,
        negative_vte: est.negative_vte,
    }
}

fn null_test_row(result: &NullTestResult<f64>, names: &SubsetNames) -> NullTestRow {
    let (name, columns) = names
        .get(&result.subset)
        .cloned()
        .unwrap_or_else(|| (result.subset.to_string(), Vec::new()));
    NullTestRow {
        name,
        columns,
        statistic: result.statistic,
        p_value: result.p_value,
        effect_variance: (&result.effect_variance).into(),
        explained_variance: (&result.explained_variance).into(),
        half_sizes: [result.half_sizes.0, result.half_sizes.1],
    }
}

fn estimate_notes(cfg: &RunConfig) -> Vec<String> {
    let roles = &cfg.learners;
    let label = |spec: &Option<tevim::learners::LearnerSpec>| {
        spec.as_ref().map_or("unset", |s| s.label())
    };
    let mut notes = vec![format!(
        "learners: outcome={}, propensity={}, cate={}, subset={} — the crate's built-in \
         implementations; no external learner stack is involved",
        label(&roles.outcome),
        roles.propensity.as_ref().map_or("unset", |p| p.label()),
        label(&roles.cate),
        label(&roles.subset),
    )];
    match cfg.mode {
        tevim::data::Mode::Binary => {
            notes.push("folds are stratified by treatment arm".to_string());
        }
        tevim::data::Mode::Continuous => {
            notes.push(format!(
                "treatment-variance predictions are floored at {}",
                cfg.variance_floor
            ));
        }
    }
    notes
}

/// Writes `report.json` and `subsets.csv` into `out_dir`, returning their
/// paths.
pub fn write_estimate(
    out_dir: &Path,
    cfg: &RunConfig,
    summary: &AnalysisSummary<f64>,
    null_tests: Option<&[NullTestResult<f64>]>,
    names: &SubsetNames,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let rows: Vec<SubsetRow> = summary.subsets.iter().map(|est| subset_row(est, names)).collect();
    let report = EstimateReport {
        schema_version: SCHEMA_VERSION,
        tool: tool(),
        seed: cfg.seed,
        config: cfg,
        n: summary.n,
        notes: estimate_notes(cfg),
        warnings: &summary.warnings,
        ate: (&summary.ate).into(),
        vte: VteOut {
            value: summary.vte.estimate.value,
            se: summary.vte.estimate.se,
            ci: [summary.vte.estimate.ci.0, summary.vte.estimate.ci.1],
            p_value: summary.vte.estimate.p_value,
            root_value: summary.vte.root_value,
            root_ci: [summary.vte.root_ci.0, summary.vte.root_ci.1],
            negative: summary.vte.negative,
        },
        negative_effect_bound: summary.negative_effect_bound.as_ref().map(ScalarOut::from),
        subsets: rows.clone(),
        null_tests: null_tests.map(|tests| tests.iter().map(|t| null_test_row(t, names)).collect()),
    };
    let report_path = out_dir.join("report.json");
    write_text(&report_path, &to_json_text(&report)?)?;
    let csv_path = out_dir.join("subsets.csv");
    write_subsets_csv(&csv_path, &rows)?;
    Ok((report_path, csv_path))
}

/// The same table as the report's `subsets` array, one row per subset in the
/// same order (share descending).
fn write_subsets_csv(path: &Path, rows: &[SubsetRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record([
            "name",
            "columns",
            "theta",
            "share",
            "se",
            "ci_raw_lo",
            "ci_raw_hi",
            "ci_truncated_lo",
            "ci_truncated_hi",
            "p_value",
            "negative_vte",
        ])
        .map_err(|e| csv_err(path, e))?;
    for row in rows {
        writer
            .write_record([
                row.name.clone(),
                row.columns.join(";"),
                fnum(row.theta),
                fnum(row.share),
                fnum(row.se),
                fnum(row.ci_raw[0]),
                fnum(row.ci_raw[1]),
                fnum(row.ci_truncated[0]),
                fnum(row.ci_truncated[1]),
                fnum(row.p_value),
                row.negative_vte.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Serialize)]
struct TruthsOut {
    resolution: usize,
    ate: f64,
    vte: f64,
    theta1: f64,
    theta2: f64,
    psi1: f64,
    psi2: f64,
    negative_effect_bound: f64,
}

impl From<&Truths> for TruthsOut {
    fn from(truths: &Truths) -> Self {
        TruthsOut {
            resolution: truths.resolution,
            ate: truths.ate,
            vte: truths.vte,
            theta1: truths.theta1,
            theta2: truths.theta2,
            psi1: truths.psi1,
            psi2: truths.psi2,
            negative_effect_bound: truths.negative_effect_bound,
        }
    }
}

#[derive(Serialize)]
struct TruthsReport {
    schema_version: u32,
    tool: Tool,
    truths: TruthsOut,
}

/// The `truths` command's JSON document.
pub fn truths_text(truths: &Truths) -> Result<String> {
    to_json_text(&TruthsReport {
        schema_version: SCHEMA_VERSION,
        tool: tool(),
        truths: truths.into(),
    })
}

/// Writes `truths.json` into `out_dir`, returning its path.
pub fn write_truths(out_dir: &Path, truths: &Truths) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let path = out_dir.join("truths.json");
    write_text(&path, &truths_text(truths)?)?;
    Ok(path)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    schema_version: u32,
    tool: Tool,
    seed: u64,
    config: &'a SimulateConfig,
    truths: TruthsOut,
    /// Rows in metrics.csv: one per (algorithm, learner, n, subset) cell.
    cells: usize,
    /// Failed (replicate, cell) pairs summed over cells; per-cell counts are
    /// in the metrics table.
    failed_cells: usize,
    metrics_file: &'static str,
}

/// Writes `metrics.csv` and `summary.json` into `out_dir`, returning their
/// paths.
pub fn write_simulate(
    out_dir: &Path,
    cfg: &SimulateConfig,
    truths: &Truths,
    rows: &[McRow],
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let metrics_path = out_dir.join("metrics.csv");
    write_metrics_csv(rows, &metrics_path)?;
    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        tool: tool(),
        seed: cfg.seed,
        config: cfg,
        truths: truths.into(),
        cells: rows.len(),
        failed_cells: rows.iter().map(|r| r.failures).sum(),
        metrics_file: "metrics.csv",
    };
    let summary_path = out_dir.join("summary.json");
    write_text(&summary_path, &to_json_text(&summary)?)?;
    Ok((metrics_path, summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_cells_round_trip() {
        assert_eq!(fnum(0.1), "0.1");
        assert_eq!(fnum(1.0), "1");
        let v = 0.316_147_212_345_678_9_f64;
        assert_eq!(fnum(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn truths_report_shape() {
        let truths = Truths {
            ate: 1.39,
            vte: 1.0,
            theta1: 0.32,
            theta2: 0.68,
            psi1: 0.32,
            psi2: 0.68,
            negative_effect_bound: 0.518,
            resolution: 2000,
        };
        let text = truths_text(&truths).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["schema_version"], 1);
        assert_eq!(value["tool"]["name"], "tevim");
        assert_eq!(value["truths"]["psi1"], 0.32);
        assert_eq!(value["truths"]["negative_effect_bound"], 0.518);
        assert!(text.ends_with('\n'));
    }
}
