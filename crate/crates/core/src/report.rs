//! JSON and CSV serialization of metric reports.

use crate::metrics::{GroupKey, MetricsReport, MetricsSummary, TrendSeries};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// The one decimal format shared by CSV files and SVG labels.
pub fn fmt_metric(value: f64) -> String {
    format!("{value:.6}")
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "scope",
    "law_id",
    "identity_type",
    "checkpoint",
    "n_samples",
    "n_instances",
    "n_excluded",
    "n_excluded_samples",
    "rfs",
    "f1",
    "lss",
    "beta",
];

pub const TREND_COLUMNS: [&str; 6] = ["checkpoint", "rfs", "f1", "lss", "n_samples", "n_excluded"];
pub const SWEEP_COLUMNS: [&str; 4] = ["beta", "lss", "rfs", "f1"];

fn summary_fields(m: Option<&MetricsSummary>, beta: f64) -> [String; 8] {
    match m {
        Some(m) => [
            m.n_samples.to_string(),
            m.n_instances.to_string(),
            m.n_excluded.to_string(),
            m.n_excluded_samples.to_string(),
            fmt_metric(m.rfs),
            fmt_metric(m.f1),
            fmt_metric(m.lss),
            fmt_metric(m.beta),
        ],
        None => [
            "0".into(),
            "0".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            fmt_metric(beta),
        ],
    }
}

/// One row for the overall scope, then one per group cell. Empty cells keep
/// their key columns and leave the metric columns blank.
pub fn report_csv(report: &MetricsReport) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS)?;
    let beta = report.overall.beta;
    let mut overall = vec!["overall".to_string(), String::new(), String::new(), String::new()];
    overall.extend(summary_fields(Some(&report.overall), beta));
    w.write_record(&overall)?;
    for cell in &report.groups {
        let key = |k: GroupKey| cell.key.get(&k).cloned().unwrap_or_default();
        let mut row = vec![
            "group".to_string(),
            key(GroupKey::LawId),
            key(GroupKey::IdentityType),
            key(GroupKey::Checkpoint),
        ];
        row.extend(summary_fields(cell.metrics.as_ref(), beta));
        w.write_record(&row)?;
    }
    into_string(w)
}

pub fn trend_csv(series: &TrendSeries) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TREND_COLUMNS)?;
    for row in &series.rows {
        let m = &row.metrics;
        w.write_record([
            row.checkpoint.clone(),
            fmt_metric(m.rfs),
            fmt_metric(m.f1),
            fmt_metric(m.lss),
            m.n_samples.to_string(),
            m.n_excluded.to_string(),
        ])?;
    }
    into_string(w)
}

pub fn sweep_csv(rfs: f64, f1: f64, sweep: &[(f64, f64)]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS)?;
    for (beta, lss) in sweep {
        w.write_record([fmt_metric(*beta), fmt_metric(*lss), fmt_metric(rfs), fmt_metric(f1)])?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn report_json(report: &MetricsReport) -> Result<String, ReportError> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ConfusionMatrix, GroupCell, ReportMeta, TrendRow};
    use std::collections::BTreeMap;

    fn summary(rfs: f64, f1: f64, lss: f64) -> MetricsSummary {
        MetricsSummary {
            n_samples: 3,
            n_instances: 9,
            n_excluded: 1,
            n_excluded_samples: 1,
            rfs,
            f1,
            lss,
            beta: 1.0,
            confusion: ConfusionMatrix::default(),
        }
    }

    #[test]
    fn report_rows() {
        let key: BTreeMap<GroupKey, String> =
            [(GroupKey::LawId, "ipc_300".to_string()), (GroupKey::IdentityType, "region".to_string())].into();
        let report = MetricsReport {
            overall: summary(1.0, 0.5, 2.0 / 3.0),
            n_missing: 0,
            group_keys: vec![GroupKey::LawId, GroupKey::IdentityType],
            groups: vec![
                GroupCell { key: key.clone(), metrics: Some(summary(0.25, 0.5, 1.0 / 3.0)) },
                GroupCell { key, metrics: None },
            ],
            meta: ReportMeta::default(),
        };
        let csv = report_csv(&report).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], REPORT_COLUMNS.join(","));
        assert_eq!(lines[1], "overall,,,,3,9,1,1,1.000000,0.500000,0.666667,1.000000");
        assert_eq!(lines[2], "group,ipc_300,region,,3,9,1,1,0.250000,0.500000,0.333333,1.000000");
        assert_eq!(lines[3], "group,ipc_300,region,,0,0,,,,,,1.000000");
    }

    #[test]
    fn trend_and_sweep_columns() {
        let series = TrendSeries {
            rows: vec![TrendRow { checkpoint: "t0".into(), metrics: summary(1.0, 0.0, 0.0) }],
            warnings: vec![],
        };
        let csv = trend_csv(&series).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "checkpoint,rfs,f1,lss,n_samples,n_excluded");
        assert_eq!(csv.lines().nth(1).unwrap(), "t0,1.000000,0.000000,0.000000,3,1");
        let sweep = sweep_csv(0.9, 0.3, &[(0.01, 0.3), (100.0, 0.9)]).unwrap();
        assert_eq!(sweep.lines().nth(2).unwrap(), "100.000000,0.900000,0.900000,0.300000");
    }
}
