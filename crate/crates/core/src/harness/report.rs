//! Report rows, aggregates, and the CSV/JSON emitters plus the matching
//! readers. Everything the harness writes can be read back by the functions
//! here.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::census::MotifId;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{file}: bad field {field}: {value:?}")]
    BadField {
        file: String,
        field: &'static str,
        value: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub const REPORT_HEADER: [&str; 10] = [
    "run_id",
    "seed",
    "dataset",
    "model",
    "attack",
    "asr",
    "amc",
    "bad",
    "benign_acc",
    "wall_time_s",
];

/// One experiment run. `amc` is empty when no attack succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: String,
    pub seed: u64,
    pub dataset: String,
    pub model: String,
    pub attack: String,
    pub asr: f64,
    pub amc: Option<f64>,
    pub bad: f64,
    pub benign_acc: f64,
    pub wall_time_s: f64,
}

/// A run that failed; kept in the report instead of aborting the others.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: String,
    pub seed: u64,
    pub attack: String,
    pub error: String,
}

/// Mean and population standard deviation per metric for one
/// `(dataset, model, attack)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub model: String,
    pub attack: String,
    pub runs: usize,
    pub asr: (f64, f64),
    pub amc: Option<(f64, f64)>,
    pub bad: (f64, f64),
    pub benign_acc: (f64, f64),
    pub wall_time_s: (f64, f64),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<RunRow>,
    pub failures: Vec<RunFailure>,
    /// Wall-clock timestamp of report creation (milliseconds since the
    /// epoch); deliberately kept out of the CSV rows.
    pub generated_unix_ms: Option<u64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ExperimentReport {
    pub fn new(rows: Vec<RunRow>, failures: Vec<RunFailure>) -> Self {
        Self {
            rows,
            failures,
            generated_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_millis() as u64),
        }
    }

    /// One aggregate per `(dataset, model, attack)` group, in first-seen
    /// order.
    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut order: Vec<(String, String, String)> = Vec::new();
        for r in &self.rows {
            let key = (r.dataset.clone(), r.model.clone(), r.attack.clone());
            if !order.contains(&key) {
                order.push(key);
            }
        }
        order
            .into_iter()
            .map(|(dataset, model, attack)| {
                let group: Vec<&RunRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.dataset == dataset && r.model == model && r.attack == attack)
                    .collect();
                let col = |f: fn(&RunRow) -> f64| {
                    let vals: Vec<f64> = group.iter().map(|r| f(r)).collect();
                    mean_std(&vals)
                };
                let amc_vals: Vec<f64> = group.iter().filter_map(|r| r.amc).collect();
                AggregateRow {
                    dataset,
                    model,
                    attack,
                    runs: group.len(),
                    asr: col(|r| r.asr),
                    amc: (!amc_vals.is_empty()).then(|| mean_std(&amc_vals)),
                    bad: col(|r| r.bad),
                    benign_acc: col(|r| r.benign_acc),
                    wall_time_s: col(|r| r.wall_time_s),
                }
            })
            .collect()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn fmt_pair(p: (f64, f64)) -> String {
    format!("{:.6}\u{b1}{:.6}", p.0, p.1)
}

fn parse_f64(file: &str, field: &'static str, s: &str) -> Result<f64, ReportError> {
    s.trim().parse().map_err(|_| ReportError::BadField {
        file: file.to_string(),
        field,
        value: s.to_string(),
    })
}

fn parse_pair(file: &str, field: &'static str, s: &str) -> Result<(f64, f64), ReportError> {
    match s.split_once('\u{b1}') {
        Some((m, sd)) => Ok((parse_f64(file, field, m)?, parse_f64(file, field, sd)?)),
        None => Ok((parse_f64(file, field, s)?, 0.0)),
    }
}

/// Writes per-run rows followed by one `aggregate` row per group; aggregate
/// metric cells carry `mean±std`.
pub fn write_report_csv(report: &ExperimentReport, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(ReportError::Csv)?;
    w.write_record(REPORT_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.run_id.clone(),
            r.seed.to_string(),
            r.dataset.clone(),
            r.model.clone(),
            r.attack.clone(),
            format!("{:.6}", r.asr),
            fmt_opt(r.amc),
            format!("{:.6}", r.bad),
            format!("{:.6}", r.benign_acc),
            format!("{:.6}", r.wall_time_s),
        ])?;
    }
    for a in report.aggregates() {
        w.write_record([
            "aggregate".to_string(),
            String::new(),
            a.dataset.clone(),
            a.model.clone(),
            a.attack.clone(),
            fmt_pair(a.asr),
            a.amc.map(fmt_pair).unwrap_or_default(),
            fmt_pair(a.bad),
            fmt_pair(a.benign_acc),
            fmt_pair(a.wall_time_s),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads a report CSV back: per-run rows plus any aggregate rows.
pub fn read_report_csv(path: &Path) -> Result<(Vec<RunRow>, Vec<AggregateRow>), ReportError> {
    let file = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(ReportError::Csv)?;
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for record in reader.records() {
        let rec = record?;
        let get = |i: usize| rec.get(i).unwrap_or_default().to_string();
        if rec.get(0) == Some("aggregate") {
            let amc_raw = get(6);
            aggregates.push(AggregateRow {
                dataset: get(2),
                model: get(3),
                attack: get(4),
                runs: 0,
                asr: parse_pair(&file, "asr", &get(5))?,
                amc: if amc_raw.is_empty() {
                    None
                } else {
                    Some(parse_pair(&file, "amc", &amc_raw)?)
                },
                bad: parse_pair(&file, "bad", &get(7))?,
                benign_acc: parse_pair(&file, "benign_acc", &get(8))?,
                wall_time_s: parse_pair(&file, "wall_time_s", &get(9))?,
            });
        } else {
            let amc_raw = get(6);
            rows.push(RunRow {
                run_id: get(0),
                seed: parse_f64(&file, "seed", &get(1))? as u64,
                dataset: get(2),
                model: get(3),
                attack: get(4),
                asr: parse_f64(&file, "asr", &get(5))?,
                amc: if amc_raw.is_empty() {
                    None
                } else {
                    Some(parse_f64(&file, "amc", &amc_raw)?)
                },
                bad: parse_f64(&file, "bad", &get(7))?,
                benign_acc: parse_f64(&file, "benign_acc", &get(8))?,
                wall_time_s: parse_f64(&file, "wall_time_s", &get(9))?,
            });
        }
    }
    Ok((rows, aggregates))
}

pub fn write_report_json(report: &ExperimentReport, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, serde_json::to_string_pretty(report)?).map_err(|e| io_err(path, e))
}

pub fn read_report_json(path: &Path) -> Result<ExperimentReport, ReportError> {
    Ok(serde_json::from_str(
        &std::fs::read_to_string(path).map_err(|e| io_err(path, e))?,
    )?)
}

/// Census CSV: `motif, tar_avg, oth_avg, absent`.
pub fn write_census_csv(
    dist: &crate::census::MotifDistribution,
    path: &Path,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(ReportError::Csv)?;
    w.write_record(["motif", "tar_avg", "oth_avg", "absent"])?;
    for id in MotifId::ALL {
        w.write_record([
            id.name().to_string(),
            format!("{:.6}", dist.tar_avg(id)),
            format!("{:.6}", dist.oth_avg(id)),
            dist.is_absent(id).to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_census_csv(path: &Path) -> Result<Vec<(MotifId, f64, f64, bool)>, ReportError> {
    let file = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(ReportError::Csv)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let rec = record?;
        let get = |i: usize| rec.get(i).unwrap_or_default().to_string();
        let motif = MotifId::parse(&get(0)).ok_or_else(|| ReportError::BadField {
            file: file.clone(),
            field: "motif",
            value: get(0),
        })?;
        out.push((
            motif,
            parse_f64(&file, "tar_avg", &get(1))?,
            parse_f64(&file, "oth_avg", &get(2))?,
            get(3) == "true",
        ));
    }
    Ok(out)
}

/// Per-motif scan row (the data behind the distribution-vs-success figure).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub motif: MotifId,
    pub tar_avg: f64,
    pub oth_avg: f64,
    /// Mean success rate with this motif as the randomly placed trigger;
    /// empty when the per-motif run failed.
    pub asr: Option<f64>,
    pub error: Option<String>,
}

pub fn write_scan_csv(rows: &[ScanRow], path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(ReportError::Csv)?;
    w.write_record(["motif", "tar_avg", "oth_avg", "asr"])?;
    for r in rows {
        w.write_record([
            r.motif.name().to_string(),
            format!("{:.6}", r.tar_avg),
            format!("{:.6}", r.oth_avg),
            fmt_opt(r.asr),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_scan_csv(path: &Path) -> Result<Vec<ScanRow>, ReportError> {
    let file = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(ReportError::Csv)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let rec = record?;
        let get = |i: usize| rec.get(i).unwrap_or_default().to_string();
        let motif = MotifId::parse(&get(0)).ok_or_else(|| ReportError::BadField {
            file: file.clone(),
            field: "motif",
            value: get(0),
        })?;
        let asr_raw = get(3);
        out.push(ScanRow {
            motif,
            tar_avg: parse_f64(&file, "tar_avg", &get(1))?,
            oth_avg: parse_f64(&file, "oth_avg", &get(2))?,
            asr: if asr_raw.is_empty() {
                None
            } else {
                Some(parse_f64(&file, "asr", &asr_raw)?)
            },
            error: None,
        });
    }
    Ok(out)
}

/// Train-motif x infer-motif success matrix; failed cells stay empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesGrid {
    pub cells: Vec<Vec<Option<f64>>>,
}

impl SeriesGrid {
    pub fn get(&self, train: MotifId, infer: MotifId) -> Option<f64> {
        self.cells[train.index()][infer.index()]
    }

    /// Mean of the defined entries in one infer column.
    pub fn column_mean(&self, infer: MotifId) -> Option<f64> {
        let vals: Vec<f64> = self
            .cells
            .iter()
            .filter_map(|row| row[infer.index()])
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn write_grid_csv(grid: &SeriesGrid, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(ReportError::Csv)?;
    let mut header = vec!["train/infer".to_string()];
    header.extend(MotifId::ALL.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for train in MotifId::ALL {
        let mut rec = vec![train.name().to_string()];
        for infer in MotifId::ALL {
            rec.push(fmt_opt(grid.get(train, infer)));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> Result<SeriesGrid, ReportError> {
    let file = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(ReportError::Csv)?;
    let mut cells = vec![vec![None; 8]; 8];
    for record in reader.records() {
        let rec = record?;
        let train = MotifId::parse(rec.get(0).unwrap_or_default()).ok_or_else(|| {
            ReportError::BadField {
                file: file.clone(),
                field: "train",
                value: rec.get(0).unwrap_or_default().to_string(),
            }
        })?;
        for (j, infer) in MotifId::ALL.iter().enumerate() {
            let raw = rec.get(j + 1).unwrap_or_default();
            cells[train.index()][infer.index()] = if raw.is_empty() {
                None
            } else {
                Some(parse_f64(&file, "cell", raw)?)
            };
        }
    }
    Ok(SeriesGrid { cells })
}

/// One sensitivity-sweep measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub asr_mean: f64,
    pub asr_std: f64,
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(ReportError::Csv)?;
    w.write_record(["param", "value", "asr_mean", "asr_std"])?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            format!("{}", r.value),
            format!("{:.6}", r.asr_mean),
            format!("{:.6}", r.asr_std),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>, ReportError> {
    let file = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(ReportError::Csv)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let rec = record?;
        let get = |i: usize| rec.get(i).unwrap_or_default().to_string();
        out.push(SweepRow {
            param: get(0),
            value: parse_f64(&file, "value", &get(1))?,
            asr_mean: parse_f64(&file, "asr_mean", &get(2))?,
            asr_std: parse_f64(&file, "asr_std", &get(3))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ExperimentReport {
        let rows = (0..5)
            .map(|i| RunRow {
                run_id: format!("run-{i}"),
                seed: 7 + i as u64,
                dataset: "smoke".into(),
                model: "gcn".into(),
                attack: "motif-backdoor".into(),
                asr: 0.8 + 0.01 * i as f64,
                amc: if i == 2 { None } else { Some(0.9) },
                bad: 0.02,
                benign_acc: 0.96,
                wall_time_s: 1.5,
            })
            .collect();
        ExperimentReport::new(rows, vec![])
    }

    #[test]
    fn aggregate_mean_matches_arithmetic_mean() {
        let report = sample_report();
        let agg = &report.aggregates()[0];
        let mean: f64 = report.rows.iter().map(|r| r.asr).sum::<f64>() / 5.0;
        assert!((agg.asr.0 - mean).abs() < 1e-12);
        assert_eq!(agg.runs, 5);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let report = sample_report();
        write_report_csv(&report, &path).unwrap();
        let (rows, aggregates) = read_report_csv(&path).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(aggregates.len(), 1);
        assert_eq!(rows[2].amc, None);
        assert!((rows[0].asr - 0.8).abs() < 1e-9);
        assert!((aggregates[0].asr.0 - report.aggregates()[0].asr.0).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip_keeps_failures() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let mut report = sample_report();
        report.failures.push(RunFailure {
            run_id: "run-9".into(),
            seed: 16,
            attack: "er-b".into(),
            error: "poison budget floor(0.001 * 100) is zero".into(),
        });
        write_report_json(&report, &path).unwrap();
        let loaded = read_report_json(&path).unwrap();
        assert_eq!(loaded.rows.len(), 5);
        assert_eq!(loaded.failures.len(), 1);
    }

    #[test]
    fn grid_round_trip_with_holes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        let mut cells = vec![vec![Some(0.5); 8]; 8];
        cells[3][4] = None;
        let grid = SeriesGrid { cells };
        write_grid_csv(&grid, &path).unwrap();
        let loaded = read_grid_csv(&path).unwrap();
        assert_eq!(loaded.get(MotifId::M42, MotifId::M43), None);
        assert_eq!(loaded.get(MotifId::M31, MotifId::M31), Some(0.5));
    }
}
