//! CSV and JSON report files. Output is a pure function of the input, so
//! replayed runs produce byte-identical files.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::ablation::AblationRow;
use super::rampup::{BenchmarkLine, RampUpPoint};
use super::EvalError;

pub const ABLATION_HEADER: [&str; 14] = [
    "config",
    "shot_mode",
    "sections",
    "tp",
    "fp",
    "fn",
    "tn",
    "unparseable",
    "precision",
    "recall",
    "f1",
    "degenerate",
    "input_tokens_total",
    "output_tokens_mean",
];

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let header: Vec<String> = ABLATION_HEADER.iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let cm = &r.confusion;
            vec![
                r.key.clone(),
                r.config.shot_mode.to_string(),
                r.config.sections_label(),
                cm.tp.to_string(),
                cm.fp.to_string(),
                cm.fn_.to_string(),
                cm.tn.to_string(),
                cm.unparseable.to_string(),
                r.metrics.precision.to_string(),
                r.metrics.recall.to_string(),
                r.metrics.f1.to_string(),
                r.metrics.degenerate.to_string(),
                r.input_tokens_total.to_string(),
                r.output_tokens_mean.to_string(),
            ]
        })
        .collect();
    String::from_utf8(csv_bytes(&header, &body)).expect("csv is utf-8")
}

/// One row per training size; every benchmark line adds constant
/// `<label>_precision`, `<label>_recall`, `<label>_f1` columns.
pub fn rampup_csv(points: &[RampUpPoint], benchmarks: &[BenchmarkLine]) -> String {
    let mut header: Vec<String> = [
        "train_size",
        "contamination",
        "tp",
        "fp",
        "fn",
        "tn",
        "precision",
        "recall",
        "f1",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for b in benchmarks {
        for m in ["precision", "recall", "f1"] {
            header.push(format!("{}_{m}", b.label));
        }
    }
    let body: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let cm = &p.confusion;
            let mut row = vec![
                p.train_size.to_string(),
                p.chosen_contamination.map(|c| c.to_string()).unwrap_or_default(),
                cm.tp.to_string(),
                cm.fp.to_string(),
                cm.fn_.to_string(),
                cm.tn.to_string(),
                p.metrics.precision.to_string(),
                p.metrics.recall.to_string(),
                p.metrics.f1.to_string(),
            ];
            for b in benchmarks {
                row.push(b.metrics.precision.to_string());
                row.push(b.metrics.recall.to_string());
                row.push(b.metrics.f1.to_string());
            }
            row
        })
        .collect();
    String::from_utf8(csv_bytes(&header, &body)).expect("csv is utf-8")
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), EvalError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| EvalError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| EvalError::io(path, e))
}

/// Writes `rows.csv` and `rows.json` into `dir`.
pub fn emit_ablation(dir: &Path, rows: &[AblationRow]) -> Result<(), EvalError> {
    write_file(&dir.join("rows.csv"), &ablation_csv(rows))?;
    write_file(&dir.join("rows.json"), &to_json(rows))
}

#[derive(Serialize)]
struct RampUpReport<'a> {
    points: &'a [RampUpPoint],
    benchmarks: &'a [BenchmarkLine],
}

/// Writes `rampup.csv` and `rampup.json` into `dir`.
pub fn emit_rampup(dir: &Path, points: &[RampUpPoint], benchmarks: &[BenchmarkLine]) -> Result<(), EvalError> {
    write_file(&dir.join("rampup.csv"), &rampup_csv(points, benchmarks))?;
    write_file(&dir.join("rampup.json"), &to_json(&RampUpReport { points, benchmarks }))
}
