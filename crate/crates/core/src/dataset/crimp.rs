use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Dataset, DatasetError, Modality, SampleRecord, Split};
use crate::features::{Curve, CURVE_LEN};
use crate::prompt::Scenario;
use crate::Label;

/// Number of normal curves used as few-shot references.
pub const CRIMP_REFERENCES: usize = 3;

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_label(path: &Path, line: usize, s: &str) -> Result<Label, DatasetError> {
    match s.trim() {
        "0" => Ok(Label::Normal),
        "1" => Ok(Label::Anomalous),
        other => Err(format_err(path, line, format!("label must be 0 or 1, got {other:?}"))),
    }
}

fn parse_class(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

fn parse_values<'a>(path: &Path, line: usize, fields: impl Iterator<Item = &'a str>) -> Result<Vec<f64>, DatasetError> {
    fields
        .enumerate()
        .map(|(i, f)| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| format_err(path, line, format!("value {i} is not a number: {f:?}")))
        })
        .collect()
}

/// Rows of `id,label,defect_class,v0..v499` with a header line.
pub fn read_curves_csv(path: &Path) -> Result<Vec<Curve>, DatasetError> {
    let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    parse_curves(path, &bytes)
}

fn parse_curves(path: &Path, bytes: &[u8]) -> Result<Vec<Curve>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let mut curves = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| format_err(path, line, e.to_string()))?;
        if row.len() != 3 + CURVE_LEN {
            return Err(format_err(
                path,
                line,
                format!("expected {} point columns, got {}", CURVE_LEN, row.len().saturating_sub(3)),
            ));
        }
        let label = parse_label(path, line, &row[1])?;
        let values = parse_values(path, line, row.iter().skip(3))?;
        let curve = Curve::new(row[0].trim(), values).map_err(|e| format_err(path, line, e.to_string()))?;
        curves.push(curve.with_label(label, parse_class(&row[2])));
    }
    Ok(curves)
}

fn assemble(path: &Path, curves: Vec<Curve>, checksum: String) -> Result<Dataset, DatasetError> {
    let mut samples = Vec::with_capacity(curves.len());
    let mut references = Vec::new();
    let mut by_id = BTreeMap::new();
    for c in curves {
        let label = c.label.unwrap_or(Label::Normal);
        let split = if label == Label::Normal && references.len() < CRIMP_REFERENCES {
            references.push(c.id.clone());
            Split::Reference
        } else {
            Split::Test
        };
        samples.push(SampleRecord {
            id: c.id.clone(),
            modality: Modality::CurveRef(c.id.clone()),
            label,
            defect_class: c.defect_class.clone(),
            split,
        });
        if by_id.insert(c.id.clone(), c).is_some() {
            return Err(DatasetError::Layout(format!("duplicate curve id {}", samples.last().unwrap().id)));
        }
    }
    if references.len() < CRIMP_REFERENCES {
        return Err(DatasetError::Layout(format!(
            "need {CRIMP_REFERENCES} non-anomalous curves for references, found {}",
            references.len()
        )));
    }
    Ok(Dataset::assemble(
        Scenario::CrimpFeatures,
        path.to_path_buf(),
        samples,
        by_id,
        checksum,
        references,
    ))
}

/// One CSV with a row per curve. The first three normal rows are references.
pub fn load_crimp_csv(path: &Path) -> Result<Dataset, DatasetError> {
    let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    let curves = parse_curves(path, &bytes)?;
    assemble(path, curves, hex::encode(Sha256::digest(&bytes)))
}

/// `dir/labels.csv` (`id,label,defect_class`) plus one `dir/<id>.csv` per
/// curve holding a single column of 500 values, optionally under a header.
pub fn load_crimp_dir(dir: &Path) -> Result<Dataset, DatasetError> {
    let labels_path = dir.join("labels.csv");
    let labels = fs::read(&labels_path).map_err(|e| DatasetError::io(&labels_path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&labels);

    let mut reader = csv::Reader::from_reader(labels.as_slice());
    let mut curves = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| format_err(&labels_path, line, e.to_string()))?;
        if row.len() < 2 {
            return Err(format_err(&labels_path, line, "expected id,label,defect_class"));
        }
        let id = row[0].trim().to_string();
        let label = parse_label(&labels_path, line, &row[1])?;
        let class = row.get(2).and_then(parse_class);

        let curve_path = dir.join(format!("{id}.csv"));
        let text = fs::read_to_string(&curve_path).map_err(|e| DatasetError::io(&curve_path, e))?;
        hasher.update(text.as_bytes());
        let mut lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if lines.first().is_some_and(|l| l.parse::<f64>().is_err()) {
            lines.remove(0);
        }
        let values = parse_values(&curve_path, 0, lines.into_iter())?;
        let curve = Curve::new(id, values).map_err(|e| format_err(&curve_path, 0, e.to_string()))?;
        curves.push(curve.with_label(label, class));
    }
    assemble(dir, curves, hex::encode(hasher.finalize()))
}
