//! Quality features of crimp force curves.
//!
//! Indices are 0-based and windows are inclusive on both ends. The default
//! windows are 150..=190 for the slope and 250..=300 for the area.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::compose::reference_data_block;
use crate::Label;

pub const CURVE_LEN: usize = 500;
pub const SLOPE_WINDOW: (usize, usize) = (150, 190);
pub const AUC_WINDOW: (usize, usize) = (250, 300);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("curve {id}: expected {CURVE_LEN} points, got {got}")]
    Length { id: String, got: usize },
    #[error("curve {id}: value at index {index} is not finite")]
    NonFinite { id: String, index: usize },
    #[error("window [{a}, {b}] is invalid for a curve of {len} points")]
    IndexRange { a: usize, b: usize, len: usize },
}

/// A validated 500-point force curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: String,
    values: Vec<f64>,
    pub label: Option<Label>,
    pub defect_class: Option<String>,
}

impl Curve {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self, FeatureError> {
        let id = id.into();
        if values.len() != CURVE_LEN {
            return Err(FeatureError::Length { id, got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { id, index });
        }
        Ok(Self {
            id,
            values,
            label: None,
            defect_class: None,
        })
    }

    pub fn with_label(mut self, label: Label, defect_class: Option<String>) -> Self {
        self.label = Some(label);
        self.defect_class = defect_class;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub slope_150_190: f64,
    pub auc_250_300: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 2] {
        [self.slope_150_190, self.auc_250_300]
    }

    /// The two feature lines shown to the model for one sample.
    pub fn render(&self) -> String {
        format!(
            "SLOPE datapoint {} to {}: {}\n\nAUC datapoint {} to {}: {}",
            SLOPE_WINDOW.0,
            SLOPE_WINDOW.1,
            format_number(self.slope_150_190),
            AUC_WINDOW.0,
            AUC_WINDOW.1,
            format_number(self.auc_250_300)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeMode {
    /// Least-squares fit over every point in the window.
    #[default]
    LeastSquares,
    /// `(v[b] - v[a]) / (b - a)`, for sensitivity checks.
    Endpoints,
}

fn check(values: &[f64], a: usize, b: usize) -> Result<(), FeatureError> {
    if a < b && b < values.len() {
        Ok(())
    } else {
        Err(FeatureError::IndexRange { a, b, len: values.len() })
    }
}

/// Least-squares slope of `values[a..=b]` against the integer index.
pub fn slope(values: &[f64], a: usize, b: usize) -> Result<f64, FeatureError> {
    check(values, a, b)?;
    let window = &values[a..=b];
    let n = window.len() as f64;
    // Centered abscissae keep the sums small and the result exact on lines.
    let x_mean = (a + b) as f64 / 2.0;
    let y_mean = window.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in (a..=b).zip(window) {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

pub fn slope_with(values: &[f64], a: usize, b: usize, mode: SlopeMode) -> Result<f64, FeatureError> {
    match mode {
        SlopeMode::LeastSquares => slope(values, a, b),
        SlopeMode::Endpoints => {
            check(values, a, b)?;
            Ok((values[b] - values[a]) / (b - a) as f64)
        }
    }
}

/// Trapezoidal area of `values[a..=b]` with unit spacing.
pub fn auc(values: &[f64], a: usize, b: usize) -> Result<f64, FeatureError> {
    check(values, a, b)?;
    let w = &values[a..=b];
    let inner: f64 = w[1..w.len() - 1].iter().sum();
    Ok(inner + (w[0] + w[w.len() - 1]) / 2.0)
}

pub fn extract(curve: &Curve) -> FeatureVector {
    extract_with(curve, SlopeMode::LeastSquares)
}

pub fn extract_with(curve: &Curve, mode: SlopeMode) -> FeatureVector {
    let v = curve.values();
    FeatureVector {
        slope_150_190: slope_with(v, SLOPE_WINDOW.0, SLOPE_WINDOW.1, mode).expect("window fits a valid curve"),
        auc_250_300: auc(v, AUC_WINDOW.0, AUC_WINDOW.1).expect("window fits a valid curve"),
    }
}

/// Shortest decimal that round-trips after rounding to 7 significant digits.
pub fn format_number(x: f64) -> String {
    let rounded: f64 = format!("{x:.6e}").parse().expect("own exponent format parses");
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

/// `REFERENCE DATA:` block listing each reference as "Non-anomalous sample k".
///
/// Panics if `refs` is empty.
pub fn render_reference_block(refs: &[(String, FeatureVector)]) -> String {
    assert!(!refs.is_empty(), "reference block needs at least one sample");
    let bodies: Vec<String> = refs.iter().map(|(_, f)| f.render()).collect();
    let entries: Vec<(String, &str)> = bodies
        .iter()
        .enumerate()
        .map(|(k, body)| (format!("Non-anomalous sample {}", k + 1), body.as_str()))
        .collect();
    reference_data_block(&entries)
}
