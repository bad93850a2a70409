//! Loaders for the three dataset layouts and their manifests.
//!
//! "First" always means lexicographic file order for directories and row
//! order for CSV files. Loading the same tree twice gives the same samples
//! and the same checksum.

mod crimp;
mod images;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::EvalSample;
use crate::features::{extract, Curve, FeatureVector};
use crate::prompt::{ImageRef, Payload, PromptTemplate, ReferenceSample, Scenario};
use crate::Label;

pub use crimp::{load_crimp_csv, load_crimp_dir, read_curves_csv};
pub use images::{load_mvtec_layout, load_stripped_wire, media_type_for, WIRE_CLASSES};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("layout error: {0}")]
    Layout(String),
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("reference pool is empty")]
    EmptyPool,
    #[error("unknown sample id {0}")]
    UnknownSample(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Reference,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image(ImageRef),
    CurveRef(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub modality: Modality,
    pub label: Label,
    pub defect_class: Option<String>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub label: Label,
    pub defect_class: Option<String>,
    pub split: Split,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scenario: Scenario,
    pub root: PathBuf,
    pub counts: Vec<CountEntry>,
    /// SHA-256 over the loaded file list (or file bytes for single-file sets).
    pub checksum: String,
    /// Ids used as in-prompt references, in prompt order.
    pub prompt_references: Vec<String>,
}

impl DatasetManifest {
    pub fn count(&self, label: Label, split: Split) -> usize {
        self.counts
            .iter()
            .filter(|c| c.label == label && c.split == split)
            .map(|c| c.count)
            .sum()
    }

    pub fn count_class(&self, defect_class: Option<&str>, split: Split) -> usize {
        self.counts
            .iter()
            .filter(|c| c.defect_class.as_deref() == defect_class && c.split == split)
            .map(|c| c.count)
            .sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.count).sum()
    }
}

/// Loaded samples plus their manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<SampleRecord>,
    /// Crimp curves by id; empty for image datasets.
    pub curves: BTreeMap<String, Curve>,
}

impl Dataset {
    pub(crate) fn assemble(
        scenario: Scenario,
        root: PathBuf,
        samples: Vec<SampleRecord>,
        curves: BTreeMap<String, Curve>,
        checksum: String,
        prompt_references: Vec<String>,
    ) -> Self {
        let manifest = DatasetManifest {
            scenario,
            root,
            counts: Vec::new(),
            checksum,
            prompt_references,
        };
        let mut ds = Dataset {
            manifest,
            samples,
            curves,
        };
        ds.recount();
        ds
    }

    fn recount(&mut self) {
        let mut counts: BTreeMap<(Split, Label, Option<String>), usize> = BTreeMap::new();
        for s in &self.samples {
            *counts.entry((s.split, s.label, s.defect_class.clone())).or_default() += 1;
        }
        self.manifest.counts = counts
            .into_iter()
            .map(|((split, label, defect_class), count)| CountEntry {
                label,
                defect_class,
                split,
                count,
            })
            .collect();
    }

    pub fn scenario(&self) -> Scenario {
        self.manifest.scenario
    }

    pub fn sample(&self, id: &str) -> Option<&SampleRecord> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn test_samples(&self) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(|s| s.split == Split::Test)
    }

    pub fn reference_pool(&self) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(|s| s.split == Split::Reference)
    }

    pub fn features(&self, curve_id: &str) -> Option<FeatureVector> {
        self.curves.get(curve_id).map(extract)
    }

    /// What the model sees for one sample.
    pub fn payload(&self, sample: &SampleRecord) -> Payload {
        match &sample.modality {
            Modality::Image(img) => Payload::Image(img.clone()),
            Modality::CurveRef(id) => {
                let f = self.features(id).expect("curve ids are checked at load time");
                Payload::FeatureText(f.render())
            }
        }
    }

    /// The in-prompt references, in prompt order.
    pub fn reference_samples(&self) -> Vec<ReferenceSample> {
        self.manifest
            .prompt_references
            .iter()
            .map(|id| {
                let s = self.sample(id).expect("reference ids are checked");
                let payload = self.payload(s);
                match (&s.label, &s.defect_class) {
                    (Label::Anomalous, Some(class)) => ReferenceSample::anomalous(&s.id, class, payload),
                    (Label::Anomalous, None) => ReferenceSample::anomalous(&s.id, "anomalous", payload),
                    (Label::Normal, _) => ReferenceSample::normal(&s.id, payload),
                }
            })
            .collect()
    }

    /// `template` with its references replaced by this dataset's.
    pub fn attach_references(&self, template: &PromptTemplate) -> PromptTemplate {
        template.clone().with_references(self.reference_samples())
    }

    pub fn eval_samples(&self) -> Vec<EvalSample> {
        self.test_samples()
            .map(|s| EvalSample {
                id: s.id.clone(),
                label: s.label,
                defect_class: s.defect_class.clone(),
                payload: self.payload(s),
            })
            .collect()
    }

    /// Test-split feature vectors with labels, in sample order. Crimp only.
    pub fn labeled_features(&self) -> Vec<(Vec<f64>, Label)> {
        self.test_samples()
            .filter_map(|s| match &s.modality {
                Modality::CurveRef(id) => self.features(id).map(|f| (f.as_array().to_vec(), s.label)),
                Modality::Image(_) => None,
            })
            .collect()
    }

    /// Uses `ids` as the in-prompt references instead of the default choice.
    ///
    /// For the wire and crimp layouts the default references were taken out
    /// of the evaluation population, so any that are no longer referenced go
    /// back to the test split. For the MVTec layout references always come
    /// from the training pool.
    pub fn override_references(&mut self, ids: &[String]) -> Result<(), DatasetError> {
        for id in ids {
            let s = self.sample(id).ok_or_else(|| DatasetError::UnknownSample(id.clone()))?;
            if self.scenario() == Scenario::Cable && s.split != Split::Reference {
                return Err(DatasetError::Layout(format!("{id} is not in the training pool")));
            }
        }
        let previous = std::mem::take(&mut self.manifest.prompt_references);
        let returns_to_test = self.scenario() != Scenario::Cable;
        for s in &mut self.samples {
            if ids.contains(&s.id) {
                s.split = Split::Reference;
            } else if returns_to_test && previous.contains(&s.id) {
                s.split = Split::Test;
            }
        }
        self.manifest.prompt_references = ids.to_vec();
        self.recount();
        Ok(())
    }
}

/// The lexicographically first sample of the reference pool.
pub fn select_one_shot_reference(dataset: &Dataset) -> Result<&SampleRecord, DatasetError> {
    dataset
        .reference_pool()
        .min_by(|a, b| a.id.cmp(&b.id))
        .ok_or(DatasetError::EmptyPool)
}

/// Loads whichever layout belongs to `scenario`. For the cable layout
/// `root` is the category directory.
pub fn load(scenario: Scenario, root: &Path) -> Result<Dataset, DatasetError> {
    match scenario {
        Scenario::Cable => {
            let parent = root.parent().unwrap_or(Path::new("."));
            let category = root
                .file_name()
                .ok_or_else(|| DatasetError::Layout(format!("{} has no category name", root.display())))?;
            load_mvtec_layout(parent, &category.to_string_lossy())
        }
        Scenario::StrippedWire => load_stripped_wire(root),
        Scenario::CrimpFeatures => {
            if root.is_dir() {
                load_crimp_dir(root)
            } else {
                load_crimp_csv(root)
            }
        }
    }
}
