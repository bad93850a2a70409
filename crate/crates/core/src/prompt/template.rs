use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{PromptError, SectionKind};

/// Image on disk; bytes are read only when a request is built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub path: PathBuf,
    pub media_type: String,
}

impl ImageRef {
    pub fn new(path: impl Into<PathBuf>, media_type: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            media_type: media_type.into(),
        }
    }
}

/// What a reference or query sample contributes to the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Image(ImageRef),
    /// Pre-rendered text, e.g. the feature lines of a force curve.
    FeatureText(String),
}

impl Payload {
    pub fn is_image(&self) -> bool {
        matches!(self, Payload::Image(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ReferenceRole {
    NonAnomalous,
    Anomalous { defect_class: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub id: String,
    #[serde(flatten)]
    pub role: ReferenceRole,
    pub payload: Payload,
}

impl ReferenceSample {
    pub fn normal(id: impl Into<String>, payload: Payload) -> Self {
        Self {
            id: id.into(),
            role: ReferenceRole::NonAnomalous,
            payload,
        }
    }

    pub fn anomalous(id: impl Into<String>, defect_class: impl Into<String>, payload: Payload) -> Self {
        Self {
            id: id.into(),
            role: ReferenceRole::Anomalous {
                defect_class: defect_class.into(),
            },
            payload,
        }
    }

    pub fn is_normal(&self) -> bool {
        self.role == ReferenceRole::NonAnomalous
    }
}

/// Immutable snapshot of one template version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub sections: BTreeMap<SectionKind, String>,
    #[serde(default)]
    pub references: Vec<ReferenceSample>,
    #[serde(default = "first_version")]
    pub version: u64,
    #[serde(default)]
    pub provenance: String,
}

fn first_version() -> u64 {
    1
}

impl PromptTemplate {
    pub fn new(task: impl Into<String>, output: impl Into<String>) -> Self {
        let mut sections = BTreeMap::new();
        sections.insert(SectionKind::Task, task.into());
        sections.insert(SectionKind::Output, output.into());
        Self {
            sections,
            references: Vec::new(),
            version: 1,
            provenance: String::new(),
        }
    }

    pub fn with_section(mut self, kind: SectionKind, body: impl Into<String>) -> Self {
        self.sections.insert(kind, body.into());
        self
    }

    pub fn with_references(mut self, references: Vec<ReferenceSample>) -> Self {
        self.references = references;
        self
    }

    /// Body of a section; missing sections read as empty.
    pub fn section(&self, kind: SectionKind) -> &str {
        self.sections.get(&kind).map(String::as_str).unwrap_or("")
    }

    pub fn has_section(&self, kind: SectionKind) -> bool {
        !self.section(kind).trim().is_empty()
    }

    /// Runnable templates have non-empty Task and Output bodies.
    pub fn validate(&self) -> Result<(), PromptError> {
        for kind in [SectionKind::Task, SectionKind::Output] {
            if !self.has_section(kind) {
                return Err(PromptError::EmptyMandatorySection(kind));
            }
        }
        Ok(())
    }

    pub fn normal_references(&self) -> impl Iterator<Item = &ReferenceSample> {
        self.references.iter().filter(|r| r.is_normal())
    }

    pub fn anomalous_references(&self) -> impl Iterator<Item = &ReferenceSample> {
        self.references.iter().filter(|r| !r.is_normal())
    }

    /// Same sections and references, ignoring version and provenance.
    pub fn same_content(&self, other: &PromptTemplate) -> bool {
        SectionKind::ALL
            .iter()
            .all(|k| self.section(*k) == other.section(*k))
            && self.references == other.references
    }
}
