//! Layered prompt template, its composition into a multimodal chat prompt,
//! and the versioned template store.

pub(crate) mod compose;
mod format;
mod presets;
mod store;
mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compose::{compose, AblationConfig, ComposedPrompt, Part, ShotMode};
pub use format::{parse_template, render_template};
pub use presets::{
    guidelines, load_preset, preprocessor_instruction, template_skeleton, Scenario,
};
pub use store::{merge_refinement, TemplateStore};
pub use template::{ImageRef, Payload, PromptTemplate, ReferenceRole, ReferenceSample};

/// Heading placed before the reference block of feature-based samples.
pub const REFERENCE_DATA_HEADING: &str = "REFERENCE DATA:";
pub const NON_ANOMALOUS_HEADING: &str = "NON-ANOMALOUS-SAMPLE:";
pub const ANOMALOUS_HEADING: &str = "ANOMALOUS-SAMPLES:";
pub const TEST_SAMPLE_HEADING: &str = "TEST-SAMPLE:";

/// One of the four instruction sections of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionKind {
    Task,
    Context,
    Expertise,
    Output,
}

impl SectionKind {
    /// Composition order.
    pub const ALL: [SectionKind; 4] = [
        SectionKind::Task,
        SectionKind::Context,
        SectionKind::Expertise,
        SectionKind::Output,
    ];

    pub fn header(self) -> &'static str {
        match self {
            SectionKind::Task => "TASK INSTRUCTION:",
            SectionKind::Context => "CONTEXT INSTRUCTION:",
            SectionKind::Expertise => "EXPERTISE INSTRUCTION:",
            SectionKind::Output => "OUTPUT INSTRUCTION:",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SectionKind::Task => "task",
            SectionKind::Context => "context",
            SectionKind::Expertise => "expertise",
            SectionKind::Output => "output",
        }
    }

    /// Task and Output must be present in every runnable template.
    pub fn is_mandatory(self) -> bool {
        matches!(self, SectionKind::Task | SectionKind::Output)
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SectionKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "task" | "ti" => Ok(SectionKind::Task),
            "context" | "ci" => Ok(SectionKind::Context),
            "expertise" | "ei" => Ok(SectionKind::Expertise),
            "output" | "oi" => Ok(SectionKind::Output),
            other => Err(PromptError::UnknownSection(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("mandatory section `{0}` is empty")]
    EmptyMandatorySection(SectionKind),
    #[error("configuration `{config}` needs {needed}, template has {available}")]
    MissingReference {
        config: String,
        needed: String,
        available: String,
    },
    #[error("refinement touches `{0}`, which requires an explicit override")]
    OverrideRequired(SectionKind),
    #[error("template references mix image and feature payloads")]
    MixedReferencePayloads,
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("invalid ablation configuration `{0}`")]
    InvalidConfig(String),
    #[error("template file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unknown template version {0}")]
    UnknownVersion(u64),
    #[error("template store I/O: {0}")]
    Io(String),
}
