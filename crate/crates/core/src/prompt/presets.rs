use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::compose::{AblationConfig, ShotMode};
use super::template::PromptTemplate;
use super::{PromptError, SectionKind};

const TASK: &str = include_str!("../../presets/task.txt");
const OUTPUT: &str = include_str!("../../presets/output.txt");
const CABLE_CONTEXT: &str = include_str!("../../presets/cable_context.txt");
const CABLE_EXPERTISE: &str = include_str!("../../presets/cable_expertise.txt");
const WIRE_CONTEXT: &str = include_str!("../../presets/wire_context.txt");
const WIRE_EXPERTISE: &str = include_str!("../../presets/wire_expertise.txt");
const CRIMP_CONTEXT: &str = include_str!("../../presets/crimp_context.txt");
const CRIMP_EXPERTISE: &str = include_str!("../../presets/crimp_expertise.txt");
const PREPROCESSOR: &str = include_str!("../../presets/preprocessor.txt");
const GUIDELINES: &str = include_str!("../../presets/guidelines.txt");
const SKELETON: &str = include_str!("../../presets/template_skeleton.txt");

/// The three bundled inspection scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Cable cross-section images, MVTec directory layout.
    Cable,
    /// Stripped wire images, one directory per quality class.
    StrippedWire,
    /// Pre-computed crimp force curve features.
    CrimpFeatures,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Cable, Scenario::StrippedWire, Scenario::CrimpFeatures];

    pub fn key(self) -> &'static str {
        match self {
            Scenario::Cable => "cable",
            Scenario::StrippedWire => "stripped-wire",
            Scenario::CrimpFeatures => "crimp-features",
        }
    }

    /// Shot modes evaluated for this scenario.
    pub fn shot_modes(self) -> &'static [ShotMode] {
        match self {
            Scenario::Cable => &[ShotMode::ZeroShot, ShotMode::OneShotOk],
            Scenario::StrippedWire => &[ShotMode::ZeroShot, ShotMode::OneShotOk, ShotMode::OneShotBinary],
            Scenario::CrimpFeatures => &[ShotMode::FewShotOk(3)],
        }
    }

    /// Every (shot mode × information depth) row of the ablation table.
    pub fn default_configs(self) -> Vec<AblationConfig> {
        self.shot_modes()
            .iter()
            .flat_map(|m| AblationConfig::depth_ladder(*m))
            .collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Scenario {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cable" | "mvtec-cable" => Ok(Scenario::Cable),
            "stripped-wire" | "stripped_wire" | "wire" => Ok(Scenario::StrippedWire),
            "crimp-features" | "crimp_features" | "crimp" => Ok(Scenario::CrimpFeatures),
            other => Err(PromptError::InvalidConfig(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Bundled template: shared task/output instructions plus the scenario's
/// context and expertise instructions. No references; those come from the dataset.
pub fn load_preset(scenario: Scenario) -> PromptTemplate {
    let (context, expertise) = match scenario {
        Scenario::Cable => (CABLE_CONTEXT, CABLE_EXPERTISE),
        Scenario::StrippedWire => (WIRE_CONTEXT, WIRE_EXPERTISE),
        Scenario::CrimpFeatures => (CRIMP_CONTEXT, CRIMP_EXPERTISE),
    };
    let mut t = PromptTemplate::new(TASK, OUTPUT)
        .with_section(SectionKind::Context, context)
        .with_section(SectionKind::Expertise, expertise);
    t.provenance = format!("bundled preset: {scenario}");
    t
}

/// Instruction of the prompt pre-processor, with its three placeholders.
pub fn preprocessor_instruction() -> &'static str {
    PREPROCESSOR
}

/// Default prompt-engineering guidelines handed to the pre-processor.
pub fn guidelines() -> &'static str {
    GUIDELINES
}

/// Short description of the template's sections for the pre-processor.
pub fn template_skeleton() -> &'static str {
    SKELETON
}
