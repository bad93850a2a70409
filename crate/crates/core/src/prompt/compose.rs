use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::template::{ImageRef, Payload, PromptTemplate, ReferenceRole, ReferenceSample};
use super::{
    PromptError, SectionKind, ANOMALOUS_HEADING, NON_ANOMALOUS_HEADING, REFERENCE_DATA_HEADING,
    TEST_SAMPLE_HEADING,
};

/// How many (and which) reference samples accompany the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    ZeroShot,
    /// First non-anomalous reference.
    OneShotOk,
    /// First `k` non-anomalous references.
    FewShotOk(usize),
    /// First non-anomalous reference plus the first reference of every anomalous class.
    OneShotBinary,
}

impl ShotMode {
    pub fn describe(self) -> String {
        match self {
            ShotMode::ZeroShot => "zero-shot".into(),
            ShotMode::OneShotOk => "one-shot".into(),
            ShotMode::FewShotOk(k) => format!("few-shot ({k})"),
            ShotMode::OneShotBinary => "one-shot binary".into(),
        }
    }
}

impl fmt::Display for ShotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShotMode::ZeroShot => f.write_str("zero"),
            ShotMode::OneShotOk => f.write_str("one"),
            ShotMode::FewShotOk(k) => write!(f, "few{k}"),
            ShotMode::OneShotBinary => f.write_str("binary"),
        }
    }
}

impl FromStr for ShotMode {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "zero" => return Ok(ShotMode::ZeroShot),
            "one" => return Ok(ShotMode::OneShotOk),
            "binary" => return Ok(ShotMode::OneShotBinary),
            _ => {}
        }
        s.strip_prefix("few")
            .map(|k| k.trim_start_matches(':'))
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| *k >= 1)
            .map(ShotMode::FewShotOk)
            .ok_or_else(|| PromptError::InvalidConfig(s.clone()))
    }
}

/// Which optional sections are active and which shot mode is used: one
/// row of an ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationConfig {
    pub include_context: bool,
    pub include_expertise: bool,
    pub shot_mode: ShotMode,
}

impl AblationConfig {
    pub fn new(include_context: bool, include_expertise: bool, shot_mode: ShotMode) -> Self {
        Self {
            include_context,
            include_expertise,
            shot_mode,
        }
    }

    /// The three information depths (Ti,Oi / +Ci / +Ci,Ei) for one shot mode.
    pub fn depth_ladder(shot_mode: ShotMode) -> [AblationConfig; 3] {
        [
            AblationConfig::new(false, false, shot_mode),
            AblationConfig::new(true, false, shot_mode),
            AblationConfig::new(true, true, shot_mode),
        ]
    }

    /// Section list in table notation, e.g. `Ti,Oi,Ci`.
    pub fn sections_label(&self) -> String {
        let mut s = String::from("Ti,Oi");
        if self.include_context {
            s.push_str(",Ci");
        }
        if self.include_expertise {
            s.push_str(",Ei");
        }
        s
    }

    pub fn describe(&self) -> String {
        format!("{} {}", self.shot_mode.describe(), self.sections_label())
    }

    fn active(&self, kind: SectionKind) -> bool {
        match kind {
            SectionKind::Task | SectionKind::Output => true,
            SectionKind::Context => self.include_context,
            SectionKind::Expertise => self.include_expertise,
        }
    }
}

/// Compact key: `<shot>+ti-oi[-ci][-ei]`, e.g. `few3+ti-oi-ci-ei`.
impl fmt::Display for AblationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+ti-oi", self.shot_mode)?;
        if self.include_context {
            f.write_str("-ci")?;
        }
        if self.include_expertise {
            f.write_str("-ei")?;
        }
        Ok(())
    }
}

impl FromStr for AblationConfig {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || PromptError::InvalidConfig(s.to_string());
        let (shot, sections) = s.split_once('+').ok_or_else(invalid)?;
        let shot_mode = shot.parse::<ShotMode>()?;
        let mut include_context = false;
        let mut include_expertise = false;
        let mut seen_task = false;
        let mut seen_output = false;
        for part in sections.split(['-', ',']) {
            match part.parse::<SectionKind>().map_err(|_| invalid())? {
                SectionKind::Task => seen_task = true,
                SectionKind::Output => seen_output = true,
                SectionKind::Context => include_context = true,
                SectionKind::Expertise => include_expertise = true,
            }
        }
        if !(seen_task && seen_output) {
            return Err(invalid());
        }
        Ok(AblationConfig::new(include_context, include_expertise, shot_mode))
    }
}

/// One entry of the user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Text(String),
    Image(ImageRef),
}

/// System text plus ordered user parts, ready to be turned into a chat request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedPrompt {
    pub system_text: String,
    pub user_parts: Vec<Part>,
}

impl ComposedPrompt {
    /// Number of parts that carry reference payloads (images or the reference data block).
    pub fn reference_part_count(&self) -> usize {
        let test_at = self
            .user_parts
            .iter()
            .position(|p| matches!(p, Part::Text(t) if t == TEST_SAMPLE_HEADING))
            .unwrap_or(self.user_parts.len());
        self.user_parts[..test_at]
            .iter()
            .filter(|p| match p {
                Part::Image(_) => true,
                Part::Text(t) => t.starts_with(REFERENCE_DATA_HEADING),
            })
            .count()
    }

    /// Stable plain-text dump used for fixtures and inspection.
    pub fn transcript(&self) -> String {
        let mut out = String::from("=== SYSTEM ===\n");
        out.push_str(&self.system_text);
        out.push_str("\n=== USER ===\n");
        for part in &self.user_parts {
            match part {
                Part::Text(t) => {
                    out.push_str("--- text\n");
                    out.push_str(t);
                    out.push('\n');
                }
                Part::Image(img) => {
                    out.push_str("--- image ");
                    out.push_str(&img.media_type);
                    out.push('\n');
                    out.push_str(&img.path.to_string_lossy());
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Builds the prompt for one query under one ablation configuration.
///
/// Active, non-empty sections are emitted in Task, Context, Expertise,
/// Output order, each as its header line, a blank line and the body,
/// separated by one blank line. References precede the test sample.
pub fn compose(
    template: &PromptTemplate,
    config: &AblationConfig,
    query: &Payload,
) -> Result<ComposedPrompt, PromptError> {
    template.validate()?;

    let system_text = SectionKind::ALL
        .iter()
        .filter(|k| config.active(**k) && template.has_section(**k))
        .map(|k| format!("{}\n\n{}", k.header(), template.section(*k)))
        .collect::<Vec<_>>()
        .join("\n\n");

    let refs = select_references(template, config)?;
    let mut user_parts = reference_parts(&refs)?;
    user_parts.push(Part::Text(TEST_SAMPLE_HEADING.to_string()));
    user_parts.push(payload_part(query));

    Ok(ComposedPrompt {
        system_text,
        user_parts,
    })
}

fn select_references<'a>(
    template: &'a PromptTemplate,
    config: &AblationConfig,
) -> Result<Vec<&'a ReferenceSample>, PromptError> {
    let normals: Vec<_> = template.normal_references().collect();
    let missing = |needed: String| PromptError::MissingReference {
        config: config.to_string(),
        needed,
        available: format!(
            "{} non-anomalous / {} anomalous",
            normals.len(),
            template.anomalous_references().count()
        ),
    };
    match config.shot_mode {
        ShotMode::ZeroShot => Ok(Vec::new()),
        ShotMode::OneShotOk => normals
            .first()
            .map(|r| vec![*r])
            .ok_or_else(|| missing("1 non-anomalous reference".into())),
        ShotMode::FewShotOk(0) => Err(PromptError::InvalidConfig(config.to_string())),
        ShotMode::FewShotOk(k) => {
            if normals.len() < k {
                return Err(missing(format!("{k} non-anomalous references")));
            }
            Ok(normals[..k].to_vec())
        }
        ShotMode::OneShotBinary => {
            let normal = normals
                .first()
                .ok_or_else(|| missing("1 non-anomalous and 1 anomalous reference".into()))?;
            let mut picked = vec![*normal];
            let mut classes: Vec<&str> = Vec::new();
            for r in template.anomalous_references() {
                if let ReferenceRole::Anomalous { defect_class } = &r.role {
                    if !classes.contains(&defect_class.as_str()) {
                        classes.push(defect_class);
                        picked.push(r);
                    }
                }
            }
            if picked.len() < 2 {
                return Err(missing("1 non-anomalous and 1 anomalous reference".into()));
            }
            Ok(picked)
        }
    }
}

fn reference_parts(refs: &[&ReferenceSample]) -> Result<Vec<Part>, PromptError> {
    if refs.is_empty() {
        return Ok(Vec::new());
    }
    let images = refs.iter().filter(|r| r.payload.is_image()).count();
    if images != 0 && images != refs.len() {
        return Err(PromptError::MixedReferencePayloads);
    }
    if images == 0 {
        return Ok(vec![Part::Text(feature_reference_block(refs))]);
    }

    let mut parts = Vec::new();
    let normals: Vec<_> = refs.iter().filter(|r| r.is_normal()).collect();
    let anomalous: Vec<_> = refs.iter().filter(|r| !r.is_normal()).collect();
    if !normals.is_empty() {
        parts.push(Part::Text(NON_ANOMALOUS_HEADING.to_string()));
        parts.extend(normals.iter().map(|r| payload_part(&r.payload)));
    }
    if !anomalous.is_empty() {
        parts.push(Part::Text(ANOMALOUS_HEADING.to_string()));
        for r in anomalous {
            if let ReferenceRole::Anomalous { defect_class } = &r.role {
                parts.push(Part::Text(format!("{defect_class}:")));
            }
            parts.push(payload_part(&r.payload));
        }
    }
    Ok(parts)
}

fn feature_reference_block(refs: &[&ReferenceSample]) -> String {
    let mut normal_n = 0;
    let mut anomalous_n = 0;
    let entries: Vec<(String, &str)> = refs
        .iter()
        .map(|r| {
            let body = match &r.payload {
                Payload::FeatureText(t) => t.as_str(),
                Payload::Image(_) => unreachable!("checked by caller"),
            };
            let label = match &r.role {
                ReferenceRole::NonAnomalous => {
                    normal_n += 1;
                    format!("Non-anomalous sample {normal_n}")
                }
                ReferenceRole::Anomalous { defect_class } => {
                    anomalous_n += 1;
                    format!("Anomalous sample {anomalous_n} ({defect_class})")
                }
            };
            (label, body)
        })
        .collect();
    reference_data_block(&entries)
}

/// `REFERENCE DATA:` block with one `- <label>` entry per reference.
pub(crate) fn reference_data_block(entries: &[(String, &str)]) -> String {
    let mut out = String::from(REFERENCE_DATA_HEADING);
    for (label, body) in entries {
        out.push_str("\n\n- ");
        out.push_str(label);
        out.push_str("\n\n");
        out.push_str(body);
    }
    out
}

fn payload_part(payload: &Payload) -> Part {
    match payload {
        Payload::Image(img) => Part::Image(img.clone()),
        Payload::FeatureText(t) => Part::Text(t.clone()),
    }
}
