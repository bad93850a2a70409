use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, Metrics};
use super::EvalError;
use crate::client::{Client, ClientError, DetectionRecord};
use crate::prompt::{compose, AblationConfig, ComposedPrompt, Payload, PromptTemplate};
use crate::{par, Execution, Label};

/// Anything that classifies a composed prompt.
pub trait Detector: Sync {
    fn detect(&self, prompt: &ComposedPrompt, sample_id: &str) -> Result<DetectionRecord, ClientError>;
}

impl Detector for Client {
    fn detect(&self, prompt: &ComposedPrompt, sample_id: &str) -> Result<DetectionRecord, ClientError> {
        self.classify(prompt, sample_id)
    }
}

/// One test query with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub id: String,
    pub label: Label,
    pub defect_class: Option<String>,
    pub payload: Payload,
}

/// A detection record joined with the truth it is judged against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub config: String,
    pub truth: Label,
    pub defect_class: Option<String>,
    #[serde(flatten)]
    pub record: DetectionRecord,
}

impl ScoredRecord {
    /// Parsed and wrong. Parse failures are not misclassifications.
    pub fn is_misclassified(&self) -> bool {
        matches!(self.record.classification(), Some(p) if p != self.truth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: AblationConfig,
    pub key: String,
    pub label: String,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub input_tokens_total: u64,
    /// Mean over every evaluated sample, parse failures included.
    pub output_tokens_mean: f64,
    pub unparseable: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub rows: Vec<AblationRow>,
    /// Per config, per sample, in config and then sample order.
    pub records: Vec<Vec<ScoredRecord>>,
}

#[derive(Default)]
pub struct AblationOptions<'a> {
    pub exec: Execution,
    /// Called with (finished, total) after every classified sample.
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

/// Runs every configuration over every sample. Rows come back in `configs`
/// order; within a config, records keep `samples` order regardless of which
/// worker finished first.
pub fn run_ablation(
    samples: &[EvalSample],
    template: &PromptTemplate,
    configs: &[AblationConfig],
    detector: &dyn Detector,
    options: &AblationOptions<'_>,
) -> Result<AblationRun, EvalError> {
    let total = samples.len() * configs.len();
    let done = AtomicUsize::new(0);
    let mut rows = Vec::with_capacity(configs.len());
    let mut records = Vec::with_capacity(configs.len());

    for config in configs {
        let key = config.to_string();
        let results = par::map(options.exec, samples, |s| {
            let prompt = compose(template, config, &s.payload).map_err(|source| EvalError::Prompt {
                sample_id: s.id.clone(),
                source,
            })?;
            let record = detector.detect(&prompt, &s.id).map_err(|source| EvalError::Detector {
                sample_id: s.id.clone(),
                source,
            })?;
            if let Some(cb) = options.progress {
                cb(done.fetch_add(1, Ordering::SeqCst) + 1, total);
            }
            Ok(ScoredRecord {
                config: key.clone(),
                truth: s.label,
                defect_class: s.defect_class.clone(),
                record,
            })
        });
        let scored = results.into_iter().collect::<Result<Vec<_>, EvalError>>()?;
        rows.push(summarize(*config, &scored));
        records.push(scored);
    }
    Ok(AblationRun { rows, records })
}

pub fn summarize(config: AblationConfig, records: &[ScoredRecord]) -> AblationRow {
    let confusion = ConfusionMatrix::from_pairs(records.iter().map(|r| (r.truth, r.record.classification())));
    let input_tokens_total = records.iter().map(|r| r.record.usage.input_tokens).sum();
    let output_total: u64 = records.iter().map(|r| r.record.usage.output_tokens).sum();
    let output_tokens_mean = if records.is_empty() {
        0.0
    } else {
        output_total as f64 / records.len() as f64
    };
    AblationRow {
        config,
        key: config.to_string(),
        label: config.describe(),
        confusion,
        metrics: confusion.metrics(),
        input_tokens_total,
        output_tokens_mean,
        unparseable: confusion.unparseable,
    }
}
