//! Run driver shared by the CLI and the HTTP service.
//!
//! A run directory holds `manifest.json`, `rows.csv`, `rows.json` and
//! `records/<config>.jsonl`. Nothing in it depends on wall-clock time, so
//! replaying the same inputs reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::client::{ClientError, Mode, ModelConfig};
use crate::dataset::{self, Dataset, DatasetError, DatasetManifest};
use crate::eval::report::{emit_ablation, emit_rampup, to_json, write_file};
use crate::eval::{
    run_ablation, AblationOptions, AblationRow, BenchmarkLine, Detector, EvalError, RampUpConfig, RampUpPoint,
    ScoredRecord,
};
use crate::prompt::{render_template, AblationConfig, PromptError, PromptTemplate, Scenario};
use crate::Execution;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("run {0} not found")]
    UnknownRun(String),
    #[error("invalid run: {0}")]
    Invalid(String),
}

/// Everything that determines an ablation run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub data_root: PathBuf,
    /// Empty means the scenario's default table rows.
    #[serde(default)]
    pub configs: Vec<AblationConfig>,
    #[serde(default)]
    pub reference_ids: Option<Vec<String>>,
}

impl RunSpec {
    pub fn configs(&self) -> Vec<AblationConfig> {
        if self.configs.is_empty() {
            self.scenario.default_configs()
        } else {
            self.configs.clone()
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset, ExperimentError> {
        let mut ds = dataset::load(self.scenario, &self.data_root)?;
        if let Some(ids) = &self.reference_ids {
            ds.override_references(ids)?;
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub scenario: Scenario,
    pub configs: Vec<String>,
    pub model_id: String,
    pub temperature: f64,
    pub mode: Mode,
    pub template_version: u64,
    pub dataset: DatasetManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub run_id: String,
    pub dir: PathBuf,
    pub rows: Vec<AblationRow>,
}

/// Stable id from the inputs: `<scenario>-<12 hex digits>`.
pub fn default_run_id(spec: &RunSpec, template: &PromptTemplate, model: &ModelConfig, dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(render_template(template));
    for c in spec.configs() {
        h.update(c.to_string());
        h.update([0]);
    }
    h.update(&model.model_id);
    h.update(format!("{:?}", model.temperature));
    h.update(&dataset.manifest.checksum);
    h.update(dataset.manifest.prompt_references.join("\n"));
    let digest = hex::encode(h.finalize());
    format!("{}-{}", spec.scenario.key(), &digest[..12])
}

pub fn check_run_id(id: &str) -> Result<(), ExperimentError> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::Invalid(format!("run id {id:?} must be [A-Za-z0-9._-] and not start with '.'")))
    }
}

pub fn records_file(config: &AblationConfig) -> String {
    format!("{}.jsonl", config.to_string().replace('+', "_"))
}

/// Runs the ablation and writes the run directory under `runs_root`.
#[allow(clippy::too_many_arguments)]
pub fn run_ablation_to_dir(
    spec: &RunSpec,
    template: &PromptTemplate,
    model: &ModelConfig,
    detector: &dyn Detector,
    runs_root: &Path,
    run_id: Option<&str>,
    exec: Execution,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<RunOutput, ExperimentError> {
    let ds = spec.load_dataset()?;
    let template_with_refs = ds.attach_references(template);
    let configs = spec.configs();
    let run_id = match run_id {
        Some(id) => id.to_string(),
        None => default_run_id(spec, template, model, &ds),
    };
    check_run_id(&run_id)?;

    let samples = ds.eval_samples();
    let run = run_ablation(
        &samples,
        &template_with_refs,
        &configs,
        detector,
        &AblationOptions { exec, progress },
    )?;

    let dir = runs_root.join(&run_id);
    let manifest = RunManifest {
        run_id: run_id.clone(),
        scenario: spec.scenario,
        configs: configs.iter().map(|c| c.to_string()).collect(),
        model_id: model.model_id.clone(),
        temperature: model.temperature,
        mode: model.mode,
        template_version: template.version,
        dataset: ds.manifest.clone(),
    };
    write_file(&dir.join("manifest.json"), &to_json(&manifest))?;
    emit_ablation(&dir, &run.rows)?;
    for (config, records) in configs.iter().zip(&run.records) {
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r).expect("records serialize"));
            text.push('\n');
        }
        write_file(&dir.join("records").join(records_file(config)), &text)?;
    }
    Ok(RunOutput {
        run_id,
        dir,
        rows: run.rows,
    })
}

fn run_dir(runs_root: &Path, run_id: &str) -> Result<PathBuf, ExperimentError> {
    check_run_id(run_id)?;
    let dir = runs_root.join(run_id);
    if dir.join("manifest.json").is_file() {
        Ok(dir)
    } else {
        Err(ExperimentError::UnknownRun(run_id.to_string()))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| EvalError::io(path, e).into())
}

pub fn read_manifest(runs_root: &Path, run_id: &str) -> Result<RunManifest, ExperimentError> {
    read_json(&run_dir(runs_root, run_id)?.join("manifest.json"))
}

pub fn read_rows(runs_root: &Path, run_id: &str) -> Result<Vec<AblationRow>, ExperimentError> {
    read_json(&run_dir(runs_root, run_id)?.join("rows.json"))
}

/// All records of a run in config order, optionally only misclassified ones.
pub fn read_records(runs_root: &Path, run_id: &str, misclassified_only: bool) -> Result<Vec<ScoredRecord>, ExperimentError> {
    let dir = run_dir(runs_root, run_id)?;
    let manifest: RunManifest = read_json(&dir.join("manifest.json"))?;
    let mut out = Vec::new();
    for key in &manifest.configs {
        let config: AblationConfig = key.parse()?;
        let path = dir.join("records").join(records_file(&config));
        let text = fs::read_to_string(&path).map_err(|e| EvalError::io(&path, e))?;
        for line in text.lines().filter(|l| !l.is_empty()) {
            let r: ScoredRecord = serde_json::from_str(line).map_err(|e| EvalError::io(&path, e))?;
            if !misclassified_only || r.is_misclassified() {
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Ramp-up benchmark: normal-only training pool from `pool_csv`, evaluation
/// on the crimp test split. Writes `rampup.csv` and `rampup.json` to `out_dir`.
pub fn run_rampup_to_dir(
    pool_csv: &Path,
    eval_root: &Path,
    config: &RampUpConfig,
    benchmarks: &[BenchmarkLine],
    out_dir: &Path,
    exec: Execution,
) -> Result<Vec<RampUpPoint>, ExperimentError> {
    let pool = rampup_pool(pool_csv)?;
    let ds = dataset::load(Scenario::CrimpFeatures, eval_root)?;
    let points = crate::eval::ramp_up(&pool, &ds.labeled_features(), config, exec)?;
    emit_rampup(out_dir, &points, benchmarks)?;
    Ok(points)
}

/// Feature vectors of the normal curves in `pool_csv`, in file order.
pub fn rampup_pool(pool_csv: &Path) -> Result<Vec<Vec<f64>>, ExperimentError> {
    let curves = dataset::read_curves_csv(pool_csv)?;
    Ok(curves
        .iter()
        .filter(|c| c.label.is_none_or(|l| !l.is_anomalous()))
        .map(|c| crate::features::extract(c).as_array().to_vec())
        .collect())
}
