//! Records the crimp replay cache used by the test suite.
//!
//! A scripted backend stands in for the model. It flags the `k` most
//! obvious anomalous curves (largest normalized feature distance from the
//! normal class mean) and answers 0 for everything else, with
//! k = 76 / 82 / 92 for the three information depths. Normal curves are
//! never flagged.
//!
//! Usage: `cargo run --example record_crimp_replay [EVAL_CSV] [CACHE_DIR]`

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use promptad_core::client::{
    render_verdict, ChatRequest, Client, ClientError, Completion, FnBackend, Mode, ModelConfig, Usage, Verdict,
};
use promptad_core::dataset::load_crimp_csv;
use promptad_core::eval::{run_ablation, AblationOptions};
use promptad_core::features::format_number;
use promptad_core::prompt::{load_preset, Scenario, SectionKind};
use promptad_core::{Execution, Label};

const DETECTED: [usize; 3] = [76, 82, 92];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = PathBuf::from(args.next().unwrap_or_else(|| "data/crimp-synthetic/eval.csv".into()));
    let cache = PathBuf::from(args.next().unwrap_or_else(|| "crates/core/tests/fixtures/replay/crimp".into()));

    let ds = load_crimp_csv(&data)?;
    let samples = ds.eval_samples();
    let normals: Vec<[f64; 2]> = ds
        .test_samples()
        .filter(|s| s.label == Label::Normal)
        .map(|s| ds.features(&s.id).unwrap().as_array())
        .collect();
    let mean = |k: usize| normals.iter().map(|f| f[k]).sum::<f64>() / normals.len() as f64;
    let sd = |k: usize, m: f64| (normals.iter().map(|f| (f[k] - m).powi(2)).sum::<f64>() / normals.len() as f64).sqrt();
    let (ms, ma) = (mean(0), mean(1));
    let (ss, sa) = (sd(0, ms), sd(1, ma));

    let mut anomalous: Vec<(f64, String)> = ds
        .test_samples()
        .filter(|s| s.label == Label::Anomalous)
        .map(|s| {
            let f = ds.features(&s.id).unwrap();
            let d = ((f.slope_150_190 - ms) / ss).abs().max(((f.auc_250_300 - ma) / sa).abs());
            (d, s.id.clone())
        })
        .collect();
    anomalous.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let rank: HashMap<String, usize> = anomalous.iter().enumerate().map(|(i, (_, id))| (id.clone(), i)).collect();

    // Query feature text -> (id, label).
    let by_text: HashMap<String, (String, Label)> = samples
        .iter()
        .map(|s| match &s.payload {
            promptad_core::prompt::Payload::FeatureText(t) => (t.clone(), (s.id.clone(), s.label)),
            _ => unreachable!("crimp payloads are feature text"),
        })
        .collect();

    let template = ds.attach_references(&load_preset(Scenario::CrimpFeatures));
    let backend = FnBackend(move |req: &ChatRequest| -> Result<Completion, ClientError> {
        let system = req.messages[0].text();
        let depth = match (
            system.contains(SectionKind::Context.header()),
            system.contains(SectionKind::Expertise.header()),
        ) {
            (false, false) => 0,
            (true, false) => 1,
            _ => 2,
        };
        let user = &req.messages[1];
        let query = match user.parts.last() {
            Some(promptad_core::client::ContentPart::Text { text }) => text,
            _ => return Err(ClientError::InvalidRequest("no query text".into())),
        };
        let (id, label) = by_text
            .get(query)
            .ok_or_else(|| ClientError::InvalidRequest("unknown query".into()))?;
        let flagged = *label == Label::Anomalous && rank[id] < DETECTED[depth];
        let f = ds.features(id).unwrap();
        let reasoning = if flagged {
            format!(
                "The TEST-SAMPLE's AUC ({}) or SLOPE ({}) lies outside the range of the reference samples.",
                format_number(f.auc_250_300),
                format_number(f.slope_150_190)
            )
        } else {
            format!(
                "The TEST-SAMPLE's SLOPE ({}) and AUC ({}) are comparable to the reference samples.",
                format_number(f.slope_150_190),
                format_number(f.auc_250_300)
            )
        };
        let text = render_verdict(&Verdict {
            classification: Label::from(flagged),
            reasoning,
        });
        let input_chars: usize = req.messages.iter().map(|m| m.text().len()).sum();
        Ok(Completion::new(
            text.clone(),
            Usage {
                input_tokens: (input_chars / 4) as u64,
                output_tokens: text.split_whitespace().count() as u64,
            },
        ))
    });

    let config = ModelConfig {
        mode: Mode::Record,
        cache_dir: Some(cache.clone()),
        ..ModelConfig::default()
    };
    let client = Client::with_backend(config, Arc::new(backend))?;
    let run = run_ablation(
        &samples,
        &template,
        &Scenario::CrimpFeatures.default_configs(),
        &client,
        &AblationOptions {
            exec: Execution::Serial,
            progress: None,
        },
    )?;
    for row in &run.rows {
        println!("{:<24} {:?} {}", row.key, row.confusion, row.metrics.percent_triplet());
    }
    println!("cache: {} ({} entries)", cache.display(), promptad_core::client::ResponseCache::new(&cache).len());
    Ok(())
}
