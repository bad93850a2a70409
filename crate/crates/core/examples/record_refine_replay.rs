//! Records the refinement fixture: a cable template whose expertise lacks
//! the single-anomaly rule, a process-engineer note asking for it, and a
//! scripted pre-processor answer that adds it back.
//!
//! Usage: `cargo run --example record_refine_replay [FIXTURE_DIR]`

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use promptad_core::client::{ChatRequest, Client, Completion, FnBackend, Mode, ModelConfig, Usage};
use promptad_core::prompt::{load_preset, Scenario, SectionKind};
use promptad_core::refine::{refine, RefinementRequest};

const RULE: &str = "- Any **single anomaly** is enough to flag the image as faulty.\n";
const NOTES: &str = "For this cable a single matching criterion is sufficient to call it defective.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "crates/core/tests/fixtures/refine".into()),
    );

    let preset = load_preset(Scenario::Cable);
    let full = preset.section(SectionKind::Expertise).to_string();
    assert!(full.contains(RULE));
    let current = preset.with_section(SectionKind::Expertise, full.replace(RULE, ""));
    let request = RefinementRequest::new(NOTES, current, vec![SectionKind::Expertise]);

    let answer = format!(
        "EXPERTISE INSTRUCTION:\n````\n{full}\n````\n\nRATIONALE: Added an explicit rule that one matching defect criterion is enough to flag the sample."
    );
    let backend = FnBackend(move |req: &ChatRequest| {
        let input_chars: usize = req.messages.iter().map(|m| m.text().len()).sum();
        Ok(Completion::new(
            answer.clone(),
            Usage {
                input_tokens: (input_chars / 4) as u64,
                output_tokens: answer.split_whitespace().count() as u64,
            },
        ))
    });

    fs::create_dir_all(&dir)?;
    fs::write(dir.join("request.json"), serde_json::to_string_pretty(&request)? + "\n")?;
    let config = ModelConfig {
        model_id: "gpt-4o".into(),
        mode: Mode::Record,
        cache_dir: Some(dir.join("cache")),
        ..ModelConfig::default()
    };
    let client = Client::with_backend(config, Arc::new(backend))?;
    let proposal = refine(&client, &request)?;
    println!("rationale: {}", proposal.rationale);
    println!("fixture: {}", dir.display());
    Ok(())
}
