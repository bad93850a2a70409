mod common;

use std::sync::Arc;

use promptad_core::client::{Client, ModelConfig, Outcome, ScriptedBackend, SCHEMA_REMINDER};
use promptad_core::eval::{run_ablation, AblationOptions, ConfusionMatrix, EvalSample};
use promptad_core::prompt::{compose, load_preset, AblationConfig, Payload, Scenario, ShotMode};
use promptad_core::{Execution, Label};

const FENCED: &str = "```json\n{\"Classification\": 1, \"Reasoning\": \"bent strands\"}\n```";
const VALID_OK: &str = r#"{"Classification": 0, "Reasoning": "looks fine"}"#;
const PROSE: &str = "I think this one is probably fine.";
const BAD_VALUE: &str = r#"{"Classification": "maybe", "Reasoning": "unsure"}"#;

fn payload(i: usize) -> Payload {
    Payload::FeatureText(format!("SLOPE datapoint 150 to 190: {i}\n\nAUC datapoint 250 to 300: 1"))
}

fn client(responses: &[&str]) -> (Client, Arc<ScriptedBackend>) {
    let backend = Arc::new(ScriptedBackend::new(responses.iter().copied()));
    let config = ModelConfig {
        max_in_flight: 1,
        ..ModelConfig::default()
    };
    (Client::with_backend(config, backend.clone()).unwrap(), backend)
}

#[test]
fn fenced_retry_and_double_failure() {
    let (client, backend) = client(&[FENCED, PROSE, VALID_OK, PROSE, BAD_VALUE]);
    let template = load_preset(Scenario::CrimpFeatures);
    let config = AblationConfig::new(false, false, ShotMode::ZeroShot);

    let records: Vec<_> = (0..3)
        .map(|i| {
            let prompt = compose(&template, &config, &payload(i)).unwrap();
            client.classify(&prompt, &format!("s{i}")).unwrap()
        })
        .collect();

    assert_eq!(records[0].classification(), Some(Label::Anomalous));
    assert_eq!(records[0].reasoning(), Some("bent strands"));
    assert!(!records[0].retried);

    assert_eq!(records[1].classification(), Some(Label::Normal));
    assert!(records[1].retried);

    assert!(records[2].retried);
    match &records[2].outcome {
        Outcome::ParseFailure { raw_text } => assert_eq!(raw_text, BAD_VALUE),
        other => panic!("expected parse failure, got {other:?}"),
    }
    assert_eq!(records[2].classification(), None);
    assert_eq!(backend.calls(), 5);
}

#[test]
fn retry_usage_is_summed() {
    let (client, _) = client(&[PROSE, VALID_OK]);
    let template = load_preset(Scenario::CrimpFeatures);
    let prompt = compose(&template, &AblationConfig::new(false, false, ShotMode::ZeroShot), &payload(0)).unwrap();
    let r = client.classify(&prompt, "x").unwrap();
    // Scripted usage: 100 input tokens per call, output = word count.
    assert_eq!(r.usage.input_tokens, 200);
    assert_eq!(
        r.usage.output_tokens,
        (PROSE.split_whitespace().count() + VALID_OK.split_whitespace().count()) as u64
    );
    assert!(!SCHEMA_REMINDER.is_empty());
}

#[test]
fn parse_failures_stay_out_of_the_matrix() {
    // Sample order under serial execution: fenced (anomalous, correct),
    // retried (normal, correct), doubly malformed (anomalous truth).
    let (client, _) = client(&[FENCED, PROSE, VALID_OK, PROSE, BAD_VALUE]);
    let samples: Vec<EvalSample> = [Label::Anomalous, Label::Normal, Label::Anomalous]
        .into_iter()
        .enumerate()
        .map(|(i, label)| EvalSample {
            id: format!("s{i}"),
            label,
            defect_class: None,
            payload: payload(i),
        })
        .collect();
    let options = AblationOptions {
        exec: Execution::Serial,
        progress: None,
    };
    let run = run_ablation(
        &samples,
        &load_preset(Scenario::CrimpFeatures),
        &[AblationConfig::new(false, false, ShotMode::ZeroShot)],
        &client,
        &options,
    )
    .unwrap();
    let row = &run.rows[0];
    assert_eq!(row.confusion, ConfusionMatrix { tp: 1, fp: 0, fn_: 0, tn: 1, unparseable: 1 });
    assert_eq!(row.unparseable, 1);
    assert_eq!(row.metrics.f1, 1.0);
    assert!(!run.records[0][2].is_misclassified());
}
