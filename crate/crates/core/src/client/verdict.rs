use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::ClientError;
use crate::Label;

/// Parsed detector answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub classification: Label,
    pub reasoning: String,
}

/// The JSON object the output instruction asks for.
pub fn render_verdict(v: &Verdict) -> String {
    serde_json::json!({
        "Classification": v.classification.as_u8(),
        "Reasoning": v.reasoning,
    })
    .to_string()
}

/// Extracts the first top-level JSON object in `raw` (code fences and
/// surrounding prose are skipped) and reads `Classification` / `Reasoning`.
///
/// Keys match case-insensitively. Classification may be the integer 0/1 or
/// the string "0"/"1"; anything else is [`ClientError::MalformedOutput`].
pub fn parse_verdict(raw: &str) -> Result<Verdict, ClientError> {
    let object = first_object(raw)
        .ok_or_else(|| ClientError::MalformedOutput("no JSON object in response".into()))?;

    let classification = field(&object, "classification")
        .ok_or_else(|| ClientError::MalformedOutput("missing `Classification`".into()))?;
    let classification = match classification {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse::<u64>().ok(),
        _ => None,
    }
    .and_then(|v| u8::try_from(v).ok())
    .and_then(Label::from_u8)
    .ok_or_else(|| ClientError::MalformedOutput(format!("Classification must be 0 or 1, got {classification}")))?;

    let reasoning = match field(&object, "reasoning") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => {
            return Err(ClientError::MalformedOutput(format!("Reasoning must be a string, got {other}")))
        }
        None => return Err(ClientError::MalformedOutput("missing `Reasoning`".into())),
    };

    Ok(Verdict {
        classification,
        reasoning,
    })
}

fn field<'a>(object: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    object.get(key).or_else(|| {
        object
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(key))
            .map(|(_, v)| v)
    })
}

fn first_object(raw: &str) -> Option<Map<String, Value>> {
    raw.match_indices('{').find_map(|(pos, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[pos..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_object() {
        let v = parse_verdict(r#"{"Classification": 1, "Reasoning": "cut outer insulation"}"#).unwrap();
        assert_eq!(v.classification, Label::Anomalous);
        assert_eq!(v.reasoning, "cut outer insulation");
    }

    #[test]
    fn fenced_object() {
        let v = parse_verdict("```json\n{\"Classification\": 0, \"Reasoning\": \"ok\"}\n```").unwrap();
        assert_eq!(v, Verdict { classification: Label::Normal, reasoning: "ok".into() });
    }

    #[test]
    fn string_class_and_prose_around() {
        let v = parse_verdict("Sure. {not json} Here: {\"classification\": \"1\", \"reasoning\": \"x {y}\"} done").unwrap();
        assert_eq!(v.classification, Label::Anomalous);
        assert_eq!(v.reasoning, "x {y}");
    }

    #[test]
    fn rejects_bad_outputs() {
        for raw in [
            r#"{"Classification": 2, "Reasoning": "x"}"#,
            r#"{"Classification": -1, "Reasoning": "x"}"#,
            r#"{"Classification": 1.5, "Reasoning": "x"}"#,
            r#"{"Classification": "yes", "Reasoning": "x"}"#,
            r#"{"Classification": 1}"#,
            r#"{"Reasoning": "x"}"#,
            r#"{"Classification": 1, "Reasoning": 3}"#,
            "the sample looks anomalous",
            "",
            "{\"Classification\": 1, \"Reasoning\": \"trunc",
        ] {
            assert!(matches!(parse_verdict(raw), Err(ClientError::MalformedOutput(_))), "{raw}");
        }
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(anomalous in any::<bool>(), reasoning in ".*") {
            let v = Verdict {
                classification: if anomalous { Label::Anomalous } else { Label::Normal },
                reasoning,
            };
            prop_assert_eq!(parse_verdict(&render_verdict(&v)).unwrap(), v);
        }
    }
}
