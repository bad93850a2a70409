//! Human-editable template file format.
//!
//! ```text
//! #version: 3
//! #provenance: free text, one line per directive
//! #section: task
//! <body lines>
//! #section: context
//! <body lines>
//! #reference: {"id": "...", "role": "non_anomalous", "payload": {...}}
//! ```
//!
//! Body lines that would read as a directive (or start with a backslash)
//! are written with one leading backslash, which the parser strips.

use std::collections::BTreeMap;

use super::template::{PromptTemplate, ReferenceSample};
use super::{PromptError, SectionKind};

const VERSION: &str = "#version:";
const PROVENANCE: &str = "#provenance:";
const SECTION: &str = "#section:";
const REFERENCE: &str = "#reference:";

fn is_directive(line: &str) -> bool {
    [VERSION, PROVENANCE, SECTION, REFERENCE]
        .iter()
        .any(|d| line.starts_with(d))
}

fn escape(line: &str) -> String {
    if is_directive(line) || line.starts_with('\\') {
        format!("\\{line}")
    } else {
        line.to_string()
    }
}

fn unescape(line: &str) -> &str {
    match line.strip_prefix('\\') {
        Some(rest) if is_directive(rest) || rest.starts_with('\\') => rest,
        _ => line,
    }
}

fn directive_value<'a>(line: &'a str, directive: &str) -> &'a str {
    let rest = &line[directive.len()..];
    rest.strip_prefix(' ').unwrap_or(rest)
}

pub fn render_template(template: &PromptTemplate) -> String {
    let mut out = format!("{VERSION} {}\n", template.version);
    if !template.provenance.is_empty() {
        for line in template.provenance.split('\n') {
            out.push_str(&format!("{PROVENANCE} {line}\n"));
        }
    }
    for kind in SectionKind::ALL {
        if let Some(body) = template.sections.get(&kind) {
            out.push_str(&format!("{SECTION} {}\n", kind.name()));
            let escaped: Vec<String> = body.split('\n').map(escape).collect();
            out.push_str(&escaped.join("\n"));
            out.push('\n');
        }
    }
    for r in &template.references {
        let json = serde_json::to_string(r).expect("reference serializes");
        out.push_str(&format!("{REFERENCE} {json}\n"));
    }
    out
}

pub fn parse_template(text: &str) -> Result<PromptTemplate, PromptError> {
    let text = text.strip_suffix('\n').unwrap_or(text);
    let mut version: Option<u64> = None;
    let mut provenance: Vec<&str> = Vec::new();
    let mut sections: BTreeMap<SectionKind, String> = BTreeMap::new();
    let mut references = Vec::new();
    let mut current: Option<(SectionKind, Vec<&str>)> = None;

    let err = |line: usize, message: String| PromptError::Format { line, message };

    let flush = |current: &mut Option<(SectionKind, Vec<&str>)>,
                 sections: &mut BTreeMap<SectionKind, String>| {
        if let Some((kind, lines)) = current.take() {
            let body: Vec<&str> = lines.into_iter().map(unescape).collect();
            sections.insert(kind, body.join("\n"));
        }
    };

    for (idx, line) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        if line.starts_with(SECTION) {
            flush(&mut current, &mut sections);
            let kind: SectionKind = directive_value(line, SECTION)
                .parse()
                .map_err(|e: PromptError| err(lineno, e.to_string()))?;
            if sections.contains_key(&kind) {
                return Err(err(lineno, format!("duplicate section `{kind}`")));
            }
            current = Some((kind, Vec::new()));
        } else if line.starts_with(REFERENCE) {
            flush(&mut current, &mut sections);
            let r: ReferenceSample = serde_json::from_str(directive_value(line, REFERENCE))
                .map_err(|e| err(lineno, format!("bad reference: {e}")))?;
            references.push(r);
        } else if line.starts_with(VERSION) || line.starts_with(PROVENANCE) {
            if current.is_some() || !sections.is_empty() || !references.is_empty() {
                return Err(err(lineno, "header directive after first section".into()));
            }
            if line.starts_with(VERSION) {
                let v = directive_value(line, VERSION)
                    .trim()
                    .parse::<u64>()
                    .map_err(|e| err(lineno, format!("bad version: {e}")))?;
                version = Some(v);
            } else {
                provenance.push(directive_value(line, PROVENANCE));
            }
        } else if let Some((_, lines)) = current.as_mut() {
            lines.push(line);
        } else if !references.is_empty() {
            if !line.trim().is_empty() {
                return Err(err(lineno, "text after reference manifest".into()));
            }
        } else if !line.trim().is_empty() {
            return Err(err(lineno, "text before first section".into()));
        }
    }
    flush(&mut current, &mut sections);

    Ok(PromptTemplate {
        sections,
        references,
        version: version.unwrap_or(1),
        provenance: provenance.join("\n"),
    })
}
