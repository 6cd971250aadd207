//! Line-delimited JSON manifests, one [`ExampleMeta`] per line.
//!
//! Recognized keys: `example_id` (required), `question`, `generated_answer`,
//! `reference_answer`, `similarity_score` (number or null) and `label` (0/1,
//! boolean or null). Any other keys are kept and written back unchanged.

use std::path::Path;

use hsad_core::ExampleMeta;
use serde_json::{Map, Value};

use super::bytes::{read_file, write_file};
use crate::error::{FormatError, Result};

/// A manifest record plus the keys this tool does not interpret.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManifestEntry {
    pub meta: ExampleMeta,
    pub extra: Map<String, Value>,
}

const KNOWN: [&str; 6] = [
    "example_id",
    "question",
    "generated_answer",
    "reference_answer",
    "similarity_score",
    "label",
];

fn parse_line(line: &str) -> std::result::Result<ManifestEntry, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let Value::Object(mut obj) = value else {
        return Err("record is not a JSON object".into());
    };
    let text = |obj: &Map<String, Value>, key: &str| -> std::result::Result<String, String> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(String::new()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(format!("`{key}` must be a string")),
        }
    };
    let example_id = match obj.get("example_id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err("`example_id` must be a non-empty string".into()),
        None => return Err("missing `example_id`".into()),
    };
    let similarity_score = match obj.get("similarity_score") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => Some(n.as_f64().ok_or("`similarity_score` is not representable")?),
        Some(_) => return Err("`similarity_score` must be a number".into()),
    };
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(Value::Bool(b)) => Some(*b),
        Some(Value::Number(n)) if n.as_u64() == Some(0) => Some(false),
        Some(Value::Number(n)) if n.as_u64() == Some(1) => Some(true),
        Some(_) => return Err("`label` must be 0, 1, true or false".into()),
    };
    let meta = ExampleMeta {
        question: text(&obj, "question")?,
        generated_answer: text(&obj, "generated_answer")?,
        reference_answer: text(&obj, "reference_answer")?,
        example_id,
        similarity_score,
        label,
    };
    meta.validate().map_err(|e| e.to_string())?;
    for key in KNOWN {
        obj.remove(key);
    }
    Ok(ManifestEntry { meta, extra: obj })
}

/// Parses manifest text; blank lines are skipped, line numbers are 1-based.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry = parse_line(line).map_err(|message| FormatError::Manifest { line: i + 1, message })?;
        if !seen.insert(entry.meta.example_id.clone()) {
            return Err(FormatError::Manifest {
                line: i + 1,
                message: format!("duplicate example_id `{}`", entry.meta.example_id),
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn render_manifest(entries: &[ManifestEntry]) -> Result<String> {
    let mut out = String::new();
    for e in entries {
        e.meta.validate()?;
        let mut obj = Map::new();
        let m = &e.meta;
        obj.insert("example_id".into(), Value::String(m.example_id.clone()));
        obj.insert("question".into(), Value::String(m.question.clone()));
        obj.insert("generated_answer".into(), Value::String(m.generated_answer.clone()));
        obj.insert("reference_answer".into(), Value::String(m.reference_answer.clone()));
        if let Some(s) = m.similarity_score {
            obj.insert("similarity_score".into(), Value::from(s));
        }
        if let Some(l) = m.label {
            obj.insert("label".into(), Value::from(u8::from(l)));
        }
        for (k, v) in &e.extra {
            obj.insert(k.clone(), v.clone());
        }
        out.push_str(&serde_json::to_string(&Value::Object(obj)).expect("JSON values serialize"));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| FormatError::Utf8("manifest"))?;
    parse_manifest(&text)
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    write_file(path, render_manifest(entries)?.as_bytes())
}

/// Wraps bare metas with no extra keys.
pub fn entries_from_metas(metas: Vec<ExampleMeta>) -> Vec<ManifestEntry> {
    metas
        .into_iter()
        .map(|meta| ManifestEntry {
            meta,
            extra: Map::new(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"example_id":"q1","question":"Capital of France?","generated_answer":"Paris","reference_answer":"Paris","similarity_score":0.93,"source":"trivia","tags":["geo"]}
{"example_id":"q2","question":"2+2?","generated_answer":"5","reference_answer":"4","label":1}

{"example_id":"q3","question":"Sky colour?","generated_answer":"blue","reference_answer":"blue","similarity_score":-0.25,"label":null}
"#;

    #[test]
    fn round_trip_keeps_unknown_fields() {
        let entries = parse_manifest(SAMPLE).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0].extra["source"], Value::String("trivia".into()));
        let again = parse_manifest(&render_manifest(&entries).unwrap()).unwrap();
        assert_eq!(entries, again);
    }

    #[test]
    fn score_without_label() {
        let entries = parse_manifest(SAMPLE).unwrap();
        assert_eq!(entries[0].meta.similarity_score, Some(0.93));
        assert_eq!(entries[0].meta.label, None);
        assert_eq!(entries[1].meta.label, Some(true));
        assert_eq!(entries[2].meta.similarity_score, Some(-0.25));
    }

    #[test]
    fn missing_id_reports_line() {
        let text = "{\"example_id\":\"a\"}\n\n{\"question\":\"no id\"}\n";
        match parse_manifest(text) {
            Err(FormatError::Manifest { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("example_id"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_and_duplicates() {
        assert!(matches!(parse_manifest("{oops}\n"), Err(FormatError::Manifest { line: 1, .. })));
        let dup = "{\"example_id\":\"a\"}\n{\"example_id\":\"a\"}\n";
        assert!(matches!(parse_manifest(dup), Err(FormatError::Manifest { line: 2, .. })));
        assert!(matches!(
            parse_manifest("{\"example_id\":\"a\",\"label\":2}\n"),
            Err(FormatError::Manifest { line: 1, .. })
        ));
    }
}
