//! Line-delimited JSON ingestion with per-line error reporting.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use mgtbench_core::corpus::{normalize_whitespace, Document, Domain, Label, SourceKind};
use serde_json::{Map, Value};

/// Record field names for each document attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMap {
    pub id: String,
    pub text: String,
    pub label: String,
    pub domain: String,
    pub subfield: String,
    pub source: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            text: "text".into(),
            label: "label".into(),
            domain: "domain".into(),
            subfield: "subfield".into(),
            source: "source".into(),
        }
    }
}

impl FieldMap {
    /// Applies an `attribute=field` override such as `text=body`.
    pub fn set(&mut self, assignment: &str) -> Result<(), String> {
        let (attr, field) = assignment
            .split_once('=')
            .ok_or_else(|| format!("expected attribute=field, got {assignment:?}"))?;
        let slot = match attr.trim() {
            "id" => &mut self.id,
            "text" => &mut self.text,
            "label" => &mut self.label,
            "domain" => &mut self.domain,
            "subfield" => &mut self.subfield,
            "source" => &mut self.source,
            other => return Err(format!("unknown document attribute {other:?}")),
        };
        *slot = field.trim().to_string();
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineErrorKind {
    Malformed(String),
    MissingField(String),
    InvalidField { field: String, reason: String },
    EmptyText,
    DuplicateId(String),
}

/// A rejected input line, numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub kind: LineErrorKind,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            LineErrorKind::Malformed(m) => write!(f, "malformed record: {m}"),
            LineErrorKind::MissingField(name) => write!(f, "missing field {name:?}"),
            LineErrorKind::InvalidField { field, reason } => write!(f, "field {field:?}: {reason}"),
            LineErrorKind::EmptyText => f.write_str("text is empty after whitespace normalization"),
            LineErrorKind::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
        }
    }
}

impl std::error::Error for LineError {}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Ingested {
    pub documents: Vec<Document>,
    pub errors: Vec<LineError>,
}

fn string_field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<Option<&'a str>, LineErrorKind> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(LineErrorKind::InvalidField { field: name.into(), reason: format!("expected a string, got {other}") }),
    }
}

fn record(obj: &Map<String, Value>, map: &FieldMap, line: usize) -> Result<Document, LineErrorKind> {
    let text = string_field(obj, &map.text)?.ok_or_else(|| LineErrorKind::MissingField(map.text.clone()))?;
    let label = string_field(obj, &map.label)?.ok_or_else(|| LineErrorKind::MissingField(map.label.clone()))?;
    if label.trim().is_empty() {
        return Err(LineErrorKind::InvalidField { field: map.label.clone(), reason: "empty label".into() });
    }
    let id = match obj.get(&map.id) {
        Some(Value::Number(n)) => n.to_string(),
        _ => string_field(obj, &map.id)?.map_or_else(|| format!("line-{line}"), str::to_string),
    };
    let text = normalize_whitespace(text);
    if text.is_empty() {
        return Err(LineErrorKind::EmptyText);
    }
    let mut doc = Document::new(id, text, Label::from(label.trim()));
    if let Some(d) = string_field(obj, &map.domain)? {
        doc.domain = Some(d.parse::<Domain>().map_err(|e| LineErrorKind::InvalidField { field: map.domain.clone(), reason: e.to_string() })?);
    }
    if let Some(s) = string_field(obj, &map.subfield)? {
        doc.subfield = s.to_string();
    }
    if let Some(s) = string_field(obj, &map.source)? {
        doc.source_kind =
            Some(s.parse::<SourceKind>().map_err(|e| LineErrorKind::InvalidField { field: map.source.clone(), reason: e.to_string() })?);
    }
    Ok(doc)
}

/// Parses one JSON object per line. Blank lines are skipped; every other
/// line yields either a document or a [`LineError`]. Missing ids default to
/// `line-<n>`.
pub fn ingest<R: BufRead>(reader: R, map: &FieldMap) -> std::io::Result<Ingested> {
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(obj)) => record(&obj, map, n),
            Ok(other) => Err(LineErrorKind::Malformed(format!("expected an object, got {other}"))),
            Err(e) => Err(LineErrorKind::Malformed(e.to_string())),
        };
        match parsed {
            Ok(doc) if !seen.insert(doc.id.clone()) => {
                out.errors.push(LineError { line: n, kind: LineErrorKind::DuplicateId(doc.id) })
            }
            Ok(doc) => out.documents.push(doc),
            Err(kind) => out.errors.push(LineError { line: n, kind }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str) -> Ingested {
        ingest(input.as_bytes(), &FieldMap::default()).unwrap()
    }

    #[test]
    fn valid_line() {
        let out = run(r#"{"id":"a","text":"hello   world","label":"human"}"#);
        assert!(out.errors.is_empty());
        assert_eq!(out.documents, vec![Document::new("a", "hello world", "human")]);
    }

    #[test]
    fn empty_stream() {
        assert_eq!(run(""), Ingested::default());
    }

    #[test]
    fn per_line_errors() {
        let out = run("{\"id\":\"a\",\"label\":\"human\"}\nnot json\n\n{\"text\":\"x\",\"label\":\"gpt\",\"domain\":\"law\"}\n{\"id\":\"a\",\"text\":\"y\",\"label\":\"gpt\"}\n{\"id\":\"a\",\"text\":\"y\",\"label\":\"gpt\"}");
        let lines: Vec<usize> = out.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![1, 2, 4, 6]);
        assert_eq!(out.errors[0].kind, LineErrorKind::MissingField("text".into()));
        assert!(out.errors[0].to_string().contains("\"text\""));
        assert_eq!(out.documents.len(), 1);
    }

    #[test]
    fn field_map_overrides() {
        let mut map = FieldMap::default();
        map.set("text=body").unwrap();
        map.set("label = author").unwrap();
        assert!(map.set("colour=x").is_err());
        let out = ingest(r#"{"body":"b","author":"gpt4","source":"wikipedia","domain":"STEM"}"#.as_bytes(), &map).unwrap();
        let d = &out.documents[0];
        assert_eq!((d.id.as_str(), d.label.as_str()), ("line-1", "gpt4"));
        assert_eq!(d.source_kind, Some(SourceKind::Wiki));
        assert_eq!(d.domain, Some(Domain::Stem));
    }
}
