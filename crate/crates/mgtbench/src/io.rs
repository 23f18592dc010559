//! Corpus files, rejection logs and feature dumps.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use mgtbench_core::corpus::{Document, Rejection};
use mgtbench_core::detectors::FeatureVector;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ingest::{ingest, FieldMap, Ingested};
use crate::{Error, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Ingests `path`, returning valid documents and per-line errors.
pub fn ingest_file(path: &Path, map: &FieldMap) -> Result<Ingested> {
    ingest(open(path)?, map).map_err(|e| Error::io(path, e))
}

/// Reads a corpus file, failing on the first invalid line.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let out = ingest_file(path, &FieldMap::default())?;
    if !out.errors.is_empty() {
        return Err(Error::Ingest { path: path.to_path_buf(), errors: out.errors });
    }
    Ok(out.documents)
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    write_jsonl(create(path)?, docs)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// Reads the non-empty lines of a text file.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    open(path)?
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))
}

/// Rejection log with columns `id,rule,detail`.
pub fn write_rejections<W: Write>(w: W, rejected: &[(String, Rejection)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["id", "rule", "detail"])?;
    for (id, r) in rejected {
        out.write_record([id.as_str(), r.rule.as_str(), r.detail.as_str()])?;
    }
    out.flush().map_err(|e| Error::io("<rejections>", e))
}

/// One scored document for [`write_features`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub detector: String,
    pub features: FeatureVector,
}

/// Feature dump with columns `id,detector` followed by the union of feature
/// names in first-seen order. Cells a detector does not produce stay empty.
pub fn write_features<W: Write>(w: W, rows: &[FeatureRow]) -> Result<()> {
    let mut columns: Vec<&str> = Vec::new();
    for row in rows {
        for name in &row.features.names {
            if !columns.contains(&name.as_str()) {
                columns.push(name);
            }
        }
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["id", "detector"].into_iter().chain(columns.iter().copied()))?;
    for row in rows {
        let mut record = vec![row.id.clone(), row.detector.clone()];
        for col in &columns {
            record.push(
                row.features
                    .names
                    .iter()
                    .position(|n| n == col)
                    .map_or_else(String::new, |i| row.features.values[i].to_string()),
            );
        }
        out.write_record(&record)?;
    }
    out.flush().map_err(|e| Error::io("<features>", e))
}
