//! JSON and CSV emitters for evaluation results.
//!
//! JSON is pretty-printed with struct field order and a trailing newline.
//! CSV layouts:
//! - single report: `class,precision,recall,f1,support` then summary rows
//!   `all,,,<f1>,<n_test>`, `macro,,,<macro_f1>,` and `accuracy,,,<accuracy>,`;
//! - transfer matrix: `source,target,metric,value`, one row per cell and metric;
//! - CIL run: `run,stage,head_dim,old_macro_f1,new_macro_f1,macro_f1`.

use std::io::Write;

use mgtbench_core::bench::{CilRun, StageReport, TransferMatrix};
use mgtbench_core::metrics::EvalReport;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Any result the CLI writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum Results {
    Matrix(TransferMatrix),
    Cil(CilRun),
    Eval(EvalReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn flush<W: Write>(mut w: W) -> Result<()> {
    w.flush().map_err(|e| Error::io("<output>", e))
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    flush(w)
}

pub fn write_report_csv<W: Write>(w: W, report: &EvalReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["class", "precision", "recall", "f1", "support"])?;
    for class in &report.classes {
        let m = &report.per_class[class];
        out.write_record([class.clone(), m.precision.to_string(), m.recall.to_string(), m.f1.to_string(), m.support.to_string()])?;
    }
    let n = report.metadata.n_test.to_string();
    out.write_record(["all", "", "", &report.f1.to_string(), &n])?;
    out.write_record(["macro", "", "", &report.macro_f1.to_string(), ""])?;
    out.write_record(["accuracy", "", "", &report.accuracy.to_string(), ""])?;
    out.flush().map_err(|e| Error::io("<output>", e))
}

pub fn write_matrix_csv<W: Write>(w: W, matrix: &TransferMatrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["source", "target", "metric", "value"])?;
    for row in matrix.long_format() {
        out.write_record([row.source, row.target, row.metric, row.value.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("<output>", e))
}

pub fn write_cil_csv<W: Write>(w: W, run: &CilRun) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run", "stage", "head_dim", "old_macro_f1", "new_macro_f1", "macro_f1"])?;
    let mut stage = |name: &str, s: &StageReport| {
        out.write_record([
            name.to_string(),
            s.stage.to_string(),
            s.head_dim.to_string(),
            s.old_macro_f1.to_string(),
            s.new_macro_f1.to_string(),
            s.report.macro_f1.to_string(),
        ])
    };
    stage("base", &run.base)?;
    for s in &run.updates {
        stage(s.technique.as_str(), s)?;
    }
    stage("joint", &run.joint)?;
    out.flush().map_err(|e| Error::io("<output>", e))
}

impl Results {
    pub fn write<W: Write>(&self, w: W, format: Format) -> Result<()> {
        match (format, self) {
            (Format::Json, r) => write_json(w, r),
            (Format::Csv, Results::Eval(r)) => write_report_csv(w, r),
            (Format::Csv, Results::Matrix(m)) => write_matrix_csv(w, m),
            (Format::Csv, Results::Cil(c)) => write_cil_csv(w, c),
        }
    }
}
