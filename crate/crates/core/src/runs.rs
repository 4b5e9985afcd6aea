//! Training-run records and their CSV / JSON ingestion.
//!
//! CSV header (exact column names):
//!
//! ```text
//! size_label,variant,n_layers,d_model,n_head,d_head,gqa,f_size,d_tokens,loss
//! ```
//!
//! Architecture columns may be left empty when `size_label` and `variant`
//! name a bundled corpus entry; non-empty inline columns override the corpus
//! values. The short header `size_label,variant,d_tokens,loss` is also
//! accepted for corpus-only files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{validate, ArchitectureConfig};
use crate::corpus;

pub const CSV_HEADER: [&str; 10] = [
    "size_label",
    "variant",
    "n_layers",
    "d_model",
    "n_head",
    "d_head",
    "gqa",
    "f_size",
    "d_tokens",
    "loss",
];

const SHORT_HEADER: [&str; 4] = ["size_label", "variant", "d_tokens", "loss"];

#[derive(Debug, Error)]
pub enum RunsError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: field {field}: {message}")]
    Row {
        row: usize,
        field: String,
        message: String,
    },
    #[error("unexpected header {found:?}; expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown run format {0:?} (expected csv or json)")]
    UnknownFormat(String),
}

fn row_err(row: usize, field: &str, message: impl Into<String>) -> RunsError {
    RunsError::Row {
        row,
        field: field.to_string(),
        message: message.into(),
    }
}

/// One training run: a shape, its token budget and its final loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub arch: ArchitectureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub d_tokens: u64,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl RunRecord {
    pub fn n_nonembed(&self) -> u64 {
        self.arch.params().n_nonembed
    }

    pub fn check(&self) -> Result<(), String> {
        let v = validate(&self.arch);
        if !v.is_empty() {
            return Err(v.iter().map(|v| v.rule.clone()).collect::<Vec<_>>().join("; "));
        }
        if !(self.loss.is_finite() && self.loss > 0.0) {
            return Err(format!("loss must be positive, got {}", self.loss));
        }
        if self.d_tokens == 0 {
            return Err("d_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunFormat {
    Csv,
    Json,
}

impl RunFormat {
    pub fn parse(s: &str) -> Result<Self, RunsError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(RunsError::UnknownFormat(other.to_string())),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, RunsError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        Self::parse(&ext.to_ascii_lowercase())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRuns {
    pub records: Vec<RunRecord>,
    /// 1-based data row numbers that repeat an earlier `(shape, D)` pair.
    /// Repeated runs are legal and kept.
    pub duplicate_rows: Vec<usize>,
}

pub fn load_runs(path: &Path, format: RunFormat) -> Result<LoadedRuns, RunsError> {
    let text = fs::read_to_string(path).map_err(|source| RunsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        RunFormat::Csv => parse_runs_csv(&text),
        RunFormat::Json => parse_runs_json(&text),
    }
}

fn parse_count(row: usize, field: &str, raw: &str) -> Result<u64, RunsError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| row_err(row, field, format!("not a number: {raw:?}")))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(row_err(row, field, format!("not a nonnegative integer: {raw:?}")));
    }
    Ok(v as u64)
}

fn resolve_corpus(row: usize, size: Option<&str>, variant: Option<&str>) -> Result<Option<ArchitectureConfig>, RunsError> {
    match (size, variant) {
        (Some(s), Some(v)) => corpus::lookup(s, v)
            .map(|e| Some(e.config()))
            .ok_or_else(|| row_err(row, "variant", format!("unknown corpus reference {s}/{v}"))),
        _ => Ok(None),
    }
}

pub fn parse_runs_csv(text: &str) -> Result<LoadedRuns, RunsError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let full = header.iter().map(String::as_str).eq(CSV_HEADER.iter().copied());
    let short = header.iter().map(String::as_str).eq(SHORT_HEADER.iter().copied());
    if !full && !short {
        return Err(RunsError::Header {
            found: header,
            expected: CSV_HEADER.iter().map(|s| s.to_string()).collect(),
        });
    }
    let col = |name: &str| header.iter().position(|h| h == name);

    let mut records = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let fields = result?;
        let get = |name: &str| {
            col(name)
                .and_then(|c| fields.get(c))
                .filter(|s| !s.is_empty())
        };
        let size_label = get("size_label").map(str::to_string);
        let variant = get("variant").map(str::to_string);
        let mut arch = resolve_corpus(row, size_label.as_deref(), variant.as_deref())?;

        let arch_fields = ["n_layers", "d_model", "n_head", "d_head", "gqa", "f_size"];
        let mut inline = HashMap::new();
        for f in arch_fields {
            if let Some(raw) = get(f) {
                inline.insert(f, parse_count(row, f, raw)?);
            }
        }
        if arch.is_none() {
            if let Some(missing) = arch_fields.iter().find(|f| !inline.contains_key(**f)) {
                return Err(row_err(
                    row,
                    missing,
                    "missing architecture column and no size_label/variant corpus reference",
                ));
            }
            arch = Some(ArchitectureConfig::new("", 0, 0, 0, 0, 0, 0));
        }
        let mut arch = arch.expect("set above");
        for (f, v) in &inline {
            match *f {
                "n_layers" => arch.n_layers = *v,
                "d_model" => arch.d_model = *v,
                "n_head" => arch.n_head = *v,
                "d_head" => arch.d_head = *v,
                "gqa" => arch.gqa = *v,
                _ => arch.f_size = *v,
            }
        }
        if arch.name.is_empty() || !inline.is_empty() {
            arch.name = match (&size_label, &variant) {
                (Some(s), Some(v)) if inline.is_empty() => format!("{s}/{v}"),
                (Some(s), Some(v)) => format!("{s}/{v}*"),
                _ => format!("row{row}"),
            };
        }

        let d_tokens = parse_count(row, "d_tokens", get("d_tokens").ok_or_else(|| row_err(row, "d_tokens", "missing"))?)?;
        let loss_raw = get("loss").ok_or_else(|| row_err(row, "loss", "missing"))?;
        let loss: f64 = loss_raw
            .parse()
            .map_err(|_| row_err(row, "loss", format!("not a number: {loss_raw:?}")))?;
        let rec = RunRecord {
            arch,
            size_label,
            variant,
            d_tokens,
            loss,
            tags: Vec::new(),
        };
        if let Err(msg) = rec.check() {
            let field = if msg.starts_with("loss") {
                "loss"
            } else if msg.starts_with("d_tokens") {
                "d_tokens"
            } else {
                "architecture"
            };
            return Err(row_err(row, field, msg));
        }
        records.push(rec);
    }
    Ok(with_duplicates(records))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRun {
    #[serde(default)]
    arch: Option<ArchitectureConfig>,
    /// `"80M/v1"`-style corpus reference.
    #[serde(default)]
    corpus: Option<String>,
    #[serde(default)]
    size_label: Option<String>,
    #[serde(default)]
    variant: Option<String>,
    d_tokens: f64,
    loss: f64,
    #[serde(default)]
    tags: Vec<String>,
}

/// JSON array of `{"arch": {...} | "corpus": "80M/v1", "d_tokens", "loss", ...}`.
pub fn parse_runs_json(text: &str) -> Result<LoadedRuns, RunsError> {
    let runs: Vec<JsonRun> = serde_json::from_str(text)?;
    let mut records = Vec::with_capacity(runs.len());
    for (i, run) in runs.into_iter().enumerate() {
        let row = i + 1;
        let (mut size_label, mut variant) = (run.size_label, run.variant);
        let arch = match (run.arch, run.corpus) {
            (Some(a), _) => a,
            (None, Some(reference)) => {
                let e = corpus::resolve(&reference)
                    .ok_or_else(|| row_err(row, "corpus", format!("unknown corpus reference {reference}")))?;
                size_label.get_or_insert_with(|| e.size_label.to_string());
                variant.get_or_insert_with(|| e.variant.to_string());
                e.config()
            }
            (None, None) => match resolve_corpus(row, size_label.as_deref(), variant.as_deref())? {
                Some(a) => a,
                None => return Err(row_err(row, "arch", "missing arch and corpus reference")),
            },
        };
        if !(run.d_tokens.is_finite() && run.d_tokens > 0.0 && run.d_tokens.fract() == 0.0) {
            return Err(row_err(row, "d_tokens", "d_tokens must be a positive integer"));
        }
        let rec = RunRecord {
            arch,
            size_label,
            variant,
            d_tokens: run.d_tokens as u64,
            loss: run.loss,
            tags: run.tags,
        };
        rec.check().map_err(|m| row_err(row, "record", m))?;
        records.push(rec);
    }
    Ok(with_duplicates(records))
}

fn with_duplicates(records: Vec<RunRecord>) -> LoadedRuns {
    let mut seen = HashMap::new();
    let mut duplicate_rows = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if seen.insert((r.arch.shape_key(), r.d_tokens), i).is_some() {
            duplicate_rows.push(i + 1);
        }
    }
    LoadedRuns {
        records,
        duplicate_rows,
    }
}

/// Writes records in the full CSV schema.
pub fn write_runs_csv<W: std::io::Write>(out: W, records: &[RunRecord]) -> Result<(), RunsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.size_label.clone().unwrap_or_default(),
            r.variant.clone().unwrap_or_default(),
            r.arch.n_layers.to_string(),
            r.arch.d_model.to_string(),
            r.arch.n_head.to_string(),
            r.arch.d_head.to_string(),
            r.arch.gqa.to_string(),
            r.arch.f_size.to_string(),
            r.d_tokens.to_string(),
            format!("{}", r.loss),
        ])?;
    }
    w.flush().map_err(|source| RunsError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}
