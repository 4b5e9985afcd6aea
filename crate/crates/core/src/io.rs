//! Versioned JSON artifacts (laws, hardware, shapes, reference sources) and
//! the search report CSV.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::arch::{validate, ArchitectureConfig};
use crate::corpus;
use crate::cost::HardwareProfile;
use crate::laws::{ChinchillaParams, ConditionalLaw, LawForm, RefLossSource};
use crate::search::CandidateEvaluation;

pub const LAW_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("format_version {found} is newer than the supported version {supported}")]
    UnsupportedVersion { found: u64, supported: u64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn fmt_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_json(path: &Path, text: &str) -> Result<Value, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn coefficient_names(form: LawForm) -> &'static [&'static str] {
    match form {
        LawForm::Multiplicative => &["a0", "a1", "a2", "b0", "b1", "b2"],
        LawForm::Additive => &["a0", "a1", "a2", "b1", "b2"],
        LawForm::Joint => &["a0", "a1", "a2"],
    }
}

const GAUGE_NOTE: &str = "multiplicative factors are defined up to a constant c: (a/c)*(b*c) predicts identically; compare laws by predictions, not raw coefficients";

/// A law plus free-form fit metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LawFile {
    pub law: ConditionalLaw,
    pub fit_meta: Option<Value>,
}

pub fn law_to_json(law: &ConditionalLaw, fit_meta: Option<&Value>) -> Value {
    let form = law.form();
    let mut m = Map::new();
    m.insert("format_version".into(), json!(LAW_FORMAT_VERSION));
    m.insert("form".into(), json!(form.as_str()));
    m.insert("log_base".into(), json!("natural"));
    for (name, v) in coefficient_names(form).iter().zip(law.coefficients()) {
        m.insert((*name).into(), json!(v));
    }
    if form == LawForm::Multiplicative {
        m.insert("gauge".into(), json!(GAUGE_NOTE));
    }
    if let Some(meta) = fit_meta {
        m.insert("fit_meta".into(), meta.clone());
    }
    Value::Object(m)
}

pub fn law_from_json(v: &Value) -> Result<LawFile, IoError> {
    let obj = v.as_object().ok_or_else(|| fmt_err("law file must be a JSON object"))?;
    let version = obj
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| fmt_err("law file lacks an integer format_version"))?;
    if version > LAW_FORMAT_VERSION {
        return Err(IoError::UnsupportedVersion {
            found: version,
            supported: LAW_FORMAT_VERSION,
        });
    }
    let form_name = obj
        .get("form")
        .and_then(Value::as_str)
        .ok_or_else(|| fmt_err("law file lacks a form"))?;
    let form = LawForm::parse(form_name).ok_or_else(|| {
        fmt_err(format!(
            "unknown law form {form_name:?} (expected multiplicative, additive or joint)"
        ))
    })?;
    if let Some(base) = obj.get("log_base") {
        if base.as_str() != Some("natural") {
            return Err(fmt_err(format!("unsupported log_base {base}; only \"natural\" is defined")));
        }
    }
    let names = coefficient_names(form);
    let mut c = Vec::with_capacity(names.len());
    for name in names {
        let v = obj
            .get(*name)
            .ok_or_else(|| fmt_err(format!("{form} law is missing coefficient {name}")))?
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| fmt_err(format!("coefficient {name} must be a finite number")))?;
        c.push(v);
    }
    for key in obj.keys() {
        let known = ["format_version", "form", "log_base", "gauge", "fit_meta"].contains(&key.as_str())
            || names.contains(&key.as_str());
        if !known {
            return Err(fmt_err(format!("unexpected key {key:?} in {form} law file")));
        }
    }
    let law = ConditionalLaw::from_coefficients(form, &c).map_err(|e| fmt_err(e.to_string()))?;
    Ok(LawFile {
        law,
        fit_meta: obj.get("fit_meta").cloned(),
    })
}

pub fn save_law(path: &Path, law: &ConditionalLaw, fit_meta: Option<&Value>) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(&law_to_json(law, fit_meta)).expect("law JSON serialises");
    write(path, &(text + "\n"))
}

pub fn load_law(path: &Path) -> Result<LawFile, IoError> {
    let text = read(path)?;
    law_from_json(&parse_json(path, &text)?)
}

/// A bundled profile name (`a100-40g`) or a JSON file path.
pub fn load_hardware(spec: &str) -> Result<HardwareProfile, IoError> {
    if let Some(hw) = HardwareProfile::builtin(spec) {
        return Ok(hw);
    }
    let path = Path::new(spec);
    let text = read(path)?;
    let hw: HardwareProfile = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: spec.to_string(),
        source,
    })?;
    hw.validate().map_err(|e| fmt_err(e.to_string()))?;
    Ok(hw)
}

/// A JSON file path, a named reference model (`Panda-1B`) or a corpus
/// reference (`80M/v1`).
pub fn load_architecture(spec: &str) -> Result<ArchitectureConfig, IoError> {
    let path = Path::new(spec);
    let config = if path.is_file() {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|source| IoError::Json {
            path: spec.to_string(),
            source,
        })?
    } else if let Some(m) = corpus::reference_model(spec) {
        m.config
    } else if let Some(e) = corpus::resolve(spec) {
        e.config()
    } else {
        return Err(fmt_err(format!(
            "{spec}: not a file, reference model or corpus entry"
        )));
    };
    let violations = validate(&config);
    if !violations.is_empty() {
        let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return Err(fmt_err(format!("{spec}: {msg}")));
    }
    Ok(config)
}

/// `chinchilla:hoffmann`, or `chinchilla:<path>` to a JSON object with
/// `E, A, alpha, B, beta`.
pub fn load_chinchilla(spec: &str) -> Result<ChinchillaParams, IoError> {
    let p = if spec == "hoffmann" {
        ChinchillaParams::hoffmann()
    } else {
        let path = Path::new(spec);
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|source| IoError::Json {
            path: spec.to_string(),
            source,
        })?
    };
    p.validate().map_err(|e| fmt_err(e.to_string()))?;
    Ok(p)
}

/// How a reference is requested on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum RefSpec {
    /// Per-bucket minima of the supplied runs.
    Empirical,
    Chinchilla(ChinchillaParams),
    /// A JSON-serialised [`RefLossSource`].
    File(RefLossSource),
}

pub fn parse_ref_spec(spec: &str) -> Result<RefSpec, IoError> {
    if spec == "empirical" {
        return Ok(RefSpec::Empirical);
    }
    if let Some(rest) = spec.strip_prefix("chinchilla:") {
        return Ok(RefSpec::Chinchilla(load_chinchilla(rest)?));
    }
    if spec == "chinchilla" {
        return Ok(RefSpec::Chinchilla(ChinchillaParams::hoffmann()));
    }
    let path = Path::new(spec);
    if path.is_file() {
        let text = read(path)?;
        let src: RefLossSource = serde_json::from_str(&text).map_err(|source| IoError::Json {
            path: spec.to_string(),
            source,
        })?;
        return Ok(RefSpec::File(src));
    }
    Err(fmt_err(format!(
        "unknown reference {spec:?} (expected empirical, chinchilla:<json|hoffmann> or a reference file)"
    )))
}

pub const SEARCH_CSV_HEADER: [&str; 11] = [
    "name",
    "d_model",
    "n_head",
    "gqa",
    "f_size",
    "x",
    "r",
    "predicted_loss",
    "tokens_per_second",
    "feasible",
    "pareto",
];

/// One row per candidate; `pareto` is the negated dominance flag.
pub fn write_search_csv<W: std::io::Write>(out: W, candidates: &[CandidateEvaluation]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SEARCH_CSV_HEADER)?;
    for c in candidates {
        w.write_record([
            c.arch.name.clone(),
            c.arch.d_model.to_string(),
            c.arch.n_head.to_string(),
            c.arch.gqa.to_string(),
            c.arch.f_size.to_string(),
            format!("{:.6}", c.x),
            format!("{:.6}", c.r),
            format!("{:.6}", c.predicted_loss),
            format!("{:.3}", c.modeled_throughput),
            c.feasible.to_string(),
            (!c.dominated).to_string(),
        ])?;
    }
    w.flush().map_err(|source| IoError::Io {
        path: "<writer>".into(),
        source,
    })
}

/// Reads `gqa,loss` rows (header required) for the GQA evaluator.
pub fn load_gqa_evals(path: &Path) -> Result<Vec<(u64, f64)>, IoError> {
    let text = read(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != ["gqa", "loss"] {
        return Err(fmt_err(format!("expected header gqa,loss, found {}", header.join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let gqa = row[0]
            .parse::<u64>()
            .map_err(|_| fmt_err(format!("row {}: field gqa: not a positive integer", i + 1)))?;
        let loss = row[1]
            .parse::<f64>()
            .ok()
            .filter(|l| l.is_finite() && *l > 0.0)
            .ok_or_else(|| fmt_err(format!("row {}: field loss: must be a positive number", i + 1)))?;
        out.push((gqa, loss));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{default_probe_grid, laws_equivalent};

    #[test]
    fn law_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("law.json");
        for law in [
            ConditionalLaw::reference_multiplicative(),
            ConditionalLaw::Additive { a0: 0.1, a1: 0.2, a2: 0.01, b1: 0.01, b2: 0.02 },
            ConditionalLaw::Joint { a0: 1.0, a1: 0.1, a2: 0.01 },
        ] {
            save_law(&path, &law, Some(&json!({"sse": 1.0}))).unwrap();
            let back = load_law(&path).unwrap();
            assert!(laws_equivalent(&law, &back.law, &default_probe_grid()));
            assert_eq!(back.fit_meta, Some(json!({"sse": 1.0})));
        }
    }

    #[test]
    fn law_file_rejections() {
        let mut v = law_to_json(&ConditionalLaw::reference_multiplicative(), None);
        v["form"] = json!("quadratic");
        assert!(law_from_json(&v).unwrap_err().to_string().contains("unknown law form"));

        let mut v = law_to_json(&ConditionalLaw::reference_multiplicative(), None);
        v.as_object_mut().unwrap().remove("b0");
        assert!(law_from_json(&v).unwrap_err().to_string().contains("missing coefficient b0"));

        let mut v = law_to_json(&ConditionalLaw::reference_multiplicative(), None);
        v["format_version"] = json!(2);
        assert!(matches!(law_from_json(&v), Err(IoError::UnsupportedVersion { found: 2, .. })));

        let mut v = law_to_json(&ConditionalLaw::reference_multiplicative(), None);
        v["log_base"] = json!("10");
        assert!(law_from_json(&v).is_err());
    }

    #[test]
    fn architecture_specs() {
        assert_eq!(load_architecture("Panda-1B").unwrap().n_head, 72);
        assert_eq!(load_architecture("80M/v1").unwrap().d_model, 768);
        assert!(load_architecture("nope").is_err());
        assert_eq!(load_hardware("a100-40g").unwrap().peak_flops, 312e12);
    }

    #[test]
    fn ref_specs() {
        assert_eq!(parse_ref_spec("empirical").unwrap(), RefSpec::Empirical);
        assert_eq!(
            parse_ref_spec("chinchilla:hoffmann").unwrap(),
            RefSpec::Chinchilla(ChinchillaParams::hoffmann())
        );
        assert!(parse_ref_spec("bogus").is_err());
    }
}
