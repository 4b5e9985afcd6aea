//! Chinchilla reference law and the calibrated, architecture-conditional laws.
//!
//! Every U-shaped term has the form `c1·ln(y) + c2/y`. For `c1, c2 > 0` it has
//! a single stationary point at `y = c2/c1`, which is its minimum. Logarithms
//! are natural throughout.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runs::RunRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("no interior optimum: {0}")]
    NoInteriorOptimum(String),
    #[error("no reference for (N={n:.4e}, D={d:.4e})")]
    NoReference { n: f64, d: f64 },
    #[error("{form} law expects {expected} coefficients, got {got}")]
    CoefficientCount {
        form: LawForm,
        expected: usize,
        got: usize,
    },
    #[error("invalid chinchilla parameters: {0}")]
    InvalidChinchilla(String),
    #[error("empty run set")]
    EmptyRecords,
    #[error("invalid run record: {0}")]
    InvalidRecord(String),
}

/// `L(N, D) = E + A/N^alpha + B/D^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChinchillaParams {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub beta: f64,
}

impl ChinchillaParams {
    /// Constants published with the original Chinchilla fit; useful as a
    /// synthetic reference, not a claim about any particular data set.
    pub fn hoffmann() -> Self {
        Self {
            e: 1.69,
            a: 406.4,
            alpha: 0.34,
            b: 410.7,
            beta: 0.28,
        }
    }

    pub fn validate(&self) -> Result<(), LawError> {
        let all_finite = [self.e, self.a, self.alpha, self.b, self.beta]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(LawError::InvalidChinchilla("non-finite parameter".into()));
        }
        if self.a < 0.0 || self.b < 0.0 {
            return Err(LawError::InvalidChinchilla("A and B must be >= 0".into()));
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(LawError::InvalidChinchilla("alpha and beta must be > 0".into()));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.e, self.a, self.alpha, self.b, self.beta]
    }

    pub fn from_slice(c: &[f64]) -> Self {
        Self {
            e: c[0],
            a: c[1],
            alpha: c[2],
            b: c[3],
            beta: c[4],
        }
    }

    pub fn evaluate(&self, n: f64, d: f64) -> f64 {
        self.e + self.a / n.powf(self.alpha) + self.b / d.powf(self.beta)
    }
}

pub fn chinchilla_loss(p: &ChinchillaParams, n: f64, d: f64) -> Result<f64, LawError> {
    positive("n", n)?;
    positive("d", d)?;
    Ok(p.evaluate(n, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawForm {
    Multiplicative,
    Additive,
    Joint,
}

impl LawForm {
    pub fn n_coefficients(self) -> usize {
        match self {
            LawForm::Multiplicative => 6,
            LawForm::Additive => 5,
            LawForm::Joint => 3,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "multiplicative" => Some(Self::Multiplicative),
            "additive" => Some(Self::Additive),
            "joint" => Some(Self::Joint),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LawForm::Multiplicative => "multiplicative",
            LawForm::Additive => "additive",
            LawForm::Joint => "joint",
        }
    }
}

impl fmt::Display for LawForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Calibrated law over `x = d_model/sqrt(N)` and the mlp-to-attention ratio `r`.
///
/// - multiplicative: `(a0 + a1 ln x + a2/x)·(b0 + b1 ln r + b2/r)·L_opt`
/// - additive: `(a0 + a1 ln x + a2/x) + (b1 ln r + b2/r) + L_opt`
/// - joint: `(a0 + a1 ln(xr) + a2/(xr))·L_opt`
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionalLaw {
    Multiplicative {
        a0: f64,
        a1: f64,
        a2: f64,
        b0: f64,
        b1: f64,
        b2: f64,
    },
    Additive {
        a0: f64,
        a1: f64,
        a2: f64,
        b1: f64,
        b2: f64,
    },
    Joint {
        a0: f64,
        a1: f64,
        a2: f64,
    },
}

/// `c1·ln(y) + c2/y`.
#[inline]
pub fn u_term(c1: f64, c2: f64, y: f64) -> f64 {
    c1 * y.ln() + c2 / y
}

impl ConditionalLaw {
    /// Multiplicative coefficients fitted on the 80M/145M/297M variants.
    pub fn reference_multiplicative() -> Self {
        ConditionalLaw::Multiplicative {
            a0: 2.697,
            a1: 0.0974,
            a2: 0.0078,
            b0: 0.3870,
            b1: 0.0063,
            b2: 0.0065,
        }
    }

    /// Multiplicative coefficients refitted on the 1B variants only.
    pub fn reference_multiplicative_1b() -> Self {
        ConditionalLaw::Multiplicative {
            a0: 2.319,
            a1: 0.238,
            a2: 0.0176,
            b0: 0.5104,
            b1: 0.0051,
            b2: 0.0062,
        }
    }

    pub fn form(&self) -> LawForm {
        match self {
            ConditionalLaw::Multiplicative { .. } => LawForm::Multiplicative,
            ConditionalLaw::Additive { .. } => LawForm::Additive,
            ConditionalLaw::Joint { .. } => LawForm::Joint,
        }
    }

    /// Coefficients in canonical order `a0 a1 a2 [b0] [b1 b2]`.
    pub fn coefficients(&self) -> Vec<f64> {
        match *self {
            ConditionalLaw::Multiplicative { a0, a1, a2, b0, b1, b2 } => vec![a0, a1, a2, b0, b1, b2],
            ConditionalLaw::Additive { a0, a1, a2, b1, b2 } => vec![a0, a1, a2, b1, b2],
            ConditionalLaw::Joint { a0, a1, a2 } => vec![a0, a1, a2],
        }
    }

    pub fn from_coefficients(form: LawForm, c: &[f64]) -> Result<Self, LawError> {
        if c.len() != form.n_coefficients() {
            return Err(LawError::CoefficientCount {
                form,
                expected: form.n_coefficients(),
                got: c.len(),
            });
        }
        Ok(match form {
            LawForm::Multiplicative => ConditionalLaw::Multiplicative {
                a0: c[0],
                a1: c[1],
                a2: c[2],
                b0: c[3],
                b1: c[4],
                b2: c[5],
            },
            LawForm::Additive => ConditionalLaw::Additive {
                a0: c[0],
                a1: c[1],
                a2: c[2],
                b1: c[3],
                b2: c[4],
            },
            LawForm::Joint => ConditionalLaw::Joint {
                a0: c[0],
                a1: c[1],
                a2: c[2],
            },
        })
    }

    /// Unchecked evaluation from a raw coefficient slice; used inside fits.
    #[inline]
    pub fn eval_raw(form: LawForm, c: &[f64], x: f64, r: f64, l_opt: f64) -> f64 {
        match form {
            LawForm::Multiplicative => {
                (c[0] + u_term(c[1], c[2], x)) * (c[3] + u_term(c[4], c[5], r)) * l_opt
            }
            LawForm::Additive => (c[0] + u_term(c[1], c[2], x)) + u_term(c[3], c[4], r) + l_opt,
            LawForm::Joint => (c[0] + u_term(c[1], c[2], x * r)) * l_opt,
        }
    }

    pub fn evaluate(&self, x: f64, r: f64, l_opt: f64) -> f64 {
        Self::eval_raw(self.form(), &self.coefficients(), x, r, l_opt)
    }

    /// Hidden-size factor `a0 + a1 ln x + a2/x` (joint form: over `x·r`).
    pub fn x_factor(&self, x: f64) -> f64 {
        match *self {
            ConditionalLaw::Multiplicative { a0, a1, a2, .. }
            | ConditionalLaw::Additive { a0, a1, a2, .. }
            | ConditionalLaw::Joint { a0, a1, a2 } => a0 + u_term(a1, a2, x),
        }
    }

    /// Ratio factor: `b0 + b1 ln r + b2/r` (multiplicative), `b1 ln r + b2/r`
    /// (additive), `None` for joint.
    pub fn r_factor(&self, r: f64) -> Option<f64> {
        match *self {
            ConditionalLaw::Multiplicative { b0, b1, b2, .. } => Some(b0 + u_term(b1, b2, r)),
            ConditionalLaw::Additive { b1, b2, .. } => Some(u_term(b1, b2, r)),
            ConditionalLaw::Joint { .. } => None,
        }
    }

    /// Multiplies the hidden-size factor by `c` and the ratio factor by `1/c`.
    /// Predictions are unchanged. Other forms are returned as-is.
    pub fn regauged(&self, c: f64) -> Self {
        match *self {
            ConditionalLaw::Multiplicative { a0, a1, a2, b0, b1, b2 } => ConditionalLaw::Multiplicative {
                a0: a0 * c,
                a1: a1 * c,
                a2: a2 * c,
                b0: b0 / c,
                b1: b1 / c,
                b2: b2 / c,
            },
            other => other,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), LawError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(LawError::NonPositive { name, value })
    }
}

pub fn conditional_loss(law: &ConditionalLaw, x: f64, r: f64, l_opt: f64) -> Result<f64, LawError> {
    positive("x", x)?;
    positive("r", r)?;
    positive("l_opt", l_opt)?;
    Ok(law.evaluate(x, r, l_opt))
}

/// Stationary point of a calibrated law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArchOptimum {
    Separable { x: f64, r: f64 },
    /// Joint form: only the product `x·r` is determined.
    Product { xr: f64 },
}

impl ArchOptimum {
    pub fn separable(&self) -> Option<(f64, f64)> {
        match *self {
            ArchOptimum::Separable { x, r } => Some((x, r)),
            ArchOptimum::Product { .. } => None,
        }
    }
}

fn u_minimum(name: &str, c1: f64, c2: f64) -> Result<f64, LawError> {
    if c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite() {
        Ok(c2 / c1)
    } else {
        Err(LawError::NoInteriorOptimum(format!(
            "{name} term needs positive log and inverse coefficients (got {c1}, {c2})"
        )))
    }
}

pub fn optimal_xr(law: &ConditionalLaw) -> Result<ArchOptimum, LawError> {
    match *law {
        ConditionalLaw::Multiplicative { a1, a2, b1, b2, .. } | ConditionalLaw::Additive { a1, a2, b1, b2, .. } => {
            Ok(ArchOptimum::Separable {
                x: u_minimum("hidden-size", a1, a2)?,
                r: u_minimum("ratio", b1, b2)?,
            })
        }
        ConditionalLaw::Joint { a1, a2, .. } => Ok(ArchOptimum::Product {
            xr: u_minimum("joint", a1, a2)?,
        }),
    }
}

/// Probe points used by [`laws_equivalent`] when the caller has none.
pub fn default_probe_grid() -> Vec<(f64, f64)> {
    let xs = [0.03, 0.05, 0.08, 0.12, 0.2, 0.35];
    let rs = [0.3, 0.7, 1.0, 2.0, 4.0, 8.0];
    xs.iter()
        .flat_map(|&x| rs.iter().map(move |&r| (x, r)))
        .collect()
}

/// True when both laws have the same form and agree to relative 1e-9 at every
/// probe point (evaluated with `L_opt = 1` and `L_opt = 3`).
pub fn laws_equivalent(a: &ConditionalLaw, b: &ConditionalLaw, probe: &[(f64, f64)]) -> bool {
    if a.form() != b.form() {
        return false;
    }
    probe.iter().all(|&(x, r)| {
        [1.0, 3.0].iter().all(|&l| {
            let va = a.evaluate(x, r, l);
            let vb = b.evaluate(x, r, l);
            va.is_finite() && vb.is_finite() && (va - vb).abs() <= 1e-9 * va.abs().max(vb.abs()).max(1e-300)
        })
    })
}

/// Parses size labels like `80M`, `1B`, `1.5B`, `500K`.
pub fn parse_size_label(label: &str) -> Option<f64> {
    let s = label.trim();
    let (num, scale) = match s.chars().last()? {
        'K' | 'k' => (&s[..s.len() - 1], 1e3),
        'M' | 'm' => (&s[..s.len() - 1], 1e6),
        'B' | 'b' | 'G' | 'g' => (&s[..s.len() - 1], 1e9),
        'T' | 't' => (&s[..s.len() - 1], 1e12),
        _ => (s, 1.0),
    };
    let v: f64 = num.parse().ok()?;
    (v > 0.0 && v.is_finite()).then_some(v * scale)
}

/// One `(N bucket, D)` cell of an empirical reference table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEntry {
    pub label: Option<String>,
    pub n_ref: f64,
    pub d_tokens: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTable {
    pub entries: Vec<EmpiricalEntry>,
    /// Relative width of an N bucket.
    pub n_tolerance: f64,
}

impl EmpiricalTable {
    pub fn new(entries: Vec<EmpiricalEntry>) -> Self {
        Self {
            entries,
            n_tolerance: crate::arch::DEFAULT_N_TOLERANCE,
        }
    }

    fn same_d(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
    }

    /// Exact bucket hit: by label when one is given and present, else the
    /// nearest bucket within the relative N tolerance. D must match.
    pub fn lookup(&self, n: f64, d: f64, label: Option<&str>) -> Option<f64> {
        if let Some(label) = label {
            if let Some(e) = self
                .entries
                .iter()
                .find(|e| e.label.as_deref() == Some(label) && Self::same_d(e.d_tokens, d))
            {
                return Some(e.loss);
            }
        }
        self.entries
            .iter()
            .filter(|e| Self::same_d(e.d_tokens, d))
            .filter(|e| (n - e.n_ref).abs() <= self.n_tolerance * e.n_ref)
            .min_by(|a, b| {
                (n - a.n_ref)
                    .abs()
                    .partial_cmp(&(n - b.n_ref).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|e| e.loss)
    }
}

/// Source of the best achievable loss `L_opt(N, D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefLossSource {
    Empirical(EmpiricalTable),
    Chinchilla(ChinchillaParams),
}

impl RefLossSource {
    pub fn loss_for(&self, n: f64, d: f64, label: Option<&str>) -> Result<f64, LawError> {
        positive("n", n)?;
        positive("d", d)?;
        match self {
            RefLossSource::Empirical(t) => t.lookup(n, d, label).ok_or(LawError::NoReference { n, d }),
            RefLossSource::Chinchilla(p) => chinchilla_loss(p, n, d),
        }
    }

    pub fn for_record(&self, rec: &RunRecord) -> Result<f64, LawError> {
        self.loss_for(
            rec.n_nonembed() as f64,
            rec.d_tokens as f64,
            rec.size_label.as_deref(),
        )
    }
}

pub fn ref_loss(src: &RefLossSource, n: f64, d: f64) -> Result<f64, LawError> {
    src.loss_for(n, d, None)
}

/// A group of records sharing one nominal parameter count.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeBucket {
    pub label: Option<String>,
    pub n_ref: f64,
    pub members: Vec<usize>,
}

/// Groups records by size label when present, else greedily by relative
/// tolerance on the non-embedding parameter count (ascending N).
pub fn bucket_records(records: &[RunRecord], tolerance: f64) -> Vec<SizeBucket> {
    let mut labeled: Vec<SizeBucket> = Vec::new();
    let mut unlabeled: Vec<usize> = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        match &rec.size_label {
            Some(label) => match labeled.iter_mut().find(|b| b.label.as_deref() == Some(label)) {
                Some(b) => b.members.push(i),
                None => labeled.push(SizeBucket {
                    label: Some(label.clone()),
                    n_ref: 0.0,
                    members: vec![i],
                }),
            },
            None => unlabeled.push(i),
        }
    }
    let mean_n = |members: &[usize]| {
        members.iter().map(|&i| records[i].n_nonembed() as f64).sum::<f64>() / members.len() as f64
    };
    for b in &mut labeled {
        b.n_ref = b
            .label
            .as_deref()
            .and_then(parse_size_label)
            .unwrap_or_else(|| mean_n(&b.members));
    }

    unlabeled.sort_by_key(|&i| (records[i].n_nonembed(), i));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut anchor = 0.0;
    for i in unlabeled {
        let n = records[i].n_nonembed() as f64;
        match clusters.last_mut() {
            Some(c) if n <= anchor * (1.0 + tolerance) => c.push(i),
            _ => {
                anchor = n;
                clusters.push(vec![i]);
            }
        }
    }
    labeled.extend(clusters.into_iter().map(|members| SizeBucket {
        label: None,
        n_ref: mean_n(&members),
        members,
    }));
    labeled
}

/// Empirical `L_opt`: the minimum observed loss in each `(N bucket, D)` group.
pub fn empirical_lopt(records: &[RunRecord]) -> Result<RefLossSource, LawError> {
    if records.is_empty() {
        return Err(LawError::EmptyRecords);
    }
    for rec in records {
        if !(rec.loss.is_finite() && rec.loss > 0.0) {
            return Err(LawError::InvalidRecord(format!("loss must be positive, got {}", rec.loss)));
        }
    }
    let mut entries: Vec<EmpiricalEntry> = Vec::new();
    for bucket in bucket_records(records, crate::arch::DEFAULT_N_TOLERANCE) {
        let mut cells: Vec<(f64, f64)> = Vec::new();
        for &i in &bucket.members {
            let d = records[i].d_tokens as f64;
            let loss = records[i].loss;
            match cells.iter_mut().find(|(cd, _)| EmpiricalTable::same_d(*cd, d)) {
                Some(cell) => cell.1 = cell.1.min(loss),
                None => cells.push((d, loss)),
            }
        }
        cells.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        entries.extend(cells.into_iter().map(|(d_tokens, loss)| EmpiricalEntry {
            label: bucket.label.clone(),
            n_ref: bucket.n_ref,
            d_tokens,
            loss,
        }));
    }
    Ok(RefLossSource::Empirical(EmpiricalTable::new(entries)))
}
