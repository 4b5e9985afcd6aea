//! Decoder-only transformer shapes, non-embedding parameter accounting, and
//! construction of architecture variants at a fixed parameter budget.
//!
//! Attention is counted with all four projections: `2·d_model·d_q` covers the
//! query and output matrices, `2·d_model·d_kv` the key and value matrices.
//! The gated MLP contributes `3·d_model·f_size` (up, gate, down). Embeddings
//! are never counted.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default multiple for MLP intermediate sizes.
pub const DEFAULT_F_MULTIPLE: u64 = 64;

/// Default relative tolerance on the parameter budget when grouping variants.
pub const DEFAULT_N_TOLERANCE: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchError {
    #[error("invalid architecture {name:?}: {}", join_violations(.violations))]
    Invalid {
        name: String,
        violations: Vec<Violation>,
    },
    #[error("budget too small: attention alone needs {attention_per_layer} parameters per layer but the budget allows {budget_per_layer:.0}")]
    BudgetTooSmall {
        attention_per_layer: u64,
        budget_per_layer: f64,
    },
    #[error("infeasible head count: {raw:.3} heads rounds below gqa={gqa}")]
    InfeasibleHeads { raw: f64, gqa: u64 },
    #[error("mlp-to-attention ratio must be positive and finite, got {0}")]
    InvalidRatio(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One broken [`ArchitectureConfig`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rule)
    }
}

/// A decoder-only transformer shape.
///
/// `gqa` is the number of query heads sharing one key/value head, so the
/// model has `n_head / gqa` key/value heads.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub name: String,
    pub n_layers: u64,
    pub d_model: u64,
    pub n_head: u64,
    pub d_head: u64,
    pub gqa: u64,
    pub f_size: u64,
}

impl ArchitectureConfig {
    pub fn new(
        name: impl Into<String>,
        n_layers: u64,
        d_model: u64,
        n_head: u64,
        d_head: u64,
        gqa: u64,
        f_size: u64,
    ) -> Self {
        Self {
            name: name.into(),
            n_layers,
            d_model,
            n_head,
            d_head,
            gqa,
            f_size,
        }
    }

    pub fn n_kv_heads(&self) -> u64 {
        self.n_head / self.gqa
    }

    /// Total query width `n_head · d_head`.
    pub fn d_q(&self) -> u64 {
        self.n_head * self.d_head
    }

    /// Total key (or value) width `(n_head / gqa) · d_head`.
    pub fn d_kv(&self) -> u64 {
        self.n_kv_heads() * self.d_head
    }

    /// Parameter breakdown without validation. Callers must pass a shape with
    /// a nonzero `gqa` that divides `n_head`; use [`count_params`] otherwise.
    pub fn params(&self) -> ParamBreakdown {
        let attn = 2 * self.d_model * self.d_q() + 2 * self.d_model * self.d_kv();
        let mlp = 3 * self.d_model * self.f_size;
        ParamBreakdown {
            attn_per_layer: attn,
            mlp_per_layer: mlp,
            per_layer_total: attn + mlp,
            n_nonembed: self.n_layers * (attn + mlp),
        }
    }

    /// Shape tuple used for deterministic ordering (the name is ignored).
    pub fn shape_key(&self) -> (u64, u64, u64, u64, u64, u64) {
        (
            self.n_layers,
            self.d_model,
            self.n_head,
            self.d_head,
            self.gqa,
            self.f_size,
        )
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape_key() == other.shape_key()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBreakdown {
    pub attn_per_layer: u64,
    pub mlp_per_layer: u64,
    pub per_layer_total: u64,
    pub n_nonembed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    /// `d_model / sqrt(N_nonembed)`.
    pub x: f64,
    /// MLP-to-attention parameter ratio.
    pub r: f64,
    pub d_q: u64,
    pub d_kv: u64,
    pub n_kv_heads: u64,
}

/// Rounding multiples applied to constructed shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapping {
    pub d_multiple: u64,
    pub f_multiple: u64,
}

impl Snapping {
    /// Hidden size snapped to a multiple of the head dimension, MLP size to 64.
    pub fn for_head_dim(d_head: u64) -> Self {
        Self {
            d_multiple: d_head,
            f_multiple: DEFAULT_F_MULTIPLE,
        }
    }

    /// Hidden size snapped to a multiple of 512, as used by the LLaMA-3 family
    /// hidden sizes (2048, 2560, 3072, 4096).
    pub fn hardware_aligned() -> Self {
        Self {
            d_multiple: 512,
            f_multiple: DEFAULT_F_MULTIPLE,
        }
    }

    pub fn snap_d(&self, raw: f64) -> u64 {
        snap_to_multiple(raw, self.d_multiple)
    }

    pub fn snap_f(&self, raw: f64) -> u64 {
        snap_to_multiple(raw, self.f_multiple)
    }
}

impl Default for Snapping {
    fn default() -> Self {
        Self::for_head_dim(64)
    }
}

/// Nearest multiple of `m` (ties away from zero). Negative input snaps to 0.
pub fn snap_to_multiple(raw: f64, m: u64) -> u64 {
    if !raw.is_finite() || raw <= 0.0 || m == 0 {
        return 0;
    }
    let m_f = m as f64;
    ((raw / m_f).round() as u64) * m
}

/// Per-head dimension convention: 64 up to 1.5e9 non-embedding parameters,
/// 128 above.
pub fn default_head_dim(n_target: u64) -> u64 {
    if n_target as f64 <= 1.5e9 {
        64
    } else {
        128
    }
}

pub fn validate(config: &ArchitectureConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let positive = [
        ("n_layers", config.n_layers),
        ("d_model", config.d_model),
        ("n_head", config.n_head),
        ("d_head", config.d_head),
        ("gqa", config.gqa),
        ("f_size", config.f_size),
    ];
    for (field, value) in positive {
        if value == 0 {
            out.push(Violation {
                field,
                rule: format!("{field} must be positive"),
            });
        }
    }
    if config.gqa > 0 && config.n_head > 0 && !config.n_head.is_multiple_of(config.gqa) {
        out.push(Violation {
            field: "gqa",
            rule: format!(
                "gqa must divide n_head (n_head={}, gqa={})",
                config.n_head, config.gqa
            ),
        });
    }
    out
}

fn ensure_valid(config: &ArchitectureConfig) -> Result<(), ArchError> {
    let violations = validate(config);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ArchError::Invalid {
            name: config.name.clone(),
            violations,
        })
    }
}

pub fn count_params(config: &ArchitectureConfig) -> Result<ParamBreakdown, ArchError> {
    ensure_valid(config)?;
    Ok(config.params())
}

pub fn derived_metrics(config: &ArchitectureConfig) -> Result<DerivedMetrics, ArchError> {
    let p = count_params(config)?;
    Ok(DerivedMetrics {
        x: config.d_model as f64 / (p.n_nonembed as f64).sqrt(),
        r: p.mlp_per_layer as f64 / p.attn_per_layer as f64,
        d_q: config.d_q(),
        d_kv: config.d_kv(),
        n_kv_heads: config.n_kv_heads(),
    })
}

/// Attention parameters per layer for a head layout; `n_head` must be a
/// multiple of `gqa`.
fn attention_params(d_model: u64, n_head: u64, d_head: u64, gqa: u64) -> u64 {
    2 * d_model * d_head * (n_head + n_head / gqa)
}

/// MLP intermediate size that fills the remaining per-layer budget once the
/// attention block is fixed, snapped to `f_multiple`.
pub fn solve_intermediate_size(
    n_target: u64,
    n_layers: u64,
    d_model: u64,
    n_head: u64,
    d_head: u64,
    gqa: u64,
    f_multiple: u64,
) -> Result<u64, ArchError> {
    if n_layers == 0 || d_model == 0 || d_head == 0 || gqa == 0 || !n_head.is_multiple_of(gqa) {
        return Err(ArchError::InvalidGrid(format!(
            "cannot solve f_size for layers={n_layers} d_model={d_model} n_head={n_head} d_head={d_head} gqa={gqa}"
        )));
    }
    let attn = attention_params(d_model, n_head, d_head, gqa);
    let budget = n_target as f64 / n_layers as f64;
    if budget <= attn as f64 {
        return Err(ArchError::BudgetTooSmall {
            attention_per_layer: attn,
            budget_per_layer: budget,
        });
    }
    let raw = (budget - attn as f64) / (3 * d_model) as f64;
    let f = snap_to_multiple(raw, f_multiple.max(1));
    if f == 0 {
        return Err(ArchError::BudgetTooSmall {
            attention_per_layer: attn,
            budget_per_layer: budget,
        });
    }
    Ok(f)
}

fn heads_for_ratio(r_target: f64, d_head: u64, gqa: u64, f_size: f64) -> Result<u64, ArchError> {
    if !(r_target.is_finite() && r_target > 0.0) {
        return Err(ArchError::InvalidRatio(r_target));
    }
    if gqa == 0 || d_head == 0 {
        return Err(ArchError::InvalidGrid("gqa and d_head must be positive".into()));
    }
    let g = gqa as f64;
    let raw = 3.0 * f_size / (2.0 * d_head as f64 * r_target * (1.0 + 1.0 / g));
    let n_head = snap_to_multiple(raw, gqa);
    if n_head < gqa {
        return Err(ArchError::InfeasibleHeads { raw, gqa });
    }
    Ok(n_head)
}

/// Head count (a multiple of `gqa`) giving mlp-to-attention ratio closest to
/// `r_target` for a fixed MLP size.
pub fn solve_n_head(r_target: f64, d_head: u64, gqa: u64, f_size: u64) -> Result<u64, ArchError> {
    heads_for_ratio(r_target, d_head, gqa, f_size as f64)
}

/// Builds the shape with hidden size `d_model` whose ratio is near `r_target`
/// and whose parameter count is near `n_target`.
///
/// The MLP width is first estimated from the attention share of the budget,
/// `N/(n_layers·(1+r))`; heads come from [`solve_n_head`] on that estimate and
/// the MLP is then re-solved against the budget with the snapped heads.
#[allow(clippy::too_many_arguments)]
pub fn solve_at_ratio(
    n_target: u64,
    n_layers: u64,
    d_model: u64,
    d_head: u64,
    gqa: u64,
    r_target: f64,
    f_multiple: u64,
) -> Result<ArchitectureConfig, ArchError> {
    if !(r_target.is_finite() && r_target > 0.0) {
        return Err(ArchError::InvalidRatio(r_target));
    }
    if n_layers == 0 || d_model == 0 {
        return Err(ArchError::InvalidGrid("n_layers and d_model must be positive".into()));
    }
    let per_layer = n_target as f64 / n_layers as f64;
    let attn_target = per_layer / (1.0 + r_target);
    let f_est = r_target * attn_target / (3.0 * d_model as f64);
    let n_head = heads_for_ratio(r_target, d_head, gqa, f_est)?;
    let f_size = solve_intermediate_size(n_target, n_layers, d_model, n_head, d_head, gqa, f_multiple)?;
    let config = ArchitectureConfig::new(
        variant_name(d_model, n_head, gqa, f_size),
        n_layers,
        d_model,
        n_head,
        d_head,
        gqa,
        f_size,
    );
    ensure_valid(&config)?;
    Ok(config)
}

pub(crate) fn variant_name(d_model: u64, n_head: u64, gqa: u64, f_size: u64) -> String {
    format!("d{d_model}-h{n_head}-g{gqa}-f{f_size}")
}

/// All positive divisors of `n_head`, ascending.
pub fn feasible_gqa(n_head: u64) -> Vec<u64> {
    if n_head == 0 {
        return Vec::new();
    }
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut i = 1;
    while i * i <= n_head {
        if n_head.is_multiple_of(i) {
            low.push(i);
            if i != n_head / i {
                high.push(n_head / i);
            }
        }
        i += 1;
    }
    low.extend(high.into_iter().rev());
    low
}

/// Second axis of a variant grid: target ratios, or explicit MLP sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantAxis {
    Ratios(Vec<f64>),
    IntermediateSizes(Vec<u64>),
}

impl VariantAxis {
    fn is_empty(&self) -> bool {
        match self {
            VariantAxis::Ratios(v) => v.is_empty(),
            VariantAxis::IntermediateSizes(v) => v.is_empty(),
        }
    }
}

/// Fixed-budget variant family: hold `n_target`, `n_layers`, `d_head` and
/// sweep hidden size against ratio (or MLP size) and GQA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchGridSpec {
    pub n_target: u64,
    pub n_tolerance: f64,
    pub n_layers: u64,
    pub d_head: u64,
    pub gqa_values: Vec<u64>,
    pub d_model_values: Vec<u64>,
    pub axis: VariantAxis,
    pub snapping: Snapping,
}

impl ArchGridSpec {
    pub fn validate(&self) -> Result<(), ArchError> {
        if !(self.n_tolerance > 0.0 && self.n_tolerance < 0.5) {
            return Err(ArchError::InvalidGrid(format!(
                "n_tolerance must lie in (0, 0.5), got {}",
                self.n_tolerance
            )));
        }
        if self.gqa_values.is_empty() || self.d_model_values.is_empty() || self.axis.is_empty() {
            return Err(ArchError::InvalidGrid("candidate lists must be non-empty".into()));
        }
        if self.n_layers == 0 || self.d_head == 0 || self.n_target == 0 {
            return Err(ArchError::InvalidGrid(
                "n_target, n_layers and d_head must be positive".into(),
            ));
        }
        if self.gqa_values.contains(&0) {
            return Err(ArchError::InvalidGrid("gqa values must be positive".into()));
        }
        if self.snapping.d_multiple == 0 || self.snapping.f_multiple == 0 {
            return Err(ArchError::InvalidGrid("snapping multiples must be positive".into()));
        }
        Ok(())
    }

    pub fn within_budget(&self, n_nonembed: u64) -> bool {
        let target = self.n_target as f64;
        (n_nonembed as f64 - target).abs() <= self.n_tolerance * target
    }
}

fn heads_for_mlp(spec: &ArchGridSpec, d_model: u64, gqa: u64, f_size: u64) -> Option<u64> {
    let per_layer = spec.n_target as f64 / spec.n_layers as f64;
    let attn = per_layer - (3 * d_model * f_size) as f64;
    if attn <= 0.0 {
        return None;
    }
    let raw = attn / (2.0 * d_model as f64 * spec.d_head as f64 * (1.0 + 1.0 / gqa as f64));
    let n_head = snap_to_multiple(raw, gqa);
    (n_head >= gqa).then_some(n_head)
}

/// Every valid shape in the grid whose parameter count lies within tolerance
/// of the target, deduplicated and sorted by hidden size, then ratio.
pub fn enumerate_variants(spec: &ArchGridSpec) -> Result<Vec<ArchitectureConfig>, ArchError> {
    spec.validate()?;
    let mut out: Vec<(ArchitectureConfig, f64)> = Vec::new();
    let mut push = |config: ArchitectureConfig| {
        if !validate(&config).is_empty() {
            return;
        }
        let p = config.params();
        if !spec.within_budget(p.n_nonembed) {
            return;
        }
        if out.iter().any(|(c, _)| c.same_shape(&config)) {
            return;
        }
        let r = p.mlp_per_layer as f64 / p.attn_per_layer as f64;
        out.push((config, r));
    };

    for &d_raw in &spec.d_model_values {
        let d_model = spec.snapping.snap_d(d_raw as f64);
        if d_model == 0 {
            continue;
        }
        for &gqa in &spec.gqa_values {
            match &spec.axis {
                VariantAxis::Ratios(ratios) => {
                    for &r in ratios {
                        if let Ok(c) = solve_at_ratio(
                            spec.n_target,
                            spec.n_layers,
                            d_model,
                            spec.d_head,
                            gqa,
                            r,
                            spec.snapping.f_multiple,
                        ) {
                            push(c);
                        }
                    }
                }
                VariantAxis::IntermediateSizes(sizes) => {
                    for &f_raw in sizes {
                        let f_size = spec.snapping.snap_f(f_raw as f64);
                        if f_size == 0 {
                            continue;
                        }
                        if let Some(n_head) = heads_for_mlp(spec, d_model, gqa, f_size) {
                            push(ArchitectureConfig::new(
                                variant_name(d_model, n_head, gqa, f_size),
                                spec.n_layers,
                                d_model,
                                n_head,
                                spec.d_head,
                                gqa,
                                f_size,
                            ));
                        }
                    }
                }
            }
        }
    }

    out.sort_by(|(a, ra), (b, rb)| {
        a.d_model
            .cmp(&b.d_model)
            .then(ra.partial_cmp(rb).unwrap_or(Ordering::Equal))
            .then(a.shape_key().cmp(&b.shape_key()))
    });
    Ok(out.into_iter().map(|(c, _)| c).collect())
}
