//! The `archscale` command line. Exit codes: 0 success, 2 invalid input,
//! 3 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::arch::{derived_metrics, enumerate_variants, ArchGridSpec, Snapping, VariantAxis, DEFAULT_N_TOLERANCE};
use crate::cost::{decode_flops_per_token, estimate_throughput, kv_cache_bytes, CostError, HardwareProfile, Workload};
use crate::fit::{evaluate_law, fit_conditional_law, FitError, FitOptions, Termination};
use crate::io::{self, parse_ref_spec, IoError, RefSpec};
use crate::laws::{empirical_lopt, optimal_xr, ArchOptimum, ConditionalLaw, LawError, LawForm, RefLossSource};
use crate::runs::{load_runs, RunFormat, RunRecord, RunsError};
use crate::search::{
    closed_form_architecture, constrained_search, gqa_local_search, predict_loss, GqaSearchSettings, SearchError,
    SearchProblem, DEFAULT_BASELINE_GQA, DEFAULT_GQA_EPSILON,
};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "archscale", version, about = "Architecture-conditional scaling laws and inference-efficient shape search")]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    pub output: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect or enumerate shapes.
    #[command(subcommand)]
    Arch(ArchCommand),
    /// Fit a conditional law to training runs.
    Fit(FitArgs),
    /// Predict the loss of one shape.
    Predict(PredictArgs),
    /// Realise the law's loss-optimal shape at a parameter budget.
    Optimum(OptimumArgs),
    /// Maximise modeled throughput under a loss ceiling.
    Optimize(OptimizeArgs),
    /// GQA local search over measured losses with early stopping.
    GqaSearch(GqaSearchArgs),
    /// Roofline inference cost of one shape.
    Throughput(ThroughputArgs),
    /// Score a law against runs (MSE and Spearman).
    Eval(EvalArgs),
}

#[derive(Debug, Subcommand)]
pub enum ArchCommand {
    Info(InfoArgs),
    Enumerate(EnumerateArgs),
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    /// JSON file, reference model name (`Panda-1B`) or corpus id (`80M/v1`).
    #[arg(long)]
    pub config: String,
    /// Context length for the KV-cache and decode-FLOP columns.
    #[arg(long, default_value_t = 5120)]
    pub context: u64,
    #[arg(long, default_value_t = 1)]
    pub batch: u64,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub n_target: f64,
    #[arg(long)]
    pub layers: u64,
    #[arg(long)]
    pub d_head: u64,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub gqa: Vec<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub d_values: Vec<u64>,
    #[arg(long, value_delimiter = ',', conflicts_with = "f_values")]
    pub r_values: Vec<f64>,
    /// Explicit MLP sizes instead of ratios.
    #[arg(long, value_delimiter = ',')]
    pub f_values: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_N_TOLERANCE)]
    pub tolerance: f64,
    /// Hidden sizes snap to this multiple (default: d_head).
    #[arg(long)]
    pub d_multiple: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_form, default_value = "multiplicative")]
    pub form: LawForm,
    /// `empirical`, `chinchilla:<json|hoffmann>` or a reference JSON file.
    #[arg(long = "ref", default_value = "empirical")]
    pub reference: String,
    #[arg(long, default_value_t = 0.5)]
    pub r_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub r_max: f64,
    /// Restrict the fit data to these size labels.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<String>,
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub law: PathBuf,
    #[arg(long)]
    pub config: String,
    #[arg(long = "ref", default_value = "chinchilla:hoffmann")]
    pub reference: String,
    #[arg(long)]
    pub d_tokens: f64,
}

#[derive(Debug, Args)]
pub struct OptimumArgs {
    #[arg(long)]
    pub law: PathBuf,
    #[arg(long)]
    pub n_target: f64,
    #[arg(long)]
    pub layers: u64,
    #[arg(long)]
    pub d_head: u64,
    #[arg(long, default_value_t = DEFAULT_BASELINE_GQA)]
    pub gqa: u64,
    #[arg(long, default_value_t = 512)]
    pub d_multiple: u64,
}

#[derive(Debug, Args)]
pub struct WorkloadArgs {
    #[arg(long, default_value_t = 1)]
    pub batch: u64,
    #[arg(long, default_value_t = 4096)]
    pub input_tokens: u64,
    #[arg(long, default_value_t = 1024)]
    pub output_tokens: u64,
}

impl WorkloadArgs {
    fn workload(&self) -> Workload {
        Workload::new(self.batch, self.input_tokens, self.output_tokens)
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub law: PathBuf,
    #[arg(long)]
    pub n_target: f64,
    #[arg(long)]
    pub d_tokens: f64,
    /// A loss value or `optimal`.
    #[arg(long)]
    pub loss_budget: String,
    #[arg(long, default_value = "a100-40g")]
    pub hardware: String,
    #[command(flatten)]
    pub workload: WorkloadArgs,
    /// JSON grid file or `layers=16;d_head=64;gqa=4;d=2048,2560;r=1,2,4[;tol=0.1][;d_multiple=64]`.
    #[arg(long)]
    pub grid: String,
    #[arg(long = "ref", default_value = "chinchilla:hoffmann")]
    pub reference: String,
    /// Also write the candidate CSV here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GqaSearchArgs {
    #[arg(long)]
    pub config: String,
    /// CSV with header `gqa,loss`.
    #[arg(long)]
    pub evals: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GQA_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_BASELINE_GQA)]
    pub baseline_gqa: u64,
    #[arg(long, default_value = "a100-40g")]
    pub hardware: String,
    #[command(flatten)]
    pub workload: WorkloadArgs,
}

#[derive(Debug, Args)]
pub struct ThroughputArgs {
    #[arg(long)]
    pub config: String,
    #[arg(long, default_value = "a100-40g")]
    pub hardware: String,
    #[command(flatten)]
    pub workload: WorkloadArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub law: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "ref", default_value = "empirical")]
    pub reference: String,
}

fn parse_form(s: &str) -> Result<LawForm, String> {
    LawForm::parse(s).ok_or_else(|| format!("unknown form {s:?} (multiplicative, additive, joint)"))
}

/// An error with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<RunsError> for CliError {
    fn from(e: RunsError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<LawError> for CliError {
    fn from(e: LawError) -> Self {
        match e {
            LawError::NoInteriorOptimum(_) => Self::numerical(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<CostError> for CliError {
    fn from(e: CostError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::NonFiniteInit | FitError::ZeroVariance => Self::numerical(e.to_string()),
            FitError::Law(l) => l.into(),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Law(l) => l.into(),
            SearchError::Fit(f) => f.into(),
            SearchError::NoFeasible { .. } | SearchError::NoSeparableOptimum { .. } => Self::numerical(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::validation(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

/// Key/value report (one record) or a row table.
enum Rendered {
    Record(Vec<(String, Value)>),
    Rows { header: Vec<String>, rows: Vec<Vec<Value>> },
    Both(Vec<(String, Value)>, Vec<String>, Vec<Vec<Value>>),
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => format!("{f:.6}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn write_rows(out: &mut dyn Write, header: &[String], rows: &[Vec<Value>], format: OutputFormat) -> CliResult {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(header).map_err(|e| CliError::validation(e.to_string()))?;
            for row in rows {
                w.write_record(row.iter().map(cell))
                    .map_err(|e| CliError::validation(e.to_string()))?;
            }
            w.flush()?;
        }
        OutputFormat::Table => {
            let cells: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(cell).collect()).collect();
            let widths: Vec<usize> = header
                .iter()
                .enumerate()
                .map(|(i, h)| cells.iter().map(|r| r[i].len()).chain([h.len()]).max().unwrap_or(0))
                .collect();
            let line = |items: &[String]| {
                items
                    .iter()
                    .zip(&widths)
                    .map(|(s, w)| format!("{s:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "{}", line(header))?;
            for r in &cells {
                writeln!(out, "{}", line(r))?;
            }
        }
        OutputFormat::Json => {
            let arr: Vec<Value> = rows
                .iter()
                .map(|r| Value::Object(header.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&arr).expect("serialisable"))?;
        }
    }
    Ok(())
}

fn write_record(out: &mut dyn Write, fields: &[(String, Value)], format: OutputFormat) -> CliResult {
    match format {
        OutputFormat::Json => {
            let m: Map<String, Value> = fields.iter().cloned().collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&Value::Object(m)).expect("serialisable"))?;
        }
        OutputFormat::Csv => {
            let header: Vec<String> = fields.iter().map(|(k, _)| k.clone()).collect();
            let row: Vec<Value> = fields.iter().map(|(_, v)| v.clone()).collect();
            write_rows(out, &header, &[row], format)?;
        }
        OutputFormat::Table => {
            let w = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in fields {
                writeln!(out, "{k:<w$}  {}", cell(v))?;
            }
        }
    }
    Ok(())
}

fn render(out: &mut dyn Write, r: Rendered, format: OutputFormat) -> CliResult {
    match r {
        Rendered::Record(f) => write_record(out, &f, format),
        Rendered::Rows { header, rows } => write_rows(out, &header, &rows, format),
        Rendered::Both(fields, header, rows) => match format {
            OutputFormat::Json => {
                let mut m: Map<String, Value> = fields.into_iter().collect();
                let arr: Vec<Value> = rows
                    .iter()
                    .map(|r| Value::Object(header.iter().cloned().zip(r.iter().cloned()).collect()))
                    .collect();
                m.insert("rows".into(), Value::Array(arr));
                writeln!(out, "{}", serde_json::to_string_pretty(&Value::Object(m)).expect("serialisable"))?;
                Ok(())
            }
            OutputFormat::Csv => write_rows(out, &header, &rows, format),
            OutputFormat::Table => {
                write_rows(out, &header, &rows, format)?;
                writeln!(out)?;
                write_record(out, &fields, format)
            }
        },
    }
}

fn kv(k: &str, v: impl Into<Value>) -> (String, Value) {
    (k.to_string(), v.into())
}

fn count_arg(name: &str, v: f64) -> Result<u64, CliError> {
    if v.is_finite() && v >= 1.0 && v <= u64::MAX as f64 {
        Ok(v.round() as u64)
    } else {
        Err(CliError::validation(format!("--{name} must be a positive number, got {v}")))
    }
}

fn runs_from(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let format = RunFormat::from_path(path).unwrap_or(RunFormat::Csv);
    let loaded = load_runs(path, format)?;
    if !loaded.duplicate_rows.is_empty() {
        eprintln!(
            "note: {} repeated (shape, tokens) rows kept: {:?}",
            loaded.duplicate_rows.len(),
            loaded.duplicate_rows
        );
    }
    Ok(loaded.records)
}

/// Reference for a set of records: empirical minima of those records, or a
/// parametric source.
fn reference_for(spec: &str, records: Option<&[RunRecord]>) -> Result<RefLossSource, CliError> {
    match parse_ref_spec(spec)? {
        RefSpec::Empirical => match records {
            Some(r) => Ok(empirical_lopt(r)?),
            None => Err(CliError::validation(
                "--ref empirical needs training runs; use chinchilla:<json|hoffmann> here",
            )),
        },
        RefSpec::Chinchilla(p) => Ok(RefLossSource::Chinchilla(p)),
        RefSpec::File(src) => Ok(src),
    }
}

fn optimum_fields(law: &ConditionalLaw) -> Vec<(String, Value)> {
    match optimal_xr(law) {
        Ok(ArchOptimum::Separable { x, r }) => vec![kv("x_star", x), kv("r_star", r)],
        Ok(ArchOptimum::Product { xr }) => vec![kv("xr_star", xr)],
        Err(_) => vec![kv("optimum", "none")],
    }
}

fn arch_fields(a: &crate::arch::ArchitectureConfig) -> Vec<(String, Value)> {
    vec![
        kv("name", a.name.clone()),
        kv("n_layers", a.n_layers),
        kv("d_model", a.d_model),
        kv("n_head", a.n_head),
        kv("d_head", a.d_head),
        kv("gqa", a.gqa),
        kv("f_size", a.f_size),
    ]
}

fn cmd_info(a: &InfoArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let c = io::load_architecture(&a.config)?;
    let p = c.params();
    let m = derived_metrics(&c).map_err(|e| CliError::validation(e.to_string()))?;
    let mut fields = arch_fields(&c);
    fields.extend([
        kv("n_nonembed", p.n_nonembed),
        kv("x", m.x),
        kv("r", m.r),
        kv("d_q", m.d_q),
        kv("d_kv", m.d_kv),
        kv("context", a.context),
        kv("kv_bytes", kv_cache_bytes(&c, a.context, a.batch, 2)?),
        kv("decode_flops_per_token", decode_flops_per_token(&c, a.context)?),
    ]);
    render(out, Rendered::Record(fields), f)
}

fn snapping(d_multiple: Option<u64>, d_head: u64) -> Snapping {
    match d_multiple {
        Some(m) => Snapping {
            d_multiple: m,
            ..Snapping::for_head_dim(d_head)
        },
        None => Snapping::for_head_dim(d_head),
    }
}

fn cmd_enumerate(a: &EnumerateArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let axis = if !a.f_values.is_empty() {
        VariantAxis::IntermediateSizes(a.f_values.clone())
    } else if !a.r_values.is_empty() {
        VariantAxis::Ratios(a.r_values.clone())
    } else {
        return Err(CliError::validation("one of --r-values or --f-values is required"));
    };
    let spec = ArchGridSpec {
        n_target: count_arg("n-target", a.n_target)?,
        n_tolerance: a.tolerance,
        n_layers: a.layers,
        d_head: a.d_head,
        gqa_values: a.gqa.clone(),
        d_model_values: a.d_values.clone(),
        axis,
        snapping: snapping(a.d_multiple, a.d_head),
    };
    let variants = enumerate_variants(&spec).map_err(|e| CliError::validation(e.to_string()))?;
    let header: Vec<String> = ["name", "n_layers", "d_model", "n_head", "d_head", "gqa", "f_size", "n_nonembed", "x", "r"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = variants
        .iter()
        .map(|c| {
            let m = derived_metrics(c).expect("enumerated shapes are valid");
            vec![
                json!(c.name),
                json!(c.n_layers),
                json!(c.d_model),
                json!(c.n_head),
                json!(c.d_head),
                json!(c.gqa),
                json!(c.f_size),
                json!(c.params().n_nonembed),
                json!(m.x),
                json!(m.r),
            ]
        })
        .collect();
    render(out, Rendered::Rows { header, rows }, f)
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let mut records = runs_from(&a.data)?;
    if !a.sizes.is_empty() {
        records.retain(|r| r.size_label.as_ref().is_some_and(|l| a.sizes.contains(l)));
        if records.is_empty() {
            return Err(CliError::validation(format!("no runs with size labels {:?}", a.sizes)));
        }
    }
    let reference = reference_for(&a.reference, Some(&records))?;
    let opts = FitOptions {
        r_filter: (a.r_min, a.r_max),
        ..FitOptions::default()
    };
    let fit = fit_conditional_law(&records, a.form, &reference, &opts)?;
    if fit.fit.termination == Termination::FitFailed {
        return Err(CliError::numerical("fit failed: damped normal equations stayed singular"));
    }
    let train = evaluate_law(&fit.law, &records, &reference)?;

    let mut fields = vec![kv("form", a.form.as_str())];
    for (name, c) in coefficient_labels(a.form).iter().zip(fit.law.coefficients()) {
        fields.push(kv(name, c));
    }
    fields.extend(optimum_fields(&fit.law));
    fields.extend([
        kv("sse", fit.fit.sse),
        kv("train_mse", fit.fit.train_mse),
        kv("n_input", fit.n_input as u64),
        kv("n_filtered", fit.n_filtered as u64),
        kv("multistart_winner", fit.fit.start_index as u64),
        kv("iterations", fit.fit.iterations as u64),
        kv("converged", fit.fit.converged),
        kv("train_spearman", train.spearman.map_or(Value::Null, Value::from)),
    ]);
    if let Some(h) = &a.holdout {
        let held = runs_from(h)?;
        let href = reference_for(&a.reference, Some(&held))?;
        let ev = evaluate_law(&fit.law, &held, &href)?;
        fields.extend([
            kv("holdout_n", held.len() as u64),
            kv("holdout_mse", ev.mse),
            kv("holdout_spearman", ev.spearman.map_or(Value::Null, Value::from)),
        ]);
    }
    let meta: Map<String, Value> = fields
        .iter()
        .filter(|(k, _)| !coefficient_labels(a.form).contains(&k.as_str()) && k != "form")
        .cloned()
        .collect();
    io::save_law(&a.out, &fit.law, Some(&Value::Object(meta)))?;
    if !fit.fit.converged {
        eprintln!("warning: fit stopped without converging ({:?})", fit.fit.termination);
    }
    render(out, Rendered::Record(fields), f)
}

fn coefficient_labels(form: LawForm) -> &'static [&'static str] {
    match form {
        LawForm::Multiplicative => &["a0", "a1", "a2", "b0", "b1", "b2"],
        LawForm::Additive => &["a0", "a1", "a2", "b1", "b2"],
        LawForm::Joint => &["a0", "a1", "a2"],
    }
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let law = io::load_law(&a.law)?.law;
    let c = io::load_architecture(&a.config)?;
    let reference = reference_for(&a.reference, None)?;
    let d = count_arg("d-tokens", a.d_tokens)?;
    let m = derived_metrics(&c).map_err(|e| CliError::validation(e.to_string()))?;
    let loss = predict_loss(&law, &reference, &c, d)?;
    let l_opt = crate::laws::ref_loss(&reference, c.params().n_nonembed as f64, d as f64)?;
    let fields = vec![
        kv("name", c.name.clone()),
        kv("n_nonembed", c.params().n_nonembed),
        kv("x", m.x),
        kv("r", m.r),
        kv("d_tokens", d),
        kv("l_opt", l_opt),
        kv("predicted_loss", loss),
    ];
    render(out, Rendered::Record(fields), f)
}

fn cmd_optimum(a: &OptimumArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let law = io::load_law(&a.law)?.law;
    let n = count_arg("n-target", a.n_target)?;
    let snap = Snapping {
        d_multiple: a.d_multiple,
        ..Snapping::for_head_dim(a.d_head)
    };
    let c = closed_form_architecture(&law, n, a.layers, a.d_head, a.gqa, snap)?;
    let m = derived_metrics(&c).map_err(|e| CliError::validation(e.to_string()))?;
    let mut fields = optimum_fields(&law);
    fields.extend(arch_fields(&c));
    fields.extend([kv("n_nonembed", c.params().n_nonembed), kv("x", m.x), kv("r", m.r)]);
    render(out, Rendered::Record(fields), f)
}

/// Parses a grid file or the inline `key=value;...` form.
pub fn parse_grid(spec: &str, n_target: u64) -> Result<ArchGridSpec, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let mut g: ArchGridSpec =
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{spec}: {e}")))?;
        g.n_target = n_target;
        return Ok(g);
    }
    let mut layers = None;
    let mut d_head = None;
    let mut gqa = vec![DEFAULT_BASELINE_GQA];
    let mut d_values = Vec::new();
    let mut axis = None;
    let mut tol = DEFAULT_N_TOLERANCE;
    let mut d_multiple = None;
    let list = |v: &str| -> Result<Vec<f64>, CliError> {
        v.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::validation(format!("grid: bad number {s:?}"))))
            .collect()
    };
    let ints = |v: &str| -> Result<Vec<u64>, CliError> {
        list(v)?
            .into_iter()
            .map(|x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as u64)
                } else {
                    Err(CliError::validation(format!("grid: {x} is not a nonnegative integer")))
                }
            })
            .collect()
    };
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("grid: expected key=value, got {part:?}")))?;
        match k.trim() {
            "layers" => layers = ints(v)?.first().copied(),
            "d_head" => d_head = ints(v)?.first().copied(),
            "gqa" => gqa = ints(v)?,
            "d" => d_values = ints(v)?,
            "r" => axis = Some(VariantAxis::Ratios(list(v)?)),
            "f" => axis = Some(VariantAxis::IntermediateSizes(ints(v)?)),
            "tol" => tol = list(v)?.first().copied().unwrap_or(tol),
            "d_multiple" => d_multiple = ints(v)?.first().copied(),
            other => return Err(CliError::validation(format!("grid: unknown key {other:?}"))),
        }
    }
    let layers = layers.ok_or_else(|| CliError::validation("grid: layers is required"))?;
    let d_head = d_head.ok_or_else(|| CliError::validation("grid: d_head is required"))?;
    let axis = axis.ok_or_else(|| CliError::validation("grid: r or f is required"))?;
    // Validated by the search; the closed-form path needs only layers and d_head.
    let g = ArchGridSpec {
        n_target,
        n_tolerance: tol,
        n_layers: layers,
        d_head,
        gqa_values: gqa,
        d_model_values: d_values,
        axis,
        snapping: snapping(d_multiple, d_head),
    };
    Ok(g)
}

fn cmd_optimize(a: &OptimizeArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let law = io::load_law(&a.law)?.law;
    let n = count_arg("n-target", a.n_target)?;
    let d = count_arg("d-tokens", a.d_tokens)?;
    let hardware: HardwareProfile = io::load_hardware(&a.hardware)?;
    let grid = parse_grid(&a.grid, n)?;
    let reference = reference_for(&a.reference, None)?;
    let workload = a.workload.workload();

    if a.loss_budget == "optimal" {
        let c = closed_form_architecture(&law, n, grid.n_layers, grid.d_head, DEFAULT_BASELINE_GQA, grid.snapping)?;
        let loss = predict_loss(&law, &reference, &c, d)?;
        let tput = estimate_throughput(&c, &hardware, &workload)?.tokens_per_second;
        let mut fields = arch_fields(&c);
        fields.extend([kv("predicted_loss", loss), kv("tokens_per_second", tput), kv("step", "closed_form")]);
        return render(out, Rendered::Record(fields), f);
    }
    let budget: f64 = a
        .loss_budget
        .parse()
        .map_err(|_| CliError::validation(format!("--loss-budget must be a number or 'optimal', got {:?}", a.loss_budget)))?;
    let problem = SearchProblem {
        law,
        reference,
        n_target: n,
        d_tokens: d,
        loss_budget: budget,
        constraints: grid,
        hardware,
        workload,
    };
    let outcome = constrained_search(&problem)?;
    if let Some(path) = &a.report {
        let file = std::fs::File::create(path)?;
        io::write_search_csv(file, &outcome.candidates)?;
    }
    if f == OutputFormat::Csv {
        io::write_search_csv(out, &outcome.candidates)?;
        return Ok(());
    }
    let header: Vec<String> = io::SEARCH_CSV_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = outcome
        .candidates
        .iter()
        .map(|c| {
            vec![
                json!(c.arch.name),
                json!(c.arch.d_model),
                json!(c.arch.n_head),
                json!(c.arch.gqa),
                json!(c.arch.f_size),
                json!(c.x),
                json!(c.r),
                json!(c.predicted_loss),
                json!(c.modeled_throughput),
                json!(c.feasible),
                json!(!c.dominated),
            ]
        })
        .collect();
    let best = outcome.best();
    let fields = vec![
        kv("best", best.arch.name.clone()),
        kv("best_predicted_loss", best.predicted_loss),
        kv("best_tokens_per_second", best.modeled_throughput),
        kv("loss_budget", budget),
    ];
    render(out, Rendered::Both(fields, header, rows), f)
}

fn cmd_gqa(a: &GqaSearchArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let base = io::load_architecture(&a.config)?;
    let evals = io::load_gqa_evals(&a.evals)?;
    let hardware = io::load_hardware(&a.hardware)?;
    let settings = GqaSearchSettings {
        baseline_gqa: a.baseline_gqa,
        epsilon: a.epsilon,
        ..GqaSearchSettings::default()
    };
    let outcome = gqa_local_search(
        &base,
        |g| {
            evals
                .iter()
                .find(|(eg, _)| *eg == g)
                .map(|(_, l)| *l)
                .ok_or_else(|| format!("no measured loss for gqa={g} in {}", a.evals.display()))
        },
        &settings,
        &hardware,
        &a.workload.workload(),
    )?;
    let header: Vec<String> = ["gqa", "name", "n_head", "f_size", "evaluator_loss", "tokens_per_second", "accepted"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = outcome
        .evaluations
        .iter()
        .map(|e| {
            vec![
                json!(e.gqa),
                json!(e.arch.name),
                json!(e.arch.n_head),
                json!(e.arch.f_size),
                json!(e.evaluator_loss),
                json!(e.modeled_throughput),
                json!(e.accepted),
            ]
        })
        .collect();
    let fields = vec![
        kv("chosen_gqa", outcome.chosen_gqa),
        kv("chosen", outcome.chosen.name.clone()),
        kv("baseline_loss", outcome.baseline_loss),
    ];
    render(out, Rendered::Both(fields, header, rows), f)
}

fn cmd_throughput(a: &ThroughputArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let c = io::load_architecture(&a.config)?;
    let hardware = io::load_hardware(&a.hardware)?;
    let r = estimate_throughput(&c, &hardware, &a.workload.workload())?;
    let fields = vec![
        kv("name", c.name.clone()),
        kv("hardware", hardware.name.clone()),
        kv("prefill_seconds", r.prefill_seconds),
        kv("decode_seconds", r.decode_seconds),
        kv("tokens_per_second", r.tokens_per_second),
        kv("max_context", r.max_context),
        kv("decode_flops_per_token_at_max_context", r.decode_flops_per_token_at_max_context),
        kv("kv_bytes_per_sequence_at_max_context", r.kv_bytes_per_sequence_at_max_context),
        kv("compute_bound_fraction", r.compute_bound_fraction),
    ];
    render(out, Rendered::Record(fields), f)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, f: OutputFormat) -> CliResult {
    let law = io::load_law(&a.law)?.law;
    let records = runs_from(&a.data)?;
    let reference = reference_for(&a.reference, Some(&records))?;
    let ev = evaluate_law(&law, &records, &reference)?;
    let fields = vec![
        kv("n", records.len() as u64),
        kv("mse", ev.mse),
        kv("spearman", ev.spearman.map_or(Value::Null, Value::from)),
    ];
    render(out, Rendered::Record(fields), f)
}

/// Runs one parsed invocation, writing the report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    let f = cli.output;
    match &cli.command {
        Command::Arch(ArchCommand::Info(a)) => cmd_info(a, out, f),
        Command::Arch(ArchCommand::Enumerate(a)) => cmd_enumerate(a, out, f),
        Command::Fit(a) => cmd_fit(a, out, f),
        Command::Predict(a) => cmd_predict(a, out, f),
        Command::Optimum(a) => cmd_optimum(a, out, f),
        Command::Optimize(a) => cmd_optimize(a, out, f),
        Command::GqaSearch(a) => cmd_gqa(a, out, f),
        Command::Throughput(a) => cmd_throughput(a, out, f),
        Command::Eval(a) => cmd_eval(a, out, f),
    }
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
