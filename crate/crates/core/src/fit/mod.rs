//! Levenberg-Marquardt least squares, multistart, fit-quality metrics and the
//! conditional-law fitting pipeline.

mod lm;
mod metrics;
mod pipeline;

pub use lm::{lm_fit, multistart_fit, DataPoint, GRADIENT_TOL, LAMBDA_MAX};
pub use metrics::{average_ranks, mse, spearman};
pub use pipeline::{
    default_grid, evaluate_law, fit_chinchilla, fit_conditional_law, law_features, ChinchillaFit,
    ConditionalFit, LawEvaluation,
};

use serde::Serialize;
use thiserror::Error;

use crate::laws::LawError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {coefficients} data points, got {points}")]
    TooFewPoints { points: usize, coefficients: usize },
    #[error("model is not finite at the initial coefficients")]
    NonFiniteInit,
    #[error("initial coefficient vector has length {got}, expected {expected}")]
    InitLength { expected: usize, got: usize },
    #[error("multistart grid is empty")]
    EmptyGrid,
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
    #[error("empty after outlier filter: all {n_input} records have r outside [{r_min}, {r_max}]")]
    EmptyAfterFilter { n_input: usize, r_min: f64, r_max: f64 },
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("spearman undefined: zero rank variance")]
    ZeroVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub lambda_init: f64,
    pub nu: f64,
    pub rel_tol: f64,
    /// Per-coefficient closed intervals; steps are projected onto the box.
    pub param_bounds: Option<Vec<(f64, f64)>>,
    /// Initial coefficient vectors. Empty selects the form's default grid.
    pub multistart_grid: Vec<Vec<f64>>,
    /// Records with `r` outside this closed interval are dropped.
    pub r_filter: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            lambda_init: 1e-3,
            nu: 10.0,
            rel_tol: 1e-12,
            param_bounds: None,
            multistart_grid: Vec::new(),
            r_filter: (0.5, 5.0),
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::InvalidOptions(m.to_string()));
        if !(self.nu > 1.0) {
            return bad("nu must exceed 1");
        }
        if !(self.lambda_init > 0.0 && self.lambda_init.is_finite()) {
            return bad("lambda_init must be positive");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        let (lo, hi) = self.r_filter;
        if !(lo <= hi) || lo.is_nan() || hi.is_nan() {
            return bad("r_filter must satisfy min <= max");
        }
        if let Some(bounds) = &self.param_bounds {
            if bounds.iter().any(|(l, h)| !(l <= h)) {
                return bad("every parameter bound must satisfy low <= high");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Accepted step improved SSE by less than `rel_tol` (relative).
    RelativeTolerance,
    /// Gradient norm fell below [`GRADIENT_TOL`].
    Gradient,
    MaxIterations,
    /// Damping exceeded [`LAMBDA_MAX`] without an improving step.
    LambdaLimit,
    /// Damped normal equations stayed singular through the whole damping
    /// escalation; the result is the best point found.
    FitFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// `target - prediction` per point.
    pub residuals: Vec<f64>,
    pub train_mse: f64,
    /// Index of the winning multistart start (0 for single fits).
    pub start_index: usize,
    /// SSE after the initial point and after each accepted step.
    #[serde(skip)]
    pub sse_trace: Vec<f64>,
}
