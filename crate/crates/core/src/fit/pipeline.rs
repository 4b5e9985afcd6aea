use crate::arch::derived_metrics;
use crate::laws::{ChinchillaParams, ConditionalLaw, LawError, LawForm, RefLossSource};
use crate::runs::RunRecord;

use super::{lm::DataPoint, metrics, multistart_fit, FitError, FitOptions, FitResult};

/// Default multistart grid for a conditional-law form (canonical coefficient
/// order, cartesian product in row-major order).
pub fn default_grid(form: LawForm) -> Vec<Vec<f64>> {
    let a0 = [1.0, 2.0, 3.0];
    let a1 = [0.01, 0.1, 0.3];
    let a2 = [0.005, 0.02, 0.05];
    let b0 = [0.3, 0.5, 1.0];
    let b12 = [0.005, 0.05];
    let axes: Vec<&[f64]> = match form {
        LawForm::Multiplicative => vec![&a0, &a1, &a2, &b0, &b12, &b12],
        LawForm::Additive => vec![&a0, &a1, &a2, &b12, &b12],
        LawForm::Joint => vec![&a0, &a1, &a2],
    };
    cartesian(&axes)
}

fn cartesian(axes: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// `(x, r, L_opt)` for one record.
pub fn law_features(rec: &RunRecord, reference: &RefLossSource) -> Result<(f64, f64, f64), LawError> {
    let m = derived_metrics(&rec.arch).map_err(|e| LawError::InvalidRecord(e.to_string()))?;
    Ok((m.x, m.r, reference.for_record(rec)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFit {
    pub law: ConditionalLaw,
    pub fit: FitResult,
    pub n_input: usize,
    /// Records dropped by the ratio filter.
    pub n_filtered: usize,
}

/// Fits a conditional law to observed losses:
/// features via the architecture model, ratio outlier filter, reference
/// attachment, then a multistart Levenberg-Marquardt fit.
pub fn fit_conditional_law(
    records: &[RunRecord],
    form: LawForm,
    reference: &RefLossSource,
    opts: &FitOptions,
) -> Result<ConditionalFit, FitError> {
    opts.validate()?;
    if records.is_empty() {
        return Err(LawError::EmptyRecords.into());
    }
    let (r_min, r_max) = opts.r_filter;
    let mut data = Vec::with_capacity(records.len());
    for rec in records {
        let m = derived_metrics(&rec.arch).map_err(|e| LawError::InvalidRecord(e.to_string()))?;
        if m.r < r_min || m.r > r_max {
            continue;
        }
        let l_opt = reference.for_record(rec)?;
        data.push(DataPoint::new(vec![m.x, m.r, l_opt], rec.loss));
    }
    if data.is_empty() {
        return Err(FitError::EmptyAfterFilter {
            n_input: records.len(),
            r_min,
            r_max,
        });
    }

    let mut run_opts = opts.clone();
    if run_opts.multistart_grid.is_empty() {
        run_opts.multistart_grid = default_grid(form);
    }
    let want = form.n_coefficients();
    if let Some(bad) = run_opts.multistart_grid.iter().find(|s| s.len() != want) {
        return Err(FitError::InitLength {
            expected: want,
            got: bad.len(),
        });
    }
    let model = move |c: &[f64], f: &[f64]| ConditionalLaw::eval_raw(form, c, f[0], f[1], f[2]);
    let fit = multistart_fit(&model, &data, &run_opts)?;
    let law = ConditionalLaw::from_coefficients(form, &fit.coefficients)?;
    Ok(ConditionalFit {
        law,
        n_input: records.len(),
        n_filtered: records.len() - data.len(),
        fit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawEvaluation {
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    pub mse: f64,
    /// `None` when fewer than two points or all ranks tie.
    pub spearman: Option<f64>,
}

/// Predicts every record with `law` and scores the predictions.
pub fn evaluate_law(
    law: &ConditionalLaw,
    records: &[RunRecord],
    reference: &RefLossSource,
) -> Result<LawEvaluation, FitError> {
    let mut predicted = Vec::with_capacity(records.len());
    let mut actual = Vec::with_capacity(records.len());
    for rec in records {
        let (x, r, l) = law_features(rec, reference)?;
        predicted.push(crate::laws::conditional_loss(law, x, r, l)?);
        actual.push(rec.loss);
    }
    let mse = metrics::mse(&predicted, &actual)?;
    let spearman = metrics::spearman(&predicted, &actual).ok();
    Ok(LawEvaluation {
        predicted,
        actual,
        mse,
        spearman,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChinchillaFit {
    pub params: ChinchillaParams,
    pub fit: FitResult,
}

/// Fits `E + A/N^alpha + B/D^beta` to `(N, D, loss)` points.
///
/// Without explicit bounds, coefficients are kept nonnegative and the
/// exponents in `[0.01, 2]`.
pub fn fit_chinchilla(points: &[(f64, f64, f64)], opts: &FitOptions) -> Result<ChinchillaFit, FitError> {
    let data: Vec<DataPoint> = points
        .iter()
        .map(|&(n, d, loss)| DataPoint::new(vec![n, d], loss))
        .collect();
    let mut run_opts = opts.clone();
    if run_opts.multistart_grid.is_empty() {
        run_opts.multistart_grid = cartesian(&[
            &[1.5, 2.0],
            &[100.0, 400.0, 1000.0],
            &[0.2, 0.34, 0.5],
            &[100.0, 400.0, 1000.0],
            &[0.2, 0.28, 0.4],
        ]);
    }
    if run_opts.param_bounds.is_none() {
        run_opts.param_bounds = Some(vec![
            (0.0, 20.0),
            (0.0, 1e7),
            (0.01, 2.0),
            (0.0, 1e7),
            (0.01, 2.0),
        ]);
    }
    let model = |c: &[f64], f: &[f64]| c[0] + c[1] / f[0].powf(c[2]) + c[3] / f[1].powf(c[4]);
    let fit = multistart_fit(&model, &data, &run_opts)?;
    Ok(ChinchillaFit {
        params: ChinchillaParams::from_slice(&fit.coefficients),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::ArchitectureConfig;
    use crate::laws::{laws_equivalent, default_probe_grid, optimal_xr};

    #[test]
    fn default_grid_sizes() {
        assert_eq!(default_grid(LawForm::Multiplicative).len(), 324);
        assert_eq!(default_grid(LawForm::Additive).len(), 108);
        assert_eq!(default_grid(LawForm::Joint).len(), 27);
        assert_eq!(default_grid(LawForm::Joint)[1], vec![1.0, 0.01, 0.02]);
    }

    fn outlier(n_head: u64, f: u64) -> RunRecord {
        RunRecord {
            arch: ArchitectureConfig::new("o", 12, 768, n_head, 64, 4, f),
            size_label: Some("80M".into()),
            variant: None,
            d_tokens: 8_000_000_000,
            loss: 3.3,
            tags: vec![],
        }
    }

    #[test]
    fn outlier_filter() {
        // r=12.6 and r~0.1 style shapes.
        let recs = vec![outlier(4, 2688), outlier(44, 128)];
        let reference = RefLossSource::Chinchilla(ChinchillaParams::hoffmann());
        let err = fit_conditional_law(&recs, LawForm::Joint, &reference, &FitOptions::default()).unwrap_err();
        assert!(err.to_string().starts_with("empty after outlier filter"), "{err}");
        let wide = FitOptions {
            r_filter: (0.05, 15.0),
            multistart_grid: vec![vec![1.0, 0.1, 0.01]],
            ..FitOptions::default()
        };
        // Two points for three coefficients: the filter kept them, the fit
        // then refuses on the point count.
        let err = fit_conditional_law(&recs, LawForm::Joint, &reference, &wide).unwrap_err();
        assert!(matches!(err, FitError::TooFewPoints { points: 2, .. }), "{err}");
    }

    #[test]
    fn noiseless_recovery_on_corpus() {
        let truth = ConditionalLaw::reference_multiplicative();
        let reference = RefLossSource::Chinchilla(ChinchillaParams::hoffmann());
        let recs: Vec<RunRecord> = crate::corpus::corpus()
            .iter()
            .filter(|e| e.size_label != "1B")
            .map(|e| {
                let arch = e.config();
                let n = arch.params().n_nonembed;
                let mut rec = RunRecord {
                    arch,
                    size_label: Some(e.size_label.to_string()),
                    variant: Some(e.variant.to_string()),
                    d_tokens: 100 * n,
                    loss: 0.0,
                    tags: vec![],
                };
                let (x, r, l) = law_features(&rec, &reference).unwrap();
                rec.loss = truth.evaluate(x, r, l);
                rec
            })
            .collect();
        let fit = fit_conditional_law(&recs, LawForm::Multiplicative, &reference, &FitOptions::default()).unwrap();
        assert!(fit.n_filtered > 0);
        assert!(fit.fit.sse < 1e-18, "{}", fit.fit.sse);
        assert!(laws_equivalent(&fit.law, &truth, &default_probe_grid()) || {
            let (x, r) = optimal_xr(&fit.law).unwrap().separable().unwrap();
            (x - 0.08008).abs() < 1e-4 && (r - 1.0317).abs() < 1e-3
        });
    }
}
