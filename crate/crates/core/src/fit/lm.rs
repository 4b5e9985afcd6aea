use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{FitError, FitOptions, FitResult, Termination};

/// Gradient-norm (infinity norm of `J^T r`) stopping threshold.
pub const GRADIENT_TOL: f64 = 1e-10;
/// Damping ceiling; exceeding it ends the iteration.
pub const LAMBDA_MAX: f64 = 1e12;
const DIAG_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub target: f64,
}

impl DataPoint {
    pub fn new(features: Vec<f64>, target: f64) -> Self {
        Self { features, target }
    }
}

fn residuals<M>(model: &M, data: &[DataPoint], c: &[f64]) -> Vec<f64>
where
    M: Fn(&[f64], &[f64]) -> f64,
{
    data.iter().map(|p| p.target - model(c, &p.features)).collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn project(c: &mut [f64], bounds: Option<&Vec<(f64, f64)>>) {
    if let Some(b) = bounds {
        for (v, (lo, hi)) in c.iter_mut().zip(b) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Forward-difference Jacobian of the predictions, `n_points x n_coef`.
fn jacobian<M>(model: &M, data: &[DataPoint], c: &[f64], base: &[f64]) -> DMatrix<f64>
where
    M: Fn(&[f64], &[f64]) -> f64,
{
    let mut j = DMatrix::zeros(data.len(), c.len());
    let mut probe = c.to_vec();
    for k in 0..c.len() {
        let h = 1e-7 * c[k].abs().max(1.0);
        probe[k] = c[k] + h;
        let step = probe[k] - c[k];
        for (i, p) in data.iter().enumerate() {
            // base holds residuals: prediction = target - residual.
            let f0 = p.target - base[i];
            j[(i, k)] = (model(&probe, &p.features) - f0) / step;
        }
        probe[k] = c[k];
    }
    j
}

/// Damped Gauss-Newton (Levenberg-Marquardt) minimisation of
/// `sum (target - model(c, features))^2` from `init`.
///
/// Damping is `lambda * diag(J^T J)`; accepted steps divide `lambda` by `nu`,
/// rejected ones multiply it. SSE never increases.
pub fn lm_fit<M>(model: &M, data: &[DataPoint], init: &[f64], opts: &FitOptions) -> Result<FitResult, FitError>
where
    M: Fn(&[f64], &[f64]) -> f64,
{
    opts.validate()?;
    let p = init.len();
    if data.len() < p || p == 0 {
        return Err(FitError::TooFewPoints {
            points: data.len(),
            coefficients: p,
        });
    }
    if let Some(b) = &opts.param_bounds {
        if b.len() != p {
            return Err(FitError::InvalidOptions(format!(
                "{} parameter bounds for {p} coefficients",
                b.len()
            )));
        }
    }
    let mut c = init.to_vec();
    project(&mut c, opts.param_bounds.as_ref());
    let mut r = residuals(model, data, &c);
    let mut sse = sum_sq(&r);
    if !sse.is_finite() {
        return Err(FitError::NonFiniteInit);
    }

    let mut lambda = opts.lambda_init;
    let mut trace = vec![sse];
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let j = jacobian(model, data, &c, &r);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        if g.amax() < GRADIENT_TOL {
            termination = Termination::Gradient;
            break;
        }
        let mut any_solved = false;
        loop {
            let mut a = jtj.clone();
            for k in 0..p {
                a[(k, k)] += lambda * jtj[(k, k)].max(DIAG_FLOOR);
            }
            if let Some(chol) = a.cholesky() {
                any_solved = true;
                let delta = chol.solve(&g);
                let mut trial: Vec<f64> = c.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                project(&mut trial, opts.param_bounds.as_ref());
                let r_trial = residuals(model, data, &trial);
                let sse_trial = sum_sq(&r_trial);
                if sse_trial.is_finite() && sse_trial < sse {
                    let rel = (sse - sse_trial) / sse;
                    c = trial;
                    r = r_trial;
                    sse = sse_trial;
                    trace.push(sse);
                    lambda /= opts.nu;
                    if rel < opts.rel_tol {
                        termination = Termination::RelativeTolerance;
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            lambda *= opts.nu;
            if lambda > LAMBDA_MAX {
                termination = if any_solved {
                    Termination::LambdaLimit
                } else {
                    Termination::FitFailed
                };
                break 'outer;
            }
        }
    }

    let converged = matches!(termination, Termination::RelativeTolerance | Termination::Gradient);
    Ok(FitResult {
        train_mse: sse / data.len() as f64,
        coefficients: c,
        sse,
        iterations,
        converged,
        termination,
        residuals: r,
        start_index: 0,
        sse_trace: trace,
    })
}

/// Runs [`lm_fit`] from every start in `opts.multistart_grid` (in parallel)
/// and keeps the lowest SSE; ties go to the lowest start index.
///
/// Starts whose initial point is not finite are skipped; if every start
/// fails, the first start's error is returned.
pub fn multistart_fit<M>(model: &M, data: &[DataPoint], opts: &FitOptions) -> Result<FitResult, FitError>
where
    M: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    if opts.multistart_grid.is_empty() {
        return Err(FitError::EmptyGrid);
    }
    let results: Vec<Result<FitResult, FitError>> = opts
        .multistart_grid
        .par_iter()
        .map(|init| lm_fit(model, data, init, opts))
        .collect();
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(mut fit) => {
                fit.start_index = i;
                if best.as_ref().is_none_or(|b| fit.sse < b.sse) {
                    best = Some(fit);
                }
            }
            Err(FitError::NonFiniteInit) => {
                first_err.get_or_insert(FitError::NonFiniteInit);
            }
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(FitError::EmptyGrid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(c: &[f64], f: &[f64]) -> f64 {
        c[0] + c[1] * f[0]
    }

    fn line_data() -> Vec<DataPoint> {
        [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]
            .iter()
            .map(|&(t, y)| DataPoint::new(vec![t], y))
            .collect()
    }

    #[test]
    fn exact_linear_fit() {
        let fit = lm_fit(&linear, &line_data(), &[0.0, 0.0], &FitOptions::default()).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-9);
        assert!(fit.sse < 1e-18, "{}", fit.sse);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn too_few_points() {
        let data = vec![DataPoint::new(vec![0.0], 1.0)];
        assert!(matches!(
            lm_fit(&linear, &data, &[0.0, 0.0], &FitOptions::default()),
            Err(FitError::TooFewPoints { points: 1, coefficients: 2 })
        ));
    }

    #[test]
    fn sse_trace_is_monotone() {
        let data: Vec<DataPoint> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.1;
                DataPoint::new(vec![t], 2.0 * (-1.3 * t).exp() + 0.01 * (i % 3) as f64)
            })
            .collect();
        let model = |c: &[f64], f: &[f64]| c[0] * (c[1] * f[0]).exp();
        let fit = lm_fit(&model, &data, &[1.0, 0.0], &FitOptions::default()).unwrap();
        assert!(fit.sse_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.sse <= fit.sse_trace[0]);
    }

    #[test]
    fn bounds_are_respected() {
        let opts = FitOptions {
            param_bounds: Some(vec![(0.0, 10.0), (0.0, 1.5)]),
            ..FitOptions::default()
        };
        let fit = lm_fit(&linear, &line_data(), &[0.0, 0.0], &opts).unwrap();
        assert!(fit.coefficients[1] <= 1.5);
    }

    #[test]
    fn multistart_single_start_matches_lm_fit() {
        let opts = FitOptions {
            multistart_grid: vec![vec![0.5, 0.5]],
            ..FitOptions::default()
        };
        let single = lm_fit(&linear, &line_data(), &[0.5, 0.5], &opts).unwrap();
        let multi = multistart_fit(&linear, &line_data(), &opts).unwrap();
        assert_eq!(single, multi);
        let empty = FitOptions::default();
        assert_eq!(multistart_fit(&linear, &line_data(), &empty), Err(FitError::EmptyGrid));
    }
}
