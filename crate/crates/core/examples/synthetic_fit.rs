//! Fits all three law forms to labeled-synthetic losses over the bundled
//! 80M-297M variants and compares the recovered optimum with the generator.

use archscale::fit::{fit_conditional_law, FitOptions};
use archscale::laws::{optimal_xr, ArchOptimum};
use archscale::synthetic::{corpus_subset, generate_runs, SyntheticSpec};
use archscale::LawForm;

fn main() {
    let spec = SyntheticSpec { sigma: 0.002, seed: 42, ..SyntheticSpec::default() };
    let (runs, _) = generate_runs(&corpus_subset(&["80M", "145M", "297M"]), &spec);
    let reference = spec.reference_source();
    println!("{} synthetic runs, noise sigma = {}", runs.len(), spec.sigma);
    if let Ok(ArchOptimum::Separable { x, r }) = optimal_xr(&spec.law) {
        println!("generator optimum: x* = {x:.5}, r* = {r:.4}\n");
    }
    for form in [LawForm::Multiplicative, LawForm::Additive, LawForm::Joint] {
        let fit = fit_conditional_law(&runs, form, &reference, &FitOptions::default()).unwrap();
        let opt = match optimal_xr(&fit.law) {
            Ok(ArchOptimum::Separable { x, r }) => format!("x* = {x:.5}, r* = {r:.4}"),
            Ok(ArchOptimum::Product { xr }) => format!("(x r)* = {xr:.5}"),
            Err(e) => e.to_string(),
        };
        println!(
            "{form:<14} train mse = {:.2e}  dropped {} outliers  best start #{}  {opt}",
            fit.fit.train_mse, fit.n_filtered, fit.fit.start_index
        );
    }
}
