//! Progressive protocol: fit on the smallest sizes, evaluate on the next one
//! up, each calibrated by its own empirical per-bucket minimum.

use archscale::fit::{evaluate_law, fit_conditional_law, FitOptions};
use archscale::laws::empirical_lopt;
use archscale::synthetic::{corpus_subset, generate_runs, SyntheticSpec};
use archscale::LawForm;

fn main() {
    let spec = SyntheticSpec { seed: 7, ..SyntheticSpec::default() };
    let tasks: [(&[&str], &str); 3] = [(&["80M"], "145M"), (&["80M", "145M"], "297M"), (&["80M", "145M", "297M"], "1B")];
    for (train_sizes, eval_size) in tasks {
        let (train, _) = generate_runs(&corpus_subset(train_sizes), &spec);
        let (held, _) = generate_runs(&corpus_subset(&[eval_size]), &spec);
        let fit = fit_conditional_law(&train, LawForm::Multiplicative, &empirical_lopt(&train).unwrap(), &FitOptions::default())
            .unwrap();
        let ev = evaluate_law(&fit.law, &held, &empirical_lopt(&held).unwrap()).unwrap();
        println!(
            "fit on {:<16} eval on {eval_size:<5} mse {:.2e}  spearman {}",
            train_sizes.join("+"),
            ev.mse,
            ev.spearman.map_or("n/a".to_string(), |s| format!("{s:.3}"))
        );
    }
}
