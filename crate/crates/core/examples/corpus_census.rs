//! Cross-checks every bundled table row against the parameter model and
//! prints a per-size census.

use archscale::corpus::{corpus, reference_models, verified_corpus};
use archscale::arch::derived_metrics;

fn main() {
    let entries = verified_corpus().expect("bundled tables self-check");
    for size in ["80M", "145M", "297M", "1B"] {
        let rows: Vec<_> = entries.iter().filter(|e| e.size_label == size).collect();
        let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
            let r = derived_metrics(&e.config()).unwrap().r;
            (lo.min(r), hi.max(r))
        });
        println!("{size:>5}: {:>2} variants, r in [{lo:.2}, {hi:.2}]", rows.len());
    }
    println!("{} variants total\n", corpus().len());

    println!("{:<16} {:>11} {:>7} {:>7}", "model", "N", "x", "r");
    for m in reference_models() {
        let d = derived_metrics(&m.config).unwrap();
        let status = if m.check().is_ok() { "" } else { "  (mismatch)" };
        println!(
            "{:<16} {:>11} {:>7.4} {:>7.3}{status}",
            m.config.name,
            m.config.params().n_nonembed,
            d.x,
            d.r
        );
    }
}
