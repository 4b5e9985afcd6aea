//! GQA local search with early stopping. The evaluator here is a synthetic
//! stand-in for measured losses: flat through gqa 9, then degrading.

use archscale::search::{gqa_local_search, GqaSearchSettings};
use archscale::{ArchitectureConfig, HardwareProfile, Workload};

fn main() {
    let base = ArchitectureConfig::new("base", 16, 2560, 36, 64, 4, 6144);
    let measured = |g: u64| -> Result<f64, String> { Ok(2.800 + if g > 9 { 0.004 * g as f64 } else { 0.0001 * g as f64 }) };
    let out = gqa_local_search(
        &base,
        measured,
        &GqaSearchSettings::default(),
        &HardwareProfile::a100_40g(),
        &Workload::default(),
    )
    .unwrap();
    println!("baseline loss {:.4}", out.baseline_loss);
    for e in &out.evaluations {
        println!(
            "gqa {:>2}: {:<22} loss {:.4}  {:>7.1} tok/s  {}",
            e.gqa,
            e.arch.name,
            e.evaluator_loss,
            e.modeled_throughput,
            if e.accepted { "accepted" } else { "rejected, stop" }
        );
    }
    println!("chosen gqa = {} ({})", out.chosen_gqa, out.chosen.name);
}
