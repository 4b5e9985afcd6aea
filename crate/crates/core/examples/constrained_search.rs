//! Maximises modeled throughput over a fixed-budget grid subject to a
//! predicted-loss ceiling, and prints the Pareto front.

use archscale::laws::ChinchillaParams;
use archscale::search::{constrained_search, SearchProblem};
use archscale::{ArchGridSpec, ConditionalLaw, HardwareProfile, RefLossSource, Snapping, VariantAxis, Workload};

fn main() {
    let n_target = 975_175_680;
    let problem = SearchProblem {
        law: ConditionalLaw::reference_multiplicative(),
        reference: RefLossSource::Chinchilla(ChinchillaParams::hoffmann()),
        n_target,
        d_tokens: 100 * n_target,
        loss_budget: 2.4285,
        constraints: ArchGridSpec {
            n_target,
            n_tolerance: 0.1,
            n_layers: 16,
            d_head: 64,
            gqa_values: vec![4, 8],
            d_model_values: vec![1536, 2048, 2560, 3072],
            axis: VariantAxis::Ratios(vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0]),
            snapping: Snapping::default(),
        },
        hardware: HardwareProfile::a100_40g(),
        workload: Workload::default(),
    };
    let out = constrained_search(&problem).unwrap();
    let feasible = out.candidates.iter().filter(|c| c.feasible).count();
    println!("{} candidates, {feasible} within loss budget {}\n", out.candidates.len(), problem.loss_budget);
    println!("Pareto front (loss vs tokens/s):");
    for c in out.candidates.iter().filter(|c| !c.dominated) {
        println!(
            "  {:<24} loss {:.5}  {:>7.1} tok/s  {}",
            c.arch.name,
            c.predicted_loss,
            c.modeled_throughput,
            if c.feasible { "feasible" } else { "over budget" }
        );
    }
    let best = out.best();
    println!("\nbest: {} (loss {:.5}, {:.1} tok/s)", best.arch.name, best.predicted_loss, best.modeled_throughput);
}
