//! The full search: fit a law and reference from (synthetic) runs, set the
//! loss ceiling to a baseline shape's predicted loss, search for the fastest
//! shape under it, then refine GQA.

use archscale::corpus::reference_model;
use archscale::cost::estimate_throughput;
use archscale::fit::FitOptions;
use archscale::search::{predict_loss, run_algorithm1, Algorithm1Inputs, GqaSearchSettings, LawInput, LossBudget};
use archscale::synthetic::{corpus_subset, generate_runs, SyntheticSpec};
use archscale::{ArchGridSpec, ConditionalLaw, HardwareProfile, LawForm, RefLossSource, Snapping, VariantAxis, Workload};

fn main() {
    let spec = SyntheticSpec { seed: 3, ..SyntheticSpec::default() };
    let (runs, _) = generate_runs(&corpus_subset(&["80M", "145M", "297M"]), &spec);
    let reference: RefLossSource = spec.reference_source();
    let law = ConditionalLaw::reference_multiplicative();

    let baseline = reference_model("LLaMA-3.2-1B").unwrap().config;
    let n_target = baseline.params().n_nonembed;
    let d_tokens = 100 * n_target;
    let hw = HardwareProfile::a100_40g();
    let wl = Workload::default();
    let l_t = predict_loss(&law, &reference, &baseline, d_tokens).unwrap();
    let base_tput = estimate_throughput(&baseline, &hw, &wl).unwrap().tokens_per_second;
    println!("baseline {}: predicted loss {l_t:.5}, {base_tput:.1} tok/s", baseline.name);

    let inputs = Algorithm1Inputs {
        reference: Some(reference),
        n_target,
        d_tokens,
        loss_budget: LossBudget::Loss(l_t),
        grid: ArchGridSpec {
            n_target,
            n_tolerance: 0.1,
            n_layers: 16,
            d_head: 64,
            gqa_values: vec![4],
            d_model_values: vec![1536, 2048, 2560, 3072],
            axis: VariantAxis::Ratios(vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0]),
            snapping: Snapping::default(),
        },
        hardware: hw,
        workload: wl,
        gqa: GqaSearchSettings::default(),
    };
    // A synthetic stand-in for measured GQA ablation losses.
    let evaluator = |g: u64| -> Result<f64, String> { Ok(l_t + if g <= 8 { 0.0 } else { 0.01 }) };
    let fitted = LawInput::Records { records: &runs, form: LawForm::Multiplicative, options: FitOptions::default() };
    let res = run_algorithm1(fitted, &inputs, Some(evaluator)).unwrap();
    println!(
        "searched {} candidates -> {} gqa={} loss {:.5}, {:.1} tok/s ({:+.1}% vs baseline)",
        res.candidates.len(),
        res.architecture.name,
        res.gqa,
        res.predicted_loss,
        res.modeled_throughput,
        100.0 * (res.modeled_throughput / base_tput - 1.0)
    );
    if let Some(trace) = &res.gqa_trace {
        let visited: Vec<u64> = trace.evaluations.iter().map(|e| e.gqa).collect();
        println!("gqa candidates visited: {visited:?}");
    }
}
