use proptest::prelude::*;

use archscale::arch::{
    count_params, derived_metrics, snap_to_multiple, solve_at_ratio, ArchitectureConfig, Snapping,
};
use archscale::cost::kv_cache_bytes;
use archscale::fit::{fit_conditional_law, lm_fit, mse, spearman, DataPoint, FitOptions};
use archscale::laws::{default_probe_grid, laws_equivalent, optimal_xr, ConditionalLaw, LawForm};
use archscale::search::{
    closed_form_architecture, dominated_flags, gqa_local_search, pareto_front, CandidateEvaluation,
    GqaSearchSettings,
};
use archscale::synthetic::{corpus_subset, generate_runs, SyntheticSpec};
use archscale::{HardwareProfile, Workload};

fn config() -> impl Strategy<Value = ArchitectureConfig> {
    (1u64..=48, 4u64..=64, 1u64..=16, prop::sample::select(vec![32u64, 64, 128]), prop::sample::select(vec![1u64, 2, 4, 8]), 1u64..=160)
        .prop_map(|(l, d, h, dh, g, f)| ArchitectureConfig::new("p", l, 64 * d, g * h, dh, g, 64 * f))
}

fn candidate(loss: f64, tput: f64) -> CandidateEvaluation {
    CandidateEvaluation {
        arch: ArchitectureConfig::new("c", 1, 64, 1, 64, 1, 64),
        x: 0.1,
        r: 1.0,
        n_nonembed: 1,
        predicted_loss: loss,
        modeled_throughput: tput,
        fits_memory: true,
        feasible: true,
        dominated: false,
    }
}

proptest! {
    #[test]
    fn param_count_matches_independent_formula(c in config()) {
        let d_q = c.n_head * c.d_head;
        let d_kv = c.n_head / c.gqa * c.d_head;
        let per_layer = 2 * c.d_model * d_q + 2 * c.d_model * d_kv + 3 * c.d_model * c.f_size;
        let p = count_params(&c).unwrap();
        prop_assert_eq!(p.n_nonembed, c.n_layers * per_layer);
        let m = derived_metrics(&c).unwrap();
        prop_assert!((m.r - (3 * c.f_size) as f64 / (2 * (d_q + d_kv)) as f64).abs() < 1e-12);
    }

    #[test]
    fn kv_cache_is_linear(c in config(), t in 0u64..10_000, b in 1u64..64) {
        let one = kv_cache_bytes(&c, t, 1, 2).unwrap();
        prop_assert_eq!(kv_cache_bytes(&c, t, b, 2).unwrap(), b * one);
        prop_assert_eq!(one, 2 * c.n_layers * t * c.d_kv() * 2);
    }

    #[test]
    fn snapping_hits_nearest_multiple(raw in 1.0f64..1e6, m in 1u64..1024) {
        let s = snap_to_multiple(raw, m);
        prop_assert_eq!(s % m, 0);
        prop_assert!((s as f64 - raw).abs() <= m as f64 / 2.0 + 1e-9);
    }

    #[test]
    fn mse_symmetric_nonnegative(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40)) {
        let (p, a): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let m = mse(&p, &a).unwrap();
        prop_assert!(m >= 0.0);
        prop_assert_eq!(m, mse(&a, &p).unwrap());
        prop_assert_eq!(mse(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn spearman_invariant_under_monotone_maps(v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..40)) {
        let (p, a): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        if let Ok(base) = spearman(&p, &a) {
            prop_assert!((-1.0..=1.0).contains(&base));
            let p2: Vec<f64> = p.iter().map(|x| x.exp()).collect();
            let a2: Vec<f64> = a.iter().map(|x| 3.0 * x + x.powi(3)).collect();
            prop_assert!((spearman(&p2, &a2).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn pareto_matches_brute_force_and_is_idempotent(
        pts in prop::collection::vec((prop::sample::select(vec![2.0f64, 2.1, 2.2, 2.3]), prop::sample::select(vec![10.0f64, 20.0, 30.0])), 0..30)
    ) {
        let brute: Vec<bool> = (0..pts.len()).map(|i| (0..pts.len()).any(|j| {
            let (li, ti) = pts[i];
            let (lj, tj) = pts[j];
            lj <= li && tj >= ti && (lj < li || tj > ti)
        })).collect();
        prop_assert_eq!(dominated_flags(&pts), brute);
        let mut cands: Vec<CandidateEvaluation> = pts.iter().map(|&(l, t)| candidate(l, t)).collect();
        let front = pareto_front(&mut cands);
        let mut members: Vec<CandidateEvaluation> = front.iter().map(|&i| cands[i].clone()).collect();
        let again = pareto_front(&mut members);
        prop_assert_eq!(again.len(), members.len());
    }

    #[test]
    fn gauge_rescaling_preserves_predictions(c in 0.2f64..5.0) {
        let law = ConditionalLaw::reference_multiplicative();
        prop_assert!(laws_equivalent(&law, &law.regauged(c), &default_probe_grid()));
    }

    #[test]
    fn multiplicative_optimum_is_a_minimum(dx in -0.9f64..3.0, dr in -0.9f64..3.0) {
        let law = ConditionalLaw::reference_multiplicative();
        let (x, r) = optimal_xr(&law).unwrap().separable().unwrap();
        let best = law.evaluate(x, r, 1.0);
        prop_assert!(law.evaluate(x * (1.0 + dx), r * (1.0 + dr), 1.0) >= best - 1e-15);
    }

    #[test]
    fn gqa_search_stops_at_first_rejection(reject_at in 0usize..6) {
        let base = ArchitectureConfig::new("base", 16, 2560, 36, 64, 4, 6144);
        let mut visited = Vec::new();
        let out = gqa_local_search(
            &base,
            |g| {
                visited.push(g);
                Ok(if visited.len() > reject_at && visited.len() > 1 { 3.0 } else { 2.8 })
            },
            &GqaSearchSettings::default(),
            &HardwareProfile::a100_40g(),
            &Workload::new(1, 512, 32),
        ).unwrap();
        prop_assert!(visited.windows(2).all(|w| w[0] < w[1]));
        let first_reject = out.evaluations.iter().position(|e| !e.accepted);
        if let Some(i) = first_reject {
            prop_assert_eq!(i + 1, out.evaluations.len());
        }
        prop_assert_eq!(visited.len(), out.evaluations.len());
    }
}

#[test]
fn closed_form_within_one_snapping_quantum() {
    for (law, layers, d_head, gqa, budgets) in [
        (ConditionalLaw::reference_multiplicative(), 16, 64, 4, [3e8, 6e8, 9.75e8, 1.4e9]),
        (ConditionalLaw::reference_multiplicative_1b(), 28, 128, 3, [1.6e9, 2.2e9, 2.88e9, 4e9]),
    ] {
        let (xs, rs) = optimal_xr(&law).unwrap().separable().unwrap();
        for snap in [Snapping::for_head_dim(d_head), Snapping::hardware_aligned()] {
            for n in budgets {
                let n = n as u64;
                let c = closed_form_architecture(&law, n, layers, d_head, gqa, snap).unwrap();
                let m = derived_metrics(&c).unwrap();
                let x_quantum = snap.d_multiple as f64 / (n as f64).sqrt() / xs;
                // One head group or one MLP step, whichever moves r more.
                let head_q = gqa as f64 / c.n_head as f64;
                let f_q = snap.f_multiple as f64 / c.f_size as f64;
                let r_quantum = head_q.max(f_q);
                // x uses the realised N, which itself moves by up to one MLP quantum.
                assert!((m.x - xs).abs() / xs <= x_quantum + f_q, "n={n} x={} x*={xs}", m.x);
                assert!((m.r - rs).abs() / rs <= r_quantum + f_q, "n={n} r={} r*={rs}", m.r);
            }
        }
    }
}

#[test]
fn finite_difference_matches_analytic_gradient() {
    let x: f64 = 0.09;
    let r: f64 = 1.7;
    let l = 2.6;
    for law in [
        ConditionalLaw::reference_multiplicative(),
        ConditionalLaw::Additive { a0: 0.05, a1: 0.1, a2: 0.008, b1: 0.006, b2: 0.006 },
        ConditionalLaw::Joint { a0: 2.0, a1: 0.1, a2: 0.01 },
    ] {
        let form = law.form();
        let c = law.coefficients();
        let fx = c[0] + c[1] * x.ln() + c[2] / x;
        let analytic: Vec<f64> = match form {
            LawForm::Multiplicative => {
                let fr = c[3] + c[4] * r.ln() + c[5] / r;
                vec![fr * l, x.ln() * fr * l, fr * l / x, fx * l, fx * r.ln() * l, fx * l / r]
            }
            LawForm::Additive => vec![1.0, x.ln(), 1.0 / x, r.ln(), 1.0 / r],
            LawForm::Joint => {
                let y = x * r;
                vec![l, y.ln() * l, l / y]
            }
        };
        for k in 0..c.len() {
            let h = 1e-7 * c[k].abs().max(1.0);
            let mut p = c.clone();
            p[k] += h;
            let fd = (ConditionalLaw::eval_raw(form, &p, x, r, l) - ConditionalLaw::eval_raw(form, &c, x, r, l)) / h;
            assert!((fd - analytic[k]).abs() <= 1e-5 * analytic[k].abs().max(1.0), "{form} c{k}: {fd} vs {}", analytic[k]);
        }
    }
}

#[test]
fn fits_are_deterministic() {
    let spec = SyntheticSpec { seed: 11, ..SyntheticSpec::default() };
    let (runs, _) = generate_runs(&corpus_subset(&["80M", "145M"]), &spec);
    let reference = spec.reference_source();
    let a = fit_conditional_law(&runs, LawForm::Multiplicative, &reference, &FitOptions::default()).unwrap();
    let b = fit_conditional_law(&runs, LawForm::Multiplicative, &reference, &FitOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn train_mse_tracks_noise_variance() {
    let sigma = 0.002;
    for seed in 0..4 {
        let spec = SyntheticSpec { sigma, seed, ..SyntheticSpec::default() };
        let (runs, _) = generate_runs(&corpus_subset(&["80M", "145M", "297M"]), &spec);
        let fit = fit_conditional_law(&runs, LawForm::Multiplicative, &spec.reference_source(), &FitOptions::default())
            .unwrap();
        assert!(runs.len() - fit.n_filtered >= 50);
        let ratio = fit.fit.train_mse / (sigma * sigma);
        assert!((0.5..=2.0).contains(&ratio), "seed {seed}: train_mse/sigma^2 = {ratio}");
    }
}

#[test]
fn synthetic_recovery_holds_across_seeds() {
    let sigma = 0.002;
    let opts = FitOptions::default();
    for seed in 0..8 {
        let spec = SyntheticSpec { sigma, seed, ..SyntheticSpec::default() };
        let reference = spec.reference_source();
        let (train, _) = generate_runs(&corpus_subset(&["80M", "145M"]), &spec);
        let (held, _) = generate_runs(&corpus_subset(&["297M"]), &spec);
        let held: Vec<_> = held
            .into_iter()
            .filter(|r| (opts.r_filter.0..=opts.r_filter.1).contains(&derived_metrics(&r.arch).unwrap().r))
            .collect();
        let fit = fit_conditional_law(&train, LawForm::Multiplicative, &reference, &opts).unwrap();
        let (x, r) = optimal_xr(&fit.law).unwrap().separable().unwrap();
        assert!((x / (0.0078 / 0.0974) - 1.0).abs() < 0.05, "seed {seed}: x*={x}");
        assert!((r / (0.0065 / 0.0063) - 1.0).abs() < 0.05, "seed {seed}: r*={r}");
        let ev = archscale::fit::evaluate_law(&fit.law, &held, &reference).unwrap();
        assert!(ev.mse <= 4.0 * sigma * sigma, "seed {seed}: mse {}", ev.mse);
        assert!(ev.spearman.unwrap() >= 0.95, "seed {seed}: spearman {:?}", ev.spearman);
    }
}

#[test]
fn solve_at_ratio_stays_near_budget() {
    for &(d, r) in &[(2048u64, 1.0), (2560, 3.6), (1536, 0.6), (3072, 4.5)] {
        let c = solve_at_ratio(975_175_680, 16, d, 64, 4, r, 64).unwrap();
        let n = c.params().n_nonembed as f64;
        assert!((n / 975_175_680.0 - 1.0).abs() < 0.01, "{c:?}");
    }
}

#[test]
fn noiseless_lm_is_exact_on_linear_problems() {
    let data: Vec<DataPoint> = (0..5).map(|i| DataPoint::new(vec![i as f64], 0.5 - 1.5 * i as f64)).collect();
    let fit = lm_fit(&|c: &[f64], f: &[f64]| c[0] + c[1] * f[0], &data, &[3.0, 3.0], &FitOptions::default()).unwrap();
    assert!(fit.sse < 1e-18);
}
