//! Loss-optimal shapes in closed form: the law's stationary point
//! `(x*, r*)`, realised at a parameter budget with hardware-friendly snapping.

use archscale::arch::derived_metrics;
use archscale::laws::optimal_xr;
use archscale::search::closed_form_architecture;
use archscale::{ConditionalLaw, Snapping};

fn main() {
    let cases = [
        ("small-model fit, 1B budget", ConditionalLaw::reference_multiplicative(), 975_175_680u64, 16, 64, 4),
        ("1B-only fit, 3B budget", ConditionalLaw::reference_multiplicative_1b(), 2_880_000_000, 28, 128, 3),
    ];
    for (label, law, n, layers, d_head, gqa) in cases {
        let (x, r) = optimal_xr(&law).unwrap().separable().unwrap();
        println!("{label}: x* = {x:.5}, r* = {r:.4}, factor product at optimum = {:.4}", law.evaluate(x, r, 1.0));
        let c = closed_form_architecture(&law, n, layers, d_head, gqa, Snapping::hardware_aligned()).unwrap();
        let m = derived_metrics(&c).unwrap();
        println!(
            "  -> {} layers={} d_model={} heads={} gqa={} f={} N={} (x={:.4}, r={:.3})\n",
            c.name, c.n_layers, c.d_model, c.n_head, c.gqa, c.f_size, c.params().n_nonembed, m.x, m.r
        );
    }
}
