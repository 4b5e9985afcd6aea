//! Roofline throughput across fixed-budget families: vary GQA, hidden size
//! or the mlp-to-attention ratio while holding the others.

use archscale::arch::solve_at_ratio;
use archscale::cost::{estimate_throughput, max_feasible_batch};
use archscale::{HardwareProfile, Workload};

fn main() {
    let hw = HardwareProfile::a100_40g();
    let wl = Workload::new(16, 4096, 1024);
    let n = 975_175_680;
    println!("hardware {}, batch {}, {} in / {} out tokens\n", hw.name, wl.batch, wl.t_in, wl.t_out);
    let show = |label: String, c: &archscale::ArchitectureConfig| match estimate_throughput(c, &hw, &wl) {
        Ok(r) => println!(
            "{label:<14} {:<22} {:>9.0} tok/s  KV/seq {:>6.1} MiB  max batch {}",
            c.name,
            r.tokens_per_second,
            r.kv_bytes_per_sequence_at_max_context as f64 / (1 << 20) as f64,
            max_feasible_batch(c, &hw, wl.max_context()).unwrap()
        ),
        Err(e) => println!("{label:<14} {:<22} {e}", c.name),
    };
    for g in [1, 2, 4, 8, 16] {
        show(format!("gqa={g}"), &solve_at_ratio(n, 16, 2048, 64, g, 2.0, 64).unwrap());
    }
    println!();
    for d in [1536, 2048, 2560, 3072] {
        show(format!("d_model={d}"), &solve_at_ratio(n, 16, d, 64, 4, 2.0, 64).unwrap());
    }
    println!();
    for r in [0.5, 1.0, 2.0, 4.0] {
        show(format!("r={r}"), &solve_at_ratio(n, 16, 2048, 64, 4, r, 64).unwrap());
    }
}
