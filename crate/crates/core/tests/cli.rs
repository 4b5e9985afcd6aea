use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use archscale::io::save_law;
use archscale::runs::write_runs_csv;
use archscale::synthetic::{corpus_subset, generate_runs, SyntheticSpec};
use archscale::ConditionalLaw;

fn archscale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_archscale"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_out(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend(["--output", "json"]);
    let out = archscale(&full);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn write_synthetic(path: &Path, sizes: &[&str], seed: u64) {
    let spec = SyntheticSpec { seed, ..SyntheticSpec::default() };
    let (runs, _) = generate_runs(&corpus_subset(sizes), &spec);
    write_runs_csv(std::fs::File::create(path).unwrap(), &runs).unwrap();
}

#[test]
fn arch_info_reports_derived_quantities() {
    let v = json_out(&["arch", "info", "--config", "Panda-1B", "--context", "4096"]);
    assert_eq!(v["n_nonembed"], 975_175_680u64);
    assert_eq!(v["d_q"], 4608);
    assert_eq!(v["d_kv"], 1152);
    assert_eq!(v["decode_flops_per_token"], 2_554_331_136u64);
}

#[test]
fn enumerate_emits_csv() {
    let out = archscale(&[
        "arch", "enumerate", "--n-target", "975e6", "--layers", "16", "--d-head", "64", "--gqa", "4",
        "--d-values", "2048,2560", "--r-values", "1,4", "--output", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "name,n_layers,d_model,n_head,d_head,gqa,f_size,n_nonembed,x,r");
    assert_eq!(lines.count(), 4);
}

#[test]
fn fit_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let held = dir.path().join("held.csv");
    let law = dir.path().join("law.json");
    write_synthetic(&train, &["80M", "145M"], 1);
    write_synthetic(&held, &["297M"], 2);
    let train_s = train.to_str().unwrap();
    let held_s = held.to_str().unwrap();
    let law_s = law.to_str().unwrap();

    let report = json_out(&[
        "fit", "--data", train_s, "--form", "multiplicative", "--ref", "chinchilla:hoffmann", "--holdout", held_s,
        "--out", law_s,
    ]);
    let x = report["x_star"].as_f64().unwrap();
    let r = report["r_star"].as_f64().unwrap();
    assert!((x / 0.08008 - 1.0).abs() < 0.05, "{report}");
    assert!((r / 1.0317 - 1.0).abs() < 0.05, "{report}");
    assert!(report["n_filtered"].as_u64().unwrap() > 0);
    assert!(report["holdout_mse"].as_f64().unwrap() < 1.6e-5);

    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&law).unwrap()).unwrap();
    assert_eq!(saved["format_version"], 1);
    assert_eq!(saved["form"], "multiplicative");
    assert_eq!(saved["log_base"], "natural");

    let ev = json_out(&["eval", "--law", law_s, "--data", held_s, "--ref", "chinchilla:hoffmann"]);
    assert!(ev["spearman"].as_f64().unwrap() > 0.9);

    let p = json_out(&["predict", "--law", law_s, "--config", "Panda-1B", "--d-tokens", "1e11"]);
    assert!(p["predicted_loss"].as_f64().unwrap() > p["l_opt"].as_f64().unwrap() * 0.99);

    // Progressive protocol with an empirical reference on each side.
    let emp = json_out(&["fit", "--data", train_s, "--sizes", "80M", "--out", law_s, "--holdout", held_s]);
    assert!(emp["holdout_spearman"].is_number());
}

#[test]
fn optimum_reproduces_the_panda_shape() {
    let dir = tempfile::tempdir().unwrap();
    let law = dir.path().join("law.json");
    save_law(&law, &ConditionalLaw::reference_multiplicative(), None).unwrap();
    let v = json_out(&[
        "optimum", "--law", law.to_str().unwrap(), "--n-target", "975175680", "--layers", "16", "--d-head", "64",
        "--gqa", "4",
    ]);
    assert_eq!(v["d_model"], 2560);
    assert_eq!(v["n_head"], 72);
    assert_eq!(v["f_size"], 4096);
}

#[test]
fn optimize_writes_search_report() {
    let dir = tempfile::tempdir().unwrap();
    let law = dir.path().join("law.json");
    let report = dir.path().join("search.csv");
    save_law(&law, &ConditionalLaw::reference_multiplicative(), None).unwrap();
    let v = json_out(&[
        "optimize", "--law", law.to_str().unwrap(), "--n-target", "973078528", "--d-tokens", "97307852800",
        "--loss-budget", "2.4291", "--hardware", "a100-40g", "--batch", "1", "--input-tokens", "4096",
        "--output-tokens", "1024", "--grid", "layers=16;d_head=64;gqa=4;d=2048,2560,3072;r=1,2,3,4,5",
        "--report", report.to_str().unwrap(),
    ]);
    assert!(v["best_predicted_loss"].as_f64().unwrap() <= 2.4291);
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("name,d_model,n_head,gqa,f_size,x,r,predicted_loss,tokens_per_second,feasible,pareto\n"));
    assert_eq!(csv.lines().count() - 1, v["rows"].as_array().unwrap().len());

    let opt = json_out(&[
        "optimize", "--law", law.to_str().unwrap(), "--n-target", "975175680", "--d-tokens", "1e11",
        "--loss-budget", "optimal", "--grid", "layers=16;d_head=64;r=1;d_multiple=512",
    ]);
    assert_eq!(opt["d_model"], 2560);
    assert_eq!(opt["step"], "closed_form");
}

#[test]
fn gqa_search_from_measured_losses() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.json");
    let evals = dir.path().join("evals.csv");
    std::fs::write(
        &base,
        r#"{"name":"base","n_layers":16,"d_model":2560,"n_head":36,"d_head":64,"gqa":4,"f_size":6144}"#,
    )
    .unwrap();
    std::fs::write(&evals, "gqa,loss\n4,2.800\n6,2.801\n9,2.8015\n12,2.81\n18,2.80\n").unwrap();
    let v = json_out(&["gqa-search", "--config", base.to_str().unwrap(), "--evals", evals.to_str().unwrap()]);
    assert_eq!(v["chosen_gqa"], 9);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn throughput_report() {
    let v = json_out(&[
        "throughput", "--config", "LLaMA-3.2-1B", "--hardware", "a100-40g", "--batch", "1", "--input-tokens",
        "4096", "--output-tokens", "1024",
    ]);
    assert_eq!(v["max_context"], 5120);
    assert!(v["tokens_per_second"].as_f64().unwrap() > 0.0);
    let table = archscale(&["throughput", "--config", "LLaMA-3.2-1B"]);
    assert!(String::from_utf8(table.stdout).unwrap().contains("tokens_per_second"));
}

#[test]
fn exit_codes() {
    let bad_flag = archscale(&["fit", "--form", "quadratic"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    let missing = archscale(&["arch", "info", "--config", "/nonexistent/shape.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let law = dir.path().join("law.json");
    let flat = ConditionalLaw::Multiplicative { a0: 2.7, a1: -0.1, a2: 0.0078, b0: 0.387, b1: 0.0063, b2: 0.0065 };
    save_law(&law, &flat, None).unwrap();
    let numerical = archscale(&[
        "optimum", "--law", law.to_str().unwrap(), "--n-target", "1e9", "--layers", "16", "--d-head", "64",
    ]);
    assert_eq!(numerical.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&numerical.stderr).contains("no interior optimum"));

    let too_much = archscale(&[
        "throughput", "--config", "Panda-1B", "--batch", "1000", "--input-tokens", "4096", "--output-tokens", "1024",
    ]);
    assert_eq!(too_much.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&too_much.stderr).contains("maximal feasible batch is"));
}
