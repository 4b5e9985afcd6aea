use archscale::io::{load_gqa_evals, load_hardware, load_law, save_law, write_search_csv, IoError};
use archscale::laws::{default_probe_grid, laws_equivalent};
use archscale::runs::{load_runs, write_runs_csv, RunFormat};
use archscale::search::CandidateEvaluation;
use archscale::synthetic::{corpus_subset, generate_runs, SyntheticSpec};
use archscale::{ArchitectureConfig, ConditionalLaw};

#[test]
fn runs_round_trip_through_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.csv");
    let (runs, _) = generate_runs(&corpus_subset(&["1B"]), &SyntheticSpec::default());
    write_runs_csv(std::fs::File::create(&path).unwrap(), &runs).unwrap();
    let loaded = load_runs(&path, RunFormat::from_path(&path).unwrap()).unwrap();
    assert_eq!(loaded.records.len(), 17);
    for (a, b) in runs.iter().zip(&loaded.records) {
        assert!(a.arch.same_shape(&b.arch));
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.d_tokens, b.d_tokens);
    }
    assert!(loaded.duplicate_rows.is_empty());
}

#[test]
fn json_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.json");
    std::fs::write(&path, r#"[{"corpus":"1B/v13","d_tokens":1e11,"loss":2.8}]"#).unwrap();
    let loaded = load_runs(&path, RunFormat::Json).unwrap();
    assert_eq!(loaded.records[0].n_nonembed(), 975_175_680);
    let missing = load_runs(&dir.path().join("none.csv"), RunFormat::Csv).unwrap_err();
    assert!(missing.to_string().contains("none.csv"));
}

#[test]
fn law_files_are_versioned() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("law.json");
    let law = ConditionalLaw::reference_multiplicative_1b();
    save_law(&path, &law, None).unwrap();
    assert!(laws_equivalent(&law, &load_law(&path).unwrap().law, &default_probe_grid()));

    let text = std::fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
    std::fs::write(&path, text).unwrap();
    assert!(matches!(load_law(&path), Err(IoError::UnsupportedVersion { found: 7, supported: 1 })));
}

#[test]
fn hardware_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hw.json");
    std::fs::write(
        &path,
        r#"{"name":"toy","peak_flops":1e14,"mem_bandwidth":1e12,"mem_capacity":2.4e10}"#,
    )
    .unwrap();
    let hw = load_hardware(path.to_str().unwrap()).unwrap();
    assert_eq!((hw.bytes_per_weight, hw.bytes_per_kv), (2, 2));
    std::fs::write(&path, r#"{"name":"bad","peak_flops":-1,"mem_bandwidth":1e12,"mem_capacity":1}"#).unwrap();
    assert!(load_hardware(path.to_str().unwrap()).is_err());
}

#[test]
fn gqa_eval_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("evals.csv");
    std::fs::write(&path, "gqa,loss\n4,2.8\n8,2.81\n").unwrap();
    assert_eq!(load_gqa_evals(&path).unwrap(), vec![(4, 2.8), (8, 2.81)]);
    std::fs::write(&path, "gqa,loss\n4,-1\n").unwrap();
    assert!(load_gqa_evals(&path).unwrap_err().to_string().contains("row 1"));
}

#[test]
fn search_csv_columns() {
    let c = CandidateEvaluation {
        arch: ArchitectureConfig::new("d2560-h72-g4-f4096", 16, 2560, 72, 64, 4, 4096),
        x: 0.082,
        r: 1.067,
        n_nonembed: 975_175_680,
        predicted_loss: 2.43,
        modeled_throughput: 700.0,
        fits_memory: true,
        feasible: true,
        dominated: true,
    };
    let mut buf = Vec::new();
    write_search_csv(&mut buf, &[c]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "name,d_model,n_head,gqa,f_size,x,r,predicted_loss,tokens_per_second,feasible,pareto");
    assert!(rows[1].ends_with(",true,false"));
}
