//! End-to-end tests of the `pncrit` binary: every subcommand, the exit-code
//! contract, the seed ladder, and byte-level report reproducibility.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn pncrit() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pncrit"));
    // Isolate every test from an ambient seed override.
    cmd.env_remove("PN_SEED");
    cmd
}

fn parse_stdout(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "command failed: {}\n{}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout must be one JSON document")
}

/// Assert a failure exit and return the machine-readable error object.
fn parse_failure(output: &Output, family: &str, code: i32) -> Value {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let err: Value =
        serde_json::from_slice(&output.stderr).expect("stderr must be one JSON error object");
    assert_eq!(err["schema"], 1);
    assert_eq!(err["error"]["family"], family);
    assert_eq!(err["error"]["exit_code"], code);
    err
}

fn write_file(path: &Path, text: &str) {
    let mut f = std::fs::File::create(path).unwrap();
    f.write_all(text.as_bytes()).unwrap();
}

/// A small positive two-column table with a three-valued label, built
/// from fixed formulas so tests need no RNG.
fn write_synthetic_table(path: &Path, rows: usize) {
    let mut text = String::from("a,b,grp\n");
    for i in 0..rows {
        let t = i as f64;
        let a = 1.5 + (t * 0.7368).sin() * 0.45 + (t * 0.1311).cos() * 0.35;
        let b = 2.5 + (t * 0.4177).sin() * 0.80 + (t * 0.0913).cos() * 0.40;
        let grp = ["x", "y", "z"][i % 3];
        text.push_str(&format!("{a},{b},{grp}\n"));
    }
    write_file(path, &text);
}

fn synthetic_categorical() -> Value {
    json!({
        "columns": ["grp"],
        "levels": [
            {"label": "x", "members": ["x"]},
            {"label": "yz", "members": ["y", "z"]}
        ]
    })
}

fn abalone_counts_csv() -> String {
    let labels = pncrit_verify::datasets::abalone_labels();
    let cells = pncrit_verify::datasets::abalone_cells();
    let mut text = String::from("label,count\n");
    for (label, count) in labels.iter().zip(&cells) {
        text.push_str(&format!("{label},{count}\n"));
    }
    text
}

#[test]
fn threshold_matches_the_closed_form_budget() {
    let out = pncrit().args(["threshold", "--alpha", "0.05"]).output().unwrap();
    let doc = parse_stdout(&out);
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["command"], "threshold");
    let c = doc["threshold"]["c"].as_f64().unwrap();
    assert!((c - 8.0 * 0.05 * 0.05).abs() < 1e-15);

    let exact = pncrit()
        .args(["threshold", "--alpha", "0.05", "--exact"])
        .output()
        .unwrap();
    let doc = parse_stdout(&exact);
    let c_exact = doc["threshold"]["c"].as_f64().unwrap();
    // The exact inversion lands near, but not on, the approximation.
    assert!((c_exact - 0.02).abs() < 5e-4);
    assert!(c_exact != c);
    let min_t = doc["threshold"]["min_t"].as_f64().unwrap();
    assert!((min_t - 0.45).abs() < 1e-6);
}

#[test]
fn sample_size_reproduces_the_categorical_plan() {
    let at = |alpha: &str| {
        let out = pncrit()
            .args([
                "sample-size",
                "--p",
                "62",
                "--m-hat",
                "36128.33",
                "--alpha",
                alpha,
            ])
            .output()
            .unwrap();
        parse_stdout(&out)["required_n"].as_u64().unwrap()
    };
    assert_eq!(at("0.05"), 1642);
    assert_eq!(at("0.01"), 38847);
}

#[test]
fn multinomial_screens_the_reference_counts() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    write_file(&counts, &abalone_counts_csv());

    let out = pncrit()
        .args(["multinomial", "--counts"])
        .arg(&counts)
        .output()
        .unwrap();
    let doc = parse_stdout(&out);
    assert_eq!(doc["data"]["cells"], 63);
    assert_eq!(doc["data"]["n"], 4177);
    let m_hat = doc["data"]["m_hat"].as_f64().unwrap();
    assert!((m_hat - 36128.328218).abs() < 1e-3);
    let first = doc["risk"]["first_order"].as_f64().unwrap();
    let second = doc["risk"]["second_order"].as_f64().unwrap();
    let total = doc["risk"]["total"].as_f64().unwrap();
    assert!((first - 0.007421).abs() < 1e-6);
    assert!((1.72e-4..=1.73e-4).contains(&second));
    assert!(total < 0.02);
    assert_eq!(doc["risk"]["decision"], "Pass");

    // First order only on request.
    let out = pncrit()
        .args(["multinomial", "--order", "first", "--counts"])
        .arg(&counts)
        .output()
        .unwrap();
    let doc = parse_stdout(&out);
    assert_eq!(doc["risk"]["second_order"].as_f64().unwrap(), 0.0);
}

#[test]
fn zero_cells_fail_unless_rescued_by_a_pseudo_count() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    write_file(&counts, "label,count\nA,5\nB,0\nC,7\n");

    let out = pncrit()
        .args(["multinomial", "--counts"])
        .arg(&counts)
        .output()
        .unwrap();
    let err = parse_failure(&out, "numeric", 4);
    assert!(err["error"]["message"].as_str().unwrap().contains("cell"));

    let rescued = pncrit()
        .args(["multinomial", "--pseudo-count", "1", "--counts"])
        .arg(&counts)
        .output()
        .unwrap();
    let doc = parse_stdout(&rescued);
    // The observed sample size is preserved; only the mass estimate
    // comes from the smoothed counts.
    assert_eq!(doc["data"]["n"], 12);
    assert_eq!(doc["risk"]["n"], 12);
    assert_eq!(doc["data"]["screened_counts"], json!([6, 1, 8]));
    assert!(doc["risk"]["total"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["risk"]["decision"], "Fail");
}

#[test]
fn config_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("t.csv");
    write_synthetic_table(&data, 60);

    // Malformed JSON.
    let bad = dir.path().join("bad.json");
    write_file(&bad, "{\"alpha\": 0.05,,}");
    let out = pncrit()
        .args(["criterion", "--config"])
        .arg(&bad)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    parse_failure(&out, "config", 2);

    // Well-formed JSON, out-of-range alpha.
    let cfg = dir.path().join("alpha.json");
    write_file(
        &cfg,
        &json!({
            "alpha": 0.9,
            "model": {"kind": "quadratic", "columns": ["a"], "mean": [0.0], "q": [[1.0]]}
        })
        .to_string(),
    );
    let out = pncrit()
        .args(["criterion", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    let err = parse_failure(&out, "config", 2);
    assert!(err["error"]["message"].as_str().unwrap().contains("alpha"));

    // A non-PD precision matrix is a config mistake, not a numeric one.
    let notpd = dir.path().join("notpd.json");
    write_file(
        &notpd,
        &json!({
            "alpha": 0.05,
            "model": {"kind": "quadratic", "columns": ["a", "b"],
                       "mean": [0.0, 0.0], "q": [[1.0, 2.0], [2.0, 1.0]]}
        })
        .to_string(),
    );
    let out = pncrit()
        .args(["criterion", "--config"])
        .arg(&notpd)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    parse_failure(&out, "config", 2);
}

#[test]
fn data_problems_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write_file(
        &cfg,
        &json!({
            "alpha": 0.05,
            "model": {"kind": "quadratic", "columns": ["a", "missing"],
                       "mean": [0.0, 0.0], "q": [[1.0, 0.0], [0.0, 1.0]]}
        })
        .to_string(),
    );
    let data = dir.path().join("t.csv");
    write_synthetic_table(&data, 60);
    let out = pncrit()
        .args(["criterion", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    let err = parse_failure(&out, "data", 3);
    assert!(err["error"]["message"].as_str().unwrap().contains("missing"));

    // Non-numeric cell.
    let cfg2 = dir.path().join("cfg2.json");
    write_file(
        &cfg2,
        &json!({
            "alpha": 0.05,
            "model": {"kind": "quadratic", "columns": ["a", "b"],
                       "mean": [0.0, 0.0], "q": [[1.0, 0.0], [0.0, 1.0]]}
        })
        .to_string(),
    );
    let broken = dir.path().join("broken.csv");
    write_file(&broken, "a,b,grp\n1.0,2.0,x\n1.1,oops,y\n");
    let out = pncrit()
        .args(["criterion", "--config"])
        .arg(&cfg2)
        .arg("--data")
        .arg(&broken)
        .output()
        .unwrap();
    let err = parse_failure(&out, "data", 3);
    let message = err["error"]["message"].as_str().unwrap();
    assert!(message.contains("'b'") && message.contains("oops"));

    // Unknown category value.
    let cfg3 = dir.path().join("cfg3.json");
    write_file(
        &cfg3,
        &json!({
            "alpha": 0.05,
            "seed": 3,
            "model": {"kind": "generic", "continuous": ["a"],
                       "categorical": synthetic_categorical(),
                       "basis": {"singles": true}}
        })
        .to_string(),
    );
    let odd = dir.path().join("odd.csv");
    write_file(&odd, "a,b,grp\n1.0,2.0,x\n1.1,2.1,w\n");
    let out = pncrit()
        .args(["criterion", "--config"])
        .arg(&cfg3)
        .arg("--data")
        .arg(&odd)
        .output()
        .unwrap();
    let err = parse_failure(&out, "data", 3);
    assert!(err["error"]["message"].as_str().unwrap().contains("'w'"));
}

#[test]
fn seed_ladder_flag_env_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("t.csv");
    write_synthetic_table(&data, 240);
    let base_cfg = json!({
        "alpha": 0.1,
        "order": "second",
        "model": {"kind": "generic", "continuous": ["a", "b"],
                   "categorical": synthetic_categorical(),
                   "basis": {"singles": true, "pairwise": true, "cat_cross": true}},
        "sampler": {"n_chains": 2, "burn_in": 300, "steps": 1800,
                     "thin": 2, "initial_scale": 0.25}
    });

    // No seed anywhere: the sampled path must refuse to run.
    let noseed = dir.path().join("noseed.json");
    write_file(&noseed, &base_cfg.to_string());
    let out = pncrit()
        .args(["criterion", "--config"])
        .arg(&noseed)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    let err = parse_failure(&out, "config", 2);
    assert!(err["error"]["message"].as_str().unwrap().contains("seed"));

    // Config seed.
    let mut with_seed = base_cfg.clone();
    with_seed["seed"] = json!(11);
    let seeded = dir.path().join("seeded.json");
    write_file(&seeded, &with_seed.to_string());
    let run = |extra_env: Option<(&str, &str)>, args: &[&str]| -> Value {
        let mut cmd = pncrit();
        cmd.args(["criterion", "--config"])
            .arg(&seeded)
            .arg("--data")
            .arg(&data)
            .args(args);
        if let Some((k, v)) = extra_env {
            cmd.env(k, v);
        }
        parse_stdout(&cmd.output().unwrap())
    };

    let from_config = run(None, &[]);
    assert_eq!(from_config["config"]["seed"], 11);
    let from_env = run(Some(("PN_SEED", "77")), &[]);
    assert_eq!(from_env["config"]["seed"], 77);
    let from_flag = run(Some(("PN_SEED", "77")), &["--seed", "5"]);
    assert_eq!(from_flag["config"]["seed"], 5);
    // Different seeds, different draws, different fits.
    assert_ne!(
        from_config["fit"]["theta_hat"],
        from_env["fit"]["theta_hat"]
    );

    let bad_env = {
        let mut cmd = pncrit();
        cmd.args(["criterion", "--config"])
            .arg(&seeded)
            .arg("--data")
            .arg(&data)
            .env("PN_SEED", "not-a-number");
        cmd.output().unwrap()
    };
    parse_failure(&bad_env, "config", 2);
}

#[test]
fn quadratic_criterion_runs_the_closed_form_route() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("t.csv");
    write_synthetic_table(&data, 400);
    let cfg = dir.path().join("cfg.json");
    write_file(
        &cfg,
        &json!({
            "alpha": 0.05,
            "order": "second",
            "model": {"kind": "quadratic", "columns": ["a", "b"],
                       "mean": [1.5, 2.5], "q": [[2.0, 0.3], [0.3, 1.5]]}
        })
        .to_string(),
    );
    let out = pncrit()
        .args(["criterion", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    let doc = parse_stdout(&out);
    assert_eq!(doc["model"]["kind"], "quadratic");
    assert_eq!(doc["model"]["p"], 2);
    assert_eq!(doc["fit"]["path"], "ClosedForm");
    assert_eq!(doc["risk"]["method"], "ExpFamSecondOrder");
    assert!(doc["fit"]["residual"].as_f64().unwrap() < 1e-10);
    let first = doc["risk"]["first_order"].as_f64().unwrap();
    assert!(first.is_finite() && first > 0.0);
    // No sampling happened, so no sampling block is reported.
    assert!(doc.get("sampling").is_none());
}

#[test]
fn generic_reports_are_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("wine.csv");
    let table = pncrit_verify::winegen::generate(20_240_601);
    table.write_csv(&data).unwrap();

    let levels: Vec<Value> = (3..=8)
        .map(|g| json!({"label": g.to_string(), "members": [g.to_string()]}))
        .collect();
    let cfg_path = dir.path().join("cfg.json");
    write_file(
        &cfg_path,
        &json!({
            "alpha": 0.05,
            "order": "first",
            "model": {
                "kind": "generic",
                "continuous": ["x01","x02","x03","x04","x05","x06","x07","x08","x09","x10","x11"],
                "categorical": {"columns": ["grade"], "levels": levels},
                "basis": {"singles": true, "pairwise": true, "correlation_cutoff": 0.95}
            },
            "sampler": {"n_chains": 4, "burn_in": 1000, "steps": 6000,
                         "thin": 5, "initial_scale": 0.2},
            "seed": 101,
            "base_rows": 800
        })
        .to_string(),
    );

    let report_a = dir.path().join("a.json");
    let report_b = dir.path().join("b.json");
    for report in [&report_a, &report_b] {
        let out = pncrit()
            .args(["criterion", "--config"])
            .arg(&cfg_path)
            .arg("--data")
            .arg(&data)
            .arg("--output")
            .arg(report)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes_a = std::fs::read(&report_a).unwrap();
    let bytes_b = std::fs::read(&report_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same config and seed must give identical bytes");

    let doc: Value = serde_json::from_slice(&bytes_a).unwrap();
    // The engineered collinear terms fall to the cutoff: 66 down to 47.
    assert_eq!(doc["model"]["filter"]["initial_terms"], 66);
    assert_eq!(doc["model"]["filter"]["dropped"].as_array().unwrap().len(), 19);
    assert_eq!(doc["model"]["p"], 47);
    let dropped_indices: Vec<u64> = doc["model"]["filter"]["dropped"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["index"].as_u64().unwrap())
        .collect();
    // The duplicated single columns are among the casualties.
    assert!(dropped_indices.contains(&8) && dropped_indices.contains(&10));

    assert_eq!(doc["data"]["rows"], 1599);
    assert_eq!(doc["data"]["base_rows"], 800);
    assert_eq!(doc["risk"]["method"], "GeneralFirstOrder");
    let first = doc["risk"]["first_order"].as_f64().unwrap();
    let nominal = 47.0 / (2.0 * 800.0);
    assert!(
        first > 0.5 * nominal && first < 2.0 * nominal,
        "first order {first} strays from the nominal {nominal}"
    );
    let total = doc["risk"]["total"].as_f64().unwrap();
    let c = doc["risk"]["threshold"]["c"].as_f64().unwrap();
    let decision = doc["risk"]["decision"].as_str().unwrap();
    assert_eq!(decision, if total <= c { "Pass" } else { "Fail" });
    assert!(doc["fit"]["path"]["SampledNewton"].is_object());
    assert!(doc["sampling"]["curvature_draws"].as_u64().unwrap() > 0);
}

#[test]
fn compare_gates_and_ranks_two_bases() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("t.csv");
    write_synthetic_table(&data, 600);
    let cat = synthetic_categorical();
    let cfg_path = dir.path().join("cmp.json");
    write_file(
        &cfg_path,
        &json!({
            "alpha": 0.1,
            "data": data.to_str().unwrap(),
            "first": {"kind": "generic", "continuous": ["a", "b"], "categorical": cat,
                       "basis": {"singles": true}},
            "second": {"kind": "generic", "continuous": ["a", "b"], "categorical": cat,
                        "basis": {"singles": true, "pairwise": true, "cat_cross": true}},
            "sampler": {"n_chains": 2, "burn_in": 400, "steps": 2400,
                         "thin": 2, "initial_scale": 0.25},
            "psi_draws": 40000,
            "seed": 7
        })
        .to_string(),
    );
    let out = pncrit()
        .args(["compare", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    let doc = parse_stdout(&out);
    assert_eq!(doc["first"]["model"]["p"], 2);
    assert_eq!(doc["second"]["model"]["p"], 5);
    let cmp = &doc["comparison"];
    // Plenty of data for both candidates at these sizes: the gate is open
    // and the verdict ranks them.
    assert_eq!(cmp["first"]["pn_pass"], true);
    assert_eq!(cmp["second"]["pn_pass"], true);
    assert!(cmp["verdict"]["Comparable"].is_object());
    let margin = cmp["verdict"]["Comparable"]["margin"].as_f64().unwrap();
    assert!(margin.is_finite());
    for side in ["first", "second"] {
        let score = &cmp[side];
        assert!(score["corrected_cross_entropy"].as_f64().unwrap().is_finite());
        assert!(score["tic"].as_f64().unwrap().is_finite());
        assert!(score["trace_ratio"].as_f64().unwrap() > 0.0);
    }

    // Candidates reading different columns cannot share a table.
    let mismatched = dir.path().join("mismatch.json");
    write_file(
        &mismatched,
        &json!({
            "alpha": 0.1,
            "data": data.to_str().unwrap(),
            "first": {"kind": "generic", "continuous": ["a"],
                       "basis": {"singles": true}},
            "second": {"kind": "generic", "continuous": ["a", "b"],
                        "basis": {"singles": true}},
            "seed": 7
        })
        .to_string(),
    );
    let out = pncrit()
        .args(["compare", "--config"])
        .arg(&mismatched)
        .output()
        .unwrap();
    parse_failure(&out, "config", 2);
}

#[test]
fn simulate_replicates_a_known_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sim.json");
    write_file(
        &cfg_path,
        &json!({
            "kind": {"Multinomial": {"probs": [0.2, 0.3, 0.5]}},
            "p": 2,
            "n": 200,
            "replications": 2000,
            "seed": 42
        })
        .to_string(),
    );
    let run = || {
        pncrit()
            .args(["simulate", "--config"])
            .arg(&cfg_path)
            .output()
            .unwrap()
    };
    let out = run();
    let doc = parse_stdout(&out);
    let result = &doc["result"];
    let empirical = result["empirical_risk"].as_f64().unwrap();
    let predicted = result["predicted_first_order"].as_f64().unwrap();
    assert!((predicted - 2.0 / 400.0).abs() < 1e-15);
    assert!((empirical - predicted).abs() / predicted < 0.15);
    assert!(result["z_score"].as_f64().unwrap().abs() < 4.0);
    assert_eq!(result["discarded"], 0);
    // Same config, same bytes.
    assert_eq!(run().stdout, out.stdout);

    // Too few replications is a config problem.
    let tiny = dir.path().join("tiny.json");
    write_file(
        &tiny,
        &json!({
            "kind": {"Multinomial": {"probs": [0.5, 0.5]}},
            "p": 1, "n": 50, "replications": 10, "seed": 1
        })
        .to_string(),
    );
    let out = pncrit().args(["simulate", "--config"]).arg(&tiny).output().unwrap();
    parse_failure(&out, "config", 2);
}

#[test]
fn output_files_are_written_atomically_in_place() {
    let dir = tempfile::tempdir().unwrap();
    let target: PathBuf = dir.path().join("report.json");
    let out = pncrit()
        .args(["threshold", "--alpha", "0.01", "--output"])
        .arg(&target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty(), "file output must not echo to stdout");
    let doc: Value = serde_json::from_slice(&std::fs::read(&target).unwrap()).unwrap();
    assert!((doc["threshold"]["c"].as_f64().unwrap() - 0.0008).abs() < 1e-15);
    // No stray temp files stay behind.
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path() != target)
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}
