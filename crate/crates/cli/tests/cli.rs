use std::path::Path;
use std::process::{Command, Output};

fn chebpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chebpd"))
        .args(args)
        .output()
        .expect("spawn chebpd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of `key=` on the first stdout line that has it.
fn field(text: &str, key: &str) -> String {
    let pat = format!("{key}=");
    text.split_whitespace()
        .find_map(|w| w.strip_prefix(&pat))
        .unwrap_or_else(|| panic!("no {key}= in {text}"))
        .to_string()
}

const SMALL: &[&str] = &[
    "--graph", "chain", "--nodes", "6", "--dim", "48", "--n-i", "4", "--spikes", "3",
];

fn small_with<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    SMALL.iter().copied().chain(extra.iter().copied()).collect()
}

#[test]
fn spectrum_of_chain3() {
    let o = chebpd(&["spectrum", "--graph", "chain", "--nodes", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((field(&out, "lambda2").parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
    assert!((field(&out, "lambdaN").parse::<f64>().unwrap() - 3.0).abs() < 1e-9);
    assert!((field(&out, "condition").parse::<f64>().unwrap() - 3.0).abs() < 1e-9);
    assert_eq!(field(&out, "edges"), "2");
}

#[test]
fn spectrum_with_degree_reports_effective_extremes() {
    let o = chebpd(&["spectrum", "--graph", "chain", "--nodes", "3", "--K", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let max: f64 = field(&stdout(&o), "effective_max").parse().unwrap();
    assert!((max - 6.0 / 7.0).abs() < 1e-9);
}

#[test]
fn spectrum_of_complete_graph_file_mentions_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k4.txt");
    std::fs::write(&path, "4\n1 2\n1 3\n1 4\n2 3\n2 4\n3 4\n").unwrap();
    let o = chebpd(&[
        "spectrum",
        "--graph",
        "file",
        "--edge-file",
        path.to_str().unwrap(),
        "--K",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("degenerate"));
}

#[test]
fn disconnected_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("disconnected.txt");
    std::fs::write(&path, "# two pieces\n4\n1 2\n3 4\n").unwrap();
    let o = chebpd(&["spectrum", "--graph", "file", "--edge-file", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("disconnected"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(chebpd(&["spectrum", "--graph", "chain"]).status.code(), Some(2));
    assert_eq!(chebpd(&["spectrum", "--nodes", "3"]).status.code(), Some(2));
    assert_eq!(chebpd(&["run", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(chebpd(&["frobnicate"]).status.code(), Some(2));
    // flags before the subcommand
    assert_eq!(chebpd(&["--graph", "chain", "spectrum"]).status.code(), Some(2));
}

#[test]
fn compare_needs_two_degrees() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["compare"];
    args.extend(small_with(&[
        "--K-list",
        "3",
        "--iters",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    let o = chebpd(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn run_writes_trace_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["run"];
    args.extend(small_with(&["--K", "3", "--iters", "200", "--out", out]));
    let o = chebpd(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let summary = text.lines().last().unwrap();
    assert!(summary.starts_with("K=3 grad_evals_to_0.1="), "{summary}");
    assert!(summary.contains(" comm_rounds="));
    for key in ["alpha", "beta", "rho", "lambda2", "lambdaN", "lambda_eff"] {
        field(&text, key);
    }

    let trace = std::fs::read_to_string(dir.path().join("trace_K3.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("iter,grad_evals,comm_rounds,eps1,eps2,eps1_ergodic,eps2_ergodic")
    );
    let last: Vec<&str> = lines.last().unwrap().split(',').collect();
    assert_eq!(last[0], "200");
    assert_eq!(last[1], "1200");
    assert_eq!(last[2], "600");

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta_K3.json")).unwrap()).unwrap();
    assert_eq!(meta["K"], 3);
    assert_eq!(meta["seed"], 0);
    assert_eq!(meta["edges"], 5);
    assert!(meta["beta"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_iterations_give_initial_record_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run"];
    args.extend(small_with(&["--iters", "0", "--out", dir.path().to_str().unwrap()]));
    let o = chebpd(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(dir.path().join("trace_K1.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,0,0,"));
}

#[test]
fn oversized_alpha_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run"];
    args.extend(small_with(&[
        "--alpha",
        "10",
        "--rho",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    let o = chebpd(&args);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("infeasible"), "{err}");
    assert!(err.contains("1/alpha - L_f = -9"), "{err}");
    assert!(err.contains("lambda_eff"), "{err}");
}

#[test]
fn missing_spec_file_is_io_error() {
    let o = chebpd(&["run", "--spec", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn malformed_spec_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(&path, "{\"d\": 3, \"surprise\": true}").unwrap();
    let o = chebpd(&["run", "--spec", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn inline_flags_override_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(
        &spec_path,
        r#"{"d": 40, "n": 5, "n_i": 3, "spikes": 2, "spike_amplitude": 1.0, "noise_var": 0.01,
            "l1_weight_total": 0.01, "graph": {"kind": "chain", "n": 5}, "seed": 4,
            "solver": {"K": 1, "iters": 30, "rho": 0.5}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = chebpd(&[
        "run",
        "--spec",
        spec_path.to_str().unwrap(),
        "--K",
        "2",
        "--iters",
        "12",
        "--record-every",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "rho"), "0.5");
    let trace = std::fs::read_to_string(out.join("trace_K2.csv")).unwrap();
    let iters: Vec<&str> = trace.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(iters, ["0", "4", "8", "12"]);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta_K2.json")).unwrap()).unwrap();
    assert_eq!(meta["spec"]["seed"], 4);
    assert_eq!(meta["spec"]["d"], 40);
}

#[test]
fn gen_writes_instance_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["gen"];
    args.extend(small_with(&["--seed", "9", "--out", dir.path().to_str().unwrap()]));
    let o = chebpd(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let problem = chebpd::Problem::load(&dir.path().join("problem.json")).unwrap();
    assert_eq!((problem.d(), problem.n()), (48, 6));
    let graph = chebpd::Graph::read_edge_list(&dir.path().join("graph.txt")).unwrap();
    assert_eq!(graph.edge_count(), 5);
    let signal: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("signal.json")).unwrap()).unwrap();
    assert_eq!(signal["support"].as_array().unwrap().len(), 3);
    assert!(Path::new(&dir.path().join("spec.json")).exists());
}

#[test]
fn compare_rows_are_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = [
        "compare",
        "--graph",
        "er",
        "--nodes",
        "12",
        "--avg-degree",
        "3",
        "--dim",
        "80",
        "--n-i",
        "4",
        "--spikes",
        "3",
        "--iters",
        "300",
        "--K-list",
        "1,5,5",
        "--out",
        out,
    ];
    let o = chebpd(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let summaries: Vec<&str> = text.lines().filter(|l| l.starts_with("K=")).collect();
    assert_eq!(summaries.len(), 3);
    assert!(summaries[0].starts_with("K=1 "));
    assert_eq!(summaries[1], summaries[2]);
    assert!(dir.path().join("trace_K1.csv").exists());
    assert!(dir.path().join("trace_K5.csv").exists());

    // a second invocation reproduces the table byte for byte
    let again = chebpd(&args);
    assert_eq!(stdout(&again), text);
}
