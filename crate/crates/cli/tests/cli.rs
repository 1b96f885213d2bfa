use std::path::Path;
use std::process::{Command, Output};

use dfopt_core::fixtures::product_greedy_counterexample;
use dfopt_core::io::{instance_from_json, instance_to_json};
use dfopt_core::model::{choice_probability, Assortment, Instance};
use serde_json::Value;

fn dfopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfopt")).args(args).output().expect("dfopt runs")
}

fn dfopt_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfopt")).args(args).env(key, value).output().expect("dfopt runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn generated_instance_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"n":10,"num_trees":5,"shape":{"type":"t3","leaves":8},"seed":7}"#);
    let out = dir.path().join("i.json");
    assert!(dfopt(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let inst: Instance<f64> = instance_from_json(&text).unwrap();
    assert_eq!((inst.n(), inst.forest.len()), (10, 5));
    assert!(inst.forest.trees().iter().all(|t| t.num_leaves() == 8));
    assert_eq!(instance_to_json(&inst) + "\n", text);
}

#[test]
fn depth_one_balanced_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"n":1,"num_trees":1,"shape":{"type":"t1","depth":1}}"#);
    let out = dfopt(&["generate", "--config", &cfg]);
    assert!(out.status.success());
    let inst: Instance<f64> = instance_from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(inst.forest.trees()[0].num_leaves(), 2);
}

#[test]
fn config_list_uses_derived_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let one = r#"{"n":6,"num_trees":2,"shape":{"type":"t2","depth":2},"seed":999}"#;
    let cfg = write(dir.path(), "grid.json", &format!("[{one},{one},{one}]"));
    let out_dir = dir.path().join("out");
    let out = dfopt(&["generate", "--config", &cfg, "--seed", "40", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let single = write(dir.path(), "one.json", one);
    for i in 0..3 {
        let file = std::fs::read(out_dir.join(format!("instance_{i:03}.json"))).unwrap();
        let seed = (40 + i).to_string();
        let again = dfopt(&["generate", "--config", &single, "--seed", &seed]);
        assert_eq!(file, again.stdout, "file {i} should match seed {seed}");
    }
}

#[test]
fn cnf_input_builds_the_clause_forest() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = write(dir.path(), "f.cnf", "c two clauses\np cnf 3 2\n1 -2 3 0\n-1 -2 -3 0\n");
    let out = dfopt(&["generate", "--cnf", &cnf]);
    let inst = write(dir.path(), "i.json", std::str::from_utf8(&out.stdout).unwrap());
    let r = report(&dfopt(&["solve", "--instance", &inst, "--method", "brute", "--exact"]));
    assert_eq!(r["value_exact"], "1");
}

#[test]
fn benders_solves_counterexample_to_twenty() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, _) = product_greedy_counterexample::<f64>().unwrap();
    let path = write(dir.path(), "c.json", &instance_to_json(&inst));
    for kind in ["leaf", "split", "product"] {
        let r = report(&dfopt(&["solve", "--instance", &path, "--method", &format!("benders:{kind}")]));
        assert_eq!(r["value"], 20.0);
        assert_eq!(r["gap"], 0.0);
        assert_eq!(r["optimal"], true);
    }
}

#[test]
fn roa_on_one_product() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"n":1,"revenues":["4"],"trees":[
        {"nodes":[{"split":{"product":1,"left":1,"right":2}},{"leaf":{"option":1}},{"leaf":{"option":0}}],"root":0},
        {"nodes":[{"leaf":{"option":0}}],"root":0}],"lambda":["0.75","0.25"]}"#;
    let path = write(dir.path(), "one.json", doc);
    let inst: Instance<f64> = instance_from_json(doc).unwrap();
    let p = choice_probability(&inst, 1, &Assortment::full(1)).unwrap();
    let r = report(&dfopt(&["solve", "--instance", &path, "--method", "roa"]));
    assert_eq!(r["value"], 4.0 * p);
    assert_eq!(r["assortment"], serde_json::json!([1]));
    assert!(r["bound"].is_null());
}

#[test]
fn single_tree_product_formulation_closes_at_the_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"n":8,"num_trees":1,"shape":{"type":"t3","leaves":10},"seed":3}"#);
    let inst = dir.path().join("i.json");
    assert!(dfopt(&["generate", "--config", &cfg, "--out", inst.to_str().unwrap()]).status.success());
    let inst = inst.to_str().unwrap();
    let r = report(&dfopt(&["solve", "--instance", inst, "--method", "monolithic:product"]));
    let brute = report(&dfopt(&["solve", "--instance", inst, "--method", "brute"]));
    assert_eq!(r["gap"], 0.0);
    assert_eq!(r["value"], brute["value"]);
    assert_eq!(r["details"]["nodes"], 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"n":12,"num_trees":10,"shape":{"type":"t3","leaves":8},"seed":1}"#);
    let inst = dir.path().join("i.json");
    assert!(dfopt(&["generate", "--config", &cfg, "--out", inst.to_str().unwrap()]).status.success());
    let inst = inst.to_str().unwrap();

    let partial = dfopt(&["solve", "--instance", inst, "--method", "monolithic:leaf", "--budget-nodes", "1"]);
    assert_eq!(partial.status.code(), Some(3));
    let r: Value = serde_json::from_slice(&partial.stdout).unwrap();
    assert_eq!(r["optimal"], false);
    assert!(r["bound"].as_f64().unwrap() >= r["value"].as_f64().unwrap());

    for bad in [
        vec!["solve", "--instance", inst, "--method", "simplex"],
        vec!["solve", "--instance", inst, "--method", "dnc"],
        vec!["solve", "--instance", inst, "--method", "ls", "--cardinality", "3"],
        vec!["solve", "--instance", inst, "--method", "brute", "--cardinality", "13"],
        vec!["solve", "--instance", "/nonexistent.json", "--method", "ls"],
        vec!["solve", "--instance", &cfg, "--method", "ls"],
        vec!["solve", "--instance", inst, "--method", "benders:leaf", "--budget-sec", "0"],
        vec!["generate", "--config", inst],
    ] {
        assert_eq!(dfopt(&bad).status.code(), Some(2), "{bad:?}");
    }
    let bad_threads = dfopt_env(&["solve", "--instance", inst, "--method", "ls"], "DFOPT_THREADS", "none");
    assert_eq!(bad_threads.status.code(), Some(2));
}

#[test]
fn solve_reports_recompute_from_assortment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"n":9,"num_trees":6,"shape":{"type":"t1","depth":3},"seed":21}"#);
    let path = dir.path().join("i.json");
    assert!(dfopt(&["generate", "--config", &cfg, "--out", path.to_str().unwrap()]).status.success());
    let inst: Instance<f64> = instance_from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let path = path.to_str().unwrap();
    for (method, b) in [("benders:leaf", None), ("monolithic:split", Some("4")), ("ls10", None), ("dnc", Some("4"))] {
        let mut args = vec!["solve", "--instance", path, "--method", method];
        if let Some(b) = b {
            args.extend(["--cardinality", b]);
        }
        let r = report(&dfopt(&args));
        let products: Vec<usize> = serde_json::from_value(r["assortment"].clone()).unwrap();
        let a = Assortment::from_products(9, &products).unwrap();
        let v = dfopt_core::model::expected_revenue(&inst, &a);
        assert_eq!(r["value"].as_f64().unwrap(), v, "{method}");
        if b.is_some() {
            assert_eq!(a.size(), 4);
        }
    }
}

#[test]
fn integrality_gap_table_orders_formulations() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"tables":["integrality_gap"],"types":["T1","T2","T3"],"n":[10],"num_trees":[5,10],
                   "leaves":[8],"replications":4,"seed":100}"#;
    let cfg = write(dir.path(), "e.json", spec);
    let out = dir.path().join("out");
    assert!(dfopt(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let rows = csv_rows(&out.join("integrality_gap.csv"));
    assert_eq!(rows[0][0], "dfopt/integrality_gap/v1");
    let col = |name: &str| rows[0].iter().position(|h| h == name).unwrap();
    let (gl, gs, gp) = (col("G_leaf"), col("G_split"), col("G_product"));
    let means: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "mean").collect();
    assert_eq!(means.len(), 6);
    for r in means {
        let g = |i: usize| r[i].parse::<f64>().unwrap();
        assert!(g(gl) + 1e-9 >= g(gs) && g(gs) + 1e-9 >= g(gp), "{r:?}");
    }
    // Seeds run 100.. over the grid in order.
    let seeds: Vec<u64> = rows.iter().filter(|r| r[0] == "run").map(|r| r[col("seed")].parse().unwrap()).collect();
    assert_eq!(seeds, (100..124).collect::<Vec<_>>());
}

#[test]
fn zero_revenue_grid_reports_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"tables":["integrality_gap"],"types":["T3"],"n":[6],"num_trees":[3],"leaves":[5],
                   "replications":2,"revenue_range":[0,0]}"#;
    let cfg = write(dir.path(), "e.json", spec);
    let out = dir.path().join("out");
    let run = dfopt(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(run.status.success());
    let rows = csv_rows(&out.join("integrality_gap.csv"));
    let kinds: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(kinds, ["error", "error", "mean"]);
    assert!(rows[1].last().unwrap().contains("undefined integrality gap"));
    assert_eq!(rows[3].last().unwrap(), "2 failed");
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"tables":["integrality_gap","tractability","cardinality","heuristics"],"types":["T2","T3"],
                   "n":[9],"num_trees":[4],"leaves":[8],"replications":2,"cardinality_ratio":[0.3,0.5],"seed":8}"#;
    let cfg = write(dir.path(), "e.json", spec);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(dfopt(&["experiment", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    let rerun = dfopt_env(&["experiment", "--config", &cfg, "--out", b.to_str().unwrap()], "DFOPT_THREADS", "1");
    assert!(rerun.status.success());
    for t in ["integrality_gap", "tractability", "cardinality", "heuristics"] {
        let f = format!("{t}.csv");
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{t}");
    }
    let timed = dir.path().join("c");
    let run = dfopt(&["experiment", "--config", &cfg, "--out", timed.to_str().unwrap(), "--timings"]);
    assert!(run.status.success());
    assert!(csv_rows(&timed.join("tractability.csv"))[0].iter().any(|h| h == "T_ms"));
    assert!(!csv_rows(&a.join("tractability.csv"))[0].iter().any(|h| h == "T_ms"));
}

#[test]
fn bad_experiment_specs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    for spec in [
        r#"{"types":["T1"],"n":[6],"num_trees":[2],"leaves":[6]}"#,
        r#"{"types":["T3"],"n":[6],"num_trees":[2],"leaves":[6],"replications":0}"#,
        r#"{"types":["T3"],"n":[6],"num_trees":[2],"leaves":[6],"methods":["ls"]}"#,
        r#"{"types":["T3"],"n":[6],"num_trees":[2],"leaves":[6],"tables":["cardinality"]}"#,
        r#"{"types":["T3"],"n":[6],"num_trees":[2],"leaves":[6],"colour":"blue"}"#,
    ] {
        let cfg = write(dir.path(), "e.json", spec);
        assert_eq!(dfopt(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(2), "{spec}");
    }
}
