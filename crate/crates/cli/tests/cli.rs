use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn darrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_darrm")).args(args).env("DARRM_THREADS", "2").output().expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn write_gamma(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name).to_str().unwrap().to_owned();
    let mut all = vec!["gamma"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", &path]);
    assert!(darrm(&all).status.success());
    path
}

#[test]
fn compose_simple_and_general() {
    let o = darrm(&["compose", "--k", "3", "--eps", "0.0892", "--delta", "1e-4"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert_eq!(v["eps"].as_f64().unwrap(), 0.2676);
    assert!((v["delta"].as_f64().unwrap() - 0.0003).abs() < 1e-18);

    let v = json_out(&darrm(&["compose", "--mode", "general", "--k", "10", "--eps", "0.1", "--delta", "1e-5", "--delta-prime", "0.1"]));
    assert!((v["eps"].as_f64().unwrap() - 0.64521).abs() < 5e-6);

    let v = json_out(&darrm(&["compose", "--k", "1", "--eps", "0.3", "--delta", "1e-5"]));
    assert_eq!((v["eps"].as_f64().unwrap(), v["delta"].as_f64().unwrap()), (0.3, 1e-5));
}

#[test]
fn verify_exit_codes_follow_the_report() {
    let dir = TempDir::new().unwrap();
    let sub = write_gamma(dir.path(), "sub.json", &["--kind", "sub", "--K", "11", "--m", "3"]);
    let o = darrm(&["verify", "--gamma", &sub, "--eps", "0.1", "--Delta", "1e-5", "--m", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o)["ok"], true);

    let ones = write_gamma(dir.path(), "ones.json", &["--kind", "ones", "--K", "11"]);
    let o = darrm(&["verify", "--gamma", &ones, "--eps", "0.1", "--m", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_out(&o)["ok"], false);

    let zeros = write_gamma(dir.path(), "zeros.json", &["--kind", "zeros", "--K", "11"]);
    assert_eq!(darrm(&["verify", "--gamma", &zeros, "--eps", "0.1", "--m", "1"]).status.code(), Some(0));

    let dsub = write_gamma(dir.path(), "dsub.json", &["--kind", "dsub", "--K", "11", "--m", "3"]);
    let o = darrm(&["verify", "--gamma", &dsub, "--eps", "0.1", "--m", "3", "--iid"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn bad_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(darrm(&["verify", "--gamma", missing.to_str().unwrap(), "--eps", "0.1", "--m", "1"]).status.code(), Some(2));
    assert_eq!(darrm(&["reproduce", "nope"]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"K": 4, "values": [0.5, 0.5, 0.5, 0.5, 0.5]}"#).unwrap();
    assert_eq!(darrm(&["verify", "--gamma", bad.to_str().unwrap(), "--eps", "0.1", "--m", "1"]).status.code(), Some(2));
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"K": 11, "eps": -1, "m": [1]}"#).unwrap();
    assert_eq!(darrm(&["optimize", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"K": 11, "eps": 0.1, "m": [1], "bogus": 3}"#).unwrap();
    assert_eq!(darrm(&["optimize", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn optimize_writes_one_file_per_allowance() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"name": "small", "K": 7, "eps": 0.1, "Delta": 1e-5, "m": [1, 3], "delta": "one_minus_pow",
                "prior": [[0, 1]], "T": 1000, "tau": 50, "seed": 2, "out": {:?}}}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = darrm(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for m in [1, 3] {
        let path = out.join(format!("gamma_K7_m{m}.json"));
        let text = std::fs::read_to_string(&path).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["K"], 7);
        assert_eq!(v["status"], "optimal");
        assert!(v["certificate"]["max_violation"].as_f64().unwrap() <= 1e-9);
        let p = path.to_str().unwrap();
        let b = darrm(&["verify", "--gamma", p, "--eps", "0.1", "--Delta", "1e-5", "--m", &m.to_string()]);
        assert_eq!(b.status.code(), Some(0));
    }
    let first = std::fs::read(out.join("gamma_K7_m3.json")).unwrap();
    assert!(darrm(&["optimize", "--config", cfg.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(out.join("gamma_K7_m3.json")).unwrap(), first);
}

#[test]
fn empty_sweep_is_a_no_op() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("never");
    std::fs::write(&cfg, format!(r#"{{"K": 11, "eps": 0.1, "m": [], "out": {:?}}}"#, out.to_str().unwrap())).unwrap();
    assert_eq!(darrm(&["optimize", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert!(!out.exists());
}

#[test]
fn evaluate_labels_fixed_p_and_prior_separately() {
    let dir = TempDir::new().unwrap();
    let sub = write_gamma(dir.path(), "sub.json", &["--kind", "sub", "--K", "5", "--m", "1"]);
    let trace = dir.path().join("trace.csv");
    let o = darrm(&[
        "evaluate", "--gamma", &sub, "--p", "0.6,0.7,0.8,0.9,0.65", "--trials", "2000", "--seed", "3",
        "--prior", "[[0,1]]", "--T", "500", "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    assert_eq!(v["error_at_p"]["method"], "closed_form");
    assert_eq!(v["error_at_p_monte_carlo"]["trials"], 2000);
    assert!(v["expected_error_over_prior"]["error"].is_number());
    let text = std::fs::read_to_string(trace).unwrap();
    assert_eq!(text.lines().next().unwrap(), "trial,L,coin,output");
    assert_eq!(text.lines().count(), 2001);
}

#[test]
fn gnmax_reports_the_grid_optimum() {
    let v = json_out(&darrm(&["gnmax", "--eps", "0.2676", "--delta", "0.0003"]));
    assert!((v["sigma"].as_f64().unwrap() - 21.46).abs() < 0.05);
}

#[test]
fn reproduce_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(darrm(&["reproduce", "appE1_table", "--out", out]).status.success());
    let text = std::fs::read_to_string(dir.path().join("appE1_table.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "row,quantity,computed,reference,abs_diff");
    let mut n = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2], f[3], "{line}");
        assert!(f[4].parse::<f64>().unwrap() <= 5e-5, "{line}");
        n += 1;
    }
    assert_eq!(n, 14);
    assert!(text.contains("M=10,m,6.4521,6.4521,"));

    assert!(darrm(&["reproduce", "gnmax_table", "--out", out]).status.success());
    let text = std::fs::read_to_string(dir.path().join("gnmax_table.csv")).unwrap();
    assert!(text.contains("MNIST,sigma,21.4606,21.4600,"));
}

#[test]
fn reproduce_fig2_is_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let run = |d: &TempDir, threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_darrm"))
            .args(["reproduce", "fig2", "--out", d.path().to_str().unwrap(), "--trials", "1000", "--seed", "5"])
            .env("DARRM_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let stdout = run(&a, "1");
    run(&b, "3");
    for f in ["fig2_shape.csv", "fig2_error.csv", "fig2_expected.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
        assert!(!x.contains(&b'\r'));
    }
    let shape = std::fs::read_to_string(a.path().join("fig2_shape.csv")).unwrap();
    // 4 allowances, 3 noise functions, 12 support points
    assert_eq!(shape.lines().count(), 1 + 4 * 3 * 12);
    let line = stdout.lines().find(|l| l.contains("max |gamma_opt - gamma_sub|")).unwrap();
    let gap: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(gap <= 1e-4);
}
