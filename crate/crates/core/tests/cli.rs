use mgkernel::oracle::closed_form_star_kernel;
use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn mg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgkernel")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn kernel_matches_the_star_images() {
    let star = data("star3.json");
    let out = json(&mg(&["kernel", "--graph", &star, "--x", "e0:0.5", "--y", "e0:0.7", "e1:0.7", "--t", "0.05", "--eps", "1e-8"]));
    let vals = out["values"].as_array().unwrap();
    let want = [closed_form_star_kernel(3, 0.05, (0, 0.5), (0, 0.7)), closed_form_star_kernel(3, 0.05, (0, 0.5), (1, 0.7))];
    for (v, w) in vals.iter().zip(want) {
        let tol = v["tolerance"].as_f64().unwrap();
        // legs of length 10 add reflections below 1e-100
        assert!((v["value"].as_f64().unwrap() - w).abs() <= tol + 1e-12, "{v} {w}");
    }
}

#[test]
fn cycle_spectrum_is_quarter_squares() {
    let out = json(&mg(&["spectrum", "--graph", &data("cycle4.json"), "--window", "0", "50"]));
    let mut all: Vec<f64> = out["eigenvalues"].as_array().unwrap().iter().map(|e| e["lambda"].as_f64().unwrap()).collect();
    all.extend(out["dirichlet"].as_array().unwrap().iter().map(|e| e["lambda"].as_f64().unwrap()));
    all.sort_by(f64::total_cmp);
    assert_eq!(all.len(), 5);
    for (k, l) in all.iter().enumerate() {
        let want = (std::f64::consts::PI * k as f64 / 2.0).powi(2);
        assert!((l - want).abs() <= 1e-8, "{k}: {l}");
    }
}

#[test]
fn verify_passes_on_the_cycle() {
    let out = mg(&["verify", "--graph", &data("cycle4.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(true));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let cycle = data("cycle4.json");
    for (tag, workers) in [("a", "1"), ("b", "3")] {
        let out = Command::new(env!("CARGO_BIN_EXE_mgkernel"))
            .env("MGKERNEL_WORKERS", workers)
            .args(["simulate", "--graph", &cycle, "--start", "e1:0.25", "--t", "0.2", "--n", "2000", "--seed", "9"])
            .args(["--potential", "const:0.5", "--observable", "bump:e1:0.5:0.4"])
            .args(["--out", &path(&format!("sim_{tag}.json")), "--trajectory", &path(&format!("tr_{tag}.csv"))])
            .output()
            .unwrap();
        assert!(out.status.success());
        let out = Command::new(env!("CARGO_BIN_EXE_mgkernel"))
            .env("MGKERNEL_WORKERS", workers)
            .args(["pam", "--graph", &cycle, "--law", "bernoulli:0.5:0:1", "--tmax", "1", "--tsteps", "4", "--realizations", "6", "--seed", "2"])
            .args(["--out", &path(&format!("pam_{tag}.json")), "--csv", &path(&format!("pam_{tag}.csv")), "--manifest", &path(&format!("m_{tag}.json"))])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for f in ["sim_{}.json", "tr_{}.csv", "pam_{}.json", "pam_{}.csv", "m_{}.json"] {
        let a = std::fs::read(path(&f.replace("{}", "a"))).unwrap();
        let b = std::fs::read(path(&f.replace("{}", "b"))).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn estimates_carry_their_errors() {
    let cycle = data("cycle4.json");
    let sim = json(&mg(&["simulate", "--graph", &cycle, "--start", "e0:0.5", "--t", "0.1", "--n", "500", "--observable", "bump:e0:0.5:0.5"]));
    assert!(sim["se"].as_f64().unwrap() > 0.0);
    assert_eq!(sim["n"], 500);
    let solve = json(&mg(&["solve", "--graph", &cycle, "--t", "0.1", "--init", "const:1"]));
    assert!((solve["integral"]["value"].as_f64().unwrap() - 4.0).abs() <= solve["integral"]["tolerance"].as_f64().unwrap() + 1e-9);
    let res = json(&mg(&["resolvent", "--graph", &cycle, "--z=-1", "--rhs", "const:1"]));
    for v in res["vertex_values"].as_array().unwrap() {
        // (H + 1)^{-1} 1 = 1
        assert!((v["re"].as_f64().unwrap() - 1.0).abs() < 1e-8);
        assert!(v["tolerance"].is_number());
    }
    assert!(sim["manifest"]["version"].is_string());
    assert!(!sim["manifest"].to_string().contains("time\""));
}

#[test]
fn invalid_input_exits_two() {
    let star = data("star3.json");
    for args in [
        vec!["kernel", "--graph", "missing.json", "--x", "e0:0.5", "--y", "e0:1", "--t", "0.1"],
        vec!["kernel", "--graph", &star, "--x", "e7:0.5", "--y", "e0:1", "--t", "0.1"],
        vec!["kernel", "--graph", &star, "--x", "e0:0.5", "--y", "e0:1", "--t", "0.1", "--eps", "-1"],
        vec!["kernel", "--graph", &star, "--x", "e0:0.5", "--t", "0.1"],
        vec!["simulate", "--graph", &star, "--start", "e0:1", "--t", "1", "--scale", "full"],
        vec!["pam", "--graph", &star, "--law", "gauss:0:1", "--tmax", "1"],
        vec!["pam", "--graph", &star, "--law", "constant:1", "--tmax", "1", "--tsteps", "2"],
        vec!["frobnicate"],
    ] {
        assert_eq!(mg(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numerical_failure_exits_three() {
    // z = 0 is an eigenvalue of the Kirchhoff Laplacian
    let out = mg(&["resolvent", "--graph", &data("cycle4.json"), "--z", "0", "--rhs", "const:1"]);
    assert_eq!(out.status.code(), Some(3));
}
