use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tribody(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tribody")).args(args).current_dir(dir).output().expect("binary runs")
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn homothetic_collapse_reaches_rest_velocity() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "masses": [1, 1, 1],
        "chart": "blown_reg_round",
        "timescale": "f1",
        "h": -1,
        "initial": { "preset": "lagrange_homothetic" },
        "span": 50,
        "out": "collapse.jsonl"
    }"#;
    std::fs::write(dir.path().join("run.json"), config).unwrap();
    let out = tribody(&["integrate", "--config", "run.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("collapse.report.json"));
    let v = report["v_final"].as_f64().unwrap();
    assert!((v + 2.449_489_7).abs() < 1e-4, "v_final = {v}");
    assert_eq!(report["passed"], Value::Bool(true));

    let records = read_jsonl(&dir.path().join("collapse.jsonl"));
    assert!(records.len() > 2);
    let first = &records[0];
    for key in ["t", "state", "res"] {
        assert!(first.get(key).is_some(), "record lacks `{key}`");
    }
    let r: Vec<f64> = records.iter().map(|rec| rec["state"]["r"].as_f64().unwrap()).collect();
    assert!(r.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
}

#[test]
fn collision_transit_logs_the_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let out = tribody(
        &[
            "integrate",
            "--masses",
            "1,2,3",
            "--chart",
            "reg_affine",
            "--preset",
            "collision_transit",
            "--energy",
            "-1",
            "--span",
            "5",
            "--out",
            "transit.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("transit.report.json"));
    let events = report["events"].as_array().unwrap();
    let crossing = events.iter().find(|e| e["label"] == "rho12_min").expect("ρ12 crossing logged");
    assert!(crossing["rho12"].as_f64().unwrap() < 1e-12);
    assert!(crossing["t"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_mass_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tribody(
        &["integrate", "--masses", "0,1,1", "--chart", "relative", "--preset", "collision_transit", "--span", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("masses"));
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"masses\": [1, 1, 1],\n  \"chart\": 7\n}").unwrap();
    let out = tribody(&["integrate", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn invalid_initial_state_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    // A regularized state off the zero level fails the chart's validity check.
    let config = r#"{
        "masses": [1, 2, 3],
        "chart": "reg_affine",
        "h": -1,
        "initial": { "state": { "r": 1, "z_re": 0.2, "z_im": 0, "p_r": 0, "zeta_re": -1, "zeta_im": 0 } },
        "span": 1
    }"#;
    std::fs::write(dir.path().join("run.json"), config).unwrap();
    let out = tribody(&["integrate", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero_level"));
}

#[test]
fn tight_threshold_is_an_invariant_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = tribody(
        &[
            "integrate",
            "--masses",
            "1,2,3",
            "--chart",
            "reg_affine",
            "--preset",
            "collision_transit",
            "--energy",
            "-1",
            "--span",
            "3",
            "--tol",
            "1e-6",
            "--threshold",
            "1e-30",
            "--out",
            "t.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(read_json(&dir.path().join("t.report.json"))["passed"], Value::Bool(false));
}

#[test]
fn spherical_relative_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "masses": [1, 2, 3],
        "chart": "spherical",
        "initial": {
            "chart": "relative",
            "state": {
                "Q12_re": 1.0, "Q12_im": 0.2, "Q31_re": -0.3, "Q31_im": 0.9, "Q23_re": -0.7, "Q23_im": -1.1,
                "P12_re": 0.1, "P12_im": -0.3, "P31_re": 0.25, "P31_im": 0.05, "P23_re": -0.2, "P23_im": 0.15
            }
        },
        "span": 0.3,
        "out": "sph.jsonl"
    }"#;
    std::fs::write(dir.path().join("run.json"), config).unwrap();
    let out = tribody(&["integrate", "--config", "run.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for (from, to, input, output) in
        [("spherical", "relative", "sph.jsonl", "rel.jsonl"), ("relative", "spherical", "rel.jsonl", "back.jsonl")]
    {
        let out = tribody(
            &["transform", "--input", input, "--from", from, "--to", to, "--masses", "1,2,3", "--out", output],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = read_jsonl(&dir.path().join("sph.jsonl"));
    let b = read_jsonl(&dir.path().join("back.jsonl"));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x["t"].as_f64().unwrap() - y["t"].as_f64().unwrap()).abs() < 1e-12);
        for (k, v) in x["state"].as_object().unwrap() {
            let w = y["state"][k].as_f64().unwrap();
            assert!((v.as_f64().unwrap() - w).abs() < 1e-12, "{k}: {v} vs {w}");
        }
    }
}

#[test]
fn regularized_to_reduced_reconstructs_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = tribody(
        &[
            "integrate",
            "--masses",
            "1,2,3",
            "--chart",
            "reg_affine",
            "--preset",
            "collision_transit",
            "--energy",
            "-1",
            "--span",
            "2",
            "--out",
            "reg.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = tribody(
        &[
            "transform",
            "--input",
            "reg.jsonl",
            "--from",
            "reg_affine",
            "--to",
            "reduced",
            "--masses",
            "1,2,3",
            "--mu",
            "0",
            "--energy",
            "-1",
            "--out",
            "red.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let src = read_jsonl(&dir.path().join("reg.jsonl"));
    let dst = read_jsonl(&dir.path().join("red.jsonl"));
    for (a, b) in src.iter().zip(&dst) {
        // The physical clock of the rescaled chart becomes the time column.
        assert_eq!(a["state"]["t"], b["t"]);
        assert!(b["state"]["r"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn blow_down_on_collision_manifold_marks_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    // Equal-mass Lagrange shape at the pole; the second sample sits on the
    // collision manifold `r = 0`, which has no preimage.
    let on_manifold = r#"{"t":0.0,"s":0.0,"state":{"alpha_gamma1":0.0,"alpha_gamma2":0.0,"alpha_gamma3":0.0,"c1":0.5773502691896257,"c2":-0.5773502691896257,"c3":-0.5773502691896257,"mu_tilde":0.0,"r":0.0,"t":0.0,"v":-2.449489742783178},"res":{}}"#;
    let regular = r#"{"t":0.0,"s":0.0,"state":{"alpha_gamma1":0.0,"alpha_gamma2":0.0,"alpha_gamma3":0.0,"c1":0.5773502691896257,"c2":-0.5773502691896257,"c3":-0.5773502691896257,"mu_tilde":0.0,"r":0.01,"t":0.0,"v":-2.445403852127497},"res":{}}"#;
    std::fs::write(dir.path().join("in.jsonl"), format!("{regular}\n{on_manifold}\n")).unwrap();
    let out = tribody(
        &[
            "transform",
            "--input",
            "in.jsonl",
            "--from",
            "blown_reg_round",
            "--to",
            "reg_round",
            "--masses",
            "1,1,1",
            "--mu",
            "0",
            "--energy",
            "-1",
            "--out",
            "out.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = read_jsonl(&dir.path().join("out.jsonl"));
    assert_eq!(recs.len(), 2);
    assert!(recs[0].get("error").is_none());
    assert!(recs[1]["error"].as_str().unwrap().contains("collision"));
}

#[test]
fn potential_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        tribody(&["potential", "--chart", "round", "--resolution", "33", "--with-w", "--out", "g.csv"], dir.path());
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("g.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["u", "v", "V", "W"]);
    let rows: Vec<[f64; 4]> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            std::array::from_fn(|k| r[k].parse::<f64>().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 33 * 33);
    // Equal masses: the minimum 3 sits at the poles; collisions are `inf`
    // in V but finite in W.
    let vmin = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    assert!((vmin - 3.0).abs() < 1e-9, "min V = {vmin}");
    assert!(rows.iter().any(|r| r[2].is_infinite()));
    assert!(rows.iter().all(|r| r[3].is_finite()));
    let text = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert!(text.contains(",inf,"));

    let out = tribody(&["potential", "--chart", "lemaitre", "--resolution", "8"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("shape_u,shape_v,n_preimages"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",2")).count(), 3);

    for bad in ["1", "4097"] {
        let out = tribody(&["potential", "--resolution", bad], dir.path());
        assert_eq!(out.status.code(), Some(2));
    }
}

#[test]
fn check_suites_report_json() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["covering", "blowup"] {
        let out = tribody(&["check", suite], dir.path());
        assert!(out.status.success(), "{suite}: {}", String::from_utf8_lossy(&out.stderr));
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["passed"], Value::Bool(true));
        assert!(!report["measurements"].as_array().unwrap().is_empty());
    }
    let out = tribody(&["check", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_trajectory_has_flat_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = tribody(
        &[
            "integrate",
            "--masses",
            "1,1,1",
            "--chart",
            "blown_reg_round",
            "--preset",
            "lagrange_homothetic",
            "--energy",
            "-1",
            "--span",
            "1",
            "--format",
            "csv",
            "--out",
            "h.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("h.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[..2], ["t", "s"]);
    assert!(header.iter().any(|h| h == "r"));
    assert!(header.iter().any(|h| h == "res_energy_relation"));
    assert_eq!(header.last().unwrap(), "error");
    assert!(rdr.records().count() > 2);
}
