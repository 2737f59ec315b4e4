use std::process::Command;

fn knudsen() -> Command {
    Command::new(env!("CARGO_BIN_EXE_knudsen"))
}

#[test]
fn layer_solve_prints_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inflow.csv");
    let mut s = String::from("w,phi\n");
    for k in 0..600 {
        let w = (k as f64 + 0.5) * 0.02;
        s.push_str(&format!("{w},{}\n", (-w * w / 2.0).exp()));
    }
    std::fs::write(&path, s).unwrap();
    let trace = dir.path().join("trace.csv");
    let out = knudsen()
        .args(["layer-solve", "--rho", "1", "--u", "1", "--T", "1", "--order", "16", "--inflow"])
        .arg(&path)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("xi0 =") && text.contains("xi- ="));
    assert!(std::fs::read_to_string(trace).unwrap().starts_with("w,f\n"));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"test": 9}"#).unwrap();
    assert!(!knudsen().args(["run", "--config"]).arg(&cfg).status().unwrap().success());
    assert!(!knudsen().args(["run", "--test", "7"]).status().unwrap().success());
    assert!(!knudsen().args(["convergence", "--report", "/nonexistent.json"]).status().unwrap().success());
}

#[test]
fn convergence_flags_partial_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = |partial: bool| {
        format!(
            r#"{{"test":1,"window":[0.1,0.9],"entries":[{{"eps":0.03125,"d_rho":0.02,"d_u":0.02,"d_T":0.02}},{{"eps":0.015625,"d_rho":0.01,"d_u":0.01,"d_T":0.01}}],"slopes":null,"failures":{},"partial":{partial}}}"#,
            if partial { r#"[{"eps":0.0078125,"message":"boom"}]"# } else { "[]" }
        )
    };
    let ok = dir.path().join("ok.json");
    let bad = dir.path().join("bad.json");
    std::fs::write(&ok, report(false)).unwrap();
    std::fs::write(&bad, report(true)).unwrap();
    let out = knudsen().args(["convergence", "--report"]).arg(&ok).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("slopes: rho 1.000"));
    assert!(!knudsen().args(["convergence", "--report"]).arg(&bad).status().unwrap().success());
}

#[test]
fn small_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "test": 4, "eps": [0.0625], "kinetic_h": 0.01, "kinetic_dt": 0.0005,
        "velocity_refinement": 2, "limit_h": 0.02, "limit_dt": 0.002,
        "spectral_order": 12, "alpha": 1.0, "t_final": 0.01, "window": [0.1, 0.9]
    });
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let status = knudsen().args(["run", "--config"]).arg(&path).arg("--out").arg(&out_dir).status().unwrap();
    assert!(status.success());
    for f in ["limit.csv", "errors.csv", "report.json", "meta.json", "reference_eps_1_16.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}
