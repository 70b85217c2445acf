use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn splitree(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_splitree"));
    cmd.args(args).env_remove("SPLITREE_OUT");
    if let Some(dir) = env_out {
        cmd.env("SPLITREE_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn models_lists_the_presets() {
    let o = splitree(&["models"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("bst b=2 s0=1 s1=0 s=1 d=0"));
    assert!(text.contains("trie") && text.contains("s=1 s0=0 s1=0"));
    assert!(text.contains("lattice_example d=ln2≈0.693147"));
}

#[test]
fn constants_of_presets() {
    let text = stdout(&splitree(&["constants", "bst"], None));
    assert!(text.contains("mu=0.5 ") && text.contains("sigma2=0.25 "), "{text}");
    assert!(text.contains("zeta=0.42026"), "{text}");

    let text = stdout(&splitree(&["constants", "trie", "0.5", "0.5"], None));
    assert!(text.contains("zeta=0 "), "{text}");

    let o = splitree(&["constants", "--model", "lattice_example", "--format", "json"], None);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["mu"].as_f64().unwrap() - 1.213008).abs() < 1e-6);
}

#[test]
fn simulate_is_byte_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = splitree(
            &[
                "simulate",
                "--model",
                "bst",
                "--n",
                "1000",
                "--replicas",
                "100",
                "--seed",
                "7",
                "--out",
                d.path().to_str().unwrap(),
            ],
            None,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["summary_bst_seed7.csv", "xn_bst_n1000_seed7.csv"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    assert!(dirs[0].path().join("simulate_config.json").exists());
    assert!(dirs[0].path().join("experiment_bst_seed7.json").exists());
}

#[test]
fn echoed_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let o = splitree(
        &["simulate", "--model", "mary:3", "--n", "200,400", "--replicas", "20", "--seed", "3", "--measures", "all"],
        Some(first.path()),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = first.path().join("simulate_config.json");
    let second = tempfile::tempdir().unwrap();
    let o = splitree(&["simulate", "--config", echo.to_str().unwrap(), "--out", second.path().to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let name = "summary_mary_3_seed3.csv";
    assert_eq!(fs::read(first.path().join(name)).unwrap(), fs::read(second.path().join(name)).unwrap());
}

#[test]
fn fixpoint_reports_the_quicksort_variance() {
    let d = tempfile::tempdir().unwrap();
    let o = splitree(
        &[
            "fixpoint",
            "--model",
            "bst",
            "--samples",
            "100000",
            "--tol",
            "5e-3",
            "--format",
            "json",
            "--out",
            d.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["variance"].as_f64().unwrap() - 0.4203).abs() < 0.0085);
    assert!(d.path().join("fixpoint_bst_seed0.json").exists());
    assert!(d.path().join("fixpoint_samples_bst_seed0.csv").exists());
}

#[test]
fn renewal_writes_a_table() {
    let d = tempfile::tempdir().unwrap();
    let o = splitree(&["renewal", "--model", "bst", "--tmax", "4", "--grid", "0.1", "--format", "csv"], Some(d.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("t,U,U_hat,SE"));
    assert!(d.path().join("renewal_bst_seed0.csv").exists());
    assert!(d.path().join("renewal_config.json").exists());
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    assert_eq!(splitree(&["constants", "nonsense"], None).status.code(), Some(2));
    assert_eq!(splitree(&["simulate", "--replicas", "1", "--out", out], None).status.code(), Some(2));
    assert_eq!(splitree(&["renewal", "--grid", "0.9", "--out", out], None).status.code(), Some(2));
    assert_eq!(
        splitree(&["simulate", "--n", "1000000000000", "--replicas", "100", "--out", out], None).status.code(),
        Some(3)
    );
    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let nested = blocker.join("sub");
    assert_eq!(splitree(&["simulate", "--out", nested.to_str().unwrap()], None).status.code(), Some(5));
    assert_eq!(splitree(&["verify", "--only", "99"], None).status.code(), Some(2));
}

#[test]
fn verify_runs_selected_criteria() {
    let o = splitree(&["verify", "--quick", "--only", "1,11"], None);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("[PASS]  1") && text.contains("[PASS] 11"), "{text}");
}
