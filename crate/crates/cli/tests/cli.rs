use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mcflow(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mcflow"));
    cmd.args(args).env_remove("MCF_OUTPUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("MCF_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const FLAT: &str = r#"
[scenario]
id = "productTorus"
nodes = 16

[flow]
tEnd = 0.02

[[monitors]]
kind = "flatness"
"#;

#[test]
fn simulate_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), FLAT);
    let res = mcflow(&["simulate", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("flatness") && stdout.contains("pass"), "{stdout}");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_status"], 0);
    for a in manifest["artifacts"].as_array().unwrap() {
        assert!(Path::new(a.as_str().unwrap()).exists());
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "productTorus");
}

#[test]
fn failing_monitor_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[scenario]\nid = \"productTorus\"\nnodes = 16\n[flow]\ntEnd = 0.02\nsnapshotEvery = 1\n\
         step = { kind = \"fixed\", dt = 0.002 }\n[[monitors]]\nkind = \"evolutionResiduals\"\ntolerance = 1e-16\n",
    );
    let res = mcflow(&["simulate", &cfg, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn required_completion_past_a_singularity_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[scenario]\nid = \"circle\"\nnodes = 32\n[flow]\ntEnd = 0.6\n[output]\nrequireCompletion = true\n",
    );
    let res = mcflow(&["simulate", &cfg, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn malformed_config_exits_one_with_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scenario]\nid = \"circle\"\nnodez = 32\n[flow]\ntEnd = 0.1\n");
    let res = mcflow(&["simulate", &cfg], None);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3") && err.contains("nodez"), "{err}");

    let missing = mcflow(&["simulate", dir.path().join("absent.toml").to_str().unwrap()], None);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(mcflow(&["frobnicate"], None).status.code(), Some(1));
}

#[test]
fn environment_overrides_the_configured_directory() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from-env");
    let cfg = write_config(dir.path(), &format!("{FLAT}\n[output]\ndir = \"{}\"\n", dir.path().join("from-config").display()));
    let res = mcflow(&["simulate", &cfg], Some(&env_dir));
    assert_eq!(res.status.code(), Some(0));
    assert!(env_dir.join("report.json").exists());
    assert!(!dir.path().join("from-config").exists());
}

#[test]
fn verify_fuzz_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let res = mcflow(&["verify", "--subset", "fuzz", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("criterion  1 PASS")), "{stdout}");
    assert!(dir.path().join("acceptance.json").exists());
    assert_eq!(mcflow(&["verify", "--subset", "eleven"], None).status.code(), Some(1));
}

#[test]
fn describe_lists_every_scenario() {
    let res = mcflow(&["describe-scenarios"], None);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    for id in ["circle", "productTorus", "sphereTorus", "genericTorus", "equivariantCylinder", "epsGraph", "plane", "line"] {
        assert!(stdout.lines().any(|l| l.starts_with(id)), "{id} missing");
    }
}
