use std::path::Path;
use std::process::{Command, Output};

fn tb(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tb")).args(args).current_dir(dir).env_remove("TB_THREADS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_MEDIUM: &str = r#"study = "medium-validate"
seed = 3

[budget]
paths = 12
grid = 24
nz = 24
probes = 6
"#;

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.toml", "study = \"coherent\"\n[budget\npaths = 3\n");
    let o = tb(&["run", &cfg, "--out", "out"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("out").exists());

    let cfg = write(d.path(), "unknown.toml", "study = \"coherent\"\nwavelength = 3\n");
    let o = tb(&["run", &cfg, "--out", "out"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(!d.path().join("out").exists());

    let o = tb(&["run", "missing.toml"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_reports_domain_rules_with_lines() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "a1.toml", "study = \"coherent\"\n[params]\nalpha = 1.0\n");
    let o = tb(&["validate", &cfg], d.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha=1 excluded"), "{err}");
    assert!(err.contains("line 3"), "{err}");

    let cfg = write(d.path(), "a15.toml", "study = \"medium-validate\"\n[params]\nalpha = 1.5\nl_outer = inf\n");
    let o = tb(&["validate", &cfg], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("variance diverges"));
}

#[test]
fn validate_echoes_filled_defaults() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "p.toml", "study = \"pulse\"\n");
    let o = tb(&["validate", &cfg], d.path());
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    for key in ["study = \"pulse\"", "seed = ", "[params]", "alpha = 0.5", "[source]", "b_ratio = 1.0"] {
        assert!(out.contains(key), "missing {key} in\n{out}");
    }
    // regime notes come before any compute
    assert!(String::from_utf8_lossy(&o.stderr).contains("Omega_psi"));
}

#[test]
fn compute_errors_exit_3_without_outputs() {
    let d = tempfile::tempdir().unwrap();
    // valid config, but the probe sites fall off an 8 x 8 lattice
    let cfg = write(d.path(), "c.toml", "study = \"spatial-coherence\"\n[budget]\ngrid = 8\npaths = 10\n");
    let o = tb(&["run", &cfg, "--out", "out"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!d.path().join("out").exists());
}

#[test]
fn runs_are_byte_identical_and_manifest_complete() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "m.toml", SMALL_MEDIUM);
    let a = tb(&["run", &cfg, "--out", "a", "--threads", "1"], d.path());
    let b = tb(&["run", &cfg, "--out", "b", "--threads", "2"], d.path());
    let code = a.status.code();
    assert!(matches!(code, Some(0) | Some(1)), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code, b.status.code());
    for f in ["covariance_z.csv", "realizations.csv", "clip_distortion.csv", "covariance_z.gp"] {
        let x = std::fs::read(d.path().join("a").join(f)).unwrap();
        let y = std::fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("a/manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("b/manifest.json")).unwrap()).unwrap();
    // the output path is not part of the hash
    assert_eq!(m["config_hash"], mb["config_hash"]);
    assert_eq!(m["gates"].as_array().unwrap().len(), 5);
    assert_eq!(m["threads"], 1);
    assert_eq!(m["seed"], 3);
    assert_eq!(m["pass"], code == Some(0));

    // the seed flag overrides the file and changes the draws
    let c = tb(&["run", &cfg, "--out", "c", "--seed", "4"], d.path());
    assert!(matches!(c.status.code(), Some(0) | Some(1)));
    let x = std::fs::read(d.path().join("a/realizations.csv")).unwrap();
    let y = std::fs::read(d.path().join("c/realizations.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn kolmogorov_table_run_and_constants() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "k.toml", "study = \"kolmogorov-table\"\n");
    let o = tb(&["run", &cfg, "--out", "k"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("k/manifest.json")).unwrap()).unwrap();
    let gates = m["gates"].as_array().unwrap();
    assert_eq!(gates.len(), 5);
    let q = gates.iter().find(|g| g["name"] == "q_53").unwrap();
    assert!((q["measured"].as_f64().unwrap() - 1.785).abs() < 0.002);
    let csv = std::fs::read_to_string(d.path().join("k/constants.csv")).unwrap();
    assert!(csv.starts_with("quantity,value,literature\n"));

    let o = tb(&["constants"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("1.45") && s.contains("1.6"), "{s}");
}
