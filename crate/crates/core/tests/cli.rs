use cosymplectic::cli::{Config, Settings};
use std::process::{Command, Output};

fn cosym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosym")).args(args).output().expect("binary runs")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn reports_are_byte_identical_across_runs() {
    for args in [
        &["reeb", "--structure", "twisted"][..],
        &["--grid", "8", "decompose", "--field", "generic"][..],
        &["--grid", "8", "--steps", "40", "flow", "--isotopy", "torus-hamiltonian"][..],
    ] {
        let a = cosym(args);
        let b = cosym(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn report_carries_schema_and_comparisons() {
    let o = cosym(&["reeb", "--structure", "darboux"]);
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["pass"], true);
    assert!(!v["comparisons"].as_array().unwrap().is_empty());
}

#[test]
fn exit_code_is_zero_iff_every_comparison_passes() {
    let ok = cosym(&["suite", "--only", "exterior-calculus,transition-cocycle"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["pass"], true);
    // the printed conformal-rate identity fails on z-scaling
    let bad = cosym(&["suite", "--only", "conformal"]);
    assert_eq!(bad.status.code(), Some(1));
    let v = json(&bad);
    assert_eq!(v["pass"], false);
    assert!(!bad.stderr.is_empty());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(cosym(&["reeb", "--structure", "no-such-structure"]).status.code(), Some(2));
    assert_eq!(cosym(&["suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(cosym(&["--config", "/nonexistent/cosym.toml", "reeb"]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = std::env::temp_dir().join(format!("cosym-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("reeb.json");
    let o = cosym(&["--out", path.to_str().unwrap(), "reeb", "--structure", "t2s1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["example"], "t2s1");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_parses_and_merges() {
    let c = Config::parse("grid = 16\nsteps = 100\ntol = 1e-7\npaper_normalization = true\n[params]\nspeed = 2.5\n")
        .unwrap();
    assert_eq!(c.grid, Some(16));
    assert_eq!(c.params.get("speed"), Some(&2.5));
    let mut s = Settings::default();
    s.merge_config(&c);
    assert_eq!(s.grid, Some(16));
    assert_eq!(s.steps, 100);
    assert_eq!(s.tol, Some(1e-7));
    assert!(s.paper_normalization);
    // flags win over the file
    let mut s = Settings { grid: Some(8), ..Settings::default() };
    s.merge_config(&c);
    assert_eq!(s.grid, Some(8));
}

#[test]
fn config_rejects_unknown_keys_and_bad_types() {
    assert!(Config::parse("gird = 16\n").is_err());
    assert!(Config::parse("grid = \"many\"\n").is_err());
    assert!(Config::parse("").is_ok());
}

#[test]
fn config_file_drives_the_binary() {
    let dir = std::env::temp_dir().join(format!("cosym-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, "grid = 8\n").unwrap();
    let o = cosym(&["--config", path.to_str().unwrap(), "verify-structure", "--structure", "darboux"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["settings"]["grid"], 8);
    std::fs::remove_dir_all(&dir).ok();
}
