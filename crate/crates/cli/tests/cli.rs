use std::path::Path;
use std::process::{Command, Output};

fn condensa(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condensa"))
        .args(args)
        .current_dir(dir)
        .env_remove("CONDENSA_OUT")
        .output()
        .unwrap()
}

const MATRIX: &str = "id,a,b,c\na,0,1,2\nb,1,0,1\nc,2,1,0\n";

#[test]
fn validate_and_cover() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.csv"), MATRIX).unwrap();
    let v = condensa(&["validate", "m.csv"], dir.path());
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains("3 points"));

    let c = condensa(&["cover", "m.csv", "--epsilon", "1", "--exact"], dir.path());
    assert_eq!(c.status.code(), Some(0));
    let out = String::from_utf8_lossy(&c.stdout);
    assert_eq!(out.lines().nth(1), Some("1,1,exact,0,b"));
}

#[test]
fn quotient_command() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.csv"), MATRIX).unwrap();
    std::fs::write(dir.path().join("p.csv"), "a,x\nc,x\nb,y\n").unwrap();
    let q = condensa(&["quotient", "m.csv", "--partition", "p.csv"], dir.path());
    assert_eq!(q.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&q.stdout),
        "id,L1_C0,L1_C1\nL1_C0,0,1\nL1_C1,1,0\n"
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "id,a,b\na,0,1\nb,2,0\n").unwrap();
    assert_eq!(
        condensa(&["validate", "bad.csv"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        condensa(&["validate", "missing.csv"], dir.path())
            .status
            .code(),
        Some(3)
    );

    std::fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    let r = condensa(&["capacity", "--config", "bad.cfg"], dir.path());
    assert_eq!(r.status.code(), Some(2));

    std::fs::write(dir.path().join("weak.cfg"), "steps_per_task = 1\n").unwrap();
    let r = condensa(
        &["parity", "--config", "weak.cfg", "--out", "p"],
        dir.path(),
    );
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn experiment_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let r = condensa(&["capacity", "--svg", "--out", "cap"], dir.path());
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("cap/capacity_curve.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("L,epsilon,N,ceil_L_over_2eps"));
    assert_eq!(csv.lines().count(), 6);
    assert!(dir.path().join("cap/capacity_curve.svg").exists());
    let manifest = std::fs::read_to_string(dir.path().join("cap/manifest")).unwrap();
    assert_eq!(manifest.lines().count(), 2);

    let again = condensa(&["capacity", "--svg", "--out", "cap2"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    let m2 = std::fs::read_to_string(dir.path().join("cap2/manifest")).unwrap();
    assert_eq!(manifest, m2);
}

#[test]
fn default_output_directory_honours_env() {
    let dir = tempfile::tempdir().unwrap();
    let r = Command::new(env!("CARGO_BIN_EXE_condensa"))
        .args(["depth"])
        .current_dir(dir.path())
        .env("CONDENSA_OUT", "results")
        .output()
        .unwrap();
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    for f in [
        "depth_vs_length.csv",
        "hierarchy_report.csv",
        "token_log.csv",
        "noise_control.csv",
        "manifest",
    ] {
        assert!(dir.path().join("results/depth").join(f).exists(), "{f}");
    }
}
