use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const AR3: &str = r#"{"type":"ar","r":3.0,"M":128}"#;
const ANNULUS: &str = r#"{"type":"circles","centers":[[0,0],[0,0]],"radii":[1,0.5],"M":128}"#;

fn run(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kernelsmith"));
    cmd.current_dir(dir).args(args);
    match threads {
        Some(t) => cmd.env("KERNELSMITH_THREADS", t),
        None => cmd.env_remove("KERNELSMITH_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ar3.json"), AR3).unwrap();
    fs::write(dir.path().join("annulus.json"), ANNULUS).unwrap();
    fs::write(dir.path().join("pinched.json"), r#"{"type":"ar","r":1.9}"#).unwrap();
    fs::write(dir.path().join("broken.json"), r#"{"type":"ar","r":"#).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn invalid_specs_exit_2() {
    let dir = setup();
    for spec in ["pinched.json", "broken.json", "missing.json"] {
        let o = run(dir.path(), &["domain", spec], None);
        assert_eq!(o.status.code(), Some(2), "{spec}");
    }
    let o = run(dir.path(), &["discover", "annulus.json", "--trivariate"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_summary_reports_modulus() {
    let dir = setup();
    let o = run(dir.path(), &["domain", "annulus.json"], None);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n"], 2);
    assert!((v["modulus"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-7);
    assert_eq!(v["domain_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn guard_violation_exits_3() {
    let dir = setup();
    let o = run(dir.path(), &["kernel", "ar3.json", "--kind", "Lambda", "--at", "0.5+0.2i,0.5+0.2i"], None);
    assert_eq!(o.status.code(), Some(3));
    let o = run(dir.path(), &["kernel", "ar3.json", "--kind", "K", "--at", "0.5+0.2i,5"], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn kernel_value_and_grid() {
    let dir = setup();
    let o = run(dir.path(), &["kernel", "annulus.json", "--kind", "G", "--at", "0.7,-0.7"], None);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let g = v["value"][0].as_f64().unwrap();
    assert!(g > 0.0 && v["value"][1].as_f64().unwrap() == 0.0);

    let o = run(dir.path(), &["kernel", "annulus.json", "--kind", "K", "--grid", "6", "--w", "0.75i"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re_z,im_z,re_w,im_w,re_val,im_val"));
    assert!(lines.all(|l| l.split(',').count() == 6));

    let o = run(dir.path(), &["kernel", "ar3.json", "--kind", "ahlfors", "--boundary"], None);
    assert_eq!(o.status.code(), Some(0));
    let worst = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst < 1e-7, "{worst}");
}

#[test]
fn verify_writes_identical_reports() {
    let dir = setup();
    let a = run(dir.path(), &["verify", "ar3.json", "--out", "one"], Some("1"));
    let b = run(dir.path(), &["verify", "ar3.json", "--out", "two"], Some("4"));
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(b.status.code(), Some(0));
    let ra = fs::read(dir.path().join("one/report.json")).unwrap();
    let rb = fs::read(dir.path().join("two/report.json")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(stdout(&a), stdout(&b));
    let v: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn failed_check_exits_1() {
    let dir = setup();
    let o = run(
        dir.path(),
        &["verify", "ar3.json", "--suite", "szego", "--threshold", "szego_identity=1e-30", "--out", "r"],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL szego_identity"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r/report.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], false);
    let o = run(dir.path(), &["verify", "ar3.json", "--threshold", "nonsense"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn discover_pair_and_no_relation() {
    let dir = setup();
    let o = run(dir.path(), &["discover", "ar3.json", "--pair", "--samples", "400", "--out", "d"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rel: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("d/relation.json")).unwrap()).unwrap();
    assert_eq!(rel["relation"]["dv"], 2);
    let scan = fs::read_to_string(dir.path().join("d/scan.csv")).unwrap();
    assert!(scan.starts_with("du,dv,fit_residual,validation_residual\n"));

    let o = run(dir.path(), &["discover", "annulus.json", "--pair", "--max-degree", "1"], None);
    assert_eq!(o.status.code(), Some(4));
}
