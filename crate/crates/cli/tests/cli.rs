use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ttlab() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ttlab"));
    cmd.env_remove("TTLAB_WORKERS");
    cmd
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

/// Writes a config next to copies of the shipped shift files.
fn write_config(dir: &Path, body: &str) -> PathBuf {
    let shifts = dir.join("shifts");
    std::fs::create_dir_all(&shifts).unwrap();
    for e in std::fs::read_dir(configs_dir().join("shifts")).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), shifts.join(e.file_name())).unwrap();
    }
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const COROLLARY: &str = r#"
scenario = "corollary-case"
seed = 3
trials = 20
radii = [0.5, 0.25, 0.125]
[system]
x = "shifts/full4-log2.toml"
y = "shifts/full2-log2-two.toml"
cocycle = [-1, 0, 0, 1]
"#;

#[test]
fn every_shipped_config_validates() {
    let mut n = 0;
    for e in std::fs::read_dir(configs_dir()).unwrap() {
        let path = e.unwrap().path();
        if path.extension().is_some_and(|x| x == "toml") {
            let out = ttlab().arg("validate").arg(&path).output().unwrap();
            assert!(out.status.success(), "{}: {}", path.display(), text(&out));
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn run_writes_report_and_report_reads_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), COROLLARY);
    let res = tmp.path().join("res");
    let out = ttlab().args(["run", "-w", "2", "-o"]).arg(&res).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(text(&out).contains("PASSED"));
    assert!(res.join("report.json").is_file());
    assert!(res.join("balls.csv").is_file());

    let rep = ttlab().arg("report").arg(&res).output().unwrap();
    assert_eq!(rep.status.code(), Some(0), "{}", text(&rep));
    assert!(text(&rep).contains("corollary-case"));
}

#[test]
fn worker_flag_and_env_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), COROLLARY);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let one = ttlab().args(["run", "-w", "1", "-o"]).arg(&a).arg(&cfg).output().unwrap();
    assert!(one.status.success(), "{}", text(&one));
    let eight = ttlab().env("TTLAB_WORKERS", "8").args(["run", "-o"]).arg(&b).arg(&cfg).output().unwrap();
    assert!(eight.status.success(), "{}", text(&eight));
    for f in ["report.json", "balls.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_trials_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &COROLLARY.replace("trials = 20", "trials = 0"));
    let out = ttlab().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("trials"), "{}", text(&out));
    let out = ttlab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_fields_and_scenarios_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{COROLLARY}\nbogus = 1\n"));
    assert_eq!(ttlab().arg("validate").arg(&cfg).output().unwrap().status.code(), Some(2));
    let cfg = write_config(tmp.path(), &COROLLARY.replace("corollary-case", "nonsense"));
    let out = ttlab().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("unknown scenario"));
}

#[test]
fn off_boundary_radius_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &COROLLARY.replace("0.125]", "0.1]"));
    assert_eq!(ttlab().arg("validate").arg(&cfg).output().unwrap().status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    // a relative tolerance of zero cannot be met by a finite-n LLT comparison
    let body = r#"
scenario = "llt"
seed = 1
a_word = [0, 2]
b_word = [1]
n = [100, 200]
k = 0
relative_tolerance = 0.0
[system]
x = "shifts/full3-log3.toml"
cocycle = [-1, 0, 1]
"#;
    let cfg = write_config(tmp.path(), body);
    let out = ttlab().args(["run", "-o"]).arg(tmp.path().join("r")).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
    assert!(text(&out).contains("FAILED"));
}

#[test]
fn report_on_missing_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ttlab().arg("report").arg(tmp.path().join("nope")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
