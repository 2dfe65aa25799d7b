use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mangle(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mangle"));
    cmd.args(args).arg("--quiet").env_remove("MANGLE_OUT");
    cmd
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    mangle(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn mangle")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    v.sort();
    v
}

const SMALL_MC: &[&str] = &[
    "--t1",
    "100",
    "--t2",
    "400",
    "--n-paths",
    "20000",
    "--seed",
    "11",
];

#[test]
fn headline_reports_the_one_sigma_correction() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["headline"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("gamma = 0.3173105079"), "{s}");
    assert!(s.contains("log10 F = -43429.45"), "{s}");
    let dir = tmp.path().join("headline");
    for f in ["config.json", "headline.csv", "summary.txt"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn validate_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["validate"]);
    let s = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{s}");
    assert!(!s.contains("[FAIL]"), "{s}");
    assert!(
        read(&tmp.path().join("validate"), "checks.csv")
            .lines()
            .count()
            > 10
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run_in(tmp.path(), args).status.code();
    assert_eq!(
        code(&["mc", "--t1", "10", "--t2", "10", "--n-paths", "10"]),
        Some(2)
    );
    assert_eq!(code(&["headline", "--no-such-flag"]), Some(2));
    assert_eq!(code(&["scan", "--p", "1.5"]), Some(2));
    assert_eq!(code(&["born", "--engines", "analytic,oracle"]), Some(2));
    assert_eq!(code(&["born", "--outcome", "a:0.5"]), Some(2));
    assert_eq!(code(&["analytic", "--v", "1"]), Some(2));
    assert_eq!(code(&["headline", "--workers", "0"]), Some(2));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"model": {"p": 0.6, "q": 0.4}}"#).unwrap();
    let o = run_in(tmp.path(), &["scan", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains('q'));
}

#[test]
fn help_exits_cleanly() {
    let o = mangle(&["--help"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("validate"));
}

#[test]
fn monte_carlo_files_do_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for w in ["1", "2", "8"] {
        let name = format!("w{w}");
        let mut args = vec!["mc", "--workers", w, "--name", &name];
        args.extend_from_slice(SMALL_MC);
        let o = run_in(tmp.path(), &args);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let dir = tmp.path().join(&name);
        let files = csv_files(&dir);
        assert!(files.len() >= 3);
        runs.push(
            files
                .iter()
                .map(|f| fs::read(f).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn written_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str])] = &[
        ("mc", SMALL_MC),
        ("analytic", &["--p", "0.6", "--eps", "0.3"]),
        (
            "pde",
            &[
                "--t1",
                "50",
                "--t2",
                "200",
                "--n-cells",
                "1024",
                "--y-max",
                "20",
            ],
        ),
        (
            "born",
            &[
                "--t1",
                "50",
                "--t2",
                "200",
                "--n-cells",
                "1024",
                "--n-paths",
                "5000",
                "--seed",
                "2",
            ],
        ),
    ];
    for (cmd, extra) in cases {
        let mut args = vec![*cmd, "--name", "first"];
        args.extend_from_slice(extra);
        let o = run_in(tmp.path(), &args);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let first = tmp.path().join("first");
        let config = first.join("config.json");
        let o = run_in(
            tmp.path(),
            &[
                cmd,
                "--config",
                config.to_str().unwrap(),
                "--name",
                "second",
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{cmd}");
        let second = tmp.path().join("second");
        let (a, b) = (csv_files(&first), csv_files(&second));
        assert!(!a.is_empty());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                fs::read(x).unwrap(),
                fs::read(y).unwrap(),
                "{cmd}: {}",
                x.display()
            );
        }
        let renamed = read(&second, "config.json").replace("\"second\"", "\"first\"");
        assert_eq!(read(&first, "config.json"), renamed);
        fs::remove_dir_all(&first).unwrap();
        fs::remove_dir_all(&second).unwrap();
    }
}

#[test]
fn output_root_precedence() {
    let env_root = tempfile::tempdir().unwrap();
    let flag_root = tempfile::tempdir().unwrap();
    let o = mangle(&["scan"])
        .env("MANGLE_OUT", env_root.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_root.path().join("scan/scan.csv").is_file());

    let o = mangle(&["scan", "--out", flag_root.path().to_str().unwrap()])
        .env("MANGLE_OUT", env_root.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_root.path().join("scan/scan.csv").is_file());
}

#[test]
fn csv_floats_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_in(tmp.path(), &["scan"]).status.code(), Some(0));
    let csv = read(&tmp.path().join("scan"), "scan.csv");
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "v").expect("v column");
    let v: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .nth(col)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(v, std::f64::consts::LN_2);
}
