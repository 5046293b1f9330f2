use std::path::Path;
use std::process::{Command, Output};

fn kquad(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kquad"))
        .args(args)
        .current_dir(cwd)
        .env_remove("KQUAD_THREADS")
        .output()
        .expect("kquad binary runs")
}

fn write_grid(path: &Path, n: usize) {
    let mut text = String::from("x,y\n");
    for i in 0..n {
        let t = i as f64 / n as f64;
        text.push_str(&format!("{},{}\n", (7.0 * t).fract(), (13.0 * t + 0.1).fract()));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn run_writes_raw_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.conf"),
        "dataset = uniform_cube:d=1\nn = 200\nkernel = sobolev:s=1\ntarget = uniform_cube\n\
         methods = monte-carlo uniform\nm_grid = 4 8 16 32\ntrials = 3\nseed = 1\n\
         output = out/raw.csv\nsummary = out/summary.csv\n",
    )
    .unwrap();
    let out = kquad(&["run", "exp.conf"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let raw = std::fs::read_to_string(dir.path().join("out/raw.csv")).unwrap();
    assert_eq!(raw.lines().next().unwrap(), "method,m,trial,error,sample_time_s,weight_time_s,total_time_s");
    assert_eq!(raw.lines().count(), 1 + 2 * 4 * 3);
    assert!(!raw.contains('\r'));

    let out = kquad(&["rates", "--summary", "out/summary.csv", "--model", "sobolev:s=1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "method,points,fitted_slope,r_squared,predicted_slope");
    assert!(lines[1].starts_with("monte-carlo,4,") && lines[2].starts_with("uniform,4,"));
}

#[test]
fn compress_round_trips_through_the_rule_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(&dir.path().join("pts.csv"), 120);
    for method in ["uniform", "arls:pilot=20", "fp-greedy", "monte-carlo"] {
        let out = kquad(
            &[
                "compress", "--input", "pts.csv", "--kernel", "gaussian:sigma=0.3", "--method", method, "--m", "10",
                "--seed", "4", "--output", "rule.csv",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.contains("n=120 m=10 error="), "{stdout}");
        let rule = std::fs::read_to_string(dir.path().join("rule.csv")).unwrap();
        assert_eq!(rule.lines().next().unwrap(), "index,x_1,x_2,weight");
        assert_eq!(rule.lines().count(), 11);
    }
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(&dir.path().join("pts.csv"), 20);
    std::fs::write(dir.path().join("ragged.csv"), "1,2\n3\n").unwrap();
    std::fs::write(dir.path().join("bad.conf"), "dataset = uniform_cube\nn = 10\nkernel = sobolev:s=1\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "missing.conf"],
        vec!["run", "bad.conf"],
        vec!["compress", "--input", "ragged.csv", "--kernel", "gaussian", "--method", "uniform", "--m", "2", "--output", "r.csv"],
        vec!["compress", "--input", "pts.csv", "--kernel", "cubic", "--method", "uniform", "--m", "2", "--output", "r.csv"],
        vec!["compress", "--input", "pts.csv", "--kernel", "gaussian", "--method", "uniform", "--m", "50", "--output", "r.csv"],
        vec!["rates", "--summary", "missing.csv", "--model", "monte-carlo"],
        vec!["compress", "--input", "pts.csv"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = kquad(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(kquad(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn thread_cap_must_be_a_positive_integer() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.conf"),
        "dataset = uniform_cube\nn = 50\nkernel = gaussian:sigma=0.2\nmethods = uniform\nm_grid = 4\noutput = r.csv\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kquad"))
        .args(["run", "exp.conf"])
        .current_dir(dir.path())
        .env("KQUAD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
