use std::path::Path;
use std::process::{Command, Output};

fn wigner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wigner")).args(args).output().unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(wigner(&["verify-combinatorics", "--empty"]).status.code(), Some(0));
    let fault = wigner(&["verify-combinatorics", "--empty", "--count-max-len", "8", "--inject-fault", "2,3"]);
    assert_eq!(fault.status.code(), Some(1));
    let out = String::from_utf8(fault.stdout).unwrap();
    assert!(out.contains("check,trajectory_count.pass,0"));
    assert_eq!(wigner(&["census", "--law", "cauchy"]).status.code(), Some(2));
    assert_eq!(wigner(&["census", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(wigner(&["trace-growth", "--theta", "0.5", "--n", "5"]).status.code(), Some(2));
    assert_eq!(wigner(&["oracle-compare", "--n", "200", "--power", "6"]).status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# census run\nn = 12\nsamples = 3\ntheta = 2\nseed = 5\nformat = json\n").unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let st = wigner(&["census", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status;
    assert!(st.code() == Some(0) || st.code() == Some(1));
    wigner(&["census", "--config", cfg.to_str().unwrap(), "--samples", "4", "--out", b.to_str().unwrap()]);
    let ja: serde_json::Value = serde_json::from_str(&read(&a)).unwrap();
    let jb: serde_json::Value = serde_json::from_str(&read(&b)).unwrap();
    let samples = |j: &serde_json::Value| {
        j["checks"][0]["params"]["samples"].as_u64().unwrap()
    };
    assert_eq!((samples(&ja), samples(&jb)), (3, 4));
    assert_eq!(ja["checks"][0]["params"]["n"], 12);
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("r.csv");
    let j = dir.path().join("r.json");
    let common = ["fluctuations", "--n", "20", "--samples", "10", "--theta", "3", "--seed", "2"];
    wigner(&[&common[..], &["--out", c.to_str().unwrap()]].concat());
    wigner(&[&common[..], &["--format", "json", "--out", j.to_str().unwrap()]].concat());
    let csv = read(&c);
    let json: serde_json::Value = serde_json::from_str(&read(&j)).unwrap();
    let records = json["records"].as_array().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sample,statistic,value"));
    for (line, rec) in lines.zip(records) {
        let parts: Vec<&str> = line.split(',').collect();
        assert_eq!(parts[0], rec["sample"].as_str().unwrap());
        assert_eq!(parts[1], rec["statistic"].as_str().unwrap());
        assert_eq!(parts[2].parse::<f64>().unwrap(), rec["value"].as_f64().unwrap());
    }
    assert_eq!(records.len(), 40);
}
