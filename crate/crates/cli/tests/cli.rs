use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

const DATASET: &str =
    "payload,label\n\"1' or 1 = 1 --+\",1\n1 or 2=2,1\nhello,0\n\"1 union select name, secret from users\",1\n";

fn semsqli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semsqli")).args(args).env_remove("SEMSQLI_CONFIG").output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(semsqli(&["--help"]).status.code(), Some(0));
    assert_eq!(semsqli(&["launch"]).status.code(), Some(1));
    assert_eq!(semsqli(&["attack"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", DATASET);
    assert_eq!(semsqli(&["attack", "--dataset", &data, "--strategy", "dfs"]).status.code(), Some(1));
    assert_eq!(semsqli(&["attack", "--dataset", &data, "--budget", "0"]).status.code(), Some(1));
    let o = semsqli(&["attack", "--dataset", &data, "--strategy", "pqueue"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn attack_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", DATASET);
    let out = dir.path().join("out");
    let o = semsqli(&[
        "attack",
        "--dataset",
        &data,
        "--target",
        "mock-hardened",
        "--query-cap",
        "40",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--parallel",
        "1",
        "--audit-all-mutants",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("ASR"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for key in ["version", "config", "aggregates", "records"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(json["records"].as_array().unwrap().len(), 4);
    assert_eq!(json["config"]["attack"]["query_cap"], 40);
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().contains("FNR"));
}

#[test]
fn format_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "payload,label\nok,1\nbad,9\n");
    let o = semsqli(&["attack", "--dataset", &bad]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert_eq!(semsqli(&["attack", "--dataset", "/nonexistent.csv"]).status.code(), Some(3));
    assert_eq!(semsqli(&["oracle-check", "--dataset", &bad]).status.code(), Some(3));
}

#[test]
fn http_target_requires_acknowledgment() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", DATASET);
    let o = semsqli(&["attack", "--dataset", &data, "--target", "http", "--url", "http://127.0.0.1:9/"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--i-own-this-target"));

    // the config file cannot stand in for the flag
    let cfg = write(dir.path(), "c.toml", "[http]\nurl = \"http://127.0.0.1:9/\"\ni_own_this_target = true\n");
    let o = Command::new(env!("CARGO_BIN_EXE_semsqli"))
        .args(["attack", "--dataset", &data, "--target", "http"])
        .env("SEMSQLI_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unreachable_target_is_a_detector_failure() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", DATASET);
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("[http]\nurl = \"http://127.0.0.1:{port}/\"\ntransport_retries = 0\ntimeout_secs = 1.0\nrate_limit_per_sec = 1000.0\n"),
    );
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_semsqli"))
        .args(["attack", "--dataset", &data, "--target", "http", "--i-own-this-target", "--parallel", "1"])
        .args(["--out", out.to_str().unwrap()])
        .env("SEMSQLI_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("INCOMPLETE"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["aggregates"]["incomplete"], true);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", DATASET);
    let out = dir.path().join("out");
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!(
            "[attack]\ndataset = {data:?}\nstrategy = \"random\"\nquery_cap = 7\nout = {:?}\n",
            out.to_str().unwrap()
        ),
    );
    let o = semsqli(&["--config", &cfg, "attack", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["attack"]["strategy"], "random");
    assert_eq!(json["config"]["attack"]["query_cap"], 7);
    assert_eq!(json["config"]["seed"], 2);

    let broken = write(dir.path(), "broken.toml", "[attack]\nsteps = \"many\"\n");
    assert_eq!(semsqli(&["--config", &broken, "attack"]).status.code(), Some(3));
}

#[test]
fn compare_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", DATASET);
    let other = write(dir.path(), "e.csv", "payload,label\n1 or 3=3,1\n");
    let mut paths = Vec::new();
    for (name, strategy, dataset) in [("a", "mcts", &data), ("b", "random", &data), ("c", "mcts", &other)] {
        let out = dir.path().join(name);
        let o = semsqli(&[
            "attack",
            "--dataset",
            dataset,
            "--strategy",
            strategy,
            "--query-cap",
            "30",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        paths.push(out.join("report.json").display().to_string());
    }
    let o = semsqli(&["compare", &paths[0], &paths[1]]);
    assert_eq!(o.status.code(), Some(0));
    let table = stdout(&o);
    assert!(table.contains("mcts/0") && table.contains("random/0"), "{table}");
    let o = semsqli(&["compare", "--json", &paths[0]]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["columns"].as_array().unwrap().len(), 1);
    assert_eq!(semsqli(&["compare", &paths[0], &paths[2]]).status.code(), Some(1));
    let junk = write(dir.path(), "junk.json", "{");
    assert_eq!(semsqli(&["compare", &junk]).status.code(), Some(3));
}

#[test]
fn oracle_check_reports_vgp() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", DATASET);
    let out = dir.path().join("audit.json");
    let o = semsqli(&["oracle-check", "--dataset", &data, "--seeds", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("VGP 100.00%"), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["checked"], 9);
}

#[test]
fn rules_lint() {
    let o = semsqli(&["rules", "lint"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok: "));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "r.tsv",
        "a\tnon_robust\tnone\tx\na\tnon_robust\tnone\ty\nb\tnowhere\tnone\tz\nc\tnon_robust\tnone\t(\n",
    );
    let o = semsqli(&["rules", "lint", &bad]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("line 2") && text.contains("line 3") && text.contains("line 4"), "{text}");
}
