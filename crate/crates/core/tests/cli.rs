use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const REFERENCE: &str = r#"{
  "geometry": {"l0": 8, "l1": 7, "l2": 7, "l3": 5, "l4": 5, "a1": [0, 0], "a2": [8, 0]},
  "decomposition": {"min_cell": 0.203125}
}"#;

/// Runs the binary inside `dir` with a private cache.
fn mvkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvkit"))
        .current_dir(dir)
        .env("MVKIT_CACHE", dir.join("cache"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn project() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("mvkit.json"), REFERENCE).unwrap();
    dir
}

#[test]
fn validate_reports_coded_errors() {
    let dir = project();
    let ok = mvkit(dir.path(), &["validate", "mvkit.json"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).starts_with("ok:"));

    let cases = [
        ("missing.json", None, "FILE-MISSING"),
        ("broken.json", Some("{\"geometry\": "), "MALFORMED"),
        (
            "negative.json",
            Some(r#"{"geometry": {"l0": 8, "l1": -7, "l2": 7, "l3": 5, "l4": 5}}"#),
            "BAD-LENGTH",
        ),
        (
            "apart.json",
            Some(r#"{"geometry": {"l0": 8, "l1": 7, "l2": 7, "l3": 5, "l4": 5, "a1": [0, 0], "a2": [9, 0]}}"#),
            "GEOMETRY-INCONSISTENT",
        ),
    ];
    for (name, body, code) in cases {
        if let Some(body) = body {
            std::fs::write(dir.path().join(name), body).unwrap();
        }
        let o = mvkit(dir.path(), &["validate", name]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(stderr(&o).contains(&format!("error[{code}]")), "{name}: {}", stderr(&o));
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = project();
    for args in [
        &["map", "w", "--mode", "5", "--sign", "+", "--out", "x.svg"][..],
        &["map", "w", "--mode", "1", "--sign", "0", "--out", "x.svg"],
        &["frobnicate"],
        &["moveability", "--from", "1", "--to", "2,3"],
    ] {
        assert_eq!(mvkit(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn map_writes_svg_and_tree() {
    let dir = project();
    let o = mvkit(dir.path(), &["map", "w", "--mode", "2", "--sign", "+", "--out", "out/w2.svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("1 aspect(s)"));
    let svg = std::fs::read_to_string(dir.path().join("out/w2.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    let tree: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/w2.json")).unwrap()).unwrap();
    assert_eq!(tree["space"], "w");
    assert!(tree["nodes"].as_array().unwrap().len() > 4);

    let q = mvkit(dir.path(), &["map", "q", "--mode", "3", "--sign", "+", "--min-cell", "2.8125", "--out", "q3.svg"]);
    assert_eq!(q.status.code(), Some(0), "{}", stderr(&q));
    let svg = std::fs::read_to_string(dir.path().join("q3.svg")).unwrap();
    assert!(svg.contains("360.00°"));
}

#[test]
fn aspects_lists_every_sheet() {
    let dir = project();
    let o = mvkit(dir.path(), &["aspects", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows.len(), 8);
    for sign in ["+", "-"] {
        let counts: Vec<u64> = rows
            .iter()
            .filter(|r| r["sign"] == sign)
            .map(|r| r["count"].as_u64().unwrap())
            .collect();
        assert_eq!(counts.len(), 4);
        assert!(counts.iter().all(|&c| c >= 1), "{sign}: {counts:?}");
    }
    let table = mvkit(dir.path(), &["aspects"]);
    assert_eq!(stdout(&table).lines().count(), 9);
}

#[test]
fn huge_radii_leave_no_aspects() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
      "geometry": {"l0": 8, "l1": 7, "l2": 7, "l3": 5, "l4": 5, "link_radius": 3, "base_radius": 3, "platform_radius": 3},
      "decomposition": {"min_cell": 0.8125}
    }"#;
    std::fs::write(dir.path().join("fat.json"), body).unwrap();
    let o = mvkit(dir.path(), &["--config", "fat.json", "aspects", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(rows.iter().all(|r| r["count"] == 0));
}

#[test]
fn check_path_exit_follows_verdict() {
    let dir = project();
    let write = |name: &str, body: &str| std::fs::write(dir.path().join(name), body).unwrap();
    write("through_base.json", r#"{"waypoints": [[4, -4], [4, 4]], "step": 0.05}"#);
    write("inside.json", r#"{"waypoints": [[4, -4], [3, -5], [2, -6.5]]}"#);
    write("bad.json", r#"{"waypoints": [[4, -4]]}"#);

    let o = mvkit(dir.path(), &["check-path", "through_base.json", "--mode", "1", "--sign", "+", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["feasible"], false);
    assert_eq!(v["first_blocker"]["reason"]["label"], "COLLISION");

    let o = mvkit(dir.path(), &["check-path", "inside.json", "--mode", "1", "--sign", "+"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: feasible"));

    let o = mvkit(dir.path(), &["check-path", "bad.json", "--mode", "1", "--sign", "+"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[MALFORMED]"));
}

#[test]
fn moveability_needs_a_shared_aspect() {
    let dir = project();
    let o = mvkit(dir.path(), &["moveability", "--from", "4,-4", "--to", "3,-5", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(rows.iter().any(|r| r["mode"] == 1 && r["sign"] == "+" && r["serial"] == 1), "{rows:?}");

    let o = mvkit(dir.path(), &["moveability", "--from", "4,-4", "--to", "40,0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn cross_aspect_path_names_both_aspects() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("efg.json"), r#"{"waypoints": [[4, -4], [8, 4], [2.96, 10.84]]}"#).unwrap();
    let o = mvkit(dir.path(), &["check-path", "efg.json", "--mode", "1", "--sign", "+", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["start"]["aspect"]["serial"], 1, "{v}");
    assert_eq!(v["end"]["aspect"]["serial"], 2, "{v}");
}
