use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qsd::cohring::GeometryTriple;
use qsd::hypergeo::{TheoryDatum, TwistSpec};
use qsd_cli::{load_theory, Cache, CacheKey, CliError, Source};
use serde_json::Value;

fn qsd(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsd"))
        .args(args)
        .env("QSD_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_scenario(dir: &Path, body: &str) -> String {
    let p = dir.join("scenario.json");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn local_p2_invariants_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), r#"{"space": "P2", "bundle": [3], "D": 2, "suites": ["invariants"]}"#);
    let out = qsd(&["run", &file], &dir.path().join("cache"));
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let derived = &v["reports"][0]["suites"][0]["derived"];
    assert_eq!(derived[0]["value"], "3");
    assert_eq!(derived[1]["value"], "-45/8");
}

#[test]
fn p1_line_bundle_passes_every_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsd(&["verify", "--space", "P1", "--bundle", "1", "--order", "3", "--suite", "all"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    let suites = v["reports"][0]["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 7);
    assert!(suites.iter().all(|s| s["status"] == "pass"));
}

#[test]
fn negative_degree_is_a_scope_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), r#"{"space": "P2", "bundle": [-1], "order": 2, "suites": ["flatness"]}"#);
    let out = qsd(&["run", &file], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let s = &json(&out)["reports"][0]["suites"][0];
    assert_eq!(s["status"], "scope-error");
    assert!(s["error"].as_str().unwrap().contains("not convex"));
}

#[test]
fn non_fano_bundle_is_out_of_mirror_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsd(&["verify", "--space", "P1", "--bundle", "3", "--order", "2", "--suite", "flatness"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(json(&out)["reports"][0]["suites"][0]["error"].as_str().unwrap().contains("mirror map out of range"));
}

#[test]
fn malformed_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsd(&["verify", "--space", "P2", "--bundle", "1", "--order", "9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let file = write_scenario(dir.path(), r#"{"space": "P2", "bundle": [1], "order": 2, "suites": ["nope"]}"#);
    assert_eq!(qsd(&["run", &file], dir.path()).status.code(), Some(2));
}

#[test]
fn warm_and_cold_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let file = write_scenario(
        dir.path(),
        r#"[{"space": "P2", "bundle": [1], "order": 2},
            {"space": "P2", "bundle": [3], "order": 2, "suites": ["invariants", "compact"]}]"#,
    );
    let cold = qsd(&["run", &file], &cache);
    assert!(String::from_utf8_lossy(&cold.stderr).contains("computed, cached"));
    let warm = qsd(&["run", &file], &cache);
    assert!(String::from_utf8_lossy(&warm.stderr).contains("cache hit"));
    let uncached = qsd(&["--no-cache", "run", &file], &cache);
    assert_eq!(cold.status.code(), Some(0));
    assert_eq!(cold.stdout, warm.stdout);
    assert_eq!(cold.stdout, uncached.stdout);
    let text_cold = qsd(&["--format", "text", "run", &file], &dir.path().join("other"));
    let text_warm = qsd(&["--format", "text", "run", &file], &dir.path().join("other"));
    assert_eq!(text_cold.stdout, text_warm.stdout);
    // batch order follows the file
    let v = json(&cold);
    assert_eq!(v["reports"][0]["scenario"]["bundle"][0], 1);
    assert_eq!(v["reports"][1]["scenario"]["bundle"][0], 3);
}

#[test]
fn corrupt_entries_are_recomputed_by_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let args = ["invariants", "--space", "P2", "--bundle", "3", "--degrees", "3"];
    let cold = qsd(&args, &cache);
    for entry in fs::read_dir(&cache).unwrap() {
        fs::write(entry.unwrap().path(), "{ not json").unwrap();
    }
    let again = qsd(&args, &cache);
    assert!(String::from_utf8_lossy(&again.stderr).contains("corrupt"));
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(cold.stdout, again.stdout);
    let derived = &json(&again)["reports"][0]["suites"][0]["derived"];
    assert_eq!(derived[2]["value"], "244/9");
}

#[test]
fn series_command_prints_the_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsd(&["series", "--twist", "inverse-euler", "--space", "P1", "--bundle", "1", "--order", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["twist"], "inverse-euler");
    assert_eq!(v["data"]["l"].as_array().unwrap().len(), 2);
    let text = qsd(
        &["--format", "text", "series", "--twist", "euler", "--space", "P2", "--bundle", "1", "--order", "2"],
        dir.path(),
    );
    assert!(String::from_utf8_lossy(&text.stdout).contains("L[0,0]"));
}

fn theory_key(order: usize) -> (GeometryTriple, CacheKey) {
    let g = GeometryTriple::new(2, vec![1]).unwrap();
    let key = CacheKey::new(&g, TwistSpec::EulerTwist, order);
    (g, key)
}

#[test]
fn cache_round_trip_and_miss() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::new(dir.path());
    let (g, key) = theory_key(2);
    assert!(cache.get(&key).unwrap().is_none());
    let t = TheoryDatum::build(&g, TwistSpec::EulerTwist, 2).unwrap();
    cache.put(&key, &t.parts()).unwrap();
    assert_eq!(cache.get(&key).unwrap(), Some(t.parts()));
    let (_, other) = theory_key(3);
    assert!(cache.get(&other).unwrap().is_none());
    assert_ne!(key.digest(), other.digest());
}

#[test]
fn tampered_payload_is_detected_and_replaced() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::new(dir.path());
    let (g, key) = theory_key(2);
    let (t, source) = load_theory(Some(&cache), &g, TwistSpec::EulerTwist, 2).unwrap();
    assert_eq!(source, Source::Miss);
    // change one coefficient but keep the file well formed
    let path = cache.path(&key);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let terms = v["payload"]["l"][1][0]["terms"].as_array_mut().unwrap();
    terms[0][4] = Value::String("12345".into());
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    assert!(matches!(cache.get(&key), Err(CliError::CacheCorrupt(..))));
    let (again, source) = load_theory(Some(&cache), &g, TwistSpec::EulerTwist, 2).unwrap();
    assert_eq!(source, Source::Recomputed);
    assert_eq!(again.parts(), t.parts());
    let (_, source) = load_theory(Some(&cache), &g, TwistSpec::EulerTwist, 2).unwrap();
    assert_eq!(source, Source::Hit);
}
