use std::path::PathBuf;

use pocket_host::scenario::run;
use pocket_host::{run_scenario, ModelEndpointConfig, Scenario, Store};
use serde_json::{json, Value};

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str) -> Scenario {
    Scenario::load(&path(name)).unwrap()
}

fn offline() -> ModelEndpointConfig {
    ModelEndpointConfig::disabled()
}

#[test]
fn shipped_scenarios_pass() {
    for name in ["a1.json", "a2.json", "b.json", "c.json"] {
        let dir = tempfile::tempdir().unwrap();
        let r = run_scenario(&path(name), Store::new(dir.path()), &offline()).unwrap();
        assert!(r.passed(), "{}", r.render());
        assert!(r.step_errors.is_empty(), "{}", r.render());
        assert_eq!(r.steps_executed, load(name).script.len());
        assert!(r.expectations_passed > 0);
    }
}

#[test]
fn empty_script_passes() {
    let mut s = load("a1.json");
    s.script.clear();
    let dir = tempfile::tempdir().unwrap();
    let r = run(&s, Store::new(dir.path()), &offline()).unwrap();
    assert!(r.passed());
    assert_eq!(r.steps_executed, 0);
    assert_eq!(r.expectations_passed, 0);
    assert!(r.artifacts_written.is_empty());
}

#[test]
fn wrong_expectation_names_its_step() {
    let mut s = load("a2.json");
    let idx = s
        .script
        .iter()
        .position(|st| serde_json::to_value(st).unwrap()["probe"] == "last_executed_steps")
        .unwrap();
    let mut v = serde_json::to_value(&s.script[idx]).unwrap();
    v["equals"] = json!(4);
    s.script[idx] = serde_json::from_value(v).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let r = run(&s, Store::new(dir.path()), &offline()).unwrap();
    assert!(!r.passed());
    assert_eq!(r.expectations_failed.len(), 1);
    let f = &r.expectations_failed[0];
    assert_eq!(f.step, idx + 1);
    assert_eq!(f.probe, "last_executed_steps");
    assert_eq!(f.expected, json!(4));
    assert_eq!(f.actual, json!(3));
    assert!(r.render().contains(&format!("step {} expect last_executed_steps", idx + 1)));
    // later steps still ran
    assert_eq!(r.steps_executed, s.script.len());
}

#[test]
fn step_errors_are_reported_and_the_run_continues() {
    let s: Scenario = serde_json::from_value(json!({
        "name": "broken",
        "script": [
            {"do": "replay", "name": "missing"},
            {"do": "expect", "probe": "queue_length", "equals": 0}
        ]
    }))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = run(&s, Store::new(dir.path()), &offline()).unwrap();
    assert_eq!(r.step_errors.len(), 1);
    assert_eq!(r.step_errors[0].step, 1);
    assert!(r.step_errors[0].detail.contains("missing"));
    assert_eq!(r.expectations_passed, 1);
    assert!(r.passed());
}

#[test]
fn artifacts_and_skills_land_in_the_layout() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario(&path("a1.json"), Store::new(dir.path()), &offline()).unwrap();
    assert_eq!(r.artifacts_written.len(), 1);
    let art = dir.path().join("sessions/main/artifacts/artifact-001.json");
    assert_eq!(PathBuf::from(&r.artifacts_written[0]), art);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&art).unwrap()).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 13);

    let dir = tempfile::tempdir().unwrap();
    run_scenario(&path("c.json"), Store::new(dir.path()), &offline()).unwrap();
    assert!(dir.path().join("bookmarks/flash.txt").exists());
    assert_eq!(std::fs::read_dir(dir.path().join("skills")).unwrap().count(), 1);
    assert_eq!(std::fs::read_dir(dir.path().join("traces")).unwrap().count(), 1);
}

#[test]
fn reruns_write_identical_bytes() {
    let read_all = |root: &std::path::Path| {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    };
    for name in ["a1.json", "b.json", "c.json"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_scenario(&path(name), Store::new(a.path()), &offline()).unwrap();
        run_scenario(&path(name), Store::new(b.path()), &offline()).unwrap();
        assert_eq!(read_all(a.path()), read_all(b.path()), "{name}");
    }
}

#[test]
fn scheduled_trigger_is_queued_then_handled() {
    let mut s = load("a2.json");
    s.script = serde_json::from_value(json!([
        {"do": "launch", "intent": {"action": "view", "data_uri": "app://quiz/start"}},
        {"do": "advance_clock", "ms": 50},
        {"do": "frame"},
        {"do": "expect", "probe": "queue_length", "equals": 0},
        {"do": "advance_clock", "ms": 100},
        {"do": "expect", "probe": "queue_length", "equals": 1},
        {"do": "process"},
        {"do": "expect", "probe": "last_outcome", "equals": "completed"},
        {"do": "expect", "probe": "foreground_activity", "equals": "Done"}
    ]))
    .unwrap();
    s.schedules = serde_json::from_value(json!([{
        "fire_at": 120,
        "payload": {"source": "ui", "payload": {"text": "solve these problems"}, "session_id": "alarm"}
    }]))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = run(&s, Store::new(dir.path()), &offline()).unwrap();
    assert!(r.passed(), "{}", r.render());
    assert!(r.step_errors.is_empty(), "{}", r.render());
}
