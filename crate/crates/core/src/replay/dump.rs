//! Dump parsing and two-stage launch-descriptor introspection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CaptureMethod, LaunchDescriptor, ReplayError};
use crate::device::{Component, IntentMsg};
use crate::text::unescape;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub app_id: String,
    pub activity: String,
    pub intent: IntentMsg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpTask {
    pub app_id: String,
    pub task_id: u64,
    /// Bottom to top.
    pub records: Vec<DumpRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDump {
    pub tasks: Vec<DumpTask>,
    pub warnings: Vec<String>,
}

impl ParsedDump {
    pub fn records(&self) -> impl Iterator<Item = &DumpRecord> {
        self.tasks.iter().flat_map(|t| t.records.iter())
    }
}

/// Fields that may hold the literal "-" (absent) marker.
fn opt_field(raw: &str) -> Option<String> {
    (raw != "-").then(|| unescape(raw))
}

fn parse_task_line(line: &str) -> Option<(String, u64)> {
    let rest = line.strip_prefix("TASK ")?;
    let (app, id) = rest.split_once(' ')?;
    let id = id.strip_prefix("id=")?.parse().ok()?;
    if app.is_empty() {
        return None;
    }
    Some((unescape(app), id))
}

fn parse_component(raw: &str) -> Option<Component> {
    let (app, act) = raw.split_once('/')?;
    if app.is_empty() || act.is_empty() || act.contains('/') {
        return None;
    }
    Some(Component::new(unescape(app), unescape(act)))
}

fn parse_activity_line(line: &str) -> Option<Component> {
    parse_component(line.strip_prefix("  ACTIVITY ")?)
}

pub(crate) fn parse_intent_line(line: &str) -> Option<IntentMsg> {
    let body = line.strip_prefix("    intent={")?.strip_suffix('}')?;
    let mut parts = body.splitn(4, ' ');
    let act = parts.next()?.strip_prefix("act=")?;
    let dat = parts.next()?.strip_prefix("dat=")?;
    let cmp = parts.next()?.strip_prefix("cmp=")?;
    let extras_raw = parts.next()?.strip_prefix("extras={")?.strip_suffix('}')?;
    if act == "-" {
        return None;
    }
    let component = match cmp {
        "-" => None,
        c => Some(parse_component(c)?),
    };
    let mut extras = BTreeMap::new();
    if !extras_raw.is_empty() {
        for pair in extras_raw.split(',') {
            let (k, v) = pair.split_once('=')?;
            if v.contains('=') {
                return None;
            }
            extras.insert(unescape(k), unescape(v));
        }
    }
    Some(IntentMsg {
        action: unescape(act),
        data_uri: opt_field(dat),
        component,
        extras,
    })
}

/// Total parser for the dump grammar. Lines that do not fit are skipped and
/// reported in `warnings`.
pub fn parse_dump(text: &str) -> ParsedDump {
    let mut out = ParsedDump::default();
    let mut pending: Option<Component> = None;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some((app_id, task_id)) = parse_task_line(line) {
            if let Some(c) = pending.take() {
                out.warnings.push(format!("line {no}: activity {c} has no intent line"));
            }
            out.tasks.push(DumpTask {
                app_id,
                task_id,
                records: Vec::new(),
            });
        } else if let Some(c) = parse_activity_line(line) {
            if let Some(prev) = pending.replace(c) {
                out.warnings.push(format!("line {no}: activity {prev} has no intent line"));
            }
        } else if let Some(intent) = parse_intent_line(line) {
            let Some(c) = pending.take() else {
                out.warnings.push(format!("line {no}: intent outside an activity"));
                continue;
            };
            if out.tasks.is_empty() {
                // header lost: keep the records under a placeholder task
                out.warnings.push(format!("line {no}: activity {c} before any TASK line"));
                out.tasks.push(DumpTask {
                    app_id: c.app_id.clone(),
                    task_id: 0,
                    records: Vec::new(),
                });
            }
            let task = out.tasks.last_mut().expect("task pushed above");
            task.records.push(DumpRecord {
                app_id: c.app_id,
                activity: c.activity,
                intent,
            });
        } else {
            out.warnings.push(format!("line {no}: unrecognised line skipped"));
        }
    }
    if let Some(c) = pending {
        out.warnings.push(format!("activity {c} has no intent line"));
    }
    out
}

fn descriptor(intent: IntentMsg, method: CaptureMethod, fallback: Component) -> LaunchDescriptor {
    LaunchDescriptor {
        action: intent.action,
        data_uri: intent.data_uri,
        component: intent.component.unwrap_or(fallback),
        extras: intent.extras,
        capture_method: method,
    }
}

/// Stage one: find the app's TASK block by keyword and read only the
/// intent line under its last ACTIVITY.
fn keyword_filter(app_id: &str, dump: &str) -> Option<LaunchDescriptor> {
    let lines: Vec<&str> = dump.lines().collect();
    let start = lines
        .iter()
        .position(|l| l.starts_with("TASK ") && parse_task_line(l).is_some_and(|(a, _)| a == app_id))?;
    let end = lines[start + 1..]
        .iter()
        .position(|l| l.starts_with("TASK "))
        .map_or(lines.len(), |p| start + 1 + p);
    let block = &lines[start + 1..end];
    let act_idx = block.iter().rposition(|l| l.starts_with("  ACTIVITY "))?;
    let activity = parse_activity_line(block[act_idx])?;
    let intent = parse_intent_line(block.get(act_idx + 1)?)?;
    Some(descriptor(intent, CaptureMethod::KeywordFilter, activity))
}

/// Stage two: full parse, last record whose ACTIVITY belongs to the app.
fn full_parse(app_id: &str, dump: &str) -> Option<LaunchDescriptor> {
    let parsed = parse_dump(dump);
    let rec = parsed.records().filter(|r| r.app_id == app_id).last()?.clone();
    let fallback = Component::new(rec.app_id, rec.activity);
    Some(descriptor(rec.intent, CaptureMethod::FullParse, fallback))
}

pub fn introspect_entry(app_id: &str, dump: &str) -> Result<LaunchDescriptor, ReplayError> {
    keyword_filter(app_id, dump)
        .or_else(|| full_parse(app_id, dump))
        .ok_or_else(|| ReplayError::AppNotRunning(app_id.to_string()))
}

/// Both stages, for agreement checks.
pub fn introspect_both(app_id: &str, dump: &str) -> (Option<LaunchDescriptor>, Option<LaunchDescriptor>) {
    (keyword_filter(app_id, dump), full_parse(app_id, dump))
}
