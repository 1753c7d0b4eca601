//! Scripted end-to-end runs.
//!
//! A scenario file carries full app and media fixtures, alarm schedules,
//! the runtime config and an ordered script. `expect` steps never abort a
//! run: failures are collected and the report names the step.

use std::path::Path;

use pocket_core::agent::Outcome;
use pocket_core::device::{Device, Gesture, IntentMsg, MediaAsset, SceneDescriptor, SimApp};
use pocket_core::ingress::{register_schedule, ScheduleRule, TriggerEvent, TriggerPayload, TriggerSource};
use pocket_core::perception::SpeechSegment;
use pocket_core::replay::Tier;
use pocket_core::runtime::{RuntimeConfig, TurnReport};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Host, HostError, ModelEndpointConfig, Store};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub apps: Vec<SimApp>,
    #[serde(default)]
    pub media: Vec<MediaAsset>,
    #[serde(default)]
    pub schedules: Vec<ScheduleRule>,
    #[serde(default)]
    pub config: RuntimeConfig,
    #[serde(default)]
    pub script: Vec<Step>,
}

fn default_session() -> String {
    "main".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case")]
pub enum Step {
    /// Submit a trigger stamped with the device clock, then handle the queue.
    Trigger {
        #[serde(default = "default_session")]
        session: String,
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        speech: Option<Vec<SpeechSegment>>,
        #[serde(default)]
        gateway: Option<String>,
        /// Overrides the source implied by the payload kind.
        #[serde(default)]
        source: Option<TriggerSource>,
    },
    Gesture {
        gesture: Gesture,
    },
    /// Ground a label on screen and tap it.
    Tap {
        text: String,
    },
    Launch {
        intent: IntentMsg,
    },
    /// Advance the clock; fired alarms are queued, not handled.
    AdvanceClock {
        ms: u64,
    },
    /// Handle everything queued.
    Process,
    /// Camera frame when a scene is given, otherwise a screen frame.
    Frame {
        #[serde(default)]
        scene: Option<SceneDescriptor>,
    },
    Playback {
        segments: Vec<SpeechSegment>,
    },
    MemorySync,
    RecordStart {
        #[serde(default = "default_session")]
        session: String,
    },
    RecordStop {
        #[serde(default)]
        clone: bool,
        #[serde(default)]
        bookmark: Option<String>,
    },
    Replay {
        name: String,
    },
    SetExported {
        app: String,
        activity: String,
        exported: bool,
    },
    ClearDeeplinks {
        app: String,
        activity: String,
    },
    Expect {
        #[serde(flatten)]
        probe: Probe,
        #[serde(default)]
        equals: Option<Value>,
        #[serde(default)]
        contains: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "snake_case")]
pub enum Probe {
    ForegroundActivity,
    ForegroundApp,
    ArtifactRecordCount {
        #[serde(default = "default_session")]
        session: String,
    },
    /// `rank` is 1-based.
    ArtifactField {
        #[serde(default = "default_session")]
        session: String,
        rank: usize,
        field: String,
    },
    MemoryEntryCount,
    ReplayTier,
    ReplayAttempts,
    QueueLength,
    LastOutcome,
    LastResponse,
    LastExpandedQuery,
    /// Executed steps (act and skill invocations) of the last turn.
    LastExecutedSteps,
    WorkingStepIndex {
        #[serde(default = "default_session")]
        session: String,
    },
    /// Sorted filenames staged for a task.
    StagedFiles {
        task: String,
    },
    SkillCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectFailure {
    /// 1-based script position.
    pub step: usize,
    pub probe: String,
    pub expected: Value,
    pub actual: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepError {
    pub step: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub steps_executed: usize,
    pub expectations_passed: usize,
    pub expectations_failed: Vec<ExpectFailure>,
    pub step_errors: Vec<StepError>,
    pub artifacts_written: Vec<String>,
}

impl ScenarioReport {
    /// Only expectations decide the verdict; step errors are reported but
    /// surface through the expectations that follow them.
    pub fn passed(&self) -> bool {
        self.expectations_failed.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "scenario {}: {} steps, {} expectations passed, {} failed, {} step errors\n",
            self.name,
            self.steps_executed,
            self.expectations_passed,
            self.expectations_failed.len(),
            self.step_errors.len()
        );
        for f in &self.expectations_failed {
            out.push_str(&format!(
                "  step {} expect {}: wanted {}, got {}\n",
                f.step, f.probe, f.expected, f.actual
            ));
        }
        for e in &self.step_errors {
            out.push_str(&format!("  step {} failed: {}\n", e.step, e.detail));
        }
        for a in &self.artifacts_written {
            out.push_str(&format!("  wrote {a}\n"));
        }
        out
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, HostError> {
        serde_json::from_str(text).map_err(|e| HostError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HostError> {
        let text = std::fs::read_to_string(path).map_err(|e| HostError::io(path, e))?;
        Self::parse(&text)
    }

    /// Fresh device with the scenario's apps, media and alarms.
    pub fn device(&self) -> Result<Device, HostError> {
        let mut d = Device::new(self.seed);
        for app in &self.apps {
            d.install(app.clone())?;
        }
        for m in &self.media {
            d.add_media(m.clone())?;
        }
        for rule in &self.schedules {
            register_schedule(&mut d, rule.clone()).map_err(|e| HostError::Invalid(e.to_string()))?;
        }
        Ok(d)
    }
}

#[derive(Default)]
struct RunState {
    last_turn: Option<TurnReport>,
    last_tier: Option<Tier>,
    last_attempts: usize,
}

fn outcome_str(o: &Outcome) -> Value {
    serde_json::to_value(o).unwrap_or(Value::Null)
}

fn probe(host: &Host, st: &RunState, p: &Probe) -> Value {
    let rt = &host.rt;
    let page = rt.device.current_page().ok();
    let artifact = |session: &str| rt.artifacts.get(session).and_then(|a| a.last());
    match p {
        Probe::ForegroundActivity => page.map_or(Value::Null, |p| json!(p.activity)),
        Probe::ForegroundApp => page.map_or(Value::Null, |p| json!(p.app_id)),
        Probe::ArtifactRecordCount { session } => artifact(session).map_or(Value::Null, |a| json!(a.records.len())),
        Probe::ArtifactField { session, rank, field } => artifact(session)
            .and_then(|a| a.records.get(rank.checked_sub(1)?))
            .and_then(|r| r.get(field))
            .map_or(Value::Null, |v| json!(v)),
        Probe::MemoryEntryCount => json!(rt.memory.entries.len()),
        Probe::ReplayTier => st.last_tier.map_or(Value::Null, |t| serde_json::to_value(t).unwrap_or(Value::Null)),
        Probe::ReplayAttempts => json!(st.last_attempts),
        Probe::QueueLength => json!(rt.gateway.len()),
        Probe::LastOutcome => st
            .last_turn
            .as_ref()
            .and_then(|t| t.outcome.as_ref())
            .map_or(Value::Null, outcome_str),
        Probe::LastResponse => st
            .last_turn
            .as_ref()
            .and_then(|t| t.response.clone())
            .map_or(Value::Null, Value::String),
        Probe::LastExpandedQuery => st
            .last_turn
            .as_ref()
            .and_then(|t| t.intent.as_ref())
            .map_or(Value::Null, |i| json!(i.expanded_query)),
        Probe::LastExecutedSteps => st.last_turn.as_ref().map_or(Value::Null, |t| {
            json!(t.steps.iter().filter(|s| s.decision.is_executed()).count())
        }),
        Probe::WorkingStepIndex { session } => rt.sessions.resume(session).map_or(Value::Null, |wm| json!(wm.step_index)),
        Probe::StagedFiles { task } => {
            let folder = pocket_core::device::page::staging_folder(task);
            let mut names: Vec<String> = rt
                .device
                .staged(&folder)
                .unwrap_or_default()
                .iter()
                .map(|a| a.filename.clone())
                .collect();
            names.sort();
            json!(names)
        }
        Probe::SkillCount => json!(rt.skills.len()),
    }
}

fn probe_name(p: &Probe) -> String {
    serde_json::to_value(p)
        .ok()
        .and_then(|v| v.get("probe").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_default()
}

fn exec(host: &mut Host, st: &mut RunState, step: &Step, written: &mut Vec<String>) -> Result<(), HostError> {
    let mut absorb = |host: &mut Host, st: &mut RunState| -> Result<(), HostError> {
        let (reports, w) = host.drain(&mut |_| {})?;
        written.extend(w);
        if let Some(last) = reports.into_iter().last() {
            st.last_turn = Some(last);
        }
        Ok(())
    };
    match step {
        Step::Trigger {
            session,
            text,
            speech,
            gateway,
            source: forced,
        } => {
            let (source, payload) = match (text, speech, gateway) {
                (Some(t), None, None) => (TriggerSource::Ui, TriggerPayload::Text(t.clone())),
                (None, Some(s), None) => (TriggerSource::Microphone, TriggerPayload::Speech(s.clone())),
                (None, None, Some(g)) => (TriggerSource::ExternalGateway, TriggerPayload::Gateway(g.clone())),
                _ => return Err(HostError::Invalid("trigger needs exactly one of text, speech, gateway".into())),
            };
            host.rt.submit(TriggerEvent {
                source: forced.unwrap_or(source),
                timestamp: host.rt.device.clock(),
                payload,
                session_id: session.clone(),
            })?;
            absorb(host, st)?;
        }
        Step::Gesture { gesture } => {
            host.rt.gesture(gesture)?;
        }
        Step::Tap { text } => host.tap_text(text)?,
        Step::Launch { intent } => {
            host.rt.device.launch_intent(intent, false)?;
        }
        Step::AdvanceClock { ms } => {
            let fired = host.rt.device.advance_clock(*ms);
            host.rt
                .gateway
                .submit_fired(fired)
                .map_err(|e| HostError::Invalid(e.to_string()))?;
        }
        Step::Process => absorb(host, st)?,
        Step::Frame { scene } => {
            let now = host.rt.device.clock();
            match scene {
                Some(s) => host.rt.push_camera_frame(now, s.clone())?,
                None => host.rt.push_screen_frame(now)?,
            }
        }
        Step::Playback { segments } => host.rt.device.set_playback(segments.clone())?,
        Step::MemorySync => {
            host.rt.sync_memory()?;
            written.push(host.store.memory_path().display().to_string());
        }
        Step::RecordStart { session } => host.record_start(session)?,
        Step::RecordStop { clone, bookmark } => {
            let r = host.record_stop(*clone, bookmark.as_deref())?;
            written.extend(r.written);
        }
        Step::Replay { name } => {
            let out = host.replay(name)?;
            st.last_tier = Some(out.tier_used);
            st.last_attempts = out.attempts.len();
        }
        Step::SetExported { app, activity, exported } => {
            if !host.rt.device.set_exported(app, activity, *exported) {
                return Err(HostError::Invalid(format!("no activity {app}/{activity}")));
            }
        }
        Step::ClearDeeplinks { app, activity } => {
            if !host.rt.device.clear_deeplinks(app, activity) {
                return Err(HostError::Invalid(format!("no activity {app}/{activity}")));
            }
        }
        Step::Expect { .. } => unreachable!("expectations are evaluated by the runner"),
    }
    Ok(())
}

/// Run a parsed scenario against a persistence root.
pub fn run(scenario: &Scenario, store: Store, endpoint: &ModelEndpointConfig) -> Result<ScenarioReport, HostError> {
    let mut host = Host::new(scenario.device()?, scenario.config.clone(), store, endpoint)?;
    let mut report = ScenarioReport {
        name: scenario.name.clone(),
        ..Default::default()
    };
    let mut st = RunState::default();
    for (i, step) in scenario.script.iter().enumerate() {
        let no = i + 1;
        report.steps_executed += 1;
        if let Step::Expect { probe: p, equals, contains } = step {
            let actual = probe(&host, &st, p);
            let ok = match (equals, contains) {
                (Some(want), None) => *want == actual,
                (None, Some(sub)) => actual.as_str().is_some_and(|a| a.contains(sub.as_str())),
                _ => false,
            };
            if ok {
                report.expectations_passed += 1;
            } else {
                let expected = match (equals, contains) {
                    (Some(v), None) => v.clone(),
                    (None, Some(s)) => json!({ "contains": s }),
                    _ => json!("exactly one of equals, contains"),
                };
                report.expectations_failed.push(ExpectFailure {
                    step: no,
                    probe: probe_name(p),
                    expected,
                    actual,
                });
            }
            continue;
        }
        if let Err(e) = exec(&mut host, &mut st, step, &mut report.artifacts_written) {
            report.step_errors.push(StepError {
                step: no,
                detail: e.to_string(),
            });
        }
    }
    Ok(report)
}

/// Load and run the scenario at `path`.
pub fn run_scenario(path: &Path, store: Store, endpoint: &ModelEndpointConfig) -> Result<ScenarioReport, HostError> {
    run(&Scenario::load(path)?, store, endpoint)
}
