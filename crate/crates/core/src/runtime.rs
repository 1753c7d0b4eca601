//! One envelope through the whole pipeline.
//!
//! speech → echo filter → transcript → frame alignment → understanding →
//! decomposition → agent run, with two shortcuts: the `memory sync`
//! maintenance command, and ordinal follow-ups over the session's last
//! artifact.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    self, ordinal, resolve_followup, AgentEnv, AgentError, AgentStep, Decision, Outcome, RulePlanner,
    RulePlannerConfig, SessionArtifact, DEFAULT_MAX_STEPS,
};
use crate::device::{Device, DeviceError, Gesture, SceneDescriptor, TransitionResult};
use crate::ingress::{Gateway, IngressError, NormalizedPayload, RequestEnvelope, TriggerEvent};
use crate::memory::{
    memory_sync, update_working, MemoryControls, MemoryError, MemoryFile, RedactionPolicy, SyncOutcome,
    UserProfile, WorkingEvent, WorkingMemory, WorkingMemoryStore,
};
use crate::models::Models;
use crate::perception::{
    aec_filter, align, decompose, understand, understand_text, AppRegistry, Frame, FrameRing, PerceptionError,
    StructuredIntent, Understanding, Utterance, DEFAULT_AEC_WINDOW_MS, DEFAULT_POST_MS, DEFAULT_PRE_MS,
    DEFAULT_RING_CAPACITY,
};
use crate::replay::{
    distill_skill, introspect_entry, replay, Bookmark, BookmarkStore, PageSignature, Recorder, ReplayError,
    ReplayOutcome, SkillCard, SkillRegistry, Trajectory,
};
use crate::text::normalize;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Ingress(#[from] IngressError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeConfig {
    #[serde(default)]
    pub registry: AppRegistry,
    #[serde(default)]
    pub planner: RulePlannerConfig,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_aec")]
    pub aec_window_ms: u64,
    #[serde(default = "default_pre")]
    pub pre_ms: u64,
    #[serde(default = "default_post")]
    pub post_ms: u64,
    #[serde(default)]
    pub controls: MemoryControls,
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}
fn default_aec() -> u64 {
    DEFAULT_AEC_WINDOW_MS
}
fn default_pre() -> u64 {
    DEFAULT_PRE_MS
}
fn default_post() -> u64 {
    DEFAULT_POST_MS
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            registry: AppRegistry::default(),
            planner: RulePlannerConfig::default(),
            max_steps: DEFAULT_MAX_STEPS,
            aec_window_ms: DEFAULT_AEC_WINDOW_MS,
            pre_ms: DEFAULT_PRE_MS,
            post_ms: DEFAULT_POST_MS,
            controls: MemoryControls::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    /// Nothing left after echo filtering.
    Silent,
    Maintenance,
    FollowUp,
    DirectAnswer,
    Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnReport {
    pub envelope_id: String,
    pub session_id: String,
    pub kind: TurnKind,
    pub transcript: String,
    pub understanding: Option<Understanding>,
    pub intent: Option<StructuredIntent>,
    pub outcome: Option<Outcome>,
    pub steps: Vec<AgentStep>,
    pub response: Option<String>,
    pub new_artifacts: Vec<SessionArtifact>,
}

impl TurnReport {
    fn new(env: &RequestEnvelope, kind: TurnKind, transcript: String) -> Self {
        Self {
            envelope_id: env.envelope_id.clone(),
            session_id: env.session_id.clone(),
            kind,
            transcript,
            understanding: None,
            intent: None,
            outcome: None,
            steps: Vec::new(),
            response: None,
            new_artifacts: Vec::new(),
        }
    }
}

pub struct Runtime {
    pub device: Device,
    pub models: Models,
    pub gateway: Gateway,
    pub ring: FrameRing,
    pub config: RuntimeConfig,
    pub skills: SkillRegistry,
    pub bookmarks: BookmarkStore,
    pub memory_path: PathBuf,
    pub memory: MemoryFile,
    pub profile: UserProfile,
    pub policy: RedactionPolicy,
    pub sessions: WorkingMemoryStore,
    pub artifacts: BTreeMap<String, Vec<SessionArtifact>>,
    pub recorder: Recorder,
    next_frame_id: u64,
}

impl Runtime {
    pub fn new(device: Device, models: Models, config: RuntimeConfig, memory_path: PathBuf) -> Result<Self, RuntimeError> {
        let memory = MemoryFile::load(&memory_path)?;
        let profile = UserProfile::from_entries(&memory.entries, &config.controls);
        Ok(Self {
            device,
            models,
            gateway: Gateway::new(),
            ring: FrameRing::new(DEFAULT_RING_CAPACITY),
            config,
            skills: SkillRegistry::new(),
            bookmarks: BookmarkStore::new(),
            memory_path,
            memory,
            profile,
            policy: RedactionPolicy::default(),
            sessions: WorkingMemoryStore::new(),
            artifacts: BTreeMap::new(),
            recorder: Recorder::new(),
            next_frame_id: 0,
        })
    }

    // ---- frames ------------------------------------------------------------

    pub fn push_camera_frame(&mut self, timestamp: u64, scene: SceneDescriptor) -> Result<(), RuntimeError> {
        let id = self.next_frame_id;
        self.ring.push(Frame::camera(id, timestamp, scene))?;
        self.next_frame_id += 1;
        Ok(())
    }

    /// Screenshot the foreground page into the ring.
    pub fn push_screen_frame(&mut self, timestamp: u64) -> Result<(), RuntimeError> {
        let obs = self.device.snapshot()?;
        let id = self.next_frame_id;
        self.ring.push(Frame::screen(id, timestamp, &obs.screenshot_id))?;
        self.next_frame_id += 1;
        Ok(())
    }

    // ---- ingress -----------------------------------------------------------

    pub fn submit(&self, event: TriggerEvent) -> Result<RequestEnvelope, RuntimeError> {
        Ok(self.gateway.submit(event)?)
    }

    /// Poll one envelope and handle it.
    pub fn process_next(
        &mut self,
        on_step: &mut dyn FnMut(&AgentStep),
    ) -> Option<Result<TurnReport, RuntimeError>> {
        let env = self.gateway.poll_next()?;
        Some(self.handle(&env, on_step))
    }

    fn transcript(&self, env: &RequestEnvelope) -> Option<Utterance> {
        match &env.normalized_payload {
            NormalizedPayload::Text(t) => Some(Utterance {
                text: t.clone(),
                t0: env.received_at,
                t1: env.received_at,
            }),
            NormalizedPayload::Speech(segs) => {
                let mut kept = aec_filter(segs, self.device.playback(), self.config.aec_window_ms);
                kept.sort_by_key(|s| (s.t_start, s.t_end));
                let first = kept.first()?;
                Some(Utterance {
                    text: kept.iter().map(|s| s.text.trim()).collect::<Vec<_>>().join(" "),
                    t0: first.t_start,
                    t1: kept.iter().map(|s| s.t_end).max().unwrap_or(first.t_end),
                })
            }
        }
    }

    fn session(&self, id: &str) -> WorkingMemory {
        self.sessions.resume(id).unwrap_or_else(|_| WorkingMemory::new(id))
    }

    pub fn handle(
        &mut self,
        env: &RequestEnvelope,
        on_step: &mut dyn FnMut(&AgentStep),
    ) -> Result<TurnReport, RuntimeError> {
        let Some(utt) = self.transcript(env) else {
            return Ok(TurnReport::new(env, TurnKind::Silent, String::new()));
        };
        let mut wm = self.session(&env.session_id);
        wm.apply(WorkingEvent::Turn {
            role: "user".into(),
            text: utt.text.clone(),
        });

        if normalize(&utt.text) == "memory sync" {
            let out = self.sync_memory()?;
            let mut r = TurnReport::new(env, TurnKind::Maintenance, utt.text);
            r.response = Some(format!("memory sync added {} entries", out.appended.len()));
            self.sessions.persist(&wm);
            return Ok(r);
        }

        let last_artifact = self.artifacts.get(&env.session_id).and_then(|a| a.last()).cloned();
        if let (Some(art), Some(_)) = (&last_artifact, ordinal(&utt.text, 0)) {
            return self.follow_up(env, utt.text, art, wm, on_step);
        }

        let understanding = if self.ring.is_empty() {
            understand_text(&utt.text, None)?
        } else {
            let aligned = align(&utt, &self.ring, self.config.pre_ms, self.config.post_ms)?;
            understand(&aligned, self.models.scene.as_ref())?
        };
        if let Understanding::DirectAnswer(a) = &understanding {
            let mut r = TurnReport::new(env, TurnKind::DirectAnswer, utt.text);
            r.response = Some(a.clone());
            r.understanding = Some(understanding.clone());
            wm.apply(WorkingEvent::Turn {
                role: "assistant".into(),
                text: a.clone(),
            });
            self.sessions.persist(&wm);
            return Ok(r);
        }
        let Understanding::Expanded(expanded) = &understanding else {
            unreachable!("direct answers returned above")
        };
        let intent = decompose(expanded, &self.config.registry);
        let mut planner = RulePlanner::new(self.config.planner.clone());
        let mut agent_env = AgentEnv::new(&mut self.device, &self.models, &self.skills, &self.memory, &self.profile);
        let result = agent::run(&intent, &mut planner, &mut agent_env, wm, self.config.max_steps, on_step)?;
        self.sessions.persist(&result.wm);
        self.artifacts
            .entry(env.session_id.clone())
            .or_default()
            .extend(result.artifacts.iter().cloned());
        let mut r = TurnReport::new(env, TurnKind::Task, utt.text);
        r.understanding = Some(understanding);
        r.intent = Some(intent);
        r.outcome = Some(result.outcome);
        r.steps = result.steps;
        r.response = result.response;
        r.new_artifacts = result.artifacts;
        Ok(r)
    }

    fn follow_up(
        &mut self,
        env: &RequestEnvelope,
        text: String,
        art: &SessionArtifact,
        wm: WorkingMemory,
        on_step: &mut dyn FnMut(&AgentStep),
    ) -> Result<TurnReport, RuntimeError> {
        let decision = resolve_followup(&text, Some(art))?;
        let Decision::Act { action, .. } = &decision else {
            unreachable!("follow-ups always act")
        };
        let digest = self
            .device
            .snapshot()
            .map(|o| PageSignature::of(&o).digest)
            .unwrap_or_else(|_| "none".into());
        let mut scratch = Vec::new();
        let mut agent_env = AgentEnv::new(&mut self.device, &self.models, &self.skills, &self.memory, &self.profile);
        let result = agent::execute(action, &mut agent_env, &mut scratch).unwrap_or_else(|e| format!("error: {e}"));
        let store = WorkingMemoryStore::new();
        let wm = update_working(wm, WorkingEvent::ActionResult(result.clone()), &store)?;
        self.sessions.persist(&wm);
        let step = AgentStep {
            step_index: 0,
            observation_digest: digest,
            decision,
            result: result.clone(),
        };
        on_step(&step);
        let mut r = TurnReport::new(env, TurnKind::FollowUp, text);
        r.outcome = Some(Outcome::Completed);
        r.steps = vec![step];
        r.response = Some(result);
        Ok(r)
    }

    // ---- memory ------------------------------------------------------------

    pub fn sync_memory(&mut self) -> Result<SyncOutcome, RuntimeError> {
        let out = memory_sync(
            &self.device,
            self.models.summarizer.as_ref(),
            &self.policy,
            &self.memory_path,
            &self.config.controls,
        )?;
        self.memory = MemoryFile::load(&self.memory_path)?;
        self.profile = out.profile.clone();
        Ok(out)
    }

    // ---- recording and replay ----------------------------------------------

    /// Gesture routed through the recorder so active recordings see it.
    pub fn gesture(&mut self, g: &Gesture) -> Result<TransitionResult, RuntimeError> {
        Ok(self.recorder.apply_gesture(&mut self.device, g)?)
    }

    pub fn start_recording(&mut self, session: &str) -> Result<(), RuntimeError> {
        Ok(self.recorder.start(session)?)
    }

    pub fn stop_recording(&mut self) -> Result<Trajectory, RuntimeError> {
        Ok(self.recorder.stop(&self.device)?)
    }

    /// Introspect the trajectory's destination and distill a skill card.
    pub fn clone_skill(&mut self, traj: &Trajectory) -> Result<SkillCard, RuntimeError> {
        let descriptor = introspect_entry(&traj.final_app, &self.device.dumpsys_activity())?;
        let card = distill_skill(traj, &descriptor, self.models.namer.as_ref(), self.device.clock())?;
        self.skills.insert(card.clone());
        Ok(card)
    }

    pub fn bookmark(&mut self, name: &str, traj: &Trajectory) -> Result<Bookmark, RuntimeError> {
        let descriptor = introspect_entry(&traj.final_app, &self.device.dumpsys_activity())?;
        let signature = traj
            .final_signature
            .clone()
            .unwrap_or_else(|| PageSignature::new(&traj.final_activity, Vec::new()));
        let b = Bookmark {
            name: name.into(),
            summary: signature.top_texts.iter().take(3).cloned().collect::<Vec<_>>().join(" | "),
            descriptor,
            signature,
            created_at: self.device.clock(),
        };
        self.bookmarks.insert(b.clone())?;
        Ok(b)
    }

    pub fn replay_bookmark(&mut self, name: &str) -> Result<ReplayOutcome, RuntimeError> {
        let b = self.bookmarks.get(name)?.clone();
        Ok(replay(&b, &mut self.device)?)
    }
}
