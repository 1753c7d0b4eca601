use std::collections::BTreeMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::MemoryError;

/// Per-session runtime context.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingMemory {
    pub session_id: String,
    pub goal: String,
    /// Number of executed agent steps.
    pub step_index: usize,
    pub turns: Vec<(String, String)>,
    pub screenshot_refs: Vec<String>,
    pub compressed_observations: Vec<String>,
    pub last_action_result: String,
    pub artifacts: Vec<String>,
}

impl WorkingMemory {
    pub fn new(session_id: &str) -> Self {
        Self {
            session_id: session_id.into(),
            ..Self::default()
        }
    }

    /// Apply every event except `Resume`, which needs a store.
    pub fn apply(&mut self, event: WorkingEvent) {
        match event {
            WorkingEvent::Observation(o) => self.compressed_observations.push(o),
            WorkingEvent::Screenshot(id) => {
                if self.screenshot_refs.last() != Some(&id) {
                    self.screenshot_refs.push(id);
                }
            }
            WorkingEvent::ActionResult(r) => {
                self.last_action_result = r;
                self.step_index += 1;
            }
            WorkingEvent::GoalSet(g) => {
                // a new goal starts a new step count
                self.goal = g;
                self.step_index = 0;
            }
            WorkingEvent::Turn { role, text } => self.turns.push((role, text)),
            WorkingEvent::Artifact(id) => self.artifacts.push(id),
            WorkingEvent::Resume => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingEvent {
    Observation(String),
    Screenshot(String),
    ActionResult(String),
    GoalSet(String),
    Turn { role: String, text: String },
    Artifact(String),
    Resume,
}

/// Persisted working memories keyed by session.
#[derive(Debug, Default)]
pub struct WorkingMemoryStore {
    sessions: RwLock<BTreeMap<String, WorkingMemory>>,
}

impl WorkingMemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn persist(&self, wm: &WorkingMemory) {
        self.sessions
            .write()
            .expect("working memory store poisoned")
            .insert(wm.session_id.clone(), wm.clone());
    }

    pub fn resume(&self, session_id: &str) -> Result<WorkingMemory, MemoryError> {
        self.sessions
            .read()
            .expect("working memory store poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| MemoryError::UnknownSession(session_id.into()))
    }

    pub fn sessions(&self) -> Vec<String> {
        self.sessions.read().expect("working memory store poisoned").keys().cloned().collect()
    }
}

pub fn update_working(
    mut wm: WorkingMemory,
    event: WorkingEvent,
    store: &WorkingMemoryStore,
) -> Result<WorkingMemory, MemoryError> {
    if event == WorkingEvent::Resume {
        return store.resume(&wm.session_id);
    }
    wm.apply(event);
    Ok(wm)
}
