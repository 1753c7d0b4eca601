//! Host side of the pocket runtime: scenario runner, persistence, the
//! optional remote model client and the HTTP/SSE server.

pub mod client;
pub mod scenario;
pub mod server;
pub mod store;

use std::path::Path;

use pocket_core::agent::AgentStep;
use pocket_core::device::{Device, DeviceError};
use pocket_core::grounding::{hybrid_ground, GroundingError, TargetSpec, DEFAULT_TAU};
use pocket_core::ingress::{TriggerEvent, TriggerPayload, TriggerSource};
use pocket_core::models::ModelError;
use pocket_core::replay::{Bookmark, ReplayOutcome, SkillCard, Trajectory};
use pocket_core::runtime::{Runtime, RuntimeConfig, RuntimeError, TurnReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{build_models, network_ops, ModelEndpointConfig};
pub use scenario::{run_scenario, Scenario, ScenarioReport};
pub use store::Store;

#[derive(Debug, Error)]
pub enum HostError {
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("cannot load {0}: {1}")]
    Load(String, String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("{0}")]
    Invalid(String),
}

impl HostError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        }
    }
}

impl From<DeviceError> for HostError {
    fn from(e: DeviceError) -> Self {
        Self::Runtime(e.into())
    }
}

/// Result of stopping a recording: the trace plus whatever was derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub trajectory: Trajectory,
    pub skill: Option<SkillCard>,
    pub bookmark: Option<Bookmark>,
    pub written: Vec<String>,
}

/// A runtime bound to a persistence root. Text triggers are stamped with
/// the device clock.
pub struct Host {
    pub rt: Runtime,
    pub store: Store,
}

impl Host {
    pub fn new(
        device: Device,
        config: RuntimeConfig,
        store: Store,
        endpoint: &ModelEndpointConfig,
    ) -> Result<Self, HostError> {
        store.init()?;
        let models = build_models(endpoint, device.screenshot_store())?;
        let mut rt = Runtime::new(device, models, config, store.memory_path())?;
        rt.skills = store.load_skills()?;
        rt.bookmarks = store.load_bookmarks()?;
        Ok(Self { rt, store })
    }

    pub fn text_event(&self, session: &str, text: &str) -> TriggerEvent {
        TriggerEvent {
            source: TriggerSource::Ui,
            timestamp: self.rt.device.clock(),
            payload: TriggerPayload::Text(text.into()),
            session_id: session.into(),
        }
    }

    /// Handle every queued envelope, persisting new artifacts.
    pub fn drain(&mut self, on_step: &mut dyn FnMut(&AgentStep)) -> Result<(Vec<TurnReport>, Vec<String>), HostError> {
        let mut reports = Vec::new();
        let mut written = Vec::new();
        while let Some(r) = self.rt.process_next(on_step) {
            let r = r?;
            for a in &r.new_artifacts {
                written.push(self.store.save_artifact(&r.session_id, a)?.display().to_string());
            }
            reports.push(r);
        }
        Ok((reports, written))
    }

    /// Submit one text trigger and handle the queue.
    pub fn query(
        &mut self,
        session: &str,
        text: &str,
        on_step: &mut dyn FnMut(&AgentStep),
    ) -> Result<(Vec<TurnReport>, Vec<String>), HostError> {
        self.rt.submit(self.text_event(session, text))?;
        self.drain(on_step)
    }

    /// Ground `query` on the current screen and tap it through the recorder.
    pub fn tap_text(&mut self, query: &str) -> Result<(), HostError> {
        let obs = self.rt.device.snapshot()?;
        let g = hybrid_ground(&obs, &TargetSpec::text(query), self.rt.models.grounder.as_ref(), DEFAULT_TAU)?;
        self.rt.gesture(&pocket_core::device::Gesture::tap(g.point))?;
        Ok(())
    }

    pub fn record_start(&mut self, session: &str) -> Result<(), HostError> {
        Ok(self.rt.start_recording(session)?)
    }

    /// Stop recording, save the trace, and optionally clone a skill card
    /// and save a bookmark.
    pub fn record_stop(&mut self, clone: bool, bookmark: Option<&str>) -> Result<RecordResult, HostError> {
        let trajectory = self.rt.stop_recording()?;
        let mut written = vec![self.store.save_trace(&trajectory)?.display().to_string()];
        let skill = if clone {
            let card = self.rt.clone_skill(&trajectory)?;
            written.push(self.store.save_skill(&card)?.display().to_string());
            Some(card)
        } else {
            None
        };
        let bookmark = match bookmark {
            Some(name) => {
                let b = self.rt.bookmark(name, &trajectory)?;
                written.push(self.store.save_bookmark(&b)?.display().to_string());
                Some(b)
            }
            None => None,
        };
        Ok(RecordResult {
            trajectory,
            skill,
            bookmark,
            written,
        })
    }

    pub fn replay(&mut self, name: &str) -> Result<ReplayOutcome, HostError> {
        Ok(self.rt.replay_bookmark(name)?)
    }
}
