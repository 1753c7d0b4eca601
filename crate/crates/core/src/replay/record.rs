use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PageSignature, ReplayError};
use crate::device::{Device, DeviceError, Gesture, IntentMsg, TransitionResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceAction {
    Gesture { gesture: Gesture },
    Launch { intent: IntentMsg },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub timestamp: u64,
    /// `None` when nothing was in the foreground.
    pub pre_signature: Option<PageSignature>,
    pub action: TraceAction,
    pub post_activity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub trace_id: String,
    pub session: String,
    pub steps: Vec<TraceStep>,
    pub final_app: String,
    pub final_activity: String,
    pub final_params: BTreeMap<String, String>,
    pub final_signature: Option<PageSignature>,
}

#[derive(Debug)]
struct Active {
    session: String,
    steps: Vec<TraceStep>,
}

/// Brackets live interaction between `start` and `stop`. Actions go through
/// the recorder so each one is captured with the page it was taken on.
#[derive(Debug, Default)]
pub struct Recorder {
    active: Option<Active>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recording(&self) -> bool {
        self.active.is_some()
    }

    pub fn session(&self) -> Option<&str> {
        self.active.as_ref().map(|a| a.session.as_str())
    }

    pub fn start(&mut self, session: &str) -> Result<(), ReplayError> {
        if let Some(a) = &self.active {
            return Err(ReplayError::AlreadyRecording(a.session.clone()));
        }
        self.active = Some(Active {
            session: session.into(),
            steps: Vec::new(),
        });
        Ok(())
    }

    fn pre(device: &Device) -> Option<PageSignature> {
        device.snapshot().ok().map(|o| PageSignature::of(&o))
    }

    fn push(&mut self, device: &Device, pre: Option<PageSignature>, action: TraceAction) {
        if let Some(a) = &mut self.active {
            a.steps.push(TraceStep {
                timestamp: device.clock(),
                pre_signature: pre,
                action,
                post_activity: device.current_page().map(|p| p.activity).unwrap_or_default(),
            });
        }
    }

    /// Apply a gesture, capturing it when a recording is active. Failed
    /// gestures are not recorded.
    pub fn apply_gesture(&mut self, device: &mut Device, g: &Gesture) -> Result<TransitionResult, DeviceError> {
        let pre = self.active.as_ref().and_then(|_| Self::pre(device));
        let r = device.apply_gesture(g)?;
        self.push(device, pre, TraceAction::Gesture { gesture: g.clone() });
        Ok(r)
    }

    pub fn launch(&mut self, device: &mut Device, intent: &IntentMsg, privileged: bool) -> Result<(), DeviceError> {
        let pre = self.active.as_ref().and_then(|_| Self::pre(device));
        device.launch_intent(intent, privileged)?;
        self.push(device, pre, TraceAction::Launch { intent: intent.clone() });
        Ok(())
    }

    pub fn stop(&mut self, device: &Device) -> Result<Trajectory, ReplayError> {
        let a = self.active.take().ok_or(ReplayError::NotRecording)?;
        let obs = device.snapshot().ok();
        let (final_app, final_activity, final_params) = obs
            .as_ref()
            .map(|o| (o.app_id.clone(), o.activity.clone(), o.params.clone()))
            .unwrap_or_default();
        let body = serde_json::to_string(&(&a.session, &a.steps, &final_app, &final_activity))
            .expect("trace serializes");
        let trace_id = format!("trace-{}", &hex::encode(Sha256::digest(body.as_bytes()))[..12]);
        Ok(Trajectory {
            trace_id,
            session: a.session,
            steps: a.steps,
            final_app,
            final_activity,
            final_params,
            final_signature: obs.as_ref().map(PageSignature::of),
        })
    }
}
