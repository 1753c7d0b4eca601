//! Behaviour cloning and trajectory replay.
//!
//! A recording captures gestures and launches with pre-action page
//! signatures. The reached page's launch descriptor is recovered from the
//! activity dump, then distilled into a [`SkillCard`] or saved as a
//! [`Bookmark`]. Replay re-enters the page through a fixed ladder of
//! progressively simpler launches and accepts the first whose page
//! signature validates.

mod dump;
mod ladder;
mod record;
mod skills;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use dump::{introspect_both, introspect_entry, parse_dump, DumpRecord, DumpTask, ParsedDump};
pub use ladder::{replay, Attempt, ReplayOutcome, Tier, TIER_ORDER};
pub use record::{Recorder, TraceAction, TraceStep, Trajectory};
pub use skills::{distill_skill, Bookmark, BookmarkStore, SkillCard, SkillRegistry};

use crate::device::{Component, DeviceError, IntentMsg, Observation};

pub const SIGNATURE_TEXTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("a recording is already active for session {0}")]
    AlreadyRecording(String),
    #[error("no recording is active")]
    NotRecording,
    #[error("app {0} is not running")]
    AppNotRunning(String),
    #[error("trajectory ends at {got}, descriptor targets {want}")]
    FinalMismatch { want: String, got: String },
    #[error("every replay tier failed")]
    AllTiersFailed { attempts: Vec<Attempt> },
    #[error("bookmark {0} already exists")]
    DuplicateBookmark(String),
    #[error("unknown bookmark {0}")]
    UnknownBookmark(String),
    #[error("malformed {kind} file: {detail}")]
    Malformed { kind: &'static str, detail: String },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Activity plus the first visible texts, with a digest over both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSignature {
    pub activity: String,
    pub top_texts: Vec<String>,
    pub digest: String,
}

impl PageSignature {
    pub fn new(activity: &str, top_texts: Vec<String>) -> Self {
        let mut h = Sha256::new();
        h.update(activity.as_bytes());
        for t in &top_texts {
            h.update([0u8]);
            h.update(t.as_bytes());
        }
        Self {
            activity: activity.into(),
            top_texts,
            digest: hex::encode(h.finalize()),
        }
    }

    pub fn of(obs: &Observation) -> Self {
        let mut texts = obs.visible_texts();
        texts.truncate(SIGNATURE_TEXTS);
        Self::new(&obs.activity, texts)
    }

    /// Same activity and at least half of the recorded texts still visible.
    pub fn validates(&self, obs: &Observation) -> bool {
        if obs.activity != self.activity {
            return false;
        }
        let visible = obs.visible_texts();
        let present = self.top_texts.iter().filter(|t| visible.contains(t)).count();
        present * 2 >= self.top_texts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureMethod {
    KeywordFilter,
    FullParse,
}

impl CaptureMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaptureMethod::KeywordFilter => "keyword_filter",
            CaptureMethod::FullParse => "full_parse",
        }
    }
}

/// Launch parameters recovered from the dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaunchDescriptor {
    pub action: String,
    pub data_uri: Option<String>,
    pub component: Component,
    pub extras: BTreeMap<String, String>,
    pub capture_method: CaptureMethod,
}

impl LaunchDescriptor {
    pub fn to_intent(&self) -> IntentMsg {
        IntentMsg {
            action: self.action.clone(),
            data_uri: self.data_uri.clone(),
            component: Some(self.component.clone()),
            extras: self.extras.clone(),
        }
    }

    /// Fields of the intent, ignoring how it was captured.
    pub fn same_intent(&self, other: &LaunchDescriptor) -> bool {
        self.to_intent() == other.to_intent()
    }
}
