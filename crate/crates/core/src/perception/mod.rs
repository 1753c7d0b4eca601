//! Perception pipeline: frame ring, echo filtering, alignment, intent.

mod aec;
mod align;
mod intent;
mod ring;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aec::{aec_filter, DEFAULT_AEC_WINDOW_MS};
pub use align::{align, AlignedUtterance, Utterance, DEFAULT_POST_MS, DEFAULT_PRE_MS};
pub use intent::{
    decompose, understand, understand_text, ActionType, AppAlias, AppRegistry, IntentOrigin,
    StructuredIntent, Understanding,
};
pub use ring::{FrameRing, SharedRing, DEFAULT_RING_CAPACITY};

use crate::device::SceneDescriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Mic,
    Playback,
}

/// Transcript-level speech: text with a time span and capture channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechSegment {
    pub text: String,
    pub t_start: u64,
    pub t_end: u64,
    pub channel: Channel,
}

impl SpeechSegment {
    pub fn mic(text: &str, t_start: u64, t_end: u64) -> Self {
        Self {
            text: text.into(),
            t_start,
            t_end,
            channel: Channel::Mic,
        }
    }

    pub fn playback(text: &str, t_start: u64, t_end: u64) -> Self {
        Self {
            channel: Channel::Playback,
            ..Self::mic(text, t_start, t_end)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSource {
    Camera,
    Screen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameScene {
    Descriptor(SceneDescriptor),
    Screenshot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_id: u64,
    pub timestamp: u64,
    pub source: FrameSource,
    pub scene: FrameScene,
}

impl Frame {
    pub fn camera(frame_id: u64, timestamp: u64, descriptor: SceneDescriptor) -> Self {
        Self {
            frame_id,
            timestamp,
            source: FrameSource::Camera,
            scene: FrameScene::Descriptor(descriptor),
        }
    }

    pub fn screen(frame_id: u64, timestamp: u64, screenshot_id: &str) -> Self {
        Self {
            frame_id,
            timestamp,
            source: FrameSource::Screen,
            scene: FrameScene::Screenshot(screenshot_id.into()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PerceptionError {
    #[error("frame timestamp {got} regresses below {last}")]
    TimestampRegression { last: u64, got: u64 },
    #[error("frame id {got} does not increase past {last}")]
    FrameIdRegression { last: u64, got: u64 },
    #[error("frame source and payload disagree")]
    SourceMismatch,
    #[error("frame ring is empty")]
    EmptyRing,
    #[error("deictic reference could not be resolved from the scene")]
    UnresolvedDeixis,
    #[error("scene resolver failed: {0}")]
    Resolver(String),
}
