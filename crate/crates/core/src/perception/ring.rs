use std::collections::VecDeque;
use std::sync::{Arc, RwLock};

use super::{Frame, FrameScene, FrameSource, PerceptionError};

pub const DEFAULT_RING_CAPACITY: usize = 64;

/// Bounded frame history; oldest frames are evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRing {
    capacity: usize,
    frames: VecDeque<Frame>,
}

impl Default for FrameRing {
    fn default() -> Self {
        Self::new(DEFAULT_RING_CAPACITY)
    }
}

impl FrameRing {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            frames: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter()
    }

    pub fn latest(&self) -> Option<&Frame> {
        self.frames.back()
    }

    pub fn push(&mut self, frame: Frame) -> Result<(), PerceptionError> {
        let consistent = matches!(
            (&frame.source, &frame.scene),
            (FrameSource::Camera, FrameScene::Descriptor(_)) | (FrameSource::Screen, FrameScene::Screenshot(_))
        );
        if !consistent {
            return Err(PerceptionError::SourceMismatch);
        }
        if let Some(last) = self.frames.back() {
            if frame.timestamp < last.timestamp {
                return Err(PerceptionError::TimestampRegression {
                    last: last.timestamp,
                    got: frame.timestamp,
                });
            }
            if frame.frame_id <= last.frame_id {
                return Err(PerceptionError::FrameIdRegression {
                    last: last.frame_id,
                    got: frame.frame_id,
                });
            }
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        Ok(())
    }
}

/// Single-writer / multi-reader ring; readers take cloned snapshots.
#[derive(Debug, Clone, Default)]
pub struct SharedRing {
    inner: Arc<RwLock<FrameRing>>,
}

impl SharedRing {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: Arc::new(RwLock::new(FrameRing::new(capacity))),
        }
    }

    pub fn push(&self, frame: Frame) -> Result<(), PerceptionError> {
        self.inner.write().expect("ring poisoned").push(frame)
    }

    pub fn snapshot(&self) -> FrameRing {
        self.inner.read().expect("ring poisoned").clone()
    }
}
