//! Pluggable model interfaces and their deterministic stubs.
//!
//! Stubs read fixture truth (page scenes, visual targets, list items, media
//! truth descriptors) through the device's screenshot store. The agent
//! itself never touches that truth.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::agent::{ExtractionSchema, Record, EMPTY_FIELD};
use crate::device::{MediaAsset, Observation, Page, SceneDescriptor, ScreenshotStore};
use crate::geometry::Rect;
use crate::perception::{Frame, FrameScene};
use crate::replay::PageSignature;
use crate::text::{token_set, tokens};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("model unavailable: {0}")]
    Unavailable(String),
    #[error("model failed: {0}")]
    Failed(String),
}

/// Describes what a frame shows.
pub trait SceneResolver: Send + Sync {
    fn describe(&self, frame: &Frame) -> Result<Option<SceneDescriptor>, ModelError>;
}

/// Semantic summary of one gallery asset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetSummary {
    pub objects: Vec<String>,
    pub scene: String,
    pub event: String,
    pub caption: String,
}

pub trait GallerySummarizer: Send + Sync {
    fn summarize(&self, asset: &MediaAsset) -> Result<AssetSummary, ModelError>;
}

/// Visual grounding: `(screenshot, query) → bbox`.
pub trait VisualGrounder: Send + Sync {
    fn locate(&self, screenshot_id: &str, query: &str) -> Result<Option<Rect>, ModelError>;
}

/// Reads list rows from a screenshot into schema records.
pub trait Extractor: Send + Sync {
    fn extract(&self, obs: &Observation, schema: ExtractionSchema) -> Result<Vec<Record>, ModelError>;
}

/// Names a cloned behaviour from the page it ends on.
pub trait SkillNamer: Send + Sync {
    /// `(name, description)`
    fn name_skill(&self, app_id: &str, signature: &PageSignature) -> Result<(String, String), ModelError>;
}

#[derive(Clone)]
pub struct Models {
    pub scene: Arc<dyn SceneResolver>,
    pub summarizer: Arc<dyn GallerySummarizer>,
    pub grounder: Arc<dyn VisualGrounder>,
    pub extractor: Arc<dyn Extractor>,
    pub namer: Arc<dyn SkillNamer>,
}

impl Models {
    pub fn stubs(store: ScreenshotStore) -> Self {
        Self {
            scene: Arc::new(StubSceneResolver::new(store.clone())),
            summarizer: Arc::new(StubSummarizer::default()),
            grounder: Arc::new(StubGrounder::new(store.clone())),
            extractor: Arc::new(StubExtractor::new(store)),
            namer: Arc::new(StubSkillNamer),
        }
    }
}

fn stored_page(store: &ScreenshotStore, id: &str) -> Option<Page> {
    store.read().expect("screenshot store poisoned").get(id).cloned()
}

pub struct StubSceneResolver {
    store: ScreenshotStore,
}

impl StubSceneResolver {
    pub fn new(store: ScreenshotStore) -> Self {
        Self { store }
    }
}

impl SceneResolver for StubSceneResolver {
    fn describe(&self, frame: &Frame) -> Result<Option<SceneDescriptor>, ModelError> {
        Ok(match &frame.scene {
            FrameScene::Descriptor(d) => Some(d.clone()).filter(|d| !d.is_empty()),
            FrameScene::Screenshot(id) => stored_page(&self.store, id).and_then(|p| p.scene),
        })
    }
}

/// Reads truth descriptors; fails on the configured asset ids.
#[derive(Debug, Clone, Default)]
pub struct StubSummarizer {
    pub failing: BTreeSet<u64>,
    pub fail_all: bool,
}

impl StubSummarizer {
    pub fn failing_on(ids: impl IntoIterator<Item = u64>) -> Self {
        Self {
            failing: ids.into_iter().collect(),
            fail_all: false,
        }
    }

    pub fn always_failing() -> Self {
        Self {
            failing: BTreeSet::new(),
            fail_all: true,
        }
    }
}

impl GallerySummarizer for StubSummarizer {
    fn summarize(&self, asset: &MediaAsset) -> Result<AssetSummary, ModelError> {
        if self.fail_all || self.failing.contains(&asset.asset_id) {
            return Err(ModelError::Failed(format!("summarizer refused {}", asset.filename)));
        }
        let t = &asset.truth_descriptor;
        let mut caption = format!("a photo of {}", t.objects.join(" and "));
        if !t.scene.is_empty() {
            caption.push_str(&format!(" at the {}", t.scene));
        }
        if !t.event.is_empty() {
            caption.push_str(&format!(" during {}", t.event));
        }
        Ok(AssetSummary {
            objects: t.objects.clone(),
            scene: t.scene.clone(),
            event: t.event.clone(),
            caption,
        })
    }
}

/// Looks up fixture `visual_targets` whose label covers every query token.
pub struct StubGrounder {
    store: ScreenshotStore,
}

impl StubGrounder {
    pub fn new(store: ScreenshotStore) -> Self {
        Self { store }
    }
}

impl VisualGrounder for StubGrounder {
    fn locate(&self, screenshot_id: &str, query: &str) -> Result<Option<Rect>, ModelError> {
        let Some(page) = stored_page(&self.store, screenshot_id) else {
            return Ok(None);
        };
        let want = token_set(query);
        if want.is_empty() {
            return Ok(None);
        }
        Ok(page
            .visual_targets
            .iter()
            .find(|v| want.is_subset(&token_set(&v.label)))
            .map(|v| v.bbox))
    }
}

/// Reads the stored page's items inside the list viewport.
pub struct StubExtractor {
    store: ScreenshotStore,
}

impl StubExtractor {
    pub fn new(store: ScreenshotStore) -> Self {
        Self { store }
    }
}

impl Extractor for StubExtractor {
    fn extract(&self, obs: &Observation, schema: ExtractionSchema) -> Result<Vec<Record>, ModelError> {
        let page = stored_page(&self.store, &obs.screenshot_id)
            .ok_or_else(|| ModelError::Failed(format!("unknown screenshot {}", obs.screenshot_id)))?;
        Ok(page
            .visible_items()
            .iter()
            .map(|item| {
                schema
                    .fields()
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let v = if i == 0 {
                            item.title.clone()
                        } else {
                            item.fields.get(*f).cloned().unwrap_or_else(|| EMPTY_FIELD.into())
                        };
                        (f.to_string(), v)
                    })
                    .collect::<BTreeMap<_, _>>()
            })
            .collect())
    }
}

/// Names a skill from the first visible text on its final page.
pub struct StubSkillNamer;

impl SkillNamer for StubSkillNamer {
    fn name_skill(&self, app_id: &str, signature: &PageSignature) -> Result<(String, String), ModelError> {
        let top = signature
            .top_texts
            .first()
            .ok_or_else(|| ModelError::Failed("page has no visible text".into()))?;
        let slug = tokens(&format!("{app_id} {top}")).join("-");
        Ok((slug, format!("open the {top} page in {app_id}")))
    }
}
