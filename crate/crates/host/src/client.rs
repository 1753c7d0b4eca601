//! Optional remote model client.
//!
//! `MODEL_ENDPOINT` unset means every model binds to the deterministic
//! stubs and nothing touches the network. Every request the client makes
//! bumps [`network_ops`], which the offline checks read.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use pocket_core::agent::{ExtractionSchema, Record};
use pocket_core::device::{MediaAsset, Observation, SceneDescriptor, ScreenshotStore};
use pocket_core::geometry::Rect;
use pocket_core::models::{
    AssetSummary, Extractor, GallerySummarizer, ModelError, Models, SceneResolver, SkillNamer, VisualGrounder,
};
use pocket_core::perception::Frame;
use pocket_core::replay::PageSignature;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

static NETWORK_OPS: AtomicU64 = AtomicU64::new(0);

/// Requests attempted by any [`RemoteClient`] in this process.
pub fn network_ops() -> u64 {
    NETWORK_OPS.load(Ordering::SeqCst)
}

pub const ENDPOINT_VAR: &str = "MODEL_ENDPOINT";
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelEndpointConfig {
    pub base: String,
    pub timeout_ms: u64,
    pub enabled: bool,
}

impl ModelEndpointConfig {
    pub fn disabled() -> Self {
        Self {
            base: String::new(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            enabled: false,
        }
    }

    /// Enabled iff `value` is a non-blank address.
    pub fn from_value(value: Option<&str>) -> Self {
        match value.map(str::trim).filter(|v| !v.is_empty()) {
            Some(base) => Self {
                base: base.trim_end_matches('/').to_string(),
                timeout_ms: DEFAULT_TIMEOUT_MS,
                enabled: true,
            },
            None => Self::disabled(),
        }
    }

    pub fn from_env() -> Self {
        Self::from_value(std::env::var(ENDPOINT_VAR).ok().as_deref())
    }
}

/// JSON-over-HTTP client: `POST <base>/<op>` with a JSON body, JSON reply.
pub struct RemoteClient {
    base: String,
    http: reqwest::blocking::Client,
    store: ScreenshotStore,
}

impl RemoteClient {
    pub fn new(config: &ModelEndpointConfig, store: ScreenshotStore) -> Result<Self, ModelError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ModelError::Unavailable(e.to_string()))?;
        Ok(Self {
            base: config.base.clone(),
            http,
            store,
        })
    }

    fn call<T: DeserializeOwned>(&self, op: &str, body: serde_json::Value) -> Result<T, ModelError> {
        NETWORK_OPS.fetch_add(1, Ordering::SeqCst);
        let resp = self
            .http
            .post(format!("{}/{op}", self.base))
            .json(&body)
            .send()
            .map_err(|e| ModelError::Unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ModelError::Failed(format!("{op}: status {}", resp.status())));
        }
        resp.json().map_err(|e| ModelError::Failed(format!("{op}: {e}")))
    }

    fn observation(&self, screenshot_id: &str) -> Result<Observation, ModelError> {
        let store = self.store.read().expect("screenshot store poisoned");
        let page = store
            .get(screenshot_id)
            .ok_or_else(|| ModelError::Failed(format!("unknown screenshot {screenshot_id}")))?;
        Ok(page.observe(0))
    }
}

impl SceneResolver for RemoteClient {
    fn describe(&self, frame: &Frame) -> Result<Option<SceneDescriptor>, ModelError> {
        self.call("scene", json!({ "frame": frame }))
    }
}

impl GallerySummarizer for RemoteClient {
    fn summarize(&self, asset: &MediaAsset) -> Result<AssetSummary, ModelError> {
        // only metadata leaves the device; truth descriptors stay local
        let meta = json!({
            "asset_id": asset.asset_id,
            "filename": asset.filename,
            "folder": asset.folder,
            "captured_at": asset.captured_at,
        });
        self.call("summarize", json!({ "asset": meta }))
    }
}

impl VisualGrounder for RemoteClient {
    fn locate(&self, screenshot_id: &str, query: &str) -> Result<Option<Rect>, ModelError> {
        let obs = self.observation(screenshot_id)?;
        self.call("ground", json!({ "observation": obs, "query": query }))
    }
}

impl Extractor for RemoteClient {
    fn extract(&self, obs: &Observation, schema: ExtractionSchema) -> Result<Vec<Record>, ModelError> {
        self.call("extract", json!({ "observation": obs, "schema": schema }))
    }
}

#[derive(Deserialize)]
struct Named {
    name: String,
    description: String,
}

impl SkillNamer for RemoteClient {
    fn name_skill(&self, app_id: &str, signature: &PageSignature) -> Result<(String, String), ModelError> {
        let n: Named = self.call("name_skill", json!({ "app_id": app_id, "signature": signature }))?;
        Ok((n.name, n.description))
    }
}

/// Stubs when disabled, the remote client for every interface otherwise.
pub fn build_models(config: &ModelEndpointConfig, store: ScreenshotStore) -> Result<Models, ModelError> {
    if !config.enabled {
        return Ok(Models::stubs(store));
    }
    let c = Arc::new(RemoteClient::new(config, store)?);
    Ok(Models {
        scene: c.clone(),
        summarizer: c.clone(),
        grounder: c.clone(),
        extractor: c.clone(),
        namer: c,
    })
}
