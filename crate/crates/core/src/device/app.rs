//! Declarative app fixtures. A page template plus (params, scroll offset,
//! selection, seed) fully determines the rendered page.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::media::SceneDescriptor;
use super::page::Role;
use crate::geometry::Rect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimApp {
    pub app_id: String,
    #[serde(default)]
    pub display_name: String,
    pub activities: Vec<SimActivity>,
    pub home_activity: String,
}

impl SimApp {
    pub fn activity(&self, name: &str) -> Option<&SimActivity> {
        self.activities.iter().find(|a| a.name == name)
    }

    pub fn activity_mut(&mut self, name: &str) -> Option<&mut SimActivity> {
        self.activities.iter_mut().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimActivity {
    pub name: String,
    #[serde(default = "default_true")]
    pub exported: bool,
    #[serde(default)]
    pub deeplink_patterns: Vec<String>,
    #[serde(default)]
    pub page: PageTemplate,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PageTemplate {
    #[serde(default)]
    pub nodes: Vec<NodeTemplate>,
    #[serde(default)]
    pub list: Option<ListTemplate>,
    /// Texts drawn on screen with no structural node behind them.
    #[serde(default)]
    pub overlays: Vec<OverlayTemplate>,
    /// Ground-truth boxes for the visual grounding stub.
    #[serde(default)]
    pub visual_targets: Vec<VisualTarget>,
    /// Ground-truth scene description for screen-projection frames.
    #[serde(default)]
    pub scene: Option<SceneDescriptor>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeTemplate {
    pub id: String,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub content_desc: String,
    #[serde(default)]
    pub resource_id: String,
    /// Laid out automatically when absent.
    #[serde(default)]
    pub bounds: Option<Rect>,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub on_tap: Option<Transition>,
    /// Input nodes write typed text into this page parameter.
    #[serde(default)]
    pub param: Option<String>,
    #[serde(default)]
    pub children: Vec<NodeTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListTemplate {
    pub id: String,
    #[serde(default)]
    pub bounds: Option<Rect>,
    #[serde(default = "default_row_height")]
    pub row_height: i32,
    pub source: ItemSource,
    #[serde(default)]
    pub row_action: Option<Transition>,
    /// Shuffle item order with the device seed.
    #[serde(default)]
    pub shuffle: bool,
}

fn default_row_height() -> i32 {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemSource {
    Static { items: Vec<ItemRecord> },
    /// Media assets staged under `staging/<param value>/`.
    Staged { param: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    #[serde(default)]
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayTemplate {
    pub text: String,
    pub bbox: Rect,
    #[serde(default)]
    pub on_tap: Option<Transition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualTarget {
    pub label: String,
    pub bbox: Rect,
}

/// Effect of tapping a node, row or overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transition {
    /// Start an activity. Templates `{param}` / `{item.field}` are expanded.
    Launch {
        activity: String,
        #[serde(default)]
        app: Option<String>,
        #[serde(default)]
        uri: Option<String>,
        #[serde(default)]
        extras: BTreeMap<String, String>,
    },
    ToggleSelect,
    Back,
}
