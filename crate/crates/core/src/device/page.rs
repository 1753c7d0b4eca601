//! Page rendering: template + stack entry → structural tree and render layer.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::app::{ItemRecord, ItemSource, NodeTemplate, PageTemplate, Transition, VisualTarget};
use super::media::{MediaAsset, SceneDescriptor};
use crate::geometry::{Rect, SCREEN};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Button,
    #[default]
    Text,
    Input,
    List,
    Image,
    Container,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiNode {
    pub node_id: String,
    pub role: Role,
    pub text: String,
    pub content_desc: String,
    pub resource_id: String,
    pub bounds: Rect,
    pub clickable: bool,
    pub scrollable: bool,
    pub children: Vec<UiNode>,
}

impl UiNode {
    /// Pre-order traversal.
    pub fn walk(&self) -> Vec<&UiNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// Pre-order traversal carrying whether the node or an ancestor is clickable.
    pub fn walk_with_clickable(&self) -> Vec<(&UiNode, bool)> {
        let mut out = Vec::new();
        let mut stack = vec![(self, false)];
        while let Some((n, inherited)) = stack.pop() {
            let click = inherited || n.clickable;
            out.push((n, click));
            stack.extend(n.children.iter().rev().map(|c| (c, click)));
        }
        out
    }

    pub fn find(&self, node_id: &str) -> Option<&UiNode> {
        self.walk().into_iter().find(|n| n.node_id == node_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderOrigin {
    Structural,
    OverlayOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderText {
    pub text: String,
    pub bbox: Rect,
    pub origin: RenderOrigin,
    pub backing_node: Option<String>,
}

/// A fully rendered page. Only the [`Observation`] projection is visible to
/// the agent; items, actions and truth fields serve the simulator and stubs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub app_id: String,
    pub activity: String,
    pub params: BTreeMap<String, String>,
    pub ui_root: UiNode,
    pub render_layer: Vec<RenderText>,
    pub scroll_offset: usize,
    pub items: Option<Vec<ItemRecord>>,
    pub visible_rows: usize,
    pub node_actions: BTreeMap<String, Transition>,
    pub overlay_actions: Vec<(Rect, Transition)>,
    pub visual_targets: Vec<VisualTarget>,
    pub scene: Option<SceneDescriptor>,
}

impl Page {
    /// Items currently inside the list viewport.
    pub fn visible_items(&self) -> &[ItemRecord] {
        match &self.items {
            Some(items) => {
                let start = self.scroll_offset.min(items.len());
                let end = (start + self.visible_rows).min(items.len());
                &items[start..end]
            }
            None => &[],
        }
    }

    pub fn max_scroll(&self) -> usize {
        self.items
            .as_ref()
            .map_or(0, |i| i.len().saturating_sub(self.visible_rows))
    }

    pub fn observe(&self, timestamp: u64) -> Observation {
        let mut obs = Observation {
            app_id: self.app_id.clone(),
            activity: self.activity.clone(),
            params: self.params.clone(),
            ui_root: self.ui_root.clone(),
            render_layer: self.render_layer.clone(),
            scroll_offset: self.scroll_offset,
            timestamp,
            screenshot_id: String::new(),
        };
        obs.screenshot_id = obs.content_digest()[..16].to_string();
        obs
    }
}

/// What the agent sees of the device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub app_id: String,
    pub activity: String,
    pub params: BTreeMap<String, String>,
    pub ui_root: UiNode,
    pub render_layer: Vec<RenderText>,
    pub scroll_offset: usize,
    pub timestamp: u64,
    pub screenshot_id: String,
}

impl Observation {
    pub fn serialized_tree(&self) -> String {
        serde_json::to_string(&self.ui_root).expect("tree serializes")
    }

    /// Hash of everything except timestamp and screenshot id.
    pub fn content_digest(&self) -> String {
        let body = serde_json::json!({
            "app": self.app_id,
            "activity": self.activity,
            "params": self.params,
            "tree": self.ui_root,
            "render": self.render_layer,
            "scroll": self.scroll_offset,
        });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }

    /// Structural texts in reading order (top-to-bottom, left-to-right).
    pub fn visible_texts(&self) -> Vec<String> {
        let mut texts: Vec<&RenderText> = self
            .render_layer
            .iter()
            .filter(|r| r.origin == RenderOrigin::Structural && !r.text.trim().is_empty())
            .collect();
        texts.sort_by_key(|r| (r.bbox.y, r.bbox.x));
        let mut seen = BTreeSet::new();
        texts
            .into_iter()
            .filter(|r| seen.insert(r.text.clone()))
            .map(|r| r.text.clone())
            .collect()
    }

    pub fn scrollable_node(&self) -> Option<&UiNode> {
        self.ui_root.walk().into_iter().find(|n| n.scrollable)
    }
}

/// Per-render inputs that do not live on the stack entry.
pub(crate) struct RenderInput<'a> {
    pub app_id: &'a str,
    pub activity: &'a str,
    pub template: &'a PageTemplate,
    pub params: &'a BTreeMap<String, String>,
    pub scroll_offset: usize,
    pub selected: &'a BTreeSet<String>,
    pub staging: &'a BTreeMap<String, Vec<MediaAsset>>,
    pub seed: u64,
}

const MARGIN: i32 = 40;
const TOP: i32 = 96;
const NODE_H: i32 = 120;
const GAP: i32 = 16;

pub(crate) fn render(input: &RenderInput<'_>) -> Page {
    let mut actions = BTreeMap::new();
    let mut children = Vec::new();
    let mut cursor = TOP;
    for tpl in &input.template.nodes {
        let bounds = match tpl.bounds {
            Some(b) => b.intersect(&SCREEN),
            None => {
                let b = Rect::new(MARGIN, cursor, SCREEN.w - 2 * MARGIN, NODE_H);
                cursor += NODE_H + GAP;
                b
            }
        };
        children.push(build_node(tpl, bounds, input.params, &mut actions));
    }

    let mut items = None;
    let mut visible_rows = 0;
    let mut scroll_offset = 0;
    if let Some(list) = &input.template.list {
        let mut all = match &list.source {
            ItemSource::Static { items } => items.clone(),
            ItemSource::Staged { param } => {
                let folder = staging_folder(input.params.get(param).map_or("", String::as_str));
                input
                    .staging
                    .get(&folder)
                    .map(|assets| {
                        assets
                            .iter()
                            .map(|a| ItemRecord {
                                id: a.asset_id.to_string(),
                                title: a.filename.clone(),
                                fields: BTreeMap::new(),
                            })
                            .collect()
                    })
                    .unwrap_or_default()
            }
        };
        if list.shuffle {
            all.shuffle(&mut ChaCha8Rng::seed_from_u64(input.seed));
        }
        for item in &mut all {
            item.title = expand(&item.title, input.params, None);
        }
        let viewport = list
            .bounds
            .map(|b| b.intersect(&SCREEN))
            .unwrap_or_else(|| {
                Rect::new(MARGIN, cursor, SCREEN.w - 2 * MARGIN, SCREEN.h - MARGIN - cursor)
            });
        let row_h = list.row_height.max(64);
        let capacity = ((viewport.h / row_h).max(1)) as usize;
        visible_rows = capacity;
        scroll_offset = input.scroll_offset.min(all.len().saturating_sub(capacity));
        let end = (scroll_offset + capacity).min(all.len());
        let mut rows = Vec::new();
        for (slot, idx) in (scroll_offset..end).enumerate() {
            let item = &all[idx];
            let row_id = format!("{}/row/{}", list.id, idx);
            let rb = Rect::new(viewport.x, viewport.y + slot as i32 * row_h, viewport.w, row_h);
            let title_box = Rect::new(rb.x + 16, rb.y + 16, rb.w - 32, row_h / 2 - 16);
            let mut row_children = vec![leaf(
                format!("{row_id}/title"),
                Role::Text,
                item.title.clone(),
                title_box,
            )];
            let n = item.fields.len().max(1) as i32;
            let fw = (rb.w - 32) / n;
            for (k, (name, value)) in item.fields.iter().enumerate() {
                let b = Rect::new(rb.x + 16 + k as i32 * fw, rb.y + row_h / 2, fw, row_h / 2 - 16);
                row_children.push(leaf(format!("{row_id}/{name}"), Role::Text, value.clone(), b));
            }
            if let Some(t) = &list.row_action {
                actions.insert(row_id.clone(), expand_transition(t, input.params, Some(item)));
            }
            rows.push(UiNode {
                node_id: row_id.clone(),
                role: Role::Container,
                text: String::new(),
                content_desc: if input.selected.contains(&row_id) {
                    "selected".into()
                } else {
                    String::new()
                },
                resource_id: format!("{}:id/row", input.app_id),
                bounds: rb,
                clickable: list.row_action.is_some(),
                scrollable: false,
                children: row_children,
            });
        }
        children.push(UiNode {
            node_id: list.id.clone(),
            role: Role::List,
            text: String::new(),
            content_desc: String::new(),
            resource_id: format!("{}:id/{}", input.app_id, list.id),
            bounds: viewport,
            clickable: false,
            scrollable: true,
            children: rows,
        });
        items = Some(all);
    }

    let ui_root = UiNode {
        node_id: "root".into(),
        role: Role::Container,
        text: String::new(),
        content_desc: String::new(),
        resource_id: String::new(),
        bounds: SCREEN,
        clickable: false,
        scrollable: false,
        children,
    };

    let mut render_layer: Vec<RenderText> = ui_root
        .walk()
        .into_iter()
        .filter(|n| !n.text.is_empty())
        .map(|n| RenderText {
            text: n.text.clone(),
            bbox: n.bounds,
            origin: RenderOrigin::Structural,
            backing_node: Some(n.node_id.clone()),
        })
        .collect();
    let mut overlay_actions = Vec::new();
    for o in &input.template.overlays {
        let bbox = o.bbox.intersect(&SCREEN);
        render_layer.push(RenderText {
            text: expand(&o.text, input.params, None),
            bbox,
            origin: RenderOrigin::OverlayOnly,
            backing_node: None,
        });
        if let Some(t) = &o.on_tap {
            overlay_actions.push((bbox, expand_transition(t, input.params, None)));
        }
    }

    Page {
        app_id: input.app_id.to_string(),
        activity: input.activity.to_string(),
        params: input.params.clone(),
        ui_root,
        render_layer,
        scroll_offset,
        items,
        visible_rows,
        node_actions: actions,
        overlay_actions,
        visual_targets: input
            .template
            .visual_targets
            .iter()
            .map(|v| VisualTarget {
                label: expand(&v.label, input.params, None),
                bbox: v.bbox.intersect(&SCREEN),
            })
            .collect(),
        scene: input.template.scene.as_ref().map(|s| SceneDescriptor {
            objects: s.objects.iter().map(|o| expand(o, input.params, None)).collect(),
            scene: expand(&s.scene, input.params, None),
            event: expand(&s.event, input.params, None),
        }),
    }
}

pub fn staging_folder(task_id: &str) -> String {
    format!("staging/{task_id}/")
}

fn leaf(node_id: String, role: Role, text: String, bounds: Rect) -> UiNode {
    UiNode {
        node_id,
        role,
        text,
        content_desc: String::new(),
        resource_id: String::new(),
        bounds,
        clickable: false,
        scrollable: false,
        children: Vec::new(),
    }
}

fn build_node(
    tpl: &NodeTemplate,
    bounds: Rect,
    params: &BTreeMap<String, String>,
    actions: &mut BTreeMap<String, Transition>,
) -> UiNode {
    let text = match tpl.param.as_ref().and_then(|p| params.get(p)) {
        Some(v) if tpl.role == Role::Input => v.clone(),
        _ => expand(&tpl.text, params, None),
    };
    if let Some(t) = &tpl.on_tap {
        actions.insert(tpl.id.clone(), expand_transition(t, params, None));
    }
    let n = tpl.children.len().max(1) as i32;
    let slot_h = bounds.h / n;
    let children = tpl
        .children
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let b = match c.bounds {
                Some(b) => bounds.intersect(&b),
                None => Rect::new(bounds.x, bounds.y + i as i32 * slot_h, bounds.w, slot_h),
            };
            build_node(c, b, params, actions)
        })
        .collect();
    UiNode {
        node_id: tpl.id.clone(),
        role: tpl.role,
        text,
        content_desc: expand(&tpl.content_desc, params, None),
        resource_id: tpl.resource_id.clone(),
        bounds,
        clickable: tpl.clickable || tpl.on_tap.is_some(),
        scrollable: false,
        children,
    }
}

/// Replace `{name}` with page params and `{item.x}` with item fields.
pub(crate) fn expand(
    template: &str,
    params: &BTreeMap<String, String>,
    item: Option<&ItemRecord>,
) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            out.push_str(&rest[open..]);
            return out;
        };
        let key = &after[..close];
        let value = match (key.strip_prefix("item."), item) {
            (Some("title"), Some(it)) => Some(it.title.clone()),
            (Some("id"), Some(it)) => Some(it.id.clone()),
            (Some(field), Some(it)) => it.fields.get(field).cloned(),
            _ => params.get(key).cloned(),
        };
        match value {
            Some(v) => out.push_str(&v),
            None => {
                out.push('{');
                out.push_str(key);
                out.push('}');
            }
        }
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    out
}

fn expand_transition(
    t: &Transition,
    params: &BTreeMap<String, String>,
    item: Option<&ItemRecord>,
) -> Transition {
    match t {
        Transition::Launch {
            activity,
            app,
            uri,
            extras,
        } => Transition::Launch {
            activity: activity.clone(),
            app: app.clone(),
            uri: uri.as_ref().map(|u| expand(u, params, item)),
            extras: extras
                .iter()
                .map(|(k, v)| (k.clone(), expand(v, params, item)))
                .collect(),
        },
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expand_substitutes_params_and_item_fields() {
        let params = BTreeMap::from([("q".to_string(), "Evian spray".to_string())]);
        let item = ItemRecord {
            id: "42".into(),
            title: "Spray".into(),
            fields: BTreeMap::from([("price".into(), "12.9".into())]),
        };
        assert_eq!(expand("Results for {q}", &params, None), "Results for Evian spray");
        assert_eq!(expand("app://shop/item/{item.id}", &params, Some(&item)), "app://shop/item/42");
        assert_eq!(expand("{item.price} {missing}", &params, Some(&item)), "12.9 {missing}");
        assert_eq!(expand("open {brace", &params, None), "open {brace");
    }
}
