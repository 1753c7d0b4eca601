//! Deterministic simulated Android device.
//!
//! All mutation goes through `&mut Device`; callers that share a device
//! across threads serialize access through a single command queue (see the
//! host crate). Snapshots are plain values.

mod alarm;
pub mod app;
pub mod dump;
pub mod intent;
pub mod media;
pub mod page;
pub mod uri;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use alarm::AlarmSpec;
pub use app::{
    ItemRecord, ItemSource, ListTemplate, NodeTemplate, OverlayTemplate, PageTemplate, SimActivity,
    SimApp, Transition, VisualTarget,
};
pub use intent::{Component, IntentMsg, ACTION_MAIN, ACTION_VIEW};
pub use media::{MediaAsset, SceneDescriptor};
pub use page::{Observation, Page, RenderOrigin, RenderText, Role, UiNode};

use crate::geometry::{Point, SCREEN};
use crate::ingress::TriggerEvent;
use crate::perception::{Channel, SpeechSegment};
use alarm::ArmedAlarm;
use page::RenderInput;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("no app in foreground")]
    NoForeground,
    #[error("point ({0}, {1}) is outside the screen")]
    OutOfBounds(i32, i32),
    #[error("activity {0} is not exported")]
    NotExported(Component),
    #[error("no deeplink pattern matches {0}")]
    NoMatch(String),
    #[error("unknown component {0}")]
    UnknownComponent(Component),
    #[error("intent has neither component nor data uri")]
    MissingTarget,
    #[error("no installed apps")]
    NoApps,
    #[error("app {0} has no task stack")]
    NoTask(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("playback segments overlap")]
    OverlappingSegments,
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Gesture {
    Tap { x: i32, y: i32 },
    MultiTap { points: Vec<Point> },
    Scroll { direction: Direction, rows: usize },
    TypeText { node_id: String, text: String },
    Back,
}

impl Gesture {
    pub fn tap(p: Point) -> Self {
        Gesture::Tap { x: p.x, y: p.y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionResult {
    pub changed: bool,
    /// Foreground page after the gesture; `None` once the last stack empties.
    pub page: Option<Page>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackEntry {
    pub activity: String,
    pub params: BTreeMap<String, String>,
    /// Resolved intent that created this entry (component always set).
    pub intent: IntentMsg,
    pub scroll_offset: usize,
    pub selected: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStack {
    pub task_id: u64,
    pub entries: Vec<StackEntry>,
}

pub type ScreenshotStore = Arc<RwLock<BTreeMap<String, Page>>>;

#[derive(Debug, Clone)]
pub struct Device {
    apps: Vec<SimApp>,
    stacks: BTreeMap<String, TaskStack>,
    foreground: Option<String>,
    clock: u64,
    alarms: Vec<ArmedAlarm>,
    media: Vec<MediaAsset>,
    staging: BTreeMap<String, Vec<MediaAsset>>,
    playback: Vec<SpeechSegment>,
    seed: u64,
    next_task_id: u64,
    next_alarm_seq: u64,
    launch_log: Vec<IntentMsg>,
    screenshots: ScreenshotStore,
}

impl Device {
    pub fn new(seed: u64) -> Self {
        Self {
            apps: Vec::new(),
            stacks: BTreeMap::new(),
            foreground: None,
            clock: 0,
            alarms: Vec::new(),
            media: Vec::new(),
            staging: BTreeMap::new(),
            playback: Vec::new(),
            seed,
            next_task_id: 1,
            next_alarm_seq: 0,
            launch_log: Vec::new(),
            screenshots: Arc::default(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn apps(&self) -> &[SimApp] {
        &self.apps
    }

    pub fn app(&self, app_id: &str) -> Option<&SimApp> {
        self.apps.iter().find(|a| a.app_id == app_id)
    }

    pub fn install(&mut self, app: SimApp) -> Result<(), DeviceError> {
        if self.app(&app.app_id).is_some() {
            return Err(DeviceError::InvalidFixture(format!("duplicate app {}", app.app_id)));
        }
        if app.activity(&app.home_activity).is_none() {
            return Err(DeviceError::InvalidFixture(format!(
                "home activity {} missing in {}",
                app.home_activity, app.app_id
            )));
        }
        for act in &app.activities {
            if let Some(bad) = act.deeplink_patterns.iter().find(|p| !uri::is_well_formed(p)) {
                return Err(DeviceError::InvalidFixture(format!("bad deeplink pattern {bad}")));
            }
        }
        self.apps.push(app);
        Ok(())
    }

    pub fn add_media(&mut self, asset: MediaAsset) -> Result<(), DeviceError> {
        if let Some(last) = self.media.last() {
            if asset.asset_id <= last.asset_id || asset.captured_at < last.captured_at {
                return Err(DeviceError::InvalidFixture(format!(
                    "asset {} breaks id/capture ordering",
                    asset.asset_id
                )));
            }
        }
        if self.media.iter().any(|m| m.filename == asset.filename) {
            return Err(DeviceError::InvalidFixture(format!("duplicate filename {}", asset.filename)));
        }
        self.media.push(asset);
        Ok(())
    }

    pub fn remove_media(&mut self, filename: &str) -> bool {
        let before = self.media.len();
        self.media.retain(|m| m.filename != filename);
        before != self.media.len()
    }

    /// Assets with `asset_id > since_id`, ascending.
    pub fn media_list(&self, since_id: u64) -> Vec<MediaAsset> {
        self.media.iter().filter(|m| m.asset_id > since_id).cloned().collect()
    }

    pub fn media_by_name(&self, filename: &str) -> Option<&MediaAsset> {
        self.media.iter().find(|m| m.filename == filename)
    }

    /// Replace the contents of a staging folder.
    pub fn stage_media(&mut self, folder: &str, assets: Vec<MediaAsset>) {
        self.staging.insert(folder.to_string(), assets);
    }

    pub fn staged(&self, folder: &str) -> Option<&[MediaAsset]> {
        self.staging.get(folder).map(Vec::as_slice)
    }

    pub fn set_exported(&mut self, app_id: &str, activity: &str, exported: bool) -> bool {
        self.activity_mut(app_id, activity)
            .map(|a| a.exported = exported)
            .is_some()
    }

    pub fn clear_deeplinks(&mut self, app_id: &str, activity: &str) -> bool {
        self.activity_mut(app_id, activity)
            .map(|a| a.deeplink_patterns.clear())
            .is_some()
    }

    fn activity_mut(&mut self, app_id: &str, activity: &str) -> Option<&mut SimActivity> {
        self.apps
            .iter_mut()
            .find(|a| a.app_id == app_id)?
            .activity_mut(activity)
    }

    pub fn screenshot_store(&self) -> ScreenshotStore {
        Arc::clone(&self.screenshots)
    }

    /// Resolved intents in launch order.
    pub fn launch_log(&self) -> &[IntentMsg] {
        &self.launch_log
    }

    pub fn task_stack(&self, app_id: &str) -> Option<&TaskStack> {
        self.stacks.get(app_id)
    }

    pub fn foreground_app(&self) -> Option<&str> {
        self.foreground.as_deref()
    }

    // ---- intents ---------------------------------------------------------

    pub fn launch_intent(&mut self, intent: &IntentMsg, privileged: bool) -> Result<Page, DeviceError> {
        if self.apps.is_empty() {
            return Err(DeviceError::NoApps);
        }
        let (component, mut params) = self.resolve(intent, privileged)?;
        for (k, v) in &intent.extras {
            params.insert(k.clone(), v.clone());
        }
        let resolved = IntentMsg {
            action: intent.action.clone(),
            data_uri: intent.data_uri.clone(),
            component: Some(component.clone()),
            extras: intent.extras.clone(),
        };
        let entry = StackEntry {
            activity: component.activity.clone(),
            params,
            intent: resolved.clone(),
            scroll_offset: 0,
            selected: BTreeSet::new(),
        };
        let next_id = &mut self.next_task_id;
        self.stacks
            .entry(component.app_id.clone())
            .or_insert_with(|| {
                let id = *next_id;
                *next_id += 1;
                TaskStack {
                    task_id: id,
                    entries: Vec::new(),
                }
            })
            .entries
            .push(entry);
        self.foreground = Some(component.app_id.clone());
        self.launch_log.push(resolved);
        self.current_page()
    }

    fn resolve(
        &self,
        intent: &IntentMsg,
        privileged: bool,
    ) -> Result<(Component, BTreeMap<String, String>), DeviceError> {
        if let Some(cmp) = &intent.component {
            let act = self
                .app(&cmp.app_id)
                .and_then(|a| a.activity(&cmp.activity))
                .ok_or_else(|| DeviceError::UnknownComponent(cmp.clone()))?;
            if !act.exported && !privileged {
                return Err(DeviceError::NotExported(cmp.clone()));
            }
            let params = intent
                .data_uri
                .as_deref()
                .and_then(|u| act.deeplink_patterns.iter().find_map(|p| uri::match_pattern(p, u)))
                .unwrap_or_default();
            return Ok((cmp.clone(), params));
        }
        let Some(data) = intent.data_uri.as_deref() else {
            return Err(DeviceError::MissingTarget);
        };
        for app in &self.apps {
            for act in &app.activities {
                for pattern in &act.deeplink_patterns {
                    if let Some(params) = uri::match_pattern(pattern, data) {
                        return Ok((Component::new(&app.app_id, &act.name), params));
                    }
                }
            }
        }
        Err(DeviceError::NoMatch(data.to_string()))
    }

    /// Bring an app's existing task to the front at its last-viewed activity.
    pub fn bring_to_front(&mut self, app_id: &str) -> Result<Page, DeviceError> {
        match self.stacks.get(app_id) {
            Some(s) if !s.entries.is_empty() => {
                self.foreground = Some(app_id.to_string());
                self.current_page()
            }
            _ => Err(DeviceError::NoTask(app_id.to_string())),
        }
    }

    // ---- pages and gestures ---------------------------------------------

    fn top(&self) -> Option<(&str, &StackEntry)> {
        let app = self.foreground.as_deref()?;
        let entry = self.stacks.get(app)?.entries.last()?;
        Some((app, entry))
    }

    fn top_mut(&mut self) -> Option<&mut StackEntry> {
        let app = self.foreground.as_deref()?;
        self.stacks.get_mut(app)?.entries.last_mut()
    }

    fn render_entry(&self, app_id: &str, entry: &StackEntry) -> Page {
        let app = self.app(app_id).expect("stack app is installed");
        let act = app.activity(&entry.activity).expect("stack activity exists");
        page::render(&RenderInput {
            app_id,
            activity: &entry.activity,
            template: &act.page,
            params: &entry.params,
            scroll_offset: entry.scroll_offset,
            selected: &entry.selected,
            staging: &self.staging,
            seed: self.seed,
        })
    }

    pub fn current_page(&self) -> Result<Page, DeviceError> {
        let (app, entry) = self.top().ok_or(DeviceError::NoForeground)?;
        Ok(self.render_entry(app, entry))
    }

    pub fn snapshot(&self) -> Result<Observation, DeviceError> {
        let page = self.current_page()?;
        let obs = page.observe(self.clock);
        self.screenshots
            .write()
            .expect("screenshot store poisoned")
            .insert(obs.screenshot_id.clone(), page);
        Ok(obs)
    }

    pub fn apply_gesture(&mut self, gesture: &Gesture) -> Result<TransitionResult, DeviceError> {
        if self.top().is_none() {
            return Err(DeviceError::NoForeground);
        }
        let before = self.current_page().ok();
        match gesture {
            Gesture::Tap { x, y } => self.tap(Point::new(*x, *y))?,
            Gesture::MultiTap { points } => {
                if let Some(p) = points.iter().find(|p| !SCREEN.contains(**p)) {
                    return Err(DeviceError::OutOfBounds(p.x, p.y));
                }
                let saved = (self.stacks.clone(), self.foreground.clone(), self.launch_log.len());
                for p in points {
                    if let Err(e) = self.tap(*p) {
                        self.stacks = saved.0;
                        self.foreground = saved.1;
                        self.launch_log.truncate(saved.2);
                        return Err(e);
                    }
                }
            }
            Gesture::Scroll { direction, rows } => {
                let page = self.current_page()?;
                let max = page.max_scroll();
                if page.items.is_some() {
                    let cur = page.scroll_offset;
                    let next = match direction {
                        Direction::Down => (cur + rows).min(max),
                        Direction::Up => cur.saturating_sub(*rows),
                    };
                    if let Some(top) = self.top_mut() {
                        top.scroll_offset = next;
                    }
                }
            }
            Gesture::TypeText { node_id, text } => {
                let page = self.current_page()?;
                let node = page
                    .ui_root
                    .find(node_id)
                    .ok_or_else(|| DeviceError::UnknownNode(node_id.clone()))?;
                if node.role != Role::Input {
                    return Err(DeviceError::UnknownNode(node_id.clone()));
                }
                let app = self.app(&page.app_id).expect("installed");
                let tpl = &app.activity(&page.activity).expect("exists").page;
                let param = find_template(&tpl.nodes, node_id)
                    .and_then(|n| n.param.clone())
                    .unwrap_or_else(|| node_id.clone());
                if let Some(top) = self.top_mut() {
                    top.params.insert(param, text.clone());
                }
            }
            Gesture::Back => self.back(),
        }
        let after = self.current_page().ok();
        Ok(TransitionResult {
            changed: before != after,
            page: after,
        })
    }

    fn back(&mut self) {
        let Some(app) = self.foreground.clone() else {
            return;
        };
        if let Some(stack) = self.stacks.get_mut(&app) {
            stack.entries.pop();
            if stack.entries.is_empty() {
                self.stacks.remove(&app);
                self.foreground = None;
            }
        }
    }

    fn tap(&mut self, p: Point) -> Result<(), DeviceError> {
        if !SCREEN.contains(p) {
            return Err(DeviceError::OutOfBounds(p.x, p.y));
        }
        let page = self.current_page()?;
        let action = page
            .overlay_actions
            .iter()
            .rev()
            .find(|(r, _)| r.contains(p))
            .map(|(_, t)| (None, t.clone()))
            .or_else(|| {
                let target = hit_test(&page.ui_root, p)?;
                page.node_actions
                    .get(&target.node_id)
                    .map(|t| (Some(target.node_id.clone()), t.clone()))
            });
        let Some((node, transition)) = action else {
            return Ok(());
        };
        match transition {
            Transition::Launch {
                activity,
                app,
                uri,
                extras,
            } => {
                let target_app = app.unwrap_or_else(|| page.app_id.clone());
                let same_app = target_app == page.app_id;
                let intent = IntentMsg {
                    action: if uri.is_some() { ACTION_VIEW } else { ACTION_MAIN }.to_string(),
                    data_uri: uri,
                    component: Some(Component::new(target_app, activity)),
                    extras,
                };
                self.launch_intent(&intent, same_app)?;
            }
            Transition::ToggleSelect => {
                if let (Some(id), Some(top)) = (node, self.top_mut()) {
                    if !top.selected.remove(&id) {
                        top.selected.insert(id);
                    }
                }
            }
            Transition::Back => self.back(),
        }
        Ok(())
    }

    // ---- introspection ---------------------------------------------------

    /// Text dump of every non-empty task stack in install order.
    pub fn dumpsys_activity(&self) -> String {
        let mut out = String::new();
        for app in &self.apps {
            let Some(stack) = self.stacks.get(&app.app_id) else {
                continue;
            };
            if stack.entries.is_empty() {
                continue;
            }
            out.push_str(&dump::task_line(&app.app_id, stack.task_id));
            out.push('\n');
            for e in &stack.entries {
                out.push_str(&dump::activity_line(&app.app_id, &e.activity));
                out.push('\n');
                out.push_str(&dump::intent_line(&e.intent));
                out.push('\n');
            }
        }
        out
    }

    // ---- clock and alarms ------------------------------------------------

    pub fn schedule_alarm(
        &mut self,
        fire_at: u64,
        repeat_every: Option<u64>,
        payload: TriggerEvent,
    ) -> Result<String, DeviceError> {
        if repeat_every == Some(0) {
            return Err(DeviceError::InvalidFixture("repeat_every must be > 0".into()));
        }
        let seq = self.next_alarm_seq;
        self.next_alarm_seq += 1;
        let alarm_id = format!("alarm-{seq}");
        self.alarms.push(ArmedAlarm {
            spec: AlarmSpec {
                alarm_id: alarm_id.clone(),
                fire_at,
                repeat_every,
                payload,
            },
            next_fire: fire_at,
            seq,
        });
        Ok(alarm_id)
    }

    pub fn alarms(&self) -> Vec<AlarmSpec> {
        self.alarms.iter().map(|a| a.spec.clone()).collect()
    }

    /// Advance virtual time, returning fired alarm payloads in fire order.
    pub fn advance_clock(&mut self, dt: u64) -> Vec<TriggerEvent> {
        self.clock = self.clock.saturating_add(dt);
        alarm::fire_due(&mut self.alarms, self.clock)
    }

    // ---- audio -----------------------------------------------------------

    pub fn set_playback(&mut self, mut segments: Vec<SpeechSegment>) -> Result<(), DeviceError> {
        segments.sort_by_key(|s| (s.t_start, s.t_end));
        if segments.windows(2).any(|w| w[1].t_start < w[0].t_end) {
            return Err(DeviceError::OverlappingSegments);
        }
        for s in &mut segments {
            s.channel = Channel::Playback;
        }
        self.playback = segments;
        Ok(())
    }

    pub fn playback(&self) -> &[SpeechSegment] {
        &self.playback
    }

    /// What the microphone hears: user speech plus an echo of every
    /// playback segment at its own timestamps.
    pub fn capture_mic(&self, user: &[SpeechSegment]) -> Vec<SpeechSegment> {
        let mut out: Vec<SpeechSegment> = user
            .iter()
            .cloned()
            .chain(self.playback.iter().cloned())
            .map(|mut s| {
                s.channel = Channel::Mic;
                s
            })
            .collect();
        out.sort_by_key(|s| s.t_start);
        out
    }

    /// Hash over all mutable device state.
    pub fn state_digest(&self) -> String {
        let exported: Vec<(&str, &str, bool, usize)> = self
            .apps
            .iter()
            .flat_map(|a| {
                a.activities.iter().map(move |act| {
                    (a.app_id.as_str(), act.name.as_str(), act.exported, act.deeplink_patterns.len())
                })
            })
            .collect();
        let body = serde_json::json!({
            "stacks": self.stacks,
            "foreground": self.foreground,
            "clock": self.clock,
            "alarms": self.alarms,
            "media": self.media,
            "staging": self.staging,
            "playback": self.playback,
            "exported": exported,
            "launch_log": self.launch_log,
        });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }
}

/// Deepest clickable node (or clickable ancestor) containing the point.
fn hit_test(root: &UiNode, p: Point) -> Option<&UiNode> {
    let mut node = root;
    let mut hit = None;
    loop {
        if !node.bounds.contains(p) {
            return hit;
        }
        if node.clickable {
            hit = Some(node);
        }
        match node.children.iter().rev().find(|c| c.bounds.contains(p)) {
            Some(c) => node = c,
            None => return hit,
        }
    }
}

fn find_template<'a>(nodes: &'a [NodeTemplate], id: &str) -> Option<&'a NodeTemplate> {
    nodes.iter().find_map(|n| {
        if n.id == id {
            Some(n)
        } else {
            find_template(&n.children, id)
        }
    })
}
