//! Brute-force oracles and random generators shared by the property suites.
//!
//! The oracles are written against the documented rules, not against the
//! library code: no library scoring or matching helper is called here.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use pocket_core::device::{
    Component, IntentMsg, MediaAsset, Observation, RenderOrigin, RenderText, Role, SceneDescriptor, SimActivity,
    SimApp, UiNode,
};
use pocket_core::geometry::{Point, Rect};
use pocket_core::grounding::GroundingSource;
use pocket_core::memory::{MemoryEntry, MemoryFile, SummaryKind};
use pocket_core::perception::{Frame, SpeechSegment};
use pocket_core::perception::ActionType;
use pocket_core::perception::{IntentOrigin, StructuredIntent};
use pocket_core::replay::{CaptureMethod, LaunchDescriptor, SkillCard};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn word_set(text: &str) -> BTreeSet<String> {
    words(text).into_iter().collect()
}

// ---- AEC ------------------------------------------------------------------

/// Lowercase, punctuation dropped, single spaces. Generators only emit
/// ASCII, so this is all the normalisation needed.
fn norm(text: &str) -> String {
    let kept: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Full (mic × playback) match matrix, then playbacks in start order each
/// claim the earliest unclaimed matching mic segment.
pub fn aec_oracle(mic: &[SpeechSegment], playback: &[SpeechSegment], window: u64) -> Vec<SpeechSegment> {
    let matches: Vec<Vec<bool>> = playback
        .iter()
        .map(|p| {
            mic.iter()
                .map(|m| norm(&m.text) == norm(&p.text) && m.t_start.abs_diff(p.t_start) <= window)
                .collect()
        })
        .collect();
    let mut pb: Vec<usize> = (0..playback.len()).collect();
    pb.sort_by_key(|&i| (playback[i].t_start, i));
    let mut removed = BTreeSet::new();
    for p in pb {
        let best = (0..mic.len())
            .filter(|&m| matches[p][m] && !removed.contains(&m))
            .min_by_key(|&m| (mic[m].t_start, m));
        if let Some(m) = best {
            removed.insert(m);
        }
    }
    mic.iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, m)| m.clone())
        .collect()
}

/// Does any playback segment share the normalised text of `m`?
pub fn has_echo_counterpart(m: &SpeechSegment, playback: &[SpeechSegment]) -> bool {
    playback.iter().any(|p| norm(&p.text) == norm(&m.text))
}

const PHRASES: &[&str] = &[
    "check price",
    "now playing song",
    "Now playing: song!",
    "open the second item",
    "weather today",
    "la la",
    "LA, la.",
    "turn it up",
];

/// Random mix of user speech, playback, and echoes of that playback.
pub fn speech_mix(r: &mut Rng8) -> (Vec<SpeechSegment>, Vec<SpeechSegment>) {
    let mut playback = Vec::new();
    let mut t = 0u64;
    for _ in 0..r.gen_range(0..6) {
        t += r.gen_range(0..1500);
        let len = r.gen_range(50..800);
        playback.push(SpeechSegment::playback(PHRASES.choose(r).unwrap(), t, t + len));
        t += len;
    }
    let mut mic = Vec::new();
    // the speaker is heard once: at most one echo per playback
    for p in &playback {
        for _ in 0..r.gen_range(0..2) {
            let delay = r.gen_range(0..1200);
            mic.push(SpeechSegment::mic(&p.text, p.t_start + delay, p.t_end + delay));
        }
    }
    for _ in 0..r.gen_range(0..5) {
        let s = r.gen_range(0..t + 3000);
        mic.push(SpeechSegment::mic(PHRASES.choose(r).unwrap(), s, s + r.gen_range(50..600)));
    }
    mic.shuffle(r);
    (mic, playback)
}

// ---- alignment -------------------------------------------------------------

pub struct AlignOracle {
    pub window: (i64, i64),
    pub frame_ids: Vec<u64>,
    pub representative: u64,
}

/// Scan every frame; ties on distance go to the earlier frame.
pub fn align_oracle(frames: &[Frame], t0: u64, t1: u64, pre: u64, post: u64) -> Option<AlignOracle> {
    let latest = frames.last()?;
    let lo = t0 as i64 - pre as i64;
    let hi = t1 as i64 + post as i64;
    let inside: Vec<&Frame> = frames
        .iter()
        .filter(|f| f.timestamp as i64 >= lo && f.timestamp as i64 <= hi)
        .collect();
    if inside.is_empty() {
        return Some(AlignOracle {
            window: (lo, hi),
            frame_ids: vec![latest.frame_id],
            representative: latest.frame_id,
        });
    }
    let mid = (t0 as f64 + t1 as f64) / 2.0;
    let mut best = inside[0];
    for f in &inside[1..] {
        let d = (f.timestamp as f64 - mid).abs();
        let bd = (best.timestamp as f64 - mid).abs();
        if d < bd || (d == bd && f.timestamp < best.timestamp) {
            best = f;
        }
    }
    Some(AlignOracle {
        window: (lo, hi),
        frame_ids: inside.iter().map(|f| f.frame_id).collect(),
        representative: best.frame_id,
    })
}

pub fn random_frames(r: &mut Rng8, n: usize) -> Vec<Frame> {
    let mut t = r.gen_range(0..3000);
    (0..n)
        .map(|i| {
            t += r.gen_range(0..700);
            Frame::camera(i as u64 + 1, t, SceneDescriptor::default())
        })
        .collect()
}

// ---- memory ----------------------------------------------------------------

const TAGS: &[&str] = &[
    "parrot", "beach", "cat", "dog", "sunset", "birthday", "cake", "mountain", "city", "night", "food", "car",
];

pub fn random_gallery(r: &mut Rng8, n: usize) -> MemoryFile {
    let entries = (0..n)
        .map(|i| {
            let pick = |r: &mut Rng8, max: usize| -> Vec<String> {
                let k = if max <= 1 { 1 } else { r.gen_range(0..max) };
                (0..k).map(|_| TAGS.choose(r).unwrap().to_string()).collect()
            };
            let objects = pick(r, 3);
            MemoryEntry {
                filename: format!("IMG_{:04}.jpg", r.gen_range(0..10_000) * 1000 + i),
                captured_at: r.gen_range(0..50),
                summary_kind: SummaryKind::Model,
                objects,
                scene: pick(r, 1).join(" "),
                event: if r.gen_bool(0.5) { pick(r, 1).join(" ") } else { String::new() },
                free_text: pick(r, 4).join(", "),
            }
        })
        .collect();
    MemoryFile { entries, cursor: n as u64 }
}

pub fn random_query(r: &mut Rng8) -> String {
    let k = r.gen_range(1..4);
    let mut q: Vec<&str> = (0..k).map(|_| *TAGS.choose(r).unwrap()).collect();
    if r.gen_bool(0.2) {
        q.push("zebra");
    }
    q.join(" ")
}

/// Score every entry by distinct query words present anywhere in it.
pub fn memory_query_oracle(query: &str, file: &MemoryFile) -> Vec<(String, usize)> {
    let q = word_set(query);
    let mut scored: Vec<(String, usize, u64)> = Vec::new();
    for e in &file.entries {
        let mut all = String::new();
        for o in &e.objects {
            all.push_str(o);
            all.push(' ');
        }
        for f in [&e.scene, &e.event, &e.free_text] {
            all.push_str(f);
            all.push(' ');
        }
        let have = word_set(&all);
        let score = q.iter().filter(|t| have.contains(*t)).count();
        if score > 0 {
            scored.push((e.filename.clone(), score, e.captured_at));
        }
    }
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(f, s, _)| (f, s)).collect()
}

pub fn random_media(r: &mut Rng8, n: usize) -> Vec<MediaAsset> {
    let mut t = 0;
    (1..=n as u64)
        .map(|id| {
            t += r.gen_range(0..100);
            let mut objects: Vec<String> = (0..r.gen_range(0..3)).map(|_| TAGS.choose(r).unwrap().to_string()).collect();
            if r.gen_bool(0.1) {
                objects.push(format!("note 1380013{:04}", r.gen_range(0..10_000)));
            }
            MediaAsset {
                asset_id: id,
                filename: format!("IMG_{id:04}.jpg"),
                folder: "DCIM/Camera".into(),
                captured_at: t,
                width: 4032,
                height: 3024,
                truth_descriptor: SceneDescriptor {
                    objects,
                    scene: TAGS.choose(r).unwrap().to_string(),
                    event: if r.gen_bool(0.1) { "addr: Main St".into() } else { String::new() },
                },
            }
        })
        .collect()
}

// ---- grounding -------------------------------------------------------------

const SCREEN_W: i32 = 1080;
const SCREEN_H: i32 = 1920;

fn clip(b: &Rect) -> Option<Rect> {
    let x0 = b.x.max(0);
    let y0 = b.y.max(0);
    let x1 = (b.x + b.w).min(SCREEN_W);
    let y1 = (b.y + b.h).min(SCREEN_H);
    (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
}

/// A candidate's score is |q| / `den`, so a smaller `den` is a better score.
#[derive(Debug, Clone)]
struct Cand {
    den: usize,
    bbox: Rect,
    node: Option<String>,
}

fn better(a: &Cand, b: &Cand) -> bool {
    (a.den, a.bbox.w as i64 * a.bbox.h as i64, a.bbox.y, a.bbox.x)
        < (b.den, b.bbox.w as i64 * b.bbox.h as i64, b.bbox.y, b.bbox.x)
}

fn best_of(cands: Vec<Cand>) -> Option<Cand> {
    let mut best: Option<Cand> = None;
    for c in cands {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            best = Some(c);
        }
    }
    best
}

fn smallest_cover(q: &BTreeSet<String>, fields: &[BTreeSet<String>]) -> Option<usize> {
    fields
        .iter()
        .filter(|f| !f.is_empty() && q.is_subset(f))
        .map(BTreeSet::len)
        .min()
}

fn xml_cands(node: &UiNode, inherited: bool, q: &BTreeSet<String>, role: Option<Role>, out: &mut Vec<Cand>) {
    let clickable = inherited || node.clickable;
    if clickable && role.is_none_or(|r| r == node.role) {
        let fields = [word_set(&node.text), word_set(&node.content_desc), word_set(&node.resource_id)];
        let union: BTreeSet<String> = fields.iter().flatten().cloned().collect();
        let den = smallest_cover(q, &fields).or_else(|| smallest_cover(q, std::slice::from_ref(&union)));
        if let (Some(den), Some(bbox)) = (den, clip(&node.bounds)) {
            out.push(Cand {
                den,
                bbox,
                node: Some(node.node_id.clone()),
            });
        }
    }
    for c in &node.children {
        xml_cands(c, clickable, q, role, out);
    }
}

pub struct GroundOracle {
    pub source: GroundingSource,
    pub bbox: Rect,
    pub node: Option<String>,
    pub score: f64,
}

/// Exhaustive search over all three candidate stages.
pub fn ground_oracle(
    obs: &Observation,
    query: &str,
    role: Option<Role>,
    visual: Option<Rect>,
    tau: f64,
) -> Option<GroundOracle> {
    let q = word_set(query);
    if q.is_empty() {
        return None;
    }
    let mut xml = Vec::new();
    xml_cands(&obs.ui_root, false, &q, role, &mut xml);
    let ocr: Vec<Cand> = obs
        .render_layer
        .iter()
        .filter_map(|t| {
            let den = smallest_cover(&q, &[word_set(&t.text)])?;
            Some(Cand {
                den,
                bbox: clip(&t.bbox)?,
                node: t.backing_node.clone(),
            })
        })
        .collect();
    let vis: Vec<Cand> = visual
        .and_then(|b| clip(&b))
        .map(|bbox| Cand {
            den: q.len(),
            bbox,
            node: None,
        })
        .into_iter()
        .collect();
    let stages = [
        (GroundingSource::Xml, best_of(xml)),
        (GroundingSource::Ocr, best_of(ocr)),
        (GroundingSource::Visual, best_of(vis)),
    ];
    let score = |c: &Cand| q.len() as f64 / c.den as f64;
    let to = |s: GroundingSource, c: &Cand| GroundOracle {
        source: s,
        bbox: c.bbox,
        node: c.node.clone(),
        score: score(c),
    };
    if let Some((s, c)) = stages
        .iter()
        .find_map(|(s, c)| c.as_ref().filter(|c| score(c) >= tau).map(|c| (*s, c)))
    {
        return Some(to(s, c));
    }
    stages.iter().find_map(|(s, c)| c.as_ref().map(|c| to(*s, c)))
}

const UI_WORDS: &[&str] = &["buy", "now", "add", "cart", "search", "ok", "cancel", "next", "settings", "share"];

fn random_text(r: &mut Rng8) -> String {
    if r.gen_bool(0.3) {
        return String::new();
    }
    let n = r.gen_range(1..4);
    (0..n).map(|_| *UI_WORDS.choose(r).unwrap()).collect::<Vec<_>>().join(" ")
}

fn random_rect(r: &mut Rng8) -> Rect {
    // occasionally off screen or degenerate
    let x = r.gen_range(-100..1100);
    let y = r.gen_range(-100..1950);
    let w = if r.gen_bool(0.05) { 0 } else { r.gen_range(1..500) };
    let h = r.gen_range(1..300);
    Rect::new(x, y, w, h)
}

fn random_node(r: &mut Rng8, id: &mut usize, budget: &mut usize, depth: usize) -> UiNode {
    *id += 1;
    *budget = budget.saturating_sub(1);
    let roles = [Role::Button, Role::Text, Role::Image, Role::Container];
    let mut node = UiNode {
        node_id: format!("n{id}"),
        role: *roles.choose(r).unwrap(),
        text: random_text(r),
        content_desc: if r.gen_bool(0.2) { random_text(r) } else { String::new() },
        resource_id: if r.gen_bool(0.2) { random_text(r).replace(' ', "_") } else { String::new() },
        bounds: random_rect(r),
        clickable: r.gen_bool(0.4),
        scrollable: false,
        children: Vec::new(),
    };
    if depth < 5 {
        let kids = r.gen_range(0..5);
        for _ in 0..kids {
            if *budget == 0 {
                break;
            }
            node.children.push(random_node(r, id, budget, depth + 1));
        }
    }
    node
}

/// A page of at most `max_nodes` nodes. Every node with text is drawn; a
/// few overlay-only texts use words that never occur in the tree.
pub fn random_observation(r: &mut Rng8, max_nodes: usize) -> (Observation, Vec<String>) {
    let mut id = 0;
    let mut budget = max_nodes - 1;
    let mut root = random_node(r, &mut id, &mut budget, 0);
    root.bounds = Rect::new(0, 0, 1080, 1920);
    root.clickable = false;
    root.text.clear();
    let mut render: Vec<RenderText> = Vec::new();
    fn draw(n: &UiNode, out: &mut Vec<RenderText>) {
        if !n.text.is_empty() {
            out.push(RenderText {
                text: n.text.clone(),
                bbox: n.bounds,
                origin: RenderOrigin::Structural,
                backing_node: Some(n.node_id.clone()),
            });
        }
        for c in &n.children {
            draw(c, out);
        }
    }
    draw(&root, &mut render);
    let mut overlays = Vec::new();
    for i in 0..r.gen_range(0..3) {
        let text = format!("claim reward{i}");
        render.push(RenderText {
            text: text.clone(),
            bbox: Rect::new(r.gen_range(0..900), r.gen_range(0..1800), r.gen_range(20..180), r.gen_range(20..120)),
            origin: RenderOrigin::OverlayOnly,
            backing_node: None,
        });
        overlays.push(text);
    }
    let obs = Observation {
        app_id: "rand".into(),
        activity: "Page".into(),
        params: BTreeMap::new(),
        ui_root: root,
        render_layer: render,
        scroll_offset: 0,
        timestamp: 0,
        screenshot_id: "shot".into(),
    };
    (obs, overlays)
}

pub fn random_target(r: &mut Rng8) -> String {
    let n = r.gen_range(1..3);
    (0..n).map(|_| *UI_WORDS.choose(r).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn node_count(n: &UiNode) -> usize {
    1 + n.children.iter().map(node_count).sum::<usize>()
}

pub fn inside(p: Point, b: &Rect) -> bool {
    p.x >= b.x && p.x < b.x + b.w && p.y >= b.y && p.y < b.y + b.h
}

// ---- skills ----------------------------------------------------------------

pub fn card(name: &str, app: &str, triggers: &[&str], created_at: u64) -> SkillCard {
    SkillCard {
        name: name.into(),
        description: triggers.join(" "),
        triggers: triggers.iter().map(|t| t.to_string()).collect(),
        target_app: app.into(),
        entry: LaunchDescriptor {
            action: "android.intent.action.VIEW".into(),
            data_uri: None,
            component: Component::new(app, "Home"),
            extras: BTreeMap::new(),
            capture_method: CaptureMethod::KeywordFilter,
        },
        trajectory_ref: "trace-000000000000".into(),
        parameters: Vec::new(),
        created_at,
    }
}

pub fn intent(query: &str, app: &str, action: ActionType) -> StructuredIntent {
    StructuredIntent {
        expanded_query: query.into(),
        target_app: app.into(),
        action_type: action,
        slots: BTreeMap::new(),
        origin: IntentOrigin::RuleStub,
    }
}

/// Every card whose triggers are all available wins by trigger count, then
/// recency, then the smaller name.
pub fn select_skill_oracle<'a>(it: &StructuredIntent, cards: &'a [SkillCard]) -> Option<&'a SkillCard> {
    let mut have = word_set(&it.expanded_query);
    have.insert(it.action_type.as_str().to_string());
    have.extend(word_set(&it.target_app));
    let mut best: Option<&SkillCard> = None;
    for c in cards {
        if c.target_app != it.target_app || c.triggers.is_empty() || !c.triggers.iter().all(|t| have.contains(t)) {
            continue;
        }
        let key = |c: &SkillCard| (c.triggers.len(), c.created_at, std::cmp::Reverse(c.name.clone()));
        if best.is_none_or(|b| key(c) > key(b)) {
            best = Some(c);
        }
    }
    best
}

// ---- dumps -----------------------------------------------------------------

const NAME_CHARS: &[char] = &['a', 'b', 'z', 'Q', '0', '_', '.', ' ', '%', '=', ',', '{', '}', '/', '-', 'é'];

fn odd_name(r: &mut Rng8, prefix: &str) -> String {
    let n = r.gen_range(0..6);
    let tail: String = (0..n).map(|_| *NAME_CHARS.choose(r).unwrap()).collect();
    format!("{prefix}{tail}")
}

/// Apps with awkward names; every activity exported, no deeplinks.
pub fn random_apps(r: &mut Rng8) -> Vec<SimApp> {
    let mut ids = BTreeSet::new();
    let mut apps = Vec::new();
    for i in 0..r.gen_range(1..5) {
        let app_id = odd_name(r, &format!("app{i}"));
        if !ids.insert(app_id.clone()) {
            continue;
        }
        let mut names = BTreeSet::new();
        let activities: Vec<SimActivity> = (0..r.gen_range(1..4))
            .map(|j| odd_name(r, &format!("Act{j}")))
            .filter(|n| names.insert(n.clone()))
            .map(|name| SimActivity {
                name,
                exported: true,
                deeplink_patterns: Vec::new(),
                page: Default::default(),
            })
            .collect();
        apps.push(SimApp {
            home_activity: activities[0].name.clone(),
            app_id,
            display_name: String::new(),
            activities,
        });
    }
    apps
}

pub fn random_launch(r: &mut Rng8, apps: &[SimApp]) -> IntentMsg {
    let app = apps.choose(r).unwrap();
    let act = app.activities.choose(r).unwrap();
    let mut intent = IntentMsg::component(&app.app_id, &act.name);
    if r.gen_bool(0.4) {
        intent.action = odd_name(r, "act.");
    }
    if r.gen_bool(0.4) {
        intent.data_uri = Some(if r.gen_bool(0.1) { "-".into() } else { odd_name(r, "x://h/") });
    }
    for _ in 0..r.gen_range(0..3) {
        intent.extras.insert(odd_name(r, "k"), odd_name(r, ""));
    }
    intent
}

// ---- scroll extraction -----------------------------------------------------

/// Items visible at each scroll offset actually visited, in first-seen order.
pub fn viewport_union(total: usize, rows: usize, passes: usize) -> Vec<usize> {
    let max_offset = total.saturating_sub(rows);
    let step = if rows > 1 { rows - 1 } else { 1 };
    let mut seen = Vec::new();
    let mut offset = 0;
    for pass in 0..=passes {
        if pass > 0 {
            offset = (offset + step).min(max_offset);
        }
        for i in offset..(offset + rows).min(total) {
            if !seen.contains(&i) {
                seen.push(i);
            }
        }
    }
    seen
}

// ---- alarms ----------------------------------------------------------------

/// Firings of an alarm at `first` repeating every `period`, within `(now, now + dt]`.
pub fn alarm_count(first: u64, period: u64, now: u64, dt: u64) -> u64 {
    let end = now + dt;
    if end < first {
        return 0;
    }
    (end - first) / period + 1
}
