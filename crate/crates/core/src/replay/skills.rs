//! Skill cards, bookmarks and their field-per-line text files.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CaptureMethod, LaunchDescriptor, PageSignature, ReplayError, Trajectory};
use crate::device::dump::{escape_dash, EXTRA_RESERVED, HEAD_RESERVED};
use crate::device::{Component, IntentMsg};
use crate::models::SkillNamer;
use crate::text::{content_words, escape, tokens, unescape};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillCard {
    pub name: String,
    pub description: String,
    pub triggers: Vec<String>,
    pub target_app: String,
    pub entry: LaunchDescriptor,
    pub trajectory_ref: String,
    /// Query keys of the entry URI and extras keys; bindable at invocation.
    pub parameters: Vec<String>,
    pub created_at: u64,
}

fn query_pairs(uri: &str) -> Vec<(String, String)> {
    uri.split_once('?')
        .map(|(_, q)| {
            q.split('&')
                .filter(|s| !s.is_empty())
                .map(|p| {
                    let (k, v) = p.split_once('=').unwrap_or((p, ""));
                    (unescape(k), unescape(v))
                })
                .collect()
        })
        .unwrap_or_default()
}

fn parameter_values(entry: &LaunchDescriptor) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = entry.data_uri.as_deref().map(query_pairs).unwrap_or_default();
    out.extend(entry.extras.iter().map(|(k, v)| (k.clone(), v.clone())));
    out
}

impl SkillCard {
    /// Entry intent with bound parameters substituted into the URI query and
    /// extras. Unbound parameters keep their recorded values.
    pub fn entry_with(&self, params: &BTreeMap<String, String>) -> IntentMsg {
        let mut intent = self.entry.to_intent();
        if let Some(uri) = &intent.data_uri {
            if let Some((base, _)) = uri.split_once('?') {
                let q = query_pairs(uri)
                    .into_iter()
                    .map(|(k, v)| {
                        let v = params.get(&k).cloned().unwrap_or(v);
                        format!("{}={}", escape(&k, &[' ', '&', '=', '#']), escape(&v, &[' ', '&', '=', '#']))
                    })
                    .collect::<Vec<_>>()
                    .join("&");
                intent.data_uri = Some(format!("{base}?{q}"));
            }
        }
        for (k, v) in intent.extras.iter_mut() {
            if let Some(p) = params.get(k) {
                *v = p.clone();
            }
        }
        intent
    }
}

/// Turn a recorded trajectory plus the introspected entry into a card.
pub fn distill_skill(
    traj: &Trajectory,
    descriptor: &LaunchDescriptor,
    namer: &dyn SkillNamer,
    created_at: u64,
) -> Result<SkillCard, ReplayError> {
    let want = descriptor.component.to_string();
    let got = Component::new(&traj.final_app, &traj.final_activity).to_string();
    if want != got {
        return Err(ReplayError::FinalMismatch { want, got });
    }
    let (name, description) = traj
        .final_signature
        .as_ref()
        .and_then(|s| namer.name_skill(&traj.final_app, s).ok())
        .unwrap_or_else(|| (got.clone(), got.clone()));
    let params = parameter_values(descriptor);
    // recorded argument values are not part of the purpose
    let literal: BTreeSet<String> = params.iter().flat_map(|(_, v)| tokens(v)).collect();
    let triggers = content_words(&description)
        .into_iter()
        .filter(|t| !literal.contains(t))
        .collect();
    Ok(SkillCard {
        name,
        description,
        triggers,
        target_app: descriptor.component.app_id.clone(),
        entry: descriptor.clone(),
        trajectory_ref: traj.trace_id.clone(),
        parameters: params.into_iter().map(|(k, _)| k).collect(),
        created_at,
    })
}

/// Skill cards keyed by name, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillRegistry {
    cards: Vec<SkillCard>,
}

impl SkillRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert, replacing any card with the same name.
    pub fn insert(&mut self, card: SkillCard) {
        self.cards.retain(|c| c.name != card.name);
        self.cards.push(card);
    }

    pub fn get(&self, name: &str) -> Option<&SkillCard> {
        self.cards.iter().find(|c| c.name == name)
    }

    pub fn cards(&self) -> &[SkillCard] {
        &self.cards
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bookmark {
    pub name: String,
    pub descriptor: LaunchDescriptor,
    pub signature: PageSignature,
    pub summary: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookmarkStore {
    bookmarks: BTreeMap<String, Bookmark>,
}

impl BookmarkStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, b: Bookmark) -> Result<(), ReplayError> {
        if self.bookmarks.contains_key(&b.name) {
            return Err(ReplayError::DuplicateBookmark(b.name));
        }
        self.bookmarks.insert(b.name.clone(), b);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Bookmark, ReplayError> {
        self.bookmarks
            .get(name)
            .ok_or_else(|| ReplayError::UnknownBookmark(name.into()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Bookmark> {
        self.bookmarks.values()
    }

    pub fn len(&self) -> usize {
        self.bookmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bookmarks.is_empty()
    }
}

// ---- text files ---------------------------------------------------------

const LIST_RESERVED: &[char] = &[','];

fn join_list(items: &[String]) -> String {
    items.iter().map(|i| escape(i, LIST_RESERVED)).collect::<Vec<_>>().join(",")
}

fn split_list(raw: &str) -> Vec<String> {
    if raw.is_empty() {
        return Vec::new();
    }
    raw.split(',').map(unescape).collect()
}

fn entry_lines(d: &LaunchDescriptor, out: &mut Vec<(&'static str, String)>) {
    out.push(("entry.action", escape(&d.action, &[])));
    out.push((
        "entry.data_uri",
        d.data_uri.as_deref().map_or_else(|| "-".into(), |u| escape_dash(u, &[])),
    ));
    out.push((
        "entry.component",
        format!(
            "{}/{}",
            escape(&d.component.app_id, HEAD_RESERVED),
            escape(&d.component.activity, HEAD_RESERVED)
        ),
    ));
    out.push((
        "entry.extras",
        d.extras
            .iter()
            .map(|(k, v)| format!("{}={}", escape(k, EXTRA_RESERVED), escape(v, EXTRA_RESERVED)))
            .collect::<Vec<_>>()
            .join(","),
    ));
    out.push(("entry.capture_method", d.capture_method.as_str().into()));
}

fn render(lines: Vec<(&'static str, String)>) -> String {
    lines.into_iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
}

struct Fields {
    kind: &'static str,
    map: BTreeMap<String, String>,
}

impl Fields {
    fn parse(kind: &'static str, text: &str) -> Result<Self, ReplayError> {
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(": ").or_else(|| line.strip_suffix(':').map(|k| (k, ""))).ok_or(
                ReplayError::Malformed {
                    kind,
                    detail: format!("line without key: {line}"),
                },
            )?;
            map.insert(k.trim().to_string(), v.to_string());
        }
        Ok(Self { kind, map })
    }

    fn raw(&self, key: &str) -> Result<&str, ReplayError> {
        self.map.get(key).map(String::as_str).ok_or_else(|| ReplayError::Malformed {
            kind: self.kind,
            detail: format!("missing {key}"),
        })
    }

    fn text(&self, key: &str) -> Result<String, ReplayError> {
        self.raw(key).map(unescape)
    }

    fn number(&self, key: &str) -> Result<u64, ReplayError> {
        self.raw(key)?.parse().map_err(|_| ReplayError::Malformed {
            kind: self.kind,
            detail: format!("{key} is not a number"),
        })
    }

    fn bad(&self, detail: &str) -> ReplayError {
        ReplayError::Malformed {
            kind: self.kind,
            detail: detail.into(),
        }
    }

    fn entry(&self) -> Result<LaunchDescriptor, ReplayError> {
        let data_uri = match self.raw("entry.data_uri")? {
            "-" => None,
            u => Some(unescape(u)),
        };
        let (app, act) = self
            .raw("entry.component")?
            .split_once('/')
            .ok_or_else(|| self.bad("component needs app/activity"))?;
        let mut extras = BTreeMap::new();
        let raw = self.raw("entry.extras")?;
        if !raw.is_empty() {
            for pair in raw.split(',') {
                let (k, v) = pair.split_once('=').ok_or_else(|| self.bad("extras need k=v"))?;
                extras.insert(unescape(k), unescape(v));
            }
        }
        let capture_method = match self.raw("entry.capture_method")? {
            "keyword_filter" => CaptureMethod::KeywordFilter,
            "full_parse" => CaptureMethod::FullParse,
            other => return Err(self.bad(&format!("unknown capture method {other}"))),
        };
        Ok(LaunchDescriptor {
            action: self.text("entry.action")?,
            data_uri,
            component: Component::new(unescape(app), unescape(act)),
            extras,
            capture_method,
        })
    }
}

impl SkillCard {
    pub fn to_text(&self) -> String {
        let mut l = vec![
            ("name", escape(&self.name, &[])),
            ("description", escape(&self.description, &[])),
            ("triggers", join_list(&self.triggers)),
            ("target_app", escape(&self.target_app, &[])),
        ];
        entry_lines(&self.entry, &mut l);
        l.push(("trajectory_ref", escape(&self.trajectory_ref, &[])));
        l.push(("parameters", join_list(&self.parameters)));
        l.push(("created_at", self.created_at.to_string()));
        render(l)
    }

    pub fn parse(text: &str) -> Result<Self, ReplayError> {
        let f = Fields::parse("skill", text)?;
        let card = SkillCard {
            name: f.text("name")?,
            description: f.text("description")?,
            triggers: split_list(f.raw("triggers")?),
            target_app: f.text("target_app")?,
            entry: f.entry()?,
            trajectory_ref: f.text("trajectory_ref")?,
            parameters: split_list(f.raw("parameters")?),
            created_at: f.number("created_at")?,
        };
        if card.entry.component.app_id != card.target_app {
            return Err(f.bad("entry component app differs from target_app"));
        }
        Ok(card)
    }
}

impl Bookmark {
    pub fn to_text(&self) -> String {
        let mut l = vec![
            ("name", escape(&self.name, &[])),
            ("summary", escape(&self.summary, &[])),
            ("created_at", self.created_at.to_string()),
        ];
        entry_lines(&self.descriptor, &mut l);
        l.push(("signature.activity", escape(&self.signature.activity, &[])));
        l.push(("signature.top_texts", join_list(&self.signature.top_texts)));
        l.push(("signature.digest", self.signature.digest.clone()));
        render(l)
    }

    pub fn parse(text: &str) -> Result<Self, ReplayError> {
        let f = Fields::parse("bookmark", text)?;
        let signature = PageSignature::new(&f.text("signature.activity")?, split_list(f.raw("signature.top_texts")?));
        if signature.digest != f.raw("signature.digest")? {
            return Err(f.bad("signature digest does not match its fields"));
        }
        Ok(Bookmark {
            name: f.text("name")?,
            descriptor: f.entry()?,
            signature,
            summary: f.text("summary")?,
            created_at: f.number("created_at")?,
        })
    }
}
