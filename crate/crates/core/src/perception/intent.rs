//! Scene-grounded understanding and ⟨app, action, slots⟩ decomposition.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{AlignedUtterance, PerceptionError};
use crate::device::SceneDescriptor;
use crate::models::SceneResolver;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Understanding {
    DirectAnswer(String),
    Expanded(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    Search,
    Open,
    ExecuteSkill,
    Compose,
    Answer,
}

impl ActionType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionType::Search => "search",
            ActionType::Open => "open",
            ActionType::ExecuteSkill => "execute_skill",
            ActionType::Compose => "compose",
            ActionType::Answer => "answer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentOrigin {
    RuleStub,
    RemoteModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredIntent {
    pub expanded_query: String,
    pub target_app: String,
    pub action_type: ActionType,
    pub slots: BTreeMap<String, String>,
    pub origin: IntentOrigin,
}

impl StructuredIntent {
    pub fn answer(expanded_query: &str) -> Self {
        Self {
            expanded_query: expanded_query.into(),
            target_app: String::new(),
            action_type: ActionType::Answer,
            slots: BTreeMap::new(),
            origin: IntentOrigin::RuleStub,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppAlias {
    pub alias: String,
    pub app_id: String,
}

/// User-facing app names plus the default app per action category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRegistry {
    #[serde(default)]
    pub aliases: Vec<AppAlias>,
    #[serde(default)]
    pub defaults: BTreeMap<ActionType, String>,
}

impl AppRegistry {
    pub fn lookup(&self, name: &str) -> Option<&str> {
        let name = name.trim();
        self.aliases
            .iter()
            .find(|a| a.alias.eq_ignore_ascii_case(name) || a.app_id.eq_ignore_ascii_case(name))
            .map(|a| a.app_id.as_str())
    }

    /// First alias mentioned anywhere in the text, as a whole word.
    fn mentioned(&self, text: &str) -> Option<&str> {
        let toks = crate::text::tokens(text);
        self.aliases
            .iter()
            .find(|a| {
                let at = crate::text::tokens(&a.alias);
                !at.is_empty() && toks.windows(at.len()).any(|w| w == at.as_slice())
            })
            .map(|a| a.app_id.as_str())
    }
}

fn re(cell: &'static OnceLock<Regex>, pat: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pat).expect("static regex"))
}

macro_rules! static_re {
    ($name:ident, $pat:expr) => {
        fn $name() -> &'static Regex {
            static CELL: OnceLock<Regex> = OnceLock::new();
            re(&CELL, $pat)
        }
    };
}

static_re!(direct_re, r"(?i)^\s*what\s+(?:kind\s+of\s+)?(object|thing|scene|place|event)\b");
static_re!(what_is_re, r"(?i)^\s*what\s+is\s+(?:this|it)\s*[?.!]*\s*$");
static_re!(
    deixis_re,
    r"(?i)\b(?:this|these|it)\b(?:\s+(?:product|item|object|thing|one|problems|questions|photos|stuff))?"
);
static_re!(
    how_much_re,
    r"(?i)^\s*how\s+much\s+(?:does|do|is|are)\s+(.+?)(?:\s+cost)?(?:\s+on\s+(.+?))?\s*[?.!]*\s*$"
);
static_re!(
    check_price_re,
    r"(?i)^\s*(?:please\s+)?(?:check|find|get|tell\s+me)\s+(?:the\s+)?price\s+of\s+(.+?)(?:\s+on\s+(.+?))?\s*[?.!]*\s*$"
);
static_re!(price_re, r"(?i)\bprice\s+of\s+(.+?)(?:\s+on\s+(.+?))?\s*[?.!]*\s*$");
static_re!(
    search_re,
    r"(?i)^\s*(?:please\s+)?(?:search|look\s+up)\s+(?:for\s+)?(.+?)(?:\s+on\s+(.+?))?\s*[?.!]*\s*$"
);
static_re!(compose_re, r"(?i)\b(?:album|video|montage|slideshow)\b");
static_re!(theme_re, r"(?i)\b([\p{L}\d]+)-themed\b|\b(?:photos|pictures|images)\s+of\s+([\p{L}\d]+)");
static_re!(solve_re, r"(?i)\bsolve\s+(.+?)\s*[?.!]*\s*$");
static_re!(open_re, r"(?i)^\s*(?:please\s+)?open\s+(?:the\s+)?(.+?)\s*[?.!]*\s*$");

const DEICTIC: &[&str] = &["this", "these", "it"];

fn has_deixis(text: &str) -> bool {
    crate::text::tokens(text).iter().any(|t| DEICTIC.contains(&t.as_str()))
}

/// Scene-grounded understanding over an optional scene description.
pub fn understand_text(
    text: &str,
    scene: Option<&SceneDescriptor>,
) -> Result<Understanding, PerceptionError> {
    if let Some(scene) = scene {
        let attr = if what_is_re().is_match(text) {
            Some("object")
        } else {
            direct_re()
                .captures(text)
                .and_then(|c| c.get(1))
                .map(|m| m.as_str())
        };
        let answer = match attr.map(str::to_lowercase).as_deref() {
            Some("object" | "thing") => scene.salient().map(str::to_string),
            Some("scene" | "place") => Some(scene.scene.clone()).filter(|s| !s.is_empty()),
            Some("event") => Some(scene.event.clone()).filter(|s| !s.is_empty()),
            _ => None,
        };
        if let Some(a) = answer {
            return Ok(Understanding::DirectAnswer(a));
        }
    }

    let resolved = if has_deixis(text) {
        let label = scene
            .and_then(SceneDescriptor::salient)
            .ok_or(PerceptionError::UnresolvedDeixis)?;
        deixis_re().replace_all(text, label).into_owned()
    } else {
        text.to_string()
    };
    Ok(Understanding::Expanded(expand(&resolved)))
}

fn expand(text: &str) -> String {
    for rx in [how_much_re(), check_price_re()] {
        if let Some(c) = rx.captures(text) {
            let item = c[1].trim();
            return match c.get(2) {
                Some(app) => format!("the user wants to know the price of {item} on {}", app.as_str().trim()),
                None => format!("the user wants to know the price of {item}"),
            };
        }
    }
    text.trim().trim_end_matches(['?', '.', '!']).trim().to_string()
}

/// Resolve the representative frame through `resolver`, then understand.
pub fn understand(
    aligned: &AlignedUtterance,
    resolver: &dyn SceneResolver,
) -> Result<Understanding, PerceptionError> {
    let scene = resolver
        .describe(&aligned.representative)
        .map_err(|e| PerceptionError::Resolver(e.to_string()))?;
    understand_text(&aligned.text, scene.as_ref())
}

/// Total rule-table decomposition into ⟨app, action, slots⟩.
pub fn decompose(expanded_query: &str, registry: &AppRegistry) -> StructuredIntent {
    let text = expanded_query;
    let make = |action: ActionType, app: Option<&str>, slots: Vec<(&str, String)>| {
        let target = app
            .map(str::to_string)
            .or_else(|| registry.defaults.get(&action).cloned())
            .filter(|t| !t.is_empty());
        match target {
            Some(target_app) => StructuredIntent {
                expanded_query: text.to_string(),
                target_app,
                action_type: action,
                slots: slots.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                origin: IntentOrigin::RuleStub,
            },
            None => StructuredIntent::answer(text),
        }
    };

    if compose_re().is_match(text) {
        if let Some(c) = theme_re().captures(text) {
            let theme = c.get(1).or_else(|| c.get(2)).expect("one branch matched");
            return make(
                ActionType::Compose,
                registry.mentioned(text),
                vec![("theme", theme.as_str().to_lowercase())],
            );
        }
    }
    for rx in [price_re(), search_re()] {
        if let Some(c) = rx.captures(text) {
            let app = c.get(2).and_then(|a| registry.lookup(a.as_str()));
            return make(ActionType::Search, app, vec![("q", c[1].trim().to_string())]);
        }
    }
    if let Some(c) = solve_re().captures(text) {
        return make(
            ActionType::ExecuteSkill,
            registry.mentioned(text),
            vec![("task", c[1].trim().to_string())],
        );
    }
    if let Some(c) = open_re().captures(text) {
        if let Some(app) = registry.lookup(&c[1]) {
            return make(ActionType::Open, Some(app), vec![]);
        }
    }
    StructuredIntent::answer(text)
}
