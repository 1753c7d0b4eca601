use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const ACTION_VIEW: &str = "android.intent.action.VIEW";
pub const ACTION_MAIN: &str = "android.intent.action.MAIN";

/// Explicit `(app_id, activity)` target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Component {
    pub app_id: String,
    pub activity: String,
}

impl Component {
    pub fn new(app_id: impl Into<String>, activity: impl Into<String>) -> Self {
        Self {
            app_id: app_id.into(),
            activity: activity.into(),
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.app_id, self.activity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentMsg {
    pub action: String,
    #[serde(default)]
    pub data_uri: Option<String>,
    #[serde(default)]
    pub component: Option<Component>,
    #[serde(default)]
    pub extras: BTreeMap<String, String>,
}

impl IntentMsg {
    pub fn component(app_id: &str, activity: &str) -> Self {
        Self {
            action: ACTION_MAIN.into(),
            data_uri: None,
            component: Some(Component::new(app_id, activity)),
            extras: BTreeMap::new(),
        }
    }

    pub fn view(uri: &str) -> Self {
        Self {
            action: ACTION_VIEW.into(),
            data_uri: Some(uri.into()),
            component: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extra(mut self, k: &str, v: &str) -> Self {
        self.extras.insert(k.into(), v.into());
        self
    }
}
