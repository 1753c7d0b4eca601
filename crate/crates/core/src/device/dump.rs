//! `dumpsys activity`-style text emission.
//!
//! ```text
//! TASK <app_id> id=<n>
//!   ACTIVITY <app_id>/<activity>
//!     intent={act=<action> dat=<uri|-> cmp=<app_id>/<activity|-> extras={<k>=<v>,...}}
//! ```
//!
//! `act`, `dat` and `cmp` parts are percent-escaped for `% {},=` and
//! whitespace; extras keys and values for `%{},=` and control chars.

use super::intent::IntentMsg;
use crate::text::escape;

pub const HEAD_RESERVED: &[char] = &[' ', '\t', '{', '}', ',', '=', '/'];
pub const EXTRA_RESERVED: &[char] = &['{', '}', ',', '='];

pub(crate) fn task_line(app_id: &str, task_id: u64) -> String {
    format!("TASK {} id={}", escape(app_id, HEAD_RESERVED), task_id)
}

pub(crate) fn activity_line(app_id: &str, activity: &str) -> String {
    format!(
        "  ACTIVITY {}/{}",
        escape(app_id, HEAD_RESERVED),
        escape(activity, HEAD_RESERVED)
    )
}

pub(crate) fn intent_line(intent: &IntentMsg) -> String {
    let dat = intent
        .data_uri
        .as_deref()
        .map_or_else(|| "-".to_string(), |u| escape_dash(u, &[' ', '\t', '{', '}', ',', '=']));
    let cmp = match &intent.component {
        Some(c) => format!(
            "{}/{}",
            escape(&c.app_id, HEAD_RESERVED),
            escape(&c.activity, HEAD_RESERVED)
        ),
        None => "-".into(),
    };
    let extras = intent
        .extras
        .iter()
        .map(|(k, v)| format!("{}={}", escape(k, EXTRA_RESERVED), escape(v, EXTRA_RESERVED)))
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "    intent={{act={} dat={} cmp={} extras={{{}}}}}",
        escape_dash(&intent.action, HEAD_RESERVED),
        dat,
        cmp,
        extras
    )
}

/// Escape, and also escape a lone `-` so it cannot be read as "absent".
pub(crate) fn escape_dash(text: &str, reserved: &[char]) -> String {
    if text == "-" {
        "%2D".into()
    } else {
        escape(text, reserved)
    }
}
