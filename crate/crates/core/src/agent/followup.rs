//! Ordinal follow-ups over a session artifact ("open the second item").

use std::sync::OnceLock;

use regex::Regex;

use super::{Action, AgentError, Decision, SessionArtifact};
use crate::grounding::TargetSpec;

const ORDINALS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth", "seventeenth",
    "eighteenth", "nineteenth", "twentieth",
];

fn numeric_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(\d+)(?:st|nd|rd|th)\b|(?:\b(?:item|result|number|no\.?)\s*|#)(\d+)\b")
            .expect("static regex")
    })
}

/// Rank mentioned in the utterance, 1-based. `last` maps to `len`.
pub fn ordinal(utterance: &str, len: usize) -> Option<usize> {
    if let Some(c) = numeric_re().captures(utterance) {
        return c.get(1).or_else(|| c.get(2)).and_then(|m| m.as_str().parse().ok());
    }
    for tok in crate::text::tokens(utterance) {
        if let Some(i) = ORDINALS.iter().position(|o| *o == tok) {
            return Some(i + 1);
        }
        if tok == "last" {
            return Some(len);
        }
    }
    None
}

pub fn resolve_followup(utterance: &str, artifact: Option<&SessionArtifact>) -> Result<Decision, AgentError> {
    let art = artifact.ok_or(AgentError::NoArtifact)?;
    let n = art.records.len();
    let rank = ordinal(utterance, n).ok_or_else(|| AgentError::NoOrdinal(utterance.into()))?;
    if rank == 0 || rank > n {
        return Err(AgentError::OrdinalOutOfRange { rank, len: n });
    }
    let title = art.records[rank - 1][art.schema.key()].clone();
    Ok(Decision::Act {
        action: Action::TapTarget {
            target: TargetSpec::text(&title),
        },
        rationale: format!("follow-up selects record {rank} of {n}"),
    })
}
