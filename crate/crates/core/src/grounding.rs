//! Hybrid target grounding: structural tree, then rendered text, then the
//! visual model.
//!
//! A candidate must contain every query token. Its score is the fraction of
//! its own tokens the query covers (best field for tree nodes), so an exact
//! label scores 1 and a long paragraph that merely mentions the query scores
//! low. The first stage with a candidate at or above τ wins; if no stage
//! reaches τ the best sub-threshold candidate of the earliest non-empty
//! stage is used.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Observation, Role};
use crate::geometry::{Point, Rect, SCREEN};
use crate::models::VisualGrounder;
use crate::text::token_set;

pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub query: String,
    #[serde(default)]
    pub role_hint: Option<Role>,
}

impl TargetSpec {
    pub fn text(query: &str) -> Self {
        Self {
            query: query.into(),
            role_hint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingSource {
    Xml,
    Ocr,
    Visual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub point: Point,
    pub bbox: Rect,
    pub source: GroundingSource,
    pub matched_node: Option<String>,
    pub score: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundingError {
    #[error("target query is empty")]
    EmptyQuery,
    #[error("no candidate for {0:?}")]
    NoTarget(String),
}

/// Covered fraction of `field`, or `None` unless all of `query` is in it.
fn coverage(query: &BTreeSet<String>, field: &BTreeSet<String>) -> Option<f64> {
    if field.is_empty() || !query.is_subset(field) {
        return None;
    }
    Some(query.len() as f64 / field.len() as f64)
}

#[derive(Debug, Clone)]
struct Candidate {
    bbox: Rect,
    node: Option<String>,
    score: f64,
}

/// score desc, area asc, y asc, x asc
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.bbox.area().cmp(&b.bbox.area()))
        .then(a.bbox.y.cmp(&b.bbox.y))
        .then(a.bbox.x.cmp(&b.bbox.x))
}

fn xml_candidates(obs: &Observation, q: &BTreeSet<String>, role: Option<Role>) -> Vec<Candidate> {
    obs.ui_root
        .walk_with_clickable()
        .into_iter()
        .filter(|(n, clickable)| *clickable && !n.bounds.is_degenerate() && role.is_none_or(|r| r == n.role))
        .filter_map(|(n, _)| {
            let fields = [token_set(&n.text), token_set(&n.content_desc), token_set(&n.resource_id)];
            let union: BTreeSet<String> = fields.iter().flatten().cloned().collect();
            if !q.is_subset(&union) {
                return None;
            }
            // all tokens present somewhere; score by the best single field,
            // falling back to the union when the tokens are spread out
            let score = fields
                .iter()
                .filter_map(|f| coverage(q, f))
                .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
                .or_else(|| coverage(q, &union))?;
            Some(Candidate {
                bbox: n.bounds.intersect(&SCREEN),
                node: Some(n.node_id.clone()),
                score,
            })
        })
        .filter(|c| !c.bbox.is_degenerate())
        .collect()
}

fn ocr_candidates(obs: &Observation, q: &BTreeSet<String>) -> Vec<Candidate> {
    obs.render_layer
        .iter()
        .filter(|r| !r.bbox.is_degenerate())
        .filter_map(|r| {
            let score = coverage(q, &token_set(&r.text))?;
            Some(Candidate {
                bbox: r.bbox.intersect(&SCREEN),
                node: r.backing_node.clone(),
                score,
            })
        })
        .filter(|c| !c.bbox.is_degenerate())
        .collect()
}

fn finish(c: Candidate, source: GroundingSource) -> GroundingResult {
    GroundingResult {
        point: c.bbox.center(),
        bbox: c.bbox,
        source,
        matched_node: c.node,
        score: c.score,
    }
}

pub fn hybrid_ground(
    obs: &Observation,
    target: &TargetSpec,
    model: &dyn VisualGrounder,
    tau: f64,
) -> Result<GroundingResult, GroundingError> {
    let q = token_set(&target.query);
    if q.is_empty() {
        return Err(GroundingError::EmptyQuery);
    }
    let mut fallback: Option<(Candidate, GroundingSource)> = None;
    let mut consider = |mut cands: Vec<Candidate>, source| {
        cands.sort_by(rank);
        let best = cands.into_iter().next()?;
        if best.score >= tau {
            return Some(finish(best, source));
        }
        if fallback.is_none() {
            fallback = Some((best, source));
        }
        None
    };

    if let Some(r) = consider(xml_candidates(obs, &q, target.role_hint), GroundingSource::Xml) {
        return Ok(r);
    }
    if let Some(r) = consider(ocr_candidates(obs, &q), GroundingSource::Ocr) {
        return Ok(r);
    }
    // a model failure is treated like an empty stage
    let visual = model
        .locate(&obs.screenshot_id, &target.query)
        .ok()
        .flatten()
        .map(|b| b.intersect(&SCREEN))
        .filter(|b| !b.is_degenerate())
        .map(|bbox| Candidate {
            bbox,
            node: None,
            score: 1.0,
        });
    if let Some(r) = consider(visual.into_iter().collect(), GroundingSource::Visual) {
        return Ok(r);
    }
    fallback
        .map(|(c, s)| finish(c, s))
        .ok_or_else(|| GroundingError::NoTarget(target.query.clone()))
}
