//! Scroll–screenshot–extract over result lists, and numeric summaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::device::{Device, Direction, Gesture, Observation};
use crate::models::Extractor;
use crate::text::count_words;

/// Marker for a schema field the extractor could not read.
pub const EMPTY_FIELD: &str = "-";

pub type Record = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionSchema {
    Ecommerce,
    LocalService,
}

impl ExtractionSchema {
    pub fn fields(&self) -> &'static [&'static str] {
        match self {
            ExtractionSchema::Ecommerce => &["title", "price", "sales"],
            ExtractionSchema::LocalService => &["name", "rating", "distance"],
        }
    }

    /// Dedup key: title or name.
    pub fn key(&self) -> &'static str {
        self.fields()[0]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ExtractionSchema::Ecommerce => "ecommerce",
            ExtractionSchema::LocalService => "local_service",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionArtifact {
    pub artifact_id: String,
    pub schema: ExtractionSchema,
    pub records: Vec<Record>,
    pub source_screenshots: Vec<String>,
    pub created_at: u64,
}

impl SessionArtifact {
    /// Structured text: a header then one `[record N]` section per record.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "artifact_id: {}\nschema: {}\ncreated_at: {}\nsource_screenshots: {}\n",
            self.artifact_id,
            self.schema.as_str(),
            self.created_at,
            self.source_screenshots.join(",")
        );
        for (i, r) in self.records.iter().enumerate() {
            out.push_str(&format!("\n[record {}]\n", i + 1));
            for f in self.schema.fields() {
                out.push_str(&format!("{f}: {}\n", r.get(*f).map_or(EMPTY_FIELD, String::as_str)));
            }
        }
        out
    }
}

fn visible_rows(obs: &Observation) -> Option<usize> {
    obs.scrollable_node().map(|n| n.children.len())
}

/// Extract the current viewport, then `passes` times scroll one screen
/// (keeping one row of overlap) and extract again. Records are normalised
/// to the schema and deduplicated by key, first occurrence kept.
pub fn scroll_extract(
    device: &mut Device,
    schema: ExtractionSchema,
    passes: usize,
    extractor: &dyn Extractor,
    artifact_id: &str,
) -> Result<SessionArtifact, AgentError> {
    let mut obs = device.snapshot()?;
    let rows = visible_rows(&obs).ok_or(AgentError::NotScrollable)?;
    let step = rows.saturating_sub(1).max(1);
    let mut records: Vec<Record> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut shots = Vec::new();
    for pass in 0..=passes {
        if pass > 0 {
            device.apply_gesture(&Gesture::Scroll {
                direction: Direction::Down,
                rows: step,
            })?;
            obs = device.snapshot()?;
        }
        shots.push(obs.screenshot_id.clone());
        for raw in extractor.extract(&obs, schema).map_err(|e| AgentError::Model(e.to_string()))? {
            let rec: Record = schema
                .fields()
                .iter()
                .map(|f| {
                    let v = raw.get(*f).filter(|v| !v.trim().is_empty());
                    (f.to_string(), v.cloned().unwrap_or_else(|| EMPTY_FIELD.into()))
                })
                .collect();
            if seen.insert(rec[schema.key()].clone()) {
                records.push(rec);
            }
        }
    }
    Ok(SessionArtifact {
        artifact_id: artifact_id.into(),
        schema,
        records,
        source_screenshots: shots,
        created_at: device.clock(),
    })
}

/// Numeric value of a price or rating string such as `¥12.9` or `4.8`.
pub fn parse_number(raw: &str) -> Option<f64> {
    let t = raw.trim().trim_start_matches(|c: char| !c.is_ascii_digit() && c != '-' && c != '.');
    let t = t.trim_end_matches(|c: char| !c.is_ascii_digit());
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Extremes of one field as `(min record, max record)`, first wins on ties.
fn extremes<'a>(records: &'a [Record], field: &str) -> Option<(&'a Record, &'a Record)> {
    let mut parsed = records.iter().filter_map(|r| Some((r, parse_number(r.get(field)?)?)));
    let first = parsed.next()?;
    let (mut lo, mut hi) = (first, first);
    for p in parsed {
        if p.1 < lo.1 {
            lo = p;
        }
        if p.1 > hi.1 {
            hi = p;
        }
    }
    Some((lo.0, hi.0))
}

/// Short summary. The count is spelled out; every figure quoted is copied
/// verbatim from a record.
pub fn summarize(artifact: &SessionArtifact) -> Result<String, AgentError> {
    let recs = &artifact.records;
    if recs.is_empty() {
        return Err(AgentError::EmptyArtifact);
    }
    let n = recs.len();
    let noun = if n == 1 { "result" } else { "results" };
    let mut out = format!("Found {} {noun}.", count_words(n));
    let key = artifact.schema.key();
    match artifact.schema {
        ExtractionSchema::Ecommerce => {
            if let Some((lo, hi)) = extremes(recs, "price") {
                if n == 1 || lo["price"] == hi["price"] {
                    out.push_str(&format!(" {} costs {}.", lo[key], lo["price"]));
                } else {
                    out.push_str(&format!(
                        " Prices range from {} ({}) to {} ({}).",
                        lo["price"], lo[key], hi["price"], hi[key]
                    ));
                }
            }
        }
        ExtractionSchema::LocalService => {
            if let Some((_, best)) = extremes(recs, "rating") {
                out.push_str(&format!(" Highest rated is {} at {}.", best[key], best["rating"]));
            }
            if let Some((near, _)) = extremes(recs, "distance") {
                out.push_str(&format!(" Nearest is {} at {}.", near[key], near["distance"]));
            }
        }
    }
    Ok(out)
}
