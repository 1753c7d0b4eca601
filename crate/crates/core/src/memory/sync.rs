use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::file::clean_tag;
use super::{redact, MemoryEntry, MemoryError, MemoryFile, RedactionPolicy, SummaryKind};
use crate::device::{Device, MediaAsset};
use crate::models::GallerySummarizer;

/// User-facing switches for gallery memory and profile injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryControls {
    pub gallery_enabled: bool,
    pub profile_enabled: bool,
    pub inject_profile: bool,
}

impl Default for MemoryControls {
    fn default() -> Self {
        Self {
            gallery_enabled: true,
            profile_enabled: true,
            inject_profile: true,
        }
    }
}

/// Tag counts aggregated over memory entries. Tags are lowercase and every
/// stored weight is at least one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub tag_weights: BTreeMap<String, u32>,
    pub enabled: bool,
    pub inject: bool,
}

impl UserProfile {
    pub fn from_entries(entries: &[MemoryEntry], controls: &MemoryControls) -> Self {
        let mut profile = UserProfile {
            tag_weights: BTreeMap::new(),
            enabled: controls.profile_enabled,
            inject: controls.inject_profile,
        };
        if controls.profile_enabled {
            for e in entries {
                profile.absorb(e);
            }
        }
        profile
    }

    fn absorb(&mut self, e: &MemoryEntry) {
        let tags: BTreeSet<String> = e
            .objects
            .iter()
            .chain([&e.scene, &e.event])
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        for t in tags {
            *self.tag_weights.entry(t).or_insert(0) += 1;
        }
    }

    /// Tags by weight descending, then name.
    pub fn top_tags(&self, n: usize) -> Vec<(&str, u32)> {
        let mut tags: Vec<(&str, u32)> = self.tag_weights.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        tags.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        tags.truncate(n);
        tags
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncOutcome {
    pub appended: Vec<MemoryEntry>,
    pub profile: UserProfile,
}

fn fallback_text(asset: &MediaAsset) -> String {
    let date = chrono::DateTime::from_timestamp_millis(asset.captured_at as i64)
        .map(|d| d.format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| "unknown date".into());
    format!(
        "{} in {}, captured {}, {}x{}",
        asset.filename, asset.folder, date, asset.width, asset.height
    )
}

fn summarize(asset: &MediaAsset, summarizer: &dyn GallerySummarizer, policy: &RedactionPolicy) -> MemoryEntry {
    let r = |s: &str| redact(s, policy);
    match summarizer.summarize(asset) {
        Ok(s) => MemoryEntry {
            filename: r(&asset.filename),
            captured_at: asset.captured_at,
            summary_kind: SummaryKind::Model,
            objects: s
                .objects
                .iter()
                .map(|o| r(&clean_tag(o)))
                .filter(|o| !o.is_empty())
                .collect(),
            scene: r(&s.scene),
            event: r(&s.event),
            free_text: r(&s.caption),
        },
        Err(_) => MemoryEntry {
            filename: r(&asset.filename),
            captured_at: asset.captured_at,
            summary_kind: SummaryKind::MetadataFallback,
            objects: Vec::new(),
            scene: String::new(),
            event: String::new(),
            free_text: r(&fallback_text(asset)),
        },
    }
}

/// Incrementally summarize media newer than the file's cursor and append
/// the entries. Everything is redacted before it reaches the file, and a
/// failing summarizer degrades to a metadata-only entry.
pub fn memory_sync(
    device: &Device,
    summarizer: &dyn GallerySummarizer,
    policy: &RedactionPolicy,
    path: &Path,
    controls: &MemoryControls,
) -> Result<SyncOutcome, MemoryError> {
    let existed = path.exists();
    let mut file = MemoryFile::load(path)?;
    if !controls.gallery_enabled {
        return Ok(SyncOutcome {
            appended: Vec::new(),
            profile: UserProfile::from_entries(&file.entries, controls),
        });
    }
    let start_cursor = file.cursor;
    let mut appended = Vec::new();
    for asset in device.media_list(file.cursor) {
        file.cursor = file.cursor.max(asset.asset_id);
        let entry = summarize(&asset, summarizer, policy);
        if file.contains(&entry.filename) {
            continue;
        }
        file.entries.push(entry.clone());
        appended.push(entry);
    }
    if !existed || file.cursor != start_cursor {
        file.save(path)?;
    }
    Ok(SyncOutcome {
        appended,
        profile: UserProfile::from_entries(&file.entries, controls),
    })
}
