use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{MemoryEntry, MemoryError, MemoryFile};
use crate::device::page::staging_folder;
use crate::device::Device;
use crate::text::{token_set, tokens};

fn entry_tokens(e: &MemoryEntry) -> BTreeSet<String> {
    let mut set: BTreeSet<String> = e.objects.iter().flat_map(|o| tokens(o)).collect();
    set.extend(tokens(&e.scene));
    set.extend(tokens(&e.event));
    set.extend(tokens(&e.free_text));
    set
}

/// Token-overlap retrieval. Score is the number of distinct query tokens
/// present in the entry; results with score ≥ 1 ordered by score, then
/// newest capture, then filename.
pub fn memory_query(query: &str, file: &MemoryFile) -> Vec<(String, usize)> {
    let q = token_set(query);
    let mut hits: Vec<(&MemoryEntry, usize)> = file
        .entries
        .iter()
        .map(|e| {
            let et = entry_tokens(e);
            (e, q.iter().filter(|t| et.contains(*t)).count())
        })
        .filter(|(_, s)| *s >= 1)
        .collect();
    hits.sort_by(|(a, sa), (b, sb)| {
        sb.cmp(sa)
            .then(b.captured_at.cmp(&a.captured_at))
            .then(a.filename.cmp(&b.filename))
    });
    hits.into_iter().map(|(e, s)| (e.filename.clone(), s)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagingResult {
    pub path: String,
    pub staged: Vec<String>,
}

/// Reconcile filenames with the media store and place the survivors in a
/// task-isolated staging folder, replacing whatever it held.
pub fn stage(filenames: &[String], device: &mut Device, task_id: &str) -> Result<StagingResult, MemoryError> {
    if task_id.is_empty() {
        return Err(MemoryError::EmptyTaskId);
    }
    let mut seen = BTreeSet::new();
    let survivors: Vec<_> = filenames
        .iter()
        .filter(|f| seen.insert(f.as_str()))
        .filter_map(|f| device.media_by_name(f).cloned())
        .collect();
    if survivors.is_empty() {
        return Err(MemoryError::EmptyAfterReconcile);
    }
    let path = staging_folder(task_id);
    let staged = survivors.iter().map(|a| a.filename.clone()).collect();
    device.stage_media(&path, survivors);
    Ok(StagingResult { path, staged })
}
