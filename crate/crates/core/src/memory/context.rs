use serde::{Deserialize, Serialize};

use super::{memory_query, MemoryFile, UserProfile, WorkingMemory};

pub const DEFAULT_CONTEXT_K: usize = 5;
const PROFILE_TAGS: usize = 5;
const MEMORY_HITS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Goal,
    Observations,
    Profile,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSection {
    pub kind: SectionKind,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub sections: Vec<ContextSection>,
}

impl ContextBlock {
    pub fn section(&self, kind: SectionKind) -> Option<&ContextSection> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            let title = match s.kind {
                SectionKind::Goal => "goal",
                SectionKind::Observations => "recent observations",
                SectionKind::Profile => "user profile",
                SectionKind::Memory => "related memories",
            };
            out.push_str(&format!("[{title}]\n"));
            for l in &s.lines {
                out.push_str(l);
                out.push('\n');
            }
        }
        out
    }
}

/// Assemble downstream context: goal, the last `k` observations, profile
/// tags (only when injection is on), and memory entries matching the goal.
pub fn inject_context(wm: &WorkingMemory, profile: &UserProfile, file: &MemoryFile, k: usize) -> ContextBlock {
    let mut sections = vec![ContextSection {
        kind: SectionKind::Goal,
        lines: vec![wm.goal.clone()],
    }];
    let obs = &wm.compressed_observations;
    if k > 0 && !obs.is_empty() {
        sections.push(ContextSection {
            kind: SectionKind::Observations,
            lines: obs[obs.len().saturating_sub(k)..].to_vec(),
        });
    }
    if profile.enabled && profile.inject && !profile.tag_weights.is_empty() {
        sections.push(ContextSection {
            kind: SectionKind::Profile,
            lines: profile
                .top_tags(PROFILE_TAGS)
                .into_iter()
                .map(|(t, w)| format!("{t} ({w})"))
                .collect(),
        });
    }
    let hits = memory_query(&wm.goal, file);
    if !hits.is_empty() {
        sections.push(ContextSection {
            kind: SectionKind::Memory,
            lines: hits
                .into_iter()
                .take(MEMORY_HITS)
                .map(|(f, s)| format!("{f} (score {s})"))
                .collect(),
        });
    }
    ContextBlock { sections }
}
