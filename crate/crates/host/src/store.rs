//! On-disk layout under one root:
//!
//! ```text
//! skills/<name>.txt
//! bookmarks/<name>.txt
//! memory/gallery.md
//! sessions/<id>/artifacts/<artifact_id>.json
//! traces/<trace_id>.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use pocket_core::agent::SessionArtifact;
use pocket_core::replay::{Bookmark, BookmarkStore, SkillCard, SkillRegistry, Trajectory};
use pocket_core::text::escape;

use crate::HostError;

/// Characters that may not appear in a file name component.
const NAME_RESERVED: &[char] = &['/', '\\', ':', '*', '?', '"', '<', '>', '|', ' '];

fn file_name(name: &str) -> String {
    let n = escape(name, NAME_RESERVED);
    if n.is_empty() || n.starts_with('.') {
        format!("_{n}")
    } else {
        n
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn memory_path(&self) -> PathBuf {
        self.root.join("memory").join("gallery.md")
    }

    fn dir(&self, parts: &[&str]) -> Result<PathBuf, HostError> {
        let mut p = self.root.clone();
        for part in parts {
            p.push(part);
        }
        fs::create_dir_all(&p).map_err(|e| HostError::io(&p, e))?;
        Ok(p)
    }

    fn write(path: PathBuf, text: &str) -> Result<PathBuf, HostError> {
        fs::write(&path, text).map_err(|e| HostError::io(&path, e))?;
        Ok(path)
    }

    /// Ensure every directory of the layout exists.
    pub fn init(&self) -> Result<(), HostError> {
        for d in ["skills", "bookmarks", "memory", "sessions", "traces"] {
            self.dir(&[d])?;
        }
        Ok(())
    }

    pub fn save_skill(&self, card: &SkillCard) -> Result<PathBuf, HostError> {
        let dir = self.dir(&["skills"])?;
        Self::write(dir.join(format!("{}.txt", file_name(&card.name))), &card.to_text())
    }

    pub fn save_bookmark(&self, b: &Bookmark) -> Result<PathBuf, HostError> {
        let dir = self.dir(&["bookmarks"])?;
        Self::write(dir.join(format!("{}.txt", file_name(&b.name))), &b.to_text())
    }

    pub fn save_trace(&self, t: &Trajectory) -> Result<PathBuf, HostError> {
        let dir = self.dir(&["traces"])?;
        Self::write(dir.join(format!("{}.json", file_name(&t.trace_id))), &to_json(t)?)
    }

    pub fn save_artifact(&self, session: &str, a: &SessionArtifact) -> Result<PathBuf, HostError> {
        let dir = self.dir(&["sessions", &file_name(session), "artifacts"])?;
        Self::write(dir.join(format!("{}.json", file_name(&a.artifact_id))), &to_json(a)?)
    }

    fn texts(&self, sub: &str) -> Result<Vec<(PathBuf, String)>, HostError> {
        let dir = self.root.join(sub);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| HostError::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        paths
            .into_iter()
            .map(|p| fs::read_to_string(&p).map(|t| (p.clone(), t)).map_err(|e| HostError::io(&p, e)))
            .collect()
    }

    pub fn load_skills(&self) -> Result<SkillRegistry, HostError> {
        let mut reg = SkillRegistry::new();
        for (path, text) in self.texts("skills")? {
            reg.insert(SkillCard::parse(&text).map_err(|e| HostError::Load(path.display().to_string(), e.to_string()))?);
        }
        Ok(reg)
    }

    pub fn load_bookmarks(&self) -> Result<BookmarkStore, HostError> {
        let mut store = BookmarkStore::new();
        for (path, text) in self.texts("bookmarks")? {
            let b = Bookmark::parse(&text).map_err(|e| HostError::Load(path.display().to_string(), e.to_string()))?;
            store.insert(b).map_err(|e| HostError::Load(path.display().to_string(), e.to_string()))?;
        }
        Ok(store)
    }
}

/// Pretty JSON; struct fields keep declaration order and maps are sorted,
/// so output is stable across runs.
pub fn to_json<T: serde::Serialize>(v: &T) -> Result<String, HostError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| HostError::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
