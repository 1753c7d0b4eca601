//! Markdown gallery memory file.
//!
//! ```text
//! # gallery-memory v1
//! cursor: <id>
//!
//! ## <filename>
//! - captured_at: <ms>
//! - kind: model|metadata_fallback
//! - objects: a, b
//! - scene: s
//! - event: e
//! - text: <free text>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MemoryError;

pub const HEADER: &str = "# gallery-memory v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryKind {
    Model,
    MetadataFallback,
}

impl SummaryKind {
    fn as_str(&self) -> &'static str {
        match self {
            SummaryKind::Model => "model",
            SummaryKind::MetadataFallback => "metadata_fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub filename: String,
    pub captured_at: u64,
    pub summary_kind: SummaryKind,
    pub objects: Vec<String>,
    pub scene: String,
    pub event: String,
    pub free_text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryFile {
    pub entries: Vec<MemoryEntry>,
    pub cursor: u64,
}

fn one_line(s: &str) -> String {
    s.split(['\r', '\n']).collect::<Vec<_>>().join(" ").trim().to_string()
}

/// Objects are comma-joined on disk, so commas inside a tag become spaces.
pub(crate) fn clean_tag(s: &str) -> String {
    one_line(&s.replace(',', " ")).split_whitespace().collect::<Vec<_>>().join(" ")
}

impl MemoryFile {
    pub fn contains(&self, filename: &str) -> bool {
        self.entries.iter().any(|e| e.filename == filename)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\ncursor: {}\n", self.cursor);
        for e in &self.entries {
            out.push_str(&format!(
                "\n## {}\n- captured_at: {}\n- kind: {}\n- objects: {}\n- scene: {}\n- event: {}\n- text: {}\n",
                one_line(&e.filename),
                e.captured_at,
                e.summary_kind.as_str(),
                e.objects.iter().map(|o| clean_tag(o)).collect::<Vec<_>>().join(", "),
                one_line(&e.scene),
                one_line(&e.event),
                one_line(&e.free_text),
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, MemoryError> {
        let corrupt = |line: usize, why: &str| MemoryError::Corrupt(format!("line {line}: {why}"));
        let mut lines = text.lines().enumerate().peekable();
        match lines.next() {
            Some((_, HEADER)) => {}
            _ => return Err(corrupt(1, "missing header")),
        }
        let cursor = match lines.next() {
            Some((_, l)) => l
                .strip_prefix("cursor: ")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| corrupt(2, "bad cursor"))?,
            None => return Err(corrupt(2, "missing cursor")),
        };
        let mut entries = Vec::new();
        while let Some((n, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let filename = line
                .strip_prefix("## ")
                .ok_or_else(|| corrupt(n + 1, "expected entry heading"))?
                .to_string();
            let mut field = |key: &str| -> Result<String, MemoryError> {
                let (n, l) = lines.next().ok_or_else(|| corrupt(n + 1, "truncated entry"))?;
                l.strip_prefix("- ")
                    .and_then(|l| l.strip_prefix(key))
                    .and_then(|l| l.strip_prefix(':'))
                    .map(|v| v.strip_prefix(' ').unwrap_or(v).to_string())
                    .ok_or_else(|| corrupt(n + 1, &format!("expected {key}")))
            };
            let captured_at = field("captured_at")?
                .parse()
                .map_err(|_| corrupt(n + 2, "bad captured_at"))?;
            let summary_kind = match field("kind")?.as_str() {
                "model" => SummaryKind::Model,
                "metadata_fallback" => SummaryKind::MetadataFallback,
                _ => return Err(corrupt(n + 3, "bad kind")),
            };
            let objects = field("objects")?
                .split(", ")
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            entries.push(MemoryEntry {
                filename,
                captured_at,
                summary_kind,
                objects,
                scene: field("scene")?,
                event: field("event")?,
                free_text: field("text")?,
            });
        }
        Ok(Self { entries, cursor })
    }

    /// Load from disk; a missing file is an empty memory.
    pub fn load(path: &Path) -> Result<Self, MemoryError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(MemoryError::StorageRead(e.to_string())),
        }
    }

    /// Whole-file replace through a sibling temp file and rename.
    pub fn save(&self, path: &Path) -> Result<(), MemoryError> {
        let fail = |e: std::io::Error| MemoryError::StorageWriteFailure(e.to_string());
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let file_name = path
            .file_name()
            .ok_or_else(|| MemoryError::StorageWriteFailure("path has no file name".into()))?;
        let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.to_text().as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result.map_err(fail)
    }
}
