use regex::Regex;
use thiserror::Error;

pub const REDACTED: &str = "[REDACTED]";

/// Default deny-list: 11-digit phone numbers, 18-char national-ID shapes,
/// and `addr:`-prefixed strings.
pub const DEFAULT_PATTERNS: &[&str] = &[r"\b\d{17}[\dXx]\b", r"\b\d{11}\b", r"(?i)\baddr:\s*\S+"];

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("pattern {0:?} does not compile: {1}")]
    BadPattern(String, regex::Error),
    #[error("replacement must be non-empty")]
    EmptyReplacement,
}

#[derive(Debug, Clone)]
pub struct RedactionPolicy {
    patterns: Vec<Regex>,
    replacement: String,
}

impl Default for RedactionPolicy {
    fn default() -> Self {
        Self::new(DEFAULT_PATTERNS.iter().copied(), REDACTED).expect("default patterns compile")
    }
}

impl RedactionPolicy {
    pub fn new<'a>(
        patterns: impl IntoIterator<Item = &'a str>,
        replacement: &str,
    ) -> Result<Self, PolicyError> {
        if replacement.is_empty() {
            return Err(PolicyError::EmptyReplacement);
        }
        let patterns = patterns
            .into_iter()
            .map(|p| Regex::new(p).map_err(|e| PolicyError::BadPattern(p.to_string(), e)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            patterns,
            replacement: replacement.to_string(),
        })
    }

    pub fn patterns(&self) -> &[Regex] {
        &self.patterns
    }

    pub fn count_matches(&self, text: &str) -> usize {
        self.patterns.iter().map(|p| p.find_iter(text).count()).sum()
    }
}

/// Replace every policy match in `text`.
pub fn redact(text: &str, policy: &RedactionPolicy) -> String {
    let mut out = text.to_string();
    // Replacing can expose a new match across the seam; iterate to a fixpoint.
    loop {
        let mut next = out.clone();
        for p in &policy.patterns {
            next = p.replace_all(&next, policy.replacement.as_str()).into_owned();
        }
        if next == out {
            return out;
        }
        out = next;
    }
}
