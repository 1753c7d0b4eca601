//! Deeplink templates: `scheme://host/seg/{slot}/...`, one segment per slot.

use std::collections::BTreeMap;

use crate::text::unescape;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Parts<'a> {
    scheme: &'a str,
    host: &'a str,
    path: Vec<&'a str>,
    query: Option<&'a str>,
}

fn split(uri: &str) -> Option<Parts<'_>> {
    let (scheme, rest) = uri.split_once("://")?;
    if scheme.is_empty() || !scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c)) {
        return None;
    }
    let (rest, query) = match rest.split_once('?') {
        Some((r, q)) => (r, Some(q)),
        None => (rest, None),
    };
    let (host, path) = match rest.split_once('/') {
        Some((h, p)) => (h, p),
        None => (rest, ""),
    };
    if host.is_empty() {
        return None;
    }
    let path = path.split('/').filter(|s| !s.is_empty()).collect();
    Some(Parts {
        scheme,
        host,
        path,
        query,
    })
}

/// A pattern is well formed when it parses as a URI, has no query, and every
/// `{slot}` occupies a whole path segment with a non-empty unique name.
pub fn is_well_formed(pattern: &str) -> bool {
    let Some(parts) = split(pattern) else {
        return false;
    };
    if parts.query.is_some() || parts.host.contains('{') {
        return false;
    }
    let mut names = Vec::new();
    for seg in &parts.path {
        match slot_name(seg) {
            Some(name) if valid_name(name) && !names.contains(&name) => names.push(name),
            Some(_) => return false,
            None if seg.contains('{') || seg.contains('}') => return false,
            None => {}
        }
    }
    true
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn slot_name(seg: &str) -> Option<&str> {
    seg.strip_prefix('{')?.strip_suffix('}')
}

/// Match a concrete URI against a template, returning bound slots plus any
/// `key=value` query parameters.
pub fn match_pattern(pattern: &str, uri: &str) -> Option<BTreeMap<String, String>> {
    let p = split(pattern)?;
    let u = split(uri)?;
    if !p.scheme.eq_ignore_ascii_case(u.scheme) || p.host != u.host || p.path.len() != u.path.len() {
        return None;
    }
    let mut bound = BTreeMap::new();
    for (ps, us) in p.path.iter().zip(&u.path) {
        match slot_name(ps) {
            Some(name) => {
                bound.insert(name.to_string(), unescape(us));
            }
            None if ps == us => {}
            None => return None,
        }
    }
    if let Some(q) = u.query {
        for pair in q.split('&').filter(|s| !s.is_empty()) {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            bound.entry(unescape(k)).or_insert_with(|| unescape(v));
        }
    }
    Some(bound)
}

/// Fill a template's slots; `None` when a slot has no value.
pub fn instantiate(pattern: &str, values: &BTreeMap<String, String>) -> Option<String> {
    let p = split(pattern)?;
    let mut out = format!("{}://{}", p.scheme, p.host);
    for seg in &p.path {
        out.push('/');
        match slot_name(seg) {
            Some(name) => out.push_str(&crate::text::escape(values.get(name)?, &[' ', '/', '?', '#', '&'])),
            None => out.push_str(seg),
        }
    }
    Some(out)
}
