//! Javadoc block parsing: description plus block tags.

use serde::{Deserialize, Serialize};

use crate::lexer::MaskedText;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    Param,
    Return,
    Throws,
    See,
    Deprecated,
    Since,
    Author,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JavadocTag {
    pub tag: TagKind,
    /// Tag name as written, without the `@`.
    pub name: String,
    pub arg: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JavadocBlock {
    pub raw: String,
    pub span: (usize, usize),
    pub description: String,
    pub tags: Vec<JavadocTag>,
}

impl JavadocBlock {
    pub fn is_closed(&self) -> bool {
        self.raw.len() >= 5 && self.raw.ends_with("*/")
    }
}

/// Removes `/**`, `*/` and the leading `*` gutter from each line.
pub fn content_lines(raw: &str) -> Vec<String> {
    let mut body = raw.trim();
    body = body.strip_prefix("/**").unwrap_or(body);
    body = body.strip_suffix("*/").unwrap_or(body);
    body.lines()
        .map(|line| {
            let line = line.trim_start();
            let line = line.trim_start_matches('*');
            line.strip_prefix(' ')
                .unwrap_or(line)
                .trim_end()
                .to_string()
        })
        .collect()
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_tag_line(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('@')
        && t[1..]
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic())
}

fn classify_tag(name: &str, rest: &str) -> (TagKind, Option<String>, String) {
    let rest = rest.trim();
    let split_arg = |rest: &str| -> Option<(String, String)> {
        let mut parts = rest.splitn(2, char::is_whitespace);
        let arg = parts.next().filter(|a| !a.is_empty())?;
        Some((arg.to_string(), collapse(parts.next().unwrap_or(""))))
    };
    let kind = match name {
        "param" => TagKind::Param,
        "return" => TagKind::Return,
        "throws" | "exception" => TagKind::Throws,
        "see" => TagKind::See,
        "deprecated" => TagKind::Deprecated,
        "since" => TagKind::Since,
        "author" => TagKind::Author,
        _ => TagKind::Other,
    };
    match kind {
        TagKind::Param | TagKind::Throws => match split_arg(rest) {
            Some((arg, text)) => (kind, Some(arg), text),
            // an argument-less @param is malformed; keep it as `other`
            None => (TagKind::Other, None, String::new()),
        },
        _ => (kind, None, collapse(rest)),
    }
}

pub fn parse_javadoc(raw: &str, span: (usize, usize)) -> JavadocBlock {
    let mut description = Vec::new();
    let mut tags: Vec<(String, String)> = Vec::new();
    for line in content_lines(raw) {
        if is_tag_line(&line) {
            let t = line.trim_start();
            let name_end = t[1..]
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'))
                .map_or(t.len(), |p| p + 1);
            tags.push((t[1..name_end].to_string(), t[name_end..].to_string()));
        } else if let Some((_, text)) = tags.last_mut() {
            text.push('\n');
            text.push_str(&line);
        } else {
            description.push(line);
        }
    }
    let tags = tags
        .into_iter()
        .map(|(name, rest)| {
            let (tag, arg, text) = classify_tag(&name, &rest);
            JavadocTag {
                tag,
                name,
                arg,
                text,
            }
        })
        .collect();
    JavadocBlock {
        raw: raw.to_string(),
        span,
        description: collapse(&description.join(" ")),
        tags,
    }
}

/// One block per doc comment, in source order.
pub fn extract_javadoc_blocks(mt: &MaskedText) -> Vec<JavadocBlock> {
    mt.doc_spans
        .iter()
        .map(|&(s, e)| parse_javadoc(&mt.original[s..e], (s, e)))
        .collect()
}
