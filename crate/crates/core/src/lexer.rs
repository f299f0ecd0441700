//! Literal- and comment-aware masking of Java source.
//!
//! Every pattern in the extractor runs over the masked text, so nothing inside
//! a string, char literal, text block, or ordinary comment can be mistaken for
//! code. Doc comments (`/** ... */`) are left in place. Masking works on bytes:
//! each masked byte becomes an ASCII space (line breaks survive), which keeps
//! byte offsets identical between the original and the masked text.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    String,
    Char,
    LineComment,
    BlockComment,
    TextBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpan {
    pub start: usize,
    pub end: usize,
    pub kind: MaskKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexWarning {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct MaskedText {
    pub original: String,
    pub masked: String,
    pub mask_spans: Vec<MaskSpan>,
    /// Byte ranges of doc comments, delimiters included.
    pub doc_spans: Vec<(usize, usize)>,
    pub warnings: Vec<LexWarning>,
}

impl MaskedText {
    /// Masked text with doc comments blanked as well. Declaration scanning
    /// uses this view so `{@link ...}` braces never count as structure.
    pub fn structural(&self) -> String {
        let mut bytes = self.masked.clone().into_bytes();
        for &(start, end) in &self.doc_spans {
            blank(&mut bytes[start..end]);
        }
        String::from_utf8(bytes).expect("blanking keeps UTF-8 valid")
    }

    pub fn is_masked(&self, offset: usize) -> bool {
        self.mask_spans
            .iter()
            .any(|s| s.start <= offset && offset < s.end)
    }
}

fn blank(bytes: &mut [u8]) {
    for b in bytes {
        if *b != b'\n' && *b != b'\r' {
            *b = b' ';
        }
    }
}

#[derive(Clone, Copy)]
enum State {
    Code,
    Doc(usize),
    Masked(usize, MaskKind),
}

/// Masks string/char literals, text blocks, line comments and non-doc block
/// comments. Unterminated constructs are masked to end of input with a warning.
pub fn strip_literals(content: &str) -> MaskedText {
    let src = content.as_bytes();
    let mut out = src.to_vec();
    let mut spans = Vec::new();
    let mut docs = Vec::new();
    let mut warnings = Vec::new();
    let mut state = State::Code;
    let mut i = 0;

    let starts_with = |i: usize, pat: &[u8]| src[i..].starts_with(pat);

    while i < src.len() {
        match state {
            State::Code => {
                if starts_with(i, b"/**/") {
                    spans.push(MaskSpan {
                        start: i,
                        end: i + 4,
                        kind: MaskKind::BlockComment,
                    });
                    i += 4;
                } else if starts_with(i, b"/**") {
                    state = State::Doc(i);
                    i += 3;
                } else if starts_with(i, b"/*") {
                    state = State::Masked(i, MaskKind::BlockComment);
                    i += 2;
                } else if starts_with(i, b"//") {
                    state = State::Masked(i, MaskKind::LineComment);
                    i += 2;
                } else if starts_with(i, b"\"\"\"") {
                    state = State::Masked(i, MaskKind::TextBlock);
                    i += 3;
                } else if src[i] == b'"' {
                    state = State::Masked(i, MaskKind::String);
                    i += 1;
                } else if src[i] == b'\'' {
                    state = State::Masked(i, MaskKind::Char);
                    i += 1;
                } else {
                    i += 1;
                }
            }
            State::Doc(start) => {
                if starts_with(i, b"*/") {
                    docs.push((start, i + 2));
                    state = State::Code;
                    i += 2;
                } else {
                    i += 1;
                }
            }
            State::Masked(start, kind) => {
                let close = match kind {
                    MaskKind::LineComment => {
                        if src[i] == b'\n' || src[i] == b'\r' {
                            Some(i)
                        } else {
                            None
                        }
                    }
                    MaskKind::BlockComment => starts_with(i, b"*/").then_some(i + 2),
                    MaskKind::TextBlock => {
                        if src[i] == b'\\' {
                            i += 2;
                            continue;
                        }
                        starts_with(i, b"\"\"\"").then_some(i + 3)
                    }
                    MaskKind::String | MaskKind::Char => {
                        let quote = if kind == MaskKind::String {
                            b'"'
                        } else {
                            b'\''
                        };
                        if src[i] == b'\\' {
                            i += 2;
                            continue;
                        }
                        (src[i] == quote).then_some(i + 1)
                    }
                };
                match close {
                    Some(end) => {
                        spans.push(MaskSpan { start, end, kind });
                        state = State::Code;
                        i = end;
                    }
                    None => i += 1,
                }
            }
        }
    }

    let len = src.len();
    match state {
        State::Code => {}
        State::Masked(start, MaskKind::LineComment) => {
            spans.push(MaskSpan {
                start,
                end: len,
                kind: MaskKind::LineComment,
            });
        }
        State::Masked(start, kind) => {
            warnings.push(LexWarning {
                offset: start,
                message: format!("unterminated {kind:?} masked to end of file"),
            });
            spans.push(MaskSpan {
                start,
                end: len,
                kind,
            });
        }
        State::Doc(start) => {
            warnings.push(LexWarning {
                offset: start,
                message: "unterminated doc comment masked to end of file".into(),
            });
            spans.push(MaskSpan {
                start,
                end: len,
                kind: MaskKind::BlockComment,
            });
        }
    }

    for span in &spans {
        blank(&mut out[span.start..span.end.min(len)]);
    }

    MaskedText {
        original: content.to_string(),
        masked: String::from_utf8(out).expect("masking keeps UTF-8 valid"),
        mask_spans: spans,
        doc_spans: docs,
        warnings,
    }
}
