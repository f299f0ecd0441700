//! Package, type, method, constructor, and field declarations recovered from
//! masked Java text by brace-balance tracking and header patterns.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lexer::MaskedText;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    Class,
    Interface,
    Enum,
    Record,
    Method,
    Constructor,
    Field,
}

impl DeclKind {
    pub fn is_type(self) -> bool {
        matches!(
            self,
            DeclKind::Class | DeclKind::Interface | DeclKind::Enum | DeclKind::Record
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeclKind::Class => "class",
            DeclKind::Interface => "interface",
            DeclKind::Enum => "enum",
            DeclKind::Record => "record",
            DeclKind::Method => "method",
            DeclKind::Constructor => "constructor",
            DeclKind::Field => "field",
        }
    }
}

impl std::str::FromStr for DeclKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "class" => DeclKind::Class,
            "interface" => DeclKind::Interface,
            "enum" => DeclKind::Enum,
            "record" => DeclKind::Record,
            "method" => DeclKind::Method,
            "constructor" => DeclKind::Constructor,
            "field" => DeclKind::Field,
            other => return Err(format!("unknown declaration kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub kind: DeclKind,
    pub name: String,
    /// Header text up to the body or terminating semicolon.
    pub signature: String,
    /// Byte range of the whole declaration, annotations before the first
    /// modifier excluded.
    pub span: (usize, usize),
    pub body_span: Option<(usize, usize)>,
    pub modifiers: Vec<String>,
    pub type_params: Option<String>,
    pub enclosing_chain: Vec<String>,
    pub uses_lambda: bool,
    pub package: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct DeclScan {
    pub decls: Vec<Declaration>,
    pub parse_degraded: bool,
}

static PACKAGE_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?:^|[^\w$.])package\s+([A-Za-z_$][\w$]*(?:\s*\.\s*[A-Za-z_$][\w$]*)*)\s*;")
        .unwrap()
});

/// The first `package` statement's dotted name.
pub fn extract_package(mt: &MaskedText) -> Option<String> {
    let text = mt.structural();
    let mut hits = PACKAGE_RE.captures_iter(&text);
    let first = hits.next()?;
    if hits.next().is_some() {
        tracing::warn!("multiple package statements; using the first");
    }
    Some(first[1].split_whitespace().collect::<String>())
}

const MODIFIERS: &[&str] = &[
    "public",
    "protected",
    "private",
    "static",
    "final",
    "abstract",
    "native",
    "synchronized",
    "transient",
    "volatile",
    "strictfp",
    "default",
    "sealed",
    "non-sealed",
];

const RESERVED: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "true",
    "false",
    "null",
];

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "short", "int", "long", "float", "double", "void",
];

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

fn is_name(s: &str) -> bool {
    is_identifier(s) && !RESERVED.contains(&s)
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    start: usize,
}

fn tokenize_header(h: &str) -> Vec<Tok<'_>> {
    let b = h.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_whitespace() {
            i += 1;
        } else if is_ident_byte(b[i]) {
            let start = i;
            while i < b.len() && is_ident_byte(b[i]) {
                i += 1;
            }
            // `non-sealed` is the one hyphenated keyword
            if &h[start..i] == "non" && h[i..].starts_with("-sealed") {
                i += "-sealed".len();
            }
            toks.push(Tok {
                text: &h[start..i],
                start,
            });
        } else {
            let len = if h[i..].starts_with("...") { 3 } else { 1 };
            toks.push(Tok {
                text: &h[i..i + len],
                start: i,
            });
            i += len;
        }
    }
    toks
}

/// Index just past a balanced `open`/`close` group starting at `at`.
fn skip_group(toks: &[Tok<'_>], at: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (k, t) in toks.iter().enumerate().skip(at) {
        if t.text == open {
            depth += 1;
        } else if t.text == close {
            depth = depth.checked_sub(1)?;
            if depth == 0 {
                return Some(k + 1);
            }
        }
    }
    None
}

/// Type expression check over a token slice: qualified names, generic
/// arguments, arrays, varargs, wildcards, and type annotations.
fn is_type_expr(toks: &[Tok<'_>]) -> bool {
    if toks.is_empty() {
        return false;
    }
    let mut angle = 0i32;
    let mut saw_name = false;
    let mut k = 0;
    while k < toks.len() {
        let t = toks[k].text;
        match t {
            "<" => angle += 1,
            ">" => {
                angle -= 1;
                if angle < 0 {
                    return false;
                }
            }
            "." | "," | "?" | "[" | "]" | "&" | "..." => {
                if t == "," && angle == 0 {
                    return false;
                }
            }
            "@" => {
                // type annotation such as `@Nullable`
                k += 1;
                if k >= toks.len() || !is_identifier(toks[k].text) {
                    return false;
                }
            }
            "extends" | "super" if angle > 0 => {}
            _ if PRIMITIVES.contains(&t) || is_name(t) => saw_name = true,
            _ => return false,
        }
        k += 1;
    }
    let starts_ok = toks[0].text == "@" || is_identifier(toks[0].text);
    angle == 0 && saw_name && starts_ok
}

#[derive(Debug)]
enum Header {
    Type { kind: DeclKind, name: String },
    Callable { name: String, constructor: bool },
    Field { name: String },
}

#[derive(Debug)]
struct ParsedHeader {
    header: Header,
    modifiers: Vec<String>,
    /// (modifier index, begin, end) of each annotation, relative to the header.
    annotations: Vec<(usize, usize, usize)>,
    type_params: Option<String>,
    /// Offset of the first non-annotation token, relative to the header.
    start: usize,
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

type Modifiers = (usize, Vec<String>, Vec<(usize, usize, usize)>, usize);

/// Consumes modifiers and annotations; returns (index after them, modifiers,
/// annotation positions, start offset of the first token that is not a
/// leading annotation).
fn take_modifiers(h: &str, toks: &[Tok<'_>]) -> Option<Modifiers> {
    let mut k = 0;
    let mut mods = Vec::new();
    let mut annotations = Vec::new();
    let mut first_real: Option<usize> = None;
    while k < toks.len() {
        let t = toks[k].text;
        if t == "@" && toks.get(k + 1).is_some_and(|n| n.text != "interface") {
            let begin = toks[k].start;
            k += 1;
            if !toks.get(k).is_some_and(|n| is_identifier(n.text)) {
                return None;
            }
            k += 1;
            while toks.get(k).is_some_and(|n| n.text == ".")
                && toks.get(k + 1).is_some_and(|n| is_identifier(n.text))
            {
                k += 2;
            }
            if toks.get(k).is_some_and(|n| n.text == "(") {
                k = skip_group(toks, k, "(", ")")?;
            }
            let end = toks.get(k).map_or(h.len(), |n| n.start);
            annotations.push((mods.len(), begin, end));
            mods.push(collapse(&h[begin..end]));
        } else if MODIFIERS.contains(&t) {
            first_real.get_or_insert(toks[k].start);
            mods.push(t.to_string());
            k += 1;
        } else {
            break;
        }
    }
    let start = first_real.or_else(|| toks.get(k).map(|t| t.start))?;
    Some((k, mods, annotations, start))
}

fn parse_header(h: &str, enclosing: Option<&str>, terminator: u8) -> Option<ParsedHeader> {
    let toks = tokenize_header(h);
    let (mut k, modifiers, annotations, start) = take_modifiers(h, &toks)?;
    let rest = &toks[k..];
    if rest.is_empty() {
        return None;
    }

    // type declarations
    let type_kind = match rest[0].text {
        "class" => Some((DeclKind::Class, 1)),
        "interface" => Some((DeclKind::Interface, 1)),
        "enum" => Some((DeclKind::Enum, 1)),
        "record" if rest.get(1).is_some_and(|t| is_name(t.text)) => Some((DeclKind::Record, 1)),
        "@" if rest.get(1).is_some_and(|t| t.text == "interface") => Some((DeclKind::Interface, 2)),
        _ => None,
    };
    if let Some((kind, skip)) = type_kind {
        if terminator != b'{' {
            return None;
        }
        let name_tok = rest.get(skip)?;
        if !is_name(name_tok.text) {
            return None;
        }
        let mut type_params = None;
        if rest.get(skip + 1).is_some_and(|t| t.text == "<") {
            let end = skip_group(rest, skip + 1, "<", ">")?;
            let tp_end = rest.get(end).map_or(h.len(), |t| t.start);
            type_params = Some(collapse(&h[rest[skip + 1].start..tp_end]));
        }
        return Some(ParsedHeader {
            header: Header::Type {
                kind,
                name: name_tok.text.to_string(),
            },
            modifiers,
            annotations,
            type_params,
            start,
        });
    }

    // optional generic method type parameters
    let mut type_params = None;
    if toks[k].text == "<" {
        let end = skip_group(&toks, k, "<", ">")?;
        let tp_end = toks.get(end).map_or(h.len(), |t| t.start);
        type_params = Some(collapse(&h[toks[k].start..tp_end]));
        k = end;
    }
    let rest = &toks[k..];

    // first `(` outside generic arguments
    let mut angle = 0i32;
    let mut paren_at = None;
    for (j, t) in rest.iter().enumerate() {
        match t.text {
            "<" => angle += 1,
            ">" => angle -= 1,
            "(" if angle == 0 => {
                paren_at = Some(j);
                break;
            }
            _ => {}
        }
    }

    if let Some(p) = paren_at {
        if p == 0 || !is_name(rest[p - 1].text) {
            return None;
        }
        let name = rest[p - 1].text;
        let ret = &rest[..p - 1];
        let close = skip_group(rest, p, "(", ")")?;
        if !callable_tail_ok(&rest[close..]) {
            return None;
        }
        let constructor = ret.is_empty();
        if constructor {
            if enclosing != Some(name) {
                return None;
            }
        } else if !is_type_expr(ret) {
            return None;
        }
        return Some(ParsedHeader {
            header: Header::Callable {
                name: name.to_string(),
                constructor,
            },
            modifiers,
            annotations,
            type_params,
            start,
        });
    }

    // compact canonical constructor of a record: `Name {`
    if terminator == b'{'
        && rest.len() == 1
        && enclosing == Some(rest[0].text)
        && type_params.is_none()
    {
        return Some(ParsedHeader {
            header: Header::Callable {
                name: rest[0].text.to_string(),
                constructor: true,
            },
            modifiers,
            annotations,
            type_params,
            start,
        });
    }

    if terminator == b'{' || type_params.is_some() {
        return None;
    }

    // field: `Type name[]...` optionally followed by `, more`
    let mut angle = 0i32;
    let mut decl_end = rest.len();
    for (j, t) in rest.iter().enumerate() {
        match t.text {
            "<" => angle += 1,
            ">" => angle -= 1,
            "," if angle == 0 => {
                decl_end = j;
                break;
            }
            _ => {}
        }
    }
    let mut first = &rest[..decl_end];
    while first.len() >= 2
        && first[first.len() - 1].text == "]"
        && first[first.len() - 2].text == "["
    {
        first = &first[..first.len() - 2];
    }
    let (name_tok, ty) = first.split_last()?;
    if !is_name(name_tok.text) || !is_type_expr(ty) {
        return None;
    }
    Some(ParsedHeader {
        header: Header::Field {
            name: name_tok.text.to_string(),
        },
        modifiers,
        annotations,
        type_params: None,
        start,
    })
}

/// What may follow a parameter list: legacy array dims, a throws clause, or
/// an annotation-member default.
fn callable_tail_ok(tail: &[Tok<'_>]) -> bool {
    let mut k = 0;
    while k + 1 < tail.len() && tail[k].text == "[" && tail[k + 1].text == "]" {
        k += 2;
    }
    if k == tail.len() {
        return true;
    }
    match tail[k].text {
        "throws" => {
            let list = &tail[k + 1..];
            !list.is_empty() && list.split(|t| t.text == ",").all(|part| is_type_expr(part))
        }
        "default" => true,
        _ => false,
    }
}

/// Signature or header text check shared with the snippet validator.
pub fn signature_matches(signature: &str, kind: DeclKind, enclosing: Option<&str>) -> bool {
    let terminator = match kind {
        DeclKind::Field | DeclKind::Method | DeclKind::Constructor => {
            // abstract methods and fields end with `;`, bodies with `{`
            if let Some(p) = parse_header(signature, enclosing, b'{') {
                return header_kind_matches(&p.header, kind);
            }
            b';'
        }
        _ => b'{',
    };
    parse_header(signature, enclosing, terminator)
        .is_some_and(|p| header_kind_matches(&p.header, kind))
}

fn header_kind_matches(h: &Header, kind: DeclKind) -> bool {
    match (h, kind) {
        (Header::Type { kind: k, .. }, _) => *k == kind,
        (
            Header::Callable {
                constructor: true, ..
            },
            DeclKind::Constructor,
        ) => true,
        (
            Header::Callable {
                constructor: false, ..
            },
            DeclKind::Method,
        ) => true,
        (Header::Field { .. }, DeclKind::Field) => true,
        _ => false,
    }
}

struct Scanner<'a> {
    s: &'a [u8],
    text: &'a str,
    original: &'a str,
    close_of: Vec<usize>,
    package: Option<String>,
    decls: Vec<Declaration>,
    /// Start of a member found outside any type: the real imbalance point
    /// when an early `}` closed its type.
    stray: Option<usize>,
}

const NONE: usize = usize::MAX;

impl<'a> Scanner<'a> {
    fn contains_arrow(&self, start: usize, end: usize) -> bool {
        self.text[start..end].contains("->")
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        parsed: ParsedHeader,
        base: usize,
        sig_end: usize,
        end: usize,
        body: Option<(usize, usize)>,
        lambda_region: (usize, usize),
        chain: &[String],
    ) {
        let start = base + parsed.start;
        let mut modifiers = parsed.modifiers;
        for &(idx, b, e) in &parsed.annotations {
            // restore literal arguments unless a comment sits inside
            let raw = &self.original[base + b..base + e];
            if !raw.contains("//") && !raw.contains("/*") {
                modifiers[idx] = collapse(raw);
            }
        }
        let (kind, name) = match parsed.header {
            Header::Type { kind, name } => (kind, name),
            Header::Callable { name, constructor } => (
                if constructor {
                    DeclKind::Constructor
                } else {
                    DeclKind::Method
                },
                name,
            ),
            Header::Field { name } => (DeclKind::Field, name),
        };
        self.decls.push(Declaration {
            kind,
            name,
            signature: self.original[start..sig_end].trim_end().to_string(),
            span: (start, end),
            body_span: body,
            modifiers,
            type_params: parsed.type_params,
            enclosing_chain: chain.to_vec(),
            uses_lambda: self.contains_arrow(lambda_region.0, lambda_region.1),
            package: self.package.clone(),
        });
    }

    /// Position of the next depth-0 `;` at or after `i`, skipping nested groups.
    fn statement_end(&self, mut i: usize, end: usize) -> Option<usize> {
        let mut paren = 0i32;
        while i < end {
            match self.s[i] {
                b'{' => {
                    i = self.close_of[i];
                }
                b'(' | b'[' => paren += 1,
                b')' | b']' => paren -= 1,
                b';' if paren <= 0 => return Some(i),
                _ => {}
            }
            i += 1;
        }
        None
    }

    fn skip_enum_constants(&self, start: usize, end: usize) -> usize {
        let mut i = start;
        while i < end {
            match self.s[i] {
                b'{' => i = self.close_of[i],
                b';' => return i + 1,
                _ => {}
            }
            i += 1;
        }
        end
    }

    fn scan_members(&mut self, start: usize, end: usize, chain: &[String], enum_body: bool) {
        let mut i = if enum_body {
            self.skip_enum_constants(start, end)
        } else {
            start
        };
        let mut seg = i;
        let mut paren = 0i32;
        let enclosing = chain.last().map(String::as_str);
        while i < end {
            match self.s[i] {
                b'(' => paren += 1,
                b')' => paren -= 1,
                b'{' if paren > 0 => {
                    i = self.close_of[i];
                }
                b'{' => {
                    let close = self.close_of[i];
                    let header = &self.text[seg..i];
                    if let Some(p) = parse_header(header, enclosing, b'{') {
                        match p.header {
                            Header::Type { kind, ref name } => {
                                let mut inner = chain.to_vec();
                                inner.push(name.clone());
                                self.scan_members(i + 1, close, &inner, kind == DeclKind::Enum);
                                self.push(
                                    p,
                                    seg,
                                    i,
                                    close + 1,
                                    Some((i, close + 1)),
                                    (i, close + 1),
                                    chain,
                                );
                            }
                            Header::Callable { .. } if chain.is_empty() => {
                                self.stray = Some(seg);
                                return;
                            }
                            Header::Callable { .. } => {
                                self.push(
                                    p,
                                    seg,
                                    i,
                                    close + 1,
                                    Some((i, close + 1)),
                                    (i, close + 1),
                                    chain,
                                );
                            }
                            Header::Field { .. } => {}
                        }
                    }
                    i = close + 1;
                    seg = i;
                    paren = 0;
                    continue;
                }
                b';' if paren <= 0 => {
                    let header = &self.text[seg..i];
                    if let Some(p) = parse_header(header, enclosing, b';') {
                        if chain.is_empty() {
                            // members outside any type are not Java
                        } else if matches!(p.header, Header::Callable { .. } | Header::Field { .. })
                        {
                            self.push(p, seg, i, i + 1, None, (i, i), chain);
                        }
                    }
                    seg = i + 1;
                    paren = 0;
                }
                b'=' if paren <= 0 => {
                    let Some(semi) = self.statement_end(i + 1, end) else {
                        return;
                    };
                    let header = &self.text[seg..i];
                    if !chain.is_empty() {
                        if let Some(p) = parse_header(header, enclosing, b'=') {
                            if matches!(p.header, Header::Field { .. }) {
                                self.push(p, seg, i, semi + 1, None, (i, semi), chain);
                            }
                        }
                    }
                    i = semi + 1;
                    seg = i;
                    paren = 0;
                    continue;
                }
                _ => {}
            }
            i += 1;
        }
    }
}

/// Balanced prefix length and brace partner table for `s`.
fn match_braces(s: &[u8]) -> (usize, Vec<usize>) {
    let mut close_of = vec![NONE; s.len()];
    let mut stack = Vec::new();
    for (i, &b) in s.iter().enumerate() {
        match b {
            b'{' => stack.push(i),
            b'}' => match stack.pop() {
                Some(open) => close_of[open] = i,
                None => return (i, close_of),
            },
            _ => {}
        }
    }
    match stack.first() {
        Some(&bottom) => (bottom, close_of),
        None => (s.len(), close_of),
    }
}

/// All declarations in source order (by span start). A brace imbalance cuts
/// the scan at the first offending brace, or at the first method found
/// outside any type, and marks the result degraded.
pub fn extract_declarations(mt: &MaskedText) -> DeclScan {
    let text = mt.structural();
    let s = text.as_bytes();
    let (cut, close_of) = match_braces(s);
    let package = extract_package(mt);
    let mut scanner = Scanner {
        s,
        text: &text,
        original: &mt.original,
        close_of,
        package,
        decls: Vec::new(),
        stray: None,
    };
    scanner.scan_members(0, cut, &[], false);
    let mut decls = scanner.decls;
    decls.sort_by_key(|d| (d.span.0, d.span.1));
    DeclScan {
        decls,
        parse_degraded: cut != s.len() || scanner.stray.is_some(),
    }
}
