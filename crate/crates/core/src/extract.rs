//! Pairing Javadoc blocks with the declarations they document.

use serde::{Deserialize, Serialize};

use crate::decl::{extract_declarations, DeclKind, Declaration};
use crate::ingest::SourceFile;
use crate::javadoc::{extract_javadoc_blocks, JavadocBlock, JavadocTag};
use crate::lexer::{strip_literals, LexWarning, MaskedText};

/// Annotation text between a doc comment and its declaration may span at
/// most this many lines.
pub const MAX_ANNOTATION_LINES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionRecord {
    pub javadoc: JavadocBlock,
    pub decl: Declaration,
    pub code: String,
    pub repo: String,
    pub rel_path: String,
    pub license_id: String,
}

#[derive(Debug, Clone, Default)]
pub struct Pairing {
    pub pairs: Vec<(JavadocBlock, Declaration)>,
    pub orphans: usize,
}

/// Number of lines covered by annotations if the gap holds only whitespace
/// and annotations, `None` otherwise.
fn annotation_gap(gap: &str) -> Option<usize> {
    let b = gap.as_bytes();
    let mut i = 0;
    let mut first = None;
    let mut last = 0;
    let ident = |i: &mut usize| {
        let start = *i;
        while *i < b.len()
            && (b[*i].is_ascii_alphanumeric() || b[*i] == b'_' || b[*i] == b'$' || b[*i] >= 0x80)
        {
            *i += 1;
        }
        *i > start
    };
    loop {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        if i == b.len() {
            break;
        }
        if b[i] != b'@' || gap[i + 1..].starts_with("interface") {
            return None;
        }
        first.get_or_insert(i);
        i += 1;
        if !ident(&mut i) {
            return None;
        }
        while i + 1 < b.len() && b[i] == b'.' {
            i += 1;
            if !ident(&mut i) {
                return None;
            }
        }
        let mut j = i;
        while j < b.len() && b[j].is_ascii_whitespace() {
            j += 1;
        }
        if j < b.len() && b[j] == b'(' {
            let mut depth = 0usize;
            loop {
                if j == b.len() {
                    return None;
                }
                match b[j] {
                    b'(' => depth += 1,
                    b')' => {
                        depth -= 1;
                        if depth == 0 {
                            j += 1;
                            break;
                        }
                    }
                    _ => {}
                }
                j += 1;
            }
            i = j;
        }
        last = i;
    }
    Some(first.map_or(0, |f| gap[f..last].matches('\n').count() + 1))
}

/// Pairs each block with the nearest following declaration when only
/// whitespace and annotations lie between them.
pub fn pair(mt: &MaskedText, blocks: &[JavadocBlock], decls: &[Declaration]) -> Pairing {
    let mut out = Pairing::default();
    let mut taken = vec![false; decls.len()];
    for block in blocks {
        let next = decls
            .iter()
            .enumerate()
            .filter(|(_, d)| d.span.0 >= block.span.1)
            .min_by_key(|(_, d)| d.span.0);
        let paired = next.and_then(|(idx, d)| {
            let lines = annotation_gap(&mt.masked[block.span.1..d.span.0])?;
            (lines <= MAX_ANNOTATION_LINES && !taken[idx]).then_some(idx)
        });
        match paired {
            Some(idx) => {
                taken[idx] = true;
                out.pairs.push((block.clone(), decls[idx].clone()));
            }
            None => out.orphans += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct FileExtraction {
    pub records: Vec<ExtractionRecord>,
    pub orphans: usize,
    pub parse_degraded: bool,
    pub warnings: Vec<LexWarning>,
}

/// Runs masking, block and declaration extraction, and pairing on one file.
pub fn extract_source(
    content: &str,
    repo: &str,
    rel_path: &str,
    license_id: &str,
) -> FileExtraction {
    let mt = strip_literals(content);
    let blocks = extract_javadoc_blocks(&mt);
    let scan = extract_declarations(&mt);
    let pairing = pair(&mt, &blocks, &scan.decls);
    let records = pairing
        .pairs
        .into_iter()
        .map(|(javadoc, decl)| ExtractionRecord {
            code: content[decl.span.0..decl.span.1].to_string(),
            javadoc,
            decl,
            repo: repo.to_string(),
            rel_path: rel_path.to_string(),
            license_id: license_id.to_string(),
        })
        .collect();
    FileExtraction {
        records,
        orphans: pairing.orphans,
        parse_degraded: scan.parse_degraded,
        warnings: mt.warnings,
    }
}

pub fn extract_file(file: &SourceFile, license_id: &str) -> FileExtraction {
    extract_source(&file.content, &file.repo, &file.rel_path, license_id)
}

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordLine {
    pub repo: String,
    pub rel_path: String,
    pub package: Option<String>,
    pub enclosing_class: String,
    pub kind: DeclKind,
    pub signature: String,
    pub code: String,
    pub javadoc_raw: String,
    pub javadoc_description: String,
    pub javadoc_tags: Vec<JavadocTag>,
    pub uses_lambda: bool,
    pub license_id: String,
    pub name: String,
    pub span: (usize, usize),
    pub javadoc_span: (usize, usize),
    #[serde(default)]
    pub body_span: Option<(usize, usize)>,
    #[serde(default)]
    pub modifiers: Vec<String>,
    #[serde(default)]
    pub type_params: Option<String>,
}

impl From<&ExtractionRecord> for RecordLine {
    fn from(r: &ExtractionRecord) -> Self {
        RecordLine {
            repo: r.repo.clone(),
            rel_path: r.rel_path.clone(),
            package: r.decl.package.clone(),
            enclosing_class: r.decl.enclosing_chain.join("."),
            kind: r.decl.kind,
            signature: r.decl.signature.clone(),
            code: r.code.clone(),
            javadoc_raw: r.javadoc.raw.clone(),
            javadoc_description: r.javadoc.description.clone(),
            javadoc_tags: r.javadoc.tags.clone(),
            uses_lambda: r.decl.uses_lambda,
            license_id: r.license_id.clone(),
            name: r.decl.name.clone(),
            span: r.decl.span,
            javadoc_span: r.javadoc.span,
            body_span: r.decl.body_span,
            modifiers: r.decl.modifiers.clone(),
            type_params: r.decl.type_params.clone(),
        }
    }
}

impl From<RecordLine> for ExtractionRecord {
    fn from(l: RecordLine) -> Self {
        let enclosing_chain = if l.enclosing_class.is_empty() {
            Vec::new()
        } else {
            l.enclosing_class.split('.').map(str::to_string).collect()
        };
        ExtractionRecord {
            javadoc: JavadocBlock {
                raw: l.javadoc_raw,
                span: l.javadoc_span,
                description: l.javadoc_description,
                tags: l.javadoc_tags,
            },
            decl: Declaration {
                kind: l.kind,
                name: l.name,
                signature: l.signature,
                span: l.span,
                body_span: l.body_span,
                modifiers: l.modifiers,
                type_params: l.type_params,
                enclosing_chain,
                uses_lambda: l.uses_lambda,
                package: l.package,
            },
            code: l.code,
            repo: l.repo,
            rel_path: l.rel_path,
            license_id: l.license_id,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str) -> FileExtraction {
        extract_source(src, "r", "A.java", "MIT")
    }

    #[test]
    fn doc_directly_above_method() {
        let src = "class A {\n  /** Gets x. */\n  int getX() { return x; }\n}";
        let fx = run(src);
        assert_eq!(fx.records.len(), 1);
        assert_eq!(fx.orphans, 0);
        assert_eq!(fx.records[0].decl.name, "getX");
        assert_eq!(fx.records[0].code, "int getX() { return x; }");
    }

    #[test]
    fn trailing_doc_is_orphan() {
        let fx = run("class A {\n  int x() { return 1; }\n}\n/** dangling */\n");
        assert_eq!(fx.records.len(), 0);
        assert_eq!(fx.orphans, 1);
    }

    #[test]
    fn annotation_between_doc_and_method() {
        let src = "class A {\n  /** Renders. */\n  @Override\n  public String toString() { return \"A\"; }\n}";
        let fx = run(src);
        assert_eq!(fx.records.len(), 1);
        assert_eq!(fx.records[0].decl.name, "toString");
        assert!(fx.records[0].code.starts_with("public String"));
    }

    #[test]
    fn too_many_annotation_lines_orphan() {
        let src = "class A {\n  /** Doc. */\n  @A\n  @B\n  @D\n  @C(\n    x = 1,\n    y = 2)\n  void m() {}\n}";
        let fx = run(src);
        assert_eq!(fx.records.len(), 0);
        assert_eq!(fx.orphans, 1);
    }

    #[test]
    fn code_between_doc_and_decl_orphans() {
        let src = "class A {\n  void m() {\n    /** not a member doc */\n    int y = 2;\n  }\n  void n() {}\n}";
        let fx = run(src);
        assert_eq!(fx.records.len(), 0);
        assert_eq!(fx.orphans, 1);
    }

    #[test]
    fn stacked_docs_only_last_pairs() {
        let fx = run("class A {\n  /** one */\n  /** two */\n  void m() {}\n}");
        assert_eq!(fx.records.len(), 1);
        assert_eq!(fx.records[0].javadoc.description, "two");
        assert_eq!(fx.orphans, 1);
    }

    #[test]
    fn record_line_round_trip() {
        let fx =
            run("package p;\nclass A {\n  /** Doc.\n   * @param a x */\n  void m(int a) {}\n}");
        let rec = fx.records[0].clone();
        let line = RecordLine::from(&rec);
        assert_eq!(line.enclosing_class, "A");
        assert_eq!(ExtractionRecord::from(line), rec);
    }
}
