//! Source discovery across the repositories named in a manifest.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::lexer::strip_literals;

/// Files above this size are skipped as generated or minified noise.
pub const MAX_FILE_BYTES: u64 = 2 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoSource {
    pub name: String,
    pub root: PathBuf,
    pub license_id: String,
    #[serde(default)]
    pub revision: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoManifest {
    pub repos: Vec<RepoSource>,
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
}

fn default_schema_version() -> u32 {
    1
}

impl RepoManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: RepoManifest =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        // relative roots resolve against the manifest's directory
        if let Some(base) = path.parent() {
            for repo in &mut manifest.repos {
                if repo.root.is_relative() {
                    repo.root = base.join(&repo.root);
                }
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut roots = HashSet::new();
        for repo in &self.repos {
            let fail = |message: &str| Error::Manifest {
                repo: repo.name.clone(),
                message: message.to_string(),
            };
            if repo.name.is_empty() {
                return Err(fail("empty repo name"));
            }
            if repo.license_id.trim().is_empty() {
                return Err(fail("license_id must be non-empty"));
            }
            if !names.insert(repo.name.as_str()) {
                return Err(fail("duplicate repo name"));
            }
            if !roots.insert(repo.root.as_path()) {
                return Err(fail("root path shared with another repo"));
            }
        }
        Ok(())
    }

    pub fn license_for(&self, repo: &str) -> Option<&str> {
        self.repos
            .iter()
            .find(|r| r.name == repo)
            .map(|r| r.license_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub repo: String,
    pub rel_path: String,
    pub content: String,
    pub byte_len: u64,
}

impl SourceFile {
    /// `package-info.java` / `module-info.java` carry package-level docs.
    pub fn is_info_file(&self) -> bool {
        let name = self.rel_path.rsplit('/').next().unwrap_or("");
        name == "package-info.java" || name == "module-info.java"
    }
}

#[derive(Debug, Clone, Default)]
pub struct DiscoverOptions {
    /// Globs matched against repo-relative paths (`/`-separated).
    pub exclude: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Discovery {
    pub files: Vec<SourceFile>,
    pub lossy_decodes: usize,
    pub skipped_large: usize,
    pub warnings: Vec<String>,
}

fn build_globs(patterns: &[String]) -> Result<GlobSet> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob =
            Glob::new(p).map_err(|e| Error::Config(format!("bad exclude glob `{p}`: {e}")))?;
        builder.add(glob);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("exclude globs: {e}")))
}

enum Loaded {
    File(SourceFile, bool),
    TooLarge(String),
    Failed(String),
}

fn load_file(repo: &str, rel_path: String, path: &Path) -> Loaded {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return Loaded::Failed(format!("{repo}/{rel_path}: {e}")),
    };
    let byte_len = bytes.len() as u64;
    if byte_len > MAX_FILE_BYTES {
        return Loaded::TooLarge(format!("{repo}/{rel_path}: {byte_len} bytes, skipped"));
    }
    let (content, lossy) = match String::from_utf8(bytes) {
        Ok(s) => (s, false),
        Err(e) => (String::from_utf8_lossy(e.as_bytes()).into_owned(), true),
    };
    Loaded::File(
        SourceFile {
            repo: repo.to_string(),
            rel_path,
            content,
            byte_len,
        },
        lossy,
    )
}

/// Loads one repo-relative file. The flag reports a lossy UTF-8 decode.
pub fn read_source(repo: &RepoSource, rel_path: &str) -> Result<(SourceFile, bool)> {
    let path = repo.root.join(rel_path);
    match load_file(&repo.name, rel_path.to_string(), &path) {
        Loaded::File(f, lossy) => Ok((f, lossy)),
        Loaded::TooLarge(w) => Err(Error::Validation(w)),
        Loaded::Failed(_) => Err(Error::io(
            &path,
            fs::File::open(&path)
                .err()
                .unwrap_or_else(|| std::io::Error::other("unreadable")),
        )),
    }
}

/// Every `.java` file under each repo root, ordered by (repo, rel_path).
/// Symlinks are not followed.
pub fn discover_sources(manifest: &RepoManifest, opts: &DiscoverOptions) -> Result<Discovery> {
    manifest.validate()?;
    let excluded = build_globs(&opts.exclude)?;
    let mut repos: Vec<&RepoSource> = manifest.repos.iter().collect();
    repos.sort_by(|a, b| a.name.cmp(&b.name));

    let mut candidates = Vec::new();
    for repo in repos {
        fs::read_dir(&repo.root).map_err(|e| Error::Manifest {
            repo: repo.name.clone(),
            message: format!("cannot read root {}: {e}", repo.root.display()),
        })?;
        let mut paths = Vec::new();
        for entry in WalkDir::new(&repo.root).follow_links(false) {
            let entry = entry.map_err(|e| Error::Manifest {
                repo: repo.name.clone(),
                message: e.to_string(),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            if entry.path().extension().and_then(|e| e.to_str()) != Some("java") {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(&repo.root)
                .expect("walkdir yields paths under root");
            let rel_path = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if excluded.is_match(&rel_path) {
                continue;
            }
            paths.push((rel_path, entry.into_path()));
        }
        paths.sort();
        candidates.extend(
            paths
                .into_iter()
                .map(|(rel, p)| (repo.name.clone(), rel, p)),
        );
    }

    let loaded: Vec<Loaded> = candidates
        .par_iter()
        .map(|(repo, rel, path)| load_file(repo, rel.clone(), path))
        .collect();

    let mut out = Discovery::default();
    for item in loaded {
        match item {
            Loaded::File(file, lossy) => {
                if lossy {
                    out.lossy_decodes += 1;
                    out.warnings.push(format!(
                        "{}/{}: invalid UTF-8 replaced",
                        file.repo, file.rel_path
                    ));
                }
                out.files.push(file);
            }
            Loaded::TooLarge(w) => {
                out.skipped_large += 1;
                out.warnings.push(w);
            }
            Loaded::Failed(w) => out.warnings.push(w),
        }
    }
    for w in &out.warnings {
        tracing::warn!("{w}");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefilterReason {
    HasJavadoc,
    NoJavadoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prefilter {
    pub keep: bool,
    pub reason: PrefilterReason,
}

/// Keeps a file iff its masked text holds at least one doc comment.
pub fn prefilter(file: &SourceFile) -> Prefilter {
    let keep = !strip_literals(&file.content).doc_spans.is_empty();
    Prefilter {
        keep,
        reason: if keep {
            PrefilterReason::HasJavadoc
        } else {
            PrefilterReason::NoJavadoc
        },
    }
}

/// One line of the ingest inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryLine {
    pub repo: String,
    pub rel_path: String,
    pub byte_len: u64,
    pub kept: bool,
    pub reason: PrefilterReason,
}

pub fn inventory(files: &[SourceFile]) -> Vec<InventoryLine> {
    files
        .par_iter()
        .map(|f| {
            let p = prefilter(f);
            InventoryLine {
                repo: f.repo.clone(),
                rel_path: f.rel_path.clone(),
                byte_len: f.byte_len,
                kept: p.keep,
                reason: p.reason,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(content: &str) -> SourceFile {
        SourceFile {
            repo: "r".into(),
            rel_path: "A.java".into(),
            content: content.into(),
            byte_len: content.len() as u64,
        }
    }

    #[test]
    fn prefilter_keeps_doc() {
        assert!(prefilter(&src("/** Gets x */ int x(){ return 1; }")).keep);
    }

    #[test]
    fn prefilter_discards_plain_comments() {
        let p = prefilter(&src("/* block */ // line\nclass A {}"));
        assert!(!p.keep);
        assert_eq!(p.reason, PrefilterReason::NoJavadoc);
    }

    #[test]
    fn prefilter_ignores_opener_in_string() {
        assert!(!prefilter(&src("class A { String s = \"a /** b\"; }")).keep);
    }

    #[test]
    fn prefilter_ignores_empty_block_comment() {
        assert!(!prefilter(&src("/**/ class A {}")).keep);
    }

    #[test]
    fn manifest_rejects_duplicates_and_empty_license() {
        let repo = |name: &str, root: &str, lic: &str| RepoSource {
            name: name.into(),
            root: root.into(),
            license_id: lic.into(),
            revision: None,
        };
        let m = RepoManifest {
            repos: vec![repo("a", "/x", "MIT"), repo("a", "/y", "MIT")],
            schema_version: 1,
        };
        assert!(matches!(m.validate(), Err(Error::Manifest { .. })));
        let m = RepoManifest {
            repos: vec![repo("a", "/x", "MIT"), repo("b", "/x", "MIT")],
            schema_version: 1,
        };
        assert!(m.validate().is_err());
        let m = RepoManifest {
            repos: vec![repo("a", "/x", " ")],
            schema_version: 1,
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn info_files_are_tagged() {
        let mut f = src("");
        f.rel_path = "a/b/package-info.java".into();
        assert!(f.is_info_file());
    }
}
