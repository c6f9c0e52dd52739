//! Corpus ingestion.
//!
//! Layout convention: `<root>/<category>/**/<file>`. Every regular file below a
//! top-level subdirectory becomes one [`Document`] of that category, however
//! deeply it is nested. Hidden entries (names starting with `.`) are skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::par::{map_ordered, Parallelism};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus root {0} does not exist or is not a directory")]
    RootNotFound(PathBuf),
    #[error("corpus root {path} is not readable: {source}")]
    RootUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus root {0} contains no category subdirectory with a readable document")]
    Empty(PathBuf),
}

/// Byte encoding of corpus files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextEncoding {
    #[default]
    Utf8,
    /// Legacy Arabic code page, transcoded to UTF-8 at ingest.
    Windows1256,
}

impl std::str::FromStr for TextEncoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "utf-8" | "utf8" => Ok(TextEncoding::Utf8),
            "windows-1256" | "cp1256" => Ok(TextEncoding::Windows1256),
            other => Err(format!(
                "unsupported encoding {other:?} (expected utf-8 or windows-1256)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    pub encoding: TextEncoding,
    pub parallelism: Parallelism,
}

/// One corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    /// Relative path with `/` separators; unique within a corpus.
    pub doc_id: String,
    /// Path relative to the corpus root.
    pub path: PathBuf,
    pub category: String,
    pub text: String,
}

impl Document {
    /// Builds an in-memory document whose id and path are `category/name`.
    pub fn new(category: impl Into<String>, name: &str, text: impl Into<String>) -> Self {
        let category = category.into();
        let doc_id = format!("{category}/{name}");
        Document {
            path: PathBuf::from(&doc_id),
            doc_id,
            category,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub root: PathBuf,
    /// Categories in name order with their document counts.
    pub categories: Vec<(String, usize)>,
    pub total_documents: usize,
}

impl CorpusManifest {
    pub fn from_documents(root: impl Into<PathBuf>, documents: &[Document]) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in documents {
            *counts.entry(doc.category.as_str()).or_default() += 1;
        }
        CorpusManifest {
            root: root.into(),
            categories: counts
                .into_iter()
                .map(|(c, n)| (c.to_string(), n))
                .collect(),
            total_documents: documents.len(),
        }
    }
}

impl fmt::Display for CorpusManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "corpus: {}", self.root.display())?;
        for (name, count) in &self.categories {
            writeln!(f, "  {name}: {count}")?;
        }
        write!(
            f,
            "{} categories, {} documents",
            self.categories.len(),
            self.total_documents
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IssueKind {
    /// A file directly under the root has no category.
    Uncategorized,
    Unreadable(String),
    Undecodable,
    NonUnicodeName,
    EmptyCategory,
}

/// A non-fatal problem found while ingesting; the offending entry is skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestIssue {
    pub path: PathBuf,
    pub kind: IssueKind,
}

impl fmt::Display for IngestIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.path.display();
        match &self.kind {
            IssueKind::Uncategorized => {
                write!(f, "{p}: file at corpus root has no category, skipped")
            }
            IssueKind::Unreadable(e) => write!(f, "{p}: unreadable: {e}"),
            IssueKind::Undecodable => {
                write!(f, "{p}: invalid byte sequence for the configured encoding")
            }
            IssueKind::NonUnicodeName => write!(f, "{p}: path is not valid Unicode"),
            IssueKind::EmptyCategory => write!(f, "{p}: category directory holds no documents"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    /// Documents sorted by `doc_id`.
    pub documents: Vec<Document>,
    pub issues: Vec<IngestIssue>,
}

struct Candidate {
    doc_id: String,
    relative: PathBuf,
    category: String,
}

fn is_hidden(entry: &walkdir::DirEntry) -> bool {
    entry.depth() > 0
        && entry
            .file_name()
            .to_str()
            .is_some_and(|s| s.starts_with('.'))
}

fn relative_id(relative: &Path) -> Option<String> {
    let parts: Option<Vec<&str>> = relative
        .components()
        .map(|c| match c {
            Component::Normal(s) => s.to_str(),
            _ => None,
        })
        .collect();
    parts.map(|p| p.join("/"))
}

fn decode(bytes: Vec<u8>, encoding: TextEncoding) -> Option<String> {
    match encoding {
        TextEncoding::Utf8 => {
            let mut text = String::from_utf8(bytes).ok()?;
            if text.starts_with('\u{feff}') {
                text.drain(..'\u{feff}'.len_utf8());
            }
            Some(text)
        }
        TextEncoding::Windows1256 => encoding_rs::WINDOWS_1256
            .decode_without_bom_handling_and_without_replacement(&bytes)
            .map(|cow| cow.into_owned()),
    }
}

/// Walks `root` and loads every categorized document.
///
/// Per-file failures are reported in [`Corpus::issues`] and do not stop the
/// walk. The result is fatal only when the root is missing or yields no
/// document at all.
pub fn ingest(root: impl AsRef<Path>, options: &IngestOptions) -> Result<Corpus, CorpusError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(CorpusError::RootNotFound(root.to_path_buf()));
    }
    fs::read_dir(root).map_err(|source| CorpusError::RootUnreadable {
        path: root.to_path_buf(),
        source,
    })?;

    let mut issues = Vec::new();
    let mut candidates = Vec::new();
    let mut category_dirs = Vec::new();

    let walker = WalkDir::new(root)
        .min_depth(1)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| !is_hidden(e));
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                let path = err.path().unwrap_or(root).to_path_buf();
                issues.push(IngestIssue {
                    path,
                    kind: IssueKind::Unreadable(err.to_string()),
                });
                continue;
            }
        };
        let relative = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under its root")
            .to_path_buf();
        let ft = entry.file_type();
        if entry.depth() == 1 {
            if ft.is_dir() {
                category_dirs.push(relative);
            } else if ft.is_file() {
                issues.push(IngestIssue {
                    path: relative,
                    kind: IssueKind::Uncategorized,
                });
            }
            continue;
        }
        if !ft.is_file() {
            continue;
        }
        let Some(doc_id) = relative_id(&relative) else {
            issues.push(IngestIssue {
                path: relative,
                kind: IssueKind::NonUnicodeName,
            });
            continue;
        };
        let category = doc_id.split('/').next().unwrap_or_default().to_string();
        candidates.push(Candidate {
            doc_id,
            relative,
            category,
        });
    }
    candidates.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let loaded = map_ordered(&candidates, options.parallelism, |c| {
        let bytes =
            fs::read(root.join(&c.relative)).map_err(|e| IssueKind::Unreadable(e.to_string()))?;
        decode(bytes, options.encoding).ok_or(IssueKind::Undecodable)
    });

    let mut documents = Vec::with_capacity(candidates.len());
    for (c, text) in candidates.into_iter().zip(loaded) {
        match text {
            Ok(text) => documents.push(Document {
                doc_id: c.doc_id,
                path: c.relative,
                category: c.category,
                text,
            }),
            Err(kind) => issues.push(IngestIssue {
                path: c.relative,
                kind,
            }),
        }
    }

    let manifest = CorpusManifest::from_documents(root, &documents);
    for dir in category_dirs {
        let name = dir.to_string_lossy();
        if !manifest.categories.iter().any(|(c, _)| *c == name) {
            issues.push(IngestIssue {
                path: dir,
                kind: IssueKind::EmptyCategory,
            });
        }
    }
    if documents.is_empty() {
        return Err(CorpusError::Empty(root.to_path_buf()));
    }
    Ok(Corpus {
        manifest,
        documents,
        issues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn write(root: &Path, rel: &str, contents: &[u8]) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, contents).unwrap();
    }

    /// Independent recursive count used as the oracle for manifests.
    fn naive_counts(root: &Path) -> BTreeMap<String, usize> {
        fn count(dir: &Path) -> usize {
            let mut n = 0;
            for e in fs::read_dir(dir).unwrap() {
                let e = e.unwrap();
                if e.file_name().to_string_lossy().starts_with('.') {
                    continue;
                }
                let ft = e.file_type().unwrap();
                if ft.is_dir() {
                    n += count(&e.path());
                } else if ft.is_file() {
                    n += 1;
                }
            }
            n
        }
        let mut out = BTreeMap::new();
        for e in fs::read_dir(root).unwrap() {
            let e = e.unwrap();
            if e.file_type().unwrap().is_dir() && !e.file_name().to_string_lossy().starts_with('.')
            {
                let n = count(&e.path());
                if n > 0 {
                    out.insert(e.file_name().to_string_lossy().into_owned(), n);
                }
            }
        }
        out
    }

    #[test]
    fn ten_category_layout() {
        let dir = tempfile::tempdir().unwrap();
        let counts = [6, 19, 14, 17, 12, 18, 3, 9, 11, 15];
        for (i, n) in counts.iter().enumerate() {
            for j in 0..*n {
                write(dir.path(), &format!("cat{i:02}/doc{j:02}.txt"), b"text");
            }
        }
        let corpus = ingest(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(corpus.manifest.categories.len(), 10);
        assert_eq!(corpus.manifest.total_documents, 124);
        let got: Vec<usize> = corpus.manifest.categories.iter().map(|c| c.1).collect();
        assert_eq!(got, counts);
        assert!(corpus.issues.is_empty());
    }

    #[test]
    fn single_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "A/empty.txt", b"");
        let corpus = ingest(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(corpus.documents.len(), 1);
        assert_eq!(corpus.documents[0].category, "A");
        assert_eq!(corpus.documents[0].text, "");
        assert_eq!(corpus.documents[0].doc_id, "A/empty.txt");
    }

    #[test]
    fn nested_files_belong_to_top_level_category() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "law/a.txt", b"1");
        write(dir.path(), "law/sub/b.txt", b"2");
        write(dir.path(), "law/sub/deeper/c.txt", b"3");
        write(dir.path(), "staff/x/y.txt", b"4");
        write(dir.path(), "staff/.hidden", b"5");
        write(dir.path(), ".git/config", b"6");
        let corpus = ingest(dir.path(), &IngestOptions::default()).unwrap();
        let ids: Vec<&str> = corpus.documents.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "law/a.txt",
                "law/sub/b.txt",
                "law/sub/deeper/c.txt",
                "staff/x/y.txt"
            ]
        );
        assert!(corpus.documents[..3].iter().all(|d| d.category == "law"));
        let manifest: BTreeMap<String, usize> =
            corpus.manifest.categories.iter().cloned().collect();
        assert_eq!(manifest, naive_counts(dir.path()));
    }

    #[test]
    fn root_level_files_are_rejected_with_diagnostic() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "stray.txt", b"x");
        write(dir.path(), "A/ok.txt", b"y");
        let corpus = ingest(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(corpus.documents.len(), 1);
        assert_eq!(corpus.issues.len(), 1);
        assert_eq!(corpus.issues[0].kind, IssueKind::Uncategorized);
    }

    #[test]
    fn undecodable_file_is_reported_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "A/bad.txt", &[0xff, 0xfe, 0x80]);
        write(dir.path(), "A/good.txt", "نص".as_bytes());
        let corpus = ingest(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(corpus.documents.len(), 1);
        assert_eq!(corpus.issues[0].kind, IssueKind::Undecodable);
        assert_eq!(corpus.issues[0].path, PathBuf::from("A/bad.txt"));
    }

    #[test]
    fn windows_1256_transcoding() {
        let dir = tempfile::tempdir().unwrap();
        // "سلام" in windows-1256
        write(dir.path(), "A/legacy.txt", &[0xD3, 0xE1, 0xC7, 0xE3]);
        let opts = IngestOptions {
            encoding: TextEncoding::Windows1256,
            ..Default::default()
        };
        let corpus = ingest(dir.path(), &opts).unwrap();
        assert_eq!(corpus.documents[0].text, "سلام");
    }

    #[test]
    fn empty_and_missing_roots_are_fatal() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest(dir.path(), &IngestOptions::default()),
            Err(CorpusError::Empty(_))
        ));
        fs::create_dir(dir.path().join("A")).unwrap();
        write(dir.path(), "stray.txt", b"x");
        assert!(matches!(
            ingest(dir.path(), &IngestOptions::default()),
            Err(CorpusError::Empty(_))
        ));
        assert!(matches!(
            ingest(dir.path().join("nope"), &IngestOptions::default()),
            Err(CorpusError::RootNotFound(_))
        ));
    }

    #[test]
    fn ingestion_is_deterministic_across_modes() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..40 {
            write(
                dir.path(),
                &format!("c{}/d{i}.txt", i % 4),
                format!("doc {i}").as_bytes(),
            );
        }
        let seq = ingest(
            dir.path(),
            &IngestOptions {
                parallelism: Parallelism::Sequential,
                ..Default::default()
            },
        )
        .unwrap();
        let par = ingest(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(seq.manifest, par.manifest);
        assert_eq!(seq.documents, par.documents);
    }
}
