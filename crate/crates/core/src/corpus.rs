//! Directory corpora in the 20Newsgroups layout and the preprocessing
//! pipeline: header removal, tokenization, token filtering, truncation.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation length.
pub const DEFAULT_MAX_TOKENS: usize = 400;

/// A corpus file before preprocessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub text: String,
    pub label: String,
    /// Path relative to the corpus root, `/`-separated.
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub tokens: Vec<String>,
    pub label_index: usize,
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub documents: Vec<Document>,
    pub labels: Vec<String>,
    pub split: Split,
    /// Number of files dropped because nothing survived preprocessing.
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub max_tokens: usize,
    pub lowercase: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions { max_tokens: DEFAULT_MAX_TOKENS, lowercase: false }
    }
}

/// Returns everything after the first blank line, or the whole input when
/// there is none.
pub fn strip_headers(raw: &str) -> &str {
    let lf = raw.find("\n\n").map(|i| (i, 2));
    let crlf = raw.find("\r\n\r\n").map(|i| (i, 4));
    let split = match (lf, crlf) {
        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
        (a, b) => a.or(b),
    };
    match split {
        Some((at, len)) => &raw[at + len..],
        None => raw,
    }
}

fn is_token_char(c: char) -> bool {
    c.is_alphabetic() || c == '\'' || c == '-' || c == '.'
}

/// Applies the retention rule to one whitespace-delimited chunk.
fn filter_chunk(chunk: &str) -> Option<&str> {
    let trimmed = chunk.trim_matches(|c: char| !is_token_char(c));
    if !trimmed.is_empty() && trimmed.chars().all(is_token_char) && trimmed.chars().any(char::is_alphabetic) {
        Some(trimmed)
    } else {
        None
    }
}

/// Whitespace tokenizer keeping only tokens made of letters, apostrophes,
/// hyphens and dots with at least one letter.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(filter_chunk).map(str::to_owned).collect()
}

/// Whether `token` could have been produced by [`tokenize`].
pub fn is_retained_token(token: &str) -> bool {
    filter_chunk(token) == Some(token)
}

pub fn preprocess(raw: &RawDocument, label_index: usize, options: &PreprocessOptions) -> Result<Document> {
    let mut tokens = tokenize(strip_headers(&raw.text));
    tokens.truncate(options.max_tokens);
    if options.lowercase {
        for token in &mut tokens {
            *token = token.to_lowercase();
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyDocument { id: raw.id.clone() });
    }
    Ok(Document { tokens, label_index, id: raw.id.clone() })
}

/// Decodes file bytes as UTF-8, falling back to Latin-1 (the corpus mixes both).
fn decode_text(bytes: Vec<u8>) -> String {
    match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.into_bytes().iter().map(|&b| b as char).collect(),
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort();
    Ok(entries)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Sorted category names, and each raw document tagged with its category index.
pub type RawCorpus = (Vec<String>, Vec<(usize, RawDocument)>);

/// Reads `<root>/<category>/<file>` into raw documents, sorted by category
/// then file name. Returns the sorted category names alongside.
pub fn read_raw_corpus(root: &Path) -> Result<RawCorpus> {
    let categories: Vec<_> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    let labels: Vec<String> = categories.iter().map(|p| file_name(p)).collect();

    let mut raws = Vec::new();
    for (label_index, dir) in categories.iter().enumerate() {
        for path in sorted_entries(dir)? {
            if !path.is_file() {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            raws.push((
                label_index,
                RawDocument {
                    text: decode_text(bytes),
                    label: labels[label_index].clone(),
                    id: format!("{}/{}", labels[label_index], file_name(&path)),
                },
            ));
        }
    }
    Ok((labels, raws))
}

pub fn load_corpus(root: &Path, split: Split, options: &PreprocessOptions) -> Result<Dataset> {
    let (labels, raws) = read_raw_corpus(root)?;
    let processed: Vec<Result<Document>> =
        raws.par_iter().map(|(label_index, raw)| preprocess(raw, *label_index, options)).collect();

    let mut documents = Vec::with_capacity(processed.len());
    let mut dropped = 0;
    for doc in processed {
        match doc {
            Ok(doc) => documents.push(doc),
            Err(Error::EmptyDocument { id }) => {
                log::debug!("dropping empty document {id}");
                dropped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if dropped > 0 {
        log::info!("{split}: dropped {dropped} documents with no tokens");
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus { root: root.to_path_buf() });
    }
    Ok(Dataset { documents, labels, split, dropped })
}

impl Dataset {
    pub fn find(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Writes one `{"id", "label", "tokens"}` JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: &'a str,
            label: &'a str,
            tokens: &'a [String],
        }
        for doc in &self.documents {
            let line = Line { id: &doc.id, label: &self.labels[doc.label_index], tokens: &doc.tokens };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(text: &str) -> RawDocument {
        RawDocument { text: text.to_owned(), label: "a".into(), id: "a/1".into() }
    }

    #[test]
    fn strip_headers_examples() {
        assert_eq!(strip_headers("Subject: x\nFrom: y\n\nbody text"), "body text");
        assert_eq!(strip_headers("no headers here"), "no headers here");
        assert_eq!(strip_headers("A\n\nB\n\nC"), "B\n\nC");
        assert_eq!(strip_headers("H: 1\r\n\r\nbody"), "body");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hello, world 42!"), ["Hello", "world"]);
        assert_eq!(tokenize("don't re-enter U.S.A."), ["don't", "re-enter", "U.S.A."]);
        assert!(tokenize("... --- 123").is_empty());
        // inner characters outside the set reject the chunk, edges are stripped
        assert!(tokenize("foo@bar.com a/b").is_empty());
        assert_eq!(tokenize("x2 \"quote\""), ["x", "quote"]);
        assert_eq!(tokenize("(quoted)"), ["quoted"]);
    }

    #[test]
    fn preprocess_truncates() {
        let body: String = (0..500).map(|i| format!("w{} word ", i)).collect();
        // "w0" etc. are rejected, "word" survives: 500 tokens
        let doc = preprocess(&raw(&format!("H: x\n\n{body}")), 0, &Default::default()).unwrap();
        assert_eq!(doc.tokens.len(), 400);

        let doc = preprocess(&raw("a b c d e f g h i j"), 0, &Default::default()).unwrap();
        assert_eq!(doc.tokens.len(), 10);

        let err = preprocess(&raw("H: x\n\n1 2 3 4"), 0, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyDocument { .. }));
    }

    #[test]
    fn preprocess_lowercase_flag() {
        let opts = PreprocessOptions { lowercase: true, ..Default::default() };
        let doc = preprocess(&raw("NASA Shuttle"), 0, &opts).unwrap();
        assert_eq!(doc.tokens, ["nasa", "shuttle"]);
    }

    #[test]
    fn latin1_fallback() {
        let text = decode_text(vec![b'c', b'a', b'f', 0xe9]);
        assert_eq!(text, "café");
    }

    fn fixture(dir: &Path) {
        for (cat, files) in [("beta", ["2", "1"]), ("alpha", ["b", "a"])] {
            fs::create_dir_all(dir.join(cat)).unwrap();
            for f in files {
                fs::write(dir.join(cat).join(f), format!("From: x\n\n{cat} document {f} text")).unwrap();
            }
        }
        fs::write(dir.join("alpha").join("empty"), "H: y\n\n12 34").unwrap();
    }

    #[test]
    fn load_corpus_is_sorted_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let a = load_corpus(dir.path(), Split::Train, &Default::default()).unwrap();
        let b = load_corpus(dir.path(), Split::Train, &Default::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels, ["alpha", "beta"]);
        assert_eq!(a.documents.len(), 4);
        assert_eq!(a.dropped, 1);
        let ids: Vec<_> = a.documents.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["alpha/a", "alpha/b", "beta/1", "beta/2"]);
        assert_eq!(a.documents[2].label_index, 1);

        let mut out = Vec::new();
        a.write_jsonl(&mut out).unwrap();
        let first = String::from_utf8(out).unwrap().lines().next().unwrap().to_owned();
        assert_eq!(first, r#"{"id":"alpha/a","label":"alpha","tokens":["alpha","document","a","text"]}"#);
    }

    #[test]
    fn load_corpus_errors() {
        let err = load_corpus(Path::new("/nonexistent/corpus"), Split::Test, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));

        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("x")).unwrap();
        fs::write(dir.path().join("x").join("f"), "1 2 3").unwrap();
        let err = load_corpus(dir.path(), Split::Test, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus { .. }));
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "[a-zA-Z0-9 .,'!?\\-\n\t()]{0,200}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(&once, &twice);
            for t in &once {
                prop_assert!(t.chars().any(char::is_alphabetic));
                prop_assert!(is_retained_token(t));
            }
        }

        #[test]
        fn preprocess_respects_max_tokens(text in "[a-z ]{0,300}", max in 1usize..50) {
            let opts = PreprocessOptions { max_tokens: max, lowercase: false };
            if let Ok(doc) = preprocess(&raw(&text), 0, &opts) {
                prop_assert!(doc.tokens.len() <= max);
            }
        }
    }
}
