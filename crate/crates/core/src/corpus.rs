//! Corpus input: one whitespace-tokenized sentence per line, or JSON lines
//! of the form `{"tokens": [...]}`.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::oracle::{TokenError, TokenSequence};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    Token { line: usize, source: TokenError },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("corpus is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
struct JsonLine {
    tokens: Vec<String>,
}

/// Reads a corpus, detecting JSON lines by a leading `{`. Blank lines and
/// lines starting with `#` are skipped in text mode.
pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<TokenSequence>, CorpusError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let sentence = if trimmed.starts_with('{') {
            let parsed: JsonLine = serde_json::from_str(trimmed).map_err(|e| CorpusError::Json {
                line: n + 1,
                message: e.to_string(),
            })?;
            TokenSequence::new(parsed.tokens)
        } else {
            TokenSequence::parse(trimmed)
        };
        out.push(sentence.map_err(|source| CorpusError::Token { line: n + 1, source })?);
    }
    if out.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(out)
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<TokenSequence>, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file))
}

/// Distinct words in first-occurrence order.
pub fn vocabulary(corpus: &[TokenSequence]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    corpus
        .iter()
        .flat_map(|s| s.tokens())
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect()
}

pub fn word_counts(corpus: &[TokenSequence]) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for token in corpus.iter().flat_map(|s| s.tokens()) {
        *counts.entry(token.clone()).or_insert(0) += 1;
    }
    counts
}
