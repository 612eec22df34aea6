//! Word categories from density clustering of sense columns.
//!
//! Each sense column of the sense matrix becomes a probability-space unit
//! vector; OPTICS under cosine distance groups them and leaves the rest in
//! the uncategorized category `-1`.

mod optics;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::TokenSequence;
use crate::probmatrix::{ProbMatrix, SenseId, SenseMatrix};
use crate::vector::cosine_distance;
use crate::wsd::SenseInventory;

pub use optics::{optics, OpticsParams, OpticsResult};

pub const NOISE: i64 = -1;

#[derive(Debug, Error)]
pub enum CategoryError {
    #[error("category clustering needs at least 2 sense columns, got {0}")]
    TooFewColumns(usize),
    #[error("empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCategory {
    pub category_id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub members: Vec<SenseId>,
}

impl WordCategory {
    /// The name used for this category in grammars and tags.
    pub fn label(&self) -> String {
        category_label(self.category_id, self.name.as_deref())
    }
}

pub fn category_label(id: i64, name: Option<&str>) -> String {
    match name {
        Some(n) => n.to_string(),
        None if id == NOISE => "noise".to_string(),
        None => format!("c{id}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CategoryConfig {
    pub min_samples: usize,
    pub xi: f64,
    pub min_cluster_size: Option<usize>,
}

impl Default for CategoryConfig {
    fn default() -> Self {
        let p = OpticsParams::default();
        CategoryConfig {
            min_samples: p.min_samples,
            xi: p.xi,
            min_cluster_size: p.min_cluster_size,
        }
    }
}

impl From<CategoryConfig> for OpticsParams {
    fn from(c: CategoryConfig) -> Self {
        OpticsParams {
            min_samples: c.min_samples,
            xi: c.xi,
            min_cluster_size: c.min_cluster_size,
            predecessor_correction: true,
        }
    }
}

/// Pairwise cosine distances between the sense-column directions.
pub fn column_distances(m: &SenseMatrix) -> Vec<Vec<f64>> {
    let dirs: Vec<Vec<f64>> = (0..m.n_cols()).map(|j| m.column_direction(j)).collect();
    dirs.par_iter()
        .map(|a| dirs.iter().map(|b| cosine_distance(a, b)).collect())
        .collect()
}

/// Clusters the sense columns. The result always starts with the noise
/// category (possibly empty), followed by categories `0..`.
pub fn cluster_categories(m: &SenseMatrix, config: &CategoryConfig) -> Result<Vec<WordCategory>, CategoryError> {
    if m.n_cols() < 2 {
        return Err(CategoryError::TooFewColumns(m.n_cols()));
    }
    let result = optics(&column_distances(m), &OpticsParams::from(*config));
    let n_clusters = result.labels.iter().copied().max().unwrap_or(NOISE).max(NOISE) + 1;
    let mut categories: Vec<WordCategory> = (NOISE..n_clusters)
        .map(|id| WordCategory {
            category_id: id,
            name: None,
            members: Vec::new(),
        })
        .collect();
    for (col, &label) in result.labels.iter().enumerate() {
        categories[(label - NOISE) as usize].members.push(m.columns()[col].clone());
    }
    Ok(categories)
}

/// Listing in the form `Cluster #0: [the, my, his, ]`, one line per
/// category.
pub fn listing(categories: &[WordCategory]) -> String {
    let mut out = String::new();
    for c in categories {
        let _ = write!(out, "Cluster #{}: [", c.category_id);
        for m in &c.members {
            let _ = write!(out, "{}, ", m.word);
        }
        out.push_str("]\n");
    }
    out
}

/// Categories from a lexicon of named word classes; each word keeps one sense.
pub fn categories_from_lexicon(lexicon: &BTreeMap<String, Vec<String>>) -> Vec<WordCategory> {
    lexicon
        .iter()
        .enumerate()
        .map(|(i, (name, words))| WordCategory {
            category_id: i as i64,
            name: Some(name.clone()),
            members: words
                .iter()
                .map(|w| SenseId {
                    word: w.clone(),
                    sense: 0,
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub word: String,
    pub sense: usize,
    pub category: i64,
    pub tag: String,
}

pub type TaggedSentence = Vec<TaggedToken>;

/// Annotates every token with its sense and category.
///
/// A token's sense comes from the sense model's recorded assignment for
/// that occurrence, else from the nearest centroid to the occurrence's
/// matrix row when `matrix` is given, else sense 0. Words without a sense
/// model have a single sense. Senses outside every category are tagged
/// `-1`.
pub fn category_tag_corpus(
    corpus: &[TokenSequence],
    senses: &SenseInventory,
    categories: &[WordCategory],
    matrix: Option<&ProbMatrix>,
) -> Vec<TaggedSentence> {
    let mut of_sense: HashMap<(&str, usize), &WordCategory> = HashMap::new();
    for c in categories.iter().filter(|c| c.category_id != NOISE) {
        for m in &c.members {
            of_sense.insert((m.word.as_str(), m.sense), c);
        }
    }
    let mut rows: HashMap<(usize, usize), usize> = HashMap::new();
    if let Some(m) = matrix {
        for (i, row) in m.rows().iter().enumerate() {
            for o in &row.occurrences {
                rows.insert((o.sentence_id, o.position), i);
            }
        }
    }
    corpus
        .iter()
        .enumerate()
        .map(|(sid, sentence)| {
            sentence
                .tokens()
                .iter()
                .enumerate()
                .map(|(pos, word)| {
                    let sense = match senses.get(word) {
                        Some(model) if model.n_senses() > 1 => model.sense_of(sid, pos).unwrap_or_else(|| {
                            match (matrix, rows.get(&(sid, pos))) {
                                (Some(m), Some(&row)) => model.nearest_sense(&m.row_direction(row)),
                                _ => 0,
                            }
                        }),
                        _ => 0,
                    };
                    let (category, tag) = match of_sense.get(&(word.as_str(), sense)) {
                        Some(c) => (c.category_id, c.label()),
                        None => (NOISE, category_label(NOISE, None)),
                    };
                    TaggedToken {
                        word: word.clone(),
                        sense,
                        category,
                        tag,
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmatrix::{expand_corpus, BlankedSentence};

    fn rows(n: usize) -> Vec<BlankedSentence> {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        expand_corpus(&[TokenSequence::new(words).unwrap()])
    }

    fn sense(word: &str) -> SenseId {
        SenseId {
            word: word.into(),
            sense: 0,
        }
    }

    #[test]
    fn identical_columns_form_one_category() {
        let r = rows(3);
        let cols: Vec<SenseId> = ["a", "b", "c", "d"].iter().map(|w| sense(w)).collect();
        let cells = (0..12).map(|p| Some(-((p % 3) as f64))).collect();
        let m = SenseMatrix::from_parts(r, cols, cells).unwrap();
        let cats = cluster_categories(&m, &CategoryConfig::default()).unwrap();
        assert_eq!(cats.len(), 2);
        assert!(cats[0].members.is_empty());
        assert_eq!(cats[1].members.len(), 4);
    }

    #[test]
    fn one_column_is_an_error() {
        let m = SenseMatrix::from_parts(rows(2), vec![sense("a")], vec![Some(-1.0), Some(-2.0)]).unwrap();
        assert!(matches!(
            cluster_categories(&m, &CategoryConfig::default()),
            Err(CategoryError::TooFewColumns(1))
        ));
    }

    #[test]
    fn listing_format() {
        let cats = vec![
            WordCategory { category_id: -1, name: None, members: vec![sense("fat"), SenseId { word: "fat".into(), sense: 1 }] },
            WordCategory { category_id: 0, name: None, members: vec![sense("the"), sense("my"), sense("his")] },
        ];
        assert_eq!(listing(&cats), "Cluster #-1: [fat, fat, ]\nCluster #0: [the, my, his, ]\n");
    }

    #[test]
    fn single_category_tags_everything_alike() {
        let lex: BTreeMap<String, Vec<String>> =
            [("all".to_string(), vec!["a".to_string(), "b".to_string()])].into_iter().collect();
        let cats = categories_from_lexicon(&lex);
        let corpus = vec![TokenSequence::parse("a b a").unwrap()];
        let tagged = category_tag_corpus(&corpus, &SenseInventory::default(), &cats, None);
        assert!(tagged[0].iter().all(|t| t.tag == "all" && t.category == 0));
    }

    #[test]
    fn unknown_words_are_noise() {
        let tagged = category_tag_corpus(
            &[TokenSequence::parse("zz").unwrap()],
            &SenseInventory::default(),
            &[],
            None,
        );
        assert_eq!(tagged[0][0].category, NOISE);
    }
}
