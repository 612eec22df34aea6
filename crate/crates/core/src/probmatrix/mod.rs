//! The word by blanked-sentence matrix and its sense-resolved form.
//!
//! Every corpus sentence of length N is expanded into N blanked sentences,
//! one per position. Cell (i, j) holds the combined log-probability of row i
//! with its blank filled by vocabulary word j. After sense induction each
//! word column is split into one column per sense; a cell value moves to the
//! sense whose centroid is nearest the row, other sense columns stay EMPTY.

mod io;

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{sequence_score, OracleError, SequenceOracle, TokenSequence, BLANK};
use crate::vector::{dot, prob_direction};
use crate::wsd::SenseInventory;

pub use io::{MatrixFileError, MatrixTable};

/// One corpus token that was blanked out to produce a row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Occurrence {
    pub sentence_id: usize,
    pub position: usize,
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlankedSentence {
    pub source_sentence_id: usize,
    pub tokens: Vec<String>,
    pub blank_position: usize,
    /// Every corpus occurrence that produced this row, in corpus order. The
    /// first one is the source.
    pub occurrences: Vec<Occurrence>,
}

impl BlankedSentence {
    /// The sentence with its blank replaced by `word`.
    pub fn fill(&self, word: &str) -> TokenSequence {
        let mut tokens = self.tokens.clone();
        tokens[self.blank_position] = word.to_string();
        TokenSequence::new(tokens).expect("filled blank yields a valid sentence")
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for BlankedSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

/// Expands each sentence into one row per position, dropping duplicates
/// (later duplicates only add their occurrence to the first row).
pub fn expand_corpus(corpus: &[TokenSequence]) -> Vec<BlankedSentence> {
    let mut rows: Vec<BlankedSentence> = Vec::new();
    let mut index: HashMap<Vec<String>, usize> = HashMap::new();
    for (sentence_id, sentence) in corpus.iter().enumerate() {
        for (position, word) in sentence.tokens().iter().enumerate() {
            let mut tokens = sentence.tokens().to_vec();
            tokens[position] = BLANK.to_string();
            let occurrence = Occurrence {
                sentence_id,
                position,
                word: word.clone(),
            };
            match index.get(&tokens) {
                Some(&row) => rows[row].occurrences.push(occurrence),
                None => {
                    index.insert(tokens.clone(), rows.len());
                    rows.push(BlankedSentence {
                        source_sentence_id: sentence_id,
                        tokens,
                        blank_position: position,
                        occurrences: vec![occurrence],
                    });
                }
            }
        }
    }
    rows
}

/// Dense log-probability matrix, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    rows: Vec<BlankedSentence>,
    columns: Vec<String>,
    cells: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix needs at least one row and one column")]
    EmptyShape,
    #[error("non-finite score {value} for row {row}, column {column:?}")]
    NonFinite {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("no sense model for column word {0:?}")]
    MissingSenseModel(String),
    #[error("sense model for {word:?} has dimension {found}, matrix has {expected} columns")]
    DimensionMismatch {
        word: String,
        expected: usize,
        found: usize,
    },
    #[error("matrix rows do not match the corpus expansion: {0}")]
    RowMismatch(String),
}

/// Cells of fully scored rows, kept when a fill is interrupted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FillCheckpoint {
    pub completed: Vec<Option<Vec<f64>>>,
}

impl FillCheckpoint {
    pub fn completed_rows(&self) -> usize {
        self.completed.iter().filter(|r| r.is_some()).count()
    }
}

#[derive(Debug, Error)]
pub enum FillError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("oracle failed at row {row}, column {column:?} ({} rows complete): {source}", checkpoint.completed_rows())]
    Oracle {
        row: usize,
        column: String,
        source: OracleError,
        checkpoint: FillCheckpoint,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FillOptions {
    /// Worker threads; 0 uses the ambient rayon pool.
    pub jobs: usize,
}

pub fn fill_matrix<O: SequenceOracle + ?Sized>(
    rows: Vec<BlankedSentence>,
    vocabulary: Vec<String>,
    oracle: &O,
) -> Result<ProbMatrix, FillError> {
    fill_matrix_resume(rows, vocabulary, oracle, FillOptions::default(), FillCheckpoint::default())
}

/// Fills the matrix, reusing rows already present in `checkpoint`.
pub fn fill_matrix_resume<O: SequenceOracle + ?Sized>(
    rows: Vec<BlankedSentence>,
    vocabulary: Vec<String>,
    oracle: &O,
    options: FillOptions,
    checkpoint: FillCheckpoint,
) -> Result<ProbMatrix, FillError> {
    if rows.is_empty() || vocabulary.is_empty() {
        return Err(MatrixError::EmptyShape.into());
    }
    let mut prior = checkpoint.completed;
    prior.resize(rows.len(), None);

    let score_row = |(i, row): (usize, &BlankedSentence)| -> Result<Vec<f64>, (usize, OracleError)> {
        if let Some(done) = &prior[i] {
            return Ok(done.clone());
        }
        vocabulary
            .iter()
            .enumerate()
            .map(|(j, w)| {
                sequence_score(oracle, &row.fill(w))
                    .map(|s| s.combined_logprob)
                    .map_err(|e| (j, e))
            })
            .collect()
    };
    let run = || -> Vec<Result<Vec<f64>, (usize, OracleError)>> {
        rows.par_iter().enumerate().map(score_row).collect()
    };
    let results = if options.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run())
    } else {
        run()
    };

    let mut first_error = None;
    let mut completed = Vec::with_capacity(rows.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(values) => completed.push(Some(values)),
            Err((j, e)) => {
                if first_error.is_none() {
                    first_error = Some((i, j, e));
                }
                completed.push(None);
            }
        }
    }
    if let Some((row, j, source)) = first_error {
        return Err(FillError::Oracle {
            row,
            column: vocabulary[j].clone(),
            source,
            checkpoint: FillCheckpoint { completed },
        });
    }
    let by_row: Vec<Vec<f64>> = completed.into_iter().map(|r| r.expect("all rows complete")).collect();
    let mut cells = vec![0.0; rows.len() * vocabulary.len()];
    for (i, values) in by_row.iter().enumerate() {
        for (j, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(MatrixError::NonFinite {
                    row: i,
                    column: vocabulary[j].clone(),
                    value: v,
                }
                .into());
            }
            cells[j * rows.len() + i] = v;
        }
    }
    Ok(ProbMatrix {
        rows,
        columns: vocabulary,
        cells,
    })
}

impl ProbMatrix {
    pub fn from_parts(
        rows: Vec<BlankedSentence>,
        columns: Vec<String>,
        cells_column_major: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        if rows.is_empty() || columns.is_empty() || cells_column_major.len() != rows.len() * columns.len() {
            return Err(MatrixError::EmptyShape);
        }
        if let Some(p) = cells_column_major.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: p % rows.len(),
                column: columns[p / rows.len()].clone(),
                value: cells_column_major[p],
            });
        }
        Ok(ProbMatrix {
            rows,
            columns,
            cells: cells_column_major,
        })
    }

    pub fn rows(&self) -> &[BlankedSentence] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[col * self.rows.len() + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        let n = self.rows.len();
        &self.cells[col * n..(col + 1) * n]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.columns.len()).map(|j| self.get(row, j)).collect()
    }

    pub fn column_index(&self, word: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == word)
    }

    /// Unit probability-space direction of a row: the instance vector.
    pub fn row_direction(&self, row: usize) -> Vec<f64> {
        prob_direction(self.row(row).into_iter().map(Some))
    }
}

/// Column identifier of the sense-resolved matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SenseId {
    pub word: String,
    pub sense: usize,
}

impl fmt::Display for SenseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.word, self.sense)
    }
}

impl std::str::FromStr for SenseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (word, sense) = s
            .rsplit_once('#')
            .ok_or_else(|| format!("sense id {s:?} lacks '#'"))?;
        let sense = sense.parse().map_err(|_| format!("bad sense index in {s:?}"))?;
        Ok(SenseId {
            word: word.to_string(),
            sense,
        })
    }
}

/// Sense-resolved matrix; `None` cells are EMPTY. Column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SenseMatrix {
    rows: Vec<BlankedSentence>,
    columns: Vec<SenseId>,
    cells: Vec<Option<f64>>,
}

impl SenseMatrix {
    pub fn from_parts(
        rows: Vec<BlankedSentence>,
        columns: Vec<SenseId>,
        cells_column_major: Vec<Option<f64>>,
    ) -> Result<Self, MatrixError> {
        if rows.is_empty() || columns.is_empty() || cells_column_major.len() != rows.len() * columns.len() {
            return Err(MatrixError::EmptyShape);
        }
        Ok(SenseMatrix {
            rows,
            columns,
            cells: cells_column_major,
        })
    }

    pub fn rows(&self) -> &[BlankedSentence] {
        &self.rows
    }

    pub fn columns(&self) -> &[SenseId] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[col * self.rows.len() + row]
    }

    pub fn column(&self, col: usize) -> &[Option<f64>] {
        let n = self.rows.len();
        &self.cells[col * n..(col + 1) * n]
    }

    /// Unit probability-space direction of a sense column.
    pub fn column_direction(&self, col: usize) -> Vec<f64> {
        prob_direction(self.column(col).iter().copied())
    }
}

/// Splits every word column into its sense columns.
///
/// Monosemous words are copied; for a polysemous word each cell goes to the
/// sense whose centroid has the highest cosine with the row direction (ties
/// to the lowest sense index).
pub fn build_sense_matrix(m: &ProbMatrix, senses: &SenseInventory) -> Result<SenseMatrix, MatrixError> {
    let n = m.n_rows();
    let mut models = Vec::with_capacity(m.n_cols());
    for word in m.columns() {
        let model = senses
            .get(word)
            .ok_or_else(|| MatrixError::MissingSenseModel(word.clone()))?;
        if let Some(c) = model.centroids.iter().find(|c| c.len() != m.n_cols()) {
            return Err(MatrixError::DimensionMismatch {
                word: word.clone(),
                expected: m.n_cols(),
                found: c.len(),
            });
        }
        models.push(model);
    }
    let polysemous = models.iter().any(|model| model.n_senses() > 1);
    let directions: Vec<Vec<f64>> = if polysemous {
        (0..n).map(|i| m.row_direction(i)).collect()
    } else {
        Vec::new()
    };

    let mut columns = Vec::new();
    let mut cells = Vec::new();
    for (j, model) in models.iter().enumerate() {
        let word = &m.columns()[j];
        let k = model.n_senses();
        let start = cells.len();
        cells.resize(start + k * n, None);
        for i in 0..n {
            let sense = if k == 1 {
                0
            } else {
                nearest(&model.centroids, &directions[i])
            };
            cells[start + sense * n + i] = Some(m.get(i, j));
        }
        columns.extend((0..k).map(|sense| SenseId {
            word: word.clone(),
            sense,
        }));
    }
    Ok(SenseMatrix {
        rows: m.rows().to_vec(),
        columns,
        cells,
    })
}

pub(crate) fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (s, c) in centroids.iter().enumerate() {
        let sim = dot(c, v);
        if sim > best_sim {
            best_sim = sim;
            best = s;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{train_ngram_oracle, NgramOracleModel};
    use crate::wsd::SenseModel;

    fn corpus(lines: &[&str]) -> Vec<TokenSequence> {
        lines.iter().map(|l| TokenSequence::parse(l).unwrap()).collect()
    }

    #[test]
    fn expansion_of_two_tokens() {
        let rows = expand_corpus(&corpus(&["a b"]));
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].text(), format!("{BLANK} b"));
        assert_eq!(rows[1].text(), format!("a {BLANK}"));
        assert_eq!(rows[1].blank_position, 1);
    }

    #[test]
    fn expansion_merges_duplicates() {
        let c = corpus(&["the cat sat", "the dog sat", "the cat sat"]);
        let rows = expand_corpus(&c);
        // "the _ sat" is shared; the third sentence repeats the first.
        assert_eq!(rows.len(), 9 - 1 - 3);
        let shared = rows.iter().find(|r| r.blank_position == 1).unwrap();
        let words: Vec<_> = shared.occurrences.iter().map(|o| o.word.as_str()).collect();
        assert_eq!(words, vec!["cat", "dog", "cat"]);
        assert_eq!(expand_corpus(&c), rows);
    }

    fn toy_oracle() -> (Vec<TokenSequence>, NgramOracleModel) {
        let c = corpus(&["a b c", "b a", "c a b"]);
        let m = train_ngram_oracle(&c, 2, 0.1).unwrap();
        (c, m)
    }

    /// Bigram chain probability straight from the count tables.
    fn chain(m: &NgramOracleModel, s: &TokenSequence) -> f64 {
        let t = s.tokens();
        let mut f = 0.0;
        let mut prev = crate::oracle::BOUNDARY;
        for w in t {
            f += m.forward_prob(&[prev], w).unwrap().ln();
            prev = w;
        }
        let mut b = 0.0;
        let mut next = crate::oracle::BOUNDARY;
        for w in t.iter().rev() {
            b += m.backward_prob(&[next], w).unwrap().ln();
            next = w;
        }
        (f + b) / 2.0
    }

    #[test]
    fn cells_match_hand_chains() {
        let (c, oracle) = toy_oracle();
        let vocab = crate::corpus::vocabulary(&c);
        let rows = expand_corpus(&c);
        let m = fill_matrix(rows.clone(), vocab.clone(), &oracle).unwrap();
        assert_eq!(m.n_rows(), rows.len());
        for (i, row) in rows.iter().enumerate() {
            for (j, w) in vocab.iter().enumerate() {
                let expected = chain(&oracle, &row.fill(w));
                assert!((m.get(i, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_of_small_fill() {
        let (c, oracle) = toy_oracle();
        let rows = expand_corpus(&c)[..2].to_vec();
        let m = fill_matrix(rows, vec!["a".into(), "b".into(), "c".into()], &oracle).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (2, 3));
        assert!((0..2).all(|i| m.row(i).iter().all(|v| v.is_finite())));
    }

    #[test]
    fn parallel_fill_is_deterministic() {
        let (c, oracle) = toy_oracle();
        let vocab = crate::corpus::vocabulary(&c);
        let a = fill_matrix(expand_corpus(&c), vocab.clone(), &oracle).unwrap();
        let b = fill_matrix_resume(
            expand_corpus(&c),
            vocab,
            &oracle,
            FillOptions { jobs: 3 },
            FillCheckpoint::default(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    struct FailsOn(&'static str, NgramOracleModel);

    impl SequenceOracle for FailsOn {
        fn masked_logprob(&self, q: &crate::oracle::MaskedQuery, t: &str) -> Result<f64, OracleError> {
            if t == self.0 {
                return Err(OracleError::Unavailable("down".into()));
            }
            self.1.masked_logprob(q, t)
        }
    }

    #[test]
    fn oracle_failure_keeps_a_checkpoint() {
        let (c, oracle) = toy_oracle();
        let rows = expand_corpus(&c);
        // Rows whose fixed tokens avoid "c" complete only when no column is "c";
        // with "c" in the vocabulary every row fails.
        let failing = FailsOn("c", oracle.clone());
        let err = fill_matrix(rows.clone(), vec!["a".into(), "b".into(), "c".into()], &failing).unwrap_err();
        let FillError::Oracle { checkpoint, .. } = err else {
            panic!("expected oracle error")
        };
        assert_eq!(checkpoint.completed_rows(), 0);

        let partial = FillCheckpoint {
            completed: (0..rows.len())
                .map(|i| (i % 2 == 0).then(|| {
                    ["a", "b"].iter().map(|w| sequence_score(&oracle, &rows[i].fill(w)).unwrap().combined_logprob).collect()
                }))
                .collect(),
        };
        let failing = FailsOn("zzz", oracle.clone());
        let resumed = fill_matrix_resume(
            rows.clone(),
            vec!["a".into(), "b".into()],
            &failing,
            FillOptions::default(),
            partial,
        )
        .unwrap();
        let fresh = fill_matrix(rows, vec!["a".into(), "b".into()], &oracle).unwrap();
        assert_eq!(resumed, fresh);
    }

    fn single_sense(word: &str, dim: usize) -> SenseModel {
        SenseModel::single(word, vec![1.0 / (dim as f64).sqrt(); dim])
    }

    #[test]
    fn monosemous_columns_copy_verbatim() {
        let (c, oracle) = toy_oracle();
        let vocab = crate::corpus::vocabulary(&c);
        let m = fill_matrix(expand_corpus(&c), vocab.clone(), &oracle).unwrap();
        let inv: SenseInventory = vocab.iter().map(|w| single_sense(w, vocab.len())).collect();
        let s = build_sense_matrix(&m, &inv).unwrap();
        assert_eq!(s.n_cols(), m.n_cols());
        for j in 0..m.n_cols() {
            let copied: Vec<f64> = s.column(j).iter().map(|v| v.unwrap()).collect();
            assert_eq!(copied, m.column(j));
        }
    }

    #[test]
    fn two_senses_partition_the_column() {
        let (c, oracle) = toy_oracle();
        let vocab = crate::corpus::vocabulary(&c);
        let m = fill_matrix(expand_corpus(&c), vocab.clone(), &oracle).unwrap();
        let mut inv: SenseInventory = vocab.iter().map(|w| single_sense(w, vocab.len())).collect();
        let mut e0 = vec![0.0; vocab.len()];
        e0[0] = 1.0;
        let mut e1 = vec![0.0; vocab.len()];
        e1[1] = 1.0;
        inv.insert(SenseModel::from_centroids("a", vec![e0, e1]));
        let s = build_sense_matrix(&m, &inv).unwrap();
        assert_eq!(s.n_cols(), m.n_cols() + 1);
        let a0 = s.column(0);
        let a1 = s.column(1);
        for i in 0..m.n_rows() {
            assert!(a0[i].is_some() ^ a1[i].is_some());
            assert_eq!(a0[i].or(a1[i]), Some(m.get(i, 0)));
        }
        assert!(a0.iter().any(Option::is_some) && a1.iter().any(Option::is_some));
    }

    #[test]
    fn missing_sense_model_is_an_error() {
        let (c, oracle) = toy_oracle();
        let m = fill_matrix(expand_corpus(&c), vec!["a".into(), "b".into()], &oracle).unwrap();
        let inv: SenseInventory = [single_sense("a", 2)].into_iter().collect();
        assert!(matches!(
            build_sense_matrix(&m, &inv),
            Err(MatrixError::MissingSenseModel(w)) if w == "b"
        ));
    }
}
