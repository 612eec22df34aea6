//! Word sense induction.
//!
//! Each corpus occurrence of a word is represented by the matrix row of the
//! sentence with that occurrence blanked out. The rows of one word are
//! clustered with spherical k-means; the clusters are its senses.

mod f1;
mod kmeans;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::word_counts;
use crate::oracle::TokenSequence;
use crate::probmatrix::ProbMatrix;
use crate::seed::rng_for;
use crate::vector::normalized;

pub use f1::{alignment_counts, wsd_f1, F1Counts};
pub use kmeans::{nearest_centroid, objective, KMeansFit, SphericalKMeans};

#[derive(Debug, Error)]
pub enum WsdError {
    #[error("word {0:?} does not occur in the corpus")]
    WordAbsent(String),
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("{assigned} assignments but {gold} gold labels")]
    LabelMismatch { assigned: usize, gold: usize },
    #[error("too many labels to align ({0})")]
    TooManyLabels(usize),
    #[error("filter fraction must be in [0, 1), got {0}")]
    BadFraction(f64),
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordInstance {
    pub word: String,
    pub sentence_id: usize,
    pub position: usize,
    pub row_index: usize,
}

/// One occurrence per entry, in corpus order.
pub fn collect_instances(m: &ProbMatrix, word: &str) -> Result<Vec<WordInstance>, WsdError> {
    let mut out: Vec<WordInstance> = m
        .rows()
        .iter()
        .enumerate()
        .flat_map(|(row_index, row)| {
            row.occurrences
                .iter()
                .filter(|o| o.word == word)
                .map(move |o| WordInstance {
                    word: o.word.clone(),
                    sentence_id: o.sentence_id,
                    position: o.position,
                    row_index,
                })
        })
        .collect();
    if out.is_empty() {
        return Err(WsdError::WordAbsent(word.to_string()));
    }
    out.sort_by_key(|i| (i.sentence_id, i.position));
    Ok(out)
}

/// The `ceil(fraction * |V|)` most frequent words; ties by word.
pub fn frequency_filter(corpus: &[TokenSequence], fraction: f64) -> Result<BTreeSet<String>, WsdError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(WsdError::BadFraction(fraction));
    }
    let counts = word_counts(corpus);
    let take = (fraction * counts.len() as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    Ok(ranked.into_iter().take(take).map(|(w, _)| w.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSense {
    pub sentence_id: usize,
    pub position: usize,
    pub sense: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseModel {
    pub word: String,
    /// Unit vectors over the vocabulary axis, one per sense.
    pub centroids: Vec<Vec<f64>>,
    pub instance_assignments: Vec<InstanceSense>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Set when more senses were requested than distinct instance vectors
    /// allowed.
    #[serde(default)]
    pub degenerate: bool,
}

impl SenseModel {
    pub fn single(word: &str, centroid: Vec<f64>) -> Self {
        SenseModel::from_centroids(word, vec![centroid])
    }

    pub fn from_centroids(word: &str, centroids: Vec<Vec<f64>>) -> Self {
        SenseModel {
            word: word.to_string(),
            centroids,
            instance_assignments: Vec::new(),
            seed: None,
            degenerate: false,
        }
    }

    pub fn n_senses(&self) -> usize {
        self.centroids.len()
    }

    pub fn nearest_sense(&self, v: &[f64]) -> usize {
        nearest_centroid(&self.centroids, v)
    }

    pub fn sense_of(&self, sentence_id: usize, position: usize) -> Option<usize> {
        self.instance_assignments
            .iter()
            .find(|a| a.sentence_id == sentence_id && a.position == position)
            .map(|a| a.sense)
    }

    /// Assignments as a plain label list in instance order.
    pub fn labels(&self) -> Vec<usize> {
        self.instance_assignments.iter().map(|a| a.sense).collect()
    }
}

/// Sense models keyed by word.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SenseInventory(BTreeMap<String, SenseModel>);

impl SenseInventory {
    pub fn get(&self, word: &str) -> Option<&SenseModel> {
        self.0.get(word)
    }

    pub fn insert(&mut self, model: SenseModel) {
        self.0.insert(model.word.clone(), model);
    }

    pub fn iter(&self) -> impl Iterator<Item = &SenseModel> {
        self.0.values()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_senses(&self) -> usize {
        self.iter().map(SenseModel::n_senses).sum()
    }
}

impl FromIterator<SenseModel> for SenseInventory {
    fn from_iter<I: IntoIterator<Item = SenseModel>>(iter: I) -> Self {
        let mut inv = SenseInventory::default();
        for m in iter {
            inv.insert(m);
        }
        inv
    }
}

fn instance_vectors(m: &ProbMatrix, instances: &[WordInstance]) -> Vec<Vec<f64>> {
    instances.iter().map(|i| m.row_direction(i.row_index)).collect()
}

fn assignments(instances: &[WordInstance], labels: &[usize]) -> Vec<InstanceSense> {
    instances
        .iter()
        .zip(labels)
        .map(|(i, &sense)| InstanceSense {
            sentence_id: i.sentence_id,
            position: i.position,
            sense,
        })
        .collect()
}

/// One sense whose centroid is the normalized mean of all instance rows.
pub fn single_sense(m: &ProbMatrix, instances: &[WordInstance]) -> SenseModel {
    let vectors = instance_vectors(m, instances);
    let dim = m.n_cols();
    let mut sum = vec![0.0; dim];
    for v in &vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let centroid = normalized(&sum).unwrap_or_else(|| vec![1.0 / (dim as f64).sqrt(); dim]);
    let word = instances.first().map_or("", |i| i.word.as_str());
    let mut model = SenseModel::single(word, centroid);
    model.instance_assignments = assignments(instances, &vec![0; instances.len()]);
    model
}

/// Spherical k-means over the instance rows of one word.
///
/// With fewer distinct instance vectors than `k`, each distinct vector
/// becomes its own sense; identical vectors with `k > 1` give one sense and
/// set `degenerate`.
pub fn cluster_senses(
    m: &ProbMatrix,
    instances: &[WordInstance],
    kmeans: &SphericalKMeans,
    seed: u64,
) -> Result<SenseModel, WsdError> {
    if kmeans.k == 0 {
        return Err(WsdError::ZeroK);
    }
    let word = instances
        .first()
        .map(|i| i.word.clone())
        .ok_or(WsdError::EmptyEvaluation)?;
    if kmeans.k == 1 {
        let mut model = single_sense(m, instances);
        model.seed = Some(seed);
        return Ok(model);
    }
    let vectors = instance_vectors(m, instances);
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for v in &vectors {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    let mut model = if distinct.len() <= kmeans.k {
        let labels: Vec<usize> = vectors
            .iter()
            .map(|v| distinct.iter().position(|d| *d == v).expect("listed"))
            .collect();
        let mut model = SenseModel::from_centroids(&word, distinct.iter().map(|d| (*d).clone()).collect());
        model.instance_assignments = assignments(instances, &labels);
        model.degenerate = distinct.len() == 1;
        if model.degenerate && instances.len() > 1 {
            log::warn!("all instances of {word:?} are identical; keeping one sense");
        }
        model
    } else {
        let mut rng = rng_for(seed, &word);
        let fit = kmeans.fit(&vectors, &mut rng);
        let mut model = SenseModel::from_centroids(&word, fit.centroids);
        model.instance_assignments = assignments(instances, &fit.labels);
        model
    };
    model.seed = Some(seed);
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WsdConfig {
    pub k: usize,
    /// Overrides of `k` for single words.
    pub per_word_k: BTreeMap<String, usize>,
    pub filter_fraction: f64,
    pub n_init: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for WsdConfig {
    fn default() -> Self {
        WsdConfig {
            k: 2,
            per_word_k: BTreeMap::new(),
            filter_fraction: 0.10,
            n_init: 10,
            max_iters: 100,
            seed: 0,
        }
    }
}

/// Sense models for every column word of `m`. Frequency-filtered words keep
/// a single sense; the rest are clustered independently in parallel.
pub fn induce_senses(
    m: &ProbMatrix,
    corpus: &[TokenSequence],
    config: &WsdConfig,
) -> Result<SenseInventory, WsdError> {
    let exempt = frequency_filter(corpus, config.filter_fraction)?;
    let models: Result<Vec<SenseModel>, WsdError> = m
        .columns()
        .par_iter()
        .map(|word| {
            let instances = match collect_instances(m, word) {
                Ok(i) => i,
                Err(WsdError::WordAbsent(_)) => {
                    let dim = m.n_cols();
                    return Ok(SenseModel::single(word, vec![1.0 / (dim as f64).sqrt(); dim]));
                }
                Err(e) => return Err(e),
            };
            if exempt.contains(word) {
                return Ok(single_sense(m, &instances));
            }
            let kmeans = SphericalKMeans {
                k: config.per_word_k.get(word).copied().unwrap_or(config.k),
                n_init: config.n_init,
                max_iters: config.max_iters,
            };
            cluster_senses(m, &instances, &kmeans, config.seed)
        })
        .collect();
    Ok(models?.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocabulary;
    use crate::oracle::train_ngram_oracle;
    use crate::probmatrix::{expand_corpus, fill_matrix};

    fn corpus(lines: &[&str]) -> Vec<TokenSequence> {
        lines.iter().map(|l| TokenSequence::parse(l).unwrap()).collect()
    }

    fn matrix(c: &[TokenSequence]) -> ProbMatrix {
        let oracle = train_ngram_oracle(c, 2, 0.1).unwrap();
        fill_matrix(expand_corpus(c), vocabulary(c), &oracle).unwrap()
    }

    #[test]
    fn instances_follow_corpus_frequency() {
        let c = corpus(&["a b a", "b c", "a b a"]);
        let m = matrix(&c);
        let a = collect_instances(&m, "a").unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(collect_instances(&m, "c").unwrap().len(), 1);
        for i in &a {
            let row = &m.rows()[i.row_index];
            assert_eq!(row.blank_position, i.position);
            assert_eq!(c[i.sentence_id].tokens()[i.position], "a");
        }
        assert!(matches!(collect_instances(&m, "zz"), Err(WsdError::WordAbsent(_))));
    }

    #[test]
    fn frequency_filter_counts_and_ties() {
        let c = corpus(&["a b c d e f g h i j", "a b c", "a"]);
        assert!(frequency_filter(&c, 0.0).unwrap().is_empty());
        let top: Vec<_> = frequency_filter(&c, 0.25).unwrap().into_iter().collect();
        // ceil(2.5) = 3: a (3), then b and c (2 each).
        assert_eq!(top, vec!["a", "b", "c"]);
        assert!(frequency_filter(&c, 1.0).is_err());
    }

    #[test]
    fn ceil_of_a_tenth_of_146_is_15() {
        let words: Vec<String> = (0..146).map(|i| format!("w{i:03}")).collect();
        let c = vec![TokenSequence::new(words).unwrap()];
        assert_eq!(frequency_filter(&c, 0.10).unwrap().len(), 15);
        let words: Vec<String> = (0..150).map(|i| format!("w{i:03}")).collect();
        let c = vec![TokenSequence::new(words).unwrap()];
        assert_eq!(frequency_filter(&c, 0.10).unwrap().len(), 15);
    }

    #[test]
    fn identical_instances_are_degenerate() {
        let c = corpus(&["x a y", "x a y"]);
        let m = matrix(&c);
        let inst = collect_instances(&m, "a").unwrap();
        let model = cluster_senses(&m, &inst, &SphericalKMeans::default(), 1).unwrap();
        assert_eq!(model.n_senses(), 1);
        assert!(model.degenerate);
        assert_eq!(model.labels(), vec![0, 0]);
    }

    #[test]
    fn k_one_gives_normalized_mean() {
        let c = corpus(&["x a y", "p a q"]);
        let m = matrix(&c);
        let inst = collect_instances(&m, "a").unwrap();
        let km = SphericalKMeans { k: 1, ..Default::default() };
        let model = cluster_senses(&m, &inst, &km, 1).unwrap();
        let mean: Vec<f64> = (0..m.n_cols())
            .map(|j| m.row_direction(inst[0].row_index)[j] + m.row_direction(inst[1].row_index)[j])
            .collect();
        let expected = normalized(&mean).unwrap();
        for (a, b) in model.centroids[0].iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exempt_words_get_one_sense() {
        let c = corpus(&["the x a", "the y b", "the x b", "the z a"]);
        let m = matrix(&c);
        let cfg = WsdConfig { filter_fraction: 0.1, ..Default::default() };
        let inv = induce_senses(&m, &c, &cfg).unwrap();
        assert_eq!(inv.get("the").unwrap().n_senses(), 1);
        assert_eq!(inv.len(), m.n_cols());
    }

    #[test]
    fn sense_model_json_round_trip() {
        let c = corpus(&["x a y", "p a q", "x a q"]);
        let m = matrix(&c);
        let inv = induce_senses(&m, &c, &WsdConfig::default()).unwrap();
        let json = serde_json::to_string(&inv).unwrap();
        let back: SenseInventory = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inv);
        assert!(json.contains("\"sentence_id\""));
    }
}
