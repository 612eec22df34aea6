//! The six-word rule evaluation experiment and its bundled data.
//!
//! A gold grammar over six categories generates a training corpus for a
//! trigram oracle. Six spurious rules are then added, and every one of the
//! 21 rules is evaluated against its mutation inside the full grammar.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{generate_seeded, GenerateConfig, GenerateError, Grammar, Rule};
use crate::induction::{evaluate_rule, EvaluationReport, InductionConfig, InductionError, Verdict};
use crate::oracle::{train_ngram_oracle, NgramError, NgramOracleModel, TokenSequence};

pub const GOLD_DICT: &str = include_str!("../data/gold.dict");
pub const SPURIOUS_DICT: &str = include_str!("../data/spurious.dict");
pub const GOLD_LEXICON: &str = include_str!("../data/gold_lexicon.json");
pub const NOUN_PHRASE_DICT: &str = include_str!("../data/poc.dict");
pub const CATEGORY_CORPUS: &str = include_str!("../data/category_corpus.txt");

pub fn gold_lexicon() -> BTreeMap<String, Vec<String>> {
    serde_json::from_str(GOLD_LEXICON).expect("bundled lexicon is valid")
}

pub fn gold_grammar() -> Grammar {
    Grammar::parse(GOLD_DICT)
        .expect("bundled grammar is valid")
        .with_lexicon(gold_lexicon())
}

pub fn spurious_rules() -> Vec<Rule> {
    Grammar::parse(SPURIOUS_DICT)
        .expect("bundled grammar is valid")
        .single_rules()
}

/// Gold rules plus the spurious ones.
pub fn full_grammar() -> Grammar {
    let mut g = gold_grammar();
    for r in spurious_rules() {
        g.add_rule(&r);
    }
    g
}

/// The word-level grammar for "the small kids play football".
pub fn noun_phrase_grammar() -> Grammar {
    Grammar::parse(NOUN_PHRASE_DICT).expect("bundled grammar is valid")
}

/// The 16-sentence corpus used for sense and category experiments.
pub fn category_corpus() -> Vec<TokenSequence> {
    CATEGORY_CORPUS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| TokenSequence::parse(l).expect("bundled corpus is valid"))
        .collect()
}

#[derive(Debug, Error)]
pub enum PocError {
    #[error("generating the training corpus failed: {0}")]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Ngram(#[from] NgramError),
    #[error(transparent)]
    Induction(#[from] InductionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PocConfig {
    pub corpus_sentences: usize,
    pub order: usize,
    pub smoothing_k: f64,
    pub induction: InductionConfig,
}

impl Default for PocConfig {
    fn default() -> Self {
        PocConfig {
            corpus_sentences: 5000,
            order: 3,
            smoothing_k: 0.1,
            induction: InductionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocRule {
    pub spurious: bool,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocReport {
    pub seed: u64,
    pub corpus_sentences: usize,
    pub rules: Vec<PocRule>,
    pub spurious_total: usize,
    pub spurious_rejected: usize,
    pub correct_total: usize,
    pub correct_rejected: usize,
    pub skipped: usize,
}

impl fmt::Display for PocReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            let margin = r.report.margin.map_or_else(|| "n/a".to_string(), |m| format!("{m:+.3}"));
            writeln!(
                f,
                "{:<8} {:<9} margin {:>7}  {}",
                format!("{:?}", r.report.verdict).to_lowercase(),
                if r.spurious { "spurious" } else { "correct" },
                margin,
                r.report.rule
            )?;
        }
        writeln!(f, "spurious rejected: {}/{}", self.spurious_rejected, self.spurious_total)?;
        writeln!(f, "correct rejected: {}/{}", self.correct_rejected, self.correct_total)?;
        write!(f, "skipped: {}", self.skipped)
    }
}

/// Sentences generated from the gold grammar.
pub fn gold_corpus(count: usize, seed: u64) -> Result<Vec<TokenSequence>, GenerateError> {
    generate_seeded(&gold_grammar(), None, &GenerateConfig::default(), count, seed, "poc corpus")
        .into_iter()
        .map(|g| g.map(|g| g.sentence))
        .collect()
}

pub fn train_poc_oracle(config: &PocConfig) -> Result<NgramOracleModel, PocError> {
    let corpus = gold_corpus(config.corpus_sentences, config.induction.seed)?;
    Ok(train_ngram_oracle(&corpus, config.order, config.smoothing_k)?)
}

/// Evaluates all 21 rules of the full grammar.
pub fn run_poc(config: &PocConfig) -> Result<PocReport, PocError> {
    let oracle = train_poc_oracle(config)?;
    run_poc_with(config, &oracle)
}

pub fn run_poc_with(config: &PocConfig, oracle: &NgramOracleModel) -> Result<PocReport, PocError> {
    let full = full_grammar();
    let spurious = spurious_rules();
    let gold = gold_grammar();
    let mut candidates: Vec<(Rule, bool)> = gold.single_rules().into_iter().map(|r| (r, false)).collect();
    candidates.extend(spurious.into_iter().map(|r| (r, true)));
    let rules = candidates
        .par_iter()
        .map(|(rule, spurious)| {
            evaluate_rule(rule, &full, oracle, &config.induction).map(|report| PocRule {
                spurious: *spurious,
                report,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let count = |spurious: bool, verdict: Verdict| {
        rules
            .iter()
            .filter(|r| r.spurious == spurious && r.report.verdict == verdict)
            .count()
    };
    Ok(PocReport {
        seed: config.induction.seed,
        corpus_sentences: config.corpus_sentences,
        spurious_total: rules.iter().filter(|r| r.spurious).count(),
        spurious_rejected: count(true, Verdict::Reject),
        correct_total: rules.iter().filter(|r| !r.spurious).count(),
        correct_rejected: count(false, Verdict::Reject),
        skipped: rules.iter().filter(|r| r.report.verdict == Verdict::Skip).count(),
        rules,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse;

    #[test]
    fn bundled_data_loads() {
        let g = full_grammar();
        g.validate().unwrap();
        assert_eq!(gold_grammar().disjunct_count(), 15);
        assert_eq!(g.disjunct_count(), 21);
        assert_eq!(category_corpus().len(), 16);
        noun_phrase_grammar().validate().unwrap();
    }

    #[test]
    fn loop_sentence_needs_the_spurious_rules() {
        let s = TokenSequence::parse("kids eat the the small candy kids eat candy the small quickly quickly .").unwrap();
        assert!(parse(&s, &full_grammar()).is_ok());
        assert!(parse(&s, &gold_grammar()).is_err());
    }
}
