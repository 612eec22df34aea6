//! Candidate rule proposal and generate-and-score rule evaluation.
//!
//! A rule is judged by the sentences it licenses. Sentences generated with
//! the rule installed are scored by the oracle and compared with sentences
//! generated after the rule is mutated (mutation mode), or with a set of
//! reference sentences of matching length (reference mode).

mod propose;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::categories::TaggedSentence;
use crate::grammar::{generate, mutate_rule, GenerateConfig, Generated, Grammar, MutationError, Rule};
use crate::oracle::{sequence_score, OracleError, SequenceOracle, TokenSequence};
use crate::seed::rng_for;

pub use propose::{propose_rules, CandidateRule, ProposalConfig, Provenance};

#[derive(Debug, Error)]
pub enum InductionError {
    #[error("empty tagged corpus")]
    EmptyCorpus,
    #[error("empty reference set")]
    EmptyReferences,
    #[error("rule {rule} names owners missing from the grammar: {missing}")]
    Unattachable { rule: String, missing: String },
    #[error("samples per rule must be at least 1")]
    ZeroSamples,
    #[error("threshold must be finite and non-negative, got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluationMode {
    #[default]
    Mutation,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthNormalization {
    #[default]
    PerToken,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InductionConfig {
    pub samples_per_rule: usize,
    /// Decision threshold in nats (per token when normalized).
    pub threshold: f64,
    pub generation: GenerateConfig,
    pub seed: u64,
    pub mode: EvaluationMode,
    pub length_normalization: LengthNormalization,
    pub proposal: ProposalConfig,
}

impl Default for InductionConfig {
    fn default() -> Self {
        InductionConfig {
            samples_per_rule: 20,
            threshold: 0.2,
            generation: GenerateConfig::default(),
            seed: 0,
            mode: EvaluationMode::Mutation,
            length_normalization: LengthNormalization::PerToken,
            proposal: ProposalConfig::default(),
        }
    }
}

impl InductionConfig {
    fn check(&self) -> Result<(), InductionError> {
        if self.samples_per_rule == 0 {
            return Err(InductionError::ZeroSamples);
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(InductionError::BadThreshold(self.threshold));
        }
        Ok(())
    }

    fn normalize(&self, logprob: f64, len: usize) -> f64 {
        match self.length_normalization {
            LengthNormalization::PerToken => logprob / len as f64,
            LengthNormalization::None => logprob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub sentence: TokenSequence,
    pub combined_logprob: f64,
    /// The value compared against the threshold.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accept,
    Reject,
    /// Generation or mutation failed, so there is no evidence either way.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rule: String,
    pub mutated_rule: Option<String>,
    pub mode: EvaluationMode,
    pub samples_original: Vec<ScoredSample>,
    pub samples_mutated: Vec<ScoredSample>,
    pub samples_reference: Vec<ScoredSample>,
    pub original_mean: Option<f64>,
    pub comparison_mean: Option<f64>,
    /// Original mean minus mutated (or reference) mean.
    pub margin: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

impl EvaluationReport {
    fn skipped(rule: &Rule, mode: EvaluationMode, threshold: f64, reason: String) -> Self {
        EvaluationReport {
            rule: rule.to_string(),
            mutated_rule: None,
            mode,
            samples_original: Vec::new(),
            samples_mutated: Vec::new(),
            samples_reference: Vec::new(),
            original_mean: None,
            comparison_mean: None,
            margin: None,
            threshold,
            verdict: Verdict::Skip,
            warnings: Vec::new(),
            skip_reason: Some(reason),
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mutation-mode decision: accept when the original samples beat the
/// mutated ones by more than `threshold` on average.
pub fn mutation_verdict(original: &[f64], mutated: &[f64], threshold: f64) -> (f64, Verdict) {
    let margin = mean(original) - mean(mutated);
    let verdict = if margin > threshold { Verdict::Accept } else { Verdict::Reject };
    (margin, verdict)
}

/// Reference-mode decision: accept when the generated samples are no more
/// than `threshold` below the references on average.
pub fn reference_verdict(generated: &[f64], references: &[f64], threshold: f64) -> (f64, Verdict) {
    let margin = mean(generated) - mean(references);
    let verdict = if margin >= -threshold { Verdict::Accept } else { Verdict::Reject };
    (margin, verdict)
}

fn check_attachable(rule: &Rule, grammar: &Grammar) -> Result<(), InductionError> {
    let missing: Vec<&str> = rule
        .peers()
        .into_iter()
        .filter(|p| *p != rule.owner && grammar.rule(p).is_none())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(InductionError::Unattachable {
            rule: rule.to_string(),
            missing: missing.join(", "),
        })
    }
}

fn sample<O: SequenceOracle + ?Sized>(
    grammar: &Grammar,
    anchor: &Rule,
    oracle: &O,
    config: &InductionConfig,
    label: &str,
) -> Result<Result<Vec<ScoredSample>, String>, InductionError> {
    let mut rng = rng_for(config.seed, label);
    let mut out = Vec::with_capacity(config.samples_per_rule);
    for _ in 0..config.samples_per_rule {
        let Generated { sentence, .. } = match generate(grammar, Some(anchor), &config.generation, &mut rng) {
            Ok(g) => g,
            Err(e) => return Ok(Err(format!("generation from {anchor} failed: {e}"))),
        };
        let combined = sequence_score(oracle, &sentence)?.combined_logprob;
        out.push(ScoredSample {
            score: config.normalize(combined, sentence.len()),
            combined_logprob: combined,
            sentence,
        });
    }
    Ok(Ok(out))
}

fn scores(samples: &[ScoredSample]) -> Vec<f64> {
    samples.iter().map(|s| s.score).collect()
}

/// Evaluates `rule` against its mutation. The rule is installed into a copy
/// of `grammar`; the caller's grammar is left untouched.
pub fn evaluate_rule<O: SequenceOracle + ?Sized>(
    rule: &Rule,
    grammar: &Grammar,
    oracle: &O,
    config: &InductionConfig,
) -> Result<EvaluationReport, InductionError> {
    config.check()?;
    let mut installed = grammar.clone();
    installed.add_rule(rule);
    check_attachable(rule, &installed)?;
    let mode = EvaluationMode::Mutation;
    let (mutated, mutated_grammar) = match mutate_rule(rule, &installed) {
        Ok(m) => m,
        Err(e) => return Ok(EvaluationReport::skipped(rule, mode, config.threshold, e.to_string())),
    };
    let original = match sample(&installed, rule, oracle, config, &format!("original {rule}"))? {
        Ok(s) => s,
        Err(reason) => return Ok(EvaluationReport::skipped(rule, mode, config.threshold, reason)),
    };
    let flipped = match sample(&mutated_grammar, &mutated, oracle, config, &format!("mutated {rule}"))? {
        Ok(s) => s,
        Err(reason) => return Ok(EvaluationReport::skipped(rule, mode, config.threshold, reason)),
    };
    let (a, b) = (scores(&original), scores(&flipped));
    let (margin, verdict) = mutation_verdict(&a, &b, config.threshold);
    Ok(EvaluationReport {
        rule: rule.to_string(),
        mutated_rule: Some(mutated.to_string()),
        mode,
        samples_original: original,
        samples_mutated: flipped,
        samples_reference: Vec::new(),
        original_mean: Some(mean(&a)),
        comparison_mean: Some(mean(&b)),
        margin: Some(margin),
        threshold: config.threshold,
        verdict,
        warnings: Vec::new(),
        skip_reason: None,
    })
}

/// Evaluates `rule` by comparing its generated sentences with reference
/// sentences of the same length. When no reference has a sample's length
/// the nearest length is used and a warning is recorded.
pub fn evaluate_against_references<O: SequenceOracle + ?Sized>(
    rule: &Rule,
    grammar: &Grammar,
    oracle: &O,
    references: &[TokenSequence],
    config: &InductionConfig,
) -> Result<EvaluationReport, InductionError> {
    config.check()?;
    if references.is_empty() {
        return Err(InductionError::EmptyReferences);
    }
    let mut installed = grammar.clone();
    installed.add_rule(rule);
    check_attachable(rule, &installed)?;
    let mode = EvaluationMode::Reference;
    let generated = match sample(&installed, rule, oracle, config, &format!("original {rule}"))? {
        Ok(s) => s,
        Err(reason) => return Ok(EvaluationReport::skipped(rule, mode, config.threshold, reason)),
    };

    let mut by_len: BTreeMap<usize, Vec<&TokenSequence>> = BTreeMap::new();
    for r in references {
        by_len.entry(r.len()).or_default().push(r);
    }
    let mut scored: HashMap<&TokenSequence, ScoredSample> = HashMap::new();
    let mut warnings = Vec::new();
    let mut per_sample = Vec::with_capacity(generated.len());
    let mut used: BTreeSet<&TokenSequence> = BTreeSet::new();
    for g in &generated {
        let len = g.sentence.len();
        let nearest = *by_len
            .keys()
            .min_by_key(|&&l| (l.abs_diff(len), l))
            .expect("references are non-empty");
        if nearest != len {
            warnings.push(format!(
                "no reference of length {len} for {:?}; used length {nearest}",
                g.sentence.to_string()
            ));
        }
        let mut total = 0.0;
        for &r in &by_len[&nearest] {
            if !scored.contains_key(r) {
                let combined = sequence_score(oracle, r)?.combined_logprob;
                scored.insert(
                    r,
                    ScoredSample {
                        sentence: r.clone(),
                        combined_logprob: combined,
                        score: config.normalize(combined, r.len()),
                    },
                );
            }
            total += scored[r].score;
            used.insert(r);
        }
        per_sample.push(total / by_len[&nearest].len() as f64);
    }
    let a = scores(&generated);
    let (margin, verdict) = reference_verdict(&a, &per_sample, config.threshold);
    Ok(EvaluationReport {
        rule: rule.to_string(),
        mutated_rule: None,
        mode,
        samples_original: generated,
        samples_mutated: Vec::new(),
        samples_reference: used.into_iter().map(|r| scored[r].clone()).collect(),
        original_mean: Some(mean(&a)),
        comparison_mean: Some(mean(&per_sample)),
        margin: Some(margin),
        threshold: config.threshold,
        verdict,
        warnings,
        skip_reason: None,
    })
}

#[derive(Debug, Clone)]
pub struct Induction {
    pub grammar: Grammar,
    pub candidates: Vec<CandidateRule>,
    pub reports: Vec<EvaluationReport>,
}

/// Lexicon mapping each tag to the words carrying it, in first-seen order.
pub fn tag_lexicon(tagged: &[TaggedSentence]) -> BTreeMap<String, Vec<String>> {
    let mut lexicon: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for token in tagged.iter().flatten() {
        let words = lexicon.entry(token.tag.clone()).or_default();
        if !words.contains(&token.word) {
            words.push(token.word.clone());
        }
    }
    lexicon
}

/// Proposes candidates from the tagged corpus and evaluates them in support
/// order, installing each accepted rule with its counterparts before the
/// next one is evaluated. In reference mode the corpus sentences are the
/// references.
pub fn induce<O: SequenceOracle + ?Sized>(
    tagged: &[TaggedSentence],
    oracle: &O,
    config: &InductionConfig,
    terminator: Option<&str>,
) -> Result<Induction, InductionError> {
    config.check()?;
    let candidates = propose_rules(tagged, &config.proposal)?;
    let references: Vec<TokenSequence> = tagged
        .iter()
        .filter_map(|s| TokenSequence::new(s.iter().map(|t| t.word.as_str())).ok())
        .collect();
    let mut grammar = Grammar::new()
        .with_lexicon(tag_lexicon(tagged))
        .with_terminator(terminator.map(str::to_string));
    let mut reports = Vec::with_capacity(candidates.len());
    for candidate in &candidates {
        let mut trial = grammar.clone();
        for c in &candidate.counterparts {
            trial.add_rule(c);
        }
        let outcome = match config.mode {
            EvaluationMode::Mutation => evaluate_rule(&candidate.rule, &trial, oracle, config),
            EvaluationMode::Reference => {
                evaluate_against_references(&candidate.rule, &trial, oracle, &references, config)
            }
        };
        let report = match outcome {
            Ok(r) => r,
            Err(InductionError::Oracle(e)) => return Err(InductionError::Oracle(e)),
            Err(e) => EvaluationReport::skipped(&candidate.rule, config.mode, config.threshold, e.to_string()),
        };
        if report.verdict == Verdict::Accept {
            grammar = trial;
            grammar.add_rule(&candidate.rule);
        }
        reports.push(report);
    }
    Ok(Induction {
        grammar,
        candidates,
        reports,
    })
}

/// Writes one JSON report per line.
pub fn write_reports<W: Write>(reports: &[EvaluationReport], mut out: W) -> io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{MaskedQuery, train_ngram_oracle};

    struct Flat;

    impl SequenceOracle for Flat {
        fn masked_logprob(&self, _: &MaskedQuery, _: &str) -> Result<f64, OracleError> {
            Ok((0.25f64).ln())
        }
    }

    fn seqs(lines: &[&str]) -> Vec<TokenSequence> {
        lines.iter().map(|l| TokenSequence::parse(l).unwrap()).collect()
    }

    const NP: &str = "the: kids+; small: kids+; kids: small- & the-;";

    #[test]
    fn verdict_rules() {
        assert_eq!(mutation_verdict(&[-1.0], &[-1.5], 0.2).1, Verdict::Accept);
        assert_eq!(mutation_verdict(&[-1.0], &[-1.2], 0.2).1, Verdict::Reject);
        assert_eq!(reference_verdict(&[-1.2], &[-1.0], 0.2).1, Verdict::Accept);
        assert_eq!(reference_verdict(&[-1.3], &[-1.0], 0.2).1, Verdict::Reject);
    }

    #[test]
    fn flat_oracle_gives_zero_margin_and_reject() {
        let g = Grammar::parse(NP).unwrap();
        let rule = Rule::parse("kids: small- & the-").unwrap();
        let report = evaluate_rule(&rule, &g, &Flat, &InductionConfig::default()).unwrap();
        assert_eq!(report.margin, Some(0.0));
        assert_eq!(report.verdict, Verdict::Reject);
        assert_eq!(report.samples_original.len(), 20);
        assert_eq!(report.samples_mutated.len(), 20);
        assert_eq!(report.mutated_rule.as_deref(), Some("kids: small+ & the+"));
    }

    #[test]
    fn trained_oracle_prefers_the_original_order() {
        let g = Grammar::parse(NP).unwrap();
        let oracle = train_ngram_oracle(&seqs(&["the small kids"; 10]), 2, 0.1).unwrap();
        let rule = Rule::parse("kids: small- & the-").unwrap();
        let report = evaluate_rule(&rule, &g, &oracle, &InductionConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Accept);
        assert_eq!(report.samples_original[0].sentence.to_string(), "the small kids");
        assert_eq!(report.samples_mutated[0].sentence.to_string(), "kids small the");
        assert_eq!(g, Grammar::parse(NP).unwrap());
    }

    #[test]
    fn generation_failure_skips() {
        let g = Grammar::parse("a: a+;").unwrap();
        let report = evaluate_rule(&Rule::parse("a: a+").unwrap(), &g, &Flat, &InductionConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Skip);
        assert!(report.skip_reason.is_some());
    }

    #[test]
    fn references_equal_to_generated_accept() {
        let g = Grammar::parse(NP).unwrap();
        let rule = Rule::parse("kids: small- & the-").unwrap();
        let oracle = train_ngram_oracle(&seqs(&["the small kids"]), 2, 0.1).unwrap();
        let config = InductionConfig { threshold: 0.0, ..Default::default() };
        let report = evaluate_against_references(&rule, &g, &oracle, &seqs(&["the small kids"]), &config).unwrap();
        assert_eq!(report.margin, Some(0.0));
        assert_eq!(report.verdict, Verdict::Accept);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn reference_length_mismatch_warns() {
        let g = Grammar::parse(NP).unwrap();
        let rule = Rule::parse("kids: small- & the-").unwrap();
        let config = InductionConfig {
            length_normalization: LengthNormalization::None,
            samples_per_rule: 2,
            ..Default::default()
        };
        let refs = seqs(&["a b c d e f g h"]);
        let report = evaluate_against_references(&rule, &g, &Flat, &refs, &config).unwrap();
        assert_eq!(report.warnings.len(), 2);
        assert!(matches!(
            evaluate_against_references(&rule, &g, &Flat, &[], &config),
            Err(InductionError::EmptyReferences)
        ));
    }

    #[test]
    fn unattachable_rules_are_errors() {
        let g = Grammar::parse(NP).unwrap();
        let rule = Rule::parse("kids: eat+").unwrap();
        assert!(matches!(
            evaluate_rule(&rule, &g, &Flat, &InductionConfig::default()),
            Err(InductionError::Unattachable { .. })
        ));
    }

    #[test]
    fn reports_are_json_lines() {
        let g = Grammar::parse(NP).unwrap();
        let rule = Rule::parse("kids: small- & the-").unwrap();
        let config = InductionConfig { samples_per_rule: 1, ..Default::default() };
        let report = evaluate_rule(&rule, &g, &Flat, &config).unwrap();
        let mut buf = Vec::new();
        write_reports(&[report.clone(), report.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: EvaluationReport = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, report);
    }
}
