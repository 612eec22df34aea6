//! Candidate rules from adjacent tags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::InductionError;
use crate::categories::{TaggedSentence, NOISE};
use crate::grammar::{Connector, Disjunct, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ProposedFromCorpus,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRule {
    pub rule: Rule,
    /// Rules on the peer owners that the candidate's connectors link to.
    pub counterparts: Vec<Rule>,
    pub provenance: Provenance,
    pub support: usize,
}

impl CandidateRule {
    pub fn user(rule: Rule) -> Self {
        let counterparts = rule
            .disjuncts
            .iter()
            .flat_map(|d| &d.connectors)
            .map(|c| {
                let back = Connector {
                    label: rule.owner.clone(),
                    direction: c.direction.flipped(),
                };
                Rule::single(&c.label, Disjunct::new(vec![back]))
            })
            .collect();
        CandidateRule {
            rule,
            counterparts,
            provenance: Provenance::UserSupplied,
            support: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalConfig {
    pub min_support: usize,
    /// Also propose two-connector rules from runs of three tags.
    pub composites: bool,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            min_support: 1,
            composites: true,
        }
    }
}

/// For every adjacent tag pair `A B` proposes `B: A-` with counterpart
/// `A: B+`. Runs `C A B` also give the composite `B: A- & C-` with
/// counterparts `A: B+` and `C: B+`. Uncategorized tokens break runs.
/// Sorted by support, then by rule text.
pub fn propose_rules(tagged: &[TaggedSentence], config: &ProposalConfig) -> Result<Vec<CandidateRule>, InductionError> {
    if tagged.iter().all(|s| s.is_empty()) {
        return Err(InductionError::EmptyCorpus);
    }
    let mut pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut triples: BTreeMap<(&str, &str, &str), usize> = BTreeMap::new();
    for sentence in tagged {
        let tags: Vec<Option<&str>> = sentence
            .iter()
            .map(|t| (t.category != NOISE).then_some(t.tag.as_str()))
            .collect();
        for w in tags.windows(2) {
            if let [Some(a), Some(b)] = w {
                *pairs.entry((a, b)).or_default() += 1;
            }
        }
        if config.composites {
            for w in tags.windows(3) {
                if let [Some(c), Some(a), Some(b)] = w {
                    *triples.entry((c, a, b)).or_default() += 1;
                }
            }
        }
    }
    let right = |owner: &str, to: &str| Rule::single(owner, Disjunct::new(vec![Connector::right(to)]));
    let mut out: Vec<CandidateRule> = pairs
        .into_iter()
        .filter(|&(_, n)| n >= config.min_support.max(1))
        .map(|((a, b), n)| CandidateRule {
            rule: Rule::single(b, Disjunct::new(vec![Connector::left(a)])),
            counterparts: vec![right(a, b)],
            provenance: Provenance::ProposedFromCorpus,
            support: n,
        })
        .collect();
    out.extend(
        triples
            .into_iter()
            .filter(|&((c, a, _), n)| n >= config.min_support.max(1) && c != a)
            .map(|((c, a, b), n)| CandidateRule {
                rule: Rule::single(b, Disjunct::new(vec![Connector::left(a), Connector::left(c)])),
                counterparts: vec![right(a, b), right(c, b)],
                provenance: Provenance::ProposedFromCorpus,
                support: n,
            }),
    );
    let mut keyed: Vec<(String, CandidateRule)> = out.into_iter().map(|c| (c.rule.to_string(), c)).collect();
    keyed.sort_by(|x, y| y.1.support.cmp(&x.1.support).then_with(|| x.0.cmp(&y.0)));
    Ok(keyed.into_iter().map(|(_, c)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categories::TaggedToken;

    fn tagged(pairs: &[(&str, &str)]) -> TaggedSentence {
        pairs
            .iter()
            .map(|(w, t)| TaggedToken {
                word: w.to_string(),
                sense: 0,
                category: if *t == "noise" { NOISE } else { 0 },
                tag: t.to_string(),
            })
            .collect()
    }

    #[test]
    fn single_adjacency() {
        let c = propose_rules(&[tagged(&[("the", "det"), ("kids", "subj")])], &ProposalConfig::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].rule.to_string(), "subj: det-");
        assert_eq!(c[0].counterparts[0].to_string(), "det: subj+");
        assert_eq!(c[0].support, 1);
    }

    #[test]
    fn composites_and_ordering() {
        let s = tagged(&[("the", "det"), ("small", "adj"), ("kids", "subj")]);
        let c = propose_rules(&[s.clone(), s], &ProposalConfig::default()).unwrap();
        let rules: Vec<String> = c.iter().map(|c| c.rule.to_string()).collect();
        assert_eq!(rules, ["adj: det-", "subj: adj-", "subj: adj- & det-"]);
        assert_eq!(c[2].counterparts.len(), 2);
    }

    #[test]
    fn support_threshold_and_noise() {
        let s = tagged(&[("the", "det"), ("zz", "noise"), ("kids", "subj")]);
        assert!(matches!(
            propose_rules(&[Vec::new()], &ProposalConfig::default()),
            Err(InductionError::EmptyCorpus)
        ));
        assert!(propose_rules(&[s], &ProposalConfig::default()).unwrap().is_empty());
        let s = tagged(&[("the", "det"), ("kids", "subj")]);
        let high = ProposalConfig { min_support: 2, ..Default::default() };
        assert!(propose_rules(&[s], &high).unwrap().is_empty());
    }
}
