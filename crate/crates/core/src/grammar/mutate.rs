//! Direction-flipping mutation of a rule and its counterparts.
//!
//! Every connector of the rule's disjuncts is reversed. Each peer owner named
//! by the rule reverses the connectors that point back at the rule's owner,
//! so the mutated grammar stays closed. Applying the mutation twice restores
//! the original grammar.

use thiserror::Error;

use super::{Connector, Grammar, Rule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("rule {0} is not in the grammar")]
    RuleNotInGrammar(String),
    #[error("connector {connector} of {owner:?} has no counterpart in the peer's rule")]
    MissingCounterpart { owner: String, connector: String },
    #[error("mutating {owner:?} would duplicate disjunct {disjunct}")]
    Collision { owner: String, disjunct: String },
}

fn swap_toward(connectors: &mut [Connector], label: &str) {
    for c in connectors.iter_mut().filter(|c| c.label == label) {
        c.direction = c.direction.flipped();
    }
}

/// Returns the mutated rule and the grammar with the mutation applied.
pub fn mutate_rule(rule: &Rule, grammar: &Grammar) -> Result<(Rule, Grammar), MutationError> {
    let owner = rule.owner.as_str();
    let own = grammar
        .rule(owner)
        .ok_or_else(|| MutationError::RuleNotInGrammar(rule.to_string()))?;
    let mut indices = Vec::with_capacity(rule.disjuncts.len());
    for d in &rule.disjuncts {
        match own.disjuncts.iter().position(|x| x == d) {
            Some(k) => indices.push(k),
            None => return Err(MutationError::RuleNotInGrammar(rule.to_string())),
        }
    }
    for c in rule.disjuncts.iter().flat_map(|d| &d.connectors) {
        let want = c.direction.flipped();
        let has = grammar.rule(&c.label).is_some_and(|peer| {
            peer.disjuncts
                .iter()
                .flat_map(|d| &d.connectors)
                .any(|pc| pc.label == owner && pc.direction == want)
        });
        if !has {
            return Err(MutationError::MissingCounterpart {
                owner: owner.to_string(),
                connector: c.to_string(),
            });
        }
    }

    let mut out = grammar.clone();
    for peer in rule.peers() {
        let target = out.rule_mut(peer).expect("peer checked above");
        for (k, d) in target.disjuncts.iter_mut().enumerate() {
            if peer == owner && indices.contains(&k) {
                continue;
            }
            swap_toward(&mut d.connectors, owner);
        }
    }
    let target = out.rule_mut(owner).expect("owner checked above");
    for &k in &indices {
        target.disjuncts[k] = target.disjuncts[k].flipped();
    }
    for k in 0..target.disjuncts.len() {
        if target.disjuncts[..k].contains(&target.disjuncts[k]) {
            return Err(MutationError::Collision {
                owner: owner.to_string(),
                disjunct: target.disjuncts[k].to_string(),
            });
        }
    }
    let mutated = Rule {
        owner: owner.to_string(),
        disjuncts: indices.iter().map(|&k| target.disjuncts[k].clone()).collect(),
    };
    Ok((mutated, out))
}
