//! Link grammar with connectors that name their peer owners.
//!
//! An owner is a word or a category; categories list their member words in
//! the lexicon. A connector `kids-` on an owner links to a word of owner
//! `kids` on its left, `kids+` to one on its right. Within a disjunct the
//! left connectors are ordered nearest first, and so are the right ones.

mod generate;
mod mutate;
mod parse;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate, generate_seeded, GenerateConfig, GenerateError, Generated};
pub use mutate::{mutate_rule, MutationError};
pub use parse::{is_planar, parse, parse_with, Link, Linkage, ParseError, ParseOptions, WordUse};
pub use text::GrammarSyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    pub fn sign(self) -> char {
        match self {
            Direction::Left => '-',
            Direction::Right => '+',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Connector {
    pub label: String,
    pub direction: Direction,
}

impl Connector {
    pub fn left(label: &str) -> Self {
        Connector {
            label: label.to_string(),
            direction: Direction::Left,
        }
    }

    pub fn right(label: &str) -> Self {
        Connector {
            label: label.to_string(),
            direction: Direction::Right,
        }
    }

    pub fn flipped(&self) -> Self {
        Connector {
            label: self.label.clone(),
            direction: self.direction.flipped(),
        }
    }
}

impl fmt::Display for Connector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.label, self.direction.sign())
    }
}

/// Conjunction of connectors. The empty disjunct, written `()`, is satisfied
/// by a word with no links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Disjunct {
    pub connectors: Vec<Connector>,
}

impl Disjunct {
    pub fn new(connectors: Vec<Connector>) -> Self {
        Disjunct { connectors }
    }

    pub fn empty() -> Self {
        Disjunct { connectors: Vec::new() }
    }

    /// Left connectors, nearest first.
    pub fn lefts(&self) -> impl Iterator<Item = &Connector> + Clone {
        self.connectors.iter().filter(|c| c.direction == Direction::Left)
    }

    /// Right connectors, nearest first.
    pub fn rights(&self) -> impl Iterator<Item = &Connector> + Clone {
        self.connectors.iter().filter(|c| c.direction == Direction::Right)
    }

    pub fn side(&self, direction: Direction) -> Vec<&Connector> {
        self.connectors.iter().filter(|c| c.direction == direction).collect()
    }

    pub fn flipped(&self) -> Disjunct {
        Disjunct::new(self.connectors.iter().map(Connector::flipped).collect())
    }
}

impl fmt::Display for Disjunct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.connectors.is_empty() {
            return f.write_str("()");
        }
        for (i, c) in self.connectors.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("rule for {0:?} has no disjuncts")]
    NoDisjuncts(String),
    #[error("rule for {owner:?} repeats disjunct {disjunct}")]
    DuplicateDisjunct { owner: String, disjunct: String },
    #[error("connector {connector} on {owner:?} names an owner without rules")]
    UnknownLabel { owner: String, connector: String },
    #[error("owner name {0:?} is not a valid identifier")]
    BadOwner(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub owner: String,
    pub disjuncts: Vec<Disjunct>,
}

impl Rule {
    pub fn new(owner: &str, disjuncts: Vec<Disjunct>) -> Result<Self, GrammarError> {
        if disjuncts.is_empty() {
            return Err(GrammarError::NoDisjuncts(owner.to_string()));
        }
        for (i, d) in disjuncts.iter().enumerate() {
            if disjuncts[..i].contains(d) {
                return Err(GrammarError::DuplicateDisjunct {
                    owner: owner.to_string(),
                    disjunct: d.to_string(),
                });
            }
        }
        Ok(Rule {
            owner: owner.to_string(),
            disjuncts,
        })
    }

    /// Parses a single rule in dictionary syntax, e.g. `kids: small- & the-`.
    pub fn parse(text: &str) -> Result<Self, GrammarSyntaxError> {
        text::parse_rule(text)
    }

    pub fn single(owner: &str, disjunct: Disjunct) -> Self {
        Rule {
            owner: owner.to_string(),
            disjuncts: vec![disjunct],
        }
    }

    /// Owners named by any connector of this rule.
    pub fn peers(&self) -> BTreeSet<&str> {
        self.disjuncts
            .iter()
            .flat_map(|d| d.connectors.iter().map(|c| c.label.as_str()))
            .collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.owner)?;
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// A dictionary of rules plus the lexicon mapping category owners to words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grammar {
    rules: BTreeMap<String, Rule>,
    lexicon: BTreeMap<String, Vec<String>>,
    terminator: Option<String>,
}

impl Grammar {
    pub fn new() -> Self {
        Grammar::default()
    }

    /// Reads dictionary text (see the crate README for the syntax).
    pub fn parse(text: &str) -> Result<Self, GrammarSyntaxError> {
        text::parse_grammar(text)
    }

    pub fn with_lexicon(mut self, lexicon: BTreeMap<String, Vec<String>>) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn with_terminator(mut self, terminator: Option<String>) -> Self {
        self.terminator = terminator;
        self
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn rule(&self, owner: &str) -> Option<&Rule> {
        self.rules.get(owner)
    }

    pub(crate) fn rule_mut(&mut self, owner: &str) -> Option<&mut Rule> {
        self.rules.get_mut(owner)
    }

    pub fn lexicon(&self) -> &BTreeMap<String, Vec<String>> {
        &self.lexicon
    }

    pub fn terminator(&self) -> Option<&str> {
        self.terminator.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Number of (owner, disjunct) pairs.
    pub fn disjunct_count(&self) -> usize {
        self.rules.values().map(|r| r.disjuncts.len()).sum()
    }

    /// Every (owner, disjunct) pair as a one-disjunct rule, in owner order.
    pub fn single_rules(&self) -> Vec<Rule> {
        self.rules
            .values()
            .flat_map(|r| r.disjuncts.iter().map(|d| Rule::single(&r.owner, d.clone())))
            .collect()
    }

    /// Words an owner stands for: its lexicon entry, or its own name.
    pub fn words_of(&self, owner: &str) -> Vec<String> {
        match self.lexicon.get(owner) {
            Some(words) => words.clone(),
            None => vec![owner.to_string()],
        }
    }

    /// Owners with rules that a word can play.
    pub fn owners_of(&self, word: &str) -> Vec<&str> {
        self.rules
            .keys()
            .filter(|owner| match self.lexicon.get(owner.as_str()) {
                Some(words) => words.iter().any(|w| w == word),
                None => owner.as_str() == word,
            })
            .map(String::as_str)
            .collect()
    }

    pub fn knows(&self, word: &str) -> bool {
        !self.owners_of(word).is_empty()
    }

    /// True when every disjunct of `rule` is present under its owner.
    pub fn contains_rule(&self, rule: &Rule) -> bool {
        self.rules
            .get(&rule.owner)
            .is_some_and(|r| rule.disjuncts.iter().all(|d| r.disjuncts.contains(d)))
    }

    /// Adds the disjuncts of `rule` not already present.
    pub fn add_rule(&mut self, rule: &Rule) {
        let entry = self.rules.entry(rule.owner.clone()).or_insert_with(|| Rule {
            owner: rule.owner.clone(),
            disjuncts: Vec::new(),
        });
        for d in &rule.disjuncts {
            if !entry.disjuncts.contains(d) {
                entry.disjuncts.push(d.clone());
            }
        }
    }

    /// Checks that every connector names an owner that has rules.
    pub fn validate(&self) -> Result<(), GrammarError> {
        for rule in self.rules.values() {
            if rule.disjuncts.is_empty() {
                return Err(GrammarError::NoDisjuncts(rule.owner.clone()));
            }
            for c in rule.disjuncts.iter().flat_map(|d| &d.connectors) {
                if !self.rules.contains_key(&c.label) {
                    return Err(GrammarError::UnknownLabel {
                        owner: rule.owner.clone(),
                        connector: c.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = &self.terminator {
            writeln!(f, "@terminator {t}")?;
        }
        for rule in self.rules.values() {
            writeln!(f, "{rule};")?;
        }
        Ok(())
    }
}
