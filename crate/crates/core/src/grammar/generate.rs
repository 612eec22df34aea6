//! Random sentence generation by growing linkage trees.
//!
//! A word's disjunct opens slots; each slot is filled by a new word whose
//! disjunct points back with its farthest connector on that side, so every
//! subtree occupies a contiguous span and the flattened links never cross.
//! Anchored generation starts at a word carrying a given rule and walks
//! upward, attaching parents through the anchor's farthest connectors, before
//! filling the remaining slots downward.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::{Link, Linkage, WordUse};
use super::{Direction, Disjunct, Grammar, Rule};
use crate::oracle::TokenSequence;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    /// Maximum words, not counting the terminator.
    pub max_len: usize,
    pub max_depth: usize,
    pub retries: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            max_len: 16,
            max_depth: 8,
            retries: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("grammar has no rules")]
    EmptyGrammar,
    #[error("anchor rule {0} is not in the grammar")]
    AnchorNotInGrammar(String),
    #[error("no sentence within the limits after {0} attempts")]
    Exhausted(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub sentence: TokenSequence,
    pub linkage: Linkage,
    /// Position of the word carrying the anchor rule.
    pub anchor: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Open,
    Child(usize),
    Parent,
}

struct Node<'g> {
    word: String,
    owner: &'g str,
    disjunct: usize,
    connectors: &'g Disjunct,
    left: Vec<Slot>,
    right: Vec<Slot>,
}

struct Tree<'g> {
    grammar: &'g Grammar,
    nodes: Vec<Node<'g>>,
    config: GenerateConfig,
}

impl<'g> Tree<'g> {
    fn add(&mut self, owner: &'g str, disjunct: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        if self.nodes.len() >= self.config.max_len {
            return None;
        }
        let connectors = &self.grammar.rule(owner)?.disjuncts[disjunct];
        let word = self.grammar.words_of(owner).choose(rng)?.clone();
        self.nodes.push(Node {
            word,
            owner,
            disjunct,
            connectors,
            left: vec![Slot::Open; connectors.lefts().count()],
            right: vec![Slot::Open; connectors.rights().count()],
        });
        Some(self.nodes.len() - 1)
    }

    fn label(&self, node: usize, side: Direction, slot: usize) -> &'g str {
        let d = self.nodes[node].connectors;
        &d.side(side)[slot].label
    }

    /// Fills every open slot below `node`.
    fn grow(&mut self, node: usize, depth: usize, rng: &mut ChaCha8Rng) -> Option<()> {
        for side in [Direction::Left, Direction::Right] {
            let slots = match side {
                Direction::Left => self.nodes[node].left.len(),
                Direction::Right => self.nodes[node].right.len(),
            };
            for i in 0..slots {
                let slot = match side {
                    Direction::Left => self.nodes[node].left[i],
                    Direction::Right => self.nodes[node].right[i],
                };
                match slot {
                    Slot::Open => {
                        if depth >= self.config.max_depth {
                            return None;
                        }
                        let child = self.attach_child(node, side, i, rng)?;
                        self.grow(child, depth + 1, rng)?;
                    }
                    Slot::Child(c) => self.grow(c, depth + 1, rng)?,
                    Slot::Parent => {}
                }
            }
        }
        Some(())
    }

    /// A child on `side` of `parent`, pointing back with its farthest
    /// connector on the opposite side.
    fn attach_child(&mut self, parent: usize, side: Direction, slot: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        let label = self.label(parent, side, slot);
        let parent_owner = self.nodes[parent].owner;
        let back = side.flipped();
        let rule = self.grammar.rule(label)?;
        let fits: Vec<usize> = (0..rule.disjuncts.len())
            .filter(|&k| rule.disjuncts[k].side(back).last().is_some_and(|c| c.label == parent_owner))
            .collect();
        let &k = fits.choose(rng)?;
        let child = self.add(&rule.owner, k, rng)?;
        let node = &mut self.nodes[child];
        match back {
            Direction::Left => *node.left.last_mut().expect("has left") = Slot::Parent,
            Direction::Right => *node.right.last_mut().expect("has right") = Slot::Parent,
        }
        match side {
            Direction::Left => self.nodes[parent].left[slot] = Slot::Child(child),
            Direction::Right => self.nodes[parent].right[slot] = Slot::Child(child),
        }
        Some(child)
    }

    /// A parent reached through the farthest connector of `child` on `side`.
    fn attach_parent(&mut self, child: usize, side: Direction, rng: &mut ChaCha8Rng) -> Option<usize> {
        let slots = self.nodes[child].connectors.side(side).len();
        let label = self.label(child, side, slots - 1);
        let child_owner = self.nodes[child].owner;
        let toward = side.flipped();
        let rule = self.grammar.rule(label)?;
        let fits: Vec<(usize, usize)> = rule
            .disjuncts
            .iter()
            .enumerate()
            .flat_map(|(k, d)| {
                d.side(toward)
                    .into_iter()
                    .enumerate()
                    .filter(|(_, c)| c.label == child_owner)
                    .map(move |(j, _)| (k, j))
            })
            .collect();
        let &(k, j) = fits.choose(rng)?;
        let parent = self.add(&rule.owner, k, rng)?;
        match toward {
            Direction::Left => self.nodes[parent].left[j] = Slot::Child(child),
            Direction::Right => self.nodes[parent].right[j] = Slot::Child(child),
        }
        match side {
            Direction::Left => self.nodes[child].left[slots - 1] = Slot::Parent,
            Direction::Right => self.nodes[child].right[slots - 1] = Slot::Parent,
        }
        Some(parent)
    }

    fn flatten(&self, node: usize, order: &mut Vec<usize>) {
        for s in self.nodes[node].left.iter().rev() {
            if let Slot::Child(c) = s {
                self.flatten(*c, order);
            }
        }
        order.push(node);
        for s in &self.nodes[node].right {
            if let Slot::Child(c) = s {
                self.flatten(*c, order);
            }
        }
    }
}

fn attempt(
    grammar: &Grammar,
    anchor: Option<(&str, usize)>,
    config: &GenerateConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Generated> {
    let mut tree = Tree {
        grammar,
        nodes: Vec::new(),
        config: *config,
    };
    let (root, anchor_node) = match anchor {
        Some((owner, k)) => {
            let owner = &grammar.rule(owner)?.owner;
            let start = tree.add(owner, k, rng)?;
            let mut top = start;
            let mut height = 0;
            loop {
                let node = &tree.nodes[top];
                let mut moves = vec![None];
                if node.left.last() == Some(&Slot::Open) {
                    moves.push(Some(Direction::Left));
                }
                if node.right.last() == Some(&Slot::Open) {
                    moves.push(Some(Direction::Right));
                }
                match *moves.choose(rng)? {
                    None => break,
                    Some(side) => {
                        height += 1;
                        if height > config.max_depth {
                            return None;
                        }
                        top = tree.attach_parent(top, side, rng)?;
                    }
                }
            }
            (top, Some(start))
        }
        None => {
            let choices: Vec<(&str, usize)> = grammar
                .rules()
                .flat_map(|r| (0..r.disjuncts.len()).map(move |k| (r.owner.as_str(), k)))
                .collect();
            let &(owner, k) = choices.choose(rng)?;
            (tree.add(owner, k, rng)?, None)
        }
    };
    tree.grow(root, 0, rng)?;

    let mut order = Vec::with_capacity(tree.nodes.len());
    tree.flatten(root, &mut order);
    let mut position = vec![0; tree.nodes.len()];
    for (p, &n) in order.iter().enumerate() {
        position[n] = p;
    }
    let mut links = Vec::new();
    for (n, node) in tree.nodes.iter().enumerate() {
        for s in node.left.iter().chain(&node.right) {
            if let Slot::Child(c) = *s {
                let (a, b) = if position[n] < position[c] { (n, c) } else { (c, n) };
                links.push(Link {
                    left: position[a],
                    right: position[b],
                    left_owner: tree.nodes[a].owner.to_string(),
                    right_owner: tree.nodes[b].owner.to_string(),
                });
            }
        }
    }
    links.sort();
    let words: Vec<WordUse> = order
        .iter()
        .enumerate()
        .map(|(p, &n)| WordUse {
            position: p,
            word: tree.nodes[n].word.clone(),
            owner: tree.nodes[n].owner.to_string(),
            disjunct: tree.nodes[n].disjunct,
        })
        .collect();
    let mut tokens: Vec<String> = words.iter().map(|w| w.word.clone()).collect();
    if let Some(t) = grammar.terminator() {
        tokens.push(t.to_string());
    }
    Some(Generated {
        sentence: TokenSequence::new(tokens).ok()?,
        linkage: Linkage {
            words,
            links,
            terminated: grammar.terminator().is_some(),
        },
        anchor: anchor_node.map(|a| position[a]),
    })
}

/// Generates one sentence. With an anchor, one of its disjuncts is chosen
/// uniformly and the sentence is grown around a word carrying it.
pub fn generate(
    grammar: &Grammar,
    anchor: Option<&Rule>,
    config: &GenerateConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Generated, GenerateError> {
    if grammar.is_empty() {
        return Err(GenerateError::EmptyGrammar);
    }
    let anchors: Vec<(&str, usize)> = match anchor {
        Some(rule) => {
            let Some(own) = grammar.rule(&rule.owner) else {
                return Err(GenerateError::AnchorNotInGrammar(rule.to_string()));
            };
            let mut found = Vec::new();
            for d in &rule.disjuncts {
                match own.disjuncts.iter().position(|x| x == d) {
                    Some(k) => found.push((own.owner.as_str(), k)),
                    None => return Err(GenerateError::AnchorNotInGrammar(rule.to_string())),
                }
            }
            found
        }
        None => Vec::new(),
    };
    for _ in 0..config.retries.max(1) {
        let a = if anchors.is_empty() {
            None
        } else {
            Some(anchors[rng.gen_range(0..anchors.len())])
        };
        if let Some(g) = attempt(grammar, a, config, rng) {
            return Ok(g);
        }
    }
    Err(GenerateError::Exhausted(config.retries.max(1)))
}

/// Generates `count` sentences from a per-label seeded stream.
pub fn generate_seeded(
    grammar: &Grammar,
    anchor: Option<&Rule>,
    config: &GenerateConfig,
    count: usize,
    seed: u64,
    label: &str,
) -> Vec<Result<Generated, GenerateError>> {
    let mut rng = rng_for(seed, label);
    (0..count).map(|_| generate(grammar, anchor, config, &mut rng)).collect()
}
