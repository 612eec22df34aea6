//! Exhaustive link parser.
//!
//! Words are visited left to right while open right connectors wait on a
//! stack, nearest on top. A word's left connectors, nearest first, must pop
//! matching entries; its right connectors are then pushed farthest first.
//! The sentence parses when some choice of disjuncts empties the stack.
//! Links produced this way never cross.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Disjunct, Grammar};
use crate::oracle::TokenSequence;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("word {word:?} at position {position} has no rules")]
    UnknownWord { position: usize, word: String },
    /// `position` is the furthest word any partial linkage reached, or the
    /// word left with an open connector when every full attempt ended so.
    #[error("no linkage; first unsatisfiable word is {word:?} at position {position}")]
    NoParse { position: usize, word: String },
    #[error("sentence has {len} words, the limit is {max}")]
    TooLong { len: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub max_len: usize,
    /// Also require the links to connect every word.
    pub require_connected: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_len: 64,
            require_connected: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordUse {
    pub position: usize,
    pub word: String,
    pub owner: String,
    /// Index of the disjunct within the owner's rule.
    pub disjunct: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub left: usize,
    pub right: usize,
    pub left_owner: String,
    pub right_owner: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linkage {
    pub words: Vec<WordUse>,
    pub links: Vec<Link>,
    /// Whether a trailing terminator was stripped before parsing.
    pub terminated: bool,
}

impl Linkage {
    pub fn is_connected(&self) -> bool {
        connected(self.words.len(), self.links.iter().map(|l| (l.left, l.right)))
    }

    /// Checks that every word's chosen disjunct is used exactly by its links.
    pub fn satisfies(&self, grammar: &Grammar) -> bool {
        self.words.iter().all(|w| {
            let Some(d) = grammar.rule(&w.owner).and_then(|r| r.disjuncts.get(w.disjunct)) else {
                return false;
            };
            let mut lefts: Vec<&Link> = self.links.iter().filter(|l| l.right == w.position).collect();
            let mut rights: Vec<&Link> = self.links.iter().filter(|l| l.left == w.position).collect();
            lefts.sort_by_key(|l| std::cmp::Reverse(l.left));
            rights.sort_by_key(|l| l.right);
            let want_l: Vec<&str> = d.lefts().map(|c| c.label.as_str()).collect();
            let want_r: Vec<&str> = d.rights().map(|c| c.label.as_str()).collect();
            let got_l: Vec<&str> = lefts.iter().map(|l| l.left_owner.as_str()).collect();
            let got_r: Vec<&str> = rights.iter().map(|l| l.right_owner.as_str()).collect();
            want_l == got_l && want_r == got_r
        })
    }
}

/// True when no two links cross.
pub fn is_planar(links: &[Link]) -> bool {
    links.iter().all(|a| {
        links
            .iter()
            .all(|b| !(a.left < b.left && b.left < a.right && a.right < b.right))
    })
}

fn connected(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components <= 1
}

pub fn parse(sentence: &TokenSequence, grammar: &Grammar) -> Result<Linkage, ParseError> {
    parse_with(sentence, grammar, &ParseOptions::default())
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Open<'g> {
    position: usize,
    owner: &'g str,
    label: &'g str,
}

struct Search<'g> {
    options: Vec<Vec<(&'g str, usize, &'g Disjunct)>>,
    stack: Vec<Open<'g>>,
    links: Vec<(usize, usize, &'g str, &'g str)>,
    choice: Vec<(&'g str, usize)>,
    failed: HashSet<(usize, Vec<Open<'g>>)>,
    require_connected: bool,
    deepest: usize,
    unclosed: Option<usize>,
}

impl<'g> Search<'g> {
    fn step(&mut self, p: usize) -> bool {
        let n = self.options.len();
        self.deepest = self.deepest.max(p);
        if p == n {
            if let Some(o) = self.stack.first() {
                self.unclosed = Some(o.position);
                return false;
            }
            return !self.require_connected || connected(n, self.links.iter().map(|l| (l.0, l.1)));
        }
        if self.stack.len() > self.options[p..].iter().map(|o| max_lefts(o)).sum::<usize>() {
            return false;
        }
        let memo = !self.require_connected;
        if memo && self.failed.contains(&(p, self.stack.clone())) {
            return false;
        }
        let entry_stack = self.stack.clone();
        for k in 0..self.options[p].len() {
            let (owner, index, disjunct) = self.options[p][k];
            let links_before = self.links.len();
            let mut ok = true;
            for c in disjunct.lefts() {
                match self.stack.last() {
                    Some(top)
                        if top.label == owner
                            && top.owner == c.label
                            && !self.links[links_before..].iter().any(|l| l.0 == top.position) =>
                    {
                        let top = self.stack.pop().expect("non-empty");
                        self.links.push((top.position, p, top.owner, owner));
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                for c in disjunct.rights().collect::<Vec<_>>().into_iter().rev() {
                    self.stack.push(Open {
                        position: p,
                        owner,
                        label: &c.label,
                    });
                }
                self.choice[p] = (owner, index);
                if self.step(p + 1) {
                    return true;
                }
            }
            self.links.truncate(links_before);
            self.stack.clone_from(&entry_stack);
        }
        if memo {
            self.failed.insert((p, entry_stack));
        }
        false
    }
}

fn max_lefts(options: &[(&str, usize, &Disjunct)]) -> usize {
    options.iter().map(|(_, _, d)| d.lefts().count()).max().unwrap_or(0)
}

/// Parses `sentence`, dropping a trailing terminator when the grammar has
/// one and the token is not itself a word of the grammar.
pub fn parse_with(sentence: &TokenSequence, grammar: &Grammar, options: &ParseOptions) -> Result<Linkage, ParseError> {
    let mut words: &[String] = sentence.tokens();
    let mut terminated = false;
    if let (Some(t), Some(last)) = (grammar.terminator(), words.last()) {
        if last == t && !grammar.knows(t) {
            words = &words[..words.len() - 1];
            terminated = true;
        }
    }
    if words.len() > options.max_len {
        return Err(ParseError::TooLong {
            len: words.len(),
            max: options.max_len,
        });
    }
    if words.is_empty() {
        return Err(ParseError::NoParse {
            position: 0,
            word: sentence.tokens()[0].clone(),
        });
    }
    let mut per_word = Vec::with_capacity(words.len());
    for (position, word) in words.iter().enumerate() {
        let opts: Vec<(&str, usize, &Disjunct)> = grammar
            .owners_of(word)
            .into_iter()
            .flat_map(|owner| {
                let rule = grammar.rule(owner).expect("owner has rules");
                rule.disjuncts.iter().enumerate().map(move |(i, d)| (owner, i, d))
            })
            .collect();
        if opts.is_empty() {
            return Err(ParseError::UnknownWord {
                position,
                word: word.clone(),
            });
        }
        per_word.push(opts);
    }
    let mut search = Search {
        options: per_word,
        stack: Vec::new(),
        links: Vec::new(),
        choice: vec![("", 0); words.len()],
        failed: HashSet::new(),
        require_connected: options.require_connected,
        deepest: 0,
        unclosed: None,
    };
    if !search.step(0) {
        let position = if search.deepest < words.len() {
            search.deepest
        } else {
            search.unclosed.unwrap_or(words.len() - 1)
        };
        return Err(ParseError::NoParse {
            position,
            word: words[position].clone(),
        });
    }
    let mut links: Vec<Link> = search
        .links
        .iter()
        .map(|&(left, right, lo, ro)| Link {
            left,
            right,
            left_owner: lo.to_string(),
            right_owner: ro.to_string(),
        })
        .collect();
    links.sort();
    Ok(Linkage {
        words: words
            .iter()
            .zip(&search.choice)
            .enumerate()
            .map(|(position, (word, &(owner, disjunct)))| WordUse {
                position,
                word: word.clone(),
                owner: owner.to_string(),
                disjunct,
            })
            .collect(),
        links,
        terminated,
    })
}
