//! Add-k smoothed n-gram model answering masked queries.
//!
//! Two count tables are kept: one over sentences read left to right and one
//! over reversed sentences. A masked query conditions on the contiguous run of
//! visible tokens next to the target on whichever side shows more words;
//! masked positions break the run. Contexts never seen in training back off
//! to their shorter suffix, down to the unigram table.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use thiserror::Error;

use super::{MaskedQuery, OracleError, SequenceOracle, Slot, TokenSequence};

/// Sentence-boundary marker, used at both ends.
pub const BOUNDARY: &str = "<s>";

const FORMAT_HEADER: &str = "gramforge-ngram 1";

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    BadOrder,
    #[error("smoothing constant must be positive and finite, got {0}")]
    BadSmoothing(f64),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: BTreeMap<u32, u64>,
}

type CountTable = HashMap<Vec<u32>, ContextCounts>;

#[derive(Debug, Clone)]
pub struct NgramOracleModel {
    order: usize,
    smoothing_k: f64,
    strict: bool,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    forward: CountTable,
    backward: CountTable,
}

pub fn train_ngram_oracle(
    corpus: &[TokenSequence],
    order: usize,
    smoothing_k: f64,
) -> Result<NgramOracleModel, NgramError> {
    NgramOracleModel::train(corpus, order, smoothing_k)
}

impl NgramOracleModel {
    pub fn train(
        corpus: &[TokenSequence],
        order: usize,
        smoothing_k: f64,
    ) -> Result<Self, NgramError> {
        if corpus.is_empty() {
            return Err(NgramError::EmptyCorpus);
        }
        let mut model = Self::empty(order, smoothing_k)?;
        for sentence in corpus {
            let ids: Vec<u32> = sentence.tokens().iter().map(|t| model.intern(t)).collect();
            let mut padded = Vec::with_capacity(ids.len() + 2);
            padded.push(0);
            padded.extend_from_slice(&ids);
            padded.push(0);
            count_into(&mut model.forward, &padded, order);
            padded.reverse();
            count_into(&mut model.backward, &padded, order);
        }
        Ok(model)
    }

    fn empty(order: usize, smoothing_k: f64) -> Result<Self, NgramError> {
        if order == 0 {
            return Err(NgramError::BadOrder);
        }
        if !(smoothing_k > 0.0 && smoothing_k.is_finite()) {
            return Err(NgramError::BadSmoothing(smoothing_k));
        }
        let mut model = NgramOracleModel {
            order,
            smoothing_k,
            strict: false,
            vocab: Vec::new(),
            index: HashMap::new(),
            forward: HashMap::new(),
            backward: HashMap::new(),
        };
        model.intern(BOUNDARY);
        Ok(model)
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.vocab.len() as u32;
        self.vocab.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// In strict mode out-of-vocabulary tokens are an error instead of
    /// scoring as an unseen event.
    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_k(&self) -> f64 {
        self.smoothing_k
    }

    /// Vocabulary size including the boundary marker.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Word types seen in training, in first-seen order, without the boundary.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vocab[1..].iter().map(String::as_str)
    }

    /// Smoothed `P(token | context)` for left-to-right text. Context tokens
    /// are given oldest first and may include [`BOUNDARY`].
    pub fn forward_prob(&self, context: &[&str], token: &str) -> Result<f64, OracleError> {
        self.prob_by_name(Direction::Forward, context, token)
    }

    /// Smoothed `P(token | context)` in the reversed-text model; `context`
    /// lists the tokens to the right of the target, farthest first.
    pub fn backward_prob(&self, context: &[&str], token: &str) -> Result<f64, OracleError> {
        self.prob_by_name(Direction::Backward, context, token)
    }

    fn prob_by_name(
        &self,
        direction: Direction,
        context: &[&str],
        token: &str,
    ) -> Result<f64, OracleError> {
        let ids: Option<Vec<u32>> = context.iter().map(|t| self.index.get(*t).copied()).collect();
        // An unknown context word cannot match any table entry; keep only the
        // part after it.
        let ids = match ids {
            Some(ids) => ids,
            None => {
                let tail = context
                    .iter()
                    .rposition(|t| !self.index.contains_key(*t))
                    .map_or(0, |p| p + 1);
                context[tail..].iter().map(|t| self.index[*t]).collect()
            }
        };
        self.conditional(direction, &ids, token)
    }

    fn conditional(
        &self,
        direction: Direction,
        context: &[u32],
        token: &str,
    ) -> Result<f64, OracleError> {
        let table = match direction {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        };
        let start = context.len().saturating_sub(self.order - 1);
        let mut ctx = &context[start..];
        let counts = loop {
            match table.get(ctx) {
                Some(c) if c.total > 0 => break c,
                _ if ctx.is_empty() => unreachable!("unigram table is always populated"),
                _ => ctx = &ctx[1..],
            }
        };
        let denominator = counts.total as f64 + self.smoothing_k * self.vocab.len() as f64;
        let seen = match self.index.get(token) {
            Some(id) => counts.next.get(id).copied().unwrap_or(0),
            None if self.strict => return Err(OracleError::OutOfVocabulary(token.to_string())),
            None => 0,
        };
        Ok((seen as f64 + self.smoothing_k) / denominator)
    }

    /// Visible context on one side of the target: ids oldest first (in the
    /// reading direction of that side's model) and the number of words.
    fn side_context(&self, slots: &[Slot], target: usize, direction: Direction) -> (Vec<u32>, usize) {
        let want = self.order - 1;
        let mut nearest_first = Vec::new();
        let mut reached_edge = false;
        let mut j = target;
        loop {
            let next = match direction {
                Direction::Forward => j.checked_sub(1),
                Direction::Backward => Some(j + 1).filter(|&n| n < slots.len()),
            };
            let Some(n) = next else {
                reached_edge = true;
                break;
            };
            if nearest_first.len() == want {
                break;
            }
            match &slots[n] {
                // Unknown words keep their place as an id that matches nothing.
                Slot::Token(t) => nearest_first.push(self.index.get(t).copied().unwrap_or(u32::MAX)),
                Slot::Masked => break,
            }
            j = n;
        }
        let words = nearest_first.len();
        if reached_edge && nearest_first.len() < want {
            nearest_first.push(0);
        }
        if let Some(p) = nearest_first.iter().position(|&id| id == u32::MAX) {
            nearest_first.truncate(p);
        }
        nearest_first.reverse();
        (nearest_first, words)
    }

    fn query_prob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError> {
        let slots = query.slots();
        let target = query.target();
        let (left, left_words) = self.side_context(slots, target, Direction::Forward);
        let (right, right_words) = self.side_context(slots, target, Direction::Backward);
        let left_boundary = left.first() == Some(&0) && left.len() > left_words;
        let right_boundary = right.first() == Some(&0) && right.len() > right_words;
        let use_backward =
            right_words > left_words || (right_words == left_words && right_boundary && !left_boundary);
        if use_backward {
            self.conditional(Direction::Backward, &right, token)
        } else {
            self.conditional(Direction::Forward, &left, token)
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), NgramError> {
        writeln!(out, "{FORMAT_HEADER}")?;
        writeln!(out, "order\t{}", self.order)?;
        writeln!(out, "smoothing_k\t{}", self.smoothing_k)?;
        for token in &self.vocab[1..] {
            writeln!(out, "V\t{token}")?;
        }
        for (tag, table) in [("F", &self.forward), ("B", &self.backward)] {
            let mut contexts: Vec<_> = table.iter().collect();
            contexts.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(b.0)));
            for (context, counts) in contexts {
                let context: Vec<&str> = context.iter().map(|&id| self.vocab[id as usize].as_str()).collect();
                let context = context.join(" ");
                for (&token, &count) in &counts.next {
                    writeln!(out, "{tag}\t{}\t{context}\t{count}", self.vocab[token as usize])?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, NgramError> {
        let mut lines = input.lines().enumerate();
        let mut next_line = |expect: &str| -> Result<(usize, String), NgramError> {
            match lines.next() {
                Some((n, line)) => Ok((n + 1, line?)),
                None => Err(NgramError::Format {
                    line: 0,
                    message: format!("missing {expect}"),
                }),
            }
        };
        let bad = |line: usize, message: &str| NgramError::Format {
            line,
            message: message.to_string(),
        };
        let (n, header) = next_line("header")?;
        if header != FORMAT_HEADER {
            return Err(bad(n, "unrecognized header"));
        }
        let (n, order) = next_line("order")?;
        let order: usize = order
            .strip_prefix("order\t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(n, "expected order"))?;
        let (n, k) = next_line("smoothing_k")?;
        let k: f64 = k
            .strip_prefix("smoothing_k\t")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(n, "expected smoothing_k"))?;
        let mut model = Self::empty(order, k)?;
        while let Ok((n, line)) = next_line("") {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["V", token] => {
                    model.intern(token);
                }
                [tag @ ("F" | "B"), token, context, count] => {
                    let lookup = |t: &str| {
                        model
                            .index
                            .get(t)
                            .copied()
                            .ok_or_else(|| bad(n, &format!("token {t:?} not in vocabulary")))
                    };
                    let token = lookup(token)?;
                    let context = context
                        .split(' ')
                        .filter(|t| !t.is_empty())
                        .map(lookup)
                        .collect::<Result<Vec<_>, _>>()?;
                    let count: u64 = count.parse().map_err(|_| bad(n, "bad count"))?;
                    let table = if *tag == "F" {
                        &mut model.forward
                    } else {
                        &mut model.backward
                    };
                    let entry = table.entry(context).or_default();
                    entry.total += count;
                    *entry.next.entry(token).or_default() += count;
                }
                [""] => {}
                _ => return Err(bad(n, "unrecognized line")),
            }
        }
        if !model.forward.contains_key(&Vec::new()) {
            return Err(bad(0, "model has no unigram counts"));
        }
        Ok(model)
    }
}

fn count_into(table: &mut CountTable, padded: &[u32], order: usize) {
    for t in 1..padded.len() {
        for len in 0..order.min(t + 1) {
            let entry = table.entry(padded[t - len..t].to_vec()).or_default();
            entry.total += 1;
            *entry.next.entry(padded[t]).or_default() += 1;
        }
    }
}

impl SequenceOracle for NgramOracleModel {
    fn masked_logprob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError> {
        Ok(self.query_prob(query, token)?.ln())
    }

    fn vocabulary(&self) -> Option<Vec<String>> {
        Some(self.vocab.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{backward_logprob, forward_logprob, sequence_score};

    const TINY_K: f64 = 1e-12;

    fn corpus(lines: &[&str]) -> Vec<TokenSequence> {
        lines.iter().map(|l| TokenSequence::parse(l).unwrap()).collect()
    }

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::parse(s).unwrap()
    }

    fn query(slots: &[Option<&str>], target: usize) -> MaskedQuery {
        let slots = slots
            .iter()
            .map(|s| match s {
                Some(t) => Slot::Token(t.to_string()),
                None => Slot::Masked,
            })
            .collect();
        MaskedQuery::new(slots, target).unwrap()
    }

    #[test]
    fn single_continuation_is_certain() {
        let m = train_ngram_oracle(&corpus(&["a b"]), 2, TINY_K).unwrap();
        let p = m.masked_logprob(&query(&[Some("a"), None], 1), "b").unwrap();
        assert!(p.abs() < 1e-9);
    }

    #[test]
    fn two_continuations_split_evenly() {
        let m = train_ngram_oracle(&corpus(&["a b", "a c"]), 2, TINY_K).unwrap();
        let q = query(&[Some("a"), None], 1);
        assert!((m.masked_logprob(&q, "b").unwrap() - 0.5f64.ln()).abs() < 1e-9);
        assert!((m.masked_logprob(&q, "c").unwrap() - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn add_one_smoothing_by_hand() {
        // |V| = {<s>, a, b, c}; "a" is followed by b once and c once.
        let m = train_ngram_oracle(&corpus(&["a b", "a c"]), 2, 1.0).unwrap();
        assert_eq!(m.vocab_size(), 4);
        let p = m.forward_prob(&["a"], "b").unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn forward_and_backward_by_hand() {
        let m = train_ngram_oracle(&corpus(&["a b", "a c"]), 2, TINY_K).unwrap();
        // forward: P(a|<s>) = 1, P(b|a) = 1/2
        let f = forward_logprob(&m, &seq("a b")).unwrap();
        assert!((f - (1.0f64 * 0.5).ln()).abs() < 1e-9);
        // backward: P(b | </s>) = 1/2 from the reversed table, P(a | b) = 1
        let b = backward_logprob(&m, &seq("a b")).unwrap();
        assert!((b - (0.5f64).ln()).abs() < 1e-9);
        assert!((m.backward_prob(&[BOUNDARY], "b").unwrap() - 0.5).abs() < 1e-9);
        assert!((m.backward_prob(&["b"], "a").unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_token_directions_agree() {
        let m = train_ngram_oracle(&corpus(&["hello", "hello world"]), 3, 0.1).unwrap();
        let s = sequence_score(&m, &seq("hello")).unwrap();
        assert_eq!(s.forward_logprob, s.backward_logprob);
        let direct = m.forward_prob(&[BOUNDARY], "hello").unwrap().ln();
        assert_eq!(s.forward_logprob, direct);
    }

    #[test]
    fn masked_neighbours_shorten_the_context() {
        let m = train_ngram_oracle(&corpus(&["x a b", "y a c", "z d c"]), 3, 0.1).unwrap();
        // [x, MASK, MASK] target 2: the left run is broken by the mask at 1,
        // the right side is the end boundary, so the reversed model predicts
        // from </s> alone.
        let q = query(&[Some("x"), None, None], 2);
        let expected = m.backward_prob(&[BOUNDARY], "c").unwrap().ln();
        assert_eq!(m.masked_logprob(&q, "c").unwrap(), expected);
    }

    #[test]
    fn distributions_are_normalized() {
        let m = train_ngram_oracle(&corpus(&["a b c", "b a", "c c a b"]), 3, 0.1).unwrap();
        let vocab = m.vocabulary().unwrap();
        let queries = [
            query(&[None], 0),
            query(&[Some("a"), None, None], 1),
            query(&[None, Some("b"), Some("c")], 0),
            query(&[Some("c"), None, Some("a")], 1),
            query(&[Some("q"), None], 1),
        ];
        for q in &queries {
            let total: f64 = vocab.iter().map(|t| m.masked_logprob(q, t).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-9, "{q}: {total}");
        }
    }

    #[test]
    fn out_of_vocabulary_handling() {
        let m = train_ngram_oracle(&corpus(&["a b"]), 2, 0.5).unwrap();
        let q = query(&[Some("a"), None], 1);
        let unseen = m.masked_logprob(&q, "zzz").unwrap();
        // same as an in-vocabulary event never seen after "a"
        assert_eq!(unseen, m.masked_logprob(&q, "a").unwrap());
        let strict = m.clone().with_strict(true);
        assert_eq!(
            strict.masked_logprob(&q, "zzz"),
            Err(OracleError::OutOfVocabulary("zzz".into()))
        );
    }

    #[test]
    fn training_errors() {
        assert!(matches!(train_ngram_oracle(&[], 2, 0.1), Err(NgramError::EmptyCorpus)));
        let c = corpus(&["a"]);
        assert!(matches!(train_ngram_oracle(&c, 0, 0.1), Err(NgramError::BadOrder)));
        assert!(matches!(train_ngram_oracle(&c, 2, 0.0), Err(NgramError::BadSmoothing(_))));
    }

    #[test]
    fn text_format_round_trip() {
        let m = train_ngram_oracle(&corpus(&["the cat sat", "the dog , sat down"]), 3, 0.1).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = NgramOracleModel::read_from(&buf[..]).unwrap();
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(back.forward, m.forward);
        assert_eq!(back.backward, m.backward);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn appending_never_raises_forward_score() {
        let m = train_ngram_oracle(&corpus(&["a b c", "b c a"]), 2, 0.1).unwrap();
        let mut prev = forward_logprob(&m, &seq("a")).unwrap();
        for s in ["a b", "a b c", "a b c a", "a b c a a"] {
            let cur = forward_logprob(&m, &seq(s)).unwrap();
            assert!(cur <= prev);
            prev = cur;
        }
    }
}
