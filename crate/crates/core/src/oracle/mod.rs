//! Sequence-probability oracles and sentence scoring.
//!
//! An oracle answers masked conditional queries: given a sentence in which
//! some positions are hidden, how likely is `token` at one hidden position?
//! Sentence probabilities are assembled from those answers by the chain rule,
//! once left-to-right and once right-to-left, and combined by their geometric
//! mean. Everything is kept in natural-log space.

mod memo;
mod ngram;
mod remote;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use memo::Memoized;
pub use ngram::{train_ngram_oracle, NgramError, NgramOracleModel, BOUNDARY};
pub use remote::{MaskedPredictRequest, MaskedPredictResponse, RemoteConfig, RemoteOracle, MAX_BATCH};

/// Reserved symbol for a masked position on the wire.
pub const MASK: &str = "[MASK]";
/// Reserved symbol for the blank of a blanked sentence.
pub const BLANK: &str = "[BLANK]";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TokenError {
    #[error("empty sentence")]
    Empty,
    #[error("empty token at position {0}")]
    EmptyToken(usize),
    #[error("reserved symbol {token:?} at position {position}")]
    Reserved { token: String, position: usize },
    #[error("token {token:?} at position {position} contains whitespace")]
    Whitespace { token: String, position: usize },
}

pub(crate) fn is_reserved(token: &str) -> bool {
    [MASK, BLANK, BOUNDARY]
        .iter()
        .any(|r| r.eq_ignore_ascii_case(token))
}

/// A non-empty sentence of lowercased tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new<I, S>(tokens: I) -> Result<Self, TokenError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens: Vec<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_lowercase())
            .collect();
        if tokens.is_empty() {
            return Err(TokenError::Empty);
        }
        for (position, token) in tokens.iter().enumerate() {
            if token.is_empty() {
                return Err(TokenError::EmptyToken(position));
            }
            if is_reserved(token) {
                return Err(TokenError::Reserved {
                    token: token.clone(),
                    position,
                });
            }
            if token.chars().any(char::is_whitespace) {
                return Err(TokenError::Whitespace {
                    token: token.clone(),
                    position,
                });
            }
        }
        Ok(TokenSequence(tokens))
    }

    /// Whitespace tokenization of a line.
    pub fn parse(line: &str) -> Result<Self, TokenError> {
        Self::new(line.split_whitespace())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn reversed(&self) -> TokenSequence {
        TokenSequence(self.0.iter().rev().cloned().collect())
    }

    /// Copy of the sentence with position `index` replaced by `token`.
    pub fn with_token(&self, index: usize, token: &str) -> TokenSequence {
        let mut tokens = self.0.clone();
        tokens[index] = token.to_string();
        TokenSequence(tokens)
    }
}

impl TryFrom<Vec<String>> for TokenSequence {
    type Error = TokenError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        TokenSequence::new(tokens)
    }
}

impl From<TokenSequence> for Vec<String> {
    fn from(s: TokenSequence) -> Self {
        s.0
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// One position of a masked query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    Token(String),
    Masked,
}

impl Slot {
    pub fn token(&self) -> Option<&str> {
        match self {
            Slot::Token(t) => Some(t),
            Slot::Masked => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("target position {target} out of bounds for {len} slots")]
    OutOfBounds { target: usize, len: usize },
    #[error("target position {0} is not masked")]
    TargetNotMasked(usize),
}

/// A sentence with hidden positions and one designated target among them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskedQuery {
    slots: Vec<Slot>,
    target: usize,
    candidates: Option<Vec<String>>,
}

impl MaskedQuery {
    pub fn new(slots: Vec<Slot>, target: usize) -> Result<Self, QueryError> {
        if target >= slots.len() {
            return Err(QueryError::OutOfBounds {
                target,
                len: slots.len(),
            });
        }
        if slots[target] != Slot::Masked {
            return Err(QueryError::TargetNotMasked(target));
        }
        Ok(MaskedQuery {
            slots,
            target,
            candidates: None,
        })
    }

    pub fn with_candidates(mut self, candidates: Vec<String>) -> Self {
        self.candidates = Some(candidates);
        self
    }

    /// Query for `P(w_i | w_0..w_{i-1})`: positions `i..` are masked.
    pub fn forward(sentence: &TokenSequence, i: usize) -> MaskedQuery {
        let slots = sentence
            .tokens()
            .iter()
            .enumerate()
            .map(|(j, t)| if j < i { Slot::Token(t.clone()) } else { Slot::Masked })
            .collect();
        MaskedQuery {
            slots,
            target: i,
            candidates: None,
        }
    }

    /// Query for `P(w_i | w_{i+1}..)`: positions `..=i` are masked.
    pub fn backward(sentence: &TokenSequence, i: usize) -> MaskedQuery {
        let slots = sentence
            .tokens()
            .iter()
            .enumerate()
            .map(|(j, t)| if j > i { Slot::Token(t.clone()) } else { Slot::Masked })
            .collect();
        MaskedQuery {
            slots,
            target: i,
            candidates: None,
        }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn candidates(&self) -> Option<&[String]> {
        self.candidates.as_deref()
    }

    /// Wire form: concrete tokens with [`MASK`] at hidden positions.
    pub fn wire_tokens(&self) -> Vec<String> {
        self.slots
            .iter()
            .map(|s| s.token().unwrap_or(MASK).to_string())
            .collect()
    }
}

impl fmt::Display for MaskedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, slot) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match slot {
                Slot::Token(t) => f.write_str(t)?,
                Slot::Masked => write!(f, "MASK{}", i + 1)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle unavailable: {0}")]
    Unavailable(String),
    #[error("token {0:?} is out of vocabulary")]
    OutOfVocabulary(String),
    #[error("malformed oracle response: {0}")]
    BadResponse(String),
}

/// Anything that can answer masked conditional queries.
pub trait SequenceOracle: Send + Sync {
    /// `log P(target = token | unmasked positions)`.
    fn masked_logprob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError>;

    fn masked_logprobs(
        &self,
        query: &MaskedQuery,
        candidates: &[String],
    ) -> Result<Vec<f64>, OracleError> {
        candidates
            .iter()
            .map(|c| self.masked_logprob(query, c))
            .collect()
    }

    /// The full candidate vocabulary, when the oracle can enumerate it.
    fn vocabulary(&self) -> Option<Vec<String>> {
        None
    }
}

impl<O: SequenceOracle + ?Sized> SequenceOracle for &O {
    fn masked_logprob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError> {
        (**self).masked_logprob(query, token)
    }

    fn masked_logprobs(
        &self,
        query: &MaskedQuery,
        candidates: &[String],
    ) -> Result<Vec<f64>, OracleError> {
        (**self).masked_logprobs(query, candidates)
    }

    fn vocabulary(&self) -> Option<Vec<String>> {
        (**self).vocabulary()
    }
}

impl<O: SequenceOracle + ?Sized> SequenceOracle for Box<O> {
    fn masked_logprob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError> {
        (**self).masked_logprob(query, token)
    }

    fn masked_logprobs(
        &self,
        query: &MaskedQuery,
        candidates: &[String],
    ) -> Result<Vec<f64>, OracleError> {
        (**self).masked_logprobs(query, candidates)
    }

    fn vocabulary(&self) -> Option<Vec<String>> {
        (**self).vocabulary()
    }
}

impl<O: SequenceOracle + ?Sized> SequenceOracle for std::sync::Arc<O> {
    fn masked_logprob(&self, query: &MaskedQuery, token: &str) -> Result<f64, OracleError> {
        (**self).masked_logprob(query, token)
    }

    fn masked_logprobs(
        &self,
        query: &MaskedQuery,
        candidates: &[String],
    ) -> Result<Vec<f64>, OracleError> {
        (**self).masked_logprobs(query, candidates)
    }

    fn vocabulary(&self) -> Option<Vec<String>> {
        (**self).vocabulary()
    }
}

pub fn masked_token_logprob<O: SequenceOracle + ?Sized>(
    oracle: &O,
    query: &MaskedQuery,
    token: &str,
) -> Result<f64, OracleError> {
    oracle.masked_logprob(query, token)
}

/// `Σ_i log P(w_i | w_0..w_{i-1})`.
pub fn forward_logprob<O: SequenceOracle + ?Sized>(
    oracle: &O,
    sentence: &TokenSequence,
) -> Result<f64, OracleError> {
    let mut total = 0.0;
    for (i, token) in sentence.tokens().iter().enumerate() {
        total += oracle.masked_logprob(&MaskedQuery::forward(sentence, i), token)?;
    }
    Ok(total)
}

/// `Σ_i log P(w_i | w_{i+1}..w_N)`, accumulated from the last token back.
pub fn backward_logprob<O: SequenceOracle + ?Sized>(
    oracle: &O,
    sentence: &TokenSequence,
) -> Result<f64, OracleError> {
    let mut total = 0.0;
    for (i, token) in sentence.tokens().iter().enumerate().rev() {
        total += oracle.masked_logprob(&MaskedQuery::backward(sentence, i), token)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub forward_logprob: f64,
    pub backward_logprob: f64,
    pub combined_logprob: f64,
}

impl SequenceScore {
    /// Log-space geometric mean of the two directional scores.
    pub fn from_directions(forward_logprob: f64, backward_logprob: f64) -> Self {
        SequenceScore {
            forward_logprob,
            backward_logprob,
            combined_logprob: (forward_logprob + backward_logprob) / 2.0,
        }
    }
}

pub fn sequence_score<O: SequenceOracle + ?Sized>(
    oracle: &O,
    sentence: &TokenSequence,
) -> Result<SequenceScore, OracleError> {
    Ok(SequenceScore::from_directions(
        forward_logprob(oracle, sentence)?,
        backward_logprob(oracle, sentence)?,
    ))
}
