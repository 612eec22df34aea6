//! Grammar induction guided by a sequence-probability oracle.
//!
//! The pipeline: score sentences with an oracle, build the word by
//! blanked-sentence matrix, split word senses by clustering instance rows,
//! form word categories by clustering sense columns, then accept or reject
//! candidate link-grammar rules by comparing sentences generated from each
//! rule against sentences generated from its mutation.

pub mod oracle;
pub mod corpus;
pub mod probmatrix;
pub mod seed;
pub mod vector;
pub mod wsd;
pub mod categories;
pub mod grammar;
pub mod induction;
pub mod poc;
