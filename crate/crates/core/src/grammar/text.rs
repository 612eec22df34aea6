//! Dictionary text format.
//!
//! ```text
//! % comment to end of line
//! @terminator .
//! kids: small- & the- | eat+;
//! eat: kids- & candy+ | ();
//! ```

use thiserror::Error;

use super::{Connector, Direction, Disjunct, Grammar, GrammarError, Rule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarSyntaxError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: GrammarError,
    },
}

fn syntax(line: usize, message: impl Into<String>) -> GrammarSyntaxError {
    GrammarSyntaxError::Syntax {
        line,
        message: message.into(),
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || ":;|&()%@".contains(c))
}

fn parse_connector(tok: &str, line: usize) -> Result<Connector, GrammarSyntaxError> {
    let (label, direction) = match tok.chars().last() {
        Some('-') => (&tok[..tok.len() - 1], Direction::Left),
        Some('+') => (&tok[..tok.len() - 1], Direction::Right),
        _ => return Err(syntax(line, format!("connector {tok:?} must end in '+' or '-'"))),
    };
    if !valid_name(label) {
        return Err(syntax(line, format!("bad connector label in {tok:?}")));
    }
    Ok(Connector {
        label: label.to_string(),
        direction,
    })
}

fn parse_disjunct(text: &str, line: usize) -> Result<Disjunct, GrammarSyntaxError> {
    let text = text.trim();
    if text == "()" {
        return Ok(Disjunct::empty());
    }
    if text.is_empty() {
        return Err(syntax(line, "empty disjunct, write () for a word without links"));
    }
    text.split('&')
        .map(|t| {
            let t = t.trim();
            if t.is_empty() {
                Err(syntax(line, "dangling '&'"))
            } else {
                parse_connector(t, line)
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Disjunct::new)
}

fn parse_statement(text: &str, line: usize) -> Result<Rule, GrammarSyntaxError> {
    let (owner, body) = text
        .split_once(':')
        .ok_or_else(|| syntax(line, format!("expected 'owner: disjuncts' in {:?}", text.trim())))?;
    let owner = owner.trim();
    if !valid_name(owner) {
        return Err(GrammarSyntaxError::Invalid {
            line,
            source: GrammarError::BadOwner(owner.to_string()),
        });
    }
    let disjuncts = body
        .split('|')
        .map(|d| parse_disjunct(d, line))
        .collect::<Result<Vec<_>, _>>()?;
    Rule::new(owner, disjuncts).map_err(|source| GrammarSyntaxError::Invalid { line, source })
}

pub(super) fn parse_rule(text: &str) -> Result<Rule, GrammarSyntaxError> {
    let t = text.trim();
    parse_statement(t.strip_suffix(';').unwrap_or(t), 1)
}

pub(super) fn parse_grammar(text: &str) -> Result<Grammar, GrammarSyntaxError> {
    let mut grammar = Grammar::new();
    let mut pending = String::new();
    let mut pending_line = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('%').next().unwrap_or("");
        let trimmed = content.trim();
        if let Some(directive) = trimmed.strip_prefix('@') {
            if !pending.trim().is_empty() {
                return Err(syntax(line, "directive inside an unterminated rule"));
            }
            let mut parts = directive.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("terminator"), Some(t), None) => grammar.terminator = Some(t.to_string()),
                _ => return Err(syntax(line, format!("unknown directive @{directive}"))),
            }
            continue;
        }
        if pending.trim().is_empty() {
            pending_line = line;
        }
        let mut rest = content;
        while let Some(idx) = rest.find(';') {
            pending.push_str(&rest[..idx]);
            if pending.trim().is_empty() {
                return Err(syntax(line, "empty rule"));
            }
            let rule = parse_statement(&pending, pending_line)?;
            if grammar.rules.contains_key(&rule.owner) {
                for d in &rule.disjuncts {
                    if grammar.rules[&rule.owner].disjuncts.contains(d) {
                        return Err(GrammarSyntaxError::Invalid {
                            line: pending_line,
                            source: GrammarError::DuplicateDisjunct {
                                owner: rule.owner.clone(),
                                disjunct: d.to_string(),
                            },
                        });
                    }
                }
            }
            grammar.add_rule(&rule);
            pending.clear();
            pending_line = line;
            rest = &rest[idx + 1..];
        }
        pending.push_str(rest);
        pending.push(' ');
    }
    if !pending.trim().is_empty() {
        return Err(syntax(pending_line, "rule is missing its closing ';'"));
    }
    Ok(grammar)
}
