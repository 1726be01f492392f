//! Plain-text rules format.
//!
//! ```text
//! # comment
//! S_true -> sigma_true | S_true S_ws sigma_and S_ws sigma_true
//! sigma_true -> "1" | "2<>3"
//! S_any -> @inline_comment
//! ```

use super::{Item, TerminalFn};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct GrammarFileError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawItem {
    Symbol(String),
    Literal(String),
    Function(TerminalFn),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawRule {
    pub line: usize,
    pub lhs: String,
    pub alternatives: Vec<Vec<RawItem>>,
}

pub(crate) fn is_nonterminal_name(name: &str) -> bool {
    name.starts_with("S_")
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn parse_rules(source: &str) -> Result<Vec<RawRule>, GrammarFileError> {
    let mut rules = Vec::new();
    for (idx, raw_line) in source.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| GrammarFileError { line, message };
        let (lhs, rhs) = trimmed.split_once("->").ok_or_else(|| err("expected `LHS -> alternatives`".into()))?;
        let lhs = lhs.trim();
        if !is_name(lhs) {
            return Err(err(format!("invalid left-hand side `{lhs}`")));
        }
        let alternatives = parse_alternatives(rhs).map_err(err)?;
        if !is_nonterminal_name(lhs) && alternatives.iter().any(|alt| !matches!(alt.as_slice(), [RawItem::Literal(_)]))
        {
            return Err(err(format!("catalog `{lhs}` may only list single quoted literals")));
        }
        rules.push(RawRule { line, lhs: lhs.to_string(), alternatives });
    }
    Ok(rules)
}

fn parse_alternatives(rhs: &str) -> Result<Vec<Vec<RawItem>>, String> {
    let mut alternatives = vec![Vec::new()];
    let mut chars = rhs.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '|' {
            chars.next();
            alternatives.push(Vec::new());
        } else if c == '"' {
            chars.next();
            let mut lit = String::new();
            let mut closed = false;
            while let Some((_, ch)) = chars.next() {
                match ch {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => lit.push(parse_escape(&mut chars)?),
                    other => lit.push(other),
                }
            }
            if !closed {
                return Err("unterminated string literal".into());
            }
            alternatives.last_mut().unwrap().push(RawItem::Literal(lit));
        } else {
            let mut end = rhs.len();
            while let Some(&(i, ch)) = chars.peek() {
                if ch.is_whitespace() || ch == '|' || ch == '"' {
                    end = i;
                    break;
                }
                chars.next();
            }
            let word = &rhs[start..end];
            let item = if let Some(name) = word.strip_prefix('@') {
                RawItem::Function(TerminalFn::from_name(name).ok_or_else(|| format!("unknown function `@{name}`"))?)
            } else if is_name(word) {
                RawItem::Symbol(word.to_string())
            } else {
                return Err(format!("unexpected `{word}`"));
            };
            alternatives.last_mut().unwrap().push(item);
        }
    }
    if alternatives.iter().any(Vec::is_empty) {
        return Err("empty alternative".into());
    }
    Ok(alternatives)
}

fn parse_escape(chars: &mut std::iter::Peekable<std::str::CharIndices<'_>>) -> Result<char, String> {
    match chars.next().map(|(_, c)| c) {
        Some('n') => Ok('\n'),
        Some('t') => Ok('\t'),
        Some('r') => Ok('\r'),
        Some('f') => Ok('\x0c'),
        Some('v') => Ok('\x0b'),
        Some('\\') => Ok('\\'),
        Some('"') => Ok('"'),
        Some('x') => {
            let hex: String = (0..2).filter_map(|_| chars.next().map(|(_, c)| c)).collect();
            u8::from_str_radix(&hex, 16).map(char::from).map_err(|_| format!("bad \\x escape `{hex}`"))
        }
        Some(other) => Err(format!("unknown escape `\\{other}`")),
        None => Err("dangling backslash".into()),
    }
}

impl RawItem {
    pub(crate) fn resolve(&self, lookup: &impl Fn(&str) -> Option<Item>) -> Result<Item, String> {
        Ok(match self {
            RawItem::Literal(s) => Item::Literal(s.clone()),
            RawItem::Function(f) => Item::Function(*f),
            RawItem::Symbol(name) => lookup(name).ok_or_else(|| format!("undefined symbol `{name}`"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rules_and_catalogs() {
        let rules = parse_rules("# c\nS_a -> S_b \"x\" | @swap_case\nsig -> \"\\t\" | \"a|b\"\n").unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].alternatives.len(), 2);
        assert_eq!(rules[1].alternatives[0], vec![RawItem::Literal("\t".into())]);
        assert_eq!(rules[1].alternatives[1], vec![RawItem::Literal("a|b".into())]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_rules("S_a -> \"x\"\n\nS_b \"y\"\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = parse_rules("S_a -> @nope\n").unwrap_err();
        assert!(err.message.contains("@nope"));
        let err = parse_rules("cat -> S_a\n").unwrap_err();
        assert!(err.message.contains("catalog"));
        let err = parse_rules("S_a -> \"x\" | \n").unwrap_err();
        assert_eq!(err.message, "empty alternative");
        let err = parse_rules("S_a -> \"x\n").unwrap_err();
        assert_eq!(err.message, "unterminated string literal");
    }
}
