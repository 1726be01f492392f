//! Left/right boundary detection.
//!
//! The injected fragment sits between a prefix that closes the host query's
//! literal context (`1'`, `1")`) and a suffix that neutralizes whatever the
//! host query appends (`--+`, `#`, or a quote-rebalancing tail such as
//! `AND ("x"="x`). Both sides are located with ordered pattern tables; the
//! longest match wins and ties go to the earlier pattern.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundarySplit {
    pub left: String,
    pub query: String,
    pub right: String,
}

impl BoundarySplit {
    pub fn concat(&self) -> String {
        format!("{}{}{}", self.left, self.query, self.right)
    }
}

const LEFT_PATTERNS: &[&str] = &[
    // value, closing quote, closing parentheses
    r#"^[\w.@-]*['"]\)*"#,
    // value, closing parentheses (numeric context)
    r#"^[\w.@-]*\)+"#,
];

const RIGHT_PATTERNS: &[&str] = &[
    r"(?s)--[\s+\-].*$",
    r"--$",
    r"(?s)#.*$",
    r";?%00$",
    // quote-rebalancing tails; the final literal stays open for the host
    // query's closing quote
    r#"(?i)\b(and|or)\s*\(*\s*'[^']*'\s*(=|like)\s*'[^']*$"#,
    r#"(?i)\b(and|or)\s*\(*\s*"[^"]*"\s*(=|like)\s*"[^"]*$"#,
    // numeric rebalancing: `AND (7215=7215`
    r"(?i)\b(and|or)\s*\(+\s*\d+\s*=\s*\d+$",
];

fn compiled(patterns: &'static [&'static str], cell: &'static OnceLock<Vec<Regex>>) -> &'static [Regex] {
    cell.get_or_init(|| patterns.iter().map(|p| Regex::new(p).expect("boundary pattern compiles")).collect())
}

fn left_table() -> &'static [Regex] {
    static CELL: OnceLock<Vec<Regex>> = OnceLock::new();
    compiled(LEFT_PATTERNS, &CELL)
}

fn right_table() -> &'static [Regex] {
    static CELL: OnceLock<Vec<Regex>> = OnceLock::new();
    compiled(RIGHT_PATTERNS, &CELL)
}

/// Length of the longest right-boundary match that ends at `text.len()`,
/// searching only from `min_start` on.
fn right_match_start(text: &str, min_start: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for re in right_table() {
        // leftmost start that still reaches the end of the text
        let mut from = min_start;
        while from <= text.len() {
            let Some(m) = re.find_at(text, from) else { break };
            if m.end() == text.len() {
                if best.is_none_or(|b| m.start() < b) {
                    best = Some(m.start());
                }
                break;
            }
            from = next_char_boundary(text, m.start());
        }
    }
    best
}

fn next_char_boundary(text: &str, i: usize) -> usize {
    let mut j = i + 1;
    while j < text.len() && !text.is_char_boundary(j) {
        j += 1;
    }
    j
}

pub fn split_boundaries(text: &str) -> BoundarySplit {
    let left_len = left_table().iter().filter_map(|re| re.find(text).map(|m| m.end())).max().unwrap_or(0);
    // a prefix made only of value characters is part of the query
    let left_len = if text[..left_len].contains(['\'', '"', ')']) { left_len } else { 0 };

    let right_start = right_match_start(text, left_len).unwrap_or(text.len());
    BoundarySplit {
        left: text[..left_len].to_string(),
        query: text[left_len..right_start].to_string(),
        right: text[right_start..].to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(text: &str) -> (String, String, String) {
        let s = split_boundaries(text);
        (s.left, s.query, s.right)
    }

    #[test]
    fn classic_quote_and_comment() {
        assert_eq!(parts("1' or 1 = 1 --+"), ("1'".into(), " or 1 = 1 ".into(), "--+".into()));
    }

    #[test]
    fn no_markers() {
        assert_eq!(parts("or 1=1"), ("".into(), "or 1=1".into(), "".into()));
    }

    #[test]
    fn sqlmap_double_quote_paren() {
        assert_eq!(
            parts("1\") AND 7778=7778 AND (\"x\"=\"x"),
            ("1\")".into(), " AND 7778=7778 ".into(), "AND (\"x\"=\"x".into())
        );
    }

    #[test]
    fn hash_and_null_byte_terminators() {
        assert_eq!(parts("1' or 2>1#").2, "#");
        assert_eq!(parts("1' or 2>1;%00").2, ";%00");
        assert_eq!(parts("-1) union select 1 -- -").0, "-1)");
    }

    #[test]
    fn numeric_rebalancing_tail() {
        assert_eq!(
            parts("1) AND 5821=5821 AND (7215=7215"),
            ("1)".into(), " AND 5821=5821 ".into(), "AND (7215=7215".into())
        );
    }

    #[test]
    fn whole_payload_can_be_boundary() {
        let s = split_boundaries("' or 'a'='a");
        assert_eq!(s.left, "'");
        assert_eq!(s.right, "or 'a'='a");
        assert_eq!(s.concat(), "' or 'a'='a");
    }
}
