//! Injection-fragment lexer.
//!
//! This is not a full SQL lexer. It recognizes enough of the MySQL surface
//! syntax to split an injected fragment into contiguous tokens whose lexemes
//! concatenate back to the input.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    NumberLiteral,
    StringLiteral,
    Operator,
    Whitespace,
    Comment,
    InlineComment,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Range<usize>,
}

impl Token {
    pub fn is(&self, kind: TokenKind) -> bool {
        self.kind == kind
    }

    /// Case-insensitive keyword test.
    pub fn is_keyword(&self, word: &str) -> bool {
        self.kind == TokenKind::Keyword && self.lexeme.eq_ignore_ascii_case(word)
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Operator && self.lexeme == op
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.lexeme == p
    }

    /// Line comments (`#`, `-- `) as opposed to block comments.
    pub fn is_line_comment(&self) -> bool {
        self.kind == TokenKind::Comment && !self.lexeme.starts_with("/*")
    }

    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Whitespace | TokenKind::Comment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string literal starting at byte {0}")]
    UnterminatedString(usize),
    #[error("unterminated comment starting at byte {0}")]
    UnterminatedComment(usize),
}

pub const KEYWORDS: &[&str] = &[
    "select",
    "union",
    "from",
    "where",
    "and",
    "or",
    "like",
    "order",
    "group",
    "having",
    "not",
    "null",
    "true",
    "false",
    "rand",
    "sleep",
    "benchmark",
    "regexp",
    "between",
    "ord",
    "ascii",
    "concat",
    "limit",
    "offset",
    "insert",
    "update",
    "delete",
    "by",
    "all",
    "distinct",
    "as",
    "is",
    "in",
    "xor",
    "rlike",
    "into",
    "set",
    "values",
    "drop",
    "table",
    "exists",
    "case",
    "when",
    "then",
    "else",
    "end",
    "div",
    "mod",
    "procedure",
    "desc",
    "asc",
];

/// Function names that are not in the keyword table but are safe to
/// rewrite (case-insensitive in every MySQL build).
pub const KNOWN_FUNCTIONS: &[&str] = &[
    "version",
    "database",
    "user",
    "current_user",
    "schema",
    "char",
    "substring",
    "substr",
    "mid",
    "length",
    "count",
    "group_concat",
    "concat_ws",
    "hex",
    "unhex",
    "md5",
    "lower",
    "upper",
    "extractvalue",
    "updatexml",
    "floor",
    "ifnull",
    "coalesce",
    "if",
    "load_file",
    "system_user",
    "session_user",
    "min",
    "max",
    "left",
    "right",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

pub fn is_known_function(word: &str) -> bool {
    KNOWN_FUNCTIONS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

pub(crate) fn is_sql_space(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | '\r' | '\x0b' | '\x0c')
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

const MULTI_OPS: &[&str] = &["<=>", "<>", "!=", "<=", ">=", "&&", "||", ":=", "<<", ">>"];
const SINGLE_OPS: &[char] = &['=', '<', '>', '!', '+', '-', '*', '/', '%', '&', '|', '^', '~'];

pub fn tokenize(query: &str) -> Result<Vec<Token>, LexError> {
    let bytes = query.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < query.len() {
        let rest = &query[pos..];
        let c = rest.chars().next().expect("non-empty remainder");
        let (kind, len) = if is_sql_space(c) {
            let len = rest.find(|ch| !is_sql_space(ch)).unwrap_or(rest.len());
            (TokenKind::Whitespace, len)
        } else if let Some(body) = rest.strip_prefix("/*") {
            let end = body.find("*/").ok_or(LexError::UnterminatedComment(pos))?;
            let kind = if rest.starts_with("/*!") { TokenKind::InlineComment } else { TokenKind::Comment };
            (kind, end + 4)
        } else if c == '#' || starts_line_comment(rest) {
            (TokenKind::Comment, rest.find('\n').unwrap_or(rest.len()))
        } else if c == '\'' || c == '"' {
            (TokenKind::StringLiteral, string_len(rest, c).ok_or(LexError::UnterminatedString(pos))?)
        } else if c == '`' {
            let end = rest[1..].find('`').ok_or(LexError::UnterminatedString(pos))?;
            (TokenKind::Identifier, end + 2)
        } else if c.is_ascii_digit() {
            (TokenKind::NumberLiteral, number_len(bytes, pos))
        } else if is_word_char(c) || c == '@' {
            let len = rest
                .char_indices()
                .skip(1)
                .find(|&(_, ch)| !(is_word_char(ch) || ch == '@'))
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            let kind = if is_keyword(&rest[..len]) { TokenKind::Keyword } else { TokenKind::Identifier };
            (kind, len)
        } else if let Some(op) = MULTI_OPS.iter().find(|op| rest.starts_with(**op)) {
            (TokenKind::Operator, op.len())
        } else if SINGLE_OPS.contains(&c) {
            (TokenKind::Operator, 1)
        } else {
            (TokenKind::Punctuation, c.len_utf8())
        };
        tokens.push(Token { kind, lexeme: query[pos..pos + len].to_string(), span: pos..pos + len });
        pos += len;
    }
    Ok(tokens)
}

/// `--` opens a comment only when followed by whitespace, a control
/// character, `+` (form-encoded space) or end of input.
fn starts_line_comment(rest: &str) -> bool {
    if !rest.starts_with("--") {
        return false;
    }
    match rest[2..].chars().next() {
        None => true,
        Some(ch) => ch == '+' || ch.is_control() || is_sql_space(ch),
    }
}

fn string_len(rest: &str, quote: char) -> Option<usize> {
    let mut chars = rest.char_indices().skip(1).peekable();
    while let Some((i, ch)) = chars.next() {
        if ch == '\\' {
            chars.next();
        } else if ch == quote {
            if matches!(chars.peek(), Some(&(_, next)) if next == quote) {
                chars.next();
            } else {
                return Some(i + 1);
            }
        }
    }
    None
}

fn number_len(bytes: &[u8], start: usize) -> usize {
    let at = |i: usize| bytes.get(i).copied().unwrap_or(0);
    let mut i = start;
    if at(i) == b'0' && (at(i + 1) == b'x' || at(i + 1) == b'X') && at(i + 2).is_ascii_hexdigit() {
        i += 2;
        while at(i).is_ascii_hexdigit() {
            i += 1;
        }
        return i - start;
    }
    while at(i).is_ascii_digit() {
        i += 1;
    }
    if at(i) == b'.' && at(i + 1).is_ascii_digit() {
        i += 1;
        while at(i).is_ascii_digit() {
            i += 1;
        }
    }
    if (at(i) == b'e' || at(i) == b'E')
        && (at(i + 1).is_ascii_digit() || ((at(i + 1) == b'+' || at(i + 1) == b'-') && at(i + 2).is_ascii_digit()))
    {
        i += 2;
        while at(i).is_ascii_digit() {
            i += 1;
        }
    }
    i - start
}
