//! Translation of the MySQL dialect used by injection payloads into SQL the
//! embedded engine accepts. Both sides of an equivalence check go through
//! the same translation.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("unterminated string literal at byte {0}")]
    UnterminatedString(usize),
    #[error("unterminated comment at byte {0}")]
    UnterminatedComment(usize),
}

pub const SERVER_VERSION: &str = "8.0.36";

/// Rewritten statements, split at top-level `;`. Empty statements are
/// dropped.
pub fn rewrite(sql: &str) -> Result<Vec<String>, RewriteError> {
    let chars: Vec<char> = sql.chars().collect();
    let offsets: Vec<usize> = sql.char_indices().map(|(i, _)| i).collect();
    let mut stmts = Vec::new();
    let mut out = String::new();
    let mut in_exec_comment = false;
    let mut i = 0;
    let n = chars.len();
    while i < n {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            '\0' => break,
            '%' if next == Some('0') && chars.get(i + 2) == Some(&'0') => break,
            '\'' | '"' => {
                let (value, end) = read_string(&chars, i).ok_or(RewriteError::UnterminatedString(offsets[i]))?;
                out.push('\'');
                out.push_str(&value.replace('\'', "''"));
                out.push('\'');
                i = end;
                continue;
            }
            '`' => {
                let end = (i + 1..n).find(|&j| chars[j] == '`').ok_or(RewriteError::UnterminatedString(offsets[i]))?;
                let ident: String = chars[i + 1..end].iter().collect();
                out.push('"');
                out.push_str(&ident.replace('"', "\"\""));
                out.push('"');
                i = end + 1;
                continue;
            }
            '#' => {
                i = skip_line(&chars, i);
                continue;
            }
            '-' if next == Some('-') => {
                let after = chars.get(i + 2).copied();
                if after.is_none_or(|a| a.is_whitespace() || a.is_control() || a == '+') {
                    i = skip_line(&chars, i);
                } else {
                    out.push_str("- -");
                    i += 2;
                }
                continue;
            }
            '/' if next == Some('*') => {
                if chars.get(i + 2) == Some(&'!') && !in_exec_comment {
                    let mut j = i + 3;
                    let digits = chars[j..].iter().take_while(|c| c.is_ascii_digit()).count();
                    if digits == 5 || digits == 6 {
                        j += digits;
                    }
                    out.push(' ');
                    in_exec_comment = true;
                    i = j;
                } else {
                    let end = (i + 2..n.saturating_sub(1))
                        .find(|&j| chars[j] == '*' && chars[j + 1] == '/')
                        .ok_or(RewriteError::UnterminatedComment(offsets[i]))?;
                    out.push(' ');
                    i = end + 2;
                }
                continue;
            }
            '*' if next == Some('/') && in_exec_comment => {
                out.push(' ');
                in_exec_comment = false;
                i += 2;
                continue;
            }
            '&' if next == Some('&') => {
                out.push_str(" AND ");
                i += 2;
                continue;
            }
            '|' if next == Some('|') => {
                out.push_str(" OR ");
                i += 2;
                continue;
            }
            '!' if next != Some('=') => {
                out.push_str(" NOT ");
                i += 1;
                continue;
            }
            '<' if next == Some('=') && chars.get(i + 2) == Some(&'>') => {
                out.push_str(" IS ");
                i += 3;
                continue;
            }
            ';' => {
                push_statement(&mut stmts, &mut out);
                i += 1;
                continue;
            }
            '@' => {
                let system = next == Some('@');
                let start = if system { i + 2 } else { i + 1 };
                let end = word_end(&chars, start);
                let name: String = chars[start..end].iter().collect::<String>().to_ascii_lowercase();
                if system {
                    let value = match name.trim_start_matches("global.").trim_start_matches("session.") {
                        "version" => SERVER_VERSION,
                        "datadir" => "/var/lib/mysql/",
                        "hostname" => "bench",
                        _ => "",
                    };
                    out.push_str(&format!(" '{value}' "));
                } else {
                    out.push_str(" NULL ");
                }
                i = end;
                continue;
            }
            c if c.is_whitespace() || c.is_control() => {
                out.push(' ');
                i += 1;
                continue;
            }
            c if c.is_ascii_digit() => {
                let end = word_end(&chars, i);
                let word: String = chars[i..end].iter().collect();
                out.push_str(&rewrite_number(&word));
                i = end;
                continue;
            }
            c if c.is_alphabetic() || c == '_' || c == '$' => {
                let end = word_end(&chars, i);
                let word: String = chars[i..end].iter().collect();
                let next_sig = chars[end..].iter().find(|c| !c.is_whitespace()).copied();
                out.push_str(&rewrite_word(&word, next_sig == Some('(')));
                i = end;
                continue;
            }
            _ => {}
        }
        out.push(c);
        i += 1;
    }
    push_statement(&mut stmts, &mut out);
    Ok(stmts)
}

fn push_statement(stmts: &mut Vec<String>, out: &mut String) {
    let s = std::mem::take(out);
    if !s.trim().is_empty() {
        stmts.push(s);
    }
}

fn skip_line(chars: &[char], mut i: usize) -> usize {
    while i < chars.len() && chars[i] != '\n' {
        i += 1;
    }
    i
}

fn word_end(chars: &[char], mut i: usize) -> usize {
    while i < chars.len()
        && (chars[i].is_alphanumeric()
            || chars[i] == '_'
            || chars[i] == '$'
            || chars[i] == '.' && is_number_dot(chars, i))
    {
        i += 1;
    }
    i
}

/// A dot continues a word only inside a decimal number like `3.7`.
fn is_number_dot(chars: &[char], i: usize) -> bool {
    let start = (0..i).rev().take_while(|&j| chars[j].is_alphanumeric() || chars[j] == '_').last().unwrap_or(i);
    chars[start].is_ascii_digit() && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())
}

/// MySQL string with backslash escapes and doubled quotes; returns the
/// value and the index after the closing quote.
fn read_string(chars: &[char], start: usize) -> Option<(String, usize)> {
    let quote = chars[start];
    let mut value = String::new();
    let mut i = start + 1;
    while i < chars.len() {
        let c = chars[i];
        if c == '\\' {
            let e = *chars.get(i + 1)?;
            match e {
                'n' => value.push('\n'),
                't' => value.push('\t'),
                'r' => value.push('\r'),
                '0' => value.push('\0'),
                'b' => value.push('\u{8}'),
                'Z' => value.push('\u{1a}'),
                '%' | '_' => {
                    value.push('\\');
                    value.push(e);
                }
                other => value.push(other),
            }
            i += 2;
        } else if c == quote {
            if chars.get(i + 1) == Some(&quote) {
                value.push(quote);
                i += 2;
            } else {
                return Some((value, i + 1));
            }
        } else {
            value.push(c);
            i += 1;
        }
    }
    None
}

fn rewrite_number(word: &str) -> String {
    if let Some(hex) = word.strip_prefix("0x").or_else(|| word.strip_prefix("0X")) {
        if hex.len() > 15 && hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            let padded = if hex.len() % 2 == 1 { format!("0{hex}") } else { hex.to_string() };
            return format!("x'{padded}'");
        }
    }
    word.to_string()
}

fn rewrite_word(word: &str, call: bool) -> String {
    let lower = word.to_ascii_lowercase();
    match lower.as_str() {
        "rlike" => " REGEXP ".to_string(),
        "if" if call => "iif".to_string(),
        "div" => " / ".to_string(),
        "current_user" | "session_user" | "system_user" if !call => format!("{lower}()"),
        _ => word.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(sql: &str) -> String {
        let v = rewrite(sql).unwrap();
        assert_eq!(v.len(), 1, "{v:?}");
        v[0].split_whitespace().collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn comments_and_operators() {
        assert_eq!(one("a /*x*/ && b # tail"), "a AND b");
        assert_eq!(one("a -- c\n|| b"), "a OR b");
        assert_eq!(one("a --+"), "a");
        assert_eq!(one("1--1"), "1- -1");
        assert_eq!(one("/*!50000select*/ 1"), "select 1");
        assert_eq!(one("/*!union*/"), "union");
        assert_eq!(one("!a <=> b != c"), "NOT a IS b != c");
    }

    #[test]
    fn strings_and_identifiers() {
        assert_eq!(one(r#""x"='it\'s'"#), "'x'='it''s'");
        assert_eq!(one("`users`.id"), "\"users\".id");
        assert!(matches!(rewrite("'abc"), Err(RewriteError::UnterminatedString(0))));
        assert!(matches!(rewrite("a /* b"), Err(RewriteError::UnterminatedComment(2))));
    }

    #[test]
    fn statements_and_truncation() {
        assert_eq!(rewrite("select 1; select 2;").unwrap().len(), 2);
        assert_eq!(rewrite("select 1;%00 select 2").unwrap().len(), 1);
        assert_eq!(one("'a;b'"), "'a;b'");
    }

    #[test]
    fn words_and_variables() {
        assert_eq!(one("IF(1,2,3) rlike @@version"), "iif(1,2,3) REGEXP '8.0.36'");
        assert_eq!(one("3.7 div 2"), "3.7 / 2");
        assert_eq!(one("0x3a7176627a71"), "0x3a7176627a71");
        assert_eq!(one("0x61646d696e61646d696e"), "x'61646d696e61646d696e'");
    }
}
