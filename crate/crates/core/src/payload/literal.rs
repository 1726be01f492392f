//! Literal values and comparison evaluation used for tautology tagging.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Num;

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    /// Decimal or hex number, kept as an exact rational. `text` is the
    /// signed decimal lexeme (None for hex), which `LIKE` compares as a string.
    Number {
        value: BigRational,
        text: Option<String>,
    },
    Str(String),
}

impl Literal {
    /// Parse a number lexeme, optionally negated.
    pub fn number(lexeme: &str, negative: bool) -> Option<Literal> {
        let (value, text) = if let Some(hex) = lexeme.strip_prefix("0x").or_else(|| lexeme.strip_prefix("0X")) {
            (BigRational::from_integer(BigInt::from_str_radix(hex, 16).ok()?), None)
        } else {
            (parse_decimal(lexeme)?, Some(lexeme.to_string()))
        };
        let value = if negative { -value } else { value };
        let text = text.map(|t| if negative { format!("-{t}") } else { t });
        Some(Literal::Number { value, text })
    }

    /// Parse a quoted string lexeme (single or double quotes, MySQL escapes).
    pub fn string(lexeme: &str) -> Option<Literal> {
        let quote = lexeme.chars().next()?;
        if !(quote == '\'' || quote == '"') || lexeme.len() < 2 || !lexeme.ends_with(quote) {
            return None;
        }
        Some(Literal::Str(unescape(&lexeme[1..lexeme.len() - 1], quote)))
    }
}

fn parse_decimal(lexeme: &str) -> Option<BigRational> {
    let lower = lexeme.to_ascii_lowercase();
    let (mantissa, exponent) = match lower.split_once('e') {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (lower.as_str(), 0),
    };
    if exponent.unsigned_abs() > 400 {
        return None;
    }
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    Some(if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    })
}

pub(crate) fn unescape(body: &str, quote: char) -> String {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some('0') => out.push('\0'),
                Some('b') => out.push('\x08'),
                Some('Z') => out.push('\x1a'),
                // MySQL keeps the backslash for LIKE wildcards
                Some(w @ ('%' | '_')) => {
                    out.push('\\');
                    out.push(w);
                }
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else if c == quote && chars.peek() == Some(&quote) {
            chars.next();
            out.push(quote);
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    NotEq,
    Lt,
    Gt,
    Le,
    Ge,
    Like,
}

impl CompareOp {
    pub fn parse(lexeme: &str) -> Option<CompareOp> {
        Some(match lexeme.to_ascii_lowercase().as_str() {
            "=" => CompareOp::Eq,
            "<>" | "!=" => CompareOp::NotEq,
            "<" => CompareOp::Lt,
            ">" => CompareOp::Gt,
            "<=" => CompareOp::Le,
            ">=" => CompareOp::Ge,
            "like" => CompareOp::Like,
            _ => return None,
        })
    }
}

/// Evaluate `left op right`. `None` when the comparison is outside the
/// supported subset (mixed types, hex under LIKE, LIKE wildcards).
pub fn evaluate(left: &Literal, op: CompareOp, right: &Literal) -> Option<bool> {
    use std::cmp::Ordering;
    if op == CompareOp::Like {
        let (l, r) = match (left, right) {
            (Literal::Str(l), Literal::Str(r)) => (l.as_str(), r.as_str()),
            (Literal::Number { text: Some(l), .. }, Literal::Number { text: Some(r), .. }) => (l.as_str(), r.as_str()),
            _ => return None,
        };
        if r.contains(['%', '_', '\\']) {
            return None;
        }
        return Some(l == r);
    }
    let ord: Ordering = match (left, right) {
        (Literal::Number { value: l, .. }, Literal::Number { value: r, .. }) => l.cmp(r),
        (Literal::Str(l), Literal::Str(r)) => l.cmp(r),
        _ => return None,
    };
    Some(match op {
        CompareOp::Eq => ord.is_eq(),
        CompareOp::NotEq => ord.is_ne(),
        CompareOp::Lt => ord.is_lt(),
        CompareOp::Gt => ord.is_gt(),
        CompareOp::Le => ord.is_le(),
        CompareOp::Ge => ord.is_ge(),
        CompareOp::Like => unreachable!(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(s: &str) -> Literal {
        match s.strip_prefix('-') {
            Some(rest) => Literal::number(rest, true).unwrap(),
            None => Literal::number(s, false).unwrap(),
        }
    }

    #[test]
    fn paper_tautology_forms() {
        assert_eq!(evaluate(&num("1"), CompareOp::Eq, &num("1")), Some(true));
        assert_eq!(evaluate(&num("-3.7"), CompareOp::Eq, &num("-3.7")), Some(true));
        assert_eq!(evaluate(&num("1"), CompareOp::Eq, &num("1.0")), Some(true));
        assert_eq!(evaluate(&num("1"), CompareOp::Like, &num("1")), Some(true));
        let foo = Literal::string("'foo'").unwrap();
        assert_eq!(evaluate(&foo, CompareOp::Eq, &foo), Some(true));
    }

    #[test]
    fn hex_and_exponent_values() {
        assert_eq!(evaluate(&num("0x2"), CompareOp::Eq, &num("2")), Some(true));
        assert_eq!(evaluate(&num("1e3"), CompareOp::Eq, &num("1000")), Some(true));
        assert_eq!(evaluate(&num("0x100"), CompareOp::Gt, &num("255")), Some(true));
    }

    #[test]
    fn falsehoods_and_unknowns() {
        assert_eq!(evaluate(&num("1"), CompareOp::Eq, &num("2")), Some(false));
        assert_eq!(evaluate(&num("1"), CompareOp::Like, &num("1.0")), Some(false));
        let s = Literal::string("'1'").unwrap();
        assert_eq!(evaluate(&s, CompareOp::Eq, &num("1")), None);
        let wild = Literal::string("'f%'").unwrap();
        assert_eq!(evaluate(&s, CompareOp::Like, &wild), None);
        assert_eq!(evaluate(&num("-0.0"), CompareOp::Eq, &num("0")), Some(true));
    }

    #[test]
    fn case_sensitive_strings() {
        let a = Literal::string("'Foo'").unwrap();
        let b = Literal::string("\"foo\"").unwrap();
        assert_eq!(evaluate(&a, CompareOp::Eq, &b), Some(false));
        assert_eq!(Literal::string(r"'it\'s'"), Some(Literal::Str("it's".into())));
    }
}
