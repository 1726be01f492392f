use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::mutation::{decode_wire, RequestMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    NonRobust,
    Hardened,
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non_robust" => Ok(Tier::NonRobust),
            "hardened" => Ok(Tier::Hardened),
            _ => Err(format!("unknown tier `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transformation {
    Lowercase,
    /// Percent-decoding; only applies to non-JSON request methods.
    UrlDecode,
    /// JSON string unescaping; only applies to JSON request methods.
    JsonDecode,
    StripBlockComments,
    CollapseWhitespace,
    StripInlineCommentMarkers,
}

impl Transformation {
    pub fn name(self) -> &'static str {
        match self {
            Transformation::Lowercase => "lowercase",
            Transformation::UrlDecode => "url_decode",
            Transformation::JsonDecode => "json_decode",
            Transformation::StripBlockComments => "strip_block_comments",
            Transformation::CollapseWhitespace => "collapse_whitespace",
            Transformation::StripInlineCommentMarkers => "strip_inline_comment_markers",
        }
    }

    pub fn apply(self, text: &str, method: RequestMethod) -> String {
        match self {
            Transformation::Lowercase => text.to_lowercase(),
            Transformation::UrlDecode if !method.is_json() => {
                decode_wire(text, method).unwrap_or_else(|_| text.to_string())
            }
            Transformation::JsonDecode if method.is_json() => {
                decode_wire(text, method).unwrap_or_else(|_| text.to_string())
            }
            Transformation::UrlDecode | Transformation::JsonDecode => text.to_string(),
            Transformation::StripBlockComments => block_comment().replace_all(text, " ").into_owned(),
            Transformation::CollapseWhitespace => collapse_whitespace(text),
            Transformation::StripInlineCommentMarkers => inline_comment().replace_all(text, " $1 ").into_owned(),
        }
    }
}

impl FromStr for Transformation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Transformation::*;
        [Lowercase, UrlDecode, JsonDecode, StripBlockComments, CollapseWhitespace, StripInlineCommentMarkers]
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown transformation `{s}`"))
    }
}

fn inline_comment() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)/\*!(?:\d{5,6})?(.*?)\*/").unwrap())
}

fn block_comment() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)/\*.*?\*/").unwrap())
}

fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for part in text.split(|c: char| c.is_whitespace() || c.is_control()).filter(|p| !p.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(part);
    }
    out
}

/// Normalization used by the hardened tier: unwrap executable comments,
/// drop other comments, lowercase, and squeeze whitespace and control
/// characters into single spaces.
pub fn preprocess(payload: &str) -> String {
    const PIPELINE: [Transformation; 4] = [
        Transformation::StripInlineCommentMarkers,
        Transformation::StripBlockComments,
        Transformation::Lowercase,
        Transformation::CollapseWhitespace,
    ];
    // unwrapping can expose new comment markers, so iterate to a fixpoint
    let mut current = payload.to_string();
    loop {
        let next = PIPELINE.iter().fold(current.clone(), |acc, t| t.apply(&acc, RequestMethod::Post));
        if next == current {
            return next;
        }
        current = next;
    }
}

#[derive(Debug, Clone)]
pub struct SignatureRule {
    pub id: String,
    pub tier: Tier,
    pub transformations: Vec<Transformation>,
    pub pattern: Regex,
}

impl SignatureRule {
    pub fn new(
        id: &str,
        tier: Tier,
        transformations: Vec<Transformation>,
        pattern: &str,
    ) -> Result<Self, regex::Error> {
        Ok(SignatureRule { id: id.to_string(), tier, transformations, pattern: Regex::new(pattern)? })
    }

    pub fn transform(&self, wire: &str, method: RequestMethod) -> String {
        self.transformations.iter().fold(wire.to_string(), |acc, t| t.apply(&acc, method))
    }

    pub fn matches(&self, wire: &str, method: RequestMethod) -> bool {
        self.pattern.is_match(&self.transform(wire, method))
    }
}

impl fmt::Display for SignatureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tier = match self.tier {
            Tier::NonRobust => "non_robust",
            Tier::Hardened => "hardened",
        };
        let ts: Vec<&str> = self.transformations.iter().map(|t| t.name()).collect();
        let ts = if ts.is_empty() { "none".to_string() } else { ts.join(",") };
        write!(f, "{}\t{tier}\t{ts}\t{}", self.id, self.pattern.as_str())
    }
}

/// The bundled pack, tab-separated: id, tier, transformations, pattern.
pub const BUILTIN_RULES: &str = include_str!("../../data/mock_rules.tsv");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule pack line {line}: {message}")]
pub struct RulePackError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct RulePack {
    pub rules: Vec<SignatureRule>,
}

impl RulePack {
    pub fn builtin() -> RulePack {
        RulePack::parse(BUILTIN_RULES).expect("bundled rule pack is valid")
    }

    pub fn parse(source: &str) -> Result<RulePack, RulePackError> {
        let errors = Self::lint(source);
        if let Some(e) = errors.into_iter().next() {
            return Err(e);
        }
        let rules = source
            .lines()
            .enumerate()
            .filter_map(|(i, l)| parse_line(l).map(|r| r.map_err(|m| (i, m))))
            .map(|r| r.expect("lint passed"))
            .collect();
        Ok(RulePack { rules })
    }

    /// Every problem in the file, not just the first.
    pub fn lint(source: &str) -> Vec<RulePackError> {
        let mut errors = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in source.lines().enumerate() {
            match parse_line(line) {
                None => {}
                Some(Err(message)) => errors.push(RulePackError { line: i + 1, message }),
                Some(Ok(rule)) if !seen.insert(rule.id.clone()) => {
                    errors.push(RulePackError { line: i + 1, message: format!("duplicate rule id `{}`", rule.id) });
                }
                Some(Ok(_)) => {}
            }
        }
        errors
    }

    pub fn tier(&self, tier: Tier) -> impl Iterator<Item = &SignatureRule> {
        self.rules.iter().filter(move |r| r.tier == tier)
    }
}

fn parse_line(line: &str) -> Option<Result<SignatureRule, String>> {
    if line.trim().is_empty() || line.starts_with('#') {
        return None;
    }
    Some((|| {
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        let [id, tier, transformations, pattern] = fields[..] else {
            return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
        };
        if id.is_empty() {
            return Err("empty rule id".into());
        }
        let tier: Tier = tier.parse()?;
        let transformations = if transformations == "none" {
            Vec::new()
        } else {
            transformations.split(',').map(|t| t.trim().parse()).collect::<Result<Vec<_>, _>>()?
        };
        SignatureRule::new(id, tier, transformations, pattern).map_err(|e| format!("invalid pattern: {e}"))
    })())
}
