//! Black-box detectors: signature mock WAF, toy scorer, remote HTTP target.

mod http;
mod rules;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::mutation::{decode_wire, RequestMethod};

pub use http::{HttpConfig, HttpDetector};
pub use rules::{preprocess, RulePack, RulePackError, SignatureRule, Tier, Transformation, BUILTIN_RULES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Blocked,
    Passed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    WithProbability,
    WithoutProbability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub score: Option<f64>,
    #[serde(skip)]
    pub latency: Duration,
    pub raw_status: Option<u16>,
    /// Rule that fired, for signature detectors.
    pub rule: Option<String>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.label == Label::Passed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DetectorError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("target kept answering 429 Too Many Requests")]
    TooManyRequests,
    #[error("remote targets require acknowledging ownership (--i-own-this-target)")]
    NotAuthorized,
    #[error("invalid target configuration: {0}")]
    Config(String),
}

pub trait Detector: Send + Sync {
    fn name(&self) -> &str;
    fn capability(&self) -> Capability;
    fn detect(&self, wire: &str, method: RequestMethod) -> Result<Verdict, DetectorError>;
    /// Number of `detect` calls served so far.
    fn calls(&self) -> u64;
}

impl<D: Detector + ?Sized> Detector for Arc<D> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn capability(&self) -> Capability {
        (**self).capability()
    }
    fn detect(&self, wire: &str, method: RequestMethod) -> Result<Verdict, DetectorError> {
        (**self).detect(wire, method)
    }
    fn calls(&self) -> u64 {
        (**self).calls()
    }
}

/// Signature WAF over a rule pack.
#[derive(Debug)]
pub struct MockWaf {
    name: String,
    tier: Tier,
    raw: Vec<SignatureRule>,
    normalized: Vec<SignatureRule>,
    extra: Vec<SignatureRule>,
    calls: AtomicU64,
}

impl MockWaf {
    pub fn new(pack: &RulePack, tier: Tier) -> Self {
        let raw: Vec<SignatureRule> = pack.tier(Tier::NonRobust).cloned().collect();
        let (normalized, extra) = match tier {
            Tier::NonRobust => (Vec::new(), Vec::new()),
            Tier::Hardened => (raw.clone(), pack.tier(Tier::Hardened).cloned().collect()),
        };
        let name = match tier {
            Tier::NonRobust => "mock-nonrobust",
            Tier::Hardened => "mock-hardened",
        };
        MockWaf { name: name.into(), tier, raw, normalized, extra, calls: AtomicU64::new(0) }
    }

    pub fn non_robust() -> Self {
        Self::new(&RulePack::builtin(), Tier::NonRobust)
    }

    pub fn hardened() -> Self {
        Self::new(&RulePack::builtin(), Tier::Hardened)
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    /// First matching rule id, without touching the call counter.
    pub fn matching_rule(&self, wire: &str, method: RequestMethod) -> Option<&str> {
        if let Some(r) = self.raw.iter().find(|r| r.matches(wire, method)) {
            return Some(&r.id);
        }
        if self.normalized.is_empty() && self.extra.is_empty() {
            return None;
        }
        let decoded = decode_wire(wire, method).unwrap_or_else(|_| wire.to_string());
        let normal = preprocess(&decoded);
        for text in [&decoded, &normal] {
            if let Some(r) = self.normalized.iter().find(|r| r.matches(text, RequestMethod::Post)) {
                return Some(&r.id);
            }
        }
        self.extra.iter().find(|r| r.matches(wire, method)).map(|r| r.id.as_str())
    }
}

impl Detector for MockWaf {
    fn name(&self) -> &str {
        &self.name
    }

    fn capability(&self) -> Capability {
        Capability::WithoutProbability
    }

    fn detect(&self, wire: &str, method: RequestMethod) -> Result<Verdict, DetectorError> {
        let start = Instant::now();
        self.calls.fetch_add(1, Ordering::Relaxed);
        let rule = self.matching_rule(wire, method).map(str::to_string);
        Ok(Verdict {
            label: if rule.is_some() { Label::Blocked } else { Label::Passed },
            score: None,
            latency: start.elapsed(),
            raw_status: None,
            rule,
        })
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

pub const SCORER_K: f64 = 0.7;

/// Fragments counted by the scorer; every match of every fragment is a hit.
const SCORER_FRAGMENTS: &[&str] = &[
    r"(?i)\b(or|and)\s",
    r"(?i)\s(or|and)\b",
    r"(?i)\bunion\s",
    r"(?i)\bselect\s",
    r"(?i)\bfrom\s",
    r"(?i)\bwhere\s",
    r"\d\s*=\s*\d",
    r"'\s*=\s*'",
    r"(?i)\b(sleep|benchmark|extractvalue|updatexml)\(",
    r"(?i)information_schema",
    r"\|\||&&",
];

/// Toy probability detector: score = 1 - exp(-k * hits).
#[derive(Debug)]
pub struct Scorer {
    fragments: Vec<Regex>,
    k: f64,
    threshold: f64,
    calls: AtomicU64,
}

impl Default for Scorer {
    fn default() -> Self {
        Scorer::new(SCORER_FRAGMENTS, SCORER_K, 0.5).expect("bundled fragments compile")
    }
}

impl Scorer {
    pub fn new(fragments: &[&str], k: f64, threshold: f64) -> Result<Self, regex::Error> {
        Ok(Scorer {
            fragments: fragments.iter().map(|f| Regex::new(f)).collect::<Result<_, _>>()?,
            k,
            threshold,
            calls: AtomicU64::new(0),
        })
    }

    pub fn hits(&self, payload: &str) -> usize {
        self.fragments.iter().map(|f| f.find_iter(payload).count()).sum()
    }

    pub fn score(&self, payload: &str) -> f64 {
        1.0 - (-self.k * self.hits(payload) as f64).exp()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Detector for Scorer {
    fn name(&self) -> &str {
        "scorer"
    }

    fn capability(&self) -> Capability {
        Capability::WithProbability
    }

    fn detect(&self, wire: &str, _method: RequestMethod) -> Result<Verdict, DetectorError> {
        let start = Instant::now();
        self.calls.fetch_add(1, Ordering::Relaxed);
        let score = self.score(wire);
        Ok(Verdict {
            label: if score >= self.threshold { Label::Blocked } else { Label::Passed },
            score: Some(score),
            latency: start.elapsed(),
            raw_status: None,
            rule: None,
        })
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Fixed-answer detector, mostly for tests and dry runs.
#[derive(Debug)]
pub struct Constant {
    label: Label,
    calls: AtomicU64,
}

impl Constant {
    pub fn new(label: Label) -> Self {
        Constant { label, calls: AtomicU64::new(0) }
    }
}

impl Detector for Constant {
    fn name(&self) -> &str {
        match self.label {
            Label::Blocked => "block-all",
            Label::Passed => "pass-all",
        }
    }

    fn capability(&self) -> Capability {
        Capability::WithoutProbability
    }

    fn detect(&self, _wire: &str, _method: RequestMethod) -> Result<Verdict, DetectorError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(Verdict { label: self.label, score: None, latency: Duration::ZERO, raw_status: None, rule: None })
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
