use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::Num;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Grammar, GrammarError, Item, TerminalFn};

/// Mutable state of one or more derivations: per-alternative use counts on
/// the current expansion stack, the decay factor and the RNG.
#[derive(Debug, Clone)]
pub struct GenerationContext {
    pub decay: f64,
    pub depth_cap: u32,
    counts: HashMap<(usize, usize), u32>,
    rng: ChaCha8Rng,
}

impl GenerationContext {
    pub fn new(seed: u64) -> Self {
        Self::from_rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        GenerationContext { decay: 0.5, depth_cap: 12, counts: HashMap::new(), rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn count(&self, symbol: usize, alt: usize) -> u32 {
        self.counts.get(&(symbol, alt)).copied().unwrap_or(0)
    }

    /// True when no alternative is currently on the expansion stack.
    pub fn is_idle(&self) -> bool {
        self.counts.values().all(|&c| c == 0)
    }
}

/// Weight `decay^count` for each alternative.
pub fn alternative_weights(decay: f64, counts: &[u32]) -> Vec<f64> {
    counts.iter().map(|&c| decay.powi(c as i32)).collect()
}

pub fn weighted_choice<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize, GrammarError> {
    let dist = WeightedIndex::new(weights).map_err(|_| GrammarError::EmptyAlternatives)?;
    Ok(dist.sample(rng))
}

pub(super) fn expand(
    grammar: &Grammar,
    symbol: usize,
    ctx: &mut GenerationContext,
    subject: &str,
    budget: u32,
    out: &mut String,
) -> Result<(), GrammarError> {
    let alts = grammar.alternatives(symbol);
    let eligible: Vec<usize> = (0..alts.len()).filter(|&i| alts[i].height.is_some_and(|h| h <= budget)).collect();
    if eligible.is_empty() {
        return Err(GrammarError::DepthExhausted(grammar.symbol_name(symbol).to_string()));
    }
    let counts: Vec<u32> = eligible.iter().map(|&i| ctx.count(symbol, i)).collect();
    let weights = alternative_weights(ctx.decay, &counts);
    let chosen = eligible[weighted_choice(&weights, &mut ctx.rng)?];

    *ctx.counts.entry((symbol, chosen)).or_insert(0) += 1;
    let result = expand_items(grammar, &alts[chosen].items, ctx, subject, budget, out);
    if let Some(c) = ctx.counts.get_mut(&(symbol, chosen)) {
        *c -= 1;
    }
    result
}

fn expand_items(
    grammar: &Grammar,
    items: &[Item],
    ctx: &mut GenerationContext,
    subject: &str,
    budget: u32,
    out: &mut String,
) -> Result<(), GrammarError> {
    for item in items {
        match item {
            Item::Nonterminal(id) => expand(grammar, *id, ctx, subject, budget - 1, out)?,
            Item::Catalog(name) => {
                let values = grammar.catalog().get(name).unwrap_or(&[]);
                if values.is_empty() {
                    return Err(GrammarError::EmptyAlternatives);
                }
                out.push_str(&values[ctx.rng.gen_range(0..values.len())]);
            }
            Item::Literal(s) => out.push_str(s),
            Item::Function(f) => {
                let text = apply(*f, subject, &mut ctx.rng)
                    .ok_or_else(|| GrammarError::Inapplicable(f.name(), subject.to_string()))?;
                out.push_str(&text);
            }
        }
    }
    Ok(())
}

pub(super) fn apply(f: TerminalFn, subject: &str, rng: &mut impl Rng) -> Option<String> {
    match f {
        TerminalFn::InlineComment => (!subject.is_empty()).then(|| format!("/*!{subject}*/")),
        TerminalFn::InlineCommentVersioned => {
            let version = VERSIONS[rng.gen_range(0..VERSIONS.len())];
            (!subject.is_empty()).then(|| format!("/*!{version}{subject}*/"))
        }
        TerminalFn::SwapCase => swap_case(subject, rng),
        TerminalFn::ChangeBase => change_base(subject),
        TerminalFn::SubqueryNumber => is_plain_number(subject).then(|| format!("(select {subject})")),
        TerminalFn::SelfText => Some(subject.to_string()),
        TerminalFn::WhereBody => {
            let t = subject.trim_start();
            let body = t.get(..5).filter(|w| w.eq_ignore_ascii_case("where")).map(|_| &t[5..])?;
            let body = body.trim_start_matches(|c: char| crate::payload::is_sql_space(c));
            (!body.is_empty()).then(|| body.to_string())
        }
    }
}

/// Version gates at or below every server the bench emulates.
const VERSIONS: [u32; 8] = [40000, 40100, 50000, 50001, 50500, 50600, 50700, 80000];

fn is_plain_number(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
        || s.len() > 2 && s[..2].eq_ignore_ascii_case("0x") && s[2..].bytes().all(|b| b.is_ascii_hexdigit())
}

fn swap_case(subject: &str, rng: &mut impl Rng) -> Option<String> {
    if !subject.chars().any(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    for _ in 0..8 {
        let s: String =
            subject.chars().map(|c| if c.is_ascii_alphabetic() && rng.gen_bool(0.5) { flip(c) } else { c }).collect();
        if s != subject {
            return Some(s);
        }
    }
    let i = subject.find(|c: char| c.is_ascii_alphabetic())?;
    let mut s = subject.to_string();
    let c = flip(s[i..].chars().next()?);
    s.replace_range(i..i + 1, &c.to_string());
    Some(s)
}

fn flip(c: char) -> char {
    if c.is_ascii_lowercase() {
        c.to_ascii_uppercase()
    } else {
        c.to_ascii_lowercase()
    }
}

/// Decimal integers become hexadecimal and vice versa.
fn change_base(subject: &str) -> Option<String> {
    if subject.len() > 2 && subject[..2].eq_ignore_ascii_case("0x") {
        let n = BigUint::from_str_radix(&subject[2..], 16).ok()?;
        Some(n.to_str_radix(10))
    } else if !subject.is_empty() && subject.bytes().all(|b| b.is_ascii_digit()) {
        let n = BigUint::from_str_radix(subject, 10).ok()?;
        Some(format!("0x{}", n.to_str_radix(16)))
    } else {
        None
    }
}
