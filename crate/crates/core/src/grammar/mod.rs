//! Replacement grammar: symbols, terminal catalogs, weighted generation.

mod generate;
mod parse;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::mutation::Operator;
use crate::payload::{BranchRole, LeafRole, NodeRole};

pub use generate::{alternative_weights, weighted_choice, GenerationContext};
pub use parse::GrammarFileError;
use parse::{is_nonterminal_name, parse_rules, RawItem};

const BUILTIN_SOURCE: &str = include_str!("../../data/builtin.grammar");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrammarError {
    #[error(transparent)]
    File(#[from] GrammarFileError),
    #[error("undefined symbol `{0}`")]
    UndefinedSymbol(String),
    #[error("symbol `{0}` cannot derive a terminal string")]
    Unproductive(String),
    #[error("entry symbol `{0}` is not defined")]
    MissingEntry(String),
    #[error("`{0}` is both a nonterminal and a terminal catalog")]
    NotDisjoint(String),
    #[error("no alternative of `{0}` terminates within the depth cap")]
    DepthExhausted(String),
    #[error("no alternatives to choose from")]
    EmptyAlternatives,
    #[error("`@{0}` does not apply to `{1}`")]
    Inapplicable(&'static str, String),
}

/// Parameterized terminal: evaluated against the text of the node being
/// replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminalFn {
    InlineComment,
    InlineCommentVersioned,
    SwapCase,
    ChangeBase,
    SubqueryNumber,
    SelfText,
    WhereBody,
}

impl TerminalFn {
    pub const ALL: [TerminalFn; 7] = [
        TerminalFn::InlineComment,
        TerminalFn::InlineCommentVersioned,
        TerminalFn::SwapCase,
        TerminalFn::ChangeBase,
        TerminalFn::SubqueryNumber,
        TerminalFn::SelfText,
        TerminalFn::WhereBody,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TerminalFn::InlineComment => "inline_comment",
            TerminalFn::InlineCommentVersioned => "inline_comment_versioned",
            TerminalFn::SwapCase => "swap_case",
            TerminalFn::ChangeBase => "change_base",
            TerminalFn::SubqueryNumber => "subquery_number",
            TerminalFn::SelfText => "self",
            TerminalFn::WhereBody => "where_body",
        }
    }

    pub fn from_name(name: &str) -> Option<TerminalFn> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Nonterminal(usize),
    Catalog(String),
    Literal(String),
    Function(TerminalFn),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alternative {
    pub items: Vec<Item>,
    /// Minimal derivation height; `None` if the alternative cannot terminate.
    pub height: Option<u32>,
}

/// Named terminal value sets (sigma_*, tau_*, gamma_*).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TerminalCatalog {
    sets: BTreeMap<String, Vec<String>>,
}

impl TerminalCatalog {
    pub fn get(&self, name: &str) -> Option<&[String]> {
        self.sets.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.sets.contains_key(name)
    }

    fn extend(&mut self, name: &str, values: impl IntoIterator<Item = String>) {
        let set = self.sets.entry(name.to_string()).or_default();
        for v in values {
            if !set.contains(&v) {
                set.push(v);
            }
        }
    }

    /// Keep only the entries accepted by `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&str, &str) -> bool) {
        for (name, values) in self.sets.iter_mut() {
            values.retain(|v| keep(name, v));
        }
    }
}

/// Start symbols reachable from node roles.
pub const ENTRY_SYMBOLS: &[&str] = &[
    "S_tau",
    "S_invariant",
    "S_where",
    "S_and",
    "S_or",
    "S_any",
    "S_any_word",
    "S_any_number",
    "S_ws",
    "S_gamma",
    "S_op",
];

#[derive(Debug, Clone)]
pub struct Grammar {
    names: Vec<String>,
    ids: HashMap<String, usize>,
    rules: Vec<Vec<Alternative>>,
    catalog: TerminalCatalog,
    source: Vec<(String, Vec<Vec<RawItem>>)>,
}

impl Grammar {
    /// The grammar as declared, before any oracle verification of catalogs.
    pub fn builtin() -> Grammar {
        Grammar::from_source(BUILTIN_SOURCE).expect("built-in grammar is well formed")
    }

    pub fn from_source(source: &str) -> Result<Grammar, GrammarError> {
        let mut g = Grammar {
            names: Vec::new(),
            ids: HashMap::new(),
            rules: Vec::new(),
            catalog: TerminalCatalog::default(),
            source: Vec::new(),
        };
        g.merge_source(source)?;
        Ok(g)
    }

    /// Merge a rules file over this grammar: alternatives are appended to
    /// existing symbols, new symbols and catalogs are added.
    pub fn extended(&self, source: &str) -> Result<Grammar, GrammarError> {
        let mut g = self.clone();
        g.merge_source(source)?;
        Ok(g)
    }

    fn merge_source(&mut self, source: &str) -> Result<(), GrammarError> {
        for rule in parse_rules(source)? {
            if is_nonterminal_name(&rule.lhs) {
                match self.source.iter_mut().find(|(n, _)| *n == rule.lhs) {
                    Some((_, alts)) => {
                        for alt in rule.alternatives {
                            if !alts.contains(&alt) {
                                alts.push(alt);
                            }
                        }
                    }
                    None => self.source.push((rule.lhs, rule.alternatives)),
                }
            } else {
                let values = rule.alternatives.into_iter().map(|alt| match alt.as_slice() {
                    [RawItem::Literal(s)] => s.clone(),
                    _ => unreachable!("checked by the parser"),
                });
                self.catalog.extend(&rule.lhs, values);
            }
        }
        self.compile()
    }

    fn compile(&mut self) -> Result<(), GrammarError> {
        self.names = self.source.iter().map(|(n, _)| n.clone()).collect();
        self.ids = self.names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        for name in &self.names {
            if self.catalog.contains(name) {
                return Err(GrammarError::NotDisjoint(name.clone()));
            }
        }
        let lookup = |name: &str| -> Option<Item> {
            if let Some(&id) = self.ids.get(name) {
                Some(Item::Nonterminal(id))
            } else if self.catalog.contains(name) {
                Some(Item::Catalog(name.to_string()))
            } else {
                None
            }
        };
        let mut rules = Vec::with_capacity(self.source.len());
        for (_, alts) in &self.source {
            let mut compiled = Vec::with_capacity(alts.len());
            for alt in alts {
                let items = alt.iter().map(|it| it.resolve(&lookup)).collect::<Result<Vec<_>, _>>().map_err(|msg| {
                    GrammarError::UndefinedSymbol(
                        msg.trim_start_matches("undefined symbol `").trim_end_matches('`').to_string(),
                    )
                })?;
                compiled.push(Alternative { items, height: None });
            }
            rules.push(compiled);
        }
        self.rules = rules;
        self.compute_heights();
        for entry in ENTRY_SYMBOLS {
            let id = *self.ids.get(*entry).ok_or_else(|| GrammarError::MissingEntry(entry.to_string()))?;
            if self.symbol_height(id).is_none() {
                return Err(GrammarError::Unproductive(entry.to_string()));
            }
        }
        // every declared nonterminal must be productive unless it is only
        // starved by an emptied catalog
        for (id, name) in self.names.iter().enumerate() {
            if self.symbol_height(id).is_none() && !self.starved_by_catalog(id) {
                return Err(GrammarError::Unproductive(name.clone()));
            }
        }
        Ok(())
    }

    fn starved_by_catalog(&self, id: usize) -> bool {
        self.rules[id].iter().any(|alt| {
            alt.items
                .iter()
                .any(|it| matches!(it, Item::Catalog(c) if self.catalog.get(c).is_none_or(<[String]>::is_empty)))
        })
    }

    /// Fixpoint of minimal derivation heights. An all-terminal alternative
    /// has height 1.
    fn compute_heights(&mut self) {
        let mut heights: Vec<Option<u32>> = vec![None; self.rules.len()];
        loop {
            let mut changed = false;
            for id in 0..self.rules.len() {
                for alt_idx in 0..self.rules[id].len() {
                    let h = self.alt_height(&self.rules[id][alt_idx].items, &heights);
                    if h != self.rules[id][alt_idx].height {
                        self.rules[id][alt_idx].height = h;
                    }
                    if let Some(h) = h {
                        if heights[id].is_none_or(|cur| h < cur) {
                            heights[id] = Some(h);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn alt_height(&self, items: &[Item], heights: &[Option<u32>]) -> Option<u32> {
        let mut deepest = 0;
        for item in items {
            match item {
                Item::Nonterminal(id) => deepest = deepest.max(heights[*id]?),
                Item::Catalog(c) => {
                    if self.catalog.get(c).is_none_or(<[String]>::is_empty) {
                        return None;
                    }
                }
                Item::Literal(_) | Item::Function(_) => {}
            }
        }
        Some(deepest + 1)
    }

    pub fn symbol_id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn symbol_name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.names
    }

    pub fn alternatives(&self, id: usize) -> &[Alternative] {
        &self.rules[id]
    }

    pub fn symbol_height(&self, id: usize) -> Option<u32> {
        self.rules[id].iter().filter_map(|a| a.height).min()
    }

    pub fn catalog(&self) -> &TerminalCatalog {
        &self.catalog
    }

    /// Copy with catalog entries filtered; heights are recomputed.
    pub fn with_catalog_filter(&self, keep: impl FnMut(&str, &str) -> bool) -> Result<Grammar, GrammarError> {
        let mut g = self.clone();
        g.catalog.retain(keep);
        g.compile()?;
        Ok(g)
    }

    pub fn start_symbols(&self) -> impl Iterator<Item = &str> {
        ENTRY_SYMBOLS.iter().copied()
    }

    pub fn generate(&self, entry: &str, ctx: &mut GenerationContext, subject: &str) -> Result<String, GrammarError> {
        let id = self.symbol_id(entry).ok_or_else(|| GrammarError::UndefinedSymbol(entry.to_string()))?;
        let mut out = String::new();
        let depth_cap = ctx.depth_cap;
        generate::expand(self, id, ctx, subject, depth_cap, &mut out)?;
        Ok(out)
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, name) in self.names.iter().enumerate() {
            let alts: Vec<String> = self.rules[id]
                .iter()
                .map(|alt| {
                    alt.items
                        .iter()
                        .map(|it| match it {
                            Item::Nonterminal(i) => self.names[*i].clone(),
                            Item::Catalog(c) => c.clone(),
                            Item::Literal(s) => format!("{s:?}"),
                            Item::Function(func) => format!("@{}", func.name()),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            writeln!(f, "{name} -> {}", alts.join(" | "))?;
        }
        for name in self.catalog.names() {
            let values: Vec<String> = self.catalog.get(name).unwrap().iter().map(|v| format!("{v:?}")).collect();
            writeln!(f, "{name} -> {}", values.join(" | "))?;
        }
        Ok(())
    }
}

/// A grammar entry point for a node role, with the operator it realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub symbol: &'static str,
    pub operator: Operator,
}

/// Keywords that may be wrapped in an executable `/*!...*/` comment.
const INLINE_GATE: &[&str] = &[
    "union",
    "select",
    "from",
    "where",
    "and",
    "or",
    "order",
    "group",
    "by",
    "having",
    "limit",
    "not",
    "like",
    "sleep",
    "benchmark",
    "between",
    "regexp",
    "all",
    "distinct",
    "extractvalue",
    "updatexml",
    "concat",
    "drop",
    "update",
    "delete",
    "insert",
];

/// Primary entry symbol for a role, ignoring lexeme-dependent gating.
pub fn entry_symbol_for(role: NodeRole) -> Option<&'static str> {
    match role {
        NodeRole::Branch(BranchRole::Tautology) => Some("S_tau"),
        NodeRole::Branch(BranchRole::WhereClause) => Some("S_where"),
        NodeRole::Branch(BranchRole::DmlConnector) => Some("S_or"),
        NodeRole::Branch(BranchRole::Statement) => None,
        NodeRole::Leaf(LeafRole::Word) => Some("S_any_word"),
        NodeRole::Leaf(LeafRole::Number) => Some("S_any_number"),
        NodeRole::Leaf(LeafRole::Whitespace) => Some("S_ws"),
        NodeRole::Leaf(LeafRole::Comment) => Some("S_gamma"),
        NodeRole::Leaf(LeafRole::Operator) => Some("S_op"),
        NodeRole::Leaf(LeafRole::BoundaryLocked | LeafRole::IdentifierLocked | LeafRole::Fragment) => None,
    }
}

/// All entry points for a node with the given role and current text.
pub fn entries_for(role: NodeRole, text: &str) -> Vec<Entry> {
    let e = |symbol, operator| Entry { symbol, operator };
    match role {
        NodeRole::Branch(BranchRole::Tautology) => {
            vec![e("S_tau", Operator::TautologySubstitution), e("S_invariant", Operator::LogicalInvariant)]
        }
        NodeRole::Branch(BranchRole::WhereClause) => vec![e("S_where", Operator::WhereRewriting)],
        NodeRole::Branch(BranchRole::DmlConnector) => match text.trim().to_ascii_lowercase().as_str() {
            "and" | "&&" => vec![e("S_and", Operator::DmlSubstitution)],
            "or" | "||" => vec![e("S_or", Operator::DmlSubstitution)],
            _ => vec![],
        },
        NodeRole::Leaf(LeafRole::Word) => {
            let mut v = vec![e("S_any_word", Operator::CaseSwapping)];
            if INLINE_GATE.iter().any(|k| k.eq_ignore_ascii_case(text)) {
                v.push(e("S_any", Operator::InlineComment));
            }
            v
        }
        NodeRole::Leaf(LeafRole::Number) => vec![e("S_any_number", Operator::IntegerEncoding)],
        NodeRole::Leaf(LeafRole::Whitespace) => vec![e("S_ws", Operator::WhitespaceSubstitution)],
        NodeRole::Leaf(LeafRole::Comment) => vec![e("S_gamma", Operator::CommentRewriting)],
        NodeRole::Leaf(LeafRole::Operator) => vec![e("S_op", Operator::OperatorSwapping)],
        _ => vec![],
    }
}
