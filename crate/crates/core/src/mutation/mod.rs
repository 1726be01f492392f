//! Grammar-driven node replacements and request-method encodings.

mod encoding;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grammar::{entries_for, GenerationContext, Grammar};
use crate::payload::{is_word_char, tokenize, NodeRef, PayloadTree, StaleNodeRef};

pub use encoding::{adapt_for_method, decode_wire, DecodeError, RequestMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    CaseSwapping,
    WhitespaceSubstitution,
    CommentInjection,
    CommentRewriting,
    IntegerEncoding,
    OperatorSwapping,
    LogicalInvariant,
    InlineComment,
    WhereRewriting,
    DmlSubstitution,
    TautologySubstitution,
}

impl Operator {
    pub const ALL: [Operator; 11] = [
        Operator::CaseSwapping,
        Operator::WhitespaceSubstitution,
        Operator::CommentInjection,
        Operator::CommentRewriting,
        Operator::IntegerEncoding,
        Operator::OperatorSwapping,
        Operator::LogicalInvariant,
        Operator::InlineComment,
        Operator::WhereRewriting,
        Operator::DmlSubstitution,
        Operator::TautologySubstitution,
    ];

    /// Operators whose output is valid under every request method.
    pub fn method_flexible(self) -> bool {
        matches!(self, Operator::WhitespaceSubstitution | Operator::CommentInjection | Operator::DmlSubstitution)
    }

    pub fn name(self) -> &'static str {
        match self {
            Operator::CaseSwapping => "case_swapping",
            Operator::WhitespaceSubstitution => "whitespace_substitution",
            Operator::CommentInjection => "comment_injection",
            Operator::CommentRewriting => "comment_rewriting",
            Operator::IntegerEncoding => "integer_encoding",
            Operator::OperatorSwapping => "operator_swapping",
            Operator::LogicalInvariant => "logical_invariant",
            Operator::InlineComment => "inline_comment",
            Operator::WhereRewriting => "where_rewriting",
            Operator::DmlSubstitution => "dml_substitution",
            Operator::TautologySubstitution => "tautology_substitution",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MutationAction {
    pub node_ref: NodeRef,
    pub replacement: String,
    pub operator: Operator,
    pub method_flexible: bool,
}

impl MutationAction {
    pub fn new(node_ref: NodeRef, replacement: String, operator: Operator) -> Self {
        MutationAction { node_ref, replacement, operator, method_flexible: operator.method_flexible() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error(transparent)]
    Stale(#[from] StaleNodeRef),
    #[error("replacement would merge with neighbouring tokens")]
    Splice,
}

pub const DEFAULT_CANDIDATE_CAP: usize = 16;
const ATTEMPTS_PER_CANDIDATE: usize = 4;

/// Proposes and applies actions for one grammar and request method.
#[derive(Debug, Clone)]
pub struct Mutator {
    grammar: Arc<Grammar>,
    method: RequestMethod,
    cap: usize,
}

impl Mutator {
    pub fn new(grammar: Arc<Grammar>, method: RequestMethod) -> Self {
        Mutator { grammar, method, cap: DEFAULT_CANDIDATE_CAP }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn method(&self) -> RequestMethod {
        self.method
    }

    /// Up to `cap` distinct candidate actions for one node. Entry symbols
    /// take turns so that a node with several entries gets a mix.
    pub fn propose(
        &self,
        tree: &PayloadTree,
        node_ref: &NodeRef,
        ctx: &mut GenerationContext,
    ) -> Result<Vec<MutationAction>, StaleNodeRef> {
        let (node, _) = tree.resolve(node_ref)?;
        if node.is_locked() {
            return Ok(Vec::new());
        }
        let subject = node.text();
        let entries = entries_for(node.role(), &subject);
        let mut attempts = vec![0usize; entries.len()];
        let max_attempts = ATTEMPTS_PER_CANDIDATE * self.cap;
        let mut out: Vec<MutationAction> = Vec::new();
        while out.len() < self.cap && attempts.iter().any(|&a| a < max_attempts) {
            for (k, entry) in entries.iter().enumerate() {
                while attempts[k] < max_attempts && out.len() < self.cap {
                    attempts[k] += 1;
                    let Ok(text) = self.grammar.generate(entry.symbol, ctx, &subject) else {
                        continue;
                    };
                    if text == subject || out.iter().any(|a| a.replacement == text) {
                        continue;
                    }
                    if self.method == RequestMethod::Get && text.contains('#') {
                        continue;
                    }
                    let operator = match entry.operator {
                        Operator::WhitespaceSubstitution if text.contains("/*") => Operator::CommentInjection,
                        op => op,
                    };
                    let action = MutationAction::new(node_ref.clone(), text, operator);
                    if self.splice_ok(tree, &action) {
                        out.push(action);
                        break;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Candidates for every operable node, left to right.
    pub fn propose_all(&self, tree: &PayloadTree, ctx: &mut GenerationContext) -> Vec<MutationAction> {
        tree.operable_nodes().iter().flat_map(|r| self.propose(tree, r, ctx).unwrap_or_default()).collect()
    }

    /// Whether `action` can still be applied to `tree`.
    pub fn is_applicable(&self, tree: &PayloadTree, action: &MutationAction) -> bool {
        match tree.resolve(&action.node_ref) {
            Ok((node, _)) => !node.is_locked() && self.splice_ok(tree, action),
            Err(_) => false,
        }
    }

    pub fn apply(&self, tree: &PayloadTree, action: &MutationAction) -> Result<PayloadTree, MutationError> {
        let (node, _) = tree.resolve(&action.node_ref)?;
        if node.is_locked() {
            return Err(MutationError::Stale(StaleNodeRef));
        }
        if !self.splice_ok(tree, action) {
            return Err(MutationError::Splice);
        }
        Ok(tree.replace(&action.node_ref, &action.replacement)?)
    }

    /// The replacement must re-lex with token boundaries exactly at both
    /// splice edges, and must not glue onto adjacent word characters.
    fn splice_ok(&self, tree: &PayloadTree, action: &MutationAction) -> bool {
        let Ok((_, span)) = tree.resolve(&action.node_ref) else {
            return false;
        };
        let query = tree.query_text();
        let repl = action.replacement.as_str();
        if repl.is_empty() {
            return false;
        }
        let split = tree.split();
        let before = query[..span.start].chars().next_back().or_else(|| split.left.chars().next_back());
        let after = query[span.end..].chars().next().or_else(|| split.right.chars().next());
        let first = repl.chars().next();
        let last = repl.chars().next_back();
        let glued = |a: Option<char>, b: Option<char>| matches!((a, b), (Some(a), Some(b)) if is_word_char(a) && is_word_char(b));
        if glued(before, first) || glued(last, after) {
            return false;
        }
        let mut spliced = String::with_capacity(query.len() + repl.len());
        spliced.push_str(&query[..span.start]);
        spliced.push_str(repl);
        spliced.push_str(&query[span.end..]);
        let Ok(tokens) = tokenize(&spliced) else {
            return false;
        };
        let start = span.start;
        let end = span.start + repl.len();
        let starts_at = |pos: usize| pos == spliced.len() || tokens.iter().any(|t| t.span.start == pos);
        starts_at(start) && starts_at(end)
    }
}
