use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::boundary::{split_boundaries, BoundarySplit};
use super::lexer::{is_known_function, tokenize, LexError, Token, TokenKind};
use super::literal::{evaluate, CompareOp, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadLabel {
    Benign,
    Malicious,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPayload {
    pub id: String,
    pub text: String,
    pub label: PayloadLabel,
    /// How many identical rows collapsed into this payload at ingest.
    #[serde(default = "one")]
    pub multiplicity: usize,
}

fn one() -> usize {
    1
}

impl RawPayload {
    pub fn malicious(id: impl Into<String>, text: impl Into<String>) -> Self {
        RawPayload { id: id.into(), text: text.into(), label: PayloadLabel::Malicious, multiplicity: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchRole {
    Statement,
    Tautology,
    WhereClause,
    DmlConnector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafRole {
    Word,
    Number,
    Whitespace,
    Comment,
    Operator,
    /// Quote- and structure-bearing tokens: string literals, punctuation,
    /// executable inline comments.
    BoundaryLocked,
    IdentifierLocked,
    /// Text spliced in by a mutation.
    Fragment,
}

/// Semantic role of any node, as seen by the grammar's entry mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Branch(BranchRole),
    Leaf(LeafRole),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leaf {
    pub token_kind: Option<TokenKind>,
    pub text: String,
    pub role: LeafRole,
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Branch { role: BranchRole, children: Vec<Node>, locked: bool },
    Leaf(Leaf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    /// Bumped whenever the node is replaced.
    pub rev: u32,
}

impl Node {
    fn leaf(leaf: Leaf) -> Node {
        Node { kind: NodeKind::Leaf(leaf), rev: 0 }
    }

    pub fn role(&self) -> NodeRole {
        match &self.kind {
            NodeKind::Branch { role, .. } => NodeRole::Branch(*role),
            NodeKind::Leaf(l) => NodeRole::Leaf(l.role),
        }
    }

    pub fn is_locked(&self) -> bool {
        match &self.kind {
            NodeKind::Branch { role, locked, .. } => *locked || *role == BranchRole::Statement,
            NodeKind::Leaf(l) => l.locked,
        }
    }

    pub fn children(&self) -> &[Node] {
        match &self.kind {
            NodeKind::Branch { children, .. } => children,
            NodeKind::Leaf(_) => &[],
        }
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    fn write_text(&self, out: &mut String) {
        match &self.kind {
            NodeKind::Branch { children, .. } => children.iter().for_each(|c| c.write_text(out)),
            NodeKind::Leaf(l) => out.push_str(&l.text),
        }
    }

    fn text_len(&self) -> usize {
        match &self.kind {
            NodeKind::Branch { children, .. } => children.iter().map(Node::text_len).sum(),
            NodeKind::Leaf(l) => l.text.len(),
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a Leaf>) {
        match &self.kind {
            NodeKind::Branch { children, .. } => children.iter().for_each(|c| c.leaves(out)),
            NodeKind::Leaf(l) => out.push(l),
        }
    }
}

/// Stable address of a node: child-index path from the root plus the
/// node's revision at the time the reference was taken.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub path: Vec<u16>,
    pub rev: u32,
}

impl NodeRef {
    /// True if `self` addresses `other` or one of its descendants.
    pub fn is_within(&self, other: &NodeRef) -> bool {
        self.path.starts_with(&other.path)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.path.iter().map(u16::to_string).collect();
        write!(f, "/{}@{}", parts.join("/"), self.rev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("node reference is stale or does not exist")]
pub struct StaleNodeRef;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadTree {
    split: BoundarySplit,
    root: Node,
}

/// A node visited in pre-order together with its address and byte range
/// inside the query part.
pub struct Visit<'a> {
    pub node_ref: NodeRef,
    pub node: &'a Node,
    pub span: Range<usize>,
}

impl PayloadTree {
    pub fn build(raw: &RawPayload) -> Result<PayloadTree, LexError> {
        Self::from_text(&raw.text)
    }

    pub fn from_text(text: &str) -> Result<PayloadTree, LexError> {
        let split = split_boundaries(text);
        let tokens = tokenize(&split.query)?;
        let spans = detect_spans(&tokens);
        let children = build_nodes(&tokens, 0..tokens.len(), &spans, &Context::default());
        Ok(PayloadTree {
            split,
            root: Node { kind: NodeKind::Branch { role: BranchRole::Statement, children, locked: false }, rev: 0 },
        })
    }

    pub fn split(&self) -> &BoundarySplit {
        &self.split
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn query_text(&self) -> String {
        self.root.text()
    }

    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(self.split.left.len() + self.root.text_len() + self.split.right.len());
        out.push_str(&self.split.left);
        self.root.write_text(&mut out);
        out.push_str(&self.split.right);
        out
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        self.root.leaves(&mut out);
        out
    }

    /// Pre-order traversal of every node below the root.
    pub fn visit(&self) -> Vec<Visit<'_>> {
        fn go<'a>(node: &'a Node, path: &mut Vec<u16>, offset: usize, out: &mut Vec<Visit<'a>>) {
            let mut pos = offset;
            for (i, child) in node.children().iter().enumerate() {
                path.push(i as u16);
                let len = child.text_len();
                out.push(Visit {
                    node_ref: NodeRef { path: path.clone(), rev: child.rev },
                    node: child,
                    span: pos..pos + len,
                });
                go(child, path, pos, out);
                path.pop();
                pos += len;
            }
        }
        let mut out = Vec::new();
        go(&self.root, &mut Vec::new(), 0, &mut out);
        out
    }

    /// Unlocked nodes whose role has at least one grammar entry, left to
    /// right in pre-order.
    pub fn operable_nodes(&self) -> Vec<NodeRef> {
        self.visit()
            .into_iter()
            .filter(|v| !v.node.is_locked())
            .filter(|v| !crate::grammar::entries_for(v.node.role(), &v.node.text()).is_empty())
            .map(|v| v.node_ref)
            .collect()
    }

    /// Resolve a reference to the node and its byte span in the query.
    pub fn resolve(&self, node_ref: &NodeRef) -> Result<(&Node, Range<usize>), StaleNodeRef> {
        if node_ref.path.is_empty() {
            return Err(StaleNodeRef);
        }
        let mut node = &self.root;
        let mut start = 0;
        for &idx in &node_ref.path {
            let children = node.children();
            let idx = idx as usize;
            if idx >= children.len() {
                return Err(StaleNodeRef);
            }
            start += children[..idx].iter().map(Node::text_len).sum::<usize>();
            node = &children[idx];
        }
        if node.rev != node_ref.rev {
            return Err(StaleNodeRef);
        }
        Ok((node, start..start + node.text_len()))
    }

    /// Copy of the tree with the addressed node replaced by a locked leaf
    /// holding `text`. Boundaries are carried over untouched.
    pub fn replace(&self, node_ref: &NodeRef, text: &str) -> Result<PayloadTree, StaleNodeRef> {
        self.resolve(node_ref)?;
        let mut tree = self.clone();
        let mut node = &mut tree.root;
        for &idx in &node_ref.path {
            node = match &mut node.kind {
                NodeKind::Branch { children, .. } => &mut children[idx as usize],
                NodeKind::Leaf(_) => return Err(StaleNodeRef),
            };
        }
        let role = match &node.kind {
            NodeKind::Leaf(l) => l.role,
            NodeKind::Branch { .. } => LeafRole::Fragment,
        };
        node.kind = NodeKind::Leaf(Leaf { token_kind: None, text: text.to_string(), role, locked: true });
        node.rev += 1;
        Ok(tree)
    }

    /// Locks every node.
    pub fn lock_all(&mut self) {
        fn go(node: &mut Node) {
            match &mut node.kind {
                NodeKind::Branch { children, locked, .. } => {
                    *locked = true;
                    children.iter_mut().for_each(go);
                }
                NodeKind::Leaf(l) => l.locked = true,
            }
        }
        go(&mut self.root);
    }
}

// ---------------------------------------------------------------------------
// construction

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    start: usize,
    end: usize, // inclusive token index
    role: BranchRole,
    /// For tautologies: whether `=`/`like` may be swapped.
    swappable: bool,
}

#[derive(Debug, Clone, Default)]
struct Context {
    in_tautology: bool,
    swappable: bool,
}

fn prev_significant(tokens: &[Token], i: usize) -> Option<usize> {
    (0..i).rev().find(|&j| !tokens[j].is_trivia())
}

fn next_significant(tokens: &[Token], i: usize) -> Option<usize> {
    (i + 1..tokens.len()).find(|&j| !tokens[j].is_trivia())
}

/// `and` tokens that close a `between x and y` rather than join predicates.
fn between_ands(tokens: &[Token]) -> HashSet<usize> {
    let mut out = HashSet::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.is_keyword("between") {
            let mut depth = 0i32;
            for (j, u) in tokens.iter().enumerate().skip(i + 1) {
                if u.is_punct("(") {
                    depth += 1;
                } else if u.is_punct(")") {
                    depth -= 1;
                    if depth < 0 {
                        break;
                    }
                } else if depth == 0 && u.is_keyword("and") {
                    out.insert(j);
                    break;
                }
            }
        }
    }
    out
}

fn is_connector(tokens: &[Token], i: usize, between: &HashSet<usize>) -> bool {
    let t = &tokens[i];
    (t.is_keyword("and") && !between.contains(&i)) || t.is_keyword("or") || t.is_op("&&") || t.is_op("||")
}

/// Parse the literal ending at (`from_end = true`) or starting at token `i`.
/// Returns (first token, last token, literal).
fn literal_at(tokens: &[Token], i: usize, from_end: bool) -> Option<(usize, usize, Literal)> {
    let t = &tokens[i];
    match t.kind {
        TokenKind::StringLiteral => Some((i, i, Literal::string(&t.lexeme)?)),
        TokenKind::NumberLiteral if from_end => {
            let minus = prev_significant(tokens, i).filter(|&p| {
                tokens[p].is_op("-")
                    && prev_significant(tokens, p).is_none_or(|q| {
                        matches!(tokens[q].kind, TokenKind::Operator | TokenKind::Keyword)
                            || tokens[q].is_punct("(")
                            || tokens[q].is_punct(",")
                    })
            });
            match minus {
                Some(p) => Some((p, i, Literal::number(&t.lexeme, true)?)),
                None => Some((i, i, Literal::number(&t.lexeme, false)?)),
            }
        }
        TokenKind::NumberLiteral => Some((i, i, Literal::number(&t.lexeme, false)?)),
        TokenKind::Operator if !from_end && t.lexeme == "-" => {
            let n = next_significant(tokens, i)?;
            (tokens[n].kind == TokenKind::NumberLiteral)
                .then(|| Literal::number(&tokens[n].lexeme, true).map(|l| (i, n, l)))
                .flatten()
        }
        _ => None,
    }
}

fn literal_text(tokens: &[Token], first: usize, last: usize) -> String {
    tokens[first..=last].iter().filter(|t| !t.is_trivia()).map(|t| t.lexeme.as_str()).collect()
}

const LEADING_CONTEXT: &[&str] = &["or", "and", "where", "having", "when"];
const TRAILING_CONTEXT: &[&str] =
    &["or", "and", "order", "group", "having", "limit", "union", "then", "into", "procedure"];

fn comparison_span(tokens: &[Token], op_idx: usize, between: &HashSet<usize>) -> Option<Span> {
    let op_tok = &tokens[op_idx];
    let op = match op_tok.kind {
        TokenKind::Operator | TokenKind::Keyword => CompareOp::parse(&op_tok.lexeme)?,
        _ => return None,
    };
    let l_end = prev_significant(tokens, op_idx)?;
    let (l_start, _, left) = literal_at(tokens, l_end, true)?;
    let r_first = next_significant(tokens, op_idx)?;
    let (_, r_end, right) = literal_at(tokens, r_first, false)?;

    let leading_ok = match prev_significant(tokens, l_start) {
        None => true,
        Some(p) => {
            let t = &tokens[p];
            (LEADING_CONTEXT.iter().any(|k| t.is_keyword(k)) && !between.contains(&p))
                || t.is_op("&&")
                || t.is_op("||")
                || t.is_punct("(")
        }
    };
    let trailing_ok = match next_significant(tokens, r_end) {
        None => true,
        Some(n) => {
            let t = &tokens[n];
            TRAILING_CONTEXT.iter().any(|k| t.is_keyword(k))
                || t.is_op("&&")
                || t.is_op("||")
                || t.is_punct(")")
                || t.is_punct(";")
        }
    };
    if !(leading_ok && trailing_ok) {
        return None;
    }
    if evaluate(&left, op, &right) != Some(true) {
        return None;
    }
    let same_text = literal_text(tokens, l_start, l_end) == literal_text(tokens, r_first, r_end);
    let plain = |l: &Literal| match l {
        Literal::Str(s) => !s.contains(['%', '_', '\\']),
        Literal::Number { text, .. } => text.is_some(),
    };
    Some(Span {
        start: l_start,
        end: r_end,
        role: BranchRole::Tautology,
        swappable: op == CompareOp::Eq && same_text && plain(&left) && plain(&right),
    })
}

fn where_span(tokens: &[Token], w: usize) -> Option<Span> {
    const STOP: &[&str] = &["order", "group", "having", "limit", "union", "procedure", "into"];
    let mut depth = 0i32;
    let mut end = tokens.len();
    for (j, t) in tokens.iter().enumerate().skip(w + 1) {
        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            if depth == 0 {
                end = j;
                break;
            }
            depth -= 1;
        } else if depth == 0 && (t.is_punct(";") || STOP.iter().any(|k| t.is_keyword(k))) {
            end = j;
            break;
        }
    }
    let last = (w + 1..end).rev().find(|&j| !tokens[j].is_trivia())?;
    Some(Span { start: w, end: last, role: BranchRole::WhereClause, swappable: false })
}

fn detect_spans(tokens: &[Token]) -> Vec<Span> {
    let between = between_ands(tokens);
    let mut spans = Vec::new();
    for i in 0..tokens.len() {
        if tokens[i].is_keyword("where") {
            spans.extend(where_span(tokens, i));
        } else if is_connector(tokens, i, &between) {
            spans.push(Span { start: i, end: i, role: BranchRole::DmlConnector, swappable: false });
        } else if let Some(span) = comparison_span(tokens, i, &between) {
            spans.push(span);
        }
    }
    // outermost first when spans share a start
    spans.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    spans
}

fn build_nodes(tokens: &[Token], range: Range<usize>, spans: &[Span], ctx: &Context) -> Vec<Node> {
    let mut nodes = Vec::new();
    let mut i = range.start;
    while i < range.end {
        let span = spans.iter().find(|s| s.start == i && s.end < range.end);
        match span {
            Some(span) => {
                let inner: Vec<Span> = spans
                    .iter()
                    .filter(|s| *s != span && s.start >= span.start && s.end <= span.end)
                    .copied()
                    .collect();
                let child_ctx = if span.role == BranchRole::Tautology {
                    Context { in_tautology: true, swappable: span.swappable }
                } else {
                    ctx.clone()
                };
                let children = build_nodes(tokens, span.start..span.end + 1, &inner, &child_ctx);
                nodes.push(Node { kind: NodeKind::Branch { role: span.role, children, locked: false }, rev: 0 });
                i = span.end + 1;
            }
            None => {
                nodes.push(Node::leaf(leaf_for(&tokens[i], ctx)));
                i += 1;
            }
        }
    }
    nodes
}

fn leaf_for(token: &Token, ctx: &Context) -> Leaf {
    let (role, locked) = match token.kind {
        TokenKind::Keyword => (LeafRole::Word, false),
        TokenKind::Identifier if is_known_function(&token.lexeme) => (LeafRole::Word, false),
        TokenKind::Identifier => (LeafRole::IdentifierLocked, true),
        TokenKind::NumberLiteral => (LeafRole::Number, !ctx.in_tautology),
        TokenKind::Operator => (LeafRole::Operator, !(ctx.swappable && token.lexeme == "=")),
        TokenKind::Whitespace => (LeafRole::Whitespace, false),
        TokenKind::Comment => (LeafRole::Comment, token.is_line_comment()),
        TokenKind::StringLiteral | TokenKind::InlineComment | TokenKind::Punctuation => {
            (LeafRole::BoundaryLocked, true)
        }
    };
    Leaf { token_kind: Some(token.kind), text: token.lexeme.clone(), role, locked }
}
