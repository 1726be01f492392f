//! Payload model: boundary split, lexer, and the hierarchical token tree.

mod boundary;
mod lexer;
mod literal;
mod tree;

pub use boundary::{split_boundaries, BoundarySplit};
pub use lexer::{is_keyword, is_known_function, tokenize, LexError, Token, TokenKind, KEYWORDS};
pub use literal::{evaluate, CompareOp, Literal};
pub use tree::{
    BranchRole, Leaf, LeafRole, Node, NodeKind, NodeRef, NodeRole, PayloadLabel, PayloadTree, RawPayload, StaleNodeRef,
    Visit,
};

pub(crate) use lexer::{is_sql_space, is_word_char};

/// Parse a payload into its tree (`BuildTree`).
pub fn build_tree(raw: &RawPayload) -> Result<PayloadTree, LexError> {
    PayloadTree::build(raw)
}

/// Operable nodes of a tree, left to right (`ExploreOperationalNodes`).
pub fn explore_operable_nodes(tree: &PayloadTree) -> Vec<NodeRef> {
    tree.operable_nodes()
}
