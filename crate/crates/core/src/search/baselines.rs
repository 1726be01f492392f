use rand::seq::SliceRandom;
use rand::Rng;

use super::{Attack, Finish, Halt, Session};
use crate::mutation::MutationAction;
use crate::payload::PayloadTree;

/// Draws beyond this multiple of the query cap stop a random attack whose
/// assignments keep landing on already-queried payloads.
const DRAWS_PER_QUERY: usize = 20;

fn candidates_per_node(attack: &mut Attack<'_>) -> Vec<Vec<MutationAction>> {
    attack
        .original
        .operable_nodes()
        .iter()
        .map(|r| attack.mutator.propose(&attack.original, r, &mut attack.ctx).unwrap_or_default())
        .collect()
}

/// Independent uniform assignment (candidate or no change) per node for
/// every query.
pub(super) fn random(attack: &mut Attack<'_>, session: &mut Session<'_>) -> Finish {
    let per_node = candidates_per_node(attack);
    let limit = DRAWS_PER_QUERY.saturating_mul(attack.config.query_cap);
    for draw in 1..=limit {
        let mut tree = attack.original.clone();
        let mut trace = Vec::new();
        for cands in &per_node {
            let choice = attack.rng.gen_range(0..=cands.len());
            if let Some(action) = cands.get(choice) {
                if let Ok(next) = attack.mutator.apply(&tree, action) {
                    tree = next;
                    trace.push(action.clone());
                }
            }
        }
        match session.probe(&tree.reconstruct()) {
            Ok(p) if p.passed => return Finish { success: true, tree, trace, steps: draw, halt: None },
            Ok(_) => {}
            Err(halt) => return Finish::failed(attack.original.clone(), draw, Some(halt)),
        }
    }
    Finish::failed(attack.original.clone(), limit, None)
}

/// Cartesian product of per-node options in lexicographic order, with
/// "no change" first for every node. Nodes swallowed by an earlier
/// replacement only take "no change", so no combination repeats.
pub(super) fn exhaustive(attack: &mut Attack<'_>, session: &mut Session<'_>) -> Finish {
    let per_node = candidates_per_node(attack);
    let mut visited = 0;
    let mut trace = Vec::new();
    let original = attack.original.clone();
    let result = enumerate(attack, session, &per_node, 0, original, &mut trace, &mut visited);
    match result {
        Some(Ok(tree)) => Finish { success: true, tree, trace, steps: visited, halt: None },
        Some(Err(halt)) => Finish::failed(attack.original.clone(), visited, Some(halt)),
        None => Finish::failed(attack.original.clone(), visited, None),
    }
}

fn enumerate(
    attack: &Attack<'_>,
    session: &mut Session<'_>,
    per_node: &[Vec<MutationAction>],
    i: usize,
    tree: PayloadTree,
    trace: &mut Vec<MutationAction>,
    visited: &mut usize,
) -> Option<Result<PayloadTree, Halt>> {
    if i == per_node.len() {
        *visited += 1;
        return match session.probe(&tree.reconstruct()) {
            Ok(p) if p.passed => Some(Ok(tree)),
            Ok(_) => None,
            Err(halt) => Some(Err(halt)),
        };
    }
    if let Some(found) = enumerate(attack, session, per_node, i + 1, tree.clone(), trace, visited) {
        return Some(found);
    }
    for action in &per_node[i] {
        let Ok(next) = attack.mutator.apply(&tree, action) else {
            continue;
        };
        trace.push(action.clone());
        if let Some(found) = enumerate(attack, session, per_node, i + 1, next, trace, visited) {
            return Some(found);
        }
        trace.pop();
    }
    None
}

struct Queued {
    score: f64,
    seq: usize,
    tree: PayloadTree,
    trace: Vec<MutationAction>,
}

/// Greedy descent on the detector score: each round expands the
/// lowest-scoring payload with `budget` single-action mutants.
pub(super) fn priority_queue(attack: &mut Attack<'_>, session: &mut Session<'_>) -> Finish {
    let config = attack.config;
    let original = attack.original.clone();
    let score = match session.score(&original.reconstruct()) {
        Ok((_, s)) => s,
        Err(halt) => return Finish::failed(original, 0, Some(halt)),
    };
    let mut queue = vec![Queued { score, seq: 0, tree: original.clone(), trace: Vec::new() }];
    let mut seq = 1;
    for round in 1..=config.max_steps {
        let Some(best) = (0..queue.len())
            .min_by(|&a, &b| queue[a].score.total_cmp(&queue[b].score).then(queue[a].seq.cmp(&queue[b].seq)))
        else {
            return Finish::failed(original, round - 1, None);
        };
        let head = queue.swap_remove(best);
        let mut actions = attack.mutator.propose_all(&head.tree, &mut attack.ctx);
        actions.shuffle(&mut attack.rng);
        for action in actions.iter().take(config.budget) {
            let Ok(tree) = attack.mutator.apply(&head.tree, action) else {
                continue;
            };
            let mut trace = head.trace.clone();
            trace.push(action.clone());
            match session.score(&tree.reconstruct()) {
                Ok((true, _)) => return Finish { success: true, tree, trace, steps: round, halt: None },
                Ok((false, score)) => {
                    queue.push(Queued { score, seq, tree, trace });
                    seq += 1;
                }
                Err(halt) => return Finish::failed(head.tree, round, Some(halt)),
            }
        }
    }
    Finish::failed(original, config.max_steps, None)
}
