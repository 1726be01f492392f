use rand::seq::SliceRandom;
use rand::Rng;

use super::{Attack, Finish, Session};
use crate::mutation::{MutationAction, Mutator};
use crate::payload::PayloadTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("node has no children")]
pub struct NoChildren;

/// Upper confidence bound of a child with cumulative quality `q` and `n`
/// visits under a parent visited `parent_n` times.
pub fn ucb_score(q: f64, n: u64, parent_n: u64, c: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let n = n as f64;
    q / n + c * (2.0 * (parent_n as f64).ln() / n).sqrt()
}

/// Index of the child maximizing the UCB score; the lowest index wins ties.
pub fn ucb_best_child(children: &[(f64, u64)], parent_n: u64, c: f64) -> Result<usize, NoChildren> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(q, n)) in children.iter().enumerate() {
        let s = ucb_score(q, n, parent_n, c);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(NoChildren)
}

struct SearchNode {
    tree: PayloadTree,
    action: Option<usize>,
    parent: Option<usize>,
    children: Vec<usize>,
    untried: Vec<usize>,
    q: f64,
    n: u64,
    depth: usize,
}

struct Search<'m> {
    actions: &'m [MutationAction],
    mutator: &'m Mutator,
    nodes: Vec<SearchNode>,
    horizon: usize,
}

impl Search<'_> {
    fn node(&mut self, tree: PayloadTree, action: Option<usize>, parent: Option<usize>, depth: usize) -> usize {
        let untried = (0..self.actions.len())
            .filter(|&i| tree.resolve(&self.actions[i].node_ref).is_ok_and(|(n, _)| !n.is_locked()))
            .collect();
        self.nodes.push(SearchNode { tree, action, parent, children: Vec::new(), untried, q: 0.0, n: 0, depth });
        self.nodes.len() - 1
    }

    fn tree_policy(&mut self, mut v: usize, c: f64, rng: &mut impl Rng) -> usize {
        loop {
            if self.nodes[v].depth >= self.horizon {
                return v;
            }
            while !self.nodes[v].untried.is_empty() {
                let k = rng.gen_range(0..self.nodes[v].untried.len());
                let a = self.nodes[v].untried.swap_remove(k);
                if let Ok(tree) = self.mutator.apply(&self.nodes[v].tree, &self.actions[a]) {
                    let depth = self.nodes[v].depth + 1;
                    let child = self.node(tree, Some(a), Some(v), depth);
                    self.nodes[v].children.push(child);
                    return child;
                }
            }
            let stats: Vec<(f64, u64)> =
                self.nodes[v].children.iter().map(|&ch| (self.nodes[ch].q, self.nodes[ch].n)).collect();
            match ucb_best_child(&stats, self.nodes[v].n, c) {
                Ok(i) => v = self.nodes[v].children[i],
                Err(_) => return v,
            }
        }
    }

    /// Random applicable actions from `v` until the step horizon.
    fn rollout(&self, v: usize, rng: &mut impl Rng) -> (PayloadTree, Vec<usize>) {
        let mut tree = self.nodes[v].tree.clone();
        let mut applied = Vec::new();
        let mut order: Vec<usize> = (0..self.actions.len()).collect();
        for _ in self.nodes[v].depth..self.horizon {
            order.shuffle(rng);
            let next = order.iter().find_map(|&a| self.mutator.apply(&tree, &self.actions[a]).ok().map(|t| (a, t)));
            match next {
                Some((a, t)) => {
                    applied.push(a);
                    tree = t;
                }
                None => break,
            }
        }
        (tree, applied)
    }

    fn backup(&mut self, mut v: usize, reward: f64) {
        loop {
            self.nodes[v].n += 1;
            self.nodes[v].q += reward;
            match self.nodes[v].parent {
                Some(p) => v = p,
                None => return,
            }
        }
    }

    fn path(&self, mut v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some(a) = self.nodes[v].action {
            out.push(a);
            v = self.nodes[v].parent.expect("non-root nodes have parents");
        }
        out.reverse();
        out
    }

    fn trace(&self, indices: impl IntoIterator<Item = usize>) -> Vec<MutationAction> {
        indices.into_iter().map(|i| self.actions[i].clone()).collect()
    }
}

pub(super) fn run(attack: &mut Attack<'_>, session: &mut Session<'_>) -> Finish {
    let config = attack.config;
    let actions = attack.mutator.propose_all(&attack.original, &mut attack.ctx);
    let horizon = config.max_steps.min(attack.original.operable_nodes().len());
    let mut search = Search { actions: &actions, mutator: &attack.mutator, nodes: Vec::new(), horizon };
    let mut root = search.node(attack.original.clone(), None, None, 0);
    let rng = &mut attack.rng;

    for step in 1..=horizon {
        for _ in 0..config.budget {
            let leaf = search.tree_policy(root, config.c, rng);
            let (tree, extra) = search.rollout(leaf, rng);
            match session.probe(&tree.reconstruct()) {
                Ok(p) if p.passed => {
                    let trace = search.trace(search.path(leaf).into_iter().chain(extra));
                    return Finish { success: true, tree, trace, steps: step, halt: None };
                }
                Ok(p) => search.backup(leaf, p.reward),
                Err(halt) => return Finish::failed(search.nodes[root].tree.clone(), step, Some(halt)),
            }
        }
        let stats: Vec<(f64, u64)> =
            search.nodes[root].children.iter().map(|&ch| (search.nodes[ch].q, search.nodes[ch].n)).collect();
        let Ok(i) = ucb_best_child(&stats, search.nodes[root].n, 0.0) else {
            return Finish::failed(search.nodes[root].tree.clone(), step, None);
        };
        root = search.nodes[root].children[i];
        let tree = search.nodes[root].tree.clone();
        match session.probe(&tree.reconstruct()) {
            Ok(p) if p.passed => {
                let trace = search.trace(search.path(root));
                return Finish { success: true, tree, trace, steps: step, halt: None };
            }
            Ok(_) => {}
            Err(halt) => return Finish::failed(tree, step, Some(halt)),
        }
    }
    Finish::failed(search.nodes[root].tree.clone(), horizon, None)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::grammar::GenerationContext;
    use crate::mutation::RequestMethod;
    use crate::oracle::verified_grammar;

    fn check_invariants(search: &Search<'_>) {
        for (i, node) in search.nodes.iter().enumerate() {
            let child_n: u64 = node.children.iter().map(|&c| search.nodes[c].n).sum();
            assert!(node.n >= child_n, "node {i}: {} < {child_n}", node.n);
            assert!(node.q >= 0.0);
            for &c in &node.children {
                let a = search.nodes[c].action.unwrap();
                assert!(!node.untried.contains(&a));
                assert_eq!(search.nodes[c].parent, Some(i));
            }
        }
    }

    #[test]
    fn backup_touches_every_ancestor_once() {
        let tree = PayloadTree::from_text("1' or 1 = 1 and name like 'a%' --+").unwrap();
        let mutator = Mutator::new(verified_grammar(), RequestMethod::Get).with_cap(2);
        let actions = mutator.propose_all(&tree, &mut GenerationContext::new(3));
        let mut search = Search { actions: &actions, mutator: &mutator, nodes: Vec::new(), horizon: 6 };
        let root = search.node(tree, None, None, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for round in 0..200 {
            let leaf = search.tree_policy(root, crate::search::DEFAULT_C, &mut rng);
            let mut path = vec![leaf];
            while let Some(p) = search.nodes[*path.last().unwrap()].parent {
                path.push(p);
            }
            let before: Vec<(f64, u64)> = search.nodes.iter().map(|n| (n.q, n.n)).collect();
            let reward = f64::from(round % 3) / 2.0;
            search.backup(leaf, reward);
            for (i, node) in search.nodes.iter().enumerate() {
                let (q0, n0) = before.get(i).copied().unwrap_or((0.0, 0));
                if path.contains(&i) {
                    assert_eq!(node.n, n0 + 1);
                    assert!((node.q - q0 - reward).abs() < 1e-12);
                } else {
                    assert_eq!((node.q, node.n), (q0, n0));
                }
            }
            check_invariants(&search);
        }
        assert!(search.nodes.iter().any(|n| n.depth >= 2));
        assert_eq!(search.nodes[root].n, 200);
    }

    #[test]
    fn rollouts_stop_at_the_horizon() {
        let tree = PayloadTree::from_text("1 or 1 = 1 and 2 = 2 and 3 = 3 --+").unwrap();
        let mutator = Mutator::new(verified_grammar(), RequestMethod::Get);
        let actions = mutator.propose_all(&tree, &mut GenerationContext::new(1));
        let mut search = Search { actions: &actions, mutator: &mutator, nodes: Vec::new(), horizon: 4 };
        let root = search.node(tree, None, None, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let leaf = search.tree_policy(root, 1.0, &mut rng);
        let (_, applied) = search.rollout(leaf, &mut rng);
        assert_eq!(search.nodes[leaf].depth + applied.len(), 4);
    }
}
