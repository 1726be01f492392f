use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::detectors::{Constant, Label, MockWaf, Scorer};
use crate::oracle::verified_grammar;

fn grammar() -> Arc<Grammar> {
    verified_grammar()
}

#[test]
fn ucb_worked_example() {
    let children = [(3.0, 5), (1.0, 2)];
    assert!((ucb_score(3.0, 5, 10, 1.0) - 1.559_705_182_437_616).abs() < 1e-9);
    assert!((ucb_score(1.0, 2, 10, 1.0) - 2.017_427_129_385_146).abs() < 1e-9);
    assert_eq!(ucb_best_child(&children, 10, 1.0), Ok(1));
}

#[test]
fn ucb_hand_values() {
    assert!((ucb_score(3.0, 5, 10, 0.0) - 0.6).abs() < 1e-9);
    assert!((ucb_score(2.0, 4, 7, DEFAULT_C) - 1.197_472_728_230_046).abs() < 1e-9);
    assert_eq!(ucb_score(0.0, 1, 1, 2.0), 0.0);
}

#[test]
fn ucb_pure_exploitation_and_ties() {
    assert_eq!(ucb_best_child(&[(0.9, 1), (0.4, 1)], 2, 0.0), Ok(0));
    assert_eq!(ucb_best_child(&[(1.0, 3), (1.0, 3)], 6, DEFAULT_C), Ok(0));
    assert_eq!(ucb_best_child(&[], 6, DEFAULT_C), Err(NoChildren));
}

/// Straight evaluation of the bound and a first-maximum scan.
fn brute_force(children: &[(f64, u64)], parent_n: u64, c: f64) -> usize {
    let scores: Vec<f64> = children
        .iter()
        .map(|&(q, n)| {
            let n = n as f64;
            let exploit = q / n;
            let explore = (2.0 * (parent_n as f64).ln() / n).sqrt();
            exploit + c * explore
        })
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s == max).unwrap()
}

#[test]
fn ucb_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..10_000 {
        let k = rng.gen_range(1..8);
        let children: Vec<(f64, u64)> = (0..k)
            .map(|_| {
                let n = rng.gen_range(1..50u64);
                // integral rewards make exact ties common
                let q = if case % 2 == 0 { rng.gen_range(0..=n) as f64 } else { rng.gen::<f64>() * n as f64 };
                (q, n)
            })
            .collect();
        let parent = children.iter().map(|c| c.1).sum::<u64>() + rng.gen_range(0..5);
        let c = [0.0, DEFAULT_C, 1.0, rng.gen::<f64>() * 3.0][case % 4];
        assert_eq!(ucb_best_child(&children, parent, c), Ok(brute_force(&children, parent, c)), "{children:?} {c}");
    }
}

#[test]
fn reward_forms() {
    let scorer = Scorer::default();
    let config = AttackConfig::default();
    let mut s = Session::new(&scorer, &config, Mode::WithProbability);
    let p = s.probe("1 or 1=1").unwrap();
    let expected = 1.0 - scorer.score(&adapt_for_method("1 or 1=1", RequestMethod::Get));
    assert!((p.reward - expected).abs() < 1e-12);

    let pass = Constant::new(Label::Passed);
    let mut s = Session::new(&pass, &config, Mode::WithoutProbability);
    assert_eq!(s.probe("x").unwrap().reward, 1.0);
    let block = Constant::new(Label::Blocked);
    let mut s = Session::new(&block, &config, Mode::WithoutProbability);
    assert_eq!(s.probe("x").unwrap().reward, 0.0);
    s.probe("x").unwrap();
    assert_eq!(s.queries, 1, "cached verdicts are free");
}

#[test]
fn pass_all_costs_one_query() {
    for strategy in [Strategy::Mcts, Strategy::Random, Strategy::Exhaustive] {
        let det = Constant::new(Label::Passed);
        let config = AttackConfig { strategy, ..AttackConfig::default() };
        let out = attack("1' or 1 = 1 --+", &det, grammar(), &config).unwrap();
        assert!(out.initially_passed);
        assert!(!out.success);
        assert_eq!(out.queries_used, 1);
    }
}

#[test]
fn block_all_exhausts_the_cap() {
    let config = AttackConfig { strategy: Strategy::Random, query_cap: 50, ..AttackConfig::default() };
    let det = Constant::new(Label::Blocked);
    let out = attack("1' or 1 = 1 and name like 'a%' --+", &det, grammar(), &config).unwrap();
    assert!(!out.success);
    assert_eq!(out.queries_used, 50);
    assert_eq!(det.calls(), 50);

    let det = Constant::new(Label::Blocked);
    let config = AttackConfig { query_cap: 50, ..AttackConfig::default() };
    let out = attack("1' or 1 = 1 and name like 'a%' --+", &det, grammar(), &config).unwrap();
    assert!(!out.success);
    assert!(out.queries_used <= 50);
    assert_eq!(out.queries_used as u64, det.calls());
}

#[test]
fn mcts_bypasses_the_mock_waf() {
    let waf = MockWaf::non_robust();
    let config = AttackConfig { query_cap: 100, ..AttackConfig::default() };
    let out = attack("1' or 1 = 1 --+", &waf, grammar(), &config).unwrap();
    assert!(out.success, "{out:?}");
    assert!(out.queries_used <= 100);
    let verdict = waf.detect(&out.final_wire, RequestMethod::Get).unwrap();
    assert!(verdict.passed());
    assert!(crate::oracle::Oracle::default().equivalent("1' or 1 = 1 --+", &out.final_payload));
}

#[test]
fn attacks_are_deterministic() {
    for strategy in [Strategy::Mcts, Strategy::Random, Strategy::Exhaustive] {
        let config = AttackConfig { strategy, query_cap: 60, seed: 5, ..AttackConfig::default() };
        let a =
            attack("1 union select name from users where id = 2", &MockWaf::hardened(), grammar(), &config).unwrap();
        let b =
            attack("1 union select name from users where id = 2", &MockWaf::hardened(), grammar(), &config).unwrap();
        assert_eq!(a, b, "{strategy}");
        assert_eq!(serde_json::to_string(&a.action_trace).unwrap(), serde_json::to_string(&b.action_trace).unwrap());
    }
}

#[test]
fn queries_equal_detector_calls() {
    let payloads = ["1' or 1 = 1 --+", "1 union select secret from users", "1; drop table users"];
    for strategy in Strategy::ALL {
        for text in payloads {
            let det = Scorer::default();
            let config = AttackConfig { strategy, query_cap: 80, seed: 2, ..AttackConfig::default() };
            let out = attack(text, &det, grammar(), &config).unwrap();
            assert_eq!(out.queries_used as u64, det.calls(), "{strategy} {text}");
            assert!(out.queries_used <= 80);
            assert_eq!(out.score_trace.len(), out.queries_used);
        }
    }
}

#[test]
fn step_bound_holds() {
    let text = "1' or 1 = 1 and name like 'a%' order by id desc limit 1 --+";
    let nodes = PayloadTree::from_text(text).unwrap().operable_nodes().len();
    for (strategy, steps) in [(Strategy::Mcts, 3), (Strategy::Mcts, 10), (Strategy::PriorityQueue, 4)] {
        let det = Scorer::default();
        let config = AttackConfig { strategy, max_steps: steps, query_cap: 500, seed: 1, ..AttackConfig::default() };
        let out = attack(text, &det, grammar(), &config).unwrap();
        assert!(out.steps <= steps.min(nodes), "{strategy} {}", out.steps);
        if strategy == Strategy::PriorityQueue {
            assert!(out.action_trace.len() <= steps);
        }
    }
}

#[test]
fn exhaustive_respects_the_product_bound() {
    let text = "1 or 2=2";
    let tree = PayloadTree::from_text(text).unwrap();
    let mutator = Mutator::new(grammar(), RequestMethod::Get).with_cap(2);
    let mut ctx = GenerationContext::new(0);
    let bound: usize =
        tree.operable_nodes().iter().map(|r| mutator.propose(&tree, r, &mut ctx).unwrap().len() + 1).product();
    let det = Constant::new(Label::Blocked);
    let config = AttackConfig { strategy: Strategy::Exhaustive, candidate_cap: 2, ..AttackConfig::default() };
    let out = attack(text, &det, grammar(), &config).unwrap();
    assert!(!out.success);
    assert!(out.queries_used <= bound, "{} > {bound}", out.queries_used);
    assert!(out.queries_used > 1);
}

#[test]
fn pqueue_needs_scores() {
    let config = AttackConfig { strategy: Strategy::PriorityQueue, ..AttackConfig::default() };
    let err = attack("1 or 1=1", &MockWaf::non_robust(), grammar(), &config).unwrap_err();
    assert_eq!(err, SearchError::ModeMismatch);
    let forced = AttackConfig { mode: Some(Mode::WithProbability), ..AttackConfig::default() };
    assert_eq!(attack("1 or 1=1", &MockWaf::non_robust(), grammar(), &forced), Err(SearchError::ModeMismatch));
}

#[test]
fn pqueue_descends_a_monotone_scorer() {
    let det = Scorer::default();
    let config =
        AttackConfig { strategy: Strategy::PriorityQueue, query_cap: 1000, seed: 4, ..AttackConfig::default() };
    let out = attack("1' or 1 = 1 --+", &det, grammar(), &config).unwrap();
    assert!(out.success, "{out:?}");
    assert!(out.steps <= config.max_steps);
}

#[test]
fn bad_configs_are_rejected() {
    for config in [
        AttackConfig { budget: 0, ..AttackConfig::default() },
        AttackConfig { max_steps: 0, ..AttackConfig::default() },
        AttackConfig { query_cap: 0, ..AttackConfig::default() },
        AttackConfig { c: -1.0, ..AttackConfig::default() },
    ] {
        assert!(matches!(attack("1 or 1=1", &Scorer::default(), grammar(), &config), Err(SearchError::Config(_))));
    }
    assert!(matches!(
        attack("1 or 'a", &Scorer::default(), grammar(), &AttackConfig::default()),
        Err(SearchError::Unparseable(_))
    ));
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.name().parse::<Strategy>(), Ok(s));
    }
    assert_eq!("priority_queue".parse::<Strategy>(), Ok(Strategy::PriorityQueue));
    assert!("bfs".parse::<Strategy>().is_err());
}
