use super::*;
use crate::detectors::{Constant, Label};
use crate::search::Strategy;

fn record(id: usize, label: PayloadLabel, initial: Label, status: Status, queries: usize) -> PayloadRecord {
    let mut r =
        PayloadRecord::new(&RawPayload { id: format!("p{id:04}"), text: String::new(), label, multiplicity: 1 });
    r.initial = Some(initial);
    r.status = status;
    r.queries = queries;
    r
}

#[test]
fn metric_arithmetic() {
    let mut records = Vec::new();
    for i in 0..1000 {
        let (initial, status) = match i {
            0..=99 => (Label::Passed, Status::InitiallyPassed),
            100..=399 => (Label::Blocked, Status::Bypassed),
            _ => (Label::Blocked, Status::Resisted),
        };
        records.push(record(i, PayloadLabel::Malicious, initial, status, 3));
    }
    let a = Aggregates::from_records(&records, 3000, false);
    assert_eq!(a.fnr, Some(0.1));
    assert!((a.asr.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(format!("{:.2}", 100.0 * a.asr.unwrap()), "33.33");
    assert!((a.fnr.unwrap() + a.initially_blocked as f64 / a.malicious as f64 - 1.0).abs() < 1e-12);
    assert!(a.calls_match());
}

#[test]
fn empty_dataset_renders_na() {
    let campaign = Campaign::new("empty", Vec::new(), Target::MockNonrobust, AttackConfig::default());
    let report = run_campaign(&campaign).unwrap();
    assert_eq!(report.aggregates.asr, None);
    assert_eq!(report.aggregates.fnr, None);
    assert!(!report.aggregates.incomplete);
    let table = report.render_table();
    assert!(table.contains("ASR       n/a"), "{table}");
    assert!(table.contains("FNR       n/a"));
}

#[test]
fn query_stats_match_a_direct_computation() {
    let v = [7, 1, 3, 10, 5, 2, 9, 4, 8, 6];
    let s = QueryStats::of(&v);
    assert_eq!(s.median, Some(5.5));
    assert_eq!(s.mean, Some(5.5));
    assert_eq!(s.p90, Some(9.0));
    let s = QueryStats::of(&[4, 1, 2]);
    assert_eq!((s.median, s.p90), (Some(2.0), Some(4.0)));
    assert_eq!(QueryStats::of(&[]).median, None);
}

#[test]
fn payload_seeds_are_distinct_and_stable() {
    let seeds: HashSet<u64> = (0..1000).map(|i| payload_seed(42, i)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_eq!(payload_seed(42, 7), payload_seed(42, 7));
    assert_ne!(payload_seed(42, 7), payload_seed(43, 7));
}

use std::collections::HashSet;

fn small_corpus() -> Vec<RawPayload> {
    ingest_str("payload,label\n1' or 1=1 --+,1\n1 or 2=2,1\nhello,0\n\"1 union select 1,2 --+\",1\n\"1 union select 1,2 --+\",1\n")
        .unwrap()
}

#[test]
fn pass_all_counts_everything_as_fnr() {
    let campaign = Campaign::new("small", small_corpus(), Target::MockNonrobust, AttackConfig::default());
    let det = Constant::new(Label::Passed);
    let report = run_campaign_with(&campaign, &det, verified_grammar()).unwrap();
    let a = &report.aggregates;
    assert_eq!((a.malicious, a.benign, a.initially_passed), (3, 1, 3));
    assert_eq!(a.fnr, Some(1.0));
    assert_eq!(a.asr, None);
    assert_eq!(a.total_queries, 4);
    assert!(a.calls_match());
}

#[test]
fn mock_campaign_records_and_cross_checks() {
    let config = AttackConfig { query_cap: 60, seed: 3, ..AttackConfig::default() };
    let campaign = Campaign::new("small", small_corpus(), Target::MockNonrobust, config);
    let det = MockWaf::non_robust();
    let report = run_campaign_with(&campaign, &det, verified_grammar()).unwrap();
    let a = &report.aggregates;
    assert_eq!(a.benign, 1);
    assert_eq!(a.false_positives, 0);
    assert!(a.calls_match(), "{a:?}");
    assert!(report.records.iter().all(|r| r.queries <= 60));
    assert_eq!(report.records.iter().find(|r| r.id == "p0004").unwrap().multiplicity, 2);
    assert_eq!(a.vgp.unwrap_or(1.0), 1.0);
    let back = CampaignReport::from_json(&report.to_json()).unwrap();
    assert_eq!(back.records, report.records);
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    for key in ["version", "config", "aggregates", "records"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let config = AttackConfig { query_cap: 40, seed: 9, ..AttackConfig::default() };
    let mut campaign = Campaign::new("small", small_corpus(), Target::MockHardened, config);
    campaign.parallelism = 1;
    let a = run_campaign(&campaign).unwrap();
    campaign.parallelism = 4;
    let b = run_campaign(&campaign).unwrap();
    assert_eq!(a.records_json(), b.records_json());
}

#[test]
fn pqueue_needs_scores() {
    let config = AttackConfig { strategy: Strategy::PriorityQueue, ..AttackConfig::default() };
    let campaign = Campaign::new("small", small_corpus(), Target::MockNonrobust, config);
    assert!(matches!(run_campaign(&campaign), Err(HarnessError::Search(SearchError::ModeMismatch))));
}

#[test]
fn audit_mode_checks_intermediates() {
    let config = AttackConfig { query_cap: 30, seed: 1, ..AttackConfig::default() };
    let mut campaign = Campaign::new("small", small_corpus(), Target::MockHardened, config);
    campaign.audit_all_mutants = true;
    let report = run_campaign(&campaign).unwrap();
    let audited: usize = report.records.iter().filter_map(|r| r.audit).map(|a| a.checked).sum();
    assert_eq!(report.aggregates.vgp_checked, audited);
    assert!(audited > 0);
    assert_eq!(report.aggregates.vgp, Some(1.0));
}

#[test]
fn comparison_shapes() {
    let config = AttackConfig { query_cap: 30, ..AttackConfig::default() };
    let campaign = Campaign::new("small", small_corpus(), Target::MockNonrobust, config.clone());
    let mcts = run_campaign(&campaign).unwrap();
    let single = compare_strategies(std::slice::from_ref(&mcts)).unwrap();
    assert_eq!(single.columns.len(), 1);
    assert_eq!(single.columns[0].wins, None);

    let random = run_campaign(&Campaign {
        attack: AttackConfig { strategy: Strategy::Random, ..config.clone() },
        ..campaign.clone()
    })
    .unwrap();
    let both = compare_strategies(&[mcts.clone(), random]).unwrap();
    assert_eq!(both.columns.len(), 2);
    assert!(both.columns[1].wins.is_some());
    assert!(both.render().contains("random/0"));

    let mut other = campaign.clone();
    other.payloads.pop();
    let other = run_campaign(&other).unwrap();
    assert!(compare_strategies(&[mcts, other]).is_err());
}

#[test]
fn random_chains_stay_equivalent() {
    let report = audit_dataset(&small_corpus(), 10, &[1, 2], RequestMethod::Get, 0);
    assert_eq!(report.payloads, 3);
    assert_eq!(report.checked, 6);
    assert!(report.failures.is_empty(), "{:?}", report.failures);
}
