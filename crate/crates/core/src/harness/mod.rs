//! Campaigns: run one strategy against one detector over a dataset, then
//! score the outcome (FNR, ASR, VGP, query distribution).

mod ingest;
mod report;

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{Detector, DetectorError, HttpConfig, HttpDetector, Label, MockWaf, Scorer};
use crate::grammar::{GenerationContext, Grammar};
use crate::mutation::{MutationAction, Mutator, RequestMethod};
use crate::oracle::{verified_grammar, Oracle};
use crate::payload::{PayloadLabel, PayloadTree, RawPayload};
use crate::search::{attack, AttackConfig, SearchError};

pub use ingest::{bundled_corpus, ingest, ingest_str, FormatError, BUNDLED_CORPUS};
pub use report::{
    compare_strategies, dataset_digest, Aggregates, AuditCount, CampaignReport, Comparison, ComparisonColumn,
    ConfigEcho, MisalignedCampaigns, PayloadRecord, QueryStats, Status, REPORT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Target {
    MockNonrobust,
    MockHardened,
    Scorer,
    Http(HttpConfig),
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::MockNonrobust => "mock-nonrobust",
            Target::MockHardened => "mock-hardened",
            Target::Scorer => "scorer",
            Target::Http(_) => "http",
        }
    }

    pub fn is_local(&self) -> bool {
        !matches!(self, Target::Http(_))
    }

    pub fn build(&self) -> Result<Arc<dyn Detector>, DetectorError> {
        Ok(match self {
            Target::MockNonrobust => Arc::new(MockWaf::non_robust()),
            Target::MockHardened => Arc::new(MockWaf::hardened()),
            Target::Scorer => Arc::new(Scorer::default()),
            Target::Http(config) => Arc::new(HttpDetector::new(config.clone())?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    /// Display name of the dataset, usually its path.
    pub dataset: String,
    pub payloads: Vec<RawPayload>,
    pub target: Target,
    /// Strategy, budget, request method and seed.
    pub attack: AttackConfig,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    pub parallelism: usize,
    /// Check every queried mutant with the oracle, not just the finals.
    pub audit_all_mutants: bool,
}

impl Campaign {
    pub fn new(dataset: impl Into<String>, payloads: Vec<RawPayload>, target: Target, attack: AttackConfig) -> Self {
        Campaign {
            dataset: dataset.into(),
            payloads,
            target,
            attack,
            out_dir: None,
            parallelism: 0,
            audit_all_mutants: false,
        }
    }

    pub fn bundled(target: Target, attack: AttackConfig) -> Self {
        Campaign::new("bundled", bundled_corpus(), target, attack)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("{0}")]
    Io(String),
}

/// Seed of the `index`-th payload, independent of scheduling.
pub fn payload_seed(campaign_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(campaign_seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

pub fn run_campaign(campaign: &Campaign) -> Result<CampaignReport, HarnessError> {
    let detector = campaign.target.build()?;
    run_campaign_with(campaign, detector.as_ref(), verified_grammar())
}

/// Run a campaign against an already constructed detector.
pub fn run_campaign_with(
    campaign: &Campaign,
    detector: &dyn Detector,
    grammar: Arc<Grammar>,
) -> Result<CampaignReport, HarnessError> {
    campaign.attack.validate(detector.capability())?;
    let oracle = Oracle::default();
    let abort = AtomicBool::new(false);
    let calls_before = detector.calls();
    let job = |i: usize| {
        if abort.load(Ordering::Relaxed) {
            return None;
        }
        let record = run_one(campaign, i, detector, &grammar, &oracle);
        if record.status == Status::Aborted {
            abort.store(true, Ordering::Relaxed);
        }
        Some(record)
    };
    let records: Vec<PayloadRecord> =
        fan_out(campaign.payloads.len(), campaign.parallelism, job).into_iter().flatten().collect();
    let incomplete = records.len() < campaign.payloads.len() || records.iter().any(|r| r.status == Status::Aborted);
    let calls = detector.calls() - calls_before;
    Ok(CampaignReport::new(campaign, detector.name(), records, calls, incomplete))
}

fn run_one(
    campaign: &Campaign,
    index: usize,
    detector: &dyn Detector,
    grammar: &Arc<Grammar>,
    oracle: &Oracle,
) -> PayloadRecord {
    let payload = &campaign.payloads[index];
    let mut record = PayloadRecord::new(payload);
    let method = campaign.attack.method;
    if payload.label == PayloadLabel::Benign {
        single_probe(&mut record, detector, &payload.text, method, Status::Benign);
        return record;
    }
    let config = AttackConfig {
        seed: payload_seed(campaign.attack.seed, index),
        record_queries: campaign.audit_all_mutants,
        ..campaign.attack.clone()
    };
    let outcome = match attack(&payload.text, detector, grammar.clone(), &config) {
        Ok(o) => o,
        Err(SearchError::Unparseable(_)) => {
            single_probe(&mut record, detector, &payload.text, method, Status::Unparseable);
            return record;
        }
        Err(e) => {
            record.status = Status::Aborted;
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.queries = outcome.queries_used;
    record.steps = outcome.steps;
    record.initial = match (outcome.initially_passed, &outcome.aborted, outcome.steps) {
        (true, _, _) => Some(Label::Passed),
        // the probe of the unmodified payload itself failed
        (false, Some(_), 0) => None,
        (false, _, _) => Some(Label::Blocked),
    };
    record.status = if let Some(e) = &outcome.aborted {
        record.error = Some(e.clone());
        Status::Aborted
    } else if outcome.initially_passed {
        Status::InitiallyPassed
    } else if outcome.success {
        Status::Bypassed
    } else {
        Status::Resisted
    };
    if record.initial == Some(Label::Blocked) {
        if outcome.final_payload != payload.text {
            record.equivalent = Some(oracle.equivalent(&payload.text, &outcome.final_payload));
        }
        if campaign.audit_all_mutants {
            let mutants: Vec<&String> = outcome.queried.iter().filter(|q| **q != payload.text).collect();
            record.audit = Some(AuditCount {
                checked: mutants.len(),
                equivalent: mutants.iter().filter(|m| oracle.equivalent(&payload.text, m)).count(),
            });
        }
        record.operators = outcome.action_trace.iter().map(|a| a.operator.name().to_string()).collect();
        record.final_payload = Some(outcome.final_payload);
        record.final_wire = Some(outcome.final_wire);
    }
    record
}

fn single_probe(
    record: &mut PayloadRecord,
    detector: &dyn Detector,
    text: &str,
    method: RequestMethod,
    status: Status,
) {
    let wire = crate::mutation::adapt_for_method(text, method);
    match detector.detect(&wire, method) {
        Ok(v) => {
            record.queries = 1;
            record.initial = Some(v.label);
            record.status = match (status, v.label) {
                (Status::Unparseable, Label::Passed) => Status::InitiallyPassed,
                (s, _) => s,
            };
        }
        Err(e) => {
            record.queries = 1;
            record.status = Status::Aborted;
            record.error = Some(e.to_string());
        }
    }
}

/// Map `job` over `0..n` keeping input order. Uses a rayon pool of
/// `parallelism` threads when the `parallel` feature is on.
pub fn fan_out<T, F>(n: usize, parallelism: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism != 1 {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
            Ok(pool) => return pool.install(|| (0..n).into_par_iter().map(&job).collect()),
            Err(_) => return (0..n).into_par_iter().map(&job).collect(),
        }
    }
    let _ = parallelism;
    (0..n).map(job).collect()
}

/// Apply up to `steps` random actions, one node at a time.
pub fn random_chain(
    mutator: &Mutator,
    tree: &PayloadTree,
    steps: usize,
    rng: &mut impl Rng,
    ctx: &mut GenerationContext,
) -> (PayloadTree, Vec<MutationAction>) {
    let mut tree = tree.clone();
    let mut trace = Vec::new();
    for _ in 0..steps {
        let mut nodes = tree.operable_nodes();
        nodes.shuffle(rng);
        let next = nodes.iter().find_map(|r| {
            let mut cands = mutator.propose(&tree, r, ctx).ok()?;
            cands.shuffle(rng);
            cands.into_iter().find_map(|a| mutator.apply(&tree, &a).ok().map(|t| (a, t)))
        });
        let Some((action, next)) = next else { break };
        trace.push(action);
        tree = next;
    }
    (tree, trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub id: String,
    pub seed: u64,
    pub original: String,
    pub mutant: String,
}

/// Oracle audit of random mutation chains over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub payloads: usize,
    pub unparseable: usize,
    pub checked: usize,
    pub equivalent: usize,
    pub failures: Vec<AuditFailure>,
}

impl AuditReport {
    pub fn vgp(&self) -> Option<f64> {
        (self.checked > 0).then(|| self.equivalent as f64 / self.checked as f64)
    }
}

/// Mutate each malicious payload with `steps` random actions per seed and
/// check the final against the original.
pub fn audit_dataset(
    payloads: &[RawPayload],
    steps: usize,
    seeds: &[u64],
    method: RequestMethod,
    parallelism: usize,
) -> AuditReport {
    let grammar = verified_grammar();
    let oracle = Oracle::default();
    let malicious: Vec<&RawPayload> = payloads.iter().filter(|p| p.label == PayloadLabel::Malicious).collect();
    let per_payload = fan_out(malicious.len(), parallelism, |i| {
        let p = malicious[i];
        let Ok(tree) = PayloadTree::from_text(&p.text) else {
            return None;
        };
        let mutator = Mutator::new(grammar.clone(), method);
        let mut out = Vec::new();
        for &seed in seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(payload_seed(seed, i));
            let mut ctx = GenerationContext::new(rng.next_u64());
            let (mutant, _) = random_chain(&mutator, &tree, steps, &mut rng, &mut ctx);
            let text = mutant.reconstruct();
            out.push((seed, oracle.equivalent(&p.text, &text), text));
        }
        Some(out)
    });
    let mut report =
        AuditReport { payloads: malicious.len(), unparseable: 0, checked: 0, equivalent: 0, failures: Vec::new() };
    for (p, result) in malicious.iter().zip(per_payload) {
        let Some(result) = result else {
            report.unparseable += 1;
            continue;
        };
        for (seed, ok, mutant) in result {
            report.checked += 1;
            if ok {
                report.equivalent += 1;
            } else {
                report.failures.push(AuditFailure { id: p.id.clone(), seed, original: p.text.clone(), mutant });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests;
