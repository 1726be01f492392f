use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Campaign, HarnessError};
use crate::detectors::Label;
use crate::payload::{PayloadLabel, RawPayload};
use crate::search::AttackConfig;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// Malicious payload the detector passed unmodified.
    InitiallyPassed,
    Bypassed,
    Resisted,
    /// Could not be tokenized; only the initial verdict was taken.
    Unparseable,
    /// Detector failure, or the campaign stopped before reaching it.
    Aborted,
    Benign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCount {
    pub checked: usize,
    pub equivalent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadRecord {
    pub id: String,
    pub label: PayloadLabel,
    pub multiplicity: usize,
    pub initial: Option<Label>,
    pub status: Status,
    pub queries: usize,
    pub steps: usize,
    pub final_payload: Option<String>,
    pub final_wire: Option<String>,
    pub operators: Vec<String>,
    /// Oracle verdict on the final payload, when it differs from the original.
    pub equivalent: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audit: Option<AuditCount>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl PayloadRecord {
    pub(super) fn new(p: &RawPayload) -> Self {
        PayloadRecord {
            id: p.id.clone(),
            label: p.label,
            multiplicity: p.multiplicity,
            initial: None,
            status: Status::Aborted,
            queries: 0,
            steps: 0,
            final_payload: None,
            final_wire: None,
            operators: Vec::new(),
            equivalent: None,
            audit: None,
            error: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    pub count: usize,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    pub p90: Option<f64>,
}

impl QueryStats {
    /// Median averages the two middle values; p90 is nearest-rank.
    pub fn of(values: &[usize]) -> Self {
        let mut v = values.to_vec();
        v.sort_unstable();
        let n = v.len();
        if n == 0 {
            return QueryStats { count: 0, median: None, mean: None, p90: None };
        }
        let median = if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0 };
        let mean = v.iter().sum::<usize>() as f64 / n as f64;
        let rank = (0.9 * n as f64).ceil() as usize;
        QueryStats { count: n, median: Some(median), mean: Some(mean), p90: Some(v[rank.max(1) - 1] as f64) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub malicious: usize,
    pub benign: usize,
    pub initially_passed: usize,
    pub initially_blocked: usize,
    pub bypassed: usize,
    pub unparseable: usize,
    pub false_positives: usize,
    pub fnr: Option<f64>,
    pub asr: Option<f64>,
    pub vgp: Option<f64>,
    pub vgp_checked: usize,
    /// Queries spent on payloads that were bypassed, initial probe included.
    pub queries_to_bypass: QueryStats,
    pub total_queries: usize,
    pub detector_calls: u64,
    pub incomplete: bool,
}

impl Aggregates {
    pub fn from_records(records: &[PayloadRecord], detector_calls: u64, incomplete: bool) -> Self {
        let malicious: Vec<&PayloadRecord> =
            records.iter().filter(|r| r.label == PayloadLabel::Malicious && r.initial.is_some()).collect();
        let count = |s: Status| malicious.iter().filter(|r| r.status == s).count();
        let initially_passed = malicious.iter().filter(|r| r.initial == Some(Label::Passed)).count();
        let initially_blocked = malicious.len() - initially_passed;
        let bypassed = count(Status::Bypassed);
        let audited = records.iter().any(|r| r.audit.is_some());
        let (vgp_ok, vgp_checked) = if audited {
            records.iter().filter_map(|r| r.audit).fold((0, 0), |(e, c), a| (e + a.equivalent, c + a.checked))
        } else {
            let checked: Vec<bool> = records.iter().filter_map(|r| r.equivalent).collect();
            (checked.iter().filter(|&&b| b).count(), checked.len())
        };
        let bypass_queries: Vec<usize> =
            malicious.iter().filter(|r| r.status == Status::Bypassed).map(|r| r.queries).collect();
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Aggregates {
            malicious: malicious.len(),
            benign: records.iter().filter(|r| r.label == PayloadLabel::Benign).count(),
            initially_passed,
            initially_blocked,
            bypassed,
            unparseable: count(Status::Unparseable),
            false_positives: records
                .iter()
                .filter(|r| r.label == PayloadLabel::Benign && r.initial == Some(Label::Blocked))
                .count(),
            fnr: ratio(initially_passed, malicious.len()),
            asr: ratio(bypassed, initially_blocked),
            vgp: ratio(vgp_ok, vgp_checked),
            vgp_checked,
            queries_to_bypass: QueryStats::of(&bypass_queries),
            total_queries: records.iter().map(|r| r.queries).sum(),
            detector_calls,
            incomplete,
        }
    }

    pub fn calls_match(&self) -> bool {
        self.total_queries as u64 == self.detector_calls
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dataset: String,
    pub dataset_digest: String,
    pub target: String,
    pub attack: AttackConfig,
    pub parallelism: usize,
    pub audit_all_mutants: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub version: u32,
    pub config: ConfigEcho,
    pub aggregates: Aggregates,
    pub records: Vec<PayloadRecord>,
}

/// Stable fingerprint of a dataset's ids, texts and labels.
pub fn dataset_digest(payloads: &[RawPayload]) -> String {
    let mut h = Sha256::new();
    for p in payloads {
        h.update(p.id.as_bytes());
        h.update([0]);
        h.update(p.text.as_bytes());
        h.update([0, u8::from(p.label == PayloadLabel::Malicious), b'\n']);
    }
    format!("{:x}", h.finalize())
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{:.2}%", 100.0 * v))
}

fn num(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.1}"))
}

impl CampaignReport {
    pub(super) fn new(
        campaign: &Campaign,
        target: &str,
        records: Vec<PayloadRecord>,
        calls: u64,
        incomplete: bool,
    ) -> Self {
        CampaignReport {
            version: REPORT_VERSION,
            config: ConfigEcho {
                dataset: campaign.dataset.clone(),
                dataset_digest: dataset_digest(&campaign.payloads),
                target: target.to_string(),
                attack: campaign.attack.clone(),
                parallelism: campaign.parallelism,
                audit_all_mutants: campaign.audit_all_mutants,
                seed: campaign.attack.seed,
            },
            aggregates: Aggregates::from_records(&records, calls, incomplete),
            records,
        }
    }

    /// Per-payload records as JSON; identical across reruns with the same
    /// seed against a local detector.
    pub fn records_json(&self) -> String {
        serde_json::to_string(&self.records).expect("records serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn render_table(&self) -> String {
        let a = &self.aggregates;
        let c = &self.config;
        let q = &a.queries_to_bypass;
        let mut out = String::new();
        let _ = writeln!(out, "dataset   {} ({})", c.dataset, &c.dataset_digest[..12]);
        let _ = writeln!(
            out,
            "target    {}  strategy {}  method {}  seed {}",
            c.target,
            c.attack.strategy,
            c.attack.method.name(),
            c.seed
        );
        let _ = writeln!(out, "malicious {}  benign {}  false positives {}", a.malicious, a.benign, a.false_positives);
        let _ = writeln!(out, "FNR       {}  ({} passed unmodified)", pct(a.fnr), a.initially_passed);
        let _ = writeln!(out, "ASR       {}  ({} of {} blocked)", pct(a.asr), a.bypassed, a.initially_blocked);
        let _ = writeln!(out, "VGP       {}  ({} checked)", pct(a.vgp), a.vgp_checked);
        let _ = writeln!(
            out,
            "queries   median {}  mean {}  p90 {}  (bypassed only)",
            num(q.median),
            num(q.mean),
            num(q.p90)
        );
        let _ = writeln!(out, "calls     {} detector, {} recorded", a.detector_calls, a.total_queries);
        if a.incomplete {
            let _ = writeln!(out, "INCOMPLETE: the detector failed; records stop early");
        }
        out
    }

    /// Write `report.json` and `report.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("report.json"), self.to_json()).map_err(io)?;
        fs::write(dir.join("report.txt"), self.render_table()).map_err(io)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("campaign `{label}` ran on a different dataset or target than `{first}`")]
pub struct MisalignedCampaigns {
    pub first: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonColumn {
    pub label: String,
    pub asr: Option<f64>,
    pub median_queries: Option<f64>,
    /// Mean queries over payloads every compared campaign bypassed.
    pub common_mean_queries: Option<f64>,
    /// Against the first column; absent for the first column itself.
    pub wins: Option<usize>,
    pub losses: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target: String,
    pub common_successes: usize,
    pub columns: Vec<ComparisonColumn>,
}

impl Comparison {
    pub fn render(&self) -> String {
        let mut out = format!("target {}  bypassed by all: {}\n", self.target, self.common_successes);
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>9} {:>12} {:>5} {:>6}",
            "strategy", "ASR", "median q", "common mean", "wins", "losses"
        );
        for c in &self.columns {
            let opt = |x: Option<usize>| x.map_or_else(|| "-".to_string(), |v| v.to_string());
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>9} {:>12} {:>5} {:>6}",
                c.label,
                pct(c.asr),
                num(c.median_queries),
                num(c.common_mean_queries),
                opt(c.wins),
                opt(c.losses)
            );
        }
        out
    }
}

/// Align campaigns that share a dataset and target and tabulate them.
pub fn compare_strategies(reports: &[CampaignReport]) -> Result<Comparison, MisalignedCampaigns> {
    let label = |r: &CampaignReport| format!("{}/{}", r.config.attack.strategy, r.config.seed);
    let Some(first) = reports.first() else {
        return Ok(Comparison { target: String::new(), common_successes: 0, columns: Vec::new() });
    };
    for r in &reports[1..] {
        if r.config.dataset_digest != first.config.dataset_digest || r.config.target != first.config.target {
            return Err(MisalignedCampaigns { first: label(first), label: label(r) });
        }
    }
    let bypassed = |r: &CampaignReport| -> HashSet<String> {
        r.records.iter().filter(|x| x.status == Status::Bypassed).map(|x| x.id.clone()).collect()
    };
    let sets: Vec<HashSet<String>> = reports.iter().map(bypassed).collect();
    let common: HashSet<&String> = sets[0].iter().filter(|id| sets.iter().all(|s| s.contains(*id))).collect();
    let columns = reports
        .iter()
        .zip(&sets)
        .enumerate()
        .map(|(i, (r, set))| {
            let common_q: Vec<usize> = r.records.iter().filter(|x| common.contains(&x.id)).map(|x| x.queries).collect();
            ComparisonColumn {
                label: label(r),
                asr: r.aggregates.asr,
                median_queries: r.aggregates.queries_to_bypass.median,
                common_mean_queries: QueryStats::of(&common_q).mean,
                wins: (i > 0).then(|| set.difference(&sets[0]).count()),
                losses: (i > 0).then(|| sets[0].difference(set).count()),
            }
        })
        .collect();
    Ok(Comparison { target: first.config.target.clone(), common_successes: common.len(), columns })
}
