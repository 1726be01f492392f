mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use semsqli_core::detectors::{DetectorError, RulePack};
use semsqli_core::grammar::Grammar;
use semsqli_core::harness::{
    audit_dataset, compare_strategies, ingest, run_campaign_with, Campaign, CampaignReport, HarnessError, Target,
};
use semsqli_core::mutation::RequestMethod;
use semsqli_core::oracle::{verified_grammar, Oracle};
use semsqli_core::search::{AttackConfig, SearchError, Strategy};

use config::FileConfig;

#[derive(Parser)]
#[command(name = "semsqli", version, about = "Semantics-preserving SQLi mutation and WAF testing")]
struct Cli {
    /// TOML file with default attack and HTTP settings.
    #[arg(long, global = true, env = "SEMSQLI_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attack every blocked malicious payload of a dataset and report FNR, ASR, VGP and queries.
    Attack(AttackArgs),
    /// Mutate each payload with random action chains and check equivalence with the oracle.
    OracleCheck(OracleArgs),
    /// Tabulate reports produced by `attack` on the same dataset and target.
    Compare(CompareArgs),
    /// Rule pack utilities.
    Rules {
        #[command(subcommand)]
        command: RulesCommand,
    },
}

#[derive(Subcommand)]
enum RulesCommand {
    /// Validate a signature rule pack (the bundled one by default).
    Lint { path: Option<PathBuf> },
}

#[derive(Args)]
struct AttackArgs {
    /// CSV with a `payload,label` header.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// mock-nonrobust, mock-hardened, scorer or http.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    url: Option<String>,
    /// Request parameter that carries the payload.
    #[arg(long)]
    param: Option<String>,
    /// get, get-json, post or post-json.
    #[arg(long)]
    method: Option<String>,
    /// mcts, random, exhaustive or pqueue.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    query_cap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    parallel: Option<usize>,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check every queried mutant with the oracle, not only the finals.
    #[arg(long)]
    audit_all_mutants: bool,
    /// Extra grammar rules merged over the built-in grammar.
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Confirms that you own or are authorized to test the remote target.
    #[arg(long)]
    i_own_this_target: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Number of seeds, starting at 0.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value = "get")]
    method: String,
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Write the audit as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Print the comparison as JSON.
    #[arg(long)]
    json: bool,
}

/// Process exit statuses.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Detector(String),
    Format(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Detector(_) => 2,
            Failure::Format(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Detector(m) | Failure::Format(m) => m,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Format(e) => Failure::Format(e.to_string()),
            HarnessError::Detector(e) => e.into(),
            HarnessError::Search(e @ (SearchError::Config(_) | SearchError::ModeMismatch)) => {
                Failure::Usage(e.to_string())
            }
            HarnessError::Search(e) => Failure::Format(e.to_string()),
            HarnessError::Io(m) => Failure::Usage(m),
        }
    }
}

impl From<DetectorError> for Failure {
    fn from(e: DetectorError) -> Self {
        match e {
            DetectorError::NotAuthorized | DetectorError::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Detector(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Format)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Attack(args) => attack(args, file),
        Command::OracleCheck(args) => oracle_check(args),
        Command::Compare(args) => compare(args),
        Command::Rules { command: RulesCommand::Lint { path } } => lint(path.as_deref()),
    }
}

fn parse_method(s: &str) -> Result<RequestMethod, Failure> {
    s.parse().map_err(|_| Failure::Usage(format!("unknown method `{s}` (get, get-json, post, post-json)")))
}

fn attack(args: AttackArgs, file: FileConfig) -> Result<(), Failure> {
    let defaults = file.attack;
    let base = AttackConfig::default();
    let dataset = args
        .dataset
        .or(defaults.dataset.map(PathBuf::from))
        .ok_or_else(|| Failure::Usage("--dataset is required".into()))?;
    let strategy = match args.strategy.or(defaults.strategy) {
        Some(s) => s.parse::<Strategy>().map_err(Failure::Usage)?,
        None => base.strategy,
    };
    let method = match args.method.or(defaults.method) {
        Some(m) => parse_method(&m)?,
        None => base.method,
    };
    let config = AttackConfig {
        max_steps: args.steps.or(defaults.steps).unwrap_or(base.max_steps),
        budget: args.budget.or(defaults.budget).unwrap_or(base.budget),
        c: args.c.or(defaults.c).unwrap_or(base.c),
        query_cap: args.query_cap.or(defaults.query_cap).unwrap_or(base.query_cap),
        seed: args.seed.or(defaults.seed).unwrap_or(base.seed),
        strategy,
        method,
        ..base
    };
    let target_name = args.target.or(defaults.target).unwrap_or_else(|| "mock-nonrobust".into());
    let target = match target_name.as_str() {
        "mock-nonrobust" => Target::MockNonrobust,
        "mock-hardened" => Target::MockHardened,
        "scorer" => Target::Scorer,
        "http" => {
            let mut http = file.http.unwrap_or_default();
            if let Some(url) = args.url {
                http.url = url;
            }
            if let Some(param) = args.param {
                http.param = param;
            }
            if http.url.is_empty() {
                return Err(Failure::Usage("--url is required for the http target".into()));
            }
            // only the flag counts as acknowledgment, never the config file
            http.i_own_this_target = args.i_own_this_target;
            Target::Http(http)
        }
        other => return Err(Failure::Usage(format!("unknown target `{other}`"))),
    };
    let grammar = match &args.grammar {
        Some(path) => {
            let source = fs::read_to_string(path).map_err(|e| Failure::Format(format!("{}: {e}", path.display())))?;
            let g = Grammar::builtin()
                .extended(&source)
                .map_err(|e| Failure::Format(format!("{}: {e}", path.display())))?;
            Arc::new(Oracle::default().verify_catalogs(&g))
        }
        None => verified_grammar(),
    };
    let payloads = ingest(&dataset).map_err(|e| Failure::Format(format!("{}: {e}", dataset.display())))?;
    let detector = target.build()?;
    let mut campaign = Campaign::new(dataset.display().to_string(), payloads, target, config);
    campaign.parallelism = args.parallel.or(defaults.parallel).unwrap_or(0);
    campaign.audit_all_mutants = args.audit_all_mutants;
    campaign.out_dir = args.out.or(defaults.out.map(PathBuf::from));

    let report = run_campaign_with(&campaign, detector.as_ref(), grammar)?;
    print!("{}", report.render_table());
    if let Some(dir) = &campaign.out_dir {
        report.write_to(dir)?;
        eprintln!("report written to {}", dir.display());
    }
    if report.aggregates.incomplete {
        let reason = report.records.iter().find_map(|r| r.error.clone()).unwrap_or_else(|| "detector failure".into());
        return Err(Failure::Detector(format!("campaign incomplete: {reason}")));
    }
    Ok(())
}

fn oracle_check(args: OracleArgs) -> Result<(), Failure> {
    let method = parse_method(&args.method)?;
    let payloads = ingest(&args.dataset).map_err(|e| Failure::Format(format!("{}: {e}", args.dataset.display())))?;
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let report = audit_dataset(&payloads, args.steps, &seeds, method, args.parallel);
    let vgp = report.vgp().map_or_else(|| "n/a".into(), |v| format!("{:.2}%", 100.0 * v));
    println!(
        "payloads {}  unparseable {}  mutants {}  equivalent {}  VGP {vgp}",
        report.payloads, report.unparseable, report.checked, report.equivalent
    );
    for f in &report.failures {
        println!("  {} seed {}: {:?} -> {:?}", f.id, f.seed, f.original, f.mutant);
    }
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("audit serializes");
        fs::write(out, json).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let reports = args
        .reports
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Failure::Format(format!("{}: {e}", p.display())))?;
            CampaignReport::from_json(&text).map_err(|e| Failure::Format(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = compare_strategies(&reports).map_err(|e| Failure::Usage(e.to_string()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&table).expect("comparison serializes"));
    } else {
        print!("{}", table.render());
    }
    Ok(())
}

fn lint(path: Option<&Path>) -> Result<(), Failure> {
    let source = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Format(format!("{}: {e}", p.display())))?,
        None => semsqli_core::detectors::BUILTIN_RULES.to_string(),
    };
    let errors = RulePack::lint(&source);
    if errors.is_empty() {
        let pack = RulePack::parse(&source).map_err(|e| Failure::Format(e.to_string()))?;
        println!("ok: {} rules", pack.rules.len());
        return Ok(());
    }
    for e in &errors {
        println!("{e}");
    }
    Err(Failure::Format(format!("{} problem(s) in rule pack", errors.len())))
}
