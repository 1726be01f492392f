//! Attack strategies: MCTS and the random, exhaustive and score-guided
//! baselines, all driven through a query-counting session.

mod baselines;
mod mcts;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{Capability, Detector, DetectorError, Verdict};
use crate::grammar::{GenerationContext, Grammar};
use crate::mutation::{adapt_for_method, MutationAction, Mutator, RequestMethod, DEFAULT_CANDIDATE_CAP};
use crate::payload::{LexError, PayloadTree};

pub use mcts::{ucb_best_child, ucb_score, NoChildren};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Mcts,
    Random,
    Exhaustive,
    PriorityQueue,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Mcts, Strategy::Random, Strategy::Exhaustive, Strategy::PriorityQueue];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Mcts => "mcts",
            Strategy::Random => "random",
            Strategy::Exhaustive => "exhaustive",
            Strategy::PriorityQueue => "pqueue",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "priority_queue" | "priority-queue" => Ok(Strategy::PriorityQueue),
            _ => Self::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown strategy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WithProbability,
    WithoutProbability,
}

impl From<Capability> for Mode {
    fn from(c: Capability) -> Self {
        match c {
            Capability::WithProbability => Mode::WithProbability,
            Capability::WithoutProbability => Mode::WithoutProbability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub max_steps: usize,
    pub budget: usize,
    pub c: f64,
    pub query_cap: usize,
    pub strategy: Strategy,
    /// Reward mode; `None` follows the detector's capability.
    pub mode: Option<Mode>,
    pub seed: u64,
    pub method: RequestMethod,
    pub candidate_cap: usize,
    /// Keep every queried payload in the outcome.
    pub record_queries: bool,
}

/// Default exploration constant, roughly 1/sqrt(2).
#[allow(clippy::approx_constant)]
pub const DEFAULT_C: f64 = 0.7071;

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            max_steps: 10,
            budget: 10,
            c: DEFAULT_C,
            query_cap: 10_000,
            strategy: Strategy::Mcts,
            mode: None,
            seed: 0,
            method: RequestMethod::Get,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            record_queries: false,
        }
    }
}

impl AttackConfig {
    /// Check the configuration against a detector and resolve the reward mode.
    pub fn validate(&self, capability: Capability) -> Result<Mode, SearchError> {
        if self.max_steps == 0 || self.budget == 0 || self.query_cap == 0 || self.c.is_nan() || self.c < 0.0 {
            return Err(SearchError::Config("steps, budget and query cap must be positive; c non-negative".into()));
        }
        let mode = self.mode.unwrap_or_else(|| capability.into());
        if mode == Mode::WithProbability && capability != Capability::WithProbability {
            return Err(SearchError::ModeMismatch);
        }
        if self.strategy == Strategy::PriorityQueue && mode != Mode::WithProbability {
            return Err(SearchError::ModeMismatch);
        }
        Ok(mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub success: bool,
    /// The unmodified payload already passed; not an attack success.
    pub initially_passed: bool,
    pub final_payload: String,
    pub final_wire: String,
    pub queries_used: usize,
    pub action_trace: Vec<MutationAction>,
    pub score_trace: Vec<Option<f64>>,
    pub steps: usize,
    /// Set when the detector failed and the session was cut short.
    pub aborted: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub queried: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("payload does not lex: {0}")]
    Unparseable(#[from] LexError),
    #[error("strategy needs scores but the detector only returns labels")]
    ModeMismatch,
    #[error("invalid attack configuration: {0}")]
    Config(String),
}

/// Why a session stopped querying.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Halt {
    Cap,
    Detector(DetectorError),
    ModeMismatch,
}

pub(crate) struct Probe {
    pub passed: bool,
    pub reward: f64,
}

/// Query bookkeeping shared by all strategies.
pub(crate) struct Session<'a> {
    detector: &'a dyn Detector,
    method: RequestMethod,
    mode: Mode,
    cap: usize,
    cache: HashMap<String, Verdict>,
    pub queries: usize,
    pub score_trace: Vec<Option<f64>>,
    pub queried: Option<Vec<String>>,
}

impl<'a> Session<'a> {
    fn new(detector: &'a dyn Detector, config: &AttackConfig, mode: Mode) -> Self {
        Session {
            detector,
            method: config.method,
            mode,
            cap: config.query_cap,
            cache: HashMap::new(),
            queries: 0,
            score_trace: Vec::new(),
            queried: config.record_queries.then(Vec::new),
        }
    }

    pub fn exhausted(&self) -> bool {
        self.queries >= self.cap
    }

    /// Verdict for a payload text; cached verdicts cost nothing.
    pub fn probe(&mut self, text: &str) -> Result<Probe, Halt> {
        let wire = adapt_for_method(text, self.method);
        let verdict = match self.cache.get(&wire) {
            Some(v) => v.clone(),
            None => {
                if self.exhausted() {
                    return Err(Halt::Cap);
                }
                self.queries += 1;
                let v = self.detector.detect(&wire, self.method).map_err(Halt::Detector)?;
                self.score_trace.push(v.score);
                if let Some(q) = &mut self.queried {
                    q.push(text.to_string());
                }
                self.cache.insert(wire, v.clone());
                v
            }
        };
        let reward = match self.mode {
            Mode::WithProbability => 1.0 - verdict.score.ok_or(Halt::ModeMismatch)?,
            Mode::WithoutProbability => f64::from(u8::from(verdict.passed())),
        };
        Ok(Probe { passed: verdict.passed(), reward })
    }

    pub fn score(&mut self, text: &str) -> Result<(bool, f64), Halt> {
        let p = self.probe(text)?;
        Ok((p.passed, 1.0 - p.reward))
    }
}

/// Shared inputs of one attack.
pub(crate) struct Attack<'a> {
    pub config: &'a AttackConfig,
    pub mutator: Mutator,
    pub original: PayloadTree,
    pub rng: ChaCha8Rng,
    pub ctx: GenerationContext,
}

/// Result of a strategy run before packaging.
pub(crate) struct Finish {
    pub success: bool,
    pub tree: PayloadTree,
    pub trace: Vec<MutationAction>,
    pub steps: usize,
    pub halt: Option<Halt>,
}

impl Finish {
    pub fn failed(tree: PayloadTree, steps: usize, halt: Option<Halt>) -> Self {
        Finish { success: false, tree, trace: Vec::new(), steps, halt }
    }
}

/// Run one attack with the configured strategy.
pub fn attack(
    text: &str,
    detector: &dyn Detector,
    grammar: Arc<Grammar>,
    config: &AttackConfig,
) -> Result<AttackOutcome, SearchError> {
    let mode = config.validate(detector.capability())?;
    let original = PayloadTree::from_text(text)?;
    let mut session = Session::new(detector, config, mode);
    let method = config.method;
    let package = |session: Session, finish: Finish| {
        let final_payload = finish.tree.reconstruct();
        let aborted = match finish.halt {
            Some(Halt::Detector(e)) => Some(e.to_string()),
            _ => None,
        };
        AttackOutcome {
            success: finish.success,
            initially_passed: false,
            final_wire: adapt_for_method(&final_payload, method),
            final_payload,
            queries_used: session.queries,
            action_trace: finish.trace,
            score_trace: session.score_trace,
            steps: finish.steps,
            aborted,
            queried: session.queried.unwrap_or_default(),
        }
    };

    match session.probe(text) {
        Ok(p) if p.passed => {
            let mut out = package(session, Finish::failed(original, 0, None));
            out.initially_passed = true;
            return Ok(out);
        }
        Ok(_) => {}
        Err(Halt::ModeMismatch) => return Err(SearchError::ModeMismatch),
        Err(halt) => return Ok(package(session, Finish::failed(original, 0, Some(halt)))),
    }

    let mut seeder = ChaCha8Rng::seed_from_u64(config.seed);
    let gen_seed = seeder.next_u64();
    let mut attack = Attack {
        config,
        mutator: Mutator::new(grammar, method).with_cap(config.candidate_cap),
        original: original.clone(),
        rng: seeder,
        ctx: GenerationContext::new(gen_seed),
    };
    let finish = match config.strategy {
        Strategy::Mcts => mcts::run(&mut attack, &mut session),
        Strategy::Random => baselines::random(&mut attack, &mut session),
        Strategy::Exhaustive => baselines::exhaustive(&mut attack, &mut session),
        Strategy::PriorityQueue => baselines::priority_queue(&mut attack, &mut session),
    };
    if finish.halt == Some(Halt::ModeMismatch) {
        return Err(SearchError::ModeMismatch);
    }
    Ok(package(session, finish))
}

#[cfg(test)]
mod tests;
