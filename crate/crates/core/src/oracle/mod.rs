//! Differential execution of payloads against a seeded vulnerable bench.

mod functions;
mod rewrite;

use std::fmt;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use crate::grammar::Grammar;
use crate::mutation::{decode_wire, DecodeError, RequestMethod};
use crate::payload::split_boundaries;

pub use rewrite::{rewrite, RewriteError, SERVER_VERSION};

const BENCH_SEED: &str = include_str!("../../data/bench_seed.sql");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectionContext {
    Numeric,
    SingleQuoted,
    DoubleQuoted,
}

impl InjectionContext {
    /// Context a payload was written for, read off the quote in its left
    /// boundary.
    pub fn of_payload(text: &str) -> Self {
        match split_boundaries(text).left.chars().find(|c| matches!(c, '\'' | '"')) {
            Some('\'') => InjectionContext::SingleQuoted,
            Some(_) => InjectionContext::DoubleQuoted,
            None => InjectionContext::Numeric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub name: String,
    pub context: InjectionContext,
    /// Query text with a single `{P}` placeholder.
    pub sql: String,
}

impl Template {
    pub fn new(name: &str, context: InjectionContext, sql: &str) -> Self {
        Template { name: name.into(), context, sql: sql.into() }
    }

    pub fn render(&self, payload: &str) -> String {
        self.sql.replace("{P}", payload)
    }
}

pub fn default_templates() -> Vec<Template> {
    use InjectionContext::*;
    vec![
        Template::new("numeric", Numeric, "SELECT name FROM users WHERE id = {P}"),
        Template::new("numeric-paren", Numeric, "SELECT name FROM users WHERE (id = {P})"),
        Template::new("single-quoted", SingleQuoted, "SELECT name FROM users WHERE name = '{P}'"),
        Template::new("single-quoted-paren", SingleQuoted, "SELECT name FROM users WHERE name = ('{P}')"),
        Template::new("double-quoted", DoubleQuoted, "SELECT name FROM users WHERE name = \"{P}\""),
        Template::new("double-quoted-paren", DoubleQuoted, "SELECT name FROM users WHERE name = (\"{P}\")"),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorClass {
    Syntax,
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "outcome")]
pub enum ExecutionResult {
    /// Sorted multiset of rows across all statements, followed by a
    /// snapshot of the bench tables.
    Rows {
        rows: Vec<String>,
    },
    Error {
        class: ErrorClass,
    },
}

impl ExecutionResult {
    pub fn rows(&self) -> Option<&[String]> {
        match self {
            ExecutionResult::Rows { rows } => Some(rows),
            ExecutionResult::Error { .. } => None,
        }
    }

    pub fn error_class(&self) -> Option<ErrorClass> {
        match self {
            ExecutionResult::Error { class } => Some(*class),
            ExecutionResult::Rows { .. } => None,
        }
    }
}

impl fmt::Display for ExecutionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecutionResult::Rows { rows } => write!(f, "rows[{}]", rows.join(", ")),
            ExecutionResult::Error { class } => write!(f, "error({class:?})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Oracle {
    templates: Vec<Template>,
    seed_sql: String,
    timeout: Duration,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle { templates: default_templates(), seed_sql: BENCH_SEED.into(), timeout: Duration::from_secs(2) }
    }
}

impl Oracle {
    pub fn with_templates(templates: Vec<Template>) -> Self {
        Oracle { templates, ..Oracle::default() }
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    fn fresh_bench(&self) -> rusqlite::Result<Connection> {
        let conn = Connection::open_in_memory()?;
        conn.execute_batch("ATTACH DATABASE ':memory:' AS information_schema;")?;
        conn.execute_batch(&self.seed_sql)?;
        functions::register(&conn)?;
        Ok(conn)
    }

    /// Run `payload` inside `template` on a freshly seeded bench.
    pub fn execute(&self, payload: &str, template: &Template) -> ExecutionResult {
        self.execute_sql(&template.render(payload))
    }

    /// Run raw MySQL-dialect SQL on a freshly seeded bench.
    pub fn execute_sql(&self, sql: &str) -> ExecutionResult {
        match self.run(sql) {
            Ok((mut rows, state)) => {
                rows.extend(state);
                ExecutionResult::Rows { rows }
            }
            Err(class) => ExecutionResult::Error { class },
        }
    }

    /// Query rows (sorted) and the bench state afterwards.
    fn run(&self, sql: &str) -> Result<(Vec<String>, Vec<String>), ErrorClass> {
        let statements = rewrite(sql).map_err(|_| ErrorClass::Syntax)?;
        let conn = self.fresh_bench().expect("bench seed script is valid");
        let deadline = Instant::now() + self.timeout;
        conn.progress_handler(1000, Some(move || Instant::now() > deadline));
        let mut rows = Vec::new();
        for (idx, stmt) in statements.iter().enumerate() {
            run_statement(&conn, stmt, idx, &mut rows).map_err(|e| classify(&e))?;
        }
        rows.sort();
        conn.progress_handler(0, None::<fn() -> bool>);
        Ok((rows, snapshot(&conn)))
    }

    fn query_rows(&self, sql: &str) -> Option<Vec<String>> {
        self.run(sql).ok().map(|(rows, _)| rows)
    }

    /// Results for every template, in template order.
    pub fn results(&self, payload: &str) -> Vec<ExecutionResult> {
        self.templates.iter().map(|t| self.execute(payload, t)).collect()
    }

    /// Templates of the original payload's injection context, or all of
    /// them when none match.
    pub fn templates_for(&self, original: &str) -> Vec<&Template> {
        let context = InjectionContext::of_payload(original);
        let matching: Vec<&Template> = self.templates.iter().filter(|t| t.context == context).collect();
        if matching.is_empty() {
            self.templates.iter().collect()
        } else {
            matching
        }
    }

    /// Same outcome under every template of the original's context.
    pub fn equivalent(&self, original: &str, mutated: &str) -> bool {
        original == mutated
            || self.templates_for(original).into_iter().all(|t| self.execute(original, t) == self.execute(mutated, t))
    }

    /// Equivalence of two wire-encoded payloads.
    pub fn equivalent_wire(&self, original: &str, mutated: &str, method: RequestMethod) -> Result<bool, DecodeError> {
        Ok(self.equivalent(&decode_wire(original, method)?, &decode_wire(mutated, method)?))
    }

    /// Whether `condition` behaves as true (`Some(true)`), as false
    /// (`Some(false)`), or neither when used as a WHERE predicate.
    pub fn truth_of(&self, condition: &str) -> Option<bool> {
        let all = self.query_rows(&format!("SELECT name FROM users WHERE id = 0 or {condition}"))?;
        let one = self.query_rows(&format!("SELECT name FROM users WHERE id = 1 and {condition}"))?;
        match (all.len(), one.len()) {
            (5, 1) => Some(true),
            (0, 0) => Some(false),
            _ => None,
        }
    }

    fn selects_row_one(&self, sql: &str) -> bool {
        self.query_rows(sql).is_some_and(|r| r == ["0|t:admin"])
    }

    fn selects_all(&self, sql: &str) -> bool {
        self.query_rows(sql).is_some_and(|r| r.len() == 5)
    }

    fn selects_none(&self, sql: &str) -> bool {
        self.query_rows(sql).is_some_and(|r| r.is_empty())
    }

    /// Keep only catalog entries that behave as declared on this bench.
    pub fn verify_catalogs(&self, grammar: &Grammar) -> Grammar {
        grammar
            .with_catalog_filter(|catalog, value| self.catalog_entry_holds(catalog, value))
            .expect("verification keeps every entry symbol productive")
    }

    fn catalog_entry_holds(&self, catalog: &str, v: &str) -> bool {
        let q = "SELECT name FROM users WHERE";
        match catalog {
            "sigma_true" | "tau_number" | "tau_string" | "tau_complex" => self.truth_of(v) == Some(true),
            "sigma_false" => self.truth_of(v) == Some(false),
            "sigma_and" => {
                self.selects_row_one(&format!("{q} id = 1 {v} 1")) && self.selects_none(&format!("{q} 1 {v} 0"))
            }
            "sigma_or" => self.selects_all(&format!("{q} 0 {v} 1")) && self.selects_none(&format!("{q} 0 {v} 0")),
            "sigma_eq" => self.selects_all(&format!("{q} 7 {v} 7")) && self.selects_none(&format!("{q} 7 {v} 8")),
            "sigma_whitespace" => self.selects_row_one(&format!("SELECT{v}name{v}FROM{v}users{v}WHERE{v}id{v}={v}1")),
            "gamma_chars" | "gamma_sentence" | "gamma_benign" => {
                self.selects_row_one(&format!("SELECT/*{v}*/name/**{v}*/FROM users WHERE id = 1"))
            }
            "sigma_where" => self.selects_row_one(&format!("SELECT name FROM users {v} id = 1")),
            _ => true,
        }
    }
}

fn run_statement(conn: &Connection, sql: &str, idx: usize, rows: &mut Vec<String>) -> rusqlite::Result<()> {
    let mut stmt = conn.prepare(sql)?;
    let cols = stmt.column_count();
    let mut cursor = stmt.raw_query();
    while let Some(row) = cursor.next()? {
        let cells: Vec<String> = (0..cols).map(|i| cell(row.get_ref(i))).collect::<rusqlite::Result<_>>()?;
        rows.push(format!("{idx}|{}", cells.join("|")));
    }
    Ok(())
}

fn cell(v: rusqlite::Result<ValueRef<'_>>) -> rusqlite::Result<String> {
    Ok(match v? {
        ValueRef::Null => "n".into(),
        ValueRef::Integer(i) => format!("i:{i}"),
        ValueRef::Real(r) => format!("r:{r}"),
        ValueRef::Text(t) => format!("t:{}", String::from_utf8_lossy(t)),
        ValueRef::Blob(b) => format!("b:{}", b.iter().map(|x| format!("{x:02x}")).collect::<String>()),
    })
}

/// Bench state after execution, so stacked writes show up in the result.
fn snapshot(conn: &Connection) -> Vec<String> {
    let schema: Vec<String> = conn
        .prepare("SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name")
        .and_then(|mut s| s.query_map([], |r| r.get::<_, String>(0))?.collect())
        .unwrap_or_default();
    let mut out = vec![format!("~tables|{}", schema.join(","))];
    let users: Vec<String> = conn
        .prepare("SELECT id, name, secret FROM users ORDER BY id")
        .and_then(|mut s| {
            s.query_map([], |r| {
                Ok(format!("~users|{}|{}|{}", cell(r.get_ref(0))?, cell(r.get_ref(1))?, cell(r.get_ref(2))?))
            })?
            .collect()
        })
        .unwrap_or_default();
    out.extend(users);
    out
}

fn classify(e: &rusqlite::Error) -> ErrorClass {
    let msg = e.to_string();
    if ["syntax error", "incomplete input", "unrecognized token"].iter().any(|m| msg.contains(m)) {
        ErrorClass::Syntax
    } else {
        ErrorClass::Runtime
    }
}

/// The built-in grammar with catalogs verified against the default bench.
pub fn verified_grammar() -> Arc<Grammar> {
    static CELL: OnceLock<Arc<Grammar>> = OnceLock::new();
    CELL.get_or_init(|| Arc::new(Oracle::default().verify_catalogs(&Grammar::builtin()))).clone()
}

#[cfg(test)]
mod tests;
