//! MySQL functions the embedded engine lacks, registered per connection.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use rusqlite::functions::{Context, FunctionFlags};
use rusqlite::types::{Value, ValueRef};
use rusqlite::{Connection, Error, Result};

use super::rewrite::SERVER_VERSION;

const RAND_SEED: u64 = 0x5eed;

fn text_of(v: ValueRef<'_>) -> Option<String> {
    match v {
        ValueRef::Null => None,
        ValueRef::Integer(i) => Some(i.to_string()),
        ValueRef::Real(r) => Some(r.to_string()),
        ValueRef::Text(t) | ValueRef::Blob(t) => Some(String::from_utf8_lossy(t).into_owned()),
    }
}

fn args_text(ctx: &Context<'_>) -> Vec<Option<String>> {
    (0..ctx.len()).map(|i| text_of(ctx.get_raw(i))).collect()
}

fn user_error(msg: &str) -> Error {
    Error::UserFunctionError(msg.into())
}

pub(super) fn register(conn: &Connection) -> Result<()> {
    let det = FunctionFlags::SQLITE_UTF8 | FunctionFlags::SQLITE_DETERMINISTIC;
    let nondet = FunctionFlags::SQLITE_UTF8;

    let rng = Mutex::new(ChaCha8Rng::seed_from_u64(RAND_SEED));
    conn.create_scalar_function("rand", -1, nondet, move |_| {
        Ok(rng.lock().map_err(|_| user_error("rand poisoned"))?.gen::<f64>())
    })?;
    for name in ["sleep", "benchmark"] {
        conn.create_scalar_function(name, -1, nondet, |_| Ok(0i64))?;
    }
    for (name, value) in [
        ("version", SERVER_VERSION),
        ("database", "bench"),
        ("schema", "bench"),
        ("user", "root@localhost"),
        ("current_user", "root@localhost"),
        ("session_user", "root@localhost"),
        ("system_user", "root@localhost"),
        ("connection_id", "7"),
    ] {
        conn.create_scalar_function(name, 0, det, move |_| Ok(value.to_string()))?;
    }
    for name in ["ord", "ascii"] {
        conn.create_scalar_function(name, 1, det, |ctx| {
            Ok(text_of(ctx.get_raw(0)).map(|s| s.bytes().next().map_or(0, i64::from)))
        })?;
    }
    conn.create_scalar_function("concat", -1, det, |ctx| {
        let parts = args_text(ctx);
        Ok(parts.into_iter().collect::<Option<Vec<_>>>().map(|p| p.concat()))
    })?;
    conn.create_scalar_function("concat_ws", -1, det, |ctx| {
        let mut parts = args_text(ctx).into_iter();
        let Some(Some(sep)) = parts.next() else {
            return Ok(None);
        };
        Ok(Some(parts.flatten().collect::<Vec<_>>().join(&sep)))
    })?;
    for name in ["extractvalue", "updatexml", "gtid_subset", "polygon", "multipoint"] {
        conn.create_scalar_function(name, -1, det, move |_| -> Result<i64> {
            Err(user_error(&format!("invalid XPATH expression in {name}")))
        })?;
    }
    conn.create_scalar_function("regexp", 2, det, |ctx| {
        let (Some(pattern), Some(text)) = (text_of(ctx.get_raw(0)), text_of(ctx.get_raw(1))) else {
            return Ok(None);
        };
        let re = Regex::new(&format!("(?i){pattern}")).map_err(|e| user_error(&e.to_string()))?;
        Ok(Some(re.is_match(&text) as i64))
    })?;
    conn.create_scalar_function("floor", 1, det, |ctx| {
        Ok(match ctx.get_raw(0) {
            ValueRef::Integer(i) => Some(i as f64),
            ValueRef::Null => None,
            v => text_of(v).and_then(|s| s.trim().parse::<f64>().ok()).map(f64::floor).or(Some(0.0)),
        }
        .map(|f| f as i64))
    })?;
    conn.create_scalar_function("mid", -1, det, |ctx| {
        let args = args_text(ctx);
        let Some(Some(s)) = args.first().cloned() else {
            return Ok(None);
        };
        let pos = args.get(1).cloned().flatten().and_then(|p| p.parse::<i64>().ok()).unwrap_or(1);
        let len = args.get(2).cloned().flatten().and_then(|l| l.parse::<i64>().ok());
        let chars: Vec<char> = s.chars().collect();
        let start = if pos > 0 { (pos - 1) as usize } else { chars.len().saturating_sub(pos.unsigned_abs() as usize) };
        let take = len.map_or(usize::MAX, |l| l.max(0) as usize);
        Ok(Some(chars.iter().skip(start).take(take).collect::<String>()))
    })?;
    conn.create_scalar_function("left", 2, det, |ctx| {
        let s = text_of(ctx.get_raw(0));
        let n: i64 = ctx.get::<Option<i64>>(1)?.unwrap_or(0);
        Ok(s.map(|s| s.chars().take(n.max(0) as usize).collect::<String>()))
    })?;
    conn.create_scalar_function("right", 2, det, |ctx| {
        let s = text_of(ctx.get_raw(0));
        let n: i64 = ctx.get::<Option<i64>>(1)?.unwrap_or(0);
        Ok(s.map(|s| {
            let chars: Vec<char> = s.chars().collect();
            chars[chars.len().saturating_sub(n.max(0) as usize)..].iter().collect::<String>()
        }))
    })?;
    for (name, pick_max) in [("greatest", true), ("least", false)] {
        conn.create_scalar_function(name, -1, det, move |ctx| {
            let mut best: Option<Value> = None;
            for i in 0..ctx.len() {
                let v: Value = ctx.get(i)?;
                if v == Value::Null {
                    return Ok(Value::Null);
                }
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let (x, y) = (as_f64(&b), as_f64(&v));
                        if (y > x) == pick_max && y != x {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            Ok(best.unwrap_or(Value::Null))
        })?;
    }
    Ok(())
}

fn as_f64(v: &Value) -> f64 {
    match v {
        Value::Integer(i) => *i as f64,
        Value::Real(r) => *r,
        Value::Text(t) => t.trim().parse().unwrap_or(0.0),
        _ => 0.0,
    }
}
