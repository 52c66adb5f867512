//! `--overrides` grammar: comma-separated `key=value` pairs. List-valued keys
//! take several comma-separated items, inclusive ranges `a..b`, and geometric
//! ranges `a..bxK` (a, aK, aK², … up to b). A token without `=` continues the
//! list of the key before it, so `ranks=2,6,sigma2=0.5` sets two fields.

use rlct_core::experiments::LIST_FIELDS;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverrideError(pub String);

impl std::fmt::Display for OverrideError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, OverrideError> {
    Err(OverrideError(msg.into()))
}

fn parse_u64(s: &str) -> Result<u64, OverrideError> {
    s.trim().parse().map_err(|_| OverrideError(format!("`{s}` is not a nonnegative integer")))
}

/// Expands one list item: a number, `a..b`, or `a..bxK`.
fn expand_item(item: &str) -> Result<Vec<Value>, OverrideError> {
    let Some((lo, rest)) = item.split_once("..") else {
        return Ok(vec![scalar(item)]);
    };
    let lo = parse_u64(lo)?;
    let (hi, step) = match rest.split_once('x') {
        Some((hi, k)) => (parse_u64(hi)?, Some(parse_u64(k)?)),
        None => (parse_u64(rest)?, None),
    };
    if hi < lo {
        return err(format!("empty range `{item}`"));
    }
    let values: Vec<u64> = match step {
        None => (lo..=hi).collect(),
        Some(k) if k < 2 || lo == 0 => return err(format!("geometric range `{item}` needs start >= 1 and factor >= 2")),
        Some(k) => std::iter::successors(Some(lo), |&v| v.checked_mul(k)).take_while(|&v| v <= hi).collect(),
    };
    Ok(values.into_iter().map(Value::from).collect())
}

fn scalar(raw: &str) -> Value {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<u64>() {
        Value::from(v)
    } else if let Ok(v) = raw.parse::<i64>() {
        Value::from(v)
    } else if let Some(v) = raw.parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
        Value::Number(v)
    } else {
        Value::String(raw.to_string())
    }
}

/// Parses an override string into `(key, JSON value)` pairs, in order.
pub fn parse_overrides(spec: &str) -> Result<Vec<(String, Value)>, OverrideError> {
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match token.split_once('=') {
            Some((key, value)) => {
                let key = key.trim();
                if key.is_empty() {
                    return err(format!("missing key in `{token}`"));
                }
                groups.push((key.to_string(), vec![value.trim().to_string()]));
            }
            None => match groups.last_mut() {
                Some((key, items)) if LIST_FIELDS.contains(&key.as_str()) => items.push(token.to_string()),
                Some((key, _)) => return err(format!("`{key}` takes a single value, found extra item `{token}`")),
                None => return err(format!("expected key=value, found `{token}`")),
            },
        }
    }
    groups
        .into_iter()
        .map(|(key, items)| {
            let value = if LIST_FIELDS.contains(&key.as_str()) {
                let mut all = Vec::new();
                for item in &items {
                    all.extend(expand_item(item)?);
                }
                Value::Array(all)
            } else {
                if items[0].contains("..") {
                    return err(format!("`{key}` does not take a range"));
                }
                scalar(&items[0])
            };
            Ok((key, value))
        })
        .collect()
}
