//! Pulling a JSON payload out of a chat reply and checking it against the
//! response contract of each decision point.
//!
//! Replies follow the prompt's loose output format, so besides strict JSON we
//! accept Python-style tuples, `True`/`False`/`None`, bare keys, single-quoted
//! strings and unquoted free-text values that run to the end of the line.

use serde_json::{Map, Value};

use super::{FeedbackResponse, ProposalResponse, RefineResponse};
use crate::domain::{Route, RoutePoint};
use crate::error::{Error, Result};

/// The first complete `{...}` object in `text`, matched by brace depth with
/// quoted strings skipped.
pub fn extract_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn push_json_string(out: &mut String, s: &str) {
    out.push_str(&Value::String(s.to_string()).to_string());
}

/// Rewrites the relaxed syntax described in the module docs into JSON.
/// Strict JSON passes through unchanged.
pub fn repair_json(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len() + 16);
    let mut i = 0;
    // Last significant character written, to tell keys from values.
    let mut prev = ' ';
    while i < chars.len() {
        let c = chars[i];
        match c {
            '"' | '\'' => {
                let mut s = String::new();
                i += 1;
                while i < chars.len() && chars[i] != c {
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        let n = chars[i + 1];
                        match n {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            'r' => s.push('\r'),
                            _ => s.push(n),
                        }
                        i += 2;
                    } else {
                        s.push(chars[i]);
                        i += 1;
                    }
                }
                i += 1;
                push_json_string(&mut out, &s);
                prev = '"';
            }
            '(' => {
                out.push('[');
                prev = '[';
                i += 1;
            }
            ')' => {
                out.push(']');
                prev = ']';
                i += 1;
            }
            ',' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                // Drop trailing commas.
                if !matches!(chars.get(j), Some('}' | ']' | ')')) {
                    out.push(',');
                    prev = ',';
                }
                i += 1;
            }
            _ if is_ident_start(c) => {
                let start = i;
                while i < chars.len() && is_ident(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let mut j = i;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                if chars.get(j) == Some(&':') {
                    push_json_string(&mut out, &word);
                    prev = '"';
                    continue;
                }
                let literal = match word.as_str() {
                    "True" | "true" => Some("true"),
                    "False" | "false" => Some("false"),
                    "None" | "null" => Some("null"),
                    _ => None,
                };
                match literal {
                    Some(l)
                        if j >= chars.len()
                            || matches!(chars[j], ',' | '}' | ']' | ')')
                            || chars[i..j].contains(&'\n') =>
                    {
                        out.push_str(l);
                        prev = 'l';
                    }
                    _ if prev == ':' => {
                        // Free text value: up to the end of the line, minus a
                        // trailing comma and any closers it does not open.
                        let mut end = start;
                        while end < chars.len() && chars[end] != '\n' {
                            end += 1;
                        }
                        let mut value: String = chars[start..end].iter().collect();
                        let mut tail = String::new();
                        loop {
                            let t = value.trim_end();
                            let opens = t.matches(['{', '[', '(']).count();
                            let closes = t.matches(['}', ']', ')']).count();
                            let last = t.chars().last();
                            if last == Some(',') || (matches!(last, Some('}' | ']')) && closes > opens) {
                                tail.insert(0, last.unwrap_or(','));
                                value = t[..t.len() - 1].to_string();
                            } else {
                                value = t.to_string();
                                break;
                            }
                        }
                        push_json_string(&mut out, value.trim());
                        out.push_str(&tail);
                        prev = tail.chars().last().unwrap_or('"');
                        i = end;
                    }
                    _ => {
                        out.push_str(&word);
                        prev = 'w';
                    }
                }
            }
            _ => {
                out.push(c);
                if !c.is_whitespace() {
                    prev = c;
                }
                i += 1;
            }
        }
    }
    out
}

/// Extracts and parses the payload object, repairing it if strict parsing
/// fails.
fn payload(text: &str) -> Result<Map<String, Value>> {
    let raw = extract_json_object(text).ok_or_else(|| Error::MalformedResponse("no JSON object in reply".into()))?;
    let value = serde_json::from_str::<Value>(raw)
        .or_else(|_| serde_json::from_str::<Value>(&repair_json(raw)))
        .map_err(|e| Error::MalformedResponse(e.to_string()))?;
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(Error::MalformedResponse("payload is not an object".into())),
    }
}

fn violation(msg: impl Into<String>) -> Error {
    Error::ContractViolation(msg.into())
}

fn coordinate(v: &Value, what: &str) -> Result<u32> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| violation(format!("{what}: expected a non-negative integer, got {v}")))
}

fn parse_route(v: &Value, what: &str) -> Result<Route> {
    let items = v
        .as_array()
        .ok_or_else(|| violation(format!("{what} must be a list of (x, y, t)")))?;
    if items.is_empty() {
        return Err(violation(format!("{what} is empty")));
    }
    let mut points = Vec::with_capacity(items.len());
    for item in items {
        let p = match item {
            Value::Array(a) if a.len() == 3 => RoutePoint::new(
                coordinate(&a[0], what)?,
                coordinate(&a[1], what)?,
                coordinate(&a[2], what)?,
            ),
            Value::Object(o) => {
                let get = |k: &str| {
                    o.get(k)
                        .ok_or_else(|| violation(format!("{what}: point without `{k}`")))
                };
                RoutePoint::new(
                    coordinate(get("x")?, what)?,
                    coordinate(get("y")?, what)?,
                    coordinate(get("t")?, what)?,
                )
            }
            _ => return Err(violation(format!("{what}: {item} is not an (x, y, t) point"))),
        };
        points.push(p);
    }
    Ok(Route::new(points))
}

fn text_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn parse_refine(text: &str) -> Result<RefineResponse> {
    let m = payload(text)?;
    let path = m.get("final_path").ok_or_else(|| violation("missing final_path"))?;
    Ok(RefineResponse {
        final_path: parse_route(path, "final_path")?,
        explanation: m.get("explanation").map(text_of).unwrap_or_default(),
    })
}

const TIEBREAK_KEYS: [&str; 6] = ["selected_ids", "ids", "id", "selected", "selected_id", "participant_id"];

/// The chosen id, which must be one of `candidates`.
pub fn parse_tiebreak(text: &str, candidates: &[String]) -> Result<String> {
    let m = payload(text)?;
    let value = TIEBREAK_KEYS
        .iter()
        .find_map(|k| m.get(*k))
        .ok_or_else(|| violation("no selected id in reply"))?;
    let id = match value {
        Value::Array(a) if a.len() == 1 => text_of(&a[0]),
        Value::Array(a) => return Err(violation(format!("expected exactly one id, got {}", a.len()))),
        Value::String(_) | Value::Number(_) => text_of(value),
        other => return Err(violation(format!("unexpected id value {other}"))),
    };
    if candidates.contains(&id) {
        Ok(id)
    } else {
        Err(violation(format!("`{id}` is not among the candidates")))
    }
}

pub fn parse_proposal(text: &str, u: &str, v: &str) -> Result<ProposalResponse> {
    let m = payload(text)?;
    let routes = m
        .get("refined_routes")
        .and_then(Value::as_object)
        .ok_or_else(|| violation("missing refined_routes object"))?;
    let side = |obj: &Map<String, Value>, id: &str, alias: &str| obj.get(id).or_else(|| obj.get(alias)).cloned();
    let route_u = side(routes, u, "u").ok_or_else(|| violation(format!("no refined route for {u}")))?;
    let route_v = side(routes, v, "v").ok_or_else(|| violation(format!("no refined route for {v}")))?;
    let incentives = m.get("incentives").and_then(Value::as_object);
    let incentive = |id: &str, alias: &str| {
        incentives
            .and_then(|o| side(o, id, alias))
            .map(|x| text_of(&x))
            .unwrap_or_default()
    };
    Ok(ProposalResponse {
        route_u: parse_route(&route_u, u)?,
        route_v: parse_route(&route_v, v)?,
        incentive_u: incentive(u, "u"),
        incentive_v: incentive(v, "v"),
    })
}

pub fn parse_feedback(text: &str) -> Result<FeedbackResponse> {
    let m = payload(text)?;
    let agreement = match m.get("agreement") {
        Some(Value::Bool(b)) => *b,
        Some(other) => return Err(violation(format!("agreement must be a boolean, got {other}"))),
        None => return Err(violation("missing agreement")),
    };
    Ok(FeedbackResponse {
        agreement,
        feedback: m.get("feedback").map(text_of).unwrap_or_default(),
    })
}
