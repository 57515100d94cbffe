//! Dotted paths into JSON values, e.g. `data.items` or `meta.next_cursor`.
//!
//! Segments are object keys; a segment that parses as an unsigned integer
//! also indexes into arrays.

use serde_json::Value;

pub fn is_valid(path: &str) -> bool {
    !path.is_empty() && path.split('.').all(|seg| !seg.is_empty())
}

pub fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(value, |node, seg| match node {
        Value::Object(map) => map.get(seg),
        Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
        _ => None,
    })
}

/// Scalar rendering used for ids and labels: strings verbatim, numbers and
/// booleans via their JSON text. Null, arrays and objects yield `None`.
pub fn lookup_scalar(value: &Value, path: &str) -> Option<String> {
    match lookup(value, path)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}
