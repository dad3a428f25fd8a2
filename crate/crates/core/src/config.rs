//! Plain-text `key=value` configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Non-empty lines as `(line number, key, value)`. `#` starts a comment.
pub fn parse_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", i + 1),
                format!("expected key=value, got `{line}`"),
            )
        })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Keys mapped to values; a repeated key is an error.
pub fn parse_map(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (line, k, v) in parse_lines(text)? {
        if map.insert(k.clone(), v).is_some() {
            return Err(Error::config(k, format!("repeated on line {line}")));
        }
    }
    Ok(map)
}

pub fn parse_value<V: FromStr>(field: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::config(field, format!("cannot parse `{value}`")))
}

/// Lines of the form `a=b` with numeric sides.
pub fn parse_pairs<A: FromStr, B: FromStr>(what: &str, text: &str) -> Result<Vec<(A, B)>> {
    parse_lines(text)?
        .into_iter()
        .map(|(line, k, v)| {
            let field = format!("{what} line {line}");
            Ok((parse_value(&field, &k)?, parse_value(&field, &v)?))
        })
        .collect()
}
