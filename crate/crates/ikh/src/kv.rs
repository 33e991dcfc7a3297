//! Line-oriented `key = value` parsing shared by tracks, configs and
//! manifests.
//!
//! The format is deliberately small: one pair per line, `#` starts a comment,
//! blank lines are ignored. Keys and values are trimmed; values may contain
//! internal spaces (and `=` signs — only the first `=` splits). Pairs are
//! returned in file order together with their 1-based line number so callers
//! can report precise errors.

use thiserror::Error;

/// One `key = value` pair with its 1-based source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvPair {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Error raised for a line that is neither blank, a comment, nor a pair.
#[derive(Debug, Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: empty key")]
    EmptyKey { line: usize },
}

/// Parses a whole document into ordered pairs.
pub fn parse(text: &str) -> Result<Vec<KvPair>, KvError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(KvError::Malformed {
                line,
                text: content.to_string(),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError::EmptyKey { line });
        }
        pairs.push(KvPair {
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(pairs)
}

/// Parses a boolean value (`true` / `false`).
pub fn parse_bool(pair: &KvPair) -> Result<bool, String> {
    match pair.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!(
            "line {}: `{}` expects true or false, found `{}`",
            pair.line, pair.key, other
        )),
    }
}

/// Parses a floating-point value.
pub fn parse_f64(pair: &KvPair) -> Result<f64, String> {
    pair.value.parse::<f64>().map_err(|_| {
        format!(
            "line {}: `{}` expects a number, found `{}`",
            pair.line, pair.key, pair.value
        )
    })
}

/// Parses an unsigned integer value (scientific notation like `1e7` allowed).
pub fn parse_u64(pair: &KvPair) -> Result<u64, String> {
    if let Ok(v) = pair.value.parse::<u64>() {
        return Ok(v);
    }
    // Accept exact integral floats so configs can say `ts = 1e7`.
    if let Ok(v) = pair.value.parse::<f64>() {
        if v.is_finite() && v >= 0.0 && v <= u64::MAX as f64 && v.fract() == 0.0 {
            return Ok(v as u64);
        }
    }
    Err(format!(
        "line {}: `{}` expects a non-negative integer, found `{}`",
        pair.line, pair.key, pair.value
    ))
}

/// Parses a comma-separated list of unsigned integers.
pub fn parse_u64_list(pair: &KvPair) -> Result<Vec<u64>, String> {
    pair.value
        .split(',')
        .map(|tok| {
            tok.trim().parse::<u64>().map_err(|_| {
                format!(
                    "line {}: `{}` expects comma-separated integers, found `{}`",
                    pair.line, pair.key, tok.trim()
                )
            })
        })
        .collect()
}

/// Parses a comma-separated list of floats.
pub fn parse_f64_list(pair: &KvPair) -> Result<Vec<f64>, String> {
    pair.value
        .split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|_| {
                format!(
                    "line {}: `{}` expects comma-separated numbers, found `{}`",
                    pair.line, pair.key, tok.trim()
                )
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_blanks() {
        let text = "\n# header\nlr = 1e-4\n  bs=1024  # inline\npath = a = b\n";
        let pairs = parse(text).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0], KvPair { key: "lr".into(), value: "1e-4".into(), line: 3 });
        assert_eq!(pairs[1], KvPair { key: "bs".into(), value: "1024".into(), line: 4 });
        // Only the first `=` splits.
        assert_eq!(pairs[2].value, "a = b");
    }

    #[test]
    fn rejects_lines_without_equals() {
        let err = parse("lr 1e-4\n").unwrap_err();
        assert!(matches!(err, KvError::Malformed { line: 1, .. }));
        let err = parse("ok = 1\n = 2\n").unwrap_err();
        assert!(matches!(err, KvError::EmptyKey { line: 2 }));
    }

    #[test]
    fn scalar_parsers_accept_and_reject() {
        let pair = |v: &str| KvPair { key: "k".into(), value: v.into(), line: 7 };
        assert_eq!(parse_bool(&pair("true")).unwrap(), true);
        assert!(parse_bool(&pair("yes")).unwrap_err().contains("line 7"));
        assert_eq!(parse_f64(&pair("2.5")).unwrap(), 2.5);
        assert_eq!(parse_u64(&pair("1e7")).unwrap(), 10_000_000);
        assert!(parse_u64(&pair("1.5")).is_err());
        assert!(parse_u64(&pair("-3")).is_err());
        assert_eq!(parse_u64_list(&pair("0, 2,5")).unwrap(), vec![0, 2, 5]);
        assert_eq!(parse_f64_list(&pair("0.0, 10.5")).unwrap(), vec![0.0, 10.5]);
    }
}
