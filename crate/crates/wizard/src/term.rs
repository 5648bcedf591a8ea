use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// Object position of a triple: a symbol or a literal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Term {
    Symbol { name: String },
    String { value: String },
    Number { value: f64 },
    Quantity { value: f64, unit: String },
    Boolean { value: bool },
}

impl Term {
    pub fn sym(name: impl Into<String>) -> Term {
        Term::Symbol { name: name.into() }
    }

    pub fn string(value: impl Into<String>) -> Term {
        Term::String {
            value: value.into(),
        }
    }

    pub fn num(value: f64) -> Term {
        Term::Number { value }
    }

    pub fn quantity(value: f64, unit: impl Into<String>) -> Term {
        Term::Quantity {
            value,
            unit: unit.into(),
        }
    }

    pub fn bool(value: bool) -> Term {
        Term::Boolean { value }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Term::Symbol { name } => Some(name),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Term::String { value } => Some(value),
            _ => None,
        }
    }

    /// Numeric value of numbers and quantities.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Term::Number { value } | Term::Quantity { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Term::Boolean { value } => Some(*value),
            _ => None,
        }
    }

    /// Parses one token of the KB syntax: `true`/`false`, a number, a
    /// quantity `5e-4~m`, a quoted string or a bare symbol.
    pub fn parse(token: &str) -> std::result::Result<Term, String> {
        let token = token.trim();
        if token.is_empty() {
            return Err("empty term".into());
        }
        if let Some(rest) = token.strip_prefix('"') {
            let inner = rest
                .strip_suffix('"')
                .ok_or_else(|| format!("unterminated string {token}"))?;
            return Ok(Term::string(unescape(inner)?));
        }
        match token {
            "true" => return Ok(Term::bool(true)),
            "false" => return Ok(Term::bool(false)),
            _ => {}
        }
        if let Some((num, unit)) = token.split_once('~') {
            let value = parse_number(num).ok_or_else(|| format!("bad quantity {token}"))?;
            if !is_identifier(unit) {
                return Err(format!("bad unit in {token}"));
            }
            return Ok(Term::quantity(value, unit));
        }
        if starts_numeric(token) {
            return parse_number(token)
                .map(Term::num)
                .ok_or_else(|| format!("bad number {token}"));
        }
        if is_identifier(token) {
            return Ok(Term::sym(token));
        }
        Err(format!("bad term {token}"))
    }

    fn key(&self) -> (u8, &str, u64) {
        match self {
            Term::Symbol { name } => (0, name, 0),
            Term::String { value } => (1, value, 0),
            Term::Number { value } => (2, "", value.to_bits()),
            Term::Quantity { value, unit } => (3, unit, value.to_bits()),
            Term::Boolean { value } => (4, "", *value as u64),
        }
    }
}

// Parsed numbers are always finite, so bitwise identity is equality.
impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Symbol { name } => f.write_str(name),
            Term::String { value } => {
                f.write_str("\"")?;
                for c in value.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Term::Number { value } => write!(f, "{value}"),
            Term::Quantity { value, unit } => write!(f, "{value}~{unit}"),
            Term::Boolean { value } => write!(f, "{value}"),
        }
    }
}

fn unescape(s: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(e @ ('"' | '\\')) => out.push(e),
                other => return Err(format!("bad escape \\{}", other.unwrap_or(' '))),
            },
            '"' => return Err("unescaped quote inside string".into()),
            _ => out.push(c),
        }
    }
    Ok(out)
}

fn starts_numeric(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    s.starts_with(|c: char| c.is_ascii_digit() || c == '.')
}

/// Finite decimal or scientific number; rejects `inf`, `NaN` and friends.
pub(crate) fn parse_number(s: &str) -> Option<f64> {
    if !starts_numeric(s) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Letters, digits, `_`, `-` and `:`, not starting with a digit.
pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | ':'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for t in [
            Term::sym("soma:Workflow"),
            Term::string("say \"hi\""),
            Term::num(-2.5e-7),
            Term::quantity(6000.0, "rpm"),
            Term::bool(false),
        ] {
            assert_eq!(Term::parse(&t.to_string()).unwrap(), t);
        }
    }

    #[test]
    fn rejects_junk() {
        for s in ["", "1x", "5~", "\"open", "a b", "NaN~m"] {
            assert!(Term::parse(s).is_err(), "{s}");
        }
    }
}
