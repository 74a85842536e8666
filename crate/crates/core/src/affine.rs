//! Integer affine expressions over named variables.
//!
//! An expression is a map `variable -> coefficient` plus a constant. There is
//! no division or modulo. Expressions round-trip through a compact textual
//! form (`"i + 2*k - 3"`), which is also their JSON representation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AffineExpr {
    terms: BTreeMap<String, i64>,
    constant: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AffineParseError {
    #[error("empty affine expression")]
    Empty,
    #[error("malformed term `{0}`")]
    BadTerm(String),
}

impl AffineExpr {
    pub fn constant(c: i64) -> Self {
        Self { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(name: &str) -> Self {
        Self::term(name, 1)
    }

    pub fn term(name: &str, coeff: i64) -> Self {
        let mut e = Self::default();
        e.add_term(name, coeff);
        e
    }

    fn add_term(&mut self, name: &str, coeff: i64) {
        let slot = self.terms.entry(name.to_string()).or_insert(0);
        *slot += coeff;
        if *slot == 0 {
            self.terms.remove(name);
        }
    }

    pub fn plus(mut self, other: &AffineExpr) -> Self {
        for (v, c) in &other.terms {
            self.add_term(v, *c);
        }
        self.constant += other.constant;
        self
    }

    pub fn plus_const(mut self, c: i64) -> Self {
        self.constant += c;
        self
    }

    pub fn constant_term(&self) -> i64 {
        self.constant
    }

    pub fn coeff(&self, var: &str) -> i64 {
        self.terms.get(var).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, i64)> {
        self.terms.iter().map(|(v, c)| (v.as_str(), *c))
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates with `lookup` supplying every variable's value. `None` if a
    /// variable is unbound.
    pub fn eval_with(&self, mut lookup: impl FnMut(&str) -> Option<i64>) -> Option<i64> {
        let mut acc = self.constant;
        for (v, c) in &self.terms {
            acc += c * lookup(v)?;
        }
        Some(acc)
    }

    /// Replaces every variable found in `bindings` by its value.
    pub fn substitute(&self, bindings: &BTreeMap<String, i64>) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant);
        for (v, c) in &self.terms {
            match bindings.get(v) {
                Some(val) => out.constant += c * val,
                None => out.add_term(v, *c),
            }
        }
        out
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, &c) in &self.terms {
            let mag = c.abs();
            if first {
                if c < 0 {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if c < 0 { " - " } else { " + " })?;
            }
            if mag == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{mag}*{v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant != 0 {
            let sign = if self.constant < 0 { " - " } else { " + " };
            write!(f, "{sign}{}", self.constant.abs())
        } else {
            Ok(())
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl FromStr for AffineExpr {
    type Err = AffineParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(AffineParseError::Empty);
        }
        // Split into signed terms.
        let mut pieces = Vec::new();
        let mut current = String::new();
        for (idx, ch) in compact.char_indices() {
            if (ch == '+' || ch == '-') && idx > 0 {
                pieces.push(std::mem::take(&mut current));
            }
            current.push(ch);
        }
        pieces.push(current);

        let mut expr = AffineExpr::default();
        for piece in pieces {
            let (sign, body) = match piece.strip_prefix('-') {
                Some(rest) => (-1, rest),
                None => (1, piece.strip_prefix('+').unwrap_or(&piece)),
            };
            let bad = || AffineParseError::BadTerm(piece.clone());
            if body.is_empty() {
                return Err(bad());
            }
            if let Some((lhs, rhs)) = body.split_once('*') {
                let (num, var) = if is_ident(rhs) { (lhs, rhs) } else { (rhs, lhs) };
                let n: i64 = num.parse().map_err(|_| bad())?;
                if !is_ident(var) {
                    return Err(bad());
                }
                expr.add_term(var, sign * n);
            } else if is_ident(body) {
                expr.add_term(body, sign);
            } else {
                let n: i64 = body.parse().map_err(|_| bad())?;
                expr.constant += sign * n;
            }
        }
        Ok(expr)
    }
}

impl TryFrom<String> for AffineExpr {
    type Error = AffineParseError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AffineExpr> for String {
    fn from(e: AffineExpr) -> String {
        e.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let e: AffineExpr = "i + 2*k - 3".parse().unwrap();
        assert_eq!(e.coeff("i"), 1);
        assert_eq!(e.coeff("k"), 2);
        assert_eq!(e.constant_term(), -3);
        assert_eq!(e.to_string(), "i + 2*k - 3");
        let back: AffineExpr = e.to_string().parse().unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn constants_and_cancellation() {
        assert_eq!("0".parse::<AffineExpr>().unwrap(), AffineExpr::constant(0));
        let e: AffineExpr = "j - j + 4".parse().unwrap();
        assert!(e.is_constant());
        assert_eq!(e.to_string(), "4");
        assert_eq!("-i".parse::<AffineExpr>().unwrap().to_string(), "-i");
        assert_eq!("3*x".parse::<AffineExpr>().unwrap(), "x*3".parse().unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert!("".parse::<AffineExpr>().is_err());
        assert!("i +".parse::<AffineExpr>().is_err());
        assert!("2*3".parse::<AffineExpr>().is_err());
        assert!("i/2".parse::<AffineExpr>().is_err());
    }

    #[test]
    fn substitute_binds_parameters() {
        let e: AffineExpr = "it + 32".parse().unwrap();
        let ub: AffineExpr = "M".parse().unwrap();
        let mut b = BTreeMap::new();
        b.insert("M".to_string(), 100);
        assert_eq!(ub.substitute(&b), AffineExpr::constant(100));
        assert_eq!(e.substitute(&b), e);
        assert_eq!(e.eval_with(|_| Some(64)), Some(96));
        assert_eq!(e.eval_with(|_| None), None);
    }
}
