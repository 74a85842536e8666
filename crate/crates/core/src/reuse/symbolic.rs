//! Closed-form working-set polynomials for untiled GEMM nests.
//!
//! For a fixed loop order the working-set counts are multilinear in the
//! problem sizes. The polynomial is recovered exactly from the counts at the
//! corners of `{b, b+1}^n` and then checked against further sample points; a
//! fit that does not reproduce every check point is rejected.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Integer polynomial over named variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polynomial {
    vars: Vec<String>,
    /// Exponent vector (aligned with `vars`) to coefficient.
    terms: BTreeMap<Vec<u32>, i64>,
}

impl Polynomial {
    pub fn new(vars: &[&str]) -> Self {
        Self { vars: vars.iter().map(|v| v.to_string()).collect(), terms: BTreeMap::new() }
    }

    pub fn with_term(mut self, coeff: i64, exps: &[u32]) -> Self {
        self.add(exps.to_vec(), coeff);
        self
    }

    fn add(&mut self, exps: Vec<u32>, coeff: i64) {
        let c = self.terms.entry(exps.clone()).or_insert(0);
        *c += coeff;
        if *c == 0 {
            self.terms.remove(&exps);
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn eval(&self, values: &[i64]) -> i64 {
        self.terms.iter().map(|(e, c)| e.iter().zip(values).fold(*c, |acc, (&p, &x)| acc * x.pow(p))).sum()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut order: Vec<(&Vec<u32>, &i64)> = self.terms.iter().collect();
        order.sort_by(|(a, _), (b, _)| {
            let (da, db): (u32, u32) = (a.iter().sum(), b.iter().sum());
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        for (n, (exps, &c)) in order.into_iter().enumerate() {
            let sign = if c < 0 { "-" } else { "+" };
            if n == 0 {
                if c < 0 {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mono: String = exps
                .iter()
                .zip(&self.vars)
                .filter(|(p, _)| **p > 0)
                .map(|(p, v)| if *p == 1 { v.clone() } else { format!("{v}^{p}") })
                .collect();
            if mono.is_empty() || c.abs() != 1 {
                write!(f, "{}", c.abs())?;
            }
            f.write_str(&mono)?;
        }
        Ok(())
    }
}

/// Fits the unique multilinear polynomial through `f` on `{base, base+1}^n`
/// and verifies it on `checks`. Returns `None` if any check point disagrees.
pub fn fit_multilinear(
    vars: &[&str],
    base: i64,
    checks: &[Vec<i64>],
    mut f: impl FnMut(&[i64]) -> Option<i64>,
) -> Option<Polynomial> {
    let n = vars.len();
    let corners = 1usize << n;
    let mut values = Vec::with_capacity(corners);
    for mask in 0..corners {
        let point: Vec<i64> = (0..n).map(|v| base + ((mask >> v) & 1) as i64).collect();
        values.push(f(&point)?);
    }
    let mut poly = Polynomial::new(vars);
    for s in 0..corners {
        // Forward difference over the variables in `s`.
        let mut diff = 0i64;
        for (t, value) in values.iter().enumerate() {
            if t & !s != 0 {
                continue;
            }
            let sign = if (s ^ t).count_ones() % 2 == 0 { 1 } else { -1 };
            diff += sign * value;
        }
        if diff == 0 {
            continue;
        }
        // diff * prod_{v in s} (x_v - base), expanded.
        for u in 0..corners {
            if u & !s != 0 {
                continue;
            }
            let k = (s & !u).count_ones();
            let exps: Vec<u32> = (0..n).map(|v| ((u >> v) & 1) as u32).collect();
            poly.add(exps, diff * (-base).pow(k));
        }
    }
    for p in checks {
        if poly.eval(p) != f(p)? {
            return None;
        }
    }
    Some(poly)
}
