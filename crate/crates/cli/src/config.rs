//! Run configuration: a flat `key = value` file, overridden by flags.
//!
//! Keys:
//!
//! | key       | meaning                                   | default        |
//! |-----------|-------------------------------------------|----------------|
//! | `k`       | sides of the polygon                      | `5`            |
//! | `q`       | one rational, or one per generator        | `2`            |
//! | `eps`     | twist ε (rational)                        | `0`            |
//! | `n`       | grid size, a power of two                 | `4096`         |
//! | `lmax`    | word-length cap                           | `6`            |
//! | `samples` | boundary sample count                     | `64`           |
//! | `seed`    | seed of the ChaCha8 generator             | `1`            |
//! | `t`       | comma-separated layer radii               | `4,6,8,10`     |
//! | `arcs`    | JSON file with arcs `u`, `v`, `w`         | built-in       |
//! | `radius`  | word radius for `group ball`              | `2`            |
//! | `w`       | group element, e.g. `s0s2s1`              | `s0s1`         |
//! | `rows`    | `worst` or `all` estimate rows in the CSV | `worst`        |
//! | `out`     | directory for JSON/CSV files              | stdout only    |
//!
//! Lines starting with `#` are comments.

use std::path::PathBuf;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.to_string(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowMode {
    Worst,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub k: usize,
    #[serde(serialize_with = "ser_rationals")]
    pub q: Vec<Rational>,
    #[serde(serialize_with = "ser_rational")]
    pub eps: Rational,
    pub n: usize,
    pub lmax: usize,
    pub samples: usize,
    pub seed: u64,
    pub t: Vec<f64>,
    pub arcs: Option<PathBuf>,
    pub radius: usize,
    pub w: String,
    pub rows: RowMode,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_rationals<S: serde::Serializer>(r: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(r.iter().map(|x| x.to_string()))
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 5,
            q: vec![Rational::from_integer(2)],
            eps: Rational::zero(),
            n: 4096,
            lmax: 6,
            samples: 64,
            seed: 1,
            t: vec![4.0, 6.0, 8.0, 10.0],
            arcs: None,
            radius: 2,
            w: "s0s1".into(),
            rows: RowMode::Worst,
            out: None,
        }
    }
}

/// Parses `p/q`, an integer, or a finite decimal such as `-0.75`, exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let (p, q) = (i64::from_str(p.trim()).ok()?, i64::from_str(q.trim()).ok()?);
        return (q != 0).then(|| Rational::new(p, q));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 15 {
            return None;
        }
        let negative = whole.starts_with('-');
        let whole = if whole.is_empty() || whole == "-" || whole == "+" { 0 } else { i64::from_str(whole).ok()?.abs() };
        let scale = 10i64.pow(frac.len() as u32);
        let value = Rational::new(whole.checked_mul(scale)?.checked_add(i64::from_str(frac).ok()?)?, scale);
        return Some(if negative { -value } else { value });
    }
    i64::from_str(text).ok().map(Rational::from_integer)
}

fn parse_usize(field: &str, value: &str) -> Result<usize, ConfigError> {
    value.trim().parse().map_err(|_| bad(field, format!("`{value}` is not a non-negative integer")))
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim() {
            "k" => self.k = parse_usize("k", value)?,
            "q" => {
                self.q = value
                    .split(',')
                    .map(|x| parse_rational(x).ok_or_else(|| bad("q", format!("`{x}` is not a rational number"))))
                    .collect::<Result<_, _>>()?
            }
            "eps" => self.eps = parse_rational(value).ok_or_else(|| bad("eps", format!("`{value}` is not a rational number")))?,
            "n" => self.n = parse_usize("n", value)?,
            "lmax" => self.lmax = parse_usize("lmax", value)?,
            "samples" => self.samples = parse_usize("samples", value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed", format!("`{value}` is not an unsigned integer")))?,
            "t" => {
                self.t = value
                    .split(',')
                    .map(|x| {
                        parse_rational(x)
                            .and_then(|r| r.to_f64())
                            .ok_or_else(|| bad("t", format!("`{x}` is not a number")))
                    })
                    .collect::<Result<_, _>>()?
            }
            "arcs" => self.arcs = Some(PathBuf::from(value)),
            "radius" => self.radius = parse_usize("radius", value)?,
            "w" => self.w = value.to_string(),
            "rows" => {
                self.rows = match value {
                    "worst" => RowMode::Worst,
                    "all" => RowMode::All,
                    _ => return Err(bad("rows", format!("`{value}` is neither `worst` nor `all`"))),
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(bad(other, "unknown key")),
        }
        Ok(())
    }

    /// Reads a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (number, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line, format!("line {} is not of the form `key = value`", number + 1)))?;
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k < 5 {
            return Err(bad("k", format!("{} < 5: no compact right-angled polygon", self.k)));
        }
        if self.q.len() != 1 && self.q.len() != self.k {
            return Err(bad("q", format!("expected 1 or {} values, got {}", self.k, self.q.len())));
        }
        if self.q.iter().any(|q| *q < Rational::from_integer(1)) {
            return Err(bad("q", "every q_s must be at least 1"));
        }
        if !self.n.is_power_of_two() {
            return Err(bad("n", format!("{} is not a power of two", self.n)));
        }
        if self.samples == 0 {
            return Err(bad("samples", "must be positive"));
        }
        if self.t.is_empty() || self.t.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(bad("t", "radii must be positive"));
        }
        Ok(())
    }

    /// `q` expanded to one value per generator.
    pub fn q_vector(&self) -> Vec<Rational> {
        if self.q.len() == 1 {
            vec![self.q[0]; self.k]
        } else {
            self.q.clone()
        }
    }

    pub fn q_f64(&self) -> Vec<f64> {
        self.q_vector().iter().map(|q| q.to_f64().expect("finite")).collect()
    }

    pub fn eps_f64(&self) -> f64 {
        self.eps.to_f64().expect("finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3/2"), Some(Rational::new(3, 2)));
        assert_eq!(parse_rational(" 2 "), Some(Rational::from_integer(2)));
        assert_eq!(parse_rational("1.5"), Some(Rational::new(3, 2)));
        assert_eq!(parse_rational("-0.75"), Some(Rational::new(-3, 4)));
        assert_eq!(parse_rational(".5"), Some(Rational::new(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("1."), None);
    }

    #[test]
    fn file_and_overrides() {
        let mut cfg = RunConfig::parse("# demo\nk = 6\nq = 2,3,2,3,2,3\neps = 0.7\nt = 4, 6\n").unwrap();
        assert_eq!(cfg.k, 6);
        assert_eq!(cfg.q_vector()[1], Rational::from_integer(3));
        assert_eq!(cfg.eps, Rational::new(7, 10));
        assert_eq!(cfg.t, vec![4.0, 6.0]);
        cfg.set("q", "3/2").unwrap();
        assert_eq!(cfg.q_vector(), vec![Rational::new(3, 2); 6]);
        cfg.validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(RunConfig::parse("q = x").unwrap_err().field, "q");
        assert_eq!(RunConfig::parse("colour = red").unwrap_err().field, "colour");
        let mut cfg = RunConfig::default();
        cfg.set("n", "1000").unwrap();
        assert_eq!(cfg.validate().unwrap_err().field, "n");
        cfg = RunConfig::default();
        cfg.set("q", "1/2").unwrap();
        assert_eq!(cfg.validate().unwrap_err().field, "q");
        cfg = RunConfig::default();
        cfg.set("k", "4").unwrap();
        assert_eq!(cfg.validate().unwrap_err().field, "k");
    }
}
