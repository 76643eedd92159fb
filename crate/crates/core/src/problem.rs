//! Problem files: a TOML description of `f`, `a`, `V`, the declared
//! periodic points and the run parameters. Every coefficient is an exact
//! rational, written as an integer, a string `"p/q"`, or a pair `[p, q]`.
//!
//! ```toml
//! dimension = 1
//! initial_point = [3]
//! map = [[{ exp = [2], coeff = 1 }, { exp = [0], coeff = -2 }]]
//! variety = [[{ exp = [1], coeff = 1 }, { exp = [0], coeff = -7 }]]
//!
//! [run]
//! prime_range = [3, 50]
//! n_max = 100000
//! ```

use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Deserialize;
use thiserror::Error;

use crate::pipeline::RunConfig;
use crate::poly::{PolyMap, Polynomial};
use crate::reduction::{ProblemInstance, ReductionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("invalid instance: {0}")]
    Instance(#[from] ReductionError),
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> ProblemError {
    ProblemError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Int(i64),
    Text(String),
    Pair([i64; 2]),
}

impl Coefficient {
    pub fn to_rational(&self, field: &str) -> Result<BigRational, ProblemError> {
        match self {
            Coefficient::Int(n) => Ok(BigRational::from_integer((*n).into())),
            Coefficient::Pair([n, d]) => {
                if *d == 0 {
                    return Err(field_err(field, "zero denominator"));
                }
                Ok(BigRational::new((*n).into(), (*d).into()))
            }
            Coefficient::Text(s) => {
                let s = s.trim();
                let (n, d) = s.split_once('/').unwrap_or((s, "1"));
                let parse = |x: &str| {
                    x.trim()
                        .parse::<BigInt>()
                        .map_err(|_| field_err(field, format!("`{s}` is not an exact rational")))
                };
                let (n, d) = (parse(n)?, parse(d)?);
                if d.is_zero() {
                    return Err(field_err(field, "zero denominator"));
                }
                Ok(BigRational::new(n, d))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exp: Vec<u32>,
    pub coeff: Coefficient,
}

/// Optional run parameters; absent keys take the defaults of [`RunConfig`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub prime_range: Option<[u64; 2]>,
    pub precision: Option<u32>,
    pub n_max: Option<u64>,
    pub mahler_terms: Option<usize>,
    pub screen_primes: Option<usize>,
    pub exact_budget: Option<u64>,
    pub density_m: Option<u32>,
    pub period_bound: Option<u32>,
    pub enumeration_guard: Option<u64>,
    pub k_total_cap: Option<u64>,
    pub degree_guard: Option<u64>,
    pub series_budget: Option<u64>,
    pub initial_level: Option<u32>,
    pub compatibility_samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub initial_point: Vec<Coefficient>,
    pub map: Vec<Vec<Term>>,
    #[serde(default)]
    pub variety: Vec<Vec<Term>>,
    #[serde(default)]
    pub periodic_points: Vec<Vec<Coefficient>>,
    #[serde(default)]
    pub run: RunSection,
}

fn polynomial(terms: &[Term], n: usize, field: &str) -> Result<Polynomial, ProblemError> {
    let mut p = Polynomial::zero(n);
    for (i, t) in terms.iter().enumerate() {
        let f = format!("{field}[{i}]");
        if t.exp.len() != n {
            return Err(field_err(
                format!("{f}.exp"),
                format!("expected {n} exponents, found {}", t.exp.len()),
            ));
        }
        p.add_term(t.exp.clone(), t.coeff.to_rational(&format!("{f}.coeff"))?);
    }
    Ok(p)
}

fn point(coords: &[Coefficient], n: usize, field: &str) -> Result<Vec<BigRational>, ProblemError> {
    if coords.len() != n {
        return Err(field_err(field, format!("expected {n} coordinates, found {}", coords.len())));
    }
    coords
        .iter()
        .enumerate()
        .map(|(i, c)| c.to_rational(&format!("{field}[{i}]")))
        .collect()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, ProblemError> {
        toml::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn instance(&self) -> Result<ProblemInstance, ProblemError> {
        let n = self.dimension;
        if n == 0 {
            return Err(field_err("dimension", "must be positive"));
        }
        if self.map.len() != n {
            return Err(field_err("map", format!("expected {n} polynomials, found {}", self.map.len())));
        }
        let map = self
            .map
            .iter()
            .enumerate()
            .map(|(i, t)| polynomial(t, n, &format!("map[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let variety = self
            .variety
            .iter()
            .enumerate()
            .map(|(i, t)| polynomial(t, n, &format!("variety[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let a = point(&self.initial_point, n, "initial_point")?;
        let gammas = self
            .periodic_points
            .iter()
            .enumerate()
            .map(|(i, g)| point(g, n, &format!("periodic_points[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProblemInstance::new(PolyMap::new(map), a, variety, gammas)?)
    }

    /// Run parameters with defaults filled in.
    pub fn run_config(&self) -> Result<RunConfig, ProblemError> {
        let r = &self.run;
        let d = RunConfig::default();
        let precision = r.precision.unwrap_or(d.precision);
        let cfg = RunConfig {
            prime_range: r.prime_range.map_or(d.prime_range, |[lo, hi]| (lo, hi)),
            precision,
            n_max: r.n_max.unwrap_or(d.n_max),
            mahler_terms: r.mahler_terms.unwrap_or(precision as usize),
            screen_primes: r.screen_primes.unwrap_or(d.screen_primes),
            exact_budget: r.exact_budget.unwrap_or(d.exact_budget),
            density_m: r.density_m.unwrap_or(d.density_m),
            period_bound: r.period_bound.unwrap_or(d.period_bound),
            enumeration_guard: r.enumeration_guard.unwrap_or(d.enumeration_guard),
            k_total_cap: r.k_total_cap.unwrap_or(d.k_total_cap),
            degree_guard: r.degree_guard.unwrap_or(d.degree_guard),
            series_budget: r.series_budget.unwrap_or(d.series_budget),
            initial_level: r.initial_level.unwrap_or(d.initial_level),
            compatibility_samples: r.compatibility_samples.unwrap_or(d.compatibility_samples),
            seed: r.seed.unwrap_or(d.seed),
            ..d
        };
        cfg.validate().map_err(|(f, m)| field_err(format!("run.{f}"), m))?;
        Ok(cfg)
    }
}
