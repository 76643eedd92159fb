//! Approximate p-adic interpolation of the model orbit `n -> F^n(a')` by a
//! Mahler series `G`, with certification of the error bound
//! `v(G(n) - F^n(a')) >= min(n c, K)` and of `F(G(n)) = G(n+1)`.
//!
//! When the linear part of `F` is the identity mod `p`, the finite
//! differences of the orbit at `0` already decay like `p^{-kc}` and `G` is
//! fitted on `[0, K_terms]`. Otherwise the orbit first contracts onto the
//! image of the idempotent, and `G` is fitted on the shadow window
//! `[O, O + K_terms]` with `O = ceil(K / c)`, where every orbit point
//! already agrees with the interpolating analytic function modulo `p^K`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalization::{LocalModel, NormalizationError};
use crate::padic::{MahlerRecord, MahlerSeries, PadicContext, PadicError, PadicScalar, PadicVector, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpolationError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Model(#[from] NormalizationError),
    #[error("linear part is not idempotent mod p")]
    NotIdempotent,
    #[error("congruence exponent {0} is below 1")]
    ExponentTooSmall(u32),
    #[error("Mahler coefficient {k} has valuation {valuation}, below the required {required}")]
    DecayViolation { k: usize, valuation: Valuation, required: u32 },
    #[error("error bound fails at n = {n}: valuation {valuation} < {required}")]
    BoundViolation { n: u64, valuation: u32, required: u32 },
    #[error("compatibility fails at n = {n}: valuation {valuation} < {threshold}")]
    CompatibilityViolation { n: String, valuation: u32, threshold: u32 },
    #[error("record does not match the model (p, K) = ({0}, {1})")]
    RecordMismatch(u64, u32),
}

/// Slack allowed in the decay check at index `k`.
pub fn decay_slack(k: usize, p: u64, constant: u32) -> u32 {
    (k as u64).div_ceil(p - 1) as u32 + constant
}

/// Verifies the interpolation hypotheses and returns `c`.
pub fn check_hypotheses(model: &LocalModel) -> Result<u32, InterpolationError> {
    if !model.linear_mod_p().is_idempotent() {
        return Err(InterpolationError::NotIdempotent);
    }
    let e = model.idempotent();
    if &e.mul(e) != e {
        return Err(InterpolationError::NotIdempotent);
    }
    let c = model.c();
    if c < 1 {
        return Err(InterpolationError::ExponentTooSmall(c));
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxInterpolant {
    series: MahlerSeries,
    c: u32,
    terms: usize,
    decay: Vec<Valuation>,
}

/// Replayable form of an interpolant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpolantRecord {
    pub c: u32,
    pub terms: usize,
    pub series: MahlerRecord,
}

impl ApproxInterpolant {
    pub fn series(&self) -> &MahlerSeries {
        &self.series
    }

    pub fn context(&self) -> &Arc<PadicContext> {
        self.series.context()
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    /// First index of the fitting window.
    pub fn origin(&self) -> u64 {
        self.series.origin()
    }

    /// Valuation of each Mahler coefficient.
    pub fn decay(&self) -> &[Valuation] {
        &self.decay
    }

    pub fn evaluate(&self, n: &PadicScalar) -> Result<PadicVector, InterpolationError> {
        Ok(self.series.evaluate(n)?)
    }

    pub fn evaluate_u64(&self, n: u64) -> Result<PadicVector, InterpolationError> {
        Ok(self.series.evaluate_u64(n)?)
    }

    pub fn record(&self) -> InterpolantRecord {
        InterpolantRecord {
            c: self.c,
            terms: self.terms,
            series: self.series.to_record(),
        }
    }

    pub fn from_record(rec: &InterpolantRecord) -> Result<Self, InterpolationError> {
        let series = MahlerSeries::from_record(&rec.series)?;
        let decay = series.valuations();
        Ok(ApproxInterpolant {
            series,
            c: rec.c,
            terms: rec.terms,
            decay,
        })
    }
}

/// Fits `G` to the model orbit and checks the coefficient decay.
pub fn build_interpolant(model: &LocalModel, terms: usize, slack_constant: u32) -> Result<ApproxInterpolant, InterpolationError> {
    let c = check_hypotheses(model)?;
    let ctx = model.context().clone();
    let k = ctx.precision();
    let origin = if model.linear_mod_p().is_identity() {
        0
    } else {
        k.div_ceil(c) as u64
    };
    let orbit = model.orbit(origin as usize + terms)?;
    let series = MahlerSeries::interpolate(&ctx, origin, &orbit[origin as usize..])?;
    let decay = series.valuations();
    for (idx, v) in decay.iter().enumerate().skip(1) {
        let want = (idx as u32).saturating_mul(c);
        let required = want.saturating_sub(decay_slack(idx, ctx.prime(), slack_constant)).min(k);
        if v.capped(k) < required {
            return Err(InterpolationError::DecayViolation {
                k: idx,
                valuation: *v,
                required,
            });
        }
    }
    Ok(ApproxInterpolant { series, c, terms, decay })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub n: u64,
    /// `v(G(n) - F^n(a'))`, capped at `K`.
    pub achieved: u32,
    /// `min(n c, K)`.
    pub required: u32,
    pub margin: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub samples: Vec<ErrorSample>,
}

impl ErrorBoundReport {
    pub fn min_margin(&self) -> Option<i64> {
        self.samples.iter().map(|s| s.margin).min()
    }
}

/// Checks `v(G(n) - F^n(a')) >= min(n c, K)` at the sampled `n`, iterating
/// the model directly.
pub fn verify_error_bound(g: &ApproxInterpolant, model: &LocalModel, samples: &[u64]) -> Result<ErrorBoundReport, InterpolationError> {
    let k = model.context().precision();
    let top = samples.iter().copied().max().unwrap_or(0);
    let orbit = model.orbit(top as usize)?;
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::with_capacity(sorted.len());
    for n in sorted {
        let gn = g.evaluate_u64(n)?;
        let achieved = gn.try_sub(&orbit[n as usize])?.valuation().capped(k);
        let required = (n.saturating_mul(g.c as u64)).min(k as u64) as u32;
        if achieved < required {
            return Err(InterpolationError::BoundViolation {
                n,
                valuation: achieved,
                required,
            });
        }
        out.push(ErrorSample {
            n,
            achieved,
            required,
            margin: achieved as i64 - required as i64,
        });
    }
    Ok(ErrorBoundReport { samples: out })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilitySample {
    /// Residue of the sampled `n`.
    pub n: String,
    pub valuation: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub threshold: u32,
    pub samples: Vec<CompatibilitySample>,
}

impl CompatibilityReport {
    pub fn min_valuation(&self) -> Option<u32> {
        self.samples.iter().map(|s| s.valuation).min()
    }
}

/// Checks `v(F(G(n)) - G(n+1)) >= threshold` at p-adic samples.
pub fn verify_compatibility(
    g: &ApproxInterpolant,
    model: &LocalModel,
    samples: &[PadicScalar],
    threshold: u32,
) -> Result<CompatibilityReport, InterpolationError> {
    let ctx = model.context();
    let k = ctx.precision();
    let one = PadicScalar::one(ctx);
    let mut out = Vec::with_capacity(samples.len());
    for n in samples {
        let lhs = model.apply(&g.evaluate(n)?)?;
        let rhs = g.evaluate(&n.try_add(&one)?)?;
        let valuation = lhs.try_sub(&rhs)?.valuation().capped(k);
        if valuation < threshold {
            return Err(InterpolationError::CompatibilityViolation {
                n: n.residue().to_string(),
                valuation,
                threshold,
            });
        }
        out.push(CompatibilitySample {
            n: n.residue().to_string(),
            valuation,
        });
    }
    Ok(CompatibilityReport { threshold, samples: out })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constancy {
    pub constant: bool,
    /// The constant value when `constant`.
    pub beta: Option<Vec<String>>,
    /// `v(F(β) - β) >= threshold`, when constant.
    pub beta_fixed: Option<bool>,
    /// Set when constant: the orbit converges to a fixed point, so the
    /// avoidance condition must be re-examined.
    pub recheck_avoidance: bool,
}

/// Declares `G` constant when `v(c_k) >= threshold` for every `k >= 1`.
pub fn constancy_test(g: &ApproxInterpolant, model: &LocalModel, threshold: u32) -> Result<Constancy, InterpolationError> {
    let constant = g
        .series
        .coeffs()
        .iter()
        .skip(1)
        .all(|c| c.valuation() >= Valuation::Finite(threshold));
    if !constant {
        return Ok(Constancy {
            constant,
            beta: None,
            beta_fixed: None,
            recheck_avoidance: false,
        });
    }
    let beta = g.series.coeffs()[0].clone();
    let fixed = model.apply(&beta)?.try_sub(&beta)?.valuation() >= Valuation::Finite(threshold);
    Ok(Constancy {
        constant,
        beta: Some(beta.residues().iter().map(|r| r.to_string()).collect()),
        beta_fixed: Some(fixed),
        recheck_avoidance: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{forward_differences, TruncatedSeries};
    use num_bigint::BigUint;

    fn model(p: u64, k: u32, terms: &[(u32, u64)], a: u64) -> LocalModel {
        let ctx = PadicContext::new(p, k).unwrap();
        let s = TruncatedSeries::from_terms(&ctx, 1, k, terms.iter().map(|(e, c)| (vec![*e], BigUint::from(*c))));
        LocalModel::from_parts(vec![s], PadicVector::from_residues(&ctx, vec![BigUint::from(a)])).unwrap()
    }

    fn scalar(ctx: &Arc<PadicContext>, x: u64) -> PadicVector {
        PadicVector::from_residues(ctx, vec![BigUint::from(x)])
    }

    #[test]
    fn hypotheses_examples() {
        assert_eq!(check_hypotheses(&model(5, 20, &[(1, 1)], 5)).unwrap(), 20);
        assert_eq!(check_hypotheses(&model(5, 20, &[(1, 6)], 1)).unwrap(), 1);
        assert_eq!(check_hypotheses(&model(3, 20, &[(2, 3), (1, 3), (0, 3)], 3)).unwrap(), 1);
        assert!(matches!(check_hypotheses(&model(5, 20, &[(1, 2)], 1)), Err(InterpolationError::NotIdempotent)));
    }

    #[test]
    fn six_x_has_power_coefficients() {
        let m = model(5, 30, &[(1, 6)], 1);
        let g = build_interpolant(&m, 30, 2).unwrap();
        let ctx = m.context().clone();
        for k in 0..3u32 {
            assert_eq!(g.series().coeffs()[k as usize], scalar(&ctx, 5u64.pow(k)));
        }
        assert_eq!(g.origin(), 0);
    }

    #[test]
    fn identity_interpolant_is_constant() {
        let m = model(7, 12, &[(1, 1)], 14);
        let g = build_interpolant(&m, 12, 2).unwrap();
        let ctx = m.context().clone();
        assert_eq!(g.series().coeffs()[0], scalar(&ctx, 14));
        assert!(g.series().coeffs()[1..].iter().all(|c| c.valuation().is_infinite()));
        let cst = constancy_test(&g, &m, 12).unwrap();
        assert!(cst.constant);
        assert_eq!(cst.beta, Some(vec!["14".to_string()]));
        assert_eq!(cst.beta_fixed, Some(true));
    }

    #[test]
    fn raw_differences_of_contracting_orbits() {
        let m = model(3, 20, &[(2, 3)], 3);
        let orbit = m.orbit(4).unwrap();
        let d = forward_differences(&orbit).unwrap();
        assert_eq!(d[1], scalar(m.context(), 24));
        assert_eq!(d[1].valuation(), Valuation::Finite(1));
        let m = model(3, 20, &[(1, 3)], 3);
        let d = forward_differences(&m.orbit(3).unwrap()).unwrap();
        assert_eq!(d[1], scalar(m.context(), 6));
    }

    #[test]
    fn shadow_window_for_contracting_models() {
        // F(x) = 3x: the orbit 3^(n+1) tends to 0, so G vanishes at precision K
        let m = model(3, 20, &[(1, 3)], 3);
        let g = build_interpolant(&m, 20, 2).unwrap();
        assert_eq!(g.origin(), 20);
        let cst = constancy_test(&g, &m, 20).unwrap();
        assert!(cst.constant && cst.recheck_avoidance);
        let rep = verify_error_bound(&g, &m, &(0..40).collect::<Vec<_>>()).unwrap();
        assert!(rep.min_margin().unwrap() >= 0);
        let six = model(5, 20, &[(1, 6)], 1);
        let g6 = build_interpolant(&six, 20, 2).unwrap();
        assert!(!constancy_test(&g6, &six, 20).unwrap().constant);
    }

    #[test]
    fn error_bound_examples() {
        let m = model(5, 64, &[(1, 6)], 1);
        let g = build_interpolant(&m, 64, 2).unwrap();
        let rep = verify_error_bound(&g, &m, &[0, 40]).unwrap();
        assert_eq!(rep.samples[0].achieved, 64);
        assert!(rep.samples[1].achieved >= 40);
        let q = model(3, 64, &[(2, 3), (1, 3), (0, 3)], 3);
        let gq = build_interpolant(&q, 64, 2).unwrap();
        let rep = verify_error_bound(&gq, &q, &[20]).unwrap();
        assert!(rep.samples[0].achieved >= 20);
    }

    #[test]
    fn compatibility_closed_form() {
        let m = model(5, 40, &[(1, 6)], 1);
        let g = build_interpolant(&m, 40, 2).unwrap();
        let ctx = m.context().clone();
        let seven = PadicScalar::from_u64(&ctx, 7);
        let rep = verify_compatibility(&g, &m, &[seven, PadicScalar::from_i64(&ctx, -1)], 38).unwrap();
        assert!(rep.min_valuation().unwrap() >= 38);
        assert_eq!(g.evaluate_u64(8).unwrap(), scalar(&ctx, 6u64.pow(8)));
    }

    #[test]
    fn record_round_trip() {
        let m = model(5, 16, &[(1, 6)], 1);
        let g = build_interpolant(&m, 16, 2).unwrap();
        assert_eq!(ApproxInterpolant::from_record(&g.record()).unwrap(), g);
    }
}
