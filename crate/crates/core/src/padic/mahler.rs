//! Binomial coefficients of p-adic arguments and series in the binomial
//! (Mahler) basis.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{inverse_mod, PadicContext, PadicError, PadicScalar, PadicVector, Valuation};
use crate::arith::{factorial_valuation, reduce_bigint};

/// Splits a nonzero integer into `p^v * u` and returns `(v, u mod m)`.
fn split_p_part(x: &BigInt, p: &BigInt, m: &BigUint) -> (u64, BigUint) {
    let mut v = 0;
    let mut y = x.clone();
    loop {
        let (q, r) = y.div_rem(p);
        if !r.is_zero() {
            break;
        }
        y = q;
        v += 1;
    }
    (v, reduce_bigint(&y, m))
}

/// `C(n, 0), ..., C(n, kmax)` for a p-adic `n`.
///
/// The residue of `n` is used as an integer representative; each factor of
/// the falling factorial and of `k!` is split into its `p`-power and unit
/// parts so the `p`-part cancels exactly. The value is only determined to
/// `K - v_p(k!)` digits as a function of the p-adic `n`, so an error is
/// returned once `v_p(k!) >= K`.
pub fn binomial_row(n: &PadicScalar, kmax: u64) -> Result<Vec<PadicScalar>, PadicError> {
    let ctx = n.context();
    let p = ctx.prime();
    let k_prec = ctx.precision();
    let lost = factorial_valuation(kmax, p);
    if lost >= k_prec as u64 {
        return Err(PadicError::BinomialPrecision {
            k: kmax,
            precision: k_prec,
            lost,
        });
    }
    let modulus = ctx.modulus();
    let pb = BigInt::from(p);
    let n_int = BigInt::from_biguint(Sign::Plus, n.residue().clone());
    let mut out = Vec::with_capacity(kmax as usize + 1);
    out.push(PadicScalar::one(ctx));
    let mut e_num: u64 = 0;
    let mut e_den: u64 = 0;
    let mut u_num = BigUint::one();
    let mut u_den = BigUint::one();
    let mut exhausted = false;
    for k in 1..=kmax {
        if exhausted {
            out.push(PadicScalar::zero(ctx));
            continue;
        }
        let factor = &n_int - BigInt::from(k - 1);
        if factor.is_zero() {
            // n is the integer k-1: every later binomial vanishes
            exhausted = true;
            out.push(PadicScalar::zero(ctx));
            continue;
        }
        let (v, u) = split_p_part(&factor, &pb, modulus);
        e_num += v;
        u_num = (u_num * u) % modulus;
        let (v, u) = split_p_part(&BigInt::from(k), &pb, modulus);
        e_den += v;
        u_den = (u_den * u) % modulus;
        let e = e_num - e_den;
        if e >= k_prec as u64 {
            out.push(PadicScalar::zero(ctx));
            continue;
        }
        let inv = inverse_mod(&u_den, modulus).expect("unit part is invertible");
        let val = (&u_num * inv % modulus) * ctx.pow_p(e as u32);
        out.push(PadicScalar::from_residue(ctx, val));
    }
    Ok(out)
}

/// `C(n, k)` reduced modulo `p^K`.
pub fn binomial_mod(n: &PadicScalar, k: u64) -> Result<PadicScalar, PadicError> {
    Ok(binomial_row(n, k)?.pop().unwrap())
}

/// `C(n, k)` for a non-negative integer `n`.
pub fn binomial_u64(ctx: &Arc<PadicContext>, n: u64, k: u64) -> Result<PadicScalar, PadicError> {
    binomial_mod(&PadicScalar::from_u64(ctx, n), k)
}

/// Iterated forward differences `Δ^k v (0)` for `k = 0..len`.
pub fn forward_differences(values: &[PadicVector]) -> Result<Vec<PadicVector>, PadicError> {
    let mut row: Vec<PadicVector> = values.to_vec();
    let mut out = Vec::with_capacity(values.len());
    while let Some(first) = row.first() {
        out.push(first.clone());
        let next = row
            .windows(2)
            .map(|w| w[1].try_sub(&w[0]))
            .collect::<Result<Vec<_>, _>>()?;
        row = next;
    }
    Ok(out)
}

/// A vector-valued function `z -> Σ_k c_k C(z - origin, k)` on `Z_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct MahlerSeries {
    ctx: Arc<PadicContext>,
    dim: usize,
    origin: u64,
    coeffs: Vec<PadicVector>,
    decay_onset: usize,
}

/// Serializable form: residues as decimal strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MahlerRecord {
    pub prime: u64,
    pub precision: u32,
    pub origin: u64,
    pub coefficients: Vec<Vec<String>>,
}

impl MahlerSeries {
    pub fn new(ctx: &Arc<PadicContext>, origin: u64, coeffs: Vec<PadicVector>) -> Result<Self, PadicError> {
        let dim = coeffs.first().map_or(0, |c| c.len());
        for c in &coeffs {
            if c.len() != dim {
                return Err(PadicError::DimensionMismatch(dim, c.len()));
            }
            if let Some(x) = c.coords().first() {
                if !x.context().same_ring(ctx) {
                    return Err(PadicError::ContextMismatch {
                        left: (ctx.prime(), ctx.precision()),
                        right: (x.context().prime(), x.context().precision()),
                    });
                }
            }
        }
        let vals: Vec<Valuation> = coeffs.iter().map(|c| c.valuation()).collect();
        let mut decay_onset = vals.len().saturating_sub(1);
        while decay_onset > 0 && vals[decay_onset - 1] <= vals[decay_onset] {
            decay_onset -= 1;
        }
        Ok(MahlerSeries {
            ctx: Arc::clone(ctx),
            dim,
            origin,
            coeffs,
            decay_onset,
        })
    }

    /// Series through `values[j]` at `z = origin + j`.
    pub fn interpolate(ctx: &Arc<PadicContext>, origin: u64, values: &[PadicVector]) -> Result<Self, PadicError> {
        Self::new(ctx, origin, forward_differences(values)?)
    }

    pub fn context(&self) -> &Arc<PadicContext> {
        &self.ctx
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> u64 {
        self.origin
    }

    pub fn coeffs(&self) -> &[PadicVector] {
        &self.coeffs
    }

    /// Number of retained terms minus one.
    pub fn terms(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// First index from which coefficient valuations never decrease.
    pub fn decay_onset(&self) -> usize {
        self.decay_onset
    }

    pub fn valuations(&self) -> Vec<Valuation> {
        self.coeffs.iter().map(|c| c.valuation()).collect()
    }

    /// `Σ_k c_k C(n - origin, k)` at precision `K`.
    pub fn evaluate(&self, n: &PadicScalar) -> Result<PadicVector, PadicError> {
        let shift = PadicScalar::from_u64(&self.ctx, self.origin);
        let z = n.try_sub(&shift)?;
        let row = binomial_row(&z, self.terms() as u64)?;
        let modulus = self.ctx.modulus();
        let mut acc = vec![BigUint::zero(); self.dim];
        for (c, b) in self.coeffs.iter().zip(&row) {
            if b.is_zero() {
                continue;
            }
            for (slot, x) in acc.iter_mut().zip(c.coords()) {
                *slot += x.residue() * b.residue();
            }
        }
        Ok(PadicVector::from_residues(
            &self.ctx,
            acc.into_iter().map(|x| x % modulus).collect(),
        ))
    }

    pub fn evaluate_u64(&self, n: u64) -> Result<PadicVector, PadicError> {
        self.evaluate(&PadicScalar::from_u64(&self.ctx, n))
    }

    pub fn to_record(&self) -> MahlerRecord {
        MahlerRecord {
            prime: self.ctx.prime(),
            precision: self.ctx.precision(),
            origin: self.origin,
            coefficients: self
                .coeffs
                .iter()
                .map(|c| c.residues().iter().map(|r| r.to_string()).collect())
                .collect(),
        }
    }

    pub fn from_record(rec: &MahlerRecord) -> Result<Self, PadicError> {
        let ctx = PadicContext::new(rec.prime, rec.precision)?;
        let coeffs = rec
            .coefficients
            .iter()
            .map(|c| {
                c.iter()
                    .map(|s| s.parse::<BigUint>().map_err(|_| PadicError::NotIntegral))
                    .collect::<Result<Vec<_>, _>>()
                    .map(|r| PadicVector::from_residues(&ctx, r))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(&ctx, rec.origin, coeffs)
    }
}

/// `Σ_k c_k C(n - origin, k)`.
pub fn mahler_evaluate(g: &MahlerSeries, n: &PadicScalar) -> Result<PadicVector, PadicError> {
    g.evaluate(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(p: u64, k: u32) -> Arc<PadicContext> {
        PadicContext::new(p, k).unwrap()
    }

    fn exact_binomial(n: u64, k: u64) -> BigUint {
        if k > n {
            return BigUint::zero();
        }
        let mut acc = BigUint::one();
        for j in 0..k {
            acc = acc * BigUint::from(n - j) / BigUint::from(j + 1);
        }
        acc
    }

    #[test]
    fn binomial_examples() {
        let c = ctx(5, 3);
        for n in [0u64, 1, 17] {
            assert_eq!(binomial_u64(&c, n, 0).unwrap(), PadicScalar::one(&c));
        }
        assert_eq!(binomial_u64(&c, 5, 2).unwrap().residue(), &BigUint::from(10u32));
        let c = ctx(3, 4);
        let b = binomial_u64(&c, 9, 3).unwrap();
        assert_eq!(b.residue(), &BigUint::from(3u32));
        assert_eq!(b.valuation(), Valuation::Finite(1));
    }

    #[test]
    fn binomial_of_minus_one_alternates() {
        let c = ctx(7, 10);
        let m1 = PadicScalar::from_i64(&c, -1);
        let row = binomial_row(&m1, 20).unwrap();
        // determined only modulo p^(K - v_p(k!))
        let coarse = ctx(7, 8);
        for (k, b) in row.iter().enumerate() {
            let expect = if k % 2 == 0 { 1 } else { -1 };
            assert_eq!(b.to_context(&coarse), PadicScalar::from_i64(&coarse, expect));
        }
    }

    #[test]
    fn binomial_precision_guard() {
        let c = ctx(3, 4);
        // v_3(9!) = 4
        assert!(matches!(
            binomial_u64(&c, 20, 9),
            Err(PadicError::BinomialPrecision { lost: 4, .. })
        ));
        assert!(binomial_u64(&c, 20, 8).is_ok());
    }

    #[test]
    fn mahler_examples() {
        let c = ctx(5, 10);
        let scalar = |x: u64| PadicVector::from_residues(&c, vec![BigUint::from(x)]);
        let constant = MahlerSeries::new(&c, 0, vec![scalar(42), scalar(0), scalar(0)]).unwrap();
        for n in [0u64, 3, 1000] {
            assert_eq!(constant.evaluate_u64(n).unwrap(), scalar(42));
        }
        let powers = MahlerSeries::new(&c, 0, (0..10).map(|k| scalar(5u64.pow(k))).collect()).unwrap();
        assert_eq!(powers.evaluate_u64(2).unwrap(), scalar(36));
        assert_eq!(powers.evaluate_u64(0).unwrap(), scalar(1));
    }

    #[test]
    fn origin_shifts_the_argument() {
        let c = ctx(3, 8);
        let values: Vec<_> = (0..6u64).map(|j| PadicVector::from_residues(&c, vec![BigUint::from(j * j)])).collect();
        let g = MahlerSeries::interpolate(&c, 10, &values).unwrap();
        for j in 0..6u64 {
            assert_eq!(g.evaluate_u64(10 + j).unwrap(), values[j as usize]);
        }
    }

    #[test]
    fn record_round_trip() {
        let c = ctx(5, 6);
        let values: Vec<_> = (0..4u64).map(|j| PadicVector::from_residues(&c, vec![BigUint::from(6u64.pow(j as u32)), BigUint::from(j)])).collect();
        let g = MahlerSeries::interpolate(&c, 3, &values).unwrap();
        let back = MahlerSeries::from_record(&g.to_record()).unwrap();
        assert_eq!(back, g);
    }

    proptest! {
        #[test]
        fn binomial_matches_exact_integers(n in 0u64..400, k in 0u64..12, p in prop::sample::select(vec![3u64, 5, 7])) {
            let c = ctx(p, 9);
            let got = binomial_u64(&c, n, k).unwrap();
            prop_assert_eq!(got.residue(), &(exact_binomial(n, k) % c.modulus()));
        }

        #[test]
        fn evaluation_matches_exact_difference_table(seq in prop::collection::vec(-1000i64..1000, 1..16), n in 0usize..16) {
            let c = ctx(5, 12);
            let n = n % seq.len();
            // exact integer differences, reduced only at the end
            let mut row: Vec<BigInt> = seq.iter().map(|&x| BigInt::from(x)).collect();
            let mut diffs = Vec::new();
            while !row.is_empty() {
                diffs.push(row[0].clone());
                row = row.windows(2).map(|w| &w[1] - &w[0]).collect();
            }
            let coeffs: Vec<_> = diffs.iter().map(|d| PadicVector::new(vec![PadicScalar::from_bigint(&c, d)]).unwrap()).collect();
            let g = MahlerSeries::new(&c, 0, coeffs).unwrap();
            let got = g.evaluate_u64(n as u64).unwrap();
            prop_assert_eq!(got.get(0), &PadicScalar::from_i64(&c, seq[n]));
        }

        #[test]
        fn valuation_of_products(a in 1u64..1_000_000, b in 1u64..1_000_000) {
            let c = ctx(3, 30);
            let x = PadicScalar::from_u64(&c, a);
            let y = PadicScalar::from_u64(&c, b);
            let prod = &x * &y;
            let expect = x.valuation().plus(y.valuation());
            prop_assert_eq!(prod.valuation(), expect);
        }
    }
}
