use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{PadicContext, PadicError};
use crate::arith::reduce_bigint;

/// Exact p-adic valuation, or `Infinite` for a value that is zero at the
/// working precision. `Infinite` only means "indistinguishable from 0 mod p^K".
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Valuation {
    Finite(u32),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<u32> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinite)
    }

    /// Valuation with the infinite marker replaced by `cap`.
    pub fn capped(self, cap: u32) -> u32 {
        match self {
            Valuation::Finite(v) => v.min(cap),
            Valuation::Infinite => cap,
        }
    }

    pub fn plus(self, other: Valuation) -> Valuation {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinite,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => f.write_str("inf"),
        }
    }
}

/// Valuation of a residue in `[0, p^K)`, computed by repeated division.
pub(crate) fn residue_valuation(residue: &BigUint, prime: u64) -> Valuation {
    if residue.is_zero() {
        return Valuation::Infinite;
    }
    if let Some(small) = residue.iter_u64_digits().next().filter(|_| residue.bits() <= 64) {
        let mut v = 0;
        let mut m = small;
        while m % prime == 0 {
            m /= prime;
            v += 1;
        }
        return Valuation::Finite(v);
    }
    let p = BigUint::from(prime);
    let mut v = 0;
    let mut m = residue.clone();
    loop {
        let (q, r) = m.div_rem(&p);
        if !r.is_zero() {
            break;
        }
        m = q;
        v += 1;
    }
    Valuation::Finite(v)
}

/// Inverse of a unit modulo `m`.
pub(crate) fn inverse_mod(u: &BigUint, m: &BigUint) -> Option<BigUint> {
    if m.is_one() {
        return Some(BigUint::zero());
    }
    u.modinv(m)
}

/// An element of `Z_p` known modulo `p^K`, with its valuation cached.
#[derive(Clone)]
pub struct PadicScalar {
    ctx: Arc<PadicContext>,
    residue: BigUint,
    valuation: Valuation,
}

impl PadicScalar {
    pub fn from_residue(ctx: &Arc<PadicContext>, residue: BigUint) -> Self {
        let residue = if &residue >= ctx.modulus() {
            residue % ctx.modulus()
        } else {
            residue
        };
        let valuation = residue_valuation(&residue, ctx.prime());
        PadicScalar {
            ctx: Arc::clone(ctx),
            residue,
            valuation,
        }
    }

    pub fn zero(ctx: &Arc<PadicContext>) -> Self {
        PadicScalar {
            ctx: Arc::clone(ctx),
            residue: BigUint::zero(),
            valuation: Valuation::Infinite,
        }
    }

    pub fn one(ctx: &Arc<PadicContext>) -> Self {
        Self::from_residue(ctx, BigUint::one())
    }

    pub fn from_u64(ctx: &Arc<PadicContext>, n: u64) -> Self {
        Self::from_residue(ctx, BigUint::from(n))
    }

    pub fn from_i64(ctx: &Arc<PadicContext>, n: i64) -> Self {
        Self::from_bigint(ctx, &BigInt::from(n))
    }

    pub fn from_bigint(ctx: &Arc<PadicContext>, n: &BigInt) -> Self {
        Self::from_residue(ctx, reduce_bigint(n, ctx.modulus()))
    }

    /// Image of a `p`-integral rational in `Z/p^K`.
    pub fn from_rational(ctx: &Arc<PadicContext>, q: &BigRational) -> Result<Self, PadicError> {
        let den = reduce_bigint(q.denom(), ctx.modulus());
        let inv = inverse_mod(&den, ctx.modulus()).ok_or(PadicError::NotIntegral)?;
        let num = reduce_bigint(q.numer(), ctx.modulus());
        Ok(Self::from_residue(ctx, num * inv))
    }

    pub fn context(&self) -> &Arc<PadicContext> {
        &self.ctx
    }

    pub fn residue(&self) -> &BigUint {
        &self.residue
    }

    pub fn valuation(&self) -> Valuation {
        self.valuation
    }

    pub fn is_zero(&self) -> bool {
        self.valuation.is_infinite()
    }

    /// `|x|_p = p^{-v(x)}`; zero at precision has norm 0.
    pub fn norm(&self) -> f64 {
        match self.valuation {
            Valuation::Finite(v) => (self.ctx.prime() as f64).powi(-(v as i32)),
            Valuation::Infinite => 0.0,
        }
    }

    fn check(&self, other: &Self) -> Result<(), PadicError> {
        if self.ctx.same_ring(&other.ctx) {
            Ok(())
        } else {
            Err(PadicError::ContextMismatch {
                left: (self.ctx.prime(), self.ctx.precision()),
                right: (other.ctx.prime(), other.ctx.precision()),
            })
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, PadicError> {
        self.check(other)?;
        Ok(Self::from_residue(&self.ctx, &self.residue + &other.residue))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, PadicError> {
        self.check(other)?;
        let m = self.ctx.modulus();
        Ok(Self::from_residue(&self.ctx, &self.residue + m - &other.residue))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, PadicError> {
        self.check(other)?;
        Ok(Self::from_residue(&self.ctx, &self.residue * &other.residue))
    }

    pub fn pow(&self, e: u64) -> Self {
        Self::from_residue(
            &self.ctx,
            self.residue.modpow(&BigUint::from(e), self.ctx.modulus()),
        )
    }

    /// Multiplicative inverse of a unit.
    pub fn inverse(&self) -> Result<Self, PadicError> {
        if self.valuation != Valuation::Finite(0) {
            return Err(PadicError::NotAUnit);
        }
        let inv = inverse_mod(&self.residue, self.ctx.modulus()).ok_or(PadicError::NotAUnit)?;
        Ok(Self::from_residue(&self.ctx, inv))
    }

    /// Multiply by `p^e`.
    pub fn shift_up(&self, e: u32) -> Self {
        Self::from_residue(&self.ctx, &self.residue * self.ctx.pow_p(e))
    }

    /// Exact division `self / divisor`, allowed only when
    /// `v(divisor) <= v(self)`. The quotient is only determined modulo
    /// `p^(K - v(divisor))`; its residue is that representative and the
    /// number of lost digits is returned alongside.
    pub fn div_exact(&self, divisor: &Self) -> Result<(Self, u32), PadicError> {
        self.check(divisor)?;
        let vb = match divisor.valuation {
            Valuation::Finite(v) => v,
            Valuation::Infinite => return Err(PadicError::DivisionByZero),
        };
        if self.valuation < Valuation::Finite(vb) {
            return Err(PadicError::InexactDivision {
                dividend: self.valuation,
                divisor: vb,
            });
        }
        let k = self.ctx.precision();
        let shift = self.ctx.pow_p(vb);
        let reduced_mod = self.ctx.pow_p(k - vb);
        let num = &self.residue / &shift;
        let den = (&divisor.residue / &shift) % &reduced_mod;
        let inv = inverse_mod(&den, &reduced_mod).ok_or(PadicError::NotAUnit)?;
        let q = (num * inv) % &reduced_mod;
        Ok((Self::from_residue(&self.ctx, q), vb))
    }

    /// Re-express in another context of the same prime (truncating or
    /// zero-extending the residue).
    pub fn to_context(&self, ctx: &Arc<PadicContext>) -> Self {
        Self::from_residue(ctx, self.residue.clone())
    }

    /// Signed representative in `(-p^K/2, p^K/2]`.
    pub fn centered(&self) -> BigInt {
        let m = self.ctx.modulus();
        let r = BigInt::from(self.residue.clone());
        if &self.residue * 2u32 > *m {
            r - BigInt::from(m.clone())
        } else {
            r
        }
    }
}

impl PartialEq for PadicScalar {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.same_ring(&other.ctx) && self.residue == other.residue
    }
}

impl Eq for PadicScalar {}

impl PartialOrd for PadicScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PadicScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        self.residue.cmp(&other.residue)
    }
}

impl fmt::Debug for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {}^{}, v={})", self.residue, self.ctx.prime(), self.ctx.precision(), self.valuation)
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.residue)
    }
}

// Operator sugar. These panic on a context mismatch; use the `try_*`
// methods where operands can come from different runs.
impl<'a> Add<&'a PadicScalar> for &'a PadicScalar {
    type Output = PadicScalar;
    fn add(self, rhs: &'a PadicScalar) -> PadicScalar {
        self.try_add(rhs).expect("p-adic context mismatch")
    }
}

impl<'a> Sub<&'a PadicScalar> for &'a PadicScalar {
    type Output = PadicScalar;
    fn sub(self, rhs: &'a PadicScalar) -> PadicScalar {
        self.try_sub(rhs).expect("p-adic context mismatch")
    }
}

impl<'a> Mul<&'a PadicScalar> for &'a PadicScalar {
    type Output = PadicScalar;
    fn mul(self, rhs: &'a PadicScalar) -> PadicScalar {
        self.try_mul(rhs).expect("p-adic context mismatch")
    }
}

impl Neg for &PadicScalar {
    type Output = PadicScalar;
    fn neg(self) -> PadicScalar {
        PadicScalar::zero(&self.ctx).try_sub(self).unwrap()
    }
}

/// Digits discarded by exact divisions during a computation.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct PrecisionLedger {
    pub entries: Vec<PrecisionLoss>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PrecisionLoss {
    pub step: String,
    pub digits: u32,
}

impl PrecisionLedger {
    pub fn record(&mut self, step: impl Into<String>, digits: u32) {
        if digits > 0 {
            self.entries.push(PrecisionLoss {
                step: step.into(),
                digits,
            });
        }
    }

    pub fn total(&self) -> u32 {
        self.entries.iter().map(|e| e.digits).sum()
    }
}
