//! Multivariate polynomials with exact rational coefficients, and polynomial
//! self-maps of affine space.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::arith::{inv_mod_u64, reduce_bigint_u64};
use crate::padic::{PadicContext, PadicError, PadicScalar, TruncatedSeries};

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn variable(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, BigRational::one());
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Vec<u32>, BigRational)>>(nvars: usize, terms: I) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent arity");
            p.add_term(e, c);
        }
        p
    }

    /// Convenience constructor from integer coefficients.
    pub fn from_int_terms(nvars: usize, terms: &[(&[u32], i64)]) -> Self {
        Self::from_terms(
            nvars,
            terms
                .iter()
                .map(|(e, c)| (e.to_vec(), BigRational::from_integer(BigInt::from(*c)))),
        )
    }

    pub fn add_term(&mut self, e: Vec<u32>, c: BigRational) {
        let slot = self.terms.entry(e).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &BigRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn coeff(&self, e: &[u32]) -> BigRational {
        self.terms.get(e).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    /// Least common multiple of coefficient denominators.
    pub fn denominator_lcm(&self) -> BigInt {
        self.terms
            .values()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                let slot = out.terms.entry(e).or_insert_with(BigRational::zero);
                *slot += ca * cb;
            }
        }
        out.terms.retain(|_, v| !v.is_zero());
        out
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::constant(self.nvars, BigRational::one());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn evaluate(&self, point: &[BigRational]) -> BigRational {
        assert_eq!(point.len(), self.nvars);
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (x, &k) in point.iter().zip(e) {
                if k > 0 {
                    t *= num_traits::pow(x.clone(), k as usize);
                }
            }
            acc += t;
        }
        acc
    }

    /// Evaluation of an integral polynomial at an integral point, without
    /// any gcd work.
    pub fn evaluate_integral(&self, point: &[BigInt]) -> Option<BigInt> {
        let mut acc = BigInt::zero();
        for (e, c) in &self.terms {
            if !c.is_integer() {
                return None;
            }
            let mut t = c.numer().clone();
            for (x, &k) in point.iter().zip(e) {
                if k > 0 {
                    t *= num_traits::pow(x.clone(), k as usize);
                }
            }
            acc += t;
        }
        Some(acc)
    }

    /// Substitutes `args[i]` for `x_i`.
    pub fn compose(&self, args: &[Polynomial]) -> Polynomial {
        assert_eq!(args.len(), self.nvars);
        let out_vars = args.first().map_or(0, |a| a.nvars);
        let mut powers: Vec<Vec<Polynomial>> = args
            .iter()
            .map(|a| vec![Polynomial::constant(out_vars, BigRational::one()), a.clone()])
            .collect();
        let mut acc = Polynomial::zero(out_vars);
        for (e, c) in &self.terms {
            let mut t = Polynomial::constant(out_vars, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                while powers[i].len() <= k as usize {
                    let next = powers[i].last().unwrap().mul(&args[i]);
                    powers[i].push(next);
                }
                t = t.mul(&powers[i][k as usize]);
            }
            acc = acc.add(&t);
        }
        acc
    }

    pub fn derivative(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[var] -= 1;
            out.add_term(d, c * BigRational::from_integer(BigInt::from(e[var])));
        }
        out
    }

    /// Coefficients reduced modulo `m`, or `None` if a denominator is not
    /// invertible modulo `m`.
    pub fn coeffs_mod(&self, m: u64) -> Option<Vec<(Vec<u32>, u64)>> {
        let mut out = Vec::with_capacity(self.terms.len());
        for (e, c) in &self.terms {
            let v = rational_mod(c, m)?;
            if v != 0 {
                out.push((e.clone(), v));
            }
        }
        Some(out)
    }

    /// Image in `Z/p^K[x]` as a truncated series.
    pub fn to_series(&self, ctx: &Arc<PadicContext>, max_degree: u32) -> Result<TruncatedSeries, PadicError> {
        let mut s = TruncatedSeries::zero(ctx, self.nvars, max_degree);
        for (e, c) in &self.terms {
            let v = PadicScalar::from_rational(ctx, c)?;
            s.add_term(crate::padic::Monomial::new(e), v.residue().clone());
        }
        Ok(s)
    }
}

/// `q mod m` for a rational with denominator prime to `m`.
pub fn rational_mod(q: &BigRational, m: u64) -> Option<u64> {
    let den = reduce_bigint_u64(q.denom(), m);
    let inv = if m == 1 { 0 } else { inv_mod_u64(den, m)? };
    let num = reduce_bigint_u64(q.numer(), m);
    Some(((num as u128 * inv as u128) % m as u128) as u64)
}

/// Bit length of the larger of numerator and denominator.
pub fn rational_height_bits(q: &BigRational) -> u64 {
    q.numer().bits().max(q.denom().bits())
}

pub fn rational_to_biguint_mod(q: &BigRational, m: &BigUint) -> Option<BigUint> {
    let den = crate::arith::reduce_bigint(q.denom(), m);
    let inv = den.modinv(m)?;
    Some(crate::arith::reduce_bigint(q.numer(), m) * inv % m)
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let names = |i: usize| -> String {
            if self.nvars <= 3 {
                ["x", "y", "z"][i].to_string()
            } else {
                format!("x{}", i + 1)
            }
        };
        for (idx, (e, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            if idx > 0 {
                f.write_str(if neg { " - " } else { " + " })?;
            } else if neg {
                f.write_str("-")?;
            }
            let a = c.abs();
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { names(i) } else { format!("{}^{}", names(i), k) })
                .collect();
            if mono.is_empty() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{a}*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}

/// A polynomial self-map of affine `N`-space.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolyMap {
    polys: Vec<Polynomial>,
}

impl PolyMap {
    pub fn new(polys: Vec<Polynomial>) -> Self {
        let n = polys.len();
        assert!(polys.iter().all(|p| p.nvars == n), "self-map arity");
        PolyMap { polys }
    }

    pub fn identity(n: usize) -> Self {
        PolyMap::new((0..n).map(|i| Polynomial::variable(n, i)).collect())
    }

    pub fn dim(&self) -> usize {
        self.polys.len()
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn degree(&self) -> u32 {
        self.polys.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn is_integral(&self) -> bool {
        self.polys.iter().all(|p| p.is_integral())
    }

    pub fn evaluate(&self, point: &[BigRational]) -> Vec<BigRational> {
        self.polys.iter().map(|p| p.evaluate(point)).collect()
    }

    pub fn evaluate_integral(&self, point: &[BigInt]) -> Option<Vec<BigInt>> {
        self.polys.iter().map(|p| p.evaluate_integral(point)).collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PolyMap) -> PolyMap {
        PolyMap::new(self.polys.iter().map(|p| p.compose(&inner.polys)).collect())
    }

    /// `f^k` by repeated composition.
    pub fn iterate(&self, k: u32) -> PolyMap {
        let mut acc = PolyMap::identity(self.dim());
        for _ in 0..k {
            acc = self.compose(&acc);
        }
        acc
    }

    /// Jacobian matrix entries `∂f_i/∂x_j`.
    pub fn jacobian(&self) -> Vec<Vec<Polynomial>> {
        self.polys
            .iter()
            .map(|p| (0..self.dim()).map(|j| p.derivative(j)).collect())
            .collect()
    }

    pub fn denominator_lcm(&self) -> BigInt {
        self.polys
            .iter()
            .fold(BigInt::one(), |acc, p| acc.lcm(&p.denominator_lcm()))
    }

    pub fn to_series(&self, ctx: &Arc<PadicContext>, max_degree: u32) -> Result<Vec<TruncatedSeries>, PadicError> {
        self.polys.iter().map(|p| p.to_series(ctx, max_degree)).collect()
    }

    /// Number of multiplications a naive evaluation costs, used for budgets.
    pub fn multiplication_count(&self) -> u64 {
        self.polys
            .iter()
            .flat_map(|p| p.terms.keys())
            .map(|e| e.iter().map(|&k| k as u64).sum::<u64>().max(1))
            .sum()
    }
}

impl fmt::Display for PolyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, p) in self.polys.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_and_iteration() {
        // f(x) = x^2 - 2; f(f(x)) = x^4 - 4x^2 + 2
        let f = PolyMap::new(vec![Polynomial::from_int_terms(1, &[(&[2], 1), (&[0], -2)])]);
        let f2 = f.iterate(2);
        assert_eq!(f2.polys()[0], Polynomial::from_int_terms(1, &[(&[4], 1), (&[2], -4), (&[0], 2)]));
        assert_eq!(f2.evaluate(&[int(3)]), vec![int(47)]);
        assert_eq!(f.evaluate_integral(&[BigInt::from(7)]).unwrap(), vec![BigInt::from(47)]);
    }

    #[test]
    fn reduction_with_denominators() {
        // (3x + 1)/2 over F_5 is 4x + 3
        let p = Polynomial::from_terms(1, vec![(vec![1], rat(3, 2)), (vec![0], rat(1, 2))]);
        let mut r = p.coeffs_mod(5).unwrap();
        r.sort();
        assert_eq!(r, vec![(vec![0], 3), (vec![1], 4)]);
        assert!(p.coeffs_mod(2).is_none());
        assert_eq!(p.denominator_lcm(), BigInt::from(2));
    }

    #[test]
    fn jacobian_and_display() {
        let f = PolyMap::new(vec![
            Polynomial::from_int_terms(2, &[(&[2, 0], 1), (&[0, 1], 3)]),
            Polynomial::from_int_terms(2, &[(&[1, 1], -1)]),
        ]);
        let j = f.jacobian();
        assert_eq!(j[0][0], Polynomial::from_int_terms(2, &[(&[1, 0], 2)]));
        assert_eq!(j[1][1], Polynomial::from_int_terms(2, &[(&[1, 0], -1)]));
        assert_eq!(f.to_string(), "(x^2 + 3*y, -x*y)");
    }
}
