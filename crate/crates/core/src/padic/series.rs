//! Multivariate power series over `Z/p^K`, truncated in total degree.
//!
//! These are the finite-precision stand-ins for elements of the Tate algebra
//! `Z_p<x_1, ..., x_N>`: everything of total degree above `max_degree` is
//! dropped, and callers choose `max_degree` so that the dropped terms vanish
//! modulo `p^K` (for instance after a `p`-scaling, where a degree-`d`
//! coefficient is divisible by `p^(d-1)`).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::scalar::residue_valuation;
use super::{PadicContext, PadicError, PadicScalar, PadicVector, Valuation};

const BITS_PER_VAR: u32 = 16;
pub const MAX_VARS: usize = 8;

/// Exponent vector packed into 16-bit lanes; variable 0 is the most
/// significant lane so the derived order is lexicographic.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(u128);

impl Monomial {
    pub fn new(exps: &[u32]) -> Self {
        assert!(exps.len() <= MAX_VARS, "at most {MAX_VARS} variables");
        let mut packed = 0u128;
        for &e in exps {
            assert!(e < (1 << BITS_PER_VAR), "exponent too large");
            packed = (packed << BITS_PER_VAR) | e as u128;
        }
        // left-align so that monomials of different arity never collide in practice
        packed <<= BITS_PER_VAR * (MAX_VARS - exps.len()) as u32;
        Monomial(packed)
    }

    pub fn exps(self, nvars: usize) -> Vec<u32> {
        (0..nvars)
            .map(|i| {
                let shift = BITS_PER_VAR * (MAX_VARS - 1 - i) as u32;
                ((self.0 >> shift) & 0xffff) as u32
            })
            .collect()
    }

    pub fn degree(self) -> u32 {
        let mut d = 0;
        let mut x = self.0;
        while x != 0 {
            d += (x & 0xffff) as u32;
            x >>= BITS_PER_VAR;
        }
        d
    }

    /// Product of monomials; valid while every exponent stays below 2^16.
    pub fn mul(self, other: Monomial) -> Monomial {
        Monomial(self.0 + other.0)
    }

    pub fn unit(nvars: usize, var: usize) -> Monomial {
        let mut e = vec![0; nvars];
        e[var] = 1;
        Monomial::new(&e)
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.exps(MAX_VARS);
        let last = e.iter().rposition(|&x| x != 0).map_or(1, |i| i + 1);
        write!(f, "{:?}", &e[..last])
    }
}

#[derive(Clone)]
pub struct TruncatedSeries {
    ctx: Arc<PadicContext>,
    nvars: usize,
    max_degree: u32,
    terms: BTreeMap<Monomial, BigUint>,
}

impl TruncatedSeries {
    pub fn zero(ctx: &Arc<PadicContext>, nvars: usize, max_degree: u32) -> Self {
        assert!(nvars <= MAX_VARS);
        TruncatedSeries {
            ctx: Arc::clone(ctx),
            nvars,
            max_degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ctx: &Arc<PadicContext>, nvars: usize, max_degree: u32, value: &BigUint) -> Self {
        let mut s = Self::zero(ctx, nvars, max_degree);
        s.add_term(Monomial::default(), value.clone());
        s
    }

    pub fn variable(ctx: &Arc<PadicContext>, nvars: usize, max_degree: u32, var: usize) -> Self {
        let mut s = Self::zero(ctx, nvars, max_degree);
        if max_degree >= 1 {
            s.add_term(Monomial::unit(nvars, var), BigUint::one());
        }
        s
    }

    pub fn from_terms<I>(ctx: &Arc<PadicContext>, nvars: usize, max_degree: u32, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, BigUint)>,
    {
        let mut s = Self::zero(ctx, nvars, max_degree);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent arity");
            s.add_term(Monomial::new(&e), c);
        }
        s
    }

    /// Adds `c * x^m` (dropped if beyond the truncation degree).
    pub fn add_term(&mut self, m: Monomial, c: BigUint) {
        if m.degree() > self.max_degree {
            return;
        }
        let modulus = self.ctx.modulus();
        let entry = self.terms.entry(m).or_insert_with(BigUint::zero);
        *entry += c;
        if *entry >= *modulus {
            *entry %= modulus;
        }
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn context(&self) -> &Arc<PadicContext> {
        &self.ctx
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, &BigUint)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn coeff(&self, exps: &[u32]) -> PadicScalar {
        self.coeff_of(Monomial::new(exps))
    }

    pub fn coeff_of(&self, m: Monomial) -> PadicScalar {
        match self.terms.get(&m) {
            Some(c) => PadicScalar::from_residue(&self.ctx, c.clone()),
            None => PadicScalar::zero(&self.ctx),
        }
    }

    pub fn constant_term(&self) -> PadicScalar {
        self.coeff_of(Monomial::default())
    }

    /// Largest total degree with a nonzero coefficient.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    /// Gauss valuation: minimum coefficient valuation.
    pub fn gauss_valuation(&self) -> Valuation {
        self.terms
            .values()
            .map(|c| residue_valuation(c, self.ctx.prime()))
            .min()
            .unwrap_or(Valuation::Infinite)
    }

    pub fn gauss_norm(&self) -> f64 {
        match self.gauss_valuation() {
            Valuation::Finite(v) => (self.ctx.prime() as f64).powi(-(v as i32)),
            Valuation::Infinite => 0.0,
        }
    }

    fn check(&self, other: &Self) -> Result<(), PadicError> {
        if !self.ctx.same_ring(&other.ctx) {
            return Err(PadicError::ContextMismatch {
                left: (self.ctx.prime(), self.ctx.precision()),
                right: (other.ctx.prime(), other.ctx.precision()),
            });
        }
        if self.nvars != other.nvars {
            return Err(PadicError::DimensionMismatch(self.nvars, other.nvars));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, PadicError> {
        self.check(other)?;
        let mut out = self.clone();
        out.max_degree = self.max_degree.min(other.max_degree);
        out.terms.retain(|m, _| m.degree() <= out.max_degree);
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let modulus = self.ctx.modulus();
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = modulus - &*c;
        }
        out
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, PadicError> {
        self.try_add(&other.neg())
    }

    pub fn scale(&self, s: &BigUint) -> Self {
        let modulus = self.ctx.modulus();
        let mut out = Self::zero(&self.ctx, self.nvars, self.max_degree);
        for (m, c) in &self.terms {
            let v = (c * s) % modulus;
            if !v.is_zero() {
                out.terms.insert(*m, v);
            }
        }
        out
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, PadicError> {
        self.check(other)?;
        Ok(mul_kernel(self, other))
    }

    /// Same coefficients with a lower truncation degree.
    pub fn truncate(&self, max_degree: u32) -> Self {
        let mut out = self.clone();
        out.max_degree = max_degree.min(self.max_degree);
        out.terms.retain(|m, _| m.degree() <= out.max_degree);
        out
    }

    /// Coefficients reduced (or zero-extended) into another context of the
    /// same prime.
    pub fn to_context(&self, ctx: &Arc<PadicContext>) -> Self {
        let mut out = Self::zero(ctx, self.nvars, self.max_degree);
        for (m, c) in &self.terms {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn with_max_degree(mut self, max_degree: u32) -> Self {
        self.max_degree = max_degree;
        self.terms.retain(|m, _| m.degree() <= max_degree);
        self
    }

    /// Maps every coefficient `c_m` to `op(m, c_m)`.
    pub fn map_terms(&self, ctx: &Arc<PadicContext>, op: impl Fn(Monomial, &BigUint) -> BigUint) -> Self {
        let mut out = Self::zero(ctx, self.nvars, self.max_degree);
        for (m, c) in &self.terms {
            out.add_term(*m, op(*m, c));
        }
        out
    }

    pub fn evaluate(&self, point: &PadicVector) -> Result<PadicScalar, PadicError> {
        if point.len() != self.nvars {
            return Err(PadicError::DimensionMismatch(self.nvars, point.len()));
        }
        if let Some(c) = point.coords().first() {
            if !c.context().same_ring(&self.ctx) {
                return Err(PadicError::ContextMismatch {
                    left: (self.ctx.prime(), self.ctx.precision()),
                    right: (c.context().prime(), c.context().precision()),
                });
            }
        }
        let residues = point.residues();
        Ok(PadicScalar::from_residue(&self.ctx, self.evaluate_residues(&residues)))
    }

    /// Evaluation on raw residues in `[0, p^K)`.
    pub fn evaluate_residues(&self, point: &[BigUint]) -> BigUint {
        let modulus = self.ctx.modulus();
        let mut powers: Vec<Vec<BigUint>> = point.iter().map(|x| vec![BigUint::one(), x.clone()]).collect();
        let mut acc = BigUint::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.exps(self.nvars).iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let pw = &mut powers[i];
                while pw.len() <= e as usize {
                    let next = (pw.last().unwrap() * &pw[1]) % modulus;
                    pw.push(next);
                }
                t = (t * &pw[e as usize]) % modulus;
            }
            acc += t;
        }
        acc % modulus
    }

    /// Substitutes `args[i]` for `x_i`. The result lives in the arguments'
    /// ring and truncation degree.
    pub fn compose(&self, args: &[TruncatedSeries]) -> Result<TruncatedSeries, PadicError> {
        let mut out = compose_map(std::slice::from_ref(self), args)?;
        Ok(out.pop().unwrap())
    }
}

impl PartialEq for TruncatedSeries {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.same_ring(&other.ctx) && self.nvars == other.nvars && self.terms == other.terms
    }
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "{c}*x^{m:?}")?;
        }
        if first {
            f.write_str("0")?;
        }
        write!(f, " (deg<={}, {:?})", self.max_degree, self.ctx)
    }
}

/// Substitutes `args` into every series of `polys`, sharing the monomial
/// cache across all outputs.
pub fn compose_map(polys: &[TruncatedSeries], args: &[TruncatedSeries]) -> Result<Vec<TruncatedSeries>, PadicError> {
    let first = args.first().ok_or(PadicError::DimensionMismatch(1, 0))?;
    for a in args {
        first.check(a)?;
    }
    let ctx = first.ctx.clone();
    let max_degree = args.iter().map(|a| a.max_degree).min().unwrap();
    let out_vars = first.nvars;
    let mut cache: HashMap<Monomial, TruncatedSeries> = HashMap::new();
    let mut outputs = Vec::with_capacity(polys.len());
    for poly in polys {
        if poly.nvars != args.len() {
            return Err(PadicError::DimensionMismatch(poly.nvars, args.len()));
        }
        let mut acc = TruncatedSeries::zero(&ctx, out_vars, max_degree);
        for (m, c) in &poly.terms {
            let c = c % ctx.modulus();
            if c.is_zero() {
                continue;
            }
            let mono = monomial_value(m.exps(poly.nvars), args, &mut cache, &ctx, max_degree);
            for (mm, v) in &mono.terms {
                acc.add_term(*mm, (v * &c) % ctx.modulus());
            }
        }
        outputs.push(acc);
    }
    Ok(outputs)
}

fn monomial_value(
    exps: Vec<u32>,
    args: &[TruncatedSeries],
    cache: &mut HashMap<Monomial, TruncatedSeries>,
    ctx: &Arc<PadicContext>,
    max_degree: u32,
) -> TruncatedSeries {
    let key = Monomial::new(&exps);
    if let Some(v) = cache.get(&key) {
        return v.clone();
    }
    let value = match exps.iter().rposition(|&e| e > 0) {
        None => TruncatedSeries::constant(ctx, args[0].nvars, max_degree, &BigUint::one()),
        Some(i) => {
            // peel one factor of x_i off the highest-index variable
            let mut lower = exps.clone();
            lower[i] -= 1;
            let rest = monomial_value(lower, args, cache, ctx, max_degree);
            if rest.terms.len() == 1 && rest.terms.contains_key(&Monomial::default()) && rest.terms[&Monomial::default()].is_one() {
                args[i].truncate(max_degree)
            } else {
                mul_kernel(&rest, &args[i])
            }
        }
    };
    cache.insert(key, value.clone());
    value
}

fn limb_count(modulus: &BigUint) -> Option<usize> {
    let limbs = (modulus.bits() as usize).div_ceil(64);
    (limbs <= 8).then_some(limbs)
}

/// `acc += a * b` on little-endian limbs; `acc` has room for the carries.
#[inline]
fn mul_acc(acc: &mut [u64], a: &[u64], b: &[u64]) {
    let l = a.len();
    for i in 0..l {
        let ai = a[i] as u128;
        if ai == 0 {
            continue;
        }
        let mut carry: u128 = 0;
        for j in 0..l {
            let t = ai * b[j] as u128 + acc[i + j] as u128 + carry;
            acc[i + j] = t as u64;
            carry = t >> 64;
        }
        let mut k = i + l;
        while carry != 0 {
            let t = acc[k] as u128 + carry;
            acc[k] = t as u64;
            carry = t >> 64;
            k += 1;
        }
    }
}

struct DenseTerms<T> {
    idx: usize,
    deg: u32,
    coeff: T,
}

/// Truncated product. Exponents are mapped to a mixed-radix index with
/// radix `D + 1`, so index addition is monomial multiplication whenever the
/// product's degree is at most `D`.
fn mul_kernel(a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
    let ctx = a.ctx.clone();
    let nvars = a.nvars;
    let max_degree = a.max_degree.min(b.max_degree);
    let mut out = TruncatedSeries::zero(&ctx, nvars, max_degree);
    if a.terms.is_empty() || b.terms.is_empty() {
        return out;
    }
    let radix = max_degree as usize + 1;
    let dense_len = radix.checked_pow(nvars as u32).filter(|&n| n <= 1 << 22);
    let index = |m: Monomial| -> usize {
        m.exps(nvars).iter().fold(0usize, |acc, &e| acc * radix + e as usize)
    };
    let unindex = |mut idx: usize| -> Monomial {
        let mut e = vec![0u32; nvars];
        for slot in e.iter_mut().rev() {
            *slot = (idx % radix) as u32;
            idx /= radix;
        }
        Monomial::new(&e)
    };

    let Some(dense_len) = dense_len else {
        // sparse fallback for many variables
        let mut acc: HashMap<Monomial, BigUint> = HashMap::new();
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                if ma.degree() + mb.degree() <= max_degree {
                    *acc.entry(ma.mul(*mb)).or_insert_with(BigUint::zero) += ca * cb;
                }
            }
        }
        for (m, c) in acc {
            out.add_term(m, c);
        }
        return out;
    };

    if let Some(m) = ctx.word_modulus() {
        let conv = |s: &TruncatedSeries| -> Vec<DenseTerms<u64>> {
            let mut v: Vec<_> = s
                .terms
                .iter()
                .filter(|(mm, _)| mm.degree() <= max_degree)
                .map(|(mm, c)| DenseTerms {
                    idx: index(*mm),
                    deg: mm.degree(),
                    coeff: c.iter_u64_digits().next().unwrap_or(0),
                })
                .collect();
            v.sort_by_key(|t| t.deg);
            v
        };
        let (ta, tb) = (conv(a), conv(b));
        let mut acc = vec![0u128; dense_len];
        let m128 = m as u128;
        const LIMIT: u128 = 1 << 126;
        for x in &ta {
            let budget = max_degree - x.deg;
            for y in tb.iter().take_while(|y| y.deg <= budget) {
                let slot = &mut acc[x.idx + y.idx];
                *slot += x.coeff as u128 * y.coeff as u128;
                if *slot >= LIMIT {
                    *slot %= m128;
                }
            }
        }
        for (idx, v) in acc.into_iter().enumerate() {
            let r = (v % m128) as u64;
            if r != 0 {
                out.terms.insert(unindex(idx), BigUint::from(r));
            }
        }
    } else if let Some(limbs) = limb_count(ctx.modulus()).filter(|l| dense_len * (2 * l + 1) <= 1 << 23) {
        let conv = |s: &TruncatedSeries| -> (Vec<(usize, u32)>, Vec<u64>) {
            let mut v: Vec<_> = s.terms.iter().filter(|(mm, _)| mm.degree() <= max_degree).collect();
            v.sort_by_key(|(mm, _)| mm.degree());
            let mut data = vec![0u64; v.len() * limbs];
            for (i, (_, c)) in v.iter().enumerate() {
                for (j, d) in c.iter_u64_digits().enumerate() {
                    data[i * limbs + j] = d;
                }
            }
            (v.iter().map(|(mm, _)| (index(**mm), mm.degree())).collect(), data)
        };
        let (ia, da) = conv(a);
        let (ib, db) = conv(b);
        let width = 2 * limbs + 1;
        let mut acc = vec![0u64; dense_len * width];
        for (x, &(xi, xd)) in ia.iter().enumerate() {
            let budget = max_degree - xd;
            let xa = &da[x * limbs..(x + 1) * limbs];
            for (y, &(yi, yd)) in ib.iter().enumerate() {
                if yd > budget {
                    break;
                }
                let slot = (xi + yi) * width;
                mul_acc(&mut acc[slot..slot + width], xa, &db[y * limbs..(y + 1) * limbs]);
            }
        }
        let modulus = ctx.modulus();
        for (idx, chunk) in acc.chunks(width).enumerate() {
            if chunk.iter().all(|&w| w == 0) {
                continue;
            }
            let digits: Vec<u32> = chunk.iter().flat_map(|&w| [w as u32, (w >> 32) as u32]).collect();
            let r = BigUint::new(digits) % modulus;
            if !r.is_zero() {
                out.terms.insert(unindex(idx), r);
            }
        }
    } else {
        fn conv<'s>(s: &'s TruncatedSeries, max_degree: u32, index: &dyn Fn(Monomial) -> usize) -> Vec<DenseTerms<&'s BigUint>> {
            let mut v: Vec<_> = s
                .terms
                .iter()
                .filter(|(mm, _)| mm.degree() <= max_degree)
                .map(|(mm, c)| DenseTerms {
                    idx: index(*mm),
                    deg: mm.degree(),
                    coeff: c,
                })
                .collect();
            v.sort_by_key(|t| t.deg);
            v
        }
        let (ta, tb) = (conv(a, max_degree, &index), conv(b, max_degree, &index));
        let mut acc: Vec<BigUint> = vec![BigUint::zero(); dense_len];
        for x in &ta {
            let budget = max_degree - x.deg;
            for y in tb.iter().take_while(|y| y.deg <= budget) {
                acc[x.idx + y.idx] += x.coeff * y.coeff;
            }
        }
        let modulus = ctx.modulus();
        for (idx, v) in acc.into_iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let r = v % modulus;
            if !r.is_zero() {
                out.terms.insert(unindex(idx), r);
            }
        }
    }
    out
}
