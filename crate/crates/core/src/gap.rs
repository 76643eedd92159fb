//! Return sets `S_V = {n : f^n(a) ∈ V}`, zero localization of
//! `L = Q ∘ f^r ∘ T ∘ G` on residue disks of the model index, gap verdicts
//! for consecutive returns, and counting-function density reports.
//!
//! An original index `m >= m0` is written `m = m0 + n k_total + r` with
//! `0 <= r < k_total`; the model index `n` is what `G` interpolates. For
//! each shift `r` the integers are covered by disks `n ≡ i (mod p^k)`, and
//! on each disk `L_r(i + p^k t)` is expanded as a series in `t`.

use std::collections::VecDeque;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{is_prime, reduce_bigint};
use crate::interpolation::ApproxInterpolant;
use crate::normalization::LocalModel;
use crate::padic::{compose_map, Monomial, PadicContext, PadicError, PadicScalar, TruncatedSeries, Valuation};
use crate::poly::rational_height_bits;
use crate::reduction::{integral_point, reduce_mod, ProblemInstance};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GapError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("function is identically zero at working precision")]
    IdenticallyZero,
    #[error("truncation insufficient: minimum valuation {v_min} is not below the tail bound {tail_bound}")]
    TruncationInsufficient { v_min: u32, tail_bound: u32 },
    #[error("disk expansion has a non-integral coefficient of t^{degree}")]
    NonIntegralExpansion { degree: u32 },
    #[error("disk level {level} exceeds the precision {precision}")]
    DepthExceeded { level: u32, precision: u32 },
    #[error("possible periodic subvariety: every Q_j vanishes at precision on shift {shift}, disk {center}")]
    PossiblePeriodicSubvariety { shift: u64, center: String },
    #[error("variety has no defining polynomials")]
    EmptyVariety,
}

/// Serde helpers writing big numbers as decimal strings.
mod as_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<T: Display, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.collect_str(v),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Option::<String>::deserialize(d)?
                .map(|s| s.parse().map_err(de::Error::custom))
                .transpose()
        }
    }
}

// ---------------------------------------------------------------------------
// return sets

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnStatus {
    CertifiedExact,
    ModularScreened,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnEntry {
    pub n: u64,
    pub status: ReturnStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnSet {
    pub n_max: u64,
    pub entries: Vec<ReturnEntry>,
    pub screening_primes: Vec<u64>,
    /// Last index whose exact orbit point stayed within the height budget.
    pub exact_horizon: Option<u64>,
    /// Screening candidates that exact evaluation rejected.
    pub rejected: Vec<u64>,
}

impl ReturnSet {
    pub fn indices(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.n).collect()
    }

    pub fn screened_only(&self) -> Vec<u64> {
        self.entries
            .iter()
            .filter(|e| e.status == ReturnStatus::ModularScreened)
            .map(|e| e.n)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Screening primes are taken just below this bound.
pub const SCREEN_CEILING: u64 = 1 << 31;

/// The `count` largest primes below `2^31` not dividing any denominator.
pub fn screening_primes(inst: &ProblemInstance, count: usize) -> Vec<u64> {
    let bad = inst.denominator_primes();
    let mut out = Vec::with_capacity(count);
    let mut q = SCREEN_CEILING - 1;
    while out.len() < count && q > 2 {
        if is_prime(q) && !bad.contains(&q) {
            out.push(q);
        }
        q -= 2;
    }
    out
}

/// Bitset of `n <= n_max` with every `Q_j(f^n(a)) ≡ 0 (mod prime)`.
fn screen(inst: &ProblemInstance, prime: u64, n_max: u64) -> Vec<u64> {
    let red = reduce_mod(inst, prime, prime).expect("screening primes avoid denominators");
    let mut bits = vec![0u64; (n_max as usize + 1).div_ceil(64)];
    let mut x = red.point.clone();
    let mut tmp = vec![0; x.len()];
    let mut scratch = Vec::new();
    for n in 0..=n_max {
        if red.variety.iter().all(|q| q.evaluate(&x) == 0) {
            bits[(n / 64) as usize] |= 1 << (n % 64);
        }
        if n < n_max {
            red.map.apply_into(&x, &mut tmp, &mut scratch);
            std::mem::swap(&mut x, &mut tmp);
        }
    }
    bits
}

enum ExactPoint {
    Integral(Vec<BigInt>),
    Rational(Vec<BigRational>),
}

impl ExactPoint {
    fn height_bits(&self) -> u64 {
        match self {
            ExactPoint::Integral(x) => x.iter().map(|v| v.bits()).max().unwrap_or(0),
            ExactPoint::Rational(x) => x.iter().map(rational_height_bits).max().unwrap_or(0),
        }
    }

    fn on_variety(&self, inst: &ProblemInstance) -> bool {
        match self {
            ExactPoint::Integral(x) => inst.variety.iter().all(|q| match q.evaluate_integral(x) {
                Some(v) => v.is_zero(),
                None => {
                    let r: Vec<BigRational> = x.iter().map(|v| BigRational::from_integer(v.clone())).collect();
                    q.evaluate(&r).is_zero()
                }
            }),
            ExactPoint::Rational(x) => inst.variety.iter().all(|q| q.evaluate(x).is_zero()),
        }
    }

    fn step(&self, inst: &ProblemInstance) -> ExactPoint {
        match self {
            ExactPoint::Integral(x) => match inst.map.evaluate_integral(x) {
                Some(y) => ExactPoint::Integral(y),
                None => {
                    let r: Vec<BigRational> = x.iter().map(|v| BigRational::from_integer(v.clone())).collect();
                    ExactPoint::Rational(inst.map.evaluate(&r))
                }
            },
            ExactPoint::Rational(x) => ExactPoint::Rational(inst.map.evaluate(x)),
        }
    }
}

/// Multi-modular screening of `n <= n_max`, then exact certification of
/// the candidates whose orbit height stays within `exact_budget_bits`.
pub fn compute_returns(inst: &ProblemInstance, n_max: u64, screen_count: usize, exact_budget_bits: u64) -> ReturnSet {
    let primes = screening_primes(inst, screen_count);
    let sets: Vec<Vec<u64>> = primes.par_iter().map(|&p| screen(inst, p, n_max)).collect();
    let words = (n_max as usize + 1).div_ceil(64);
    let mut cand = vec![!0u64; words];
    for s in &sets {
        for (c, w) in cand.iter_mut().zip(s) {
            *c &= w;
        }
    }
    let candidates: Vec<u64> = (0..=n_max)
        .filter(|&n| cand[(n / 64) as usize] >> (n % 64) & 1 == 1)
        .collect();

    let mut entries = Vec::with_capacity(candidates.len());
    let mut rejected = Vec::new();
    let mut exact_horizon = None;
    if let Some(&last) = candidates.last() {
        let mut point = match integral_point(&inst.initial_point) {
            Some(x) if inst.map.is_integral() => ExactPoint::Integral(x),
            _ => ExactPoint::Rational(inst.initial_point.clone()),
        };
        let mut next = candidates.iter().peekable();
        for n in 0..=last {
            if point.height_bits() > exact_budget_bits {
                break;
            }
            exact_horizon = Some(n);
            if next.peek() == Some(&&n) {
                next.next();
                if point.on_variety(inst) {
                    entries.push(ReturnEntry {
                        n,
                        status: ReturnStatus::CertifiedExact,
                    });
                } else {
                    rejected.push(n);
                }
            }
            if n < last {
                point = point.step(inst);
            }
        }
        entries.extend(next.map(|&n| ReturnEntry {
            n,
            status: ReturnStatus::ModularScreened,
        }));
    }
    ReturnSet {
        n_max,
        entries,
        screening_primes: primes,
        exact_horizon,
        rejected,
    }
}

// ---------------------------------------------------------------------------
// Newton polygons

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewtonCount {
    /// Zeros in the closed unit disk, with multiplicity.
    pub count: usize,
    pub v_min: u32,
    /// Lower convex hull of `(index, valuation)`.
    pub vertices: Vec<(usize, u32)>,
}

/// Newton polygon of coefficients with valuations `vals`, where
/// coefficient `i` is known modulo `p^precision[i]` (the last entry
/// repeats). Coefficients at or beyond their precision are unknown and
/// must all exceed the minimum; `tail_bound` bounds every coefficient
/// not listed.
pub fn newton_polygon(vals: &[Valuation], precision: &[u32], tail_bound: Option<u32>) -> Result<NewtonCount, GapError> {
    let prec_at = |i: usize| precision.get(i).or(precision.last()).copied().unwrap_or(0);
    let mut known = Vec::new();
    let mut unknown_floor = u32::MAX;
    for (i, v) in vals.iter().enumerate() {
        match v.finite().filter(|&v| v < prec_at(i)) {
            Some(v) => known.push((i, v)),
            None => unknown_floor = unknown_floor.min(prec_at(i)),
        }
    }
    let v_min = known.iter().map(|x| x.1).min().ok_or(GapError::IdenticallyZero)?;
    let floor = tail_bound.map_or(unknown_floor, |b| b.min(unknown_floor));
    if v_min >= floor {
        return Err(GapError::TruncationInsufficient {
            v_min,
            tail_bound: floor,
        });
    }
    let count = known.iter().rev().find(|x| x.1 == v_min).map(|x| x.0).unwrap_or(0);
    let mut hull: Vec<(usize, u32)> = Vec::new();
    for &pt in &known {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 as i64 - o.0 as i64) * (pt.1 as i64 - o.1 as i64)
                - (a.1 as i64 - o.1 as i64) * (pt.0 as i64 - o.0 as i64);
            if cross > 0 {
                break;
            }
            hull.pop();
        }
        hull.push(pt);
    }
    Ok(NewtonCount {
        count,
        v_min,
        vertices: hull,
    })
}

/// Zero count in the closed unit disk of a univariate series known to the
/// full precision of its ring.
pub fn newton_zero_count(l: &TruncatedSeries, tail_bound: Option<u32>) -> Result<NewtonCount, GapError> {
    newton_expansion(&DiskExpansion::exact(l.clone()), tail_bound)
}

/// Zero count of a disk expansion, honoring its precision profile.
pub fn newton_expansion(e: &DiskExpansion, tail_bound: Option<u32>) -> Result<NewtonCount, GapError> {
    assert_eq!(e.series.nvars(), 1, "univariate series");
    let top = e.series.degree().unwrap_or(0).max(e.precision.len().saturating_sub(1) as u32);
    let vals: Vec<Valuation> = (0..=top).map(|m| e.series.coeff(&[m]).valuation()).collect();
    newton_polygon(&vals, &e.precision, tail_bound)
}

// ---------------------------------------------------------------------------
// disk restriction

/// A univariate series in the disk variable `t` whose coefficient of `t^m`
/// is known modulo `p^precision[m]` (nonincreasing; the last entry covers
/// higher degrees).
#[derive(Clone, Debug, PartialEq)]
pub struct DiskExpansion {
    pub series: TruncatedSeries,
    pub precision: Vec<u32>,
}

impl DiskExpansion {
    pub fn exact(series: TruncatedSeries) -> Self {
        let k = series.context().precision();
        DiskExpansion {
            series,
            precision: vec![k],
        }
    }

    pub fn min_precision(&self) -> u32 {
        self.precision.iter().copied().min().unwrap_or(0)
    }
}

/// `Π_{i<j} (a - i + p^k t)` modulo the working modulus, with `v_p(j!)`
/// and the inverse of the unit part of `j!`.
#[derive(Clone, Debug)]
pub struct BinomialRow {
    pub numerators: Vec<BigUint>,
    pub p_part: u32,
    pub unit_inverse: BigUint,
}

/// Rows for `C(a + p^k t, j) = numerators(t) / j!`, `j = 0..=terms`, over a
/// working ring `Z/p^(K + v_p(terms!))` (returned alongside).
pub fn shifted_binomials(
    ctx: &Arc<PadicContext>,
    a: &BigInt,
    k: u32,
    terms: usize,
) -> Result<(Arc<PadicContext>, Vec<BinomialRow>), GapError> {
    let p = ctx.prime();
    let extra = crate::arith::factorial_valuation(terms as u64, p) as u32;
    let work = ctx.with_precision(ctx.precision() + extra)?;
    let wm = work.modulus();
    let pk = BigUint::from(p).pow(k) % wm;
    let mut prod = vec![BigUint::one() % wm];
    let mut unit = BigUint::one();
    let mut vj = 0u32;
    let mut out = Vec::with_capacity(terms + 1);
    for j in 0..=terms {
        if j > 0 {
            let c0 = reduce_bigint(&(a - BigInt::from(j - 1)), wm);
            let mut next = vec![BigUint::zero(); prod.len() + 1];
            for (i, c) in prod.iter().enumerate() {
                next[i] += c * &c0;
                next[i + 1] += c * &pk;
            }
            prod = next.into_iter().map(|c| c % wm).collect();
            let mut u = j as u64;
            while u % p == 0 {
                u /= p;
                vj += 1;
            }
            unit = unit * u % wm;
        }
        out.push(BinomialRow {
            numerators: prod.clone(),
            p_part: vj,
            unit_inverse: unit.modinv(wm).expect("unit part of j!"),
        });
    }
    Ok((work, out))
}

/// Degree in `t` kept by disk expansions.
pub fn disk_degree(precision: u32, terms: usize) -> u32 {
    (precision + 8).max(terms as u32)
}

fn biguint_valuation(x: &BigUint, p: u64, cap: u32) -> u32 {
    if x.is_zero() {
        return cap;
    }
    let pb = BigUint::from(p);
    let mut v = 0;
    let mut y = x.clone();
    while v < cap && (&y % &pb).is_zero() {
        y /= &pb;
        v += 1;
    }
    v
}

/// `G(center + p^k t)` as univariate series, one per coordinate, with the
/// shared precision profile. Each Mahler coefficient of `G` is known
/// modulo `p^K`; dividing by `j!` costs up to `v_p(j!)` digits in the
/// coefficient of `t^m`, which the profile records.
pub fn restrict_interpolant(
    g: &ApproxInterpolant,
    center: &BigInt,
    k: u32,
    max_degree: u32,
) -> Result<(Vec<TruncatedSeries>, Vec<u32>), GapError> {
    let ctx = g.context();
    let p = ctx.prime();
    let kk = ctx.precision();
    let coeffs = g.series().coeffs();
    let a = center - BigInt::from(g.origin());
    let (work, rows) = shifted_binomials(ctx, &a, k, coeffs.len().saturating_sub(1))?;
    let wprec = work.precision();
    let wm = work.modulus();
    let extra = wprec - kk;
    let top = max_degree as usize;

    // numerator precision of p^extra * g_m, from the O(p^K) error of each d_j
    let mut num_prec = vec![wprec; top + 1];
    let mut scaled: Vec<Vec<BigUint>> = Vec::with_capacity(rows.len());
    for row in &rows {
        let shift = BigUint::from(p).pow(extra - row.p_part) * &row.unit_inverse % wm;
        scaled.push(row.numerators.iter().map(|c| c * &shift % wm).collect());
        for (m, c) in row.numerators.iter().enumerate().take(top + 1) {
            let v = biguint_valuation(c, p, wprec);
            num_prec[m] = num_prec[m].min(kk + extra - row.p_part + v);
        }
    }
    let mut profile = Vec::with_capacity(top + 1);
    let mut running = kk;
    for &np in &num_prec {
        running = running.min(np.saturating_sub(extra));
        profile.push(running);
    }

    let mut out = Vec::with_capacity(g.series().dim());
    for coord in 0..g.series().dim() {
        let mut nums = vec![BigUint::zero(); top + 1];
        for (cj, row) in coeffs.iter().zip(&scaled) {
            let d = cj.get(coord).residue();
            if d.is_zero() {
                continue;
            }
            for (m, c) in row.iter().enumerate().take(top + 1) {
                nums[m] += d * c;
            }
        }
        let mut s = TruncatedSeries::zero(ctx, 1, max_degree);
        let pe = BigUint::from(p).pow(extra);
        for (m, n) in nums.into_iter().enumerate() {
            let prec = profile[m];
            if prec == 0 {
                continue;
            }
            let keep = BigUint::from(p).pow(prec + extra);
            let r = n % wm % &keep;
            if !(&r % &pe).is_zero() {
                return Err(GapError::NonIntegralExpansion { degree: m as u32 });
            }
            s.add_term(Monomial::new(&[m as u32]), r / &pe);
        }
        out.push(s);
    }
    Ok((out, profile))
}

/// `L(t) = Q(G(center + p^k t))`, with `Q` a series over the ring of `G`.
pub fn restrict_to_disk(g: &ApproxInterpolant, q: &TruncatedSeries, center: &BigInt, k: u32) -> Result<DiskExpansion, GapError> {
    let deg = disk_degree(g.context().precision(), g.series().coeffs().len());
    let (gt, precision) = restrict_interpolant(g, center, k, deg)?;
    Ok(DiskExpansion {
        series: q.compose(&gt)?,
        precision,
    })
}

/// Anything that can be restricted to the disk `center + p^k Z_p`.
pub trait DiskFunction: Sync {
    fn context(&self) -> &Arc<PadicContext>;
    fn restrict(&self, center: &BigInt, k: u32) -> Result<DiskExpansion, GapError>;
    /// Lower bound on the valuation of coefficients lost to truncation.
    fn tail_bound(&self, l: &DiskExpansion) -> Option<u32>;
}

/// An explicit univariate polynomial; restriction is exact.
#[derive(Clone, Debug)]
pub struct PolynomialDisk(pub TruncatedSeries);

impl DiskFunction for PolynomialDisk {
    fn context(&self) -> &Arc<PadicContext> {
        self.0.context()
    }

    fn restrict(&self, center: &BigInt, k: u32) -> Result<DiskExpansion, GapError> {
        let ctx = self.0.context();
        let deg = self.0.degree().unwrap_or(0).max(1);
        let mut arg = TruncatedSeries::zero(ctx, 1, deg);
        arg.add_term(Monomial::new(&[0]), reduce_bigint(center, ctx.modulus()));
        arg.add_term(Monomial::new(&[1]), ctx.pow_p(k));
        Ok(DiskExpansion::exact(self.0.clone().with_max_degree(deg).compose(&[arg])?))
    }

    fn tail_bound(&self, _l: &DiskExpansion) -> Option<u32> {
        None
    }
}

/// Shared data for restricting `Q_j ∘ f^r ∘ T ∘ G` to disks: the original
/// map and variety over `Z/p^(K+1)`, and the translation `η`.
pub struct OrbitRestriction<'a> {
    g: &'a ApproxInterpolant,
    lifted: Arc<PadicContext>,
    f: Vec<TruncatedSeries>,
    qs: Vec<TruncatedSeries>,
    eta: Vec<BigUint>,
    degree: u32,
}

/// Chart image `η + p G(center + p^k t)` and its precision profile.
pub struct ChartSeries {
    pub coords: Vec<TruncatedSeries>,
    pub precision: Vec<u32>,
}

impl<'a> OrbitRestriction<'a> {
    pub fn new(inst: &ProblemInstance, model: &LocalModel, g: &'a ApproxInterpolant) -> Result<Self, GapError> {
        let ctx = g.context();
        let lifted = ctx.with_precision(ctx.precision() + 1)?;
        let degree = disk_degree(ctx.precision(), g.series().coeffs().len());
        let f = inst.map.to_series(&lifted, degree)?;
        let qs = inst
            .variety
            .iter()
            .map(|q| q.to_series(&lifted, degree))
            .collect::<Result<Vec<_>, _>>()?;
        if qs.is_empty() {
            return Err(GapError::EmptyVariety);
        }
        Ok(OrbitRestriction {
            g,
            lifted,
            f,
            qs,
            eta: model.eta().to_vec(),
            degree,
        })
    }

    pub fn variety_len(&self) -> usize {
        self.qs.len()
    }

    /// `η + p G(center + p^k t)` over `Z/p^(K+1)`.
    pub fn start(&self, center: &BigInt, k: u32) -> Result<ChartSeries, GapError> {
        let (gt, profile) = restrict_interpolant(self.g, center, k, self.degree)?;
        let p = BigUint::from(self.lifted.prime());
        let coords = gt
            .iter()
            .zip(&self.eta)
            .map(|(s, e)| {
                let mut y = s.to_context(&self.lifted).scale(&p);
                y.add_term(Monomial::default(), e.clone());
                y
            })
            .collect();
        Ok(ChartSeries {
            coords,
            precision: profile.iter().map(|v| v + 1).collect(),
        })
    }

    /// Applies `f`; integral coefficients keep the precision profile.
    pub fn step(&self, y: &ChartSeries) -> Result<ChartSeries, GapError> {
        Ok(ChartSeries {
            coords: compose_map(&self.f, &y.coords)?,
            precision: y.precision.clone(),
        })
    }

    /// `Q_j(y)` for every `j`, at precision `K`.
    pub fn values(&self, y: &ChartSeries) -> Result<Vec<DiskExpansion>, GapError> {
        let ctx = self.g.context();
        let kk = ctx.precision();
        let precision: Vec<u32> = y.precision.iter().map(|&v| v.min(kk)).collect();
        Ok(compose_map(&self.qs, &y.coords)?
            .iter()
            .map(|s| DiskExpansion {
                series: s.to_context(ctx),
                precision: precision.clone(),
            })
            .collect())
    }

    /// Minimum valuation over the top quarter of the kept degrees, used as
    /// the estimate of the dropped tail.
    pub fn tail_estimate(&self, l: &DiskExpansion) -> u32 {
        let prec = l.min_precision();
        let from = self.degree - self.degree / 4;
        l.series
            .terms()
            .filter(|(m, _)| m.degree() >= from)
            .map(|(m, _)| l.series.coeff_of(m).valuation().capped(prec))
            .min()
            .unwrap_or(prec)
            .min(prec)
    }
}

/// `L(t) = Q_j(f^shift(η + p G(center + p^k t)))`.
pub struct OrbitDisk<'r, 'a> {
    pub base: &'r OrbitRestriction<'a>,
    pub q_index: usize,
    pub shift: u64,
}

impl DiskFunction for OrbitDisk<'_, '_> {
    fn context(&self) -> &Arc<PadicContext> {
        self.base.g.context()
    }

    fn restrict(&self, center: &BigInt, k: u32) -> Result<DiskExpansion, GapError> {
        let mut y = self.base.start(center, k)?;
        for _ in 0..self.shift {
            y = self.base.step(&y)?;
        }
        Ok(self.base.values(&y)?.swap_remove(self.q_index))
    }

    fn tail_bound(&self, l: &DiskExpansion) -> Option<u32> {
        Some(self.base.tail_estimate(l))
    }
}

// ---------------------------------------------------------------------------
// zero localization

/// A disk `center + p^level Z_p` with the zero count of `L` on it. When
/// the count is positive, every zero lies in `eta + p^eta_level Z_p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroLocalization {
    #[serde(with = "as_string")]
    pub center: BigInt,
    pub level: u32,
    pub count: u32,
    pub v_min: u32,
    #[serde(with = "as_string::opt")]
    pub eta: Option<BigInt>,
    pub eta_level: u32,
}

impl ZeroLocalization {
    /// Vanishing order of the zero cluster (0 for a zero-free disk).
    pub fn order(&self) -> u32 {
        self.count
    }

    pub fn eta_scalar(&self, ctx: &Arc<PadicContext>) -> Option<PadicScalar> {
        self.eta.as_ref().map(|e| PadicScalar::from_bigint(ctx, e))
    }

    pub fn contains(&self, n: u64, prime: u64) -> bool {
        let m = BigInt::from(prime).pow(self.level);
        let diff = BigInt::from(n) - &self.center;
        (diff % m).is_zero()
    }
}

fn disk_count(f: &dyn DiskFunction, center: &BigInt, k: u32) -> Result<Option<NewtonCount>, GapError> {
    let l = f.restrict(center, k)?;
    match newton_expansion(&l, f.tail_bound(&l)) {
        Ok(nc) => Ok(Some(nc)),
        Err(GapError::IdenticallyZero) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Localizes the zeros of `f` on every class mod `p^initial_k`.
pub fn localize_zeros(f: &dyn DiskFunction, initial_k: u32) -> Result<Vec<ZeroLocalization>, GapError> {
    let p = f.context().prime();
    let classes = p.checked_pow(initial_k).ok_or(GapError::DepthExceeded {
        level: initial_k,
        precision: f.context().precision(),
    })?;
    localize_from(f, (0..classes).map(|i| (BigInt::from(i), initial_k)).collect())
}

/// Localizes from the given starting disks. A disk with zeros is followed
/// one level deeper while a single child holds all of them; a disk whose
/// zeros separate immediately is replaced by its children.
pub fn localize_from(f: &dyn DiskFunction, starts: Vec<(BigInt, u32)>) -> Result<Vec<ZeroLocalization>, GapError> {
    let ctx = f.context();
    let prec = ctx.precision();
    let p = ctx.prime();
    let mut queue: VecDeque<(BigInt, u32)> = starts.into();
    let mut out = Vec::new();
    while let Some((center, k)) = queue.pop_front() {
        if k > prec {
            return Err(GapError::DepthExceeded { level: k, precision: prec });
        }
        let nc = disk_count(f, &center, k)?.ok_or(GapError::IdenticallyZero)?;
        if nc.count == 0 {
            out.push(ZeroLocalization {
                center,
                level: k,
                count: 0,
                v_min: nc.v_min,
                eta: None,
                eta_level: k,
            });
            continue;
        }
        let mut eta = center.clone();
        let mut level = k;
        let split = loop {
            if level >= prec {
                break false;
            }
            let step = BigInt::from(p).pow(level);
            let mut holder = None;
            let mut nonzero = 0;
            let mut unknown = false;
            for j in 0..p {
                let c = &eta + &step * j;
                match disk_count(f, &c, level + 1)? {
                    None => unknown = true,
                    Some(cc) if cc.count > 0 => {
                        nonzero += 1;
                        if cc.count == nc.count {
                            holder = Some(c);
                        }
                    }
                    Some(_) => {}
                }
            }
            if unknown {
                break false;
            }
            match holder {
                Some(c) if nonzero == 1 => {
                    eta = c;
                    level += 1;
                }
                _ => break true,
            }
        };
        if split && level == k {
            let step = BigInt::from(p).pow(k);
            for j in 0..p {
                queue.push_back((&center + &step * j, k + 1));
            }
            continue;
        }
        out.push(ZeroLocalization {
            center,
            level: k,
            count: nc.count as u32,
            v_min: nc.v_min,
            eta: Some(eta),
            eta_level: level,
        });
    }
    out.sort_by(|a, b| (a.level, &a.center).cmp(&(b.level, &b.center)));
    Ok(out)
}

// ---------------------------------------------------------------------------
// gap bounds

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapVerdict {
    Satisfied,
    TooFewReturns,
    Violation,
}

/// The bound `n_{j+1} - n_j >= p^{e(n_j)}` with
/// `e(n) = min(rate (n - offset), cap)`, i.e. `C = p^rate`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapBound {
    pub prime: u64,
    #[serde(with = "as_string")]
    pub rate: BigRational,
    #[serde(with = "as_string")]
    pub offset: BigRational,
    #[serde(with = "as_string::opt")]
    pub cap: Option<BigRational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCheck {
    pub n: u64,
    pub next: u64,
    pub gap: u64,
    #[serde(with = "as_string")]
    pub exponent: BigRational,
    pub holds: bool,
}

impl GapBound {
    /// `C = prime` with rate 1 and offset `n0`, no cap.
    pub fn simple(prime: u64, n0: i64) -> Self {
        GapBound {
            prime,
            rate: BigRational::one(),
            offset: BigRational::from_integer(n0.into()),
            cap: None,
        }
    }

    /// Bound for a disk holding a zero cluster of order `d`, from
    /// `|L(t)| = p^{-v_min} |t - τ|^d` and `v(L(n)) >= min(n c, K)` at
    /// returns.
    pub fn for_zero(prime: u64, c: u32, precision: u32, z: &ZeroLocalization) -> Self {
        let d = BigInt::from(z.count.max(1));
        let c_big = BigInt::from(c);
        let v = BigInt::from(z.v_min);
        let k = BigInt::from(z.level);
        let rate = BigRational::new(c_big.clone(), d.clone());
        let offset = BigRational::new(&v - &k * &d, c_big);
        let precision_cap = BigRational::from_integer(k) + BigRational::new(BigInt::from(precision) - v, d);
        let cap = precision_cap.min(BigRational::from_integer(z.eta_level.into()));
        GapBound {
            prime,
            rate,
            offset,
            cap: Some(cap),
        }
    }

    pub fn exponent(&self, n: u64) -> BigRational {
        let e = &self.rate * (BigRational::from_integer(n.into()) - &self.offset);
        match &self.cap {
            Some(c) if c < &e => c.clone(),
            _ => e,
        }
    }

    /// Whether `next - n >= p^{e(n)}`.
    pub fn holds(&self, n: u64, next: u64) -> bool {
        if next <= n {
            return false;
        }
        let gap = next - n;
        let e = self.exponent(n);
        if !e.is_positive() {
            return true;
        }
        let (Some(num), Some(den)) = (e.numer().to_u64(), e.denom().to_u64()) else {
            return false;
        };
        let lhs = den as f64 * (gap as f64).log2();
        let rhs = num as f64 * (self.prime as f64).log2();
        if lhs > rhs * (1.0 + 1e-9) + 1e-9 {
            return true;
        }
        if lhs < rhs * (1.0 - 1e-9) - 1e-9 {
            return false;
        }
        BigUint::from(gap).pow(den as u32) >= BigUint::from(self.prime).pow(num as u32)
    }
}

/// Checks every consecutive pair of sorted `members`.
pub fn check_gaps(members: &[u64], bound: &GapBound) -> (Vec<PairCheck>, GapVerdict) {
    if members.len() < 2 {
        return (Vec::new(), GapVerdict::TooFewReturns);
    }
    let pairs: Vec<PairCheck> = members
        .windows(2)
        .map(|w| PairCheck {
            n: w[0],
            next: w[1],
            gap: w[1].saturating_sub(w[0]),
            exponent: bound.exponent(w[0]),
            holds: bound.holds(w[0], w[1]),
        })
        .collect();
    let verdict = if pairs.iter().all(|p| p.holds) {
        GapVerdict::Satisfied
    } else {
        GapVerdict::Violation
    };
    (pairs, verdict)
}

// ---------------------------------------------------------------------------
// orbit localization and the gap report

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLocalization {
    pub shift: u64,
    pub q_index: usize,
    pub disk: ZeroLocalization,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitLocalization {
    pub prime: u64,
    pub precision: u32,
    pub c: u32,
    pub m0: u64,
    pub k_total: u64,
    pub initial_level: u32,
    pub classes: Vec<ClassLocalization>,
}

/// Localizes `L_r = Q_j ∘ f^r ∘ T ∘ G` for every shift `r < k_total` on
/// every class mod `p^initial_level`, choosing per class the first `Q_j`
/// that is nonzero at precision.
pub fn localize_orbit(
    inst: &ProblemInstance,
    model: &LocalModel,
    g: &ApproxInterpolant,
    initial_level: u32,
) -> Result<OrbitLocalization, GapError> {
    let base = OrbitRestriction::new(inst, model, g)?;
    let ctx = g.context();
    let p = ctx.prime();
    let k_total = model.k_total();
    let classes = p.checked_pow(initial_level).ok_or(GapError::DepthExceeded {
        level: initial_level,
        precision: ctx.precision(),
    })?;
    let per_center: Vec<Vec<ClassLocalization>> = (0..classes)
        .into_par_iter()
        .map(|i| -> Result<Vec<ClassLocalization>, GapError> {
            let center = BigInt::from(i);
            let mut out = Vec::new();
            let mut y = base.start(&center, initial_level)?;
            for r in 0..k_total {
                let ls = base.values(&y)?;
                let mut chosen = None;
                for (j, l) in ls.iter().enumerate() {
                    match newton_expansion(l, Some(base.tail_estimate(l))) {
                        Ok(nc) => {
                            chosen = Some((j, nc));
                            break;
                        }
                        Err(GapError::IdenticallyZero) => continue,
                        Err(e) => return Err(e),
                    }
                }
                let (j, nc) = chosen.ok_or_else(|| GapError::PossiblePeriodicSubvariety {
                    shift: r,
                    center: center.to_string(),
                })?;
                if nc.count == 0 {
                    out.push(ClassLocalization {
                        shift: r,
                        q_index: j,
                        disk: ZeroLocalization {
                            center: center.clone(),
                            level: initial_level,
                            count: 0,
                            v_min: nc.v_min,
                            eta: None,
                            eta_level: initial_level,
                        },
                    });
                } else {
                    let disk = OrbitDisk {
                        base: &base,
                        q_index: j,
                        shift: r,
                    };
                    for z in localize_from(&disk, vec![(center.clone(), initial_level)])? {
                        out.push(ClassLocalization {
                            shift: r,
                            q_index: j,
                            disk: z,
                        });
                    }
                }
                if r + 1 < k_total {
                    y = base.step(&y)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    let mut all: Vec<ClassLocalization> = per_center.into_iter().flatten().collect();
    all.sort_by(|a, b| (a.shift, a.disk.level, &a.disk.center).cmp(&(b.shift, b.disk.level, &b.disk.center)));
    Ok(OrbitLocalization {
        prime: p,
        precision: ctx.precision(),
        c: g.c(),
        m0: model.m0(),
        k_total,
        initial_level,
        classes: all,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassReport {
    pub shift: u64,
    pub q_index: usize,
    pub disk: ZeroLocalization,
    /// Original indices of the returns in this class.
    pub members: Vec<u64>,
    /// The same returns as model indices `n`.
    pub model_members: Vec<u64>,
    /// For a zero-free disk: members must satisfy `n <= cutoff`.
    #[serde(with = "as_string::opt")]
    pub cutoff: Option<BigRational>,
    pub bound: Option<GapBound>,
    pub pairs: Vec<PairCheck>,
    pub verdict: GapVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub prime: u64,
    pub c: u32,
    pub m0: u64,
    pub k_total: u64,
    /// Returns below `m0`, outside the model.
    pub prefix: Vec<u64>,
    /// Classes holding a zero or at least one return.
    pub classes: Vec<ClassReport>,
    /// Zero-free classes without returns, not listed individually.
    pub empty_zero_free: u64,
    pub screened_only: Vec<u64>,
    pub verdict: GapVerdict,
}

/// Distributes the returns over the localized classes and checks the gap
/// bound in each class with a zero and the cutoff in each zero-free class.
pub fn gap_report(returns: &ReturnSet, loc: &OrbitLocalization) -> GapReport {
    let mut prefix = Vec::new();
    let mut buckets: Vec<Vec<(u64, u64)>> = vec![Vec::new(); loc.classes.len()];
    for m in returns.indices() {
        if m < loc.m0 {
            prefix.push(m);
            continue;
        }
        let r = (m - loc.m0) % loc.k_total;
        let n = (m - loc.m0) / loc.k_total;
        if let Some(idx) = loc
            .classes
            .iter()
            .position(|cl| cl.shift == r && cl.disk.contains(n, loc.prime))
        {
            buckets[idx].push((m, n));
        }
    }
    let mut classes = Vec::new();
    let mut empty_zero_free = 0;
    let mut any_satisfied = false;
    let mut any_violation = false;
    for (cl, members) in loc.classes.iter().zip(buckets) {
        if cl.disk.count == 0 && members.is_empty() {
            empty_zero_free += 1;
            continue;
        }
        let model_members: Vec<u64> = members.iter().map(|x| x.1).collect();
        let (cutoff, bound, pairs, verdict) = if cl.disk.count == 0 {
            let cutoff = BigRational::new(cl.disk.v_min.into(), loc.c.into());
            let ok = model_members
                .iter()
                .all(|&n| BigRational::from_integer(n.into()) <= cutoff);
            let verdict = if ok { GapVerdict::Satisfied } else { GapVerdict::Violation };
            (Some(cutoff), None, Vec::new(), verdict)
        } else {
            let bound = GapBound::for_zero(loc.prime, loc.c, loc.precision, &cl.disk);
            let (pairs, verdict) = check_gaps(&model_members, &bound);
            if verdict == GapVerdict::Satisfied {
                any_satisfied = true;
            }
            (None, Some(bound), pairs, verdict)
        };
        any_violation |= verdict == GapVerdict::Violation;
        classes.push(ClassReport {
            shift: cl.shift,
            q_index: cl.q_index,
            disk: cl.disk.clone(),
            members: members.iter().map(|x| x.0).collect(),
            model_members,
            cutoff,
            bound,
            pairs,
            verdict,
        });
    }
    let verdict = if any_violation {
        GapVerdict::Violation
    } else if any_satisfied {
        GapVerdict::Satisfied
    } else {
        GapVerdict::TooFewReturns
    };
    GapReport {
        prime: loc.prime,
        c: loc.c,
        m0: loc.m0,
        k_total: loc.k_total,
        prefix,
        classes,
        empty_zero_free,
        screened_only: returns.screened_only(),
        verdict,
    }
}

// ---------------------------------------------------------------------------
// density

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub n: u64,
    pub count: u64,
    pub log_iterate: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub m: u32,
    pub n_max: u64,
    pub samples: Vec<DensitySample>,
    pub max_ratio: f64,
    /// The last ratio exceeds the first and is the largest seen.
    pub diverging: bool,
}

/// `1, 2, 4, ... <= n_max`, then `n_max`.
pub fn checkpoints(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut c = 1u64;
    while c <= n_max {
        out.push(c);
        match c.checked_mul(2) {
            Some(next) => c = next,
            None => break,
        }
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    out
}

/// `log^{(m)}(n)`, if every iterate is defined and the result positive.
pub fn iterated_log(n: f64, m: u32) -> Option<f64> {
    let mut x = n;
    for _ in 0..m {
        if x <= 0.0 {
            return None;
        }
        x = x.ln();
    }
    (x > 0.0 && x.is_finite()).then_some(x)
}

/// Counting function of sorted `returns` against `log^{(m)}`.
pub fn density_report(returns: &[u64], n_max: u64, m: u32) -> DensityReport {
    let mut samples = Vec::new();
    for n in checkpoints(n_max) {
        let Some(l) = iterated_log(n as f64, m) else { continue };
        let count = returns.partition_point(|&x| x <= n) as u64;
        samples.push(DensitySample {
            n,
            count,
            log_iterate: l,
            ratio: count as f64 / l,
        });
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let diverging = match (samples.first(), samples.last()) {
        (Some(first), Some(last)) => samples.len() >= 3 && last.ratio > first.ratio && last.ratio >= max_ratio,
        _ => false,
    };
    DensityReport {
        m,
        n_max,
        samples,
        max_ratio,
        diverging,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolation::build_interpolant;
    use crate::normalization::LocalModel;
    use crate::padic::PadicVector;
    use crate::poly::{int, PolyMap, Polynomial};
    use proptest::prelude::*;

    fn upoly(ctx: &Arc<PadicContext>, coeffs: &[i64]) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(ctx, 1, coeffs.len().max(2) as u32);
        for (i, &c) in coeffs.iter().enumerate() {
            s.add_term(Monomial::new(&[i as u32]), reduce_bigint(&BigInt::from(c), ctx.modulus()));
        }
        s
    }

    fn six_power_interpolant(k: u32) -> ApproxInterpolant {
        let ctx = PadicContext::new(5, k).unwrap();
        let f = vec![upoly(&ctx, &[0, 6])];
        let model = LocalModel::from_parts(f, PadicVector::from_residues(&ctx, vec![BigUint::one()])).unwrap();
        build_interpolant(&model, k as usize, 2).unwrap()
    }

    #[test]
    fn newton_examples() {
        let ctx = PadicContext::new(5, 20).unwrap();
        let nc = newton_zero_count(&upoly(&ctx, &[5, -6, 1]), None).unwrap();
        assert_eq!(nc.count, 2);
        assert_eq!(nc.vertices, vec![(0, 1), (1, 0), (2, 0)]);
        assert_eq!(newton_zero_count(&upoly(&ctx, &[1, 5]), None).unwrap().count, 0);
        assert_eq!(newton_zero_count(&upoly(&ctx, &[7]), None).unwrap().count, 0);
        assert_eq!(newton_zero_count(&upoly(&ctx, &[0]), None), Err(GapError::IdenticallyZero));
        assert!(matches!(
            newton_zero_count(&upoly(&ctx, &[25, 25]), Some(2)),
            Err(GapError::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn returns_examples() {
        let x = Polynomial::variable(1, 0);
        let f = PolyMap::new(vec![x.mul(&x).sub(&Polynomial::constant(1, int(2)))]);
        let v = x.sub(&Polynomial::constant(1, int(7)));
        let inst = ProblemInstance::new(f.clone(), vec![int(3)], vec![v], vec![]).unwrap();
        let rs = compute_returns(&inst, 100, 8, 1 << 20);
        assert_eq!(rs.indices(), vec![1]);
        assert_eq!(rs.entries[0].status, ReturnStatus::CertifiedExact);
        assert_eq!(rs.exact_horizon, Some(1));

        let everything = ProblemInstance::new(f, vec![int(3)], vec![Polynomial::zero(1)], vec![]).unwrap();
        let rs = compute_returns(&everything, 30, 2, 64);
        assert_eq!(rs.indices(), (0..=30).collect::<Vec<_>>());
        assert!(!rs.screened_only().is_empty());

        let (x, y) = (Polynomial::variable(2, 0), Polynomial::variable(2, 1));
        let sq = PolyMap::new(vec![x.mul(&x), y.mul(&y)]);
        let v = y.sub(&Polynomial::constant(2, int(5)));
        let inst = ProblemInstance::new(sq, vec![int(2), int(5)], vec![v], vec![]).unwrap();
        assert_eq!(compute_returns(&inst, 200, 8, 1 << 20).indices(), vec![0]);
    }

    #[test]
    fn restriction_examples() {
        let g = six_power_interpolant(30);
        let ctx = g.context().clone();
        let one = TruncatedSeries::constant(&ctx, 1, 4, &BigUint::one());
        let l = restrict_to_disk(&g, &one, &BigInt::zero(), 1).unwrap();
        assert_eq!(l.series.degree(), Some(0));
        assert_eq!(l.series.constant_term(), PadicScalar::one(&ctx));

        let q = upoly(&ctx, &[-1, 1]);
        let l = restrict_to_disk(&g, &q, &BigInt::zero(), 1).unwrap();
        assert!(l.series.constant_term().is_zero());
        assert_eq!(l.series.coeff(&[1]).valuation(), Valuation::Finite(2));
        // L(t) = 6^{5t} - 1 at t = 3, up to the profile's precision
        let t3 = l.series.evaluate(&PadicVector::from_residues(&ctx, vec![3u32.into()])).unwrap();
        let want = PadicScalar::from_u64(&ctx, 6).pow(15).try_sub(&PadicScalar::one(&ctx)).unwrap();
        let m = ctx.pow_p(l.min_precision());
        assert!(l.min_precision() >= 20);
        assert_eq!(t3.residue() % &m, want.residue() % &m);
    }

    #[test]
    fn localization_examples() {
        let ctx = PadicContext::new(5, 20).unwrap();
        let zs = localize_zeros(&PolynomialDisk(upoly(&ctx, &[5, -6, 1])), 1).unwrap();
        let with_zero: Vec<_> = zs.iter().filter(|z| z.count > 0).collect();
        assert_eq!(with_zero.len(), 2);
        assert_eq!(with_zero[0].center, BigInt::zero());
        assert_eq!(with_zero[0].order(), 1);
        assert_eq!(with_zero[0].eta.as_ref().unwrap() % BigInt::from(5u32.pow(6)), BigInt::from(5));
        assert_eq!(with_zero[1].center, BigInt::one());
        assert_eq!(with_zero[1].eta, Some(BigInt::one()));

        let zs = localize_zeros(&PolynomialDisk(upoly(&ctx, &[1, 5])), 1).unwrap();
        assert!(zs.iter().all(|z| z.count == 0));
        assert_eq!(zs.len(), 5);

        let zs = localize_zeros(&PolynomialDisk(upoly(&ctx, &[0, 0, 1])), 1).unwrap();
        let z = zs.iter().find(|z| z.count > 0).unwrap();
        assert_eq!((z.order(), z.eta.clone()), (2, Some(BigInt::zero())));
        assert_eq!(zs.iter().filter(|z| z.count > 0).count(), 1);
    }

    #[test]
    fn synthetic_gap_examples() {
        let b = GapBound::simple(3, 0);
        assert_eq!(check_gaps(&[2, 30], &b).1, GapVerdict::Satisfied);
        let (pairs, v) = check_gaps(&[2, 8], &b);
        assert_eq!(v, GapVerdict::Violation);
        assert_eq!((pairs[0].gap, pairs[0].holds), (6, false));
        assert_eq!(check_gaps(&[1], &b).1, GapVerdict::TooFewReturns);
        // 9 is exactly 3^2
        assert!(b.holds(2, 11));
        assert!(!b.holds(2, 10));
    }

    #[test]
    fn zero_bound_uses_polygon_data() {
        let z = ZeroLocalization {
            center: BigInt::from(1),
            level: 1,
            count: 2,
            v_min: 3,
            eta: Some(BigInt::from(1)),
            eta_level: 10,
        };
        let b = GapBound::for_zero(5, 1, 20, &z);
        assert_eq!(b.rate, BigRational::new(1.into(), 2.into()));
        assert_eq!(b.offset, BigRational::from_integer(1.into()));
        // min(k + (K - v)/d, eta_level) = min(1 + 17/2, 10)
        assert_eq!(b.cap, Some(BigRational::new(19.into(), 2.into())));
        assert_eq!(b.exponent(5), BigRational::from_integer(2.into()));
        assert_eq!(b.exponent(1000), BigRational::new(19.into(), 2.into()));
    }

    #[test]
    fn density_examples() {
        let empty = density_report(&[], 1000, 1);
        assert!(empty.samples.iter().all(|s| s.count == 0));
        assert!(!empty.diverging);

        let all: Vec<u64> = (0..=100_000).collect();
        let d = density_report(&all, 100_000, 1);
        assert!(d.diverging);

        let one = density_report(&[1], 1_000_000, 1);
        assert!((one.max_ratio - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert!(!one.diverging);
        assert_eq!(checkpoints(10), vec![1, 2, 4, 8, 10]);
    }

    fn exact_binomial(n: &BigInt, k: usize) -> BigInt {
        let mut num = BigInt::one();
        let mut den = BigInt::one();
        for i in 0..k {
            num *= n - BigInt::from(i);
            den *= BigInt::from(i + 1);
        }
        num / den
    }

    proptest! {
        #[test]
        fn shifted_binomials_match_direct(a in -200i64..200, k in 1u32..4, t in 0u64..50) {
            let ctx = PadicContext::new(3, 12).unwrap();
            let (work, rows) = shifted_binomials(&ctx, &BigInt::from(a), k, 20).unwrap();
            let n = BigInt::from(a) + BigInt::from(3u64.pow(k) * t);
            let mut falling = BigInt::one();
            for (j, row) in rows.iter().enumerate() {
                let mut acc = BigUint::zero();
                let mut tp = BigUint::one();
                for c in &row.numerators {
                    acc += c * &tp;
                    tp *= t;
                }
                prop_assert_eq!(acc % work.modulus(), reduce_bigint(&falling, work.modulus()));
                // numerator / j! is the binomial
                let pv = BigInt::from(3u32).pow(row.p_part);
                let unit_part = (1..=j as u64).fold(BigInt::one(), |acc, i| acc * BigInt::from(i)) / &pv;
                let inv = BigInt::from(row.unit_inverse.clone());
                prop_assert_eq!(reduce_bigint(&(unit_part * inv), work.modulus()), BigUint::one());
                prop_assert_eq!(&falling % &pv, BigInt::zero());
                let quotient = &falling / &pv * BigInt::from(row.unit_inverse.clone());
                prop_assert_eq!(reduce_bigint(&quotient, ctx.modulus()), reduce_bigint(&exact_binomial(&n, j), ctx.modulus()));
                falling *= &n - BigInt::from(j);
            }
        }

        #[test]
        fn count_one_disks_refine_to_one_child(
            roots in proptest::collection::vec(0i64..125, 1..4),
            unit in 1i64..5,
        ) {
            let ctx = PadicContext::new(5, 16).unwrap();
            // unit * Π (t - root)
            let mut coeffs = vec![unit];
            for r in &roots {
                let mut next = vec![0i64; coeffs.len() + 1];
                for (i, c) in coeffs.iter().enumerate() {
                    next[i] -= c * r;
                    next[i + 1] += c;
                }
                coeffs = next;
            }
            let f = PolynomialDisk(upoly(&ctx, &coeffs));
            for i in 0..5i64 {
                let center = BigInt::from(i);
                let nc = disk_count(&f, &center, 1).unwrap().unwrap();
                if nc.count == 1 {
                    let total: usize = (0..5i64)
                        .map(|j| disk_count(&f, &BigInt::from(i + 5 * j), 2).unwrap().map_or(0, |c| c.count))
                        .sum();
                    prop_assert_eq!(total, 1);
                }
            }
        }
    }
}
