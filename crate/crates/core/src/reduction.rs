//! Reduction of a problem instance modulo primes and the functional-graph
//! analysis of the reduced map on `(Z/m)^N`: orbit structure, periodic
//! points on `V`, preimage depths and avoidance certificates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{is_prime, lcm_u64, prime_factors, primes_in_range};
use crate::poly::{rational_height_bits, rational_mod, PolyMap, Polynomial};

pub const DEFAULT_ENUMERATION_GUARD: u64 = 1 << 24;
pub const DEFAULT_PERIOD_BOUND: u32 = 64;
/// Height (in bits) at which exact iteration of a declared periodic point
/// gives up.
const PERIOD_HEIGHT_LIMIT: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("dimension mismatch: expected {expected}, found {found} in {what}")]
    Dimension { what: String, expected: usize, found: usize },
    #[error("coordinate {0} of the map is constant, so the map is not quasi-finite")]
    ConstantCoordinate(usize),
    #[error("map must have at least one coordinate")]
    EmptyMap,
    #[error("prime {0} is bad for this instance")]
    BadPrime(u64),
    #[error("enumeration of {size} points exceeds the guard {guard}")]
    GuardExceeded { size: String, guard: u64 },
    #[error("declared periodic point {index} is not periodic within {bound} iterates")]
    NotPeriodic { index: usize, bound: u32 },
}

/// `f`, the initial point `a`, the variety `V = {Q_1 = ... = Q_s = 0}` and
/// declared periodic points on `V`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub map: PolyMap,
    pub initial_point: Vec<BigRational>,
    pub variety: Vec<Polynomial>,
    pub periodic_points: Vec<Vec<BigRational>>,
}

impl ProblemInstance {
    pub fn new(
        map: PolyMap,
        initial_point: Vec<BigRational>,
        variety: Vec<Polynomial>,
        periodic_points: Vec<Vec<BigRational>>,
    ) -> Result<Self, ReductionError> {
        let n = map.dim();
        if n == 0 {
            return Err(ReductionError::EmptyMap);
        }
        if initial_point.len() != n {
            return Err(ReductionError::Dimension {
                what: "initial point".into(),
                expected: n,
                found: initial_point.len(),
            });
        }
        for q in &variety {
            if q.nvars() != n {
                return Err(ReductionError::Dimension {
                    what: "variety polynomial".into(),
                    expected: n,
                    found: q.nvars(),
                });
            }
        }
        for g in &periodic_points {
            if g.len() != n {
                return Err(ReductionError::Dimension {
                    what: "periodic point".into(),
                    expected: n,
                    found: g.len(),
                });
            }
        }
        if let Some(i) = map.polys().iter().position(|p| p.is_constant()) {
            return Err(ReductionError::ConstantCoordinate(i));
        }
        Ok(ProblemInstance {
            map,
            initial_point,
            variety,
            periodic_points,
        })
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Primes dividing any denominator of `f`, `a`, `V` or the `γ_i`.
    pub fn denominator_primes(&self) -> BTreeSet<u64> {
        let mut den = self.map.denominator_lcm();
        for q in &self.variety {
            den = den.lcm(&q.denominator_lcm());
        }
        for x in self.initial_point.iter().chain(self.periodic_points.iter().flatten()) {
            den = den.lcm(x.denom());
        }
        prime_factors(den.magnitude()).into_iter().collect()
    }
}

/// Exact iteration of rational points.
pub fn iterate_point(map: &PolyMap, x: &[BigRational]) -> Vec<BigRational> {
    map.evaluate(x)
}

/// Exact period of a rational point, if at most `bound`.
pub fn exact_period(map: &PolyMap, x: &[BigRational], bound: u32) -> Option<u32> {
    let mut y = x.to_vec();
    for k in 1..=bound {
        y = map.evaluate(&y);
        if y.as_slice() == x {
            return Some(k);
        }
        if y.iter().map(rational_height_bits).max().unwrap_or(0) > PERIOD_HEIGHT_LIMIT {
            return None;
        }
    }
    None
}

fn rational_det(mut a: Vec<Vec<BigRational>>) -> BigRational {
    let n = a.len();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let pv = a[col][col].clone();
        det *= &pv;
        for r in col + 1..n {
            let factor = &a[r][col] / &pv;
            if factor.is_zero() {
                continue;
            }
            for j in col..n {
                let sub = &factor * &a[col][j];
                a[r][j] -= sub;
            }
        }
    }
    det
}

/// The set `S` of primes excluded from every later computation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadPrimeSet {
    pub primes: BTreeSet<u64>,
    #[serde(with = "reason_pairs")]
    pub reasons: BTreeMap<u64, Vec<String>>,
}

// integer map keys do not survive tagged records, so the map is written as
// a list of (prime, reasons) pairs
mod reason_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<u64, Vec<String>>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, Vec<String>>, D::Error> {
        Ok(Vec::<(u64, Vec<String>)>::deserialize(d)?.into_iter().collect())
    }
}

impl BadPrimeSet {
    pub fn contains(&self, p: u64) -> bool {
        self.primes.contains(&p)
    }

    fn add(&mut self, p: u64, why: String) {
        self.primes.insert(p);
        self.reasons.entry(p).or_default().push(why);
    }
}

/// Denominator primes, plus primes `<= search_bound` at which a declared
/// periodic point `γ` of exact period `ℓ` collides with another branch of
/// `f^{-1}`: either the orbit of `γ` mod `p` has period shorter than `ℓ`,
/// or the Jacobian of `f^ℓ` at `γ` is singular mod `p` (two preimages
/// merge). A Jacobian that is exactly zero carries no prime information and
/// is skipped. Points that are not periodic within `period_bound` are
/// ignored here; `fixing_iterate` reports them.
pub fn bad_primes(inst: &ProblemInstance, search_bound: u64, period_bound: u32) -> BadPrimeSet {
    let mut bad = BadPrimeSet::default();
    for p in inst.denominator_primes() {
        bad.add(p, "divides a denominator".into());
    }
    let jac = inst.map.jacobian();
    let candidates = primes_in_range(2, search_bound);
    for (idx, gamma) in inst.periodic_points.iter().enumerate() {
        let Some(period) = exact_period(&inst.map, gamma, period_bound) else {
            continue;
        };
        let mut orbit = vec![gamma.clone()];
        for _ in 1..period {
            let next = inst.map.evaluate(orbit.last().unwrap());
            orbit.push(next);
        }
        // period drop: f^d(γ) ≡ γ for a proper divisor d of ℓ
        for d in (1..period).filter(|d| period % d == 0) {
            let diff: Vec<BigRational> = orbit[d as usize].iter().zip(gamma).map(|(a, b)| a - b).collect();
            let g = diff.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x.numer()));
            for &p in &candidates {
                if g.is_zero() || (&g % BigInt::from(p)).is_zero() {
                    bad.add(p, format!("periodic point {idx} has shorter period {d} mod p"));
                }
            }
        }
        let mut det = BigRational::one();
        for x in &orbit {
            let m: Vec<Vec<BigRational>> = jac
                .iter()
                .map(|row| row.iter().map(|q| q.evaluate(x)).collect())
                .collect();
            det *= rational_det(m);
        }
        if det.is_zero() {
            continue;
        }
        for &p in &candidates {
            if (det.numer() % BigInt::from(p)).is_zero() {
                bad.add(p, format!("Jacobian of the period map at periodic point {idx} is singular mod p"));
            }
        }
    }
    bad
}

/// A polynomial with coefficients in `Z/m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResiduePoly {
    modulus: u64,
    terms: Vec<(Vec<u32>, u64)>,
}

impl ResiduePoly {
    pub fn new(modulus: u64, terms: Vec<(Vec<u32>, u64)>) -> Self {
        let terms = terms
            .into_iter()
            .map(|(e, c)| (e, c % modulus))
            .filter(|(_, c)| *c != 0)
            .collect();
        ResiduePoly { modulus, terms }
    }

    pub fn from_polynomial(q: &Polynomial, modulus: u64) -> Option<Self> {
        Some(Self::new(modulus, q.coeffs_mod(modulus)?))
    }

    pub fn terms(&self) -> &[(Vec<u32>, u64)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[u64]) -> u64 {
        let m = self.modulus as u128;
        let mut acc: u128 = 0;
        for (e, c) in &self.terms {
            let mut t = *c as u128;
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t = t * *xi as u128 % m;
                }
            }
            acc = (acc + t) % m;
        }
        acc as u64
    }

    fn evaluate_with_powers(&self, powers: &[u64], stride: usize) -> u64 {
        let m = self.modulus as u128;
        let mut acc: u128 = 0;
        for (e, c) in &self.terms {
            let mut t = *c as u128;
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t * powers[i * stride + k as usize] as u128 % m;
                }
            }
            acc += t;
            if acc >= 1 << 126 {
                acc %= m;
            }
        }
        (acc % m) as u64
    }
}

/// `f` with coefficients reduced modulo `m` (a prime or a prime power), as
/// a self-map of `(Z/m)^N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueMap {
    modulus: u64,
    dim: usize,
    polys: Vec<ResiduePoly>,
    max_degree: u32,
}

impl ResidueMap {
    pub fn new(modulus: u64, polys: Vec<ResiduePoly>) -> Self {
        let dim = polys.len();
        let max_degree = polys.iter().map(|p| p.degree()).max().unwrap_or(0);
        ResidueMap {
            modulus,
            dim,
            polys,
            max_degree,
        }
    }

    pub fn from_map(map: &PolyMap, modulus: u64) -> Option<Self> {
        let polys = map
            .polys()
            .iter()
            .map(|q| ResiduePoly::from_polynomial(q, modulus))
            .collect::<Option<Vec<_>>>()?;
        Some(Self::new(modulus, polys))
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn polys(&self) -> &[ResiduePoly] {
        &self.polys
    }

    fn stride(&self) -> usize {
        self.max_degree as usize + 1
    }

    fn fill_powers(&self, x: &[u64], powers: &mut Vec<u64>) {
        let stride = self.stride();
        let m = self.modulus as u128;
        powers.clear();
        powers.resize(self.dim * stride, 0);
        for (i, &xi) in x.iter().enumerate() {
            let base = i * stride;
            powers[base] = 1 % self.modulus;
            for k in 1..stride {
                powers[base + k] = (powers[base + k - 1] as u128 * xi as u128 % m) as u64;
            }
        }
    }

    pub fn apply(&self, x: &[u64]) -> Vec<u64> {
        let mut powers = Vec::new();
        let mut out = vec![0; self.dim];
        self.apply_into(x, &mut out, &mut powers);
        out
    }

    /// `out = f(x)`, reusing `scratch` for the power table.
    pub fn apply_into(&self, x: &[u64], out: &mut [u64], scratch: &mut Vec<u64>) {
        self.fill_powers(x, scratch);
        let stride = self.stride();
        for (slot, q) in out.iter_mut().zip(&self.polys) {
            *slot = q.evaluate_with_powers(scratch, stride);
        }
    }

    pub fn iterate(&self, x: &[u64], m: u64) -> Vec<u64> {
        let mut y = x.to_vec();
        let mut tmp = vec![0; self.dim];
        let mut scratch = Vec::new();
        for _ in 0..m {
            self.apply_into(&y, &mut tmp, &mut scratch);
            std::mem::swap(&mut y, &mut tmp);
        }
        y
    }

    /// Number of points of `(Z/m)^N`, if it fits in a `u64`.
    pub fn space_size(&self) -> Option<u64> {
        self.modulus.checked_pow(self.dim as u32)
    }

    pub fn encode(&self, x: &[u64]) -> u64 {
        x.iter().rev().fold(0, |acc, &xi| acc * self.modulus + xi)
    }

    pub fn decode(&self, mut idx: u64) -> Vec<u64> {
        let mut x = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            x.push(idx % self.modulus);
            idx /= self.modulus;
        }
        x
    }

    fn check_guard(&self, guard: u64) -> Result<u64, ReductionError> {
        match self.space_size() {
            Some(s) if s <= guard => Ok(s),
            _ => Err(ReductionError::GuardExceeded {
                size: format!("{}^{}", self.modulus, self.dim),
                guard,
            }),
        }
    }

    /// The map as an array of images over all of `(Z/m)^N`, with reverse
    /// adjacency and the set of points on cycles.
    pub fn functional_graph(&self, guard: u64) -> Result<FunctionalGraph, ReductionError> {
        let size = self.check_guard(guard)?;
        let image: Vec<u32> = (0..size)
            .into_par_iter()
            .map_init(
                || (Vec::new(), vec![0u64; self.dim]),
                |(scratch, out), idx| {
                    let x = self.decode(idx);
                    self.apply_into(&x, out, scratch);
                    self.encode(out) as u32
                },
            )
            .collect();
        Ok(FunctionalGraph::from_image(image))
    }
}

impl fmt::Display for ResidueMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "map mod {} on {} coordinates", self.modulus, self.dim)
    }
}

#[derive(Clone, Debug)]
pub struct FunctionalGraph {
    image: Vec<u32>,
    rev_offsets: Vec<u32>,
    rev: Vec<u32>,
    cyclic: Vec<bool>,
}

impl FunctionalGraph {
    pub fn from_image(image: Vec<u32>) -> Self {
        let n = image.len();
        let mut indeg = vec![0u32; n];
        for &y in &image {
            indeg[y as usize] += 1;
        }
        let mut rev_offsets = vec![0u32; n + 1];
        for i in 0..n {
            rev_offsets[i + 1] = rev_offsets[i] + indeg[i];
        }
        let mut fill = rev_offsets.clone();
        let mut rev = vec![0u32; n];
        for (x, &y) in image.iter().enumerate() {
            rev[fill[y as usize] as usize] = x as u32;
            fill[y as usize] += 1;
        }
        // peel off in-degree-zero nodes; what remains lies on cycles
        let mut cyclic = vec![true; n];
        let mut stack: Vec<u32> = (0..n as u32).filter(|&i| indeg[i as usize] == 0).collect();
        while let Some(x) = stack.pop() {
            cyclic[x as usize] = false;
            let y = image[x as usize] as usize;
            indeg[y] -= 1;
            if indeg[y] == 0 {
                stack.push(y as u32);
            }
        }
        FunctionalGraph {
            image,
            rev_offsets,
            rev,
            cyclic,
        }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self, x: u32) -> u32 {
        self.image[x as usize]
    }

    pub fn preimages(&self, x: u32) -> &[u32] {
        let (a, b) = (self.rev_offsets[x as usize], self.rev_offsets[x as usize + 1]);
        &self.rev[a as usize..b as usize]
    }

    pub fn is_cyclic(&self, x: u32) -> bool {
        self.cyclic[x as usize]
    }

    pub fn cyclic_points(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.image.len() as u32).filter(|&x| self.cyclic[x as usize])
    }

    /// Largest `m` with `f^m(x) = target` for some `x`, or `None` when the
    /// target lies on a cycle (then every `m` is attained).
    pub fn first_hit_depth(&self, target: u32) -> Option<u32> {
        if self.is_cyclic(target) {
            return None;
        }
        let mut seen = vec![false; self.image.len()];
        seen[target as usize] = true;
        let mut level = vec![target];
        let mut depth = 0u32;
        loop {
            let mut next = Vec::new();
            for &y in &level {
                for &x in self.preimages(y) {
                    assert!(!seen[x as usize], "preimage levels must be disjoint");
                    seen[x as usize] = true;
                    next.push(x);
                }
            }
            if next.is_empty() {
                return Some(depth);
            }
            depth += 1;
            level = next;
        }
    }
}

/// Tail length `t` and cycle length `ℓ` of the orbit of `start`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub start: Vec<u64>,
    pub tail: u64,
    pub cycle: u64,
    /// First iterate at which each queried target is hit.
    pub first_hits: Vec<Option<u64>>,
}

/// Brent's cycle detection on an arbitrary state space.
pub fn brent<T: Clone + PartialEq>(start: &T, mut step: impl FnMut(&T) -> T) -> (u64, u64) {
    let mut power = 1u64;
    let mut lam = 1u64;
    let mut tortoise = start.clone();
    let mut hare = step(start);
    while tortoise != hare {
        if power == lam {
            tortoise = hare.clone();
            power *= 2;
            lam = 0;
        }
        hare = step(&hare);
        lam += 1;
    }
    let mut tortoise = start.clone();
    let mut hare = start.clone();
    for _ in 0..lam {
        hare = step(&hare);
    }
    let mut mu = 0u64;
    while tortoise != hare {
        tortoise = step(&tortoise);
        hare = step(&hare);
        mu += 1;
    }
    (mu, lam)
}

pub fn orbit_summary(map: &ResidueMap, x: &[u64], targets: &[Vec<u64>]) -> OrbitSummary {
    let mut scratch = Vec::new();
    let mut step = |y: &Vec<u64>| {
        let mut out = vec![0; map.dim()];
        map.apply_into(y, &mut out, &mut scratch);
        out
    };
    let (tail, cycle) = brent(&x.to_vec(), &mut step);
    let mut first_hits = vec![None; targets.len()];
    let mut y = x.to_vec();
    for m in 0..tail + cycle {
        for (slot, t) in first_hits.iter_mut().zip(targets) {
            if slot.is_none() && &y == t {
                *slot = Some(m);
            }
        }
        y = step(&y);
    }
    OrbitSummary {
        start: x.to_vec(),
        tail,
        cycle,
        first_hits,
    }
}

/// Points of `V mod p` lying on cycles of the reduced map.
pub fn periodic_points_on_v(map: &ResidueMap, variety: &[ResiduePoly], guard: u64) -> Result<Vec<Vec<u64>>, ReductionError> {
    let graph = map.functional_graph(guard)?;
    Ok(graph
        .cyclic_points()
        .map(|i| map.decode(i as u64))
        .filter(|x| variety.iter().all(|q| q.evaluate(x) == 0))
        .collect())
}

/// Preimage depth of a target, or failure when it is periodic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HitDepth {
    Depth(u32),
    Periodic,
}

pub fn first_hit_depth(map: &ResidueMap, target: &[u64], guard: u64) -> Result<HitDepth, ReductionError> {
    let graph = map.functional_graph(guard)?;
    Ok(match graph.first_hit_depth(map.encode(target) as u32) {
        Some(d) => HitDepth::Depth(d),
        None => HitDepth::Periodic,
    })
}

/// Instance data reduced modulo a good prime.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub prime: u64,
    pub map: ResidueMap,
    pub point: Vec<u64>,
    pub targets: Vec<Vec<u64>>,
    pub variety: Vec<ResiduePoly>,
}

/// Coefficientwise reduction modulo `m` (used with `m = p` and `m = p^2`).
pub fn reduce_mod(inst: &ProblemInstance, prime: u64, modulus: u64) -> Result<Reduced, ReductionError> {
    let bad = || ReductionError::BadPrime(prime);
    let map = ResidueMap::from_map(&inst.map, modulus).ok_or_else(bad)?;
    let point = inst
        .initial_point
        .iter()
        .map(|x| rational_mod(x, modulus))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(bad)?;
    let targets = inst
        .periodic_points
        .iter()
        .map(|g| g.iter().map(|x| rational_mod(x, modulus)).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(bad)?;
    let variety = inst
        .variety
        .iter()
        .map(|q| ResiduePoly::from_polynomial(q, modulus))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(bad)?;
    Ok(Reduced {
        prime,
        map,
        point,
        targets,
        variety,
    })
}

pub fn reduce(inst: &ProblemInstance, p: u64, bad: &BadPrimeSet) -> Result<Reduced, ReductionError> {
    if bad.contains(p) || !is_prime(p) {
        return Err(ReductionError::BadPrime(p));
    }
    reduce_mod(inst, p, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateVerdict {
    Certified,
    FailedPeriodic,
    FailedBadPrime,
    /// The space was too large to enumerate.
    GuardExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidanceCertificate {
    pub prime: u64,
    pub targets: Vec<Vec<u64>>,
    /// Every point avoids every target at iterates `m >= bound`.
    pub bound: u64,
    pub depths: Vec<HitDepth>,
    pub verdict: CertificateVerdict,
}

/// Avoidance bound for explicit targets of an already reduced map.
pub fn certify_targets(map: &ResidueMap, prime: u64, targets: &[Vec<u64>], guard: u64) -> AvoidanceCertificate {
    let mut cert = AvoidanceCertificate {
        prime,
        targets: targets.to_vec(),
        bound: 0,
        depths: Vec::new(),
        verdict: CertificateVerdict::Certified,
    };
    if targets.is_empty() {
        return cert;
    }
    let graph = match map.functional_graph(guard) {
        Ok(g) => g,
        Err(_) => {
            cert.verdict = CertificateVerdict::GuardExceeded;
            return cert;
        }
    };
    for t in targets {
        match graph.first_hit_depth(map.encode(t) as u32) {
            Some(d) => {
                cert.depths.push(HitDepth::Depth(d));
                cert.bound = cert.bound.max(d as u64 + 1);
            }
            None => {
                cert.depths.push(HitDepth::Periodic);
                cert.verdict = CertificateVerdict::FailedPeriodic;
            }
        }
    }
    if cert.verdict != CertificateVerdict::Certified {
        cert.bound = 0;
    }
    cert
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceSummary {
    pub certificates: Vec<AvoidanceCertificate>,
    pub scanned: usize,
    pub certified: usize,
    /// Fraction of scanned primes that were certified.
    pub density: f64,
}

impl AvoidanceSummary {
    pub fn certified(&self) -> impl Iterator<Item = &AvoidanceCertificate> {
        self.certificates
            .iter()
            .filter(|c| c.verdict == CertificateVerdict::Certified)
    }
}

/// Attempts a certificate at every odd prime in `[lo, hi]`.
pub fn avoidance_search(inst: &ProblemInstance, lo: u64, hi: u64, bad: &BadPrimeSet, guard: u64) -> AvoidanceSummary {
    let primes = primes_in_range(lo.max(3), hi);
    let certificates: Vec<AvoidanceCertificate> = primes
        .par_iter()
        .map(|&p| match reduce(inst, p, bad) {
            Ok(red) => certify_targets(&red.map, p, &red.targets, guard),
            Err(_) => AvoidanceCertificate {
                prime: p,
                targets: Vec::new(),
                bound: 0,
                depths: Vec::new(),
                verdict: CertificateVerdict::FailedBadPrime,
            },
        })
        .collect();
    let certified = certificates
        .iter()
        .filter(|c| c.verdict == CertificateVerdict::Certified)
        .count();
    let scanned = certificates.len();
    AvoidanceSummary {
        certificates,
        scanned,
        certified,
        density: if scanned == 0 { 0.0 } else { certified as f64 / scanned as f64 },
    }
}

/// Exhaustive check that no point hits a target at any `m` in
/// `[bound, bound + N]` where `N` is the size of the space. Iterates the
/// image sets `f^m(X)`; they shrink as `m` grows, so once two consecutive
/// sets agree every later `m` is covered as well.
pub fn verify_window(map: &ResidueMap, targets: &[Vec<u64>], bound: u64, guard: u64) -> Result<bool, ReductionError> {
    let size = map.check_guard(guard)?;
    let graph = map.functional_graph(guard)?;
    let encoded: Vec<usize> = targets.iter().map(|t| map.encode(t) as usize).collect();
    let step = |set: &[bool]| {
        let mut next = vec![false; set.len()];
        for (x, _) in set.iter().enumerate().filter(|(_, on)| **on) {
            next[graph.image(x as u32) as usize] = true;
        }
        next
    };
    let mut set = vec![true; size as usize];
    for _ in 0..bound {
        let next = step(&set);
        if next == set {
            break;
        }
        set = next;
    }
    for _ in 0..=size {
        if encoded.iter().any(|&t| set[t]) {
            return Ok(false);
        }
        let next = step(&set);
        if next == set {
            break;
        }
        set = next;
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixingIterate {
    /// lcm of the exact periods of the declared periodic points.
    pub gamma_period: u64,
    /// Cycle length of `a_p` under the reduced `f^gamma_period`.
    pub point_cycle: u64,
    pub k: u64,
}

/// Least iterate fixing every declared periodic point, combined with the
/// cycle length of `a_p` so that `a_p` is eventually fixed as well.
pub fn fixing_iterate(inst: &ProblemInstance, p: u64, period_bound: u32) -> Result<FixingIterate, ReductionError> {
    let mut gamma_period = 1u64;
    for (index, g) in inst.periodic_points.iter().enumerate() {
        let k = exact_period(&inst.map, g, period_bound).ok_or(ReductionError::NotPeriodic {
            index,
            bound: period_bound,
        })?;
        gamma_period = lcm_u64(gamma_period, k as u64);
    }
    let red = reduce_mod(inst, p, p)?;
    let summary = orbit_summary(&red.map, &red.point, &[]);
    // a_p lands on a cycle of length ℓ under f_p; under f_p^g its cycle has
    // length ℓ / gcd(ℓ, g)
    let point_cycle = summary.cycle / summary.cycle.gcd(&gamma_period);
    Ok(FixingIterate {
        gamma_period,
        point_cycle,
        k: lcm_u64(gamma_period, summary.cycle),
    })
}

/// Whether the exact orbit of `a` repeats within `bound` steps (or before
/// its height passes `height_bits`).
pub fn looks_preperiodic(map: &PolyMap, a: &[BigRational], bound: usize, height_bits: u64) -> bool {
    let mut seen: HashMap<Vec<BigRational>, usize> = HashMap::new();
    let mut y = a.to_vec();
    for i in 0..bound {
        if seen.insert(y.clone(), i).is_some() {
            return true;
        }
        if y.iter().map(rational_height_bits).max().unwrap_or(0) > height_bits {
            return false;
        }
        y = map.evaluate(&y);
    }
    false
}

/// Exact `a, f(a), ...` as integers when everything is integral.
pub fn integral_point(x: &[BigRational]) -> Option<Vec<BigInt>> {
    x.iter().map(|q| q.is_integer().then(|| q.numer().clone())).collect()
}

pub fn to_u64_point(x: &[BigInt]) -> Option<Vec<u64>> {
    x.iter().map(|v| if v.is_negative() { None } else { v.to_u64() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{int, rat};

    fn one_var(terms: &[(u32, i64)]) -> PolyMap {
        PolyMap::new(vec![Polynomial::from_int_terms(
            1,
            &terms.iter().map(|(e, c)| (std::slice::from_ref(e), *c)).collect::<Vec<_>>(),
        )])
    }

    fn rmap(p: u64, terms: &[(u32, u64)]) -> ResidueMap {
        ResidueMap::new(p, vec![ResiduePoly::new(p, terms.iter().map(|(e, c)| (vec![*e], *c)).collect())])
    }

    fn inst(map: PolyMap, a: i64, gammas: &[i64]) -> ProblemInstance {
        ProblemInstance::new(map, vec![int(a)], vec![], gammas.iter().map(|g| vec![int(*g)]).collect()).unwrap()
    }

    #[test]
    fn bad_prime_examples() {
        let x2p1 = one_var(&[(2, 1), (0, 1)]);
        assert!(bad_primes(&inst(x2p1, 0, &[]), 50, 64).primes.is_empty());
        let half = PolyMap::new(vec![Polynomial::from_terms(1, vec![(vec![2], rat(1, 2))])]);
        let i = ProblemInstance::new(half, vec![int(0)], vec![], vec![]).unwrap();
        assert!(bad_primes(&i, 50, 64).contains(2));
        let sq = one_var(&[(2, 1)]);
        let b = bad_primes(&inst(sq, 3, &[1]), 50, 64);
        assert!(b.contains(2));
        assert!(!b.contains(3));
    }

    #[test]
    fn reduction_examples() {
        let f = PolyMap::new(vec![Polynomial::from_terms(1, vec![(vec![1], rat(3, 2)), (vec![0], rat(1, 2))])]);
        let i = ProblemInstance::new(f, vec![int(7)], vec![], vec![]).unwrap();
        let r = reduce(&i, 5, &BadPrimeSet::default()).unwrap();
        assert_eq!(r.map.apply(&[0]), vec![3]);
        assert_eq!(r.map.apply(&[1]), vec![2]);
        let g = PolyMap::new(vec![Polynomial::variable(2, 0), Polynomial::variable(2, 1)]);
        let i = ProblemInstance::new(g, vec![int(7), int(-1)], vec![], vec![]).unwrap();
        assert_eq!(reduce(&i, 5, &BadPrimeSet::default()).unwrap().point, vec![2, 4]);
        assert!(matches!(reduce(&i, 4, &BadPrimeSet::default()), Err(ReductionError::BadPrime(4))));
    }

    #[test]
    fn orbit_examples() {
        let s = orbit_summary(&rmap(3, &[(2, 1), (0, 1)]), &[0], &[vec![2]]);
        assert_eq!((s.tail, s.cycle), (2, 1));
        assert_eq!(s.first_hits, vec![Some(2)]);
        let s = orbit_summary(&rmap(5, &[(2, 1), (0, 1)]), &[0], &[]);
        assert_eq!((s.tail, s.cycle), (0, 3));
        let s = orbit_summary(&rmap(7, &[(1, 1)]), &[4], &[]);
        assert_eq!((s.tail, s.cycle), (0, 1));
    }

    #[test]
    fn periodic_points_examples() {
        let f = rmap(5, &[(2, 1), (0, 1)]);
        let v = ResiduePoly::new(5, vec![(vec![1], 1), (vec![0], 2)]);
        assert!(periodic_points_on_v(&f, &[v], 1 << 24).unwrap().is_empty());
        let mut all = periodic_points_on_v(&f, &[], 1 << 24).unwrap();
        all.sort();
        assert_eq!(all, vec![vec![0], vec![1], vec![2]]);
        let id = rmap(7, &[(1, 1)]);
        let pt = ResiduePoly::new(7, vec![(vec![1], 1), (vec![0], 7 - 3)]);
        assert_eq!(periodic_points_on_v(&id, &[pt], 1 << 24).unwrap(), vec![vec![3]]);
    }

    #[test]
    fn depth_examples() {
        let f = rmap(5, &[(2, 1), (0, 1)]);
        assert_eq!(first_hit_depth(&f, &[3], 1 << 24).unwrap(), HitDepth::Depth(0));
        assert_eq!(first_hit_depth(&f, &[0], 1 << 24).unwrap(), HitDepth::Periodic);
        let zero = rmap(3, &[(1, 3)]);
        assert_eq!(first_hit_depth(&zero, &[0], 1 << 24).unwrap(), HitDepth::Periodic);
        assert!(matches!(first_hit_depth(&f, &[3], 4), Err(ReductionError::GuardExceeded { .. })));
    }

    #[test]
    fn avoidance_examples() {
        let x2p1 = one_var(&[(2, 1), (0, 1)]);
        let i = inst(x2p1.clone(), 0, &[]);
        let mut i3 = i.clone();
        i3.periodic_points = vec![vec![int(3)]];
        let s = avoidance_search(&i3, 5, 5, &BadPrimeSet::default(), 1 << 24);
        assert_eq!(s.certificates[0].verdict, CertificateVerdict::Certified);
        assert_eq!(s.certificates[0].bound, 1);
        let s = avoidance_search(&i3, 3, 3, &BadPrimeSet::default(), 1 << 24);
        assert_eq!(s.certificates[0].bound, 1);
        let sq = inst(one_var(&[(2, 1)]), 3, &[0]);
        let s = avoidance_search(&sq, 3, 30, &BadPrimeSet::default(), 1 << 24);
        assert!(s.certificates.iter().all(|c| c.verdict == CertificateVerdict::FailedPeriodic));
        let s = avoidance_search(&i, 3, 20, &BadPrimeSet::default(), 1 << 24);
        assert!(s.certificates.iter().all(|c| c.verdict == CertificateVerdict::Certified && c.bound == 0));
    }

    #[test]
    fn window_examples() {
        // x^2 mod 7: 3 has no preimage, 2 lies on the cycle 2 -> 4 -> 2
        let sq = rmap(7, &[(2, 1)]);
        assert!(verify_window(&sq, &[vec![3]], 1, 1 << 24).unwrap());
        assert!(!verify_window(&sq, &[vec![3]], 0, 1 << 24).unwrap());
        assert!(!verify_window(&sq, &[vec![2]], 40, 1 << 24).unwrap());
        // x^2 + 1 mod 5 has image {0, 1, 2}, so 3 is hit only at m = 0
        let f = rmap(5, &[(2, 1), (0, 1)]);
        let cert = certify_targets(&f, 5, &[vec![3]], 1 << 24);
        assert!(verify_window(&f, &[vec![3]], cert.bound, 1 << 24).unwrap());
        assert!(!verify_window(&f, &[vec![3]], cert.bound - 1, 1 << 24).unwrap());
    }

    #[test]
    fn fixing_iterate_examples() {
        let x2 = inst(one_var(&[(2, 1)]), 3, &[1]);
        assert_eq!(fixing_iterate(&x2, 5, 64).unwrap().gamma_period, 1);
        let neg = inst(one_var(&[(1, -1)]), 3, &[1]);
        assert_eq!(fixing_iterate(&neg, 5, 64).unwrap().gamma_period, 2);
        // a = 0 lies on the 3-cycle 0 -> 1 -> 2 -> 0 of x^2 + 1 mod 5
        let x2p1 = inst(one_var(&[(2, 1), (0, 1)]), 0, &[]);
        assert_eq!(fixing_iterate(&x2p1, 5, 64).unwrap().k, 3);
        let notper = inst(one_var(&[(2, 1)]), 3, &[2]);
        assert!(matches!(fixing_iterate(&notper, 5, 64), Err(ReductionError::NotPeriodic { index: 0, .. })));
    }

    #[test]
    fn rejects_constant_coordinates() {
        let c = PolyMap::new(vec![Polynomial::constant(1, int(4))]);
        assert!(matches!(
            ProblemInstance::new(c, vec![int(0)], vec![], vec![]),
            Err(ReductionError::ConstantCoordinate(0))
        ));
    }
}
