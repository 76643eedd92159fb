//! Conjugation of `f` near the orbit of `a` into a local model over `Z_p`:
//! iterate replacement so the orbit is periodic mod `p^2`, translation by
//! the canonical lift `η`, scaling by `p`, and a final iterate making the
//! linear part idempotent mod `p`.

use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ModMatrix, PadicMatrix};
use crate::padic::{
    compose_map, PadicContext, PadicError, PadicScalar, PadicVector, PrecisionLedger, TruncatedSeries, Valuation,
};
use crate::poly::rational_to_biguint_mod;
use crate::reduction::{brent, looks_preperiodic, reduce_mod, ProblemInstance, ReductionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizationError {
    #[error("reduction failed: {0}")]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("the initial point is preperiodic (orbit repeats within {0} steps)")]
    Preperiodic(usize),
    #[error("orbit mod p^2 did not close within the enumeration guard {0}")]
    GuardExceeded(u64),
    #[error("total iterate {k_total} exceeds the cap {cap}")]
    IterateCap { k_total: u64, cap: u64 },
    #[error("translation left constant term {coord} with valuation {valuation} < 2; η is not fixed mod p^2")]
    TranslatePostcondition { coord: usize, valuation: Valuation },
    #[error("p-scaling needs constant terms of valuation >= 2 (coordinate {coord} has {valuation})")]
    PiScalePrecondition { coord: usize, valuation: Valuation },
    #[error("series work budget exhausted even at precision 1")]
    BudgetExhausted,
    #[error("local model invariant violated: {0}")]
    Invariant(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub enumeration_guard: u64,
    pub k_total_cap: u64,
    /// Largest number of monomials for which `f^k` is composed without
    /// degree truncation.
    pub degree_guard: u64,
    /// Upper bound on coefficient multiplications spent building series.
    pub series_budget: u64,
    pub preperiodic_bound: usize,
    pub preperiodic_height_bits: u64,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            enumeration_guard: crate::reduction::DEFAULT_ENUMERATION_GUARD,
            k_total_cap: 10_000,
            degree_guard: 4096,
            series_budget: 400_000_000,
            preperiodic_bound: 64,
            preperiodic_height_bits: 1 << 16,
        }
    }
}

/// Tail `m0` and cycle length `k` of the orbit of `a` mod `p^2`.
pub fn stabilize_orbit(inst: &ProblemInstance, p: u64, guard: u64) -> Result<(u64, u64), NormalizationError> {
    let red = reduce_mod(inst, p, p * p)?;
    let mut steps = 0u64;
    let mut scratch = Vec::new();
    let mut overflow = false;
    let (tail, cycle) = brent(&red.point, |y: &Vec<u64>| {
        steps += 1;
        if steps > guard.saturating_mul(3) {
            // force termination; reported below
            overflow = true;
            return y.clone();
        }
        let mut out = vec![0; red.map.dim()];
        red.map.apply_into(y, &mut out, &mut scratch);
        out
    });
    if overflow {
        return Err(NormalizationError::GuardExceeded(guard));
    }
    Ok((cycle, tail))
}

/// `F(x + η) - η`, truncated to total degree `out_degree`. Constant terms
/// must come out divisible by `p^2`.
pub fn translate(f: &[TruncatedSeries], eta: &[BigUint], out_degree: u32) -> Result<Vec<TruncatedSeries>, NormalizationError> {
    let ctx = f[0].context().clone();
    let n = f.len();
    let args: Vec<TruncatedSeries> = (0..n)
        .map(|i| {
            TruncatedSeries::variable(&ctx, n, out_degree, i)
                .try_add(&TruncatedSeries::constant(&ctx, n, out_degree, &eta[i]))
        })
        .collect::<Result<_, _>>()?;
    let moved = compose_map(f, &args)?;
    let mut out = Vec::with_capacity(n);
    for (i, s) in moved.into_iter().enumerate() {
        let s = s.try_sub(&TruncatedSeries::constant(&ctx, n, out_degree, &eta[i]))?;
        let v = s.constant_term().valuation();
        if v < Valuation::Finite(2) {
            return Err(NormalizationError::TranslatePostcondition { coord: i, valuation: v });
        }
        out.push(s);
    }
    Ok(out)
}

/// `F(p x) / p`: the constant term is divided by `p` and degree-`d`
/// coefficients are multiplied by `p^(d-1)`. The result lives one digit
/// lower than the input.
pub fn pi_scale(f: &[TruncatedSeries], ledger: &mut PrecisionLedger) -> Result<Vec<TruncatedSeries>, NormalizationError> {
    let ctx = f[0].context().clone();
    let low = ctx.with_precision(ctx.precision().saturating_sub(1).max(1))?;
    let p = BigUint::from(ctx.prime());
    let mut out = Vec::with_capacity(f.len());
    for (i, s) in f.iter().enumerate() {
        let v = s.constant_term().valuation();
        if v < Valuation::Finite(2) {
            return Err(NormalizationError::PiScalePrecondition { coord: i, valuation: v });
        }
        out.push(s.map_terms(&low, |m, c| {
            let d = m.degree();
            if d == 0 {
                c / &p
            } else {
                c * ctx.pow_p(d - 1)
            }
        }));
    }
    ledger.record("scale-by-p", 1);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdempotentCertificate {
    pub k: u64,
    pub matrix: ModMatrix,
    pub power: ModMatrix,
}

impl IdempotentCertificate {
    /// `(A^k)^2 = A^k`.
    pub fn verify(&self) -> bool {
        self.power.is_idempotent() && self.matrix.pow(self.k) == self.power
    }
}

/// Least `k >= 1` with `A^(2k) = A^k`. The powers `A, A^2, ...` are
/// eventually periodic with tail `μ` and period `λ`; `A^(2k) = A^k` exactly
/// when `k > μ` and `λ | k`.
pub fn idempotent_power(a: &ModMatrix) -> IdempotentCertificate {
    let (mu, lam) = brent(a, |x: &ModMatrix| x.mul(a));
    let k = (mu + 1).div_ceil(lam) * lam;
    IdempotentCertificate {
        k,
        matrix: a.clone(),
        power: a.pow(k),
    }
}

/// Minimum valuation of the coefficients of `F - E x`, capped at the
/// series precision.
pub fn congruence_exponent(series: &[TruncatedSeries], e: &PadicMatrix) -> u32 {
    let ctx = series[0].context().clone();
    let n = series.len();
    let mut c = ctx.precision();
    for (i, s) in series.iter().enumerate() {
        let mut lin = TruncatedSeries::zero(&ctx, n, s.max_degree());
        for j in 0..n {
            let mut ex = vec![0u32; n];
            ex[j] = 1;
            lin.add_term(crate::padic::Monomial::new(&ex), e.entry(i, j).clone());
        }
        let diff = s.try_sub(&lin).expect("same ring");
        c = c.min(diff.gauss_valuation().capped(ctx.precision()));
    }
    c
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transform {
    /// Replace `a` by `f^forward(a)` and `f` by `f^k`.
    Iterate { k: u64, forward: u64 },
    Translate { eta: Vec<String> },
    ScaleByP { prime: u64 },
    /// Further iterate making the linear part idempotent mod `p`.
    IdempotentIterate { k: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompositionRoute {
    /// `f^k` composed in full, then translated and scaled.
    Untruncated,
    /// Orbit of the chart `η + p x` composed in truncated series.
    Chart,
    /// Supplied directly.
    Explicit,
}

/// The pointwise chart map `x -> (f^steps(η + p x) - η) / p`.
#[derive(Clone, Debug)]
struct Chart {
    lifted: Arc<PadicContext>,
    f: Vec<TruncatedSeries>,
    eta: Vec<BigUint>,
    steps: u64,
}

impl Chart {
    fn apply(&self, x: &PadicVector, out_ctx: &Arc<PadicContext>) -> PadicVector {
        let modulus = self.lifted.modulus();
        let p = self.lifted.prime();
        let mut y: Vec<BigUint> = x
            .coords()
            .iter()
            .zip(&self.eta)
            .map(|(xi, e)| (xi.residue() * p + e) % modulus)
            .collect();
        for _ in 0..self.steps {
            y = self.f.iter().map(|q| q.evaluate_residues(&y)).collect();
        }
        let pb = BigUint::from(p);
        let residues = y
            .iter()
            .zip(&self.eta)
            .map(|(yi, e)| {
                let diff = (yi + modulus - e) % modulus;
                debug_assert!((&diff % &pb).is_zero(), "chart image leaves the disk");
                diff / &pb
            })
            .collect();
        PadicVector::from_residues(out_ctx, residues)
    }
}

/// The local model: `F` over `Z_p`, its base point `a'`, the linear data
/// and the transforms relating it to `(f, a)`.
#[derive(Clone, Debug)]
pub struct LocalModel {
    ctx: Arc<PadicContext>,
    series: Vec<TruncatedSeries>,
    base_point: PadicVector,
    linear_part: PadicMatrix,
    linear_mod_p: ModMatrix,
    idempotent: PadicMatrix,
    c: u32,
    transforms: Vec<Transform>,
    m0: u64,
    k: u64,
    k_total: u64,
    eta: Vec<BigUint>,
    route: CompositionRoute,
    certificate: Option<IdempotentCertificate>,
    chart: Option<Chart>,
    ledger: PrecisionLedger,
}

/// Summary record of a model, for reports and replay.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalModelRecord {
    pub prime: u64,
    pub precision: u32,
    pub series_precision: u32,
    pub m0: u64,
    pub k: u64,
    pub k_total: u64,
    pub eta: Vec<String>,
    pub base_point: Vec<String>,
    pub linear_mod_p: Vec<Vec<u64>>,
    pub c: u32,
    pub route: CompositionRoute,
    pub transforms: Vec<Transform>,
    pub ledger: PrecisionLedger,
}

fn linear_data(series: &[TruncatedSeries]) -> (PadicMatrix, ModMatrix, PadicMatrix) {
    let lin = PadicMatrix::linear_part(series);
    let a = lin.reduce_mod_p();
    let ctx = series[0].context();
    let e = if a.is_idempotent() {
        PadicMatrix::from_mod_matrix(ctx, &a).idempotent_lift()
    } else {
        PadicMatrix::from_mod_matrix(ctx, &a)
    };
    (lin, a, e)
}

impl LocalModel {
    /// A model given directly by its series and base point; the model map
    /// is series evaluation.
    pub fn from_parts(series: Vec<TruncatedSeries>, base_point: PadicVector) -> Result<Self, NormalizationError> {
        let n = series.len();
        if n == 0 || base_point.len() != n || series.iter().any(|s| s.nvars() != n) {
            return Err(PadicError::DimensionMismatch(n, base_point.len()).into());
        }
        let ctx = base_point.get(0).context().clone();
        let (lin, a, e) = linear_data(&series);
        let c = congruence_exponent(&series, &e);
        let certificate = Some(idempotent_power(&a));
        Ok(LocalModel {
            ctx,
            series,
            base_point,
            linear_part: lin,
            linear_mod_p: a,
            idempotent: e,
            c,
            transforms: Vec::new(),
            m0: 0,
            k: 1,
            k_total: 1,
            eta: vec![BigUint::zero(); n],
            route: CompositionRoute::Explicit,
            certificate,
            chart: None,
            ledger: PrecisionLedger::default(),
        })
    }

    pub fn context(&self) -> &Arc<PadicContext> {
        &self.ctx
    }

    pub fn prime(&self) -> u64 {
        self.ctx.prime()
    }

    pub fn dim(&self) -> usize {
        self.series.len()
    }

    pub fn series(&self) -> &[TruncatedSeries] {
        &self.series
    }

    pub fn series_precision(&self) -> u32 {
        self.series[0].context().precision()
    }

    pub fn base_point(&self) -> &PadicVector {
        &self.base_point
    }

    pub fn linear_part(&self) -> &PadicMatrix {
        &self.linear_part
    }

    pub fn linear_mod_p(&self) -> &ModMatrix {
        &self.linear_mod_p
    }

    /// The idempotent `E` over `Z/p^J` lifting the linear part mod `p`.
    pub fn idempotent(&self) -> &PadicMatrix {
        &self.idempotent
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn m0(&self) -> u64 {
        self.m0
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn k_total(&self) -> u64 {
        self.k_total
    }

    pub fn eta(&self) -> &[BigUint] {
        &self.eta
    }

    pub fn route(&self) -> CompositionRoute {
        self.route
    }

    pub fn certificate(&self) -> Option<&IdempotentCertificate> {
        self.certificate.as_ref()
    }

    pub fn ledger(&self) -> &PrecisionLedger {
        &self.ledger
    }

    /// Original orbit index of model iterate `n`.
    pub fn original_index(&self, n: u64) -> u64 {
        self.m0 + n * self.k_total
    }

    /// `F(x)` at precision `K`.
    pub fn apply(&self, x: &PadicVector) -> Result<PadicVector, NormalizationError> {
        match &self.chart {
            Some(chart) => Ok(chart.apply(x, &self.ctx)),
            None => self.apply_series(x),
        }
    }

    /// Evaluation of the stored series, at the series precision.
    pub fn apply_series(&self, x: &PadicVector) -> Result<PadicVector, NormalizationError> {
        let sctx = self.series[0].context();
        let xs = x.to_context(sctx);
        let coords = self
            .series
            .iter()
            .map(|s| s.evaluate(&xs))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PadicVector::new(coords)?.to_context(&self.ctx))
    }

    /// `a', F(a'), ..., F^n(a')`.
    pub fn orbit(&self, n: usize) -> Result<Vec<PadicVector>, NormalizationError> {
        let mut out = Vec::with_capacity(n + 1);
        let mut x = self.base_point.clone();
        out.push(x.clone());
        for _ in 0..n {
            x = self.apply(&x)?;
            out.push(x.clone());
        }
        Ok(out)
    }

    /// `T(x) = η + p x`, as residues modulo `p^(K+1)`.
    pub fn to_original(&self, x: &PadicVector) -> Vec<BigUint> {
        let lifted = self.ctx.with_precision(self.ctx.precision() + 1).expect("valid precision");
        x.coords()
            .iter()
            .zip(&self.eta)
            .map(|(xi, e)| (xi.residue() * self.ctx.prime() + e) % lifted.modulus())
            .collect()
    }

    /// Checks every invariant a built model must satisfy.
    pub fn check_invariants(&self) -> Result<(), NormalizationError> {
        let fail = |s: String| Err(NormalizationError::Invariant(s));
        if self.base_point.valuation() < Valuation::Finite(1) {
            return fail("base point is not in p Z_p^N".into());
        }
        for (i, s) in self.series.iter().enumerate() {
            if s.constant_term().valuation() < Valuation::Finite(1) {
                return fail(format!("constant term of coordinate {i} is a unit"));
            }
        }
        if !self.linear_mod_p.is_idempotent() {
            return fail("linear part is not idempotent mod p".into());
        }
        if self.c < 1 {
            return fail("congruence exponent below 1".into());
        }
        if let Some(cert) = &self.certificate {
            if !cert.verify() {
                return fail("idempotent certificate does not verify".into());
            }
        }
        Ok(())
    }

    pub fn record(&self) -> LocalModelRecord {
        LocalModelRecord {
            prime: self.prime(),
            precision: self.ctx.precision(),
            series_precision: self.series_precision(),
            m0: self.m0,
            k: self.k,
            k_total: self.k_total,
            eta: self.eta.iter().map(|e| e.to_string()).collect(),
            base_point: self.base_point.residues().iter().map(|r| r.to_string()).collect(),
            linear_mod_p: self.linear_mod_p.rows(),
            c: self.c,
            route: self.route,
            transforms: self.transforms.clone(),
            ledger: self.ledger.clone(),
        }
    }
}

/// `C(J + 2N, 2N)`: monomial pairs in one truncated product.
fn pair_count(j: u32, n: usize) -> u64 {
    let b = binomial(j as u128 + 2 * n as u128, 2 * n as u128);
    b.min(u64::MAX as u128) as u64
}

/// `C(degree + N, N)`, saturating at `u128::MAX`.
fn monomial_count(degree: u128, n: usize) -> u128 {
    // the running product after step i is C(degree + i, i), so each division is exact
    let mut acc: u128 = 1;
    for i in 1..=n as u128 {
        let Some(top) = degree.checked_add(i).and_then(|t| acc.checked_mul(t)) else {
            return u128::MAX;
        };
        acc = top / i;
    }
    acc
}

/// Advances the chart series `S_j = f^j(η + p x)` by `steps` iterations.
fn advance_chart(f: &[TruncatedSeries], s: Vec<TruncatedSeries>, steps: u64) -> Result<Vec<TruncatedSeries>, PadicError> {
    let mut s = s;
    for _ in 0..steps {
        s = compose_map(f, &s)?;
    }
    Ok(s)
}

/// `(S - η) / p`, one digit lower.
fn chart_quotient(s: &[TruncatedSeries], eta: &[BigUint], ledger: &mut PrecisionLedger) -> Result<Vec<TruncatedSeries>, NormalizationError> {
    let ctx = s[0].context().clone();
    let low = ctx.with_precision(ctx.precision() - 1)?;
    let n = s.len();
    let p = BigUint::from(ctx.prime());
    let mut out = Vec::with_capacity(n);
    for (i, si) in s.iter().enumerate() {
        let shifted = si.try_sub(&TruncatedSeries::constant(&ctx, n, si.max_degree(), &eta[i]))?;
        let v = shifted.constant_term().valuation();
        if v < Valuation::Finite(2) {
            return Err(NormalizationError::TranslatePostcondition { coord: i, valuation: v });
        }
        if shifted.gauss_valuation() < Valuation::Finite(1) {
            return Err(NormalizationError::Invariant(format!("chart image of coordinate {i} leaves the residue disk")));
        }
        out.push(shifted.map_terms(&low, |_, c| c / &p));
    }
    ledger.record("chart-quotient", 1);
    Ok(out)
}

/// Runs the full normalization at prime `p` and precision `K`.
pub fn build_local_model(
    inst: &ProblemInstance,
    p: u64,
    precision: u32,
    cfg: &NormalizationConfig,
) -> Result<LocalModel, NormalizationError> {
    if looks_preperiodic(&inst.map, &inst.initial_point, cfg.preperiodic_bound, cfg.preperiodic_height_bits) {
        return Err(NormalizationError::Preperiodic(cfg.preperiodic_bound));
    }
    let ctx = PadicContext::new(p, precision)?;
    let n = inst.dim();
    let (k, m0) = stabilize_orbit(inst, p, cfg.enumeration_guard)?;
    let mut ledger = PrecisionLedger::default();

    // f^{m0}(a) mod p^{K+1} and its canonical lift mod p^2
    let lifted = ctx.with_precision(precision + 1)?;
    let mut y: Vec<BigUint> = inst
        .initial_point
        .iter()
        .map(|x| rational_to_biguint_mod(x, lifted.modulus()).ok_or(PadicError::NotIntegral))
        .collect::<Result<_, _>>()?;
    let deg = inst.map.degree().max(1);
    let f_point = inst.map.to_series(&lifted, deg)?;
    for _ in 0..m0 {
        y = f_point.iter().map(|q| q.evaluate_residues(&y)).collect();
    }
    let p2 = BigUint::from(p * p);
    let eta: Vec<BigUint> = y.iter().map(|v| v % &p2).collect();
    let pb = BigUint::from(p);
    let base_point = PadicVector::from_residues(
        &ctx,
        y.iter()
            .zip(&eta)
            .map(|(v, e)| (v + lifted.modulus() - e) % lifted.modulus() / &pb)
            .collect(),
    );
    ledger.record("base-point", 1);

    // series precision J under the work budget
    let mults = inst.map.multiplication_count().max(1);
    let work = |j: u32, steps: u64| steps.saturating_mul(mults).saturating_mul(pair_count(j, n));
    let j_for = |steps: u64| -> Option<u32> { (1..=precision).rev().find(|&j| work(j, steps) <= cfg.series_budget) };

    // stage 1: F2 = pi_scale(translate(f^k, η)) with A its linear part mod p
    let j1 = j_for(k).ok_or(NormalizationError::BudgetExhausted)?;
    let sctx1 = ctx.with_precision(j1 + 1)?;
    let f_series = inst.map.to_series(&sctx1, deg)?;
    let chart_start = |sctx: &Arc<PadicContext>, j: u32| -> Result<Vec<TruncatedSeries>, PadicError> {
        (0..n)
            .map(|i| {
                TruncatedSeries::variable(sctx, n, j, i)
                    .scale(&BigUint::from(p))
                    .try_add(&TruncatedSeries::constant(sctx, n, j, &eta[i]))
            })
            .collect()
    };
    let full_degree = (deg as u128).checked_pow(k.min(128) as u32).filter(|_| k <= 128);
    let untruncated = full_degree.is_some_and(|d| monomial_count(d, n) <= cfg.degree_guard as u128);
    let mut chart_state = None;
    let f2 = if untruncated {
        let d = full_degree.unwrap() as u32;
        let f_full = inst.map.to_series(&sctx1, d)?;
        let id: Vec<TruncatedSeries> = (0..n).map(|i| TruncatedSeries::variable(&sctx1, n, d, i)).collect();
        let fk = advance_chart(&f_full, id, k)?;
        let moved = translate(&fk, &eta, j1)?;
        pi_scale(&moved, &mut ledger)?
    } else {
        let s = advance_chart(&f_series, chart_start(&sctx1, j1)?, k)?;
        let q = chart_quotient(&s, &eta, &mut ledger)?;
        chart_state = Some(s);
        q
    };
    let a2 = PadicMatrix::linear_part(&f2).reduce_mod_p();
    let cert = idempotent_power(&a2);
    let k2 = cert.k;
    let k_total = k.saturating_mul(k2);
    if k_total > cfg.k_total_cap {
        return Err(NormalizationError::IterateCap {
            k_total,
            cap: cfg.k_total_cap,
        });
    }

    // stage 2: the final model F over k_total steps
    let (series, route) = if k2 == 1 {
        (f2, if untruncated { CompositionRoute::Untruncated } else { CompositionRoute::Chart })
    } else {
        let j = j_for(k_total).ok_or(NormalizationError::BudgetExhausted)?;
        let s = match chart_state.filter(|_| j == j1) {
            Some(s) => advance_chart(&f_series, s, k_total - k)?,
            None => {
                let sctx = ctx.with_precision(j + 1)?;
                let fs = inst.map.to_series(&sctx, deg)?;
                advance_chart(&fs, chart_start(&sctx, j)?, k_total)?
            }
        };
        (chart_quotient(&s, &eta, &mut ledger)?, CompositionRoute::Chart)
    };
    if series[0].context().precision() < precision {
        ledger.record("series-truncation", precision - series[0].context().precision());
    }

    let (lin, a, e) = linear_data(&series);
    let c = congruence_exponent(&series, &e);
    let transforms = vec![
        Transform::Iterate { k, forward: m0 },
        Transform::Translate {
            eta: eta.iter().map(|v| v.to_string()).collect(),
        },
        Transform::ScaleByP { prime: p },
        Transform::IdempotentIterate { k: k2 },
    ];
    let model = LocalModel {
        ctx: ctx.clone(),
        series,
        base_point,
        linear_part: lin,
        linear_mod_p: a,
        idempotent: e,
        c,
        transforms,
        m0,
        k,
        k_total,
        eta: eta.clone(),
        route,
        certificate: Some(cert),
        chart: Some(Chart {
            lifted,
            f: f_point,
            eta,
            steps: k_total,
        }),
        ledger,
    };
    model.check_invariants()?;
    Ok(model)
}

/// Model iterate `n` recomputed through exact rational iteration of `f`:
/// `(f^(m0 + n k_total)(a) - η) / p` at precision `K`.
pub fn model_point_from_exact(model: &LocalModel, inst: &ProblemInstance, n: u64) -> Result<PadicVector, NormalizationError> {
    let mut x = inst.initial_point.clone();
    for _ in 0..model.original_index(n) {
        x = inst.map.evaluate(&x);
    }
    let lifted = model.ctx.with_precision(model.ctx.precision() + 1)?;
    let p = BigUint::from(model.prime());
    let coords = x
        .iter()
        .zip(&model.eta)
        .map(|(v, e)| {
            let r = rational_to_biguint_mod(v, lifted.modulus()).ok_or(PadicError::NotIntegral)?;
            Ok(PadicScalar::from_residue(&model.ctx, (r + lifted.modulus() - e) % lifted.modulus() / &p))
        })
        .collect::<Result<Vec<_>, NormalizationError>>()?;
    Ok(PadicVector::new(coords)?)
}
