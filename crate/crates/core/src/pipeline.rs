//! Stage orchestration: primes, normalization, interpolation, returns,
//! gaps, density. A run never panics on bad input; the first failing stage
//! is recorded in the [`RunReport`] and mapped to an exit code.
//!
//! Machine output is one JSON object per line, tagged by `"record"`. The
//! same lines are accepted back by `--replay`.

use std::fmt;
use std::io::{self, BufRead, Write};

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gap::{
    check_gaps, compute_returns, density_report, gap_report, localize_orbit, DensityReport, GapBound, GapError,
    GapReport, GapVerdict, OrbitLocalization, PairCheck, ReturnSet,
};
use crate::interpolation::{
    build_interpolant, constancy_test, verify_compatibility, verify_error_bound, ApproxInterpolant,
    CompatibilityReport, Constancy, ErrorBoundReport, InterpolantRecord, InterpolationError,
};
use crate::normalization::{build_local_model, LocalModel, LocalModelRecord, NormalizationConfig, NormalizationError};
use crate::padic::{PadicContext, PadicScalar};
use crate::reduction::{
    avoidance_search, bad_primes, orbit_summary, reduce_mod, AvoidanceSummary, BadPrimeSet, ProblemInstance,
    ReductionError, DEFAULT_ENUMERATION_GUARD,
};

/// Certified primes tried before normalization is declared failed.
pub const MAX_PRIME_ATTEMPTS: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub prime_range: (u64, u64),
    pub precision: u32,
    pub n_max: u64,
    pub mahler_terms: usize,
    pub screen_primes: usize,
    /// Height budget (bits) for exact certification of returns.
    pub exact_budget: u64,
    pub density_m: u32,
    pub period_bound: u32,
    pub enumeration_guard: u64,
    pub k_total_cap: u64,
    pub degree_guard: u64,
    pub series_budget: u64,
    pub slack_constant: u32,
    pub initial_level: u32,
    pub compatibility_samples: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let norm = NormalizationConfig::default();
        RunConfig {
            prime_range: (3, 50),
            precision: 64,
            n_max: 100_000,
            mahler_terms: 64,
            screen_primes: 8,
            exact_budget: 1 << 20,
            density_m: 1,
            period_bound: 64,
            enumeration_guard: DEFAULT_ENUMERATION_GUARD,
            k_total_cap: norm.k_total_cap,
            degree_guard: norm.degree_guard,
            series_budget: norm.series_budget,
            slack_constant: 2,
            initial_level: 1,
            compatibility_samples: 20,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Every run parameter must be positive; returns the offending field.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive: [(&'static str, u64); 13] = [
            ("precision", self.precision as u64),
            ("n_max", self.n_max),
            ("mahler_terms", self.mahler_terms as u64),
            ("screen_primes", self.screen_primes as u64),
            ("exact_budget", self.exact_budget),
            ("density_m", self.density_m as u64),
            ("period_bound", self.period_bound as u64),
            ("enumeration_guard", self.enumeration_guard),
            ("k_total_cap", self.k_total_cap),
            ("degree_guard", self.degree_guard),
            ("series_budget", self.series_budget),
            ("initial_level", self.initial_level as u64),
            ("compatibility_samples", self.compatibility_samples as u64),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err((name, "must be positive".into()));
        }
        let (lo, hi) = self.prime_range;
        if lo == 0 || lo > hi {
            return Err(("prime_range", format!("[{lo}, {hi}] is not a positive range")));
        }
        if self.enumeration_guard > u32::MAX as u64 {
            return Err(("enumeration_guard", "must fit in 32 bits".into()));
        }
        Ok(())
    }

    pub fn normalization(&self) -> NormalizationConfig {
        NormalizationConfig {
            enumeration_guard: self.enumeration_guard,
            k_total_cap: self.k_total_cap,
            degree_guard: self.degree_guard,
            series_budget: self.series_budget,
            ..NormalizationConfig::default()
        }
    }

    /// Threshold for `F(G(n)) = G(n+1)` at the sampled points.
    pub fn compatibility_threshold(&self) -> u32 {
        self.precision.saturating_sub(2)
    }
}

// ---------------------------------------------------------------------------
// failures

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Input,
    Primes,
    Avoidance,
    Normalization,
    Interpolation,
    Returns,
    Gaps,
    Density,
    Replay,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Input => "input",
            Stage::Primes => "primes",
            Stage::Avoidance => "avoidance",
            Stage::Normalization => "normalization",
            Stage::Interpolation => "interpolation",
            Stage::Returns => "returns",
            Stage::Gaps => "gaps",
            Stage::Density => "density",
            Stage::Replay => "replay",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    HypothesisViolation,
    InputError,
    PrecisionExhausted,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::HypothesisViolation => 1,
            FailureKind::InputError => 2,
            FailureKind::PrecisionExhausted => 3,
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::HypothesisViolation => "hypothesis violation",
            FailureKind::InputError => "input error",
            FailureKind::PrecisionExhausted => "precision or budget exhausted",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{stage} stage failed ({kind}): {message}")]
pub struct StageError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

impl StageError {
    pub fn new(stage: Stage, kind: FailureKind, message: impl Into<String>) -> Self {
        StageError {
            stage,
            kind,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

fn reduction_kind(e: &ReductionError) -> FailureKind {
    match e {
        ReductionError::GuardExceeded { .. } => FailureKind::PrecisionExhausted,
        ReductionError::NotPeriodic { .. } => FailureKind::HypothesisViolation,
        ReductionError::BadPrime(_) => FailureKind::HypothesisViolation,
        _ => FailureKind::InputError,
    }
}

fn normalization_kind(e: &NormalizationError) -> FailureKind {
    match e {
        NormalizationError::Reduction(r) => reduction_kind(r),
        NormalizationError::Preperiodic(_) => FailureKind::HypothesisViolation,
        _ => FailureKind::PrecisionExhausted,
    }
}

fn interpolation_kind(e: &InterpolationError) -> FailureKind {
    match e {
        InterpolationError::Model(m) => normalization_kind(m),
        InterpolationError::NotIdempotent | InterpolationError::ExponentTooSmall(_) => {
            FailureKind::HypothesisViolation
        }
        InterpolationError::RecordMismatch(..) => FailureKind::InputError,
        _ => FailureKind::PrecisionExhausted,
    }
}

fn gap_kind(e: &GapError) -> FailureKind {
    match e {
        GapError::PossiblePeriodicSubvariety { .. } | GapError::IdenticallyZero => FailureKind::HypothesisViolation,
        GapError::EmptyVariety => FailureKind::InputError,
        _ => FailureKind::PrecisionExhausted,
    }
}

// ---------------------------------------------------------------------------
// report pieces

/// Where a reported claim comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    ModularScreened,
    Sampled,
    Assumed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumption {
    pub name: String,
    pub provenance: Provenance,
    pub detail: String,
}

/// The orbit of `a mod p'` avoids every `γ_i mod p'` from the certified
/// bound on, checked on the full tail and cycle of the reduced orbit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitAvoidance {
    pub prime: u64,
    pub bound: u64,
    pub tail: u64,
    pub cycle: u64,
    pub first_hits: Vec<Option<u64>>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitAvoidanceReport {
    pub checks: Vec<OrbitAvoidance>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeAttempt {
    pub prime: u64,
    pub stage: Stage,
    /// `None` on success.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub prime: u64,
    pub precision: u32,
    pub error_bound: ErrorBoundReport,
    pub compatibility: CompatibilityReport,
    pub constancy: Constancy,
}

impl Certification {
    pub fn min_margin(&self) -> Option<i64> {
        self.error_bound.min_margin()
    }
}

/// A hand-written class for the gap check: members and the bound to test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticGaps {
    pub bound: GapBound,
    pub members: Vec<u64>,
    #[serde(default)]
    pub pairs: Vec<PairCheck>,
    #[serde(default)]
    pub verdict: Option<GapVerdict>,
}

/// One line of machine output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum Record {
    Config(RunConfig),
    BadPrimes(BadPrimeSet),
    Avoidance(AvoidanceSummary),
    OrbitAvoidance(OrbitAvoidanceReport),
    Attempt(PrimeAttempt),
    LocalModel(LocalModelRecord),
    Interpolant(InterpolantRecord),
    Certification(Certification),
    Returns(ReturnSet),
    Localization(OrbitLocalization),
    Gaps(GapReport),
    SyntheticGaps(SyntheticGaps),
    Density(DensityReport),
    Assumption(Assumption),
    Failure(StageError),
}

pub fn write_records<W: Write>(out: &mut W, records: &[Record]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads JSON lines; blank lines are skipped. Errors carry the line number.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<Record>, String> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| format!("line {}: {e}", i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub bad_primes: Option<BadPrimeSet>,
    pub avoidance: Option<AvoidanceSummary>,
    pub orbit_avoidance: Option<OrbitAvoidanceReport>,
    pub attempts: Vec<PrimeAttempt>,
    pub chosen_prime: Option<u64>,
    pub model: Option<LocalModelRecord>,
    pub interpolant: Option<InterpolantRecord>,
    pub certification: Option<Certification>,
    pub returns: Option<ReturnSet>,
    pub localization: Option<OrbitLocalization>,
    pub gaps: Option<GapReport>,
    pub synthetic: Vec<SyntheticGaps>,
    pub density: Option<DensityReport>,
    pub assumptions: Vec<Assumption>,
    pub failure: Option<StageError>,
}

impl RunReport {
    pub fn new(config: RunConfig) -> Self {
        RunReport {
            config,
            ..RunReport::default()
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, StageError::exit_code)
    }

    pub fn records(&self) -> Vec<Record> {
        let mut out = vec![Record::Config(self.config.clone())];
        out.extend(self.bad_primes.clone().map(Record::BadPrimes));
        out.extend(self.avoidance.clone().map(Record::Avoidance));
        out.extend(self.orbit_avoidance.clone().map(Record::OrbitAvoidance));
        out.extend(self.attempts.iter().cloned().map(Record::Attempt));
        out.extend(self.model.clone().map(Record::LocalModel));
        out.extend(self.interpolant.clone().map(Record::Interpolant));
        out.extend(self.certification.clone().map(Record::Certification));
        out.extend(self.returns.clone().map(Record::Returns));
        out.extend(self.localization.clone().map(Record::Localization));
        out.extend(self.gaps.clone().map(Record::Gaps));
        out.extend(self.synthetic.iter().cloned().map(Record::SyntheticGaps));
        out.extend(self.density.clone().map(Record::Density));
        out.extend(self.assumptions.iter().cloned().map(Record::Assumption));
        out.extend(self.failure.clone().map(Record::Failure));
        out
    }
}

/// Upstream artifacts found in a replay file (the last of each kind wins).
#[derive(Clone, Debug, Default)]
pub struct Replay {
    pub interpolant: Option<InterpolantRecord>,
    pub returns: Option<ReturnSet>,
    pub localization: Option<OrbitLocalization>,
    pub synthetic: Vec<SyntheticGaps>,
}

impl Replay {
    pub fn from_records(records: Vec<Record>) -> Self {
        let mut r = Replay::default();
        for rec in records {
            match rec {
                Record::Interpolant(i) => r.interpolant = Some(i),
                Record::Returns(s) => r.returns = Some(s),
                Record::Localization(l) => r.localization = Some(l),
                Record::SyntheticGaps(s) => r.synthetic.push(s),
                _ => {}
            }
        }
        r
    }
}

// ---------------------------------------------------------------------------
// stages

/// Deterministic p-adic sample points at the context precision.
pub fn padic_samples(ctx: &std::sync::Arc<PadicContext>, count: usize, seed: u64) -> Vec<PadicScalar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = ctx.modulus().bits().div_ceil(64) as usize + 1;
    (0..count)
        .map(|_| {
            let digits: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
            let mut x = BigUint::from(0u32);
            for d in digits {
                x = (x << 64u32) + BigUint::from(d);
            }
            PadicScalar::from_residue(ctx, x % ctx.modulus())
        })
        .collect()
}

/// Certifies a built interpolant against its model: error bound on
/// `0..=2 K_terms`, compatibility at seeded p-adic samples, constancy.
pub fn certify(g: &ApproxInterpolant, model: &LocalModel, cfg: &RunConfig) -> Result<Certification, InterpolationError> {
    let ctx = model.context();
    let samples: Vec<u64> = (0..=2 * g.terms() as u64).collect();
    let error_bound = verify_error_bound(g, model, &samples)?;
    let points = padic_samples(ctx, cfg.compatibility_samples, cfg.seed);
    let compatibility = verify_compatibility(g, model, &points, cfg.compatibility_threshold())?;
    let constancy = constancy_test(g, model, ctx.precision())?;
    Ok(Certification {
        prime: ctx.prime(),
        precision: ctx.precision(),
        error_bound,
        compatibility,
        constancy,
    })
}

/// Reduced-orbit check of the avoidance conclusion at every certified
/// prime: no target is hit at an iterate `>= M`.
pub fn orbit_avoidance(inst: &ProblemInstance, summary: &AvoidanceSummary) -> Result<OrbitAvoidanceReport, ReductionError> {
    let mut checks = Vec::new();
    for cert in summary.certified() {
        let red = reduce_mod(inst, cert.prime, cert.prime)?;
        let orbit = orbit_summary(&red.map, &red.point, &red.targets);
        let on_cycle = |hit: u64| hit >= orbit.tail;
        let holds = orbit
            .first_hits
            .iter()
            .all(|h| h.is_none_or(|m| m < cert.bound && !on_cycle(m)));
        checks.push(OrbitAvoidance {
            prime: cert.prime,
            bound: cert.bound,
            tail: orbit.tail,
            cycle: orbit.cycle,
            first_hits: orbit.first_hits,
            holds,
        });
    }
    let holds = checks.iter().all(|c| c.holds);
    Ok(OrbitAvoidanceReport { checks, holds })
}

/// Model and interpolant at the chosen prime, kept for later stages.
pub struct Fitted {
    pub model: LocalModel,
    pub interpolant: ApproxInterpolant,
}

pub struct Pipeline<'a> {
    pub inst: &'a ProblemInstance,
    pub report: RunReport,
    pub fitted: Option<Fitted>,
}

impl<'a> Pipeline<'a> {
    pub fn new(inst: &'a ProblemInstance, config: RunConfig) -> Self {
        let mut report = RunReport::new(config);
        report.assumptions.push(Assumption {
            name: "variety-irreducible".into(),
            provenance: Provenance::Assumed,
            detail: "irreducibility of V is not tested".into(),
        });
        Pipeline {
            inst,
            report,
            fitted: None,
        }
    }

    fn cfg(&self) -> &RunConfig {
        &self.report.config
    }

    /// Closes the run, recording the failure if any.
    pub fn finish(mut self, result: Result<(), StageError>) -> RunReport {
        if let Err(e) = result {
            self.report.failure = Some(e);
        }
        self.report
    }

    pub fn primes(&mut self) -> Result<(), StageError> {
        let (lo, hi) = self.cfg().prime_range;
        let guard = self.cfg().enumeration_guard;
        let bad = bad_primes(self.inst, hi, self.cfg().period_bound);
        let summary = avoidance_search(self.inst, lo, hi, &bad, guard);
        self.report.bad_primes = Some(bad);
        let certified = summary.certified;
        let scanned = summary.scanned;
        let check = orbit_avoidance(self.inst, &summary)
            .map_err(|e| StageError::new(Stage::Avoidance, reduction_kind(&e), e.to_string()));
        self.report.avoidance = Some(summary);
        let check = check?;
        let holds = check.holds;
        self.report.orbit_avoidance = Some(check);
        if certified == 0 {
            return Err(StageError::new(
                Stage::Avoidance,
                FailureKind::HypothesisViolation,
                format!("no prime in [{lo}, {hi}] certified avoidance ({scanned} scanned)"),
            ));
        }
        if !holds {
            return Err(StageError::new(
                Stage::Avoidance,
                FailureKind::HypothesisViolation,
                "reduced orbit meets a periodic point past the certified bound",
            ));
        }
        Ok(())
    }

    /// Tries certified primes in ascending order until one yields a model,
    /// an interpolant and a certification.
    pub fn interpolate(&mut self) -> Result<(), StageError> {
        let cfg = self.cfg().clone();
        let norm = cfg.normalization();
        let candidates: Vec<u64> = self
            .report
            .avoidance
            .as_ref()
            .map(|s| s.certified().map(|c| c.prime).collect())
            .unwrap_or_default();
        let mut last: Option<StageError> = None;
        for &p in candidates.iter().take(MAX_PRIME_ATTEMPTS) {
            let model = match build_local_model(self.inst, p, cfg.precision, &norm) {
                Ok(m) => m,
                Err(e) => {
                    let err = StageError::new(Stage::Normalization, normalization_kind(&e), format!("p = {p}: {e}"));
                    self.attempt(p, Stage::Normalization, Some(e.to_string()));
                    if matches!(e, NormalizationError::Preperiodic(_)) {
                        return Err(err);
                    }
                    last = Some(err);
                    continue;
                }
            };
            let built = build_interpolant(&model, cfg.mahler_terms, cfg.slack_constant)
                .and_then(|g| certify(&g, &model, &cfg).map(|c| (g, c)));
            match built {
                Ok((g, cert)) => {
                    self.attempt(p, Stage::Interpolation, None);
                    self.report.chosen_prime = Some(p);
                    self.report.model = Some(model.record());
                    self.report.interpolant = Some(g.record());
                    if cert.constancy.constant {
                        self.report.assumptions.push(Assumption {
                            name: "constant-interpolant".into(),
                            provenance: Provenance::Sampled,
                            detail: "G is constant at precision; the orbit converges to a fixed point and avoidance was re-checked on the reduced orbit".into(),
                        });
                    }
                    self.report.certification = Some(cert);
                    self.fitted = Some(Fitted { model, interpolant: g });
                    return Ok(());
                }
                Err(e) => {
                    self.attempt(p, Stage::Interpolation, Some(e.to_string()));
                    last = Some(StageError::new(
                        Stage::Interpolation,
                        interpolation_kind(&e),
                        format!("p = {p}: {e}"),
                    ));
                }
            }
        }
        Err(last.unwrap_or_else(|| {
            StageError::new(Stage::Normalization, FailureKind::HypothesisViolation, "no certified prime available")
        }))
    }

    fn attempt(&mut self, prime: u64, stage: Stage, error: Option<String>) {
        self.report.attempts.push(PrimeAttempt { prime, stage, error });
    }

    /// Rebuilds the model at the recorded prime and loads the interpolant.
    pub fn load_interpolant(&mut self, rec: &InterpolantRecord) -> Result<(), StageError> {
        let cfg = self.cfg().clone();
        let (p, k) = (rec.series.prime, rec.series.precision);
        let model = build_local_model(self.inst, p, k, &cfg.normalization())
            .map_err(|e| StageError::new(Stage::Replay, normalization_kind(&e), format!("p = {p}: {e}")))?;
        let g = ApproxInterpolant::from_record(rec)
            .map_err(|e| StageError::new(Stage::Replay, FailureKind::InputError, e.to_string()))?;
        if g.context().prime() != p || g.context().precision() != model.context().precision() {
            return Err(StageError::new(Stage::Replay, FailureKind::InputError, "stale interpolant record"));
        }
        self.report.chosen_prime = Some(p);
        self.report.model = Some(model.record());
        self.report.interpolant = Some(rec.clone());
        self.fitted = Some(Fitted { model, interpolant: g });
        Ok(())
    }

    pub fn recertify(&mut self) -> Result<(), StageError> {
        let cfg = self.cfg().clone();
        let fitted = self.require_fitted(Stage::Interpolation)?;
        let cert = certify(&fitted.interpolant, &fitted.model, &cfg)
            .map_err(|e| StageError::new(Stage::Interpolation, interpolation_kind(&e), e.to_string()))?;
        self.report.certification = Some(cert);
        Ok(())
    }

    fn require_fitted(&self, stage: Stage) -> Result<&Fitted, StageError> {
        self.fitted
            .as_ref()
            .ok_or_else(|| StageError::new(stage, FailureKind::InputError, "missing upstream interpolant"))
    }

    pub fn returns(&mut self) -> Result<(), StageError> {
        if self.inst.variety.is_empty() {
            return Err(StageError::new(Stage::Returns, FailureKind::InputError, GapError::EmptyVariety.to_string()));
        }
        let cfg = self.cfg();
        let set = compute_returns(self.inst, cfg.n_max, cfg.screen_primes, cfg.exact_budget);
        let screened = set.screened_only();
        self.report.assumptions.push(Assumption {
            name: "return-set".into(),
            provenance: if screened.is_empty() {
                Provenance::Exact
            } else {
                Provenance::ModularScreened
            },
            detail: if screened.is_empty() {
                format!("all {} returns up to {} certified exactly", set.len(), set.n_max)
            } else {
                format!("returns {screened:?} are modular-screened only")
            },
        });
        self.report.returns = Some(set);
        Ok(())
    }

    pub fn localize(&mut self) -> Result<(), StageError> {
        let level = self.cfg().initial_level;
        let fitted = self.require_fitted(Stage::Gaps)?;
        let loc = localize_orbit(self.inst, &fitted.model, &fitted.interpolant, level)
            .map_err(|e| StageError::new(Stage::Gaps, gap_kind(&e), e.to_string()))?;
        self.report.localization = Some(loc);
        Ok(())
    }

    pub fn gaps(&mut self) -> Result<(), StageError> {
        let missing = |what: &str| StageError::new(Stage::Gaps, FailureKind::InputError, format!("missing upstream {what}"));
        let returns = self.report.returns.as_ref().ok_or_else(|| missing("return set"))?;
        let loc = self.report.localization.as_ref().ok_or_else(|| missing("localization"))?;
        let report = gap_report(returns, loc);
        let violation = report.verdict == GapVerdict::Violation;
        self.report.gaps = Some(report);
        if violation {
            self.report.assumptions.push(Assumption {
                name: "gap-violation".into(),
                provenance: Provenance::Exact,
                detail: "an observed pair breaks the derived gap bound: a screening false positive or a precision issue".into(),
            });
        }
        Ok(())
    }

    pub fn density(&mut self) -> Result<(), StageError> {
        let returns = self
            .report
            .returns
            .as_ref()
            .ok_or_else(|| StageError::new(Stage::Density, FailureKind::InputError, "missing upstream return set"))?;
        let d = density_report(&returns.indices(), returns.n_max, self.cfg().density_m);
        self.report.assumptions.push(Assumption {
            name: "density".into(),
            provenance: Provenance::Sampled,
            detail: format!("counting function against log^({}) at {} checkpoints; empirical only", d.m, d.samples.len()),
        });
        self.report.density = Some(d);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// commands

pub fn run_primes(inst: &ProblemInstance, cfg: RunConfig) -> RunReport {
    let mut p = Pipeline::new(inst, cfg);
    let r = p.primes();
    p.finish(r)
}

/// The full pipeline, stopping at the first failed stage.
pub fn run_analyze(inst: &ProblemInstance, cfg: RunConfig) -> RunReport {
    let mut p = Pipeline::new(inst, cfg);
    let r = (|| {
        p.primes()?;
        p.interpolate()?;
        p.returns()?;
        p.localize()?;
        p.gaps()?;
        p.density()
    })();
    p.finish(r)
}

pub fn run_returns(inst: &ProblemInstance, cfg: RunConfig) -> RunReport {
    let mut p = Pipeline::new(inst, cfg);
    let r = p.returns().and_then(|_| p.density());
    p.finish(r)
}

/// Builds (or replays) the interpolant and certifies it.
pub fn run_interpolate(inst: &ProblemInstance, cfg: RunConfig, replay: &Replay) -> RunReport {
    let mut p = Pipeline::new(inst, cfg);
    let r = match &replay.interpolant {
        Some(rec) => p.load_interpolant(rec).and_then(|_| p.recertify()),
        None => p.primes().and_then(|_| p.interpolate()),
    };
    p.finish(r)
}

/// Gap report from replayed returns and localization where present,
/// computing whatever is missing.
pub fn run_gaps(inst: &ProblemInstance, cfg: RunConfig, replay: &Replay) -> RunReport {
    let mut p = Pipeline::new(inst, cfg);
    let r = (|| {
        match &replay.returns {
            Some(s) => p.report.returns = Some(s.clone()),
            None => p.returns()?,
        }
        match (&replay.localization, &replay.interpolant) {
            (Some(l), _) => p.report.localization = Some(l.clone()),
            (None, Some(rec)) => {
                p.load_interpolant(rec)?;
                p.localize()?;
            }
            (None, None) => {
                p.primes()?;
                p.interpolate()?;
                p.localize()?;
            }
        }
        p.gaps()?;
        p.density()
    })();
    p.finish(r)
}

/// Gap verdicts for hand-written classes; no problem instance needed.
pub fn run_synthetic_gaps(cfg: RunConfig, classes: Vec<SyntheticGaps>) -> RunReport {
    let mut report = RunReport::new(cfg);
    for mut s in classes {
        let mut members = s.members.clone();
        members.sort_unstable();
        members.dedup();
        let (pairs, verdict) = check_gaps(&members, &s.bound);
        s.pairs = pairs;
        s.verdict = Some(verdict);
        report.synthetic.push(s);
    }
    report
}
