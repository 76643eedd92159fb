//! Human-readable summary of a [`RunReport`]. Every line is rendered from a
//! report field; nothing is recomputed here.

use std::fmt::Write;

use crate::gap::{GapVerdict, ReturnStatus};
use crate::pipeline::{Provenance, RunReport};
use crate::reduction::{CertificateVerdict, HitDepth};

fn verdict_str(v: GapVerdict) -> &'static str {
    match v {
        GapVerdict::Satisfied => "satisfied",
        GapVerdict::TooFewReturns => "too-few-returns",
        GapVerdict::Violation => "VIOLATION",
    }
}

fn provenance_str(p: Provenance) -> &'static str {
    match p {
        Provenance::Exact => "exact",
        Provenance::ModularScreened => "modular-screened",
        Provenance::Sampled => "sampled",
        Provenance::Assumed => "assumed",
    }
}

pub fn summary(r: &RunReport) -> String {
    let mut s = String::new();
    // writing to a String cannot fail
    let w = &mut s;
    if let Some(bad) = &r.bad_primes {
        let list: Vec<String> = bad.primes.iter().map(u64::to_string).collect();
        let _ = writeln!(w, "bad primes: {{{}}}", list.join(", "));
    }
    if let Some(av) = &r.avoidance {
        let _ = writeln!(
            w,
            "avoidance: {} of {} primes certified (density {:.3})",
            av.certified, av.scanned, av.density
        );
        for c in &av.certificates {
            let verdict = match c.verdict {
                CertificateVerdict::Certified => "certified",
                CertificateVerdict::FailedPeriodic => "failed-periodic",
                CertificateVerdict::FailedBadPrime => "bad-prime",
                CertificateVerdict::GuardExceeded => "guard-exceeded",
            };
            let depths: Vec<String> = c
                .depths
                .iter()
                .map(|d| match d {
                    HitDepth::Depth(d) => d.to_string(),
                    HitDepth::Periodic => "periodic".into(),
                })
                .collect();
            let _ = writeln!(w, "  p = {:>4}  {verdict:<15} M = {:<6} depths [{}]", c.prime, c.bound, depths.join(", "));
        }
    }
    if let Some(oa) = &r.orbit_avoidance {
        let _ = writeln!(
            w,
            "reduced-orbit avoidance past M: {} ({} primes)",
            if oa.holds { "holds" } else { "FAILS" },
            oa.checks.len()
        );
    }
    for a in &r.attempts {
        match &a.error {
            None => {
                let _ = writeln!(w, "prime {}: model and interpolant built", a.prime);
            }
            Some(e) => {
                let _ = writeln!(w, "prime {}: {} failed: {e}", a.prime, a.stage);
            }
        }
    }
    if let Some(m) = &r.model {
        let _ = writeln!(
            w,
            "local model: p = {}, K = {}, m0 = {}, k_total = {}, c = {}, eta = ({})",
            m.prime,
            m.precision,
            m.m0,
            m.k_total,
            m.c,
            m.eta.join(", ")
        );
    }
    if let Some(g) = &r.interpolant {
        let _ = writeln!(
            w,
            "interpolant: {} Mahler terms from origin {}, c = {}",
            g.terms, g.series.origin, g.c
        );
    }
    if let Some(c) = &r.certification {
        let _ = writeln!(
            w,
            "certification: error-bound min margin {}, compatibility min valuation {} (threshold {}, sampled), constant: {}",
            c.min_margin().map_or("-".into(), |m| m.to_string()),
            c.compatibility.min_valuation().map_or("-".into(), |m| m.to_string()),
            c.compatibility.threshold,
            c.constancy.constant
        );
    }
    if let Some(ret) = &r.returns {
        let items: Vec<String> = ret
            .entries
            .iter()
            .map(|e| match e.status {
                ReturnStatus::CertifiedExact => e.n.to_string(),
                ReturnStatus::ModularScreened => format!("{}*", e.n),
            })
            .collect();
        let _ = writeln!(w, "S_V up to {}: {{{}}}", ret.n_max, items.join(", "));
        let _ = writeln!(
            w,
            "  exact horizon {}, {} screening primes{}",
            ret.exact_horizon.map_or("none".into(), |h| h.to_string()),
            ret.screening_primes.len(),
            if ret.screened_only().is_empty() {
                ""
            } else {
                "; * = modular-screened only"
            }
        );
    }
    if let Some(g) = &r.gaps {
        let _ = writeln!(
            w,
            "gaps at p = {}: prefix {:?}, {} classes listed, {} empty zero-free classes",
            g.prime,
            g.prefix,
            g.classes.len(),
            g.empty_zero_free
        );
        for c in &g.classes {
            let d = &c.disk;
            let head = format!("  shift {} class {} mod {}^{}", c.shift, d.center, g.prime, d.level);
            if d.count == 0 {
                let _ = writeln!(
                    w,
                    "{head}: no zero, members {:?}, cutoff n* = {}",
                    c.members,
                    c.cutoff.as_ref().map_or("-".into(), |x| x.to_string())
                );
            } else {
                let bound = c
                    .bound
                    .as_ref()
                    .map_or("-".into(), |b| format!("C = {}^({}), offset {}", b.prime, b.rate, b.offset));
                let _ = writeln!(
                    w,
                    "{head}: zero of order {}, {bound}, members {:?}, {}",
                    d.count,
                    c.members,
                    verdict_str(c.verdict)
                );
            }
        }
        let _ = writeln!(w, "gap verdict: {}", verdict_str(g.verdict));
    }
    for sg in &r.synthetic {
        let _ = writeln!(
            w,
            "synthetic class {:?} with C = {}^({}), offset {}: {}",
            sg.members,
            sg.bound.prime,
            sg.bound.rate,
            sg.bound.offset,
            sg.verdict.map_or("-", verdict_str)
        );
        for p in &sg.pairs {
            let _ = writeln!(
                w,
                "  {} -> {}: gap {} vs exponent {} {}",
                p.n,
                p.next,
                p.gap,
                p.exponent,
                if p.holds { "ok" } else { "FAILS" }
            );
        }
    }
    if let Some(d) = &r.density {
        let _ = writeln!(
            w,
            "density vs log^({}): max ratio {:.4} over {} checkpoints{}",
            d.m,
            d.max_ratio,
            d.samples.len(),
            if d.diverging { ", diverging" } else { "" }
        );
    }
    for a in &r.assumptions {
        let _ = writeln!(w, "[{}] {}: {}", provenance_str(a.provenance), a.name, a.detail);
    }
    match &r.failure {
        Some(f) => {
            let _ = writeln!(w, "FAILED: {f} (exit {})", f.exit_code());
        }
        None => {
            let _ = writeln!(w, "ok");
        }
    }
    s
}
