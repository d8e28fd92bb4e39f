//! Reflection, tubular extension and mollifier bounds.

use crate::error::Result;
use crate::exponent::{log_holder_constant, ExponentField};
use crate::extend::{epsilon_search, extend_domain, mollify, reflect_halfball, Extension};
use crate::field::SampledField;
use crate::norms::{holder_norm, primed_norm};
use crate::verify::record::{digest, VerificationRecord};

pub const SUITE_REFLECTION: &str = "reflection";
pub const SUITE_EXTENSION: &str = "extension";
pub const SUITE_MOLLIFIER: &str = "mollifier";

/// `|f*|'_{0,α*,D} ≤ |f|'_{0,α,B⁺}` on full pair sets.
pub fn reflection_check(fixture: &str, f: &SampledField, a: &ExponentField, slack: f64) -> Result<VerificationRecord> {
    let r = reflect_halfball(f, a)?;
    let lhs = primed_norm(&r.f, &r.alpha, 0, usize::MAX)?;
    let rhs = primed_norm(f, a, 0, usize::MAX)?;
    Ok(VerificationRecord::inequality(
        SUITE_REFLECTION,
        "primed_norm",
        "|f*|'_{0,a*,D} <= |f|'_{0,a,B+}",
        fixture,
        lhs.norm,
        rhs.norm,
        slack,
    )
    .with_pairs(lhs.pairs_scanned + rhs.pairs_scanned, lhs.full_scan && rhs.full_scan)
    .with_digest(digest("reflection", &[f.values(), a.values()])))
}

/// Norm, bilipschitz, log-Hölder and restriction checks for `(f̄, ᾱ)`.
pub fn extension_checks(
    fixture: &str,
    f: &SampledField,
    a: &ExponentField,
    sigma: f64,
    slack: f64,
    budget: usize,
) -> Result<(Extension, Vec<VerificationRecord>)> {
    let e = extend_domain(f, a, sigma, budget)?;
    let dg = digest("extension", &[f.values(), a.values(), &[sigma]]);
    let k = e.report.k_measured;
    let ap = a.alpha_plus();
    let lhs = holder_norm(&e.f, &e.alpha, 0, budget)?;
    let rhs = holder_norm(f, a, 0, budget)?;
    let ck = k.powf(ap);
    let clog_ext = log_holder_constant(&e.alpha, &e.lattice, budget);
    let clog = log_holder_constant(a, f.lattice(), budget);
    let restrict = e
        .base_ids
        .iter()
        .enumerate()
        .map(|(i, &j)| (e.f.value(j) - f.value(i)).abs().max((e.alpha.values()[j] - a.values()[i]).abs()))
        .fold(0.0f64, f64::max);
    let note = format!(
        "K measured {k}, shell bound {}, alpha shifts ({}, {})",
        e.report.k_analytic, e.report.alpha_minus_shift, e.report.alpha_plus_shift
    );
    let records = vec![
        VerificationRecord::inequality(
            SUITE_EXTENSION,
            "norm_bound",
            "|fbar|_{0,abar,O_s} <= K^{a+} |f|_{0,a,O}",
            fixture,
            lhs.norm,
            ck * rhs.norm,
            slack,
        )
        .with_pairs(lhs.pairs_scanned + rhs.pairs_scanned, lhs.full_scan && rhs.full_scan)
        .with_note(note.clone()),
        VerificationRecord::inequality(
            SUITE_EXTENSION,
            "bilipschitz",
            "K measured <= (R + s)/(R - s)",
            fixture,
            k,
            e.report.k_analytic,
            1e-9,
        )
        .with_pairs(e.report.pairs_scanned, e.report.full_scan),
        VerificationRecord::inequality(
            SUITE_EXTENSION,
            "log_holder",
            "c_log(abar) <= c_log(a) + 2 a+ |ln K|",
            fixture,
            clog_ext,
            clog + 2.0 * ap * k.ln().abs(),
            slack,
        )
        .with_note(note),
        VerificationRecord::inequality(
            SUITE_EXTENSION,
            "restriction",
            "(fbar, abar) restricted to O equals (f, a)",
            fixture,
            restrict,
            0.0,
            0.0,
        )
        .with_floor(0.0),
    ];
    Ok((
        e,
        records
            .into_iter()
            .map(|r| r.with_digest(dg.clone()))
            .collect(),
    ))
}

/// For each δ: ε(δ) search, then the sup bound and the factor-3 bound.
pub fn mollifier_checks(
    fixture: &str,
    ext: &Extension,
    deltas: &[f64],
    slack: f64,
    budget: usize,
) -> Result<Vec<VerificationRecord>> {
    let dg = digest("mollifier", &[ext.f.values(), ext.alpha.values(), deltas]);
    let fbar = holder_norm(&ext.f, &ext.alpha, 0, budget)?;
    let alpha = ext.alpha.restrict(&ext.base_ids)?;
    let mut out = Vec::new();
    for &delta in deltas {
        let s = epsilon_search(ext, delta)?;
        let fe = mollify(ext, s.epsilon)?;
        let note = format!("epsilon {} (modulus {})", s.epsilon, s.modulus);
        out.push(
            VerificationRecord::inequality(
                SUITE_MOLLIFIER,
                format!("sup_delta{delta}"),
                "|f_eps|_{0,O} <= |fbar|_{0,O_s}",
                fixture,
                fe.sup(),
                ext.f.sup(),
                0.0,
            )
            .with_note(note.clone())
            .with_digest(dg.clone()),
        );
        let lhs = holder_norm(&fe, &alpha.shifted(delta)?, 0, budget)?;
        out.push(
            VerificationRecord::inequality(
                SUITE_MOLLIFIER,
                format!("factor3_delta{delta}"),
                "|f_eps|_{0,a-d,O} <= 3 |fbar|_{0,abar,O_s}",
                fixture,
                lhs.norm,
                3.0 * fbar.norm,
                slack,
            )
            .with_pairs(lhs.pairs_scanned + fbar.pairs_scanned, lhs.full_scan && fbar.full_scan)
            .with_note(note)
            .with_digest(dg.clone()),
        );
    }
    Ok(out)
}
