//! The annulus example: `f(x) = (|x| - γ)^{|x|}` is `α(·)`-Hölder with
//! `α(x) = |x|` but not `β`-Hölder for any `β ∈ (γ, ζ]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{build_lattice, DomainShape};
use crate::error::{Error, Result};
use crate::exponent::{log_holder_scan, ExponentField};
use crate::expr::parse_expression;
use crate::field::SampledField;
use crate::pairs::{scan_budgeted, PairWeight};
use crate::verify::record::{digest, VerificationRecord};

pub const SUITE: &str = "annulus_example";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnulusParams {
    pub gamma: f64,
    pub zeta: f64,
    pub beta: f64,
    /// First index of the divergent sequence (the displayed lower bound
    /// fails at `n = 0`, where the ratio is exactly 1).
    pub n_min: u32,
    pub n_max: u32,
    pub h: f64,
    /// Required size of the last ratio, if any.
    pub threshold: Option<f64>,
    /// Node budget for the seminorm scan (the default covers every node at
    /// `h = 0.005`).
    pub seminorm_budget: usize,
    /// Node budget for the log-Hölder scan.
    pub log_budget: usize,
}

impl Default for AnnulusParams {
    fn default() -> Self {
        AnnulusParams {
            gamma: 0.2,
            zeta: 0.8,
            beta: 0.5,
            n_min: 1,
            n_max: 12,
            h: 0.005,
            threshold: Some(4.0),
            seminorm_budget: 1_000_000,
            log_budget: 4096,
        }
    }
}

impl AnnulusParams {
    pub fn validate(&self) -> Result<()> {
        let (g, z, b) = (self.gamma, self.zeta, self.beta);
        if !((-2.0f64).exp() < g && g < z && z < 1.0) {
            return Err(Error::invalid(format!("need e^-2 < gamma < zeta < 1, got gamma = {g}, zeta = {z}")));
        }
        if !(g < b && b <= z) {
            return Err(Error::invalid(format!("beta = {b} must lie in (gamma, zeta] = ({g}, {z}]")));
        }
        if self.n_min > self.n_max {
            return Err(Error::invalid("n_min exceeds n_max"));
        }
        if !(self.h > 0.0 && self.h < (z - g) / 2.0) {
            return Err(Error::invalid(format!("spacing {} too coarse for the annulus", self.h)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub n: u32,
    pub ratio: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusReport {
    pub seminorm: f64,
    pub seminorm_argmax: Option<[usize; 2]>,
    pub nodes: usize,
    pub log_holder: f64,
    pub log_envelope: f64,
    pub ratios: Vec<RatioPoint>,
    #[serde(skip)]
    pub records: Vec<VerificationRecord>,
}

/// Divergent ratio `|f(x₀) - f(x_n)| / |x₀ - x_n|^β` at
/// `x₀ = (γ, 0)`, `x_n = (γ + (β-γ)/2ⁿ, 0)`, evaluated in closed form.
pub fn example_ratio(gamma: f64, beta: f64, n: u32) -> Result<(f64, f64)> {
    let e = parse_expression(&format!("(r - {gamma:e})^r"))?;
    let t = (beta - gamma) / 2f64.powi(n as i32);
    let f0 = e.evaluate(&[gamma, 0.0], 2)?;
    let fnn = e.evaluate(&[gamma + t, 0.0], 2)?;
    let ratio = (f0 - fnn).abs() / t.powf(beta);
    let lower = t.powf((gamma - beta) / 2.0);
    Ok((ratio, lower))
}

pub fn annulus_example(p: &AnnulusParams) -> Result<AnnulusReport> {
    p.validate()?;
    let shape = DomainShape::Annulus {
        center: vec![0.0, 0.0],
        inner: p.gamma,
        outer: p.zeta,
    };
    let lat = Arc::new(build_lattice(&shape, p.h)?);
    // Crossing nodes can fall a rounding error inside the inner circle.
    let fe = parse_expression(&format!("max(r - {:e}, 0)^r", p.gamma))?;
    let f = SampledField::from_expr(lat.clone(), &fe)?;
    let a = ExponentField::from_expr(&lat, &parse_expression("r")?)?;
    let ids: Vec<usize> = (0..lat.len()).collect();
    let semi = scan_budgeted(lat.points(), &[f.values()], a.values(), &ids, PairWeight::Unit, p.seminorm_budget)?;
    let lh = log_holder_scan(&a, &lat, p.log_budget);
    let diam = 2.0 * p.zeta;
    let envelope = (1.0 / std::f64::consts::E).max(diam * diam.ln());
    let fixture = format!("gamma={} zeta={} beta={} h={}", p.gamma, p.zeta, p.beta, p.h);
    let dg = digest("annulus", &[&[p.gamma, p.zeta, p.beta, p.h]]);
    let mut records = vec![
        VerificationRecord::inequality(SUITE, "seminorm", "[f]_{a} <= 1 (|f(x)-f(y)| <= |x-y|^{|x|})", fixture.clone(), semi.value, 1.0, 0.0)
            .with_floor(1e-6)
            .with_pairs(semi.pairs_scanned, semi.full_scan)
            .with_note(format!("{} nodes", lat.len())),
        VerificationRecord::inequality(
            SUITE,
            "log_holder",
            "c_log(|x|) <= sup_{0<t<=2 zeta} t |ln t|",
            fixture.clone(),
            lh.value,
            envelope,
            0.0,
        )
        .with_pairs(lh.pairs_scanned, lh.full_scan),
    ];
    let mut ratios = Vec::new();
    for n in p.n_min..=p.n_max {
        let (ratio, lower) = example_ratio(p.gamma, p.beta, n)?;
        records.push(
            VerificationRecord::inequality(
                SUITE,
                format!("ratio_n{n}"),
                "|f(x0)-f(xn)| / |x0-xn|^b >= ((b-g)/2^n)^{(g-b)/2}",
                fixture.clone(),
                lower,
                ratio,
                0.0,
            )
            .with_note(if n == 1 { "equality case: ratio and bound coincide" } else { "" }),
        );
        ratios.push(RatioPoint { n, ratio, lower_bound: lower });
    }
    if let (Some(th), Some(last)) = (p.threshold, ratios.last()) {
        records.push(
            VerificationRecord::inequality(
                SUITE,
                "threshold",
                "last ratio exceeds the threshold",
                fixture,
                th,
                last.ratio,
                0.0,
            )
            .with_floor(0.0)
            .with_note(format!("n = {}", last.n)),
        );
    }
    Ok(AnnulusReport {
        seminorm: semi.value,
        seminorm_argmax: semi.argmax,
        nodes: lat.len(),
        log_holder: lh.value,
        log_envelope: envelope,
        ratios,
        records: records.into_iter().map(|r| r.with_digest(dg.clone())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_ratios() {
        // Oracle: ratio = t^{γ+t-β} with t = (β-γ)/2ⁿ since f(x₀) = 0.
        for n in 0..=12 {
            let t = 0.3 / 2f64.powi(n);
            let (r, lb) = example_ratio(0.2, 0.5, n as u32).unwrap();
            assert!((r - t.powf(0.2 + t - 0.5)).abs() <= 1e-12 * r);
            assert!((lb - t.powf(-0.15)).abs() <= 1e-12 * lb);
        }
        let (r12, lb12) = example_ratio(0.2, 0.5, 12).unwrap();
        assert!(r12 >= 4.0 && (lb12 - 4.17).abs() < 0.01);
        let (r0, lb0) = example_ratio(0.2, 0.5, 0).unwrap();
        assert!((r0 - 1.0).abs() < 1e-12 && lb0 > 1.19);
    }

    #[test]
    fn coarse_example() {
        let p = AnnulusParams {
            h: 0.04,
            ..Default::default()
        };
        let rep = annulus_example(&p).unwrap();
        for r in &rep.records {
            assert!(r.passed, "{r:?}");
        }
        assert_eq!(rep.ratios.len(), 12);
        assert!((rep.log_envelope - 1.6 * 1.6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn parameter_errors() {
        for p in [
            AnnulusParams { beta: 0.2, ..Default::default() },
            AnnulusParams { beta: 0.9, ..Default::default() },
            AnnulusParams { gamma: 0.1, ..Default::default() },
            AnnulusParams { zeta: 1.0, ..Default::default() },
        ] {
            assert!(annulus_example(&p).is_err());
        }
    }
}
