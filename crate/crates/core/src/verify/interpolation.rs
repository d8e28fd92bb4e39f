//! Interpolation inequalities between starred seminorms.

use crate::domain::distance_fields;
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::fd::fd_derivatives;
use crate::field::SampledField;
use crate::norms::weighted_sup;
use crate::pairs::{scan_budgeted, PairScan, PairWeight};
use crate::verify::record::{digest, VerificationRecord};

pub const SUITE: &str = "interpolation";
pub const SUITE_BOUNDARY: &str = "interpolation_boundary";

/// The `(j, k)` cases with explicit constants.
pub const CASES: [(usize, usize); 5] = [(0, 1), (0, 2), (1, 2), (2, 2), (0, 0)];

/// μ-independent quantities of one field.
#[derive(Debug, Clone)]
pub struct InterpolationInputs {
    pub fixture: String,
    pub boundary_portion: bool,
    /// `|u|₀`
    pub sup0: f64,
    /// `[u]*₁`, `[u]*₂`
    pub star1: f64,
    pub star2: f64,
    /// `[u]*_{j,β(·)}` for `j = 0, 1` (absent when `β ≡ 0`).
    pub beta_semi: Option<[PairScan; 2]>,
    /// `[u]*_{0,α(·)}` and `[u]*_{2,α(·)}` (absent when `α ≡ 0`).
    pub alpha_semi: Option<[PairScan; 2]>,
    pub alpha_minus: f64,
    pub beta_plus: f64,
    pub digest: String,
}

impl InterpolationInputs {
    /// `a = None` stands for `α ≡ 0`, `b = None` for `β ≡ 0`. Distance
    /// weights are `d̄` when `boundary_portion` is set.
    pub fn new(
        fixture: impl Into<String>,
        u: &SampledField,
        a: Option<&ExponentField>,
        b: Option<&ExponentField>,
        boundary_portion: bool,
        budget: usize,
    ) -> Result<Self> {
        let u = if u.order() >= 2 {
            u.clone()
        } else {
            fd_derivatives(u, 2)?
        };
        let lat = u.lattice();
        let df = distance_fields(lat);
        let d = if boundary_portion { &df.d_bar } else { &df.d };
        let ids: Vec<usize> = (0..lat.len()).collect();
        let c0 = u.components(0)?;
        let c1 = u.components(1)?;
        let c2 = u.components(2)?;
        let sup0 = weighted_sup(&c0, &ids, |_| 1.0)?;
        let star1 = weighted_sup(&c1, &ids, |i| d[i])?;
        let star2 = weighted_sup(&c2, &ids, |i| d[i] * d[i])?;
        let scan = |comps: &[&[f64]], e: &ExponentField, power: f64| {
            e.check_norm_range()?;
            scan_budgeted(lat.points(), comps, e.values(), &ids, PairWeight::MinDist { d, power }, budget)
        };
        let beta_semi = match b {
            Some(b) => Some([scan(&c0, b, 0.0)?, scan(&c1, b, 1.0)?]),
            None => None,
        };
        let alpha_semi = match a {
            Some(a) => Some([scan(&c0, a, 0.0)?, scan(&c2, a, 2.0)?]),
            None => None,
        };
        let empty: &[f64] = &[];
        Ok(InterpolationInputs {
            fixture: fixture.into(),
            boundary_portion,
            sup0,
            star1,
            star2,
            beta_semi,
            alpha_semi,
            alpha_minus: a.map_or(0.0, |a| a.alpha_minus()),
            beta_plus: b.map_or(0.0, |b| b.alpha_plus()),
            digest: digest(
                "interpolation",
                &[u.values(), a.map_or(empty, |a| a.values()), b.map_or(empty, |b| b.values())],
            ),
        })
    }

    /// One record for case `(j, k)` at scale `mu`.
    pub fn check(&self, j: usize, k: usize, mu: f64, slack: f64) -> VerificationRecord {
        let suite = if self.boundary_portion { SUITE_BOUNDARY } else { SUITE };
        let beta0 = self.beta_semi.is_none();
        let id = format!("j{j}_k{k}_{}_mu{mu}", if beta0 { "beta0" } else { "beta" });
        let na = |statement: &str, why: String| {
            VerificationRecord::not_applicable(suite, id.clone(), statement, self.fixture.clone(), why)
        };
        let (bp, am) = (self.beta_plus, self.alpha_minus);
        if !(mu > 0.0 && mu <= 0.5) {
            return na("interpolation", format!("mu = {mu} outside (0, 1/2]"));
        }
        if !(j as f64 + bp < k as f64 + am) {
            return na("interpolation", format!("j + beta+ = {} not below k + alpha- = {}", j as f64 + bp, k as f64 + am));
        }
        let (statement, lhs, rhs, scan) = match (j, k, &self.beta_semi, &self.alpha_semi) {
            (0, 1, Some(bs), _) => (
                "[u]*_{0,b} <= 2 mu^{-b+} |u|_0 + 2 mu^{1-b+} [u]*_1",
                bs[0].value,
                2.0 * mu.powf(-bp) * self.sup0 + 2.0 * mu.powf(1.0 - bp) * self.star1,
                Some(bs[0]),
            ),
            (0, 2, Some(bs), _) => (
                "[u]*_{0,b} <= 4 mu^{-b+} |u|_0 + 8 mu^{2-b+} [u]*_2",
                bs[0].value,
                4.0 * mu.powf(-bp) * self.sup0 + 8.0 * mu.powf(2.0 - bp) * self.star2,
                Some(bs[0]),
            ),
            (1, 2, None, _) => (
                "[u]*_1 <= mu^{-1} |u|_0 + 4 mu [u]*_2",
                self.star1,
                self.sup0 / mu + 4.0 * mu * self.star2,
                None,
            ),
            (1, 2, Some(bs), _) => (
                "[u]*_{1,b} <= 2 mu^{-b+} [u]*_1 + 4 mu^{1-b+} [u]*_2",
                bs[1].value,
                2.0 * mu.powf(-bp) * self.star1 + 4.0 * mu.powf(1.0 - bp) * self.star2,
                Some(bs[1]),
            ),
            (2, 2, None, Some(asm)) => (
                "[u]*_2 <= 8 mu^{a-} [u]*_{2,a} + (2/mu) [u]*_1",
                self.star2,
                8.0 * mu.powf(am) * asm[1].value + 2.0 / mu * self.star1,
                Some(asm[1]),
            ),
            (0, 0, Some(bs), Some(asm)) => (
                "[u]*_{0,b} <= 2 mu^{-b+} |u|_0 + mu^{a- - b+} [u]*_{0,a}",
                bs[0].value,
                2.0 * mu.powf(-bp) * self.sup0 + mu.powf(am - bp) * asm[0].value,
                Some(asm[0]),
            ),
            _ => {
                return na(
                    "interpolation",
                    format!("no explicit constant for (j, k) = ({j}, {k}) with these exponents"),
                )
            }
        };
        let mut r = VerificationRecord::inequality(suite, id, statement, self.fixture.clone(), lhs, rhs, slack)
            .with_digest(self.digest.clone());
        if let Some(s) = scan {
            r = r.with_pairs(s.pairs_scanned, s.full_scan);
        }
        r
    }
}

/// Records for case `(j, k)` at every `mu`.
#[allow(clippy::too_many_arguments)]
pub fn check_interpolation(
    fixture: &str,
    u: &SampledField,
    a: Option<&ExponentField>,
    b: Option<&ExponentField>,
    j: usize,
    k: usize,
    mus: &[f64],
    boundary_portion: bool,
    slack: f64,
    budget: usize,
) -> Result<Vec<VerificationRecord>> {
    if !CASES.contains(&(j, k)) {
        return Err(Error::invalid(format!("unsupported case (j, k) = ({j}, {k})")));
    }
    let inputs = InterpolationInputs::new(fixture, u, a, b, boundary_portion, budget)?;
    Ok(mus.iter().map(|&mu| inputs.check(j, k, mu, slack)).collect())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::domain::{build_lattice, DomainShape};
    use crate::verify::record::Status;

    fn square(n: usize) -> Arc<crate::domain::Lattice> {
        Arc::new(
            build_lattice(
                &DomainShape::Rectangle {
                    lo: vec![0.0, 0.0],
                    hi: vec![1.0, 1.0],
                },
                1.0 / n as f64,
            )
            .unwrap(),
        )
    }

    #[test]
    fn constant_passes_everything() {
        let lat = square(16);
        let u = SampledField::from_fn(lat.clone(), |_| 3.0);
        let a = ExponentField::constant(&lat, 0.6).unwrap();
        let b = ExponentField::constant(&lat, 0.5).unwrap();
        for (beta, alpha) in [(Some(&b), Some(&a)), (None, Some(&a))] {
            let inp = InterpolationInputs::new("const", &u, alpha, beta, false, 10_000).unwrap();
            for (j, k) in CASES {
                for mu in [0.5, 0.25] {
                    let r = inp.check(j, k, mu, 0.0);
                    assert!(r.passed, "{r:?}");
                    if r.status == Status::Pass {
                        assert!(r.lhs.abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn sine_product_case_01() {
        // Oracle: brute force over every node pair, written out here.
        let lat = square(63);
        let u = SampledField::from_fn(lat.clone(), |x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let b = ExponentField::constant(&lat, 0.5).unwrap();
        let r = &check_interpolation("sin", &u, None, Some(&b), 0, 1, &[0.25], false, 0.05, 4096).unwrap()[0];
        assert!(r.passed && r.full_scan);
        let d = distance_fields(&lat).d;
        let v = u.values();
        let mut lhs = 0.0f64;
        for x in 0..lat.len() {
            for y in 0..lat.len() {
                if x != y {
                    let r = crate::domain::dist(lat.point(x), lat.point(y));
                    lhs = lhs.max(d[x].min(d[y]).powf(0.5) * (v[x] - v[y]).abs() / r.powf(0.5));
                }
            }
        }
        assert!((r.lhs - lhs).abs() <= 1e-12 * lhs);
        let du = fd_derivatives(&u, 1).unwrap();
        let s1 = (0..lat.len())
            .map(|i| d[i] * du.components(1).unwrap().iter().fold(0.0f64, |m, c| m.max(c[i].abs())))
            .fold(0.0f64, f64::max);
        let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let rhs = 2.0 * 4f64.powf(0.5) * sup + 2.0 * 0.25f64.powf(0.5) * s1;
        assert!((r.rhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn linear_case_22() {
        let lat = square(16);
        let u = SampledField::from_fn(lat.clone(), |x| x[0]);
        let a = ExponentField::constant(&lat, 0.5).unwrap();
        let r = &check_interpolation("x1", &u, Some(&a), None, 2, 2, &[0.5], false, 0.0, 4096).unwrap()[0];
        assert!(r.passed && r.lhs < 1e-9);
    }

    #[test]
    fn hypothesis_violation_is_not_applicable() {
        let lat = square(8);
        let u = SampledField::from_fn(lat.clone(), |x| x[0] * x[1]);
        let a = ExponentField::constant(&lat, 0.3).unwrap();
        let b = ExponentField::constant(&lat, 0.5).unwrap();
        let r = &check_interpolation("x", &u, Some(&a), Some(&b), 0, 0, &[0.5], false, 0.0, 4096).unwrap()[0];
        assert_eq!(r.status, Status::NotApplicable);
        let r = &check_interpolation("x", &u, Some(&a), Some(&b), 0, 1, &[0.75], false, 0.0, 4096).unwrap()[0];
        assert_eq!(r.status, Status::NotApplicable);
        assert!(check_interpolation("x", &u, None, None, 2, 1, &[0.5], false, 0.0, 4096).is_err());
    }
}
