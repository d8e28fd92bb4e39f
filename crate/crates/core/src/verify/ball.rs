//! Small-ball estimates for `(2)`-weighted norms with ball-relative distances.

use crate::domain::{dist, distance_fields};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::field::SampledField;
use crate::norms::weighted_sup;
use crate::pairs::{scan_budgeted, PairScan, PairWeight};
use crate::verify::record::{digest, VerificationRecord};

pub const SUITE: &str = "ball_proposition";

/// Whole-domain quantities of `g`, reused across balls.
#[derive(Debug, Clone)]
pub struct BallInputs<'a> {
    pub fixture: String,
    g: &'a SampledField,
    a: &'a ExponentField,
    d: Vec<f64>,
    /// `[g]^{(2)}_{0,α(·),D}`
    pub domain_semi: PairScan,
    /// `|g|^{(2)}_{0,D}`
    pub domain_sup: f64,
    digest: String,
}

impl<'a> BallInputs<'a> {
    pub fn new(fixture: impl Into<String>, g: &'a SampledField, a: &'a ExponentField) -> Result<Self> {
        let lat = g.lattice();
        a.check_len(lat)?;
        a.check_norm_range()?;
        let d = distance_fields(lat).d;
        let ids: Vec<usize> = (0..lat.len()).collect();
        let v = [g.values()];
        let domain_semi = scan_budgeted(
            lat.points(),
            &v,
            a.values(),
            &ids,
            PairWeight::MinDist { d: &d, power: 2.0 },
            usize::MAX,
        )?;
        let domain_sup = weighted_sup(&v, &ids, |i| d[i] * d[i])?;
        Ok(BallInputs {
            fixture: fixture.into(),
            digest: digest("ball", &[g.values(), a.values()]),
            g,
            a,
            d,
            domain_semi,
            domain_sup,
        })
    }

    /// Records for `B = B(x0, μ d_{x0})`.
    pub fn check(&self, x0: usize, mu: f64, slack: f64) -> Result<Vec<VerificationRecord>> {
        let lat = self.g.lattice();
        if x0 >= lat.len() {
            return Err(Error::invalid(format!("node {x0} out of range")));
        }
        if !(mu > 0.0 && mu <= 0.5) {
            return Err(Error::invalid(format!("mu = {mu} outside (0, 1/2]")));
        }
        let rho = mu * self.d[x0];
        let c = lat.point(x0);
        let mut d_ball = vec![0.0; lat.len()];
        let mut ids = Vec::new();
        for i in 0..lat.len() {
            let r = dist(lat.point(i), c);
            if r < rho {
                d_ball[i] = rho - r;
                ids.push(i);
            }
        }
        if ids.len() < 2 {
            return Err(Error::invalid(format!(
                "ball of radius {rho} around node {x0} holds {} node(s)",
                ids.len()
            )));
        }
        let v = [self.g.values()];
        let semi = scan_budgeted(
            lat.points(),
            &v,
            self.a.values(),
            &ids,
            PairWeight::MinDist { d: &d_ball, power: 2.0 },
            usize::MAX,
        )?;
        let sup = weighted_sup(&v, &ids, |i| d_ball[i] * d_ball[i])?;
        let am = self.a.alpha_minus();
        let id = |k: &str| format!("{k}_x{x0}_mu{mu}");
        let note = format!("ball radius {rho}, {} nodes", ids.len());
        Ok(vec![
            VerificationRecord::inequality(
                SUITE,
                id("seminorm"),
                "[g]^(2)_{0,a,B} <= 8 mu^{2+a_D-} [g]^(2)_{0,a,D}",
                self.fixture.clone(),
                semi.value,
                8.0 * mu.powf(2.0 + am) * self.domain_semi.value,
                slack,
            )
            .with_pairs(semi.pairs_scanned, semi.full_scan && self.domain_semi.full_scan)
            .with_digest(self.digest.clone())
            .with_note(note.clone()),
            VerificationRecord::inequality(
                SUITE,
                id("sup"),
                "|g|^(2)_{0,B} <= 4 mu^2 |g|^(2)_{0,D}",
                self.fixture.clone(),
                sup,
                4.0 * mu * mu * self.domain_sup,
                slack,
            )
            .with_digest(self.digest.clone())
            .with_note(note),
        ])
    }
}

pub fn check_ball_inequalities(
    fixture: &str,
    g: &SampledField,
    a: &ExponentField,
    x0: usize,
    mu: f64,
    slack: f64,
) -> Result<Vec<VerificationRecord>> {
    BallInputs::new(fixture, g, a)?.check(x0, mu, slack)
}
