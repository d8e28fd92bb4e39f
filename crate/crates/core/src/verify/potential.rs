//! Newtonian potential checks: closed-form consistency and the Hölder
//! estimate for `D²w`.

use std::sync::Arc;

use crate::domain::{build_lattice, dist, DomainShape, Lattice, NodeClass};
use crate::error::Result;
use crate::exponent::ExponentField;
use crate::field::SampledField;
use crate::fixtures::{random_vector, rng};
use crate::norms::primed_norm;
use crate::pairs::{sample_nodes, scan, PairWeight};
use crate::potential::{
    distance_to_center, hessian_bound, newtonian_potential_at, FundamentalSolution, HessianEvaluator,
};
use crate::verify::record::{digest, VerificationRecord};

pub const SUITE_CONSISTENCY: &str = "potential_consistency";
pub const SUITE_ESTIMATE: &str = "potential_estimate";

fn ball(dim: usize, radius: f64, half: bool, h: f64) -> Result<Arc<Lattice>> {
    let center = vec![0.0; dim];
    let shape = if half {
        DomainShape::HalfBall { center, radius }
    } else {
        DomainShape::Ball { center, radius }
    };
    Ok(Arc::new(build_lattice(&shape, h)?))
}

/// Unit density on the unit ball of `R³`: `w(0) = -1/2`, `ΔW = 1`; plus
/// harmonicity of `Γ` away from the origin.
pub fn potential_consistency(h: f64, seed: u64) -> Result<Vec<VerificationRecord>> {
    let lat = ball(3, 1.0, false, h)?;
    let f = SampledField::from_fn(lat.clone(), |_| 1.0);
    let x0 = lat.nearest_node(&[0.0; 3]);
    let w0 = newtonian_potential_at(&f, &[x0])?[0];
    let hess = HessianEvaluator::new(&f)?.at(x0)?;
    let trace = hess[0][0] + hess[1][1] + hess[2][2];
    let fixture = format!("unit density, unit ball, n=3, h={h}");
    let mut out = vec![
        VerificationRecord::inequality(SUITE_CONSISTENCY, "w_center", "|w(0) + 1/2| <= 1% of 1/2", fixture.clone(), (w0 + 0.5).abs(), 0.005, 0.0)
            .with_floor(0.0)
            .with_note(format!("w(0) = {w0}")),
        VerificationRecord::inequality(SUITE_CONSISTENCY, "trace", "|trace D2w(0) - f(0)| <= 2%", fixture, (trace - 1.0).abs(), 0.02, 0.0)
            .with_floor(0.0)
            .with_note(format!("trace = {trace}")),
    ];
    let mut r = rng(seed);
    for dim in [2usize, 3] {
        let fs = FundamentalSolution::new(dim)?;
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let mut x = random_vector(&mut r, dim);
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < 0.1 {
                x[0] += 0.5;
            }
            let d2 = fs.d2gamma(&x)?;
            worst = worst.max((0..dim).map(|i| d2[i][i]).sum::<f64>().abs());
        }
        out.push(
            VerificationRecord::inequality(
                SUITE_CONSISTENCY,
                format!("harmonic_n{dim}"),
                "|trace D2 Gamma(x)| <= 1e-12 for 0.1 <= |x| <= 2",
                format!("200 seeded points, n={dim}"),
                worst,
                0.0,
                0.0,
            )
            .with_floor(1e-12),
        );
    }
    Ok(out)
}

/// `|D²w|'_{0,α(·),B₁}` and `|f|'_{0,α(·),B₂}` for a density on `B₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateParts {
    pub hessian_norm: f64,
    pub density_norm: f64,
    pub nodes: usize,
    pub full_scan: bool,
}

/// `f` lives on a ball or half-ball of radius 2; `D²w` is evaluated at (up
/// to `budget`) interior nodes with `|x - c| < 1`.
pub fn estimate_parts(f: &SampledField, a: &ExponentField, budget: usize) -> Result<EstimateParts> {
    let lat = f.lattice();
    let n = lat.dim();
    let inner: Vec<usize> = (0..lat.len())
        .filter(|&i| lat.class(i) == NodeClass::Interior)
        .filter(|&i| distance_to_center(lat, i).map(|r| r < 1.0).unwrap_or(false))
        .collect();
    let (nodes, full) = sample_nodes(&inner, budget);
    let ev = HessianEvaluator::new(f)?;
    let mut comps = vec![vec![0.0; lat.len()]; n * (n + 1) / 2];
    let mut sup = 0.0f64;
    for &x in &nodes {
        let m = ev.at(x)?;
        let mut q = 0;
        for i in 0..n {
            for j in i..n {
                comps[q][x] = m[i][j];
                sup = sup.max(m[i][j].abs());
                q += 1;
            }
        }
    }
    let refs: Vec<&[f64]> = comps.iter().map(|c| c.as_slice()).collect();
    // Diameter of the unit (half-)ball is 2 in either case.
    let semi = scan(lat.points(), &refs, a.values(), &nodes, PairWeight::Diam { scale: 2.0, power: 0.0 })?;
    let dn = primed_norm(f, a, 0, usize::MAX)?;
    Ok(EstimateParts {
        hessian_norm: sup + semi.value,
        density_norm: dn.norm,
        nodes: nodes.len(),
        full_scan: full,
    })
}

pub fn potential_estimate_check(
    fixture: &str,
    f: &SampledField,
    a: &ExponentField,
    budget: usize,
) -> Result<VerificationRecord> {
    let statement = "|D2w|'_{0,a,B1} / |f|'_{0,a,B2}";
    let dg = digest("potential_estimate", &[f.values(), a.values()]);
    if f.values().iter().all(|v| *v == 0.0) {
        return Ok(VerificationRecord::not_applicable(SUITE_ESTIMATE, "ratio", statement, fixture, "zero density")
            .with_digest(dg));
    }
    let p = estimate_parts(f, a, budget)?;
    Ok(VerificationRecord::ratio(SUITE_ESTIMATE, "ratio", statement, fixture, p.hessian_norm / p.density_norm)
        .with_pairs((p.nodes * p.nodes.saturating_sub(1)) as u64, p.full_scan)
        .with_digest(dg)
        .with_note(format!("hessian {}, density {}", p.hessian_norm, p.density_norm)))
}

/// Named densities used by the estimate suite.
pub fn densities() -> Vec<(&'static str, fn(&[f64]) -> f64)> {
    vec![
        ("cusp", |x| x[0].max(0.0).sqrt()),
        ("smooth", |x| (x[0] + 0.5 * x[1]).cos()),
        ("kink", |x| (x[0] - 0.3 * x[1]).abs().powf(0.7)),
    ]
}

/// Ratio records at `h` and `h/2` and the refinement check for each density
/// on the disk and half-disk of radius 2 with `α ≡ 0.5`; the unit density
/// example in `R³`; and pointwise Hessian bounds.
pub fn potential_estimate_suite(h: f64, tolerance: f64, budget: usize) -> Result<Vec<VerificationRecord>> {
    let mut out = Vec::new();
    for half in [false, true] {
        for (name, rho) in densities() {
            let fixture = format!("{name} {}", if half { "half-disk" } else { "disk" });
            let mut ratios = Vec::new();
            for hh in [h, h / 2.0] {
                let lat = ball(2, 2.0, half, hh)?;
                let f = SampledField::from_fn(lat.clone(), rho);
                let a = ExponentField::constant(&lat, 0.5)?;
                let r = potential_estimate_check(&format!("{fixture} h={hh}"), &f, &a, budget)?;
                ratios.push(r.lhs);
                out.push(r);
            }
            out.push(
                VerificationRecord::inequality(
                    SUITE_ESTIMATE,
                    "refinement",
                    "|r(h/2) - r(h)| <= tolerance * r(h)",
                    fixture,
                    (ratios[1] - ratios[0]).abs(),
                    tolerance * ratios[0],
                    0.0,
                )
                .with_note(format!("r(h) = {}, r(h/2) = {}", ratios[0], ratios[1])),
            );
        }
    }
    let lat = ball(3, 2.0, false, 0.25)?;
    let one = SampledField::from_fn(lat.clone(), |_| 1.0);
    let a = ExponentField::constant(&lat, 0.5)?;
    let p = estimate_parts(&one, &a, budget)?;
    out.push(
        VerificationRecord::inequality(
            SUITE_ESTIMATE,
            "unit_density",
            "|D2w|'_{0,a,B1} <= |f|'_{0,a,B2} for f = 1, n = 3",
            "unit density ball n=3 h=0.25",
            p.hessian_norm,
            p.density_norm,
            tolerance,
        )
        .with_note(format!("expected |D2w| = 1/3, got {}", p.hessian_norm)),
    );
    // Pointwise bound at a few interior nodes of the cusp fixture.
    let lat = ball(2, 2.0, false, h)?;
    let f = SampledField::from_fn(lat.clone(), densities()[0].1);
    let a = ExponentField::constant(&lat, 0.5)?;
    let ev = HessianEvaluator::new(&f)?;
    for target in [[0.0, 0.0, 0.0], [0.4, -0.3, 0.0], [-0.5, 0.5, 0.0]] {
        let x = lat.nearest_node(&target);
        let m = ev.at(x)?;
        let lhs = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        out.push(
            VerificationRecord::inequality(
                SUITE_ESTIMATE,
                format!("pointwise_{x}"),
                "|D2w(x)| <= 2^{n-1}|f(x)| + n (3R)^{a(x)} [f]_{a,x} / a(x)",
                format!("cusp disk h={h} at {:?}", &lat.point(x)[..2]),
                lhs,
                hessian_bound(&f, &a, x)?,
                tolerance,
            )
            .with_note(format!("distance to centre {}", dist(lat.point(x), &[0.0; 3]))),
        );
    }
    Ok(out)
}
