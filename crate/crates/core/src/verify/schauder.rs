//! Dirichlet-solver checks: convergence, Schauder ratios, the constant
//! coefficient transform, the continuity sweep and the maximum principle.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;

use crate::domain::{build_lattice, distance_fields, DomainShape, Lattice, NodeClass};
use crate::elliptic::{
    constant_coeff_transform, continuity_sweep, max_principle_check, solve_dirichlet, DirichletProblem,
    EllipticOperator, SolveOptions,
};
use crate::error::Result;
use crate::exponent::ExponentField;
use crate::fd::fd_derivatives;
use crate::field::SampledField;
use crate::fixtures::{random_vector, rng, spd_matrix};
use crate::norms::{holder_norm, starred_norm, weighted_norm_s};
use crate::potential::Matrix3;
use crate::verify::record::{digest, VerificationRecord};

pub const SUITE_CONVERGENCE: &str = "solver_convergence";
pub const SUITE_SCHAUDER: &str = "schauder";
pub const SUITE_TRANSFORM: &str = "transform";
pub const SUITE_SWEEP: &str = "continuity_sweep";

type Grad = [f64; 2];
type Hess = [[f64; 2]; 2];

/// Closed-form solution with its first and second derivatives (dim 2).
#[derive(Clone, Copy)]
pub struct Manufactured {
    pub name: &'static str,
    pub u: fn(&[f64]) -> f64,
    pub grad: fn(&[f64]) -> Grad,
    pub hess: fn(&[f64]) -> Hess,
}

pub fn manufactured_solutions() -> Vec<Manufactured> {
    vec![
        Manufactured {
            name: "sin_sin",
            u: |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
            grad: |x| {
                let (s0, c0, s1, c1) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
                [PI * c0 * s1, PI * s0 * c1]
            },
            hess: |x| {
                let (s0, c0, s1, c1) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
                let p2 = PI * PI;
                [[-p2 * s0 * s1, p2 * c0 * c1], [p2 * c0 * c1, -p2 * s0 * s1]]
            },
        },
        Manufactured {
            name: "exp",
            u: |x| (x[0] + 0.5 * x[1]).exp(),
            grad: |x| {
                let e = (x[0] + 0.5 * x[1]).exp();
                [e, 0.5 * e]
            },
            hess: |x| {
                let e = (x[0] + 0.5 * x[1]).exp();
                [[e, 0.5 * e], [0.5 * e, 0.25 * e]]
            },
        },
        Manufactured {
            name: "quadratic",
            u: |x| x[0] * x[0] - x[0] * x[1] + 2.0 * x[1] * x[1],
            grad: |x| [2.0 * x[0] - x[1], -x[0] + 4.0 * x[1]],
            hess: |_| [[2.0, -1.0], [-1.0, 4.0]],
        },
        Manufactured {
            name: "trig_mix",
            u: |x| (2.0 * x[0]).sin() * x[1].cos() + x[0],
            grad: |x| [2.0 * (2.0 * x[0]).cos() * x[1].cos() + 1.0, -(2.0 * x[0]).sin() * x[1].sin()],
            hess: |x| {
                let m = -2.0 * (2.0 * x[0]).cos() * x[1].sin();
                [[-4.0 * (2.0 * x[0]).sin() * x[1].cos(), m], [m, -(2.0 * x[0]).sin() * x[1].cos()]]
            },
        },
        Manufactured {
            name: "rational",
            u: |x| 1.0 / (1.0 + x[0] + x[1]),
            grad: |x| {
                let g = -1.0 / (1.0 + x[0] + x[1]).powi(2);
                [g, g]
            },
            hess: |x| {
                let g = 2.0 / (1.0 + x[0] + x[1]).powi(3);
                [[g, g], [g, g]]
            },
        },
    ]
}

/// Coefficients of a 2D operator.
#[derive(Clone, Copy)]
pub struct Coefficients {
    pub name: &'static str,
    pub a: fn(&[f64]) -> Matrix3,
    pub b: fn(&[f64]) -> [f64; 3],
    pub c: fn(&[f64]) -> f64,
}

pub fn laplacian_coefficients() -> Coefficients {
    Coefficients {
        name: "laplacian",
        a: |_| [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
        b: |_| [0.0; 3],
        c: |_| 0.0,
    }
}

pub fn variable_coefficients() -> Coefficients {
    Coefficients {
        name: "variable",
        a: |x| [[2.0 + x[0], 0.3, 0.0], [0.3, 1.0 + x[1], 0.0], [0.0; 3]],
        b: |_| [1.0, -0.5, 0.0],
        c: |_| -1.0,
    }
}

pub fn unit_square(h: f64) -> Result<Arc<Lattice>> {
    Ok(Arc::new(build_lattice(
        &DomainShape::Rectangle {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        },
        h,
    )?))
}

/// `L u*` with `φ = u*`, on `lat`.
pub fn manufactured_problem(lat: &Arc<Lattice>, m: &Manufactured, co: &Coefficients) -> Result<DirichletProblem> {
    let op = EllipticOperator::from_fns(lat.clone(), co.a, co.b, co.c)?;
    let f = SampledField::from_fn(lat.clone(), |x| {
        let (a, b, c) = ((co.a)(x), (co.b)(x), (co.c)(x));
        let g = (m.grad)(x);
        let h = (m.hess)(x);
        let mut s = c * (m.u)(x);
        for i in 0..2 {
            s += b[i] * g[i];
            for j in 0..2 {
                s += a[i][j] * h[i][j];
            }
        }
        s
    });
    let phi = SampledField::from_fn(lat.clone(), m.u);
    DirichletProblem::new(op, f, phi)
}

fn max_error(u: &SampledField, exact: impl Fn(&[f64]) -> f64) -> f64 {
    let lat = u.lattice();
    (0..lat.len()).fold(0.0f64, |m, i| m.max((u.value(i) - exact(lat.coords(i))).abs()))
}

/// Error ratio between `h` and `h/2` for `sin(πx₁)sin(πx₂)`, and exact
/// recovery of a quadratic under a variable-coefficient operator.
pub fn solver_convergence(h: f64) -> Result<Vec<VerificationRecord>> {
    let ms = manufactured_solutions();
    let sin = &ms[0];
    let mut errs = Vec::new();
    for hh in [h, h / 2.0] {
        let lat = unit_square(hh)?;
        let p = manufactured_problem(&lat, sin, &laplacian_coefficients())?;
        let s = solve_dirichlet(&p, &SolveOptions::default())?;
        errs.push(max_error(&s.u, sin.u));
    }
    let ratio = errs[0] / errs[1];
    let fixture = format!("sin_sin h={h}");
    let note = format!("errors {:e}, {:e}; ratio {ratio}", errs[0], errs[1]);
    let quad = &ms[2];
    let lat = unit_square(h)?;
    let p = manufactured_problem(&lat, quad, &variable_coefficients())?;
    let s = solve_dirichlet(&p, &SolveOptions::default())?;
    let qerr = max_error(&s.u, quad.u);
    Ok(vec![
        VerificationRecord::inequality(SUITE_CONVERGENCE, "ratio_low", "error ratio >= 3.5", fixture.clone(), 3.5, ratio, 0.0)
            .with_floor(0.0)
            .with_note(note.clone()),
        VerificationRecord::inequality(SUITE_CONVERGENCE, "ratio_high", "error ratio <= 4.5", fixture, ratio, 4.5, 0.0)
            .with_floor(0.0)
            .with_note(note),
        VerificationRecord::inequality(
            SUITE_CONVERGENCE,
            "quadratic_exact",
            "max |u_h - u*| <= 1e-10 for quadratic u*",
            format!("quadratic variable h={h}"),
            qerr,
            0.0,
            0.0,
        )
        .with_floor(1e-10),
    ])
}

/// Numerator and denominator of a Schauder ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioParts {
    pub numerator: f64,
    pub denominator: f64,
}

impl RatioParts {
    pub fn ratio(&self) -> f64 {
        self.numerator / self.denominator
    }
}

/// `|u|*_{2,α(·)}` over `|u|₀ + |f|^{(2)}_{0,α(·)}`.
pub fn interior_parts(p: &DirichletProblem, u: &SampledField, a: &ExponentField, budget: usize) -> Result<RatioParts> {
    let df = distance_fields(p.lattice());
    let u2 = fd_derivatives(u, 2)?;
    let num = starred_norm(&u2, a, 2, &df, false, budget)?.norm;
    let fs = weighted_norm_s(&p.f, a, 0, 2.0, &df, budget)?.norm;
    Ok(RatioParts {
        numerator: num,
        denominator: u.sup() + fs,
    })
}

/// `|u|_{2,α(·)}` over `|u|₀ + |f|_{0,α(·)} + |φ|_{2,α(·)}`.
pub fn global_parts(p: &DirichletProblem, u: &SampledField, a: &ExponentField, budget: usize) -> Result<RatioParts> {
    let u2 = fd_derivatives(u, 2)?;
    let num = holder_norm(&u2, a, 2, budget)?.norm;
    let f = holder_norm(&p.f, a, 0, budget)?.norm;
    let phi = if p.phi.values().iter().all(|v| *v == 0.0) {
        0.0
    } else {
        holder_norm(&fd_derivatives(&p.phi, 2)?, a, 2, budget)?.norm
    };
    Ok(RatioParts {
        numerator: num,
        denominator: u.sup() + f + phi,
    })
}

fn ratio_record(suite_id: &str, statement: &str, fixture: &str, parts: RatioParts, dg: String) -> VerificationRecord {
    if parts.denominator == 0.0 {
        return VerificationRecord::not_applicable(SUITE_SCHAUDER, suite_id, statement, fixture, "zero data")
            .with_digest(dg);
    }
    VerificationRecord::ratio(SUITE_SCHAUDER, suite_id, statement, fixture, parts.ratio())
        .with_digest(dg)
        .with_note(format!("numerator {}, denominator {}", parts.numerator, parts.denominator))
}

pub fn schauder_ratio_interior(
    fixture: &str,
    p: &DirichletProblem,
    u: &SampledField,
    a: &ExponentField,
    budget: usize,
) -> Result<VerificationRecord> {
    Ok(ratio_record(
        "interior_ratio",
        "|u|*_{2,a} / (|u|_0 + |f|^(2)_{0,a})",
        fixture,
        interior_parts(p, u, a, budget)?,
        digest("schauder_interior", &[p.f.values(), u.values(), a.values()]),
    ))
}

pub fn schauder_ratio_global(
    fixture: &str,
    p: &DirichletProblem,
    u: &SampledField,
    a: &ExponentField,
    budget: usize,
) -> Result<VerificationRecord> {
    Ok(ratio_record(
        "global_ratio",
        "|u|_{2,a} / (|u|_0 + |f|_{0,a} + |phi|_{2,a})",
        fixture,
        global_parts(p, u, a, budget)?,
        digest("schauder_global", &[p.f.values(), p.phi.values(), u.values(), a.values()]),
    ))
}

/// Interior and global ratios for one manufactured problem at `h` and
/// `h/2`, plus the scaling check at `h`.
pub fn schauder_stability(
    m: &Manufactured,
    co: &Coefficients,
    alpha: fn(&[f64]) -> f64,
    alpha_name: &str,
    h: f64,
    tolerance: f64,
    budget: usize,
) -> Result<Vec<VerificationRecord>> {
    let fixture = format!("{}/{}/{alpha_name}", m.name, co.name);
    let mut ratios = Vec::new();
    let mut out = Vec::new();
    for hh in [h, h / 2.0] {
        let lat = unit_square(hh)?;
        let p = manufactured_problem(&lat, m, co)?;
        let a = ExponentField::from_fn(&lat, alpha)?;
        let s = solve_dirichlet(&p, &SolveOptions::default())?;
        let fx = format!("{fixture} h={hh}");
        out.push(schauder_ratio_interior(&fx, &p, &s.u, &a, budget)?);
        out.push(schauder_ratio_global(&fx, &p, &s.u, &a, budget)?);
        let i = interior_parts(&p, &s.u, &a, budget)?;
        let g = global_parts(&p, &s.u, &a, budget)?;
        if hh == h {
            let p2 = DirichletProblem::new(p.op.clone(), p.f.scaled(2.0), p.phi.scaled(2.0))?;
            let s2 = solve_dirichlet(&p2, &SolveOptions::default())?;
            let i2 = interior_parts(&p2, &s2.u, &a, budget)?;
            let g2 = global_parts(&p2, &s2.u, &a, budget)?;
            for (name, r, r2) in [("interior", i.ratio(), i2.ratio()), ("global", g.ratio(), g2.ratio())] {
                out.push(
                    VerificationRecord::inequality(
                        SUITE_SCHAUDER,
                        format!("{name}_scaling"),
                        "ratio unchanged under (u, f, phi) -> 2 (u, f, phi)",
                        fixture.clone(),
                        (r2 - r).abs(),
                        1e-12 * r,
                        0.0,
                    )
                    .with_floor(0.0),
                );
            }
        }
        ratios.push((i.ratio(), g.ratio()));
    }
    for (k, name) in ["interior", "global"].iter().enumerate() {
        let (r1, r2) = if k == 0 {
            (ratios[0].0, ratios[1].0)
        } else {
            (ratios[0].1, ratios[1].1)
        };
        out.push(
            VerificationRecord::inequality(
                SUITE_SCHAUDER,
                format!("{name}_refinement"),
                "|r(h/2) - r(h)| <= tolerance * r(h)",
                fixture.clone(),
                (r2 - r1).abs(),
                tolerance * r1,
                0.0,
            )
            .with_note(format!("r(h) = {r1}, r(h/2) = {r2}")),
        );
    }
    Ok(out)
}

pub fn alpha_constant(_: &[f64]) -> f64 {
    0.5
}

pub fn alpha_variable(x: &[f64]) -> f64 {
    0.3 + 0.4 * x[0]
}

/// The ten manufactured problems: five solutions under the Laplacian with
/// constant α and under a variable operator with variable α.
pub fn schauder_suite(h: f64, tolerance: f64, budget: usize) -> Result<Vec<VerificationRecord>> {
    let mut out = Vec::new();
    for m in manufactured_solutions() {
        out.extend(schauder_stability(&m, &laplacian_coefficients(), alpha_constant, "a0.5", h, tolerance, budget)?);
        out.extend(schauder_stability(
            &m,
            &variable_coefficients(),
            alpha_variable,
            "a0.3+0.4x1",
            h,
            tolerance,
            budget,
        )?);
    }
    Ok(out)
}

/// Identity error and norm-equivalence bounds for `count` seeded SPD
/// matrices per dimension, each tested on `vectors` seeded vectors.
pub fn transform_suite(seed: u64, count: usize, vectors: usize) -> Result<Vec<VerificationRecord>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for dim in [2usize, 3] {
        for k in 0..count {
            let a = spd_matrix(&mut r, dim);
            let align = k % 2 == 1;
            let t = constant_coeff_transform(&a, align)?;
            let (lo, hi) = (t.report.big_lambda.powf(-0.5), t.report.lambda.powf(-0.5));
            let mut worst = 0.0f64;
            for _ in 0..vectors {
                let x = DVector::from_vec(random_vector(&mut r, dim));
                let px = (&t.p * &x).norm();
                let xn = x.norm();
                worst = worst.max((lo * xn - px) / xn).max((px - hi * xn) / xn);
            }
            let fixture = format!("spd dim={dim} #{k} align={align}");
            let dg = digest("transform", &[a.as_slice()]);
            out.push(
                VerificationRecord::inequality(SUITE_TRANSFORM, "identity", "max |P A P^T - I| <= 1e-10", fixture.clone(), t.report.identity_error, 0.0, 0.0)
                    .with_floor(1e-10)
                    .with_digest(dg.clone()),
            );
            out.push(
                VerificationRecord::inequality(
                    SUITE_TRANSFORM,
                    "equivalence",
                    "L^{-1/2}|x| <= |Px| <= l^{-1/2}|x|",
                    fixture,
                    worst,
                    0.0,
                    0.0,
                )
                .with_digest(dg),
            );
        }
    }
    Ok(out)
}

/// Sweep `L_t` from `Δ` to `Δ + b·D - 1` and check solvability and the sign
/// of `u` at every step, for `f ≥ 0` and `φ ≡ 0`.
pub fn sweep_suite(h: f64, steps: usize, budget: usize) -> Result<Vec<VerificationRecord>> {
    let lat = unit_square(h)?;
    let l1 = EllipticOperator::from_fns(
        lat.clone(),
        |_| [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]],
        |x| [1.0 + x[1], 0.5, 0.0],
        |_| -1.0,
    )?;
    let f = SampledField::from_fn(lat.clone(), |x| 1.0 + x[0] * x[1]);
    let phi = SampledField::zeros(lat.clone());
    let p = DirichletProblem::new(l1.clone(), f.clone(), phi.clone())?;
    let a = ExponentField::constant(&lat, 0.5)?;
    let opts = SolveOptions::default();
    let sweep = continuity_sweep(&l1, &p, steps, &a, &opts, budget)?;
    let l0 = EllipticOperator::laplacian(lat.clone());
    let mut out = Vec::new();
    let fnorm = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for s in &sweep {
        let lt = EllipticOperator::blend(&l0, &l1, s.t)?;
        let pt = DirichletProblem::new(lt, f.clone(), phi.clone())?;
        let res = crate::elliptic::interior_residual(&pt, &s.solution)?;
        let fixture = format!("t={}", s.t);
        out.push(
            VerificationRecord::inequality(SUITE_SWEEP, "solved", "interior residual <= tol (1 + |f|_inf)", fixture.clone(), res, 0.0, 0.0)
                .with_floor(opts.tol * (1.0 + fnorm)),
        );
        out.push(
            VerificationRecord::ratio(SUITE_SWEEP, "ratio", "|u_t|_{2,a} / |L_t u_t|_{0,a}", fixture, s.ratio)
                .with_note(format!("step change {}", s.step_change)),
        );
        let mut mp = max_principle_check(&pt, &s.solution, 1e-10);
        mp.suite = SUITE_SWEEP.into();
        mp.id = format!("max_principle_t{}", s.t);
        out.push(mp);
    }
    Ok(out)
}

/// Maximum principle on the manufactured variable operator with `f ≥ 0`.
pub fn max_principle_fixtures(h: f64) -> Result<Vec<VerificationRecord>> {
    let lat = unit_square(h)?;
    let mut out = Vec::new();
    let sources: [(&str, fn(&[f64]) -> f64); 3] = [
        ("one", |_| 1.0),
        ("bump", |x| (PI * x[0]).sin().powi(2) * x[1]),
        ("corner", |x| (x[0] - 0.5).max(0.0) * (x[1] - 0.5).max(0.0)),
    ];
    for (name, src) in sources {
        let co = variable_coefficients();
        let op = EllipticOperator::from_fns(lat.clone(), co.a, co.b, co.c)?;
        let p = DirichletProblem::new(op, SampledField::from_fn(lat.clone(), src), SampledField::zeros(lat.clone()))?;
        let s = solve_dirichlet(&p, &SolveOptions::default())?;
        let mut r = max_principle_check(&p, &s.u, 1e-10);
        r.fixture = format!("{name} variable h={h}");
        out.push(r);
    }
    debug_assert!(lat.count(NodeClass::Interior) > 0);
    Ok(out)
}
